// Deterministic force-directed layout: same session id, same picture
// every round, so operators aren't chasing nodes across refreshes.

import type { NetworkDoc } from "./model.js";

export interface Point {
  x: number;
  y: number;
}

function hashString(text: string): number {
  let h = 2166136261 >>> 0;
  for (let i = 0; i < text.length; i++) {
    h = Math.imul(h ^ text.charCodeAt(i), 16777619) >>> 0;
  }
  return h >>> 0;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function computeLayout(
  doc: NetworkDoc,
  seedText: string,
  width = 640,
  height = 420,
  iterations = 200,
): Point[] {
  const n = doc.n_nodes;
  if (n === 0) return [];
  const rand = mulberry32(hashString(seedText));
  const cx = width / 2;
  const cy = height / 2;
  const radius = Math.min(width, height) * 0.35;
  const pos: Point[] = [];
  for (let i = 0; i < n; i++) {
    const angle = (2 * Math.PI * i) / n;
    pos.push({
      x: cx + radius * Math.cos(angle) + (rand() - 0.5) * 20,
      y: cy + radius * Math.sin(angle) + (rand() - 0.5) * 20,
    });
  }
  // undirected springs; one entry per node pair regardless of direction
  const ties = new Map<string, [number, number]>();
  for (const e of doc.edges) {
    const a = Math.min(e.src, e.dst);
    const b = Math.max(e.src, e.dst);
    ties.set(`${a}-${b}`, [a, b]);
  }
  const springLength = radius * 1.2 / Math.sqrt(Math.max(n, 1));
  const repulsion = (radius * radius) / Math.max(n, 1) * 2.0;

  for (let it = 0; it < iterations; it++) {
    const cool = 1 - it / iterations;
    const fx = new Array<number>(n).fill(0);
    const fy = new Array<number>(n).fill(0);
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        let dx = pos[i].x - pos[j].x;
        let dy = pos[i].y - pos[j].y;
        let d2 = dx * dx + dy * dy;
        if (d2 < 1e-6) {
          dx = rand() - 0.5;
          dy = rand() - 0.5;
          d2 = dx * dx + dy * dy;
        }
        const f = repulsion / d2;
        fx[i] += dx * f;
        fy[i] += dy * f;
        fx[j] -= dx * f;
        fy[j] -= dy * f;
      }
    }
    for (const [a, b] of ties.values()) {
      const dx = pos[b].x - pos[a].x;
      const dy = pos[b].y - pos[a].y;
      const d = Math.sqrt(dx * dx + dy * dy) || 1;
      const f = (d - springLength * 3) * 0.02;
      fx[a] += (dx / d) * f * d * 0.01 + (dx / d) * f;
      fy[a] += (dy / d) * f * d * 0.01 + (dy / d) * f;
      fx[b] -= (dx / d) * f * d * 0.01 + (dx / d) * f;
      fy[b] -= (dy / d) * f * d * 0.01 + (dy / d) * f;
    }
    for (let i = 0; i < n; i++) {
      fx[i] += (cx - pos[i].x) * 0.01;
      fy[i] += (cy - pos[i].y) * 0.01;
      const step = Math.min(8 * cool + 1, Math.hypot(fx[i], fy[i]));
      const norm = Math.hypot(fx[i], fy[i]) || 1;
      pos[i].x += (fx[i] / norm) * step;
      pos[i].y += (fy[i] / norm) * step;
      pos[i].x = Math.max(20, Math.min(width - 20, pos[i].x));
      pos[i].y = Math.max(20, Math.min(height - 20, pos[i].y));
    }
  }
  return pos;
}
