"""Command-line entry points: experiment runner, session service, generator."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .experiments import run_experiment, spec_from_json
from .network import decorate_uniform, generate_watts_strogatz, network_json
from .seeding import NS_NETWORK_GEN, child_rng


def write_csv(path: Path, rows: list[dict]) -> None:
    """Write rows with a stable field order (first-seen across all rows)."""
    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, restval="", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _cmd_run(args: argparse.Namespace) -> int:
    doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    if args.seed is not None:
        doc["seed"] = args.seed
    tasp_doc = doc.setdefault("tasp", {})
    if args.delta is not None:
        tasp_doc["delta"] = args.delta
    if args.nsim is not None:
        tasp_doc["nsim"] = args.nsim
    if args.ucb_c is not None:
        tasp_doc["ucb_c"] = args.ucb_c
    if args.aggregation is not None:
        tasp_doc["aggregation"] = args.aggregation
    spec = spec_from_json(doc)

    output = run_experiment(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, output.rows)
    stem = out.with_suffix("")
    write_csv(Path(f"{stem}_summary.csv"), output.summaries)
    written = [str(out), f"{stem}_summary.csv"]

    if args.plot_data:
        for name, data in output.figure_data.items():
            path = Path(f"{stem}_fig_{name}.csv")
            write_csv(path, data)
            written.append(str(path))
    if args.figures:
        from .figures import render_figures

        for path in render_figures(spec.kind, output.figure_data, stem):
            written.append(str(path))
    for path in written:
        print(path)
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    static_dir = args.static_dir
    if static_dir is None and Path("frontend/index.html").is_file():
        static_dir = "frontend"
    app = create_app(
        data_dir=Path(args.data_dir), budget_ms=args.budget_ms, static_dir=static_dir
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_gen(args: argparse.Namespace) -> int:
    rng = child_rng(args.seed, NS_NETWORK_GEN, args.n)
    net = generate_watts_strogatz(n=args.n, k=args.k, beta=args.beta, rng=rng)
    net = decorate_uniform(
        net, p=args.p, u=args.u, uncertain_fraction=args.uncertain_fraction, rng=rng
    )
    text = network_json(net)
    if args.out == "-":
        print(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
        print(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dime",
        description="Sequential influence-maximization planning on uncertain networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment spec, write CSV + figures")
    run.add_argument("--spec", required=True, help="experiment spec JSON file")
    run.add_argument("--out", default="results.csv", help="per-run results CSV path")
    run.add_argument("--plot-data", action="store_true",
                     help="also write per-figure aggregate CSVs")
    run.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                     help="render PNG figures alongside the CSVs")
    run.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    run.add_argument("--delta", type=int, default=None, help="determinization count")
    run.add_argument("--nsim", type=int, default=None, help="simulations per determinization")
    run.add_argument("--ucb-c", type=float, default=None, help="UCB1 exploration constant")
    run.add_argument("--aggregation", choices=["mean", "weighted"], default=None)
    run.set_defaults(func=_cmd_run)

    serve = sub.add_parser("serve", help="start the planning session HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--data-dir", default="./sessions")
    serve.add_argument("--budget-ms", type=int, default=10000,
                       help="soft planning budget per recommendation")
    serve.add_argument("--static-dir", default=None,
                       help="serve the operator console from this directory at /app")
    serve.set_defaults(func=_cmd_serve)

    gen = sub.add_parser("gen", help="generate a decorated small-world network JSON")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--k", type=int, default=6)
    gen.add_argument("--beta", type=float, default=0.1)
    gen.add_argument("--p", type=float, default=0.1)
    gen.add_argument("--u", type=float, default=0.6)
    gen.add_argument("--uncertain-fraction", type=float, default=0.3)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="-")
    gen.set_defaults(func=_cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
