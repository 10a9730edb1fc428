import math

from dime.figures import render_figures


def test_render_every_figure_kind(tmp_path):
    data = {
        "quality": [
            {"strategy": "heal", "mean_indirect_influence": 5.0, "ci_lo": 4.0, "ci_hi": 6.0},
            {"strategy": "random", "mean_indirect_influence": 2.0, "ci_lo": 1.5, "ci_hi": 2.5},
        ],
        "scale_k": [
            {"K": 2, "strategy": "heal", "mean_indirect_influence": 5.0},
            {"K": 4, "strategy": "heal", "mean_indirect_influence": 8.0},
            {"K": 2, "strategy": "greedy", "mean_indirect_influence": 4.0},
            {"K": 4, "strategy": "greedy", "mean_indirect_influence": 6.0},
        ],
        "deviation": [
            {"deviations": d, "mean_indirect_influence": 10.0 - d} for d in range(6)
        ],
        "runtime": [
            {"n_nodes": 60, "mean_wall_time_s": 3.0},
            {"n_nodes": 250, "mean_wall_time_s": 60.0},
        ],
        "sensitivity": [
            {"true_u": u, "true_p": p, "loss_percent": 10 * u + p}
            for u in (0.1, 0.2, 0.3)
            for p in (0.5, 0.6, 0.7)
        ],
    }
    written = render_figures("any", data, tmp_path / "out")
    assert len(written) == len(data)
    for path in written:
        assert path.stat().st_size > 1000


def test_render_skips_empty(tmp_path):
    assert render_figures("quality", {"quality": []}, tmp_path / "x") == []
