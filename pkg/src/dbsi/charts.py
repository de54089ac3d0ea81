"""Minimal SVG line charts of NPM and norm trajectories."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from dbsi.metrics import moving_average  # noqa: E402

plt.rcParams["svg.hashsalt"] = "dbsi"


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def emit_charts(traces: dict, path, *, ylabel: str = "NPM [dB]", events=(), smoothing: int = 1,
                references=None, title: str = "") -> Path:
    """Line chart of one curve per label; ``traces`` maps label -> 1-D array.

    ``events`` draws dashed vertical markers; ``references`` maps label ->
    (frames, values) step functions drawn dot-dashed.
    """
    if not traces or any(np.asarray(t).size == 0 for t in traces.values()):
        raise ValueError("nothing to plot")
    fig, ax = plt.subplots(figsize=(7, 3.5))
    plot_traces(ax, traces, ylabel=ylabel, events=events, smoothing=smoothing,
                references=references, title=title)
    fig.tight_layout()
    return _save(fig, Path(path))


def plot_traces(ax, traces: dict, *, ylabel: str = "NPM [dB]", events=(), smoothing: int = 1,
                references=None, title: str = ""):
    for label, y in traces.items():
        y = np.asarray(y, dtype=float)
        ax.plot(np.arange(y.size), moving_average(y, smoothing) if smoothing > 1 else y,
                label=label, linewidth=1.0)
    for label, (xs, ys) in (references or {}).items():
        ax.step(xs, ys, where="post", linestyle="-.", linewidth=0.8, color="k", label=label)
    for ev in events:
        ax.axvline(ev, linestyle="--", color="0.4", linewidth=0.8)
    ax.set_xlabel("frame")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    return ax


def render_scenario_charts(aggregates: dict, out_dir, cfg) -> list[Path]:
    out_dir = Path(out_dir)
    events = [e["frame"] for e in cfg.rescale if e["frame"] > 0]
    variant = cfg.npm_variant
    written = [emit_charts({lab: tr.npm_db(variant) for lab, tr in aggregates.items()},
                           out_dir / "npm.svg", events=events, smoothing=cfg.smoothing_window,
                           title=f"{cfg.name}: median {variant} NPM")]
    norm_traces = {}
    # per-node norm curves of every fixed-gamma variant would swamp the chart
    shown = {lab: tr for lab, tr in aggregates.items() if not lab.startswith("fixed")} or aggregates
    for lab, tr in shown.items():
        norm_traces[f"{lab} |hhat|"] = tr.norm_hhat
        for i in range(tr.M):
            norm_traces[f"{lab} |hhat_{i}|"] = tr.node_norms[:, i]
    refs = None
    if cfg.rescale:
        T = cfg.frame_count
        xs = [e["frame"] for e in cfg.rescale] + [T]
        refs = {}
        for i in range(len(cfg.rescale[0]["norms"])):
            ys = [e["norms"][i] / np.linalg.norm(e["norms"]) for e in cfg.rescale]
            refs[f"true |h_{i}|/|h|"] = (xs, ys + ys[-1:])
    written.append(emit_charts(norm_traces, out_dir / "norms.svg", ylabel="norm", events=events,
                               smoothing=cfg.smoothing_window, references=refs,
                               title=f"{cfg.name}: median norms"))
    return written
