"""Static 5-node ring: median NPM over time for ideal, fixed-gamma and adaptive-gamma norm estimation.

    python scripts/static5.py --runs 30 --output out/static5
"""

import argparse

from dbsi.config import apply_overrides, preset
from dbsi.metrics import first_crossing, moving_average, post_convergence_mean
from dbsi.runner import emit, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=30)
    ap.add_argument("--frames", type=int, default=None)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--output", default="out/static5")
    ap.add_argument("-o", "--override", action="append", default=[])
    args = ap.parse_args()

    overrides = [f"monte_carlo_runs={args.runs}", f"workers={args.workers}"] + args.override
    if args.frames:
        overrides.append(f"frame_count={args.frames}")
    cfg = apply_overrides(preset("static5"), overrides)
    result = run(cfg)
    emit(result, args.output)

    k = min(cfg.post_convergence_frames, cfg.frame_count)
    print(f"{'variant':<16}{'post-conv NPM':>15}{'frames to -15 dB':>18}")
    for label, agg in result.aggregates.items():
        trace = agg.npm_db(cfg.npm_variant)
        hit = first_crossing(moving_average(trace, cfg.smoothing_window), -15.0)
        print(f"{label:<16}{post_convergence_mean(trace, k):>15.2f}{str(hit):>18}")
    print(f"results in {args.output}")


if __name__ == "__main__":
    main()
