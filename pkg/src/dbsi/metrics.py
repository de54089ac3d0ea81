"""Misalignment metrics and trace aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NPM_FLOOR_DB = -300.0


def npm(h, hhat, variant: str = "literal") -> float:
    """Normalized projection misalignment in dB.

    ``literal``:      ``||h - (h^T hhat / h^T h) hhat|| / ||hhat||``
    ``conventional``: ``||h - (h^T hhat / hhat^T hhat) hhat|| / ||h||``

    The conventional form is invariant to the scale of ``hhat``; the literal
    one is not, and only coincides with it for unit-norm vectors.  Results
    are floored at -300 dB.
    """
    h = np.asarray(h, dtype=float).ravel()
    hhat = np.asarray(hhat, dtype=float).ravel()
    if h.shape != hhat.shape:
        raise ValueError(f"shape mismatch {h.shape} vs {hhat.shape}")
    nh = float(hhat @ hhat)
    if nh == 0.0:
        raise ValueError("estimate is the zero vector")
    if variant == "literal":
        err = np.linalg.norm(h - (h @ hhat) / (h @ h) * hhat) / np.sqrt(nh)
    elif variant == "conventional":
        err = np.linalg.norm(h - (h @ hhat) / nh * hhat) / np.linalg.norm(h)
    else:
        raise ValueError(f"unknown NPM variant {variant!r}")
    if err <= 0.0 or not np.isfinite(err):
        return NPM_FLOOR_DB if err <= 0.0 else float("inf")
    return max(20.0 * np.log10(err), NPM_FLOOR_DB)


@dataclass
class RunTrace:
    """Per-frame record of one run (or of an aggregate over runs).

    Per-node arrays are shaped ``(frames, M)``; ``tx`` holds transmit counts
    per phase tag summed over nodes, shaped ``(frames, tags)``.
    """

    npm_literal_db: np.ndarray
    npm_conventional_db: np.ndarray
    norm_hhat: np.ndarray
    node_norms: np.ndarray
    gamma: np.ndarray
    eta: np.ndarray
    phi: np.ndarray
    tx: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    ARRAYS = ("npm_literal_db", "npm_conventional_db", "norm_hhat", "node_norms",
              "gamma", "eta", "phi", "tx")

    def __len__(self):
        return len(self.npm_literal_db)

    @property
    def frames(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def M(self) -> int:
        return self.node_norms.shape[1]

    def npm_db(self, variant: str = "literal") -> np.ndarray:
        return self.npm_literal_db if variant == "literal" else self.npm_conventional_db

    def map_arrays(self, fn) -> "RunTrace":
        kw = {name: fn(getattr(self, name)) for name in self.ARRAYS}
        return RunTrace(**kw, label=self.label, meta=dict(self.meta))


def _stat(stack: np.ndarray, statistic: str) -> np.ndarray:
    if statistic == "median":
        return np.median(stack, axis=0)
    if statistic == "mean":
        return np.mean(stack, axis=0)
    raise ValueError(f"unknown statistic {statistic!r}")


def aggregate_monte_carlo(traces, statistic: str = "median") -> RunTrace:
    """Per-frame median (or mean) across runs of every trace array."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to aggregate")
    lengths = {len(t) for t in traces}
    if len(lengths) != 1:
        raise ValueError(f"traces have different lengths {sorted(lengths)}")
    kw = {}
    for name in RunTrace.ARRAYS:
        stack = np.stack([getattr(t, name) for t in traces])
        if name == "tx":
            kw[name] = _stat(stack.astype(float), statistic)
        else:
            with np.errstate(all="ignore"):
                kw[name] = _stat(stack, statistic)
    return RunTrace(**kw, label=traces[0].label, meta={"runs": len(traces), "statistic": statistic})


def moving_average(trace, window: int = 51) -> np.ndarray:
    """Centered moving average; windows shrink at the edges instead of padding."""
    if window < 1:
        raise ValueError("window must be positive")
    x = np.asarray(trace, dtype=float)
    n = x.shape[0]
    if window == 1 or n == 0:
        return x.copy()
    half = window // 2
    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + (window - 1 - half), n - 1) + 1
    counts = (hi - lo).reshape((-1,) + (1,) * (x.ndim - 1))
    return (csum[hi] - csum[lo]) / counts


def post_convergence_mean(trace, last_k: int = 500) -> float:
    x = np.asarray(trace, dtype=float)
    if last_k < 1 or x.shape[0] < last_k:
        raise ValueError(f"trace of length {x.shape[0]} is shorter than {last_k} frames")
    return float(np.mean(x[-last_k:]))


def first_crossing(trace, threshold: float) -> int | None:
    """First frame at which ``trace <= threshold``, or None."""
    hits = np.flatnonzero(np.asarray(trace) <= threshold)
    return int(hits[0]) if hits.size else None
