"""Monte-Carlo orchestration of scenario variants and result emission."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dbsi import bus as _bus
from dbsi.admm import Network
from dbsi.bus import CostReport
from dbsi.config import ScenarioConfig, Variant, validate
from dbsi.crossrelation import batch_oracle_estimate, global_cr_matrix
from dbsi.metrics import RunTrace, aggregate_monte_carlo, npm
from dbsi.normest import NormEstimator
from dbsi.signals import all_frames, generate_channels, generate_stream, make_rng
from dbsi.weights import averaging_weights, uniform_weights

log = logging.getLogger(__name__)


@dataclass
class RunData:
    """Signals and ground truth shared by all variants of one seed."""

    frames: np.ndarray  # (T, M, L)
    references: np.ndarray  # (T, M*L) unit-norm true stacked channel per frame
    true_block_norms: np.ndarray  # (T, M) ||h_i|| / ||h||
    init: np.ndarray  # (M, L), unit Frobenius norm
    oracle_npm_db: float
    oracle_degenerate: bool


def make_run_data(cfg: ScenarioConfig, run_index: int) -> RunData:
    topo = cfg.topology.build()
    seed = np.random.SeedSequence(cfg.base_seed + run_index)
    ch_seed, src_seed, noise_seed, init_seed = seed.spawn(4)
    schedule = [(e["frame"], e["norms"]) for e in cfg.rescale]
    channels = generate_channels(topo.M, cfg.L, cfg.norm_low, cfg.norm_high, ch_seed, schedule)
    stream = generate_stream(channels, cfg.frame_count, cfg.L, cfg.snr_db, noise_seed,
                             hop=cfg.hop, snr_reference=cfg.snr_reference, source_seed=src_seed)
    frames = all_frames(stream, cfg.L)
    T = cfg.frame_count
    refs = np.empty((T, topo.M * cfg.L))
    block = np.empty((T, topo.M))
    for n in range(T):
        h = stream.channels_for_frame(n).h
        nrm = np.linalg.norm(h)
        refs[n] = h.ravel() / nrm
        block[n] = np.linalg.norm(h, axis=1) / nrm
    init = make_rng(init_seed).standard_normal((topo.M, cfg.L))
    init /= np.linalg.norm(init)
    R = global_cr_matrix(frames)
    est, degenerate = batch_oracle_estimate(R)
    return RunData(frames, refs, block, init, npm(refs[-1], est, "conventional"), degenerate)


def build_network(cfg: ScenarioConfig, variant: Variant, init: np.ndarray, audit: bool = False):
    topo = cfg.topology.build()
    info = {}
    estimator = None
    if variant.mode == "distributed":
        kind = variant.weights or cfg.weights
        if kind == "uniform":
            wm, fell_back = uniform_weights(topo), False
        else:
            wm, fell_back = averaging_weights(topo, kind)
        info = {"weights": wm.kind, "weights_fallback": fell_back,
                "W": wm.W.tolist(), "convergence_factor": wm.convergence_factor}
        estimator = NormEstimator(wm, K=variant.K, gamma=variant.gamma_mode(), eta_mode=variant.eta_mode)
    net = Network(topo, cfg.L, init, rho=cfg.rho, lam=cfg.forgetting_lambda, mode=variant.mode,
                  estimator=estimator, eps=cfg.cr_eps, audit=audit)
    return net, info


def simulate(cfg: ScenarioConfig, variant: Variant, data: RunData, audit: bool = False):
    """Run one variant on one seed's data; returns ``(trace, cost_report, network)``."""
    net, info = build_network(cfg, variant, data.init, audit=audit)
    T, M = cfg.frame_count, net.M
    lit = np.empty(T)
    conv = np.empty(T)
    norm_hhat = np.empty(T)
    node_norms = np.empty((T, M))
    gamma = np.full((T, M), np.nan)
    eta = np.full((T, M), np.nan)
    phi = np.full((T, M), np.nan)
    for n in range(T):
        net.step_frame(n, data.frames[n])
        hhat = net.stacked_estimate()
        lit[n] = npm(data.references[n], hhat, "literal")
        conv[n] = npm(data.references[n], hhat, "conventional")
        norm_hhat[n] = np.linalg.norm(hhat)
        node_norms[n] = net.block_norms()
        if net.estimator is not None:
            for i, st in enumerate(net.estimator.states):
                gamma[n, i], eta[n, i], phi[n, i] = st.gamma, st.eta, st.phi
    tx, rx = net.bus.counts()
    cost = CostReport(tx, rx, variant.mode,
                      tuple(len(nb) for nb in net.topology.neighborhoods),
                      K=variant.K if variant.mode == "distributed" else None)
    trace = RunTrace(lit, conv, norm_hhat, node_norms, gamma, eta, phi,
                     tx.sum(axis=1), label=variant.label, meta=info)
    return trace, cost, net


def run_seed(cfg: ScenarioConfig, run_index: int):
    data = make_run_data(cfg, run_index)
    out = {}
    for v in cfg.resolved_variants():
        trace, cost, _ = simulate(cfg, v, data)
        out[v.label] = (trace, cost if run_index == 0 else None)
    return out, data.oracle_npm_db, data.oracle_degenerate, data.true_block_norms


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    traces: dict  # label -> list[RunTrace]
    aggregates: dict  # label -> RunTrace (median)
    costs: dict  # label -> CostReport (run 0)
    metadata: dict
    true_block_norms: list = field(default_factory=list)

    def median(self, label: str) -> RunTrace:
        return self.aggregates[label]


def run(cfg: ScenarioConfig, workers: int | None = None) -> ScenarioResult:
    """Execute every Monte-Carlo run of every variant.

    Run ``r`` uses seed ``base_seed + r``; all variants of a run share the
    same signals and initialization.  Results are ordered by run index so
    the worker count never changes the output.
    """
    validate(cfg)
    workers = cfg.effective_workers() if workers is None else workers
    runs = range(cfg.monte_carlo_runs)
    if workers > 1 and cfg.monte_carlo_runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run_seed, [cfg] * len(runs), runs))
    else:
        results = [run_seed(cfg, r) for r in runs]
    labels = [v.label for v in cfg.resolved_variants()]
    traces = {lab: [res[0][lab][0] for res in results] for lab in labels}
    costs = {lab: results[0][0][lab][1] for lab in labels}
    aggregates = {lab: aggregate_monte_carlo(traces[lab], "median") for lab in labels}
    for lab in labels:
        aggregates[lab].label = lab
    oracle = [res[1] for res in results]
    topo = cfg.topology.build()
    meta = {
        "config": cfg.to_dict(),
        "topology": topo.describe(),
        "variants": {lab: traces[lab][0].meta for lab in labels},
        "cost_report": {lab: costs[lab].summary() for lab in labels},
        "batch_oracle": {
            "npm_conventional_db_per_run": oracle,
            "median_npm_conventional_db": float(np.median(oracle)),
            "degenerate_runs": [r for r, res in enumerate(results) if res[2]],
        },
        "flags": list(cfg.notes) + [
            "literal NPM is evaluated against the unit-norm true stacked channel",
        ],
    }
    return ScenarioResult(cfg, traces, aggregates, costs, meta,
                          [res[3] for res in results])


# --- output -------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def trace_columns(trace: RunTrace) -> list[tuple[str, np.ndarray]]:
    M = trace.M
    cols = [
        ("frame", trace.frames),
        ("npm_literal_db", trace.npm_literal_db),
        ("npm_conventional_db", trace.npm_conventional_db),
        ("norm_hhat", trace.norm_hhat),
    ]
    cols += [(f"norm_node{i}", trace.node_norms[:, i]) for i in range(M)]
    cols += [(f"gamma_{i}", trace.gamma[:, i]) for i in range(M)]
    cols += [(f"eta_{i}", trace.eta[:, i]) for i in range(M)]
    cols += [(f"phi_{i}", trace.phi[:, i]) for i in range(M)]
    cols += [(f"tx_{tag.replace('-', '_')}", trace.tx[:, k]) for k, tag in enumerate(_bus.TAGS)]
    return cols


def write_trace_csv(trace: RunTrace, path) -> Path:
    path = Path(path)
    cols = trace_columns(trace)
    lines = [",".join(name for name, _ in cols)]
    arrays = [arr for _, arr in cols]
    for n in range(len(trace)):
        lines.append(",".join(_fmt(a[n]) for a in arrays))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_trace_csv(path, label: str | None = None) -> RunTrace:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    col = {name: data[:, k] for k, name in enumerate(header)}
    M = sum(1 for name in header if name.startswith("norm_node"))

    def per_node(prefix):
        return np.stack([col[f"{prefix}{i}"] for i in range(M)], axis=1)

    tx = np.stack([col[f"tx_{t.replace('-', '_')}"] for t in _bus.TAGS], axis=1)
    return RunTrace(col["npm_literal_db"], col["npm_conventional_db"], col["norm_hhat"],
                    per_node("norm_node"), per_node("gamma_"), per_node("eta_"), per_node("phi_"),
                    tx, label=label or path.stem)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def emit(result: ScenarioResult, output_dir=None, charts: bool | None = None) -> list[Path]:
    """Write per-variant median CSVs, metadata.json and (optionally) SVG charts."""
    cfg = result.config
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for lab, agg in result.aggregates.items():
        written.append(write_trace_csv(agg, out / f"{lab}.csv"))
    if cfg.write_runs:
        runs_dir = out / "runs"
        runs_dir.mkdir(exist_ok=True)
        for lab, traces in result.traces.items():
            for r, tr in enumerate(traces):
                written.append(write_trace_csv(tr, runs_dir / f"{lab}_run{r:03d}.csv"))
    meta_path = out / "metadata.json"
    meta_path.write_text(json.dumps(_jsonable(result.metadata), indent=2, sort_keys=True) + "\n")
    written.append(meta_path)
    if cfg.charts if charts is None else charts:
        from dbsi.charts import render_scenario_charts
        written += render_scenario_charts(result.aggregates, out, cfg)
    return written
