"""Scenario configuration: dataclasses, TOML loading, overrides, presets.

Config files are TOML.  Top-level keys (all optional except where noted)::

    name                 str
    L                    int >= 1                  channel length
    frame_count          int >= 1
    hop                  int >= 1                  samples per frame advance
    snr_db               float or "inf"
    snr_reference        "source" | "channel"
    norm_low, norm_high  0 < low <= high           channel norm bounds
    rho                  float > 0                 ADMM penalty
    forgetting_lambda    0 < lambda <= 1
    cr_eps               float > 0                 initial P_i = eps * I
    weights              "best_constant" | "metropolis" | "uniform"
    npm_variant          "literal" | "conventional"  headline NPM column
    monte_carlo_runs     int >= 1
    base_seed            int                       run r uses seed base_seed + r
    workers              int >= 1                  (DBSI_WORKERS env overrides)
    smoothing_window     int >= 1
    post_convergence_frames int >= 1
    output_dir           str
    write_runs           bool                      also write one CSV per run
    charts               bool
    ideal                bool                      include the ideal-mode variant
    adaptive_K           list[int]                 adaptive-gamma variants
    gamma_grid           list[float]               fixed-gamma values ...
    K_grid               list[int]                 ... crossed with these K
    eta_mode             "neighborhood" | "local"  default for generated variants

    [topology]   kind = "ring" (M, neighbors_per_side) | "edges" (M, edges) | "complete" (M)
    [[rescale]]  frame = int, norms = [float, ...]      sorted by frame
    [[variants]] label, mode = "ideal"|"distributed", K, gamma ("adaptive" or a number),
                 eta_mode, weights     -- when present, replaces the generated variants
"""

from __future__ import annotations

import copy
import math
import os
import sys
from dataclasses import asdict, dataclass, field

from dbsi.errors import ConfigError, TopologyError
from dbsi.normest import GammaMode
from dbsi.topology import Topology, build_complete, build_custom, build_ring

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class TopologySpec:
    kind: str = "ring"
    M: int = 5
    neighbors_per_side: int = 1
    edges: list | None = None

    def build(self) -> Topology:
        try:
            if self.kind == "ring":
                return build_ring(self.M, self.neighbors_per_side)
            if self.kind == "complete":
                return build_complete(self.M)
            if self.kind == "edges":
                if self.edges is None:
                    raise ConfigError("topology kind 'edges' needs an edge list")
                return build_custom(self.M, self.edges)
        except TopologyError as exc:
            raise ConfigError(f"invalid topology: {exc}") from exc
        raise ConfigError(f"unknown topology kind {self.kind!r}")


@dataclass
class Variant:
    label: str
    mode: str = "distributed"
    K: int = 1
    gamma: str | float = "adaptive"
    eta_mode: str = "neighborhood"
    weights: str | None = None

    def gamma_mode(self) -> GammaMode:
        return GammaMode.parse(self.gamma)


@dataclass
class ScenarioConfig:
    name: str = "custom"
    topology: TopologySpec = field(default_factory=TopologySpec)
    L: int = 16
    frame_count: int = 5000
    hop: int = 1
    snr_db: float = 10.0
    snr_reference: str = "source"
    norm_low: float = 0.5
    norm_high: float = 2.0
    rescale: list = field(default_factory=list)
    rho: float = 20.0
    forgetting_lambda: float = 0.999
    cr_eps: float = 1e-6
    weights: str = "best_constant"
    npm_variant: str = "literal"
    monte_carlo_runs: int = 30
    base_seed: int = 0
    workers: int = 1
    smoothing_window: int = 51
    post_convergence_frames: int = 500
    output_dir: str = "out"
    write_runs: bool = False
    charts: bool = True
    ideal: bool = True
    adaptive_K: list = field(default_factory=lambda: [1])
    gamma_grid: list = field(default_factory=list)
    K_grid: list = field(default_factory=list)
    eta_mode: str = "neighborhood"
    variants: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def resolved_variants(self) -> list[Variant]:
        if self.variants:
            return [v if isinstance(v, Variant) else Variant(**v) for v in self.variants]
        out = []
        if self.ideal:
            out.append(Variant("ideal", mode="ideal"))
        for K in self.adaptive_K:
            out.append(Variant(f"adaptive_K{K}", K=int(K), gamma="adaptive", eta_mode=self.eta_mode))
        for K in self.K_grid:
            for g in self.gamma_grid:
                out.append(Variant(f"fixed{float(g):g}_K{K}", K=int(K), gamma=float(g),
                                   eta_mode=self.eta_mode))
        return out

    def effective_workers(self) -> int:
        env = os.environ.get("DBSI_WORKERS")
        if env:
            try:
                return max(1, int(env))
            except ValueError as exc:
                raise ConfigError(f"DBSI_WORKERS must be an integer, got {env!r}") from exc
        return self.workers

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(self.snr_db):
            d["snr_db"] = "inf"
        return d


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Check every range; raises ConfigError before anything runs."""
    topo = cfg.topology.build()
    _require(isinstance(cfg.L, int) and cfg.L >= 1, f"L must be a positive integer, got {cfg.L!r}")
    _require(isinstance(cfg.frame_count, int) and cfg.frame_count >= 1, "frame_count must be >= 1")
    _require(isinstance(cfg.hop, int) and cfg.hop >= 1, "hop must be >= 1")
    _require(not math.isnan(cfg.snr_db) and cfg.snr_db != -math.inf, "snr_db must be a number or inf")
    _require(cfg.snr_reference in ("source", "channel"), f"bad snr_reference {cfg.snr_reference!r}")
    _require(0 < cfg.norm_low <= cfg.norm_high, "need 0 < norm_low <= norm_high")
    _require(cfg.rho > 0, "rho must be positive")
    _require(0 < cfg.forgetting_lambda <= 1, "forgetting_lambda must lie in (0, 1]")
    _require(cfg.cr_eps > 0, "cr_eps must be positive")
    _require(cfg.npm_variant in ("literal", "conventional"), f"bad npm_variant {cfg.npm_variant!r}")
    _require(isinstance(cfg.monte_carlo_runs, int) and cfg.monte_carlo_runs >= 1, "monte_carlo_runs must be >= 1")
    _require(isinstance(cfg.workers, int) and cfg.workers >= 1, "workers must be >= 1")
    _require(cfg.smoothing_window >= 1, "smoothing_window must be >= 1")
    _require(cfg.post_convergence_frames >= 1, "post_convergence_frames must be >= 1")
    last = -1
    for entry in cfg.rescale:
        frame, norms = entry["frame"], entry["norms"]
        _require(isinstance(frame, int) and frame >= 0, f"rescale frame {frame!r} is invalid")
        _require(frame > last, "rescale entries must be sorted by frame without duplicates")
        _require(len(norms) == topo.M, f"rescale at frame {frame} needs {topo.M} norms")
        _require(all(v > 0 for v in norms), f"rescale at frame {frame} has a nonpositive norm")
        last = frame
    variants = cfg.resolved_variants()
    _require(variants, "no variants to run")
    labels = [v.label for v in variants]
    _require(len(set(labels)) == len(labels), f"duplicate variant labels in {labels}")
    for v in variants:
        _require(v.mode in ("ideal", "distributed"), f"variant {v.label}: bad mode {v.mode!r}")
        _require(isinstance(v.K, int) and v.K >= 1, f"variant {v.label}: K must be >= 1")
        _require(v.eta_mode in ("neighborhood", "local"), f"variant {v.label}: bad eta_mode")
        try:
            v.gamma_mode()
        except ValueError as exc:
            raise ConfigError(f"variant {v.label}: {exc}") from exc
        w = v.weights or cfg.weights
        _require(w in ("best_constant", "metropolis", "uniform"), f"variant {v.label}: bad weights {w!r}")
        if w == "uniform":
            _require(int(topo.adjacency.sum()) == topo.M**2, "uniform weights need a complete topology")
    return cfg


def _coerce_snr(v):
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        raise ConfigError(f"snr_db must be a number or 'inf', got {v!r}")
    return float(v)


_FIELDS = {f for f in ScenarioConfig.__dataclass_fields__}


def config_from_dict(d: dict) -> ScenarioConfig:
    d = copy.deepcopy(d)
    unknown = set(d) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    topo = d.pop("topology", {}) or {}
    if isinstance(topo, TopologySpec):
        topo = asdict(topo)
    t_unknown = set(topo) - set(TopologySpec.__dataclass_fields__)
    if t_unknown:
        raise ConfigError(f"unknown topology keys: {sorted(t_unknown)}")
    if "snr_db" in d:
        d["snr_db"] = _coerce_snr(d["snr_db"])
    for key in ("rho", "forgetting_lambda", "cr_eps", "norm_low", "norm_high"):
        if key in d:
            if not isinstance(d[key], (int, float)) or isinstance(d[key], bool):
                raise ConfigError(f"{key} must be a number, got {d[key]!r}")
            d[key] = float(d[key])
    variants = []
    for v in d.pop("variants", []) or []:
        if isinstance(v, Variant):
            variants.append(v)
            continue
        v_unknown = set(v) - set(Variant.__dataclass_fields__)
        if v_unknown:
            raise ConfigError(f"unknown variant keys: {sorted(v_unknown)}")
        if "label" not in v:
            raise ConfigError("every variant needs a label")
        variants.append(Variant(**v))
    rescale = [{"frame": e["frame"], "norms": [float(x) for x in e["norms"]]}
               for e in d.pop("rescale", []) or []]
    try:
        cfg = ScenarioConfig(topology=TopologySpec(**topo), variants=variants, rescale=rescale, **d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return validate(cfg)


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return config_from_dict(data)


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: ScenarioConfig, overrides) -> ScenarioConfig:
    """Apply ``key=value`` strings; dotted keys reach into ``topology``."""
    d = cfg.to_dict()
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, text = item.split("=", 1)
        key = key.strip()
        value = _parse_value(text.strip())
        target = d
        parts = key.split(".")
        for p in parts[:-1]:
            if not isinstance(target.get(p), dict):
                raise ConfigError(f"override key {key!r} does not name a section")
            target = target[p]
        if parts[-1] not in target:
            raise ConfigError(f"unknown override key {key!r}")
        target[parts[-1]] = value
    return config_from_dict(d)


DYNAMIC3_SCHEDULE = [
    {"frame": 0, "norms": [2.2, 0.5, 1.2]},
    {"frame": 5000, "norms": [2.2, 1.0, 1.2]},
    {"frame": 10000, "norms": [2.2, 0.5, 2.0]},
]


def preset_static5() -> ScenarioConfig:
    cfg = ScenarioConfig(
        name="static5",
        topology=TopologySpec("ring", M=5, neighbors_per_side=1),
        L=16, frame_count=5000, snr_db=10.0, snr_reference="source",
        norm_low=0.5, norm_high=2.0, rho=20.0, forgetting_lambda=0.999,
        monte_carlo_runs=30, base_seed=0, output_dir="out/static5",
        ideal=True, adaptive_K=[1], gamma_grid=[0.01, 0.1, 0.4], K_grid=[1, 2, 10],
    )
    return validate(cfg)


def preset_dynamic3() -> ScenarioConfig:
    cfg = ScenarioConfig(
        name="dynamic3",
        topology=TopologySpec("ring", M=3, neighbors_per_side=1),
        L=16, frame_count=15000, snr_db=10.0, snr_reference="source",
        rescale=copy.deepcopy(DYNAMIC3_SCHEDULE),
        rho=20.0, forgetting_lambda=0.997,
        monte_carlo_runs=30, base_seed=0, output_dir="out/dynamic3",
        ideal=True, adaptive_K=[1],
        notes=["3-node ring realized as the undirected 3-cycle: every neighborhood has 3 "
               "nodes including itself (a 2-node neighborhood on an undirected 3-ring is impossible)"],
    )
    return validate(cfg)


PRESETS = {"static5": preset_static5, "dynamic3": preset_dynamic3}


def preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def dump_toml(cfg: ScenarioConfig) -> str:
    """Serialize a config back to TOML (inverse of ``load_config``)."""

    def val(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int,)):
            return str(v)
        if isinstance(v, float):
            return '"inf"' if math.isinf(v) else repr(v)
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(val(x) for x in v) + "]"
        raise TypeError(v)

    d = cfg.to_dict()
    topo = d.pop("topology")
    rescale = d.pop("rescale")
    variants = d.pop("variants")
    lines = [f"{k} = {val(v)}" for k, v in d.items()]
    lines.append("")
    lines.append("[topology]")
    lines += [f"{k} = {val(v)}" for k, v in topo.items() if v is not None]
    for e in rescale:
        lines += ["", "[[rescale]]", f"frame = {e['frame']}", f"norms = {val(e['norms'])}"]
    for v in variants:
        lines += ["", "[[variants]]"] + [f"{k} = {val(x)}" for k, x in v.items() if x is not None]
    return "\n".join(lines) + "\n"
