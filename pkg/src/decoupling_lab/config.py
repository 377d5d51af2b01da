"""Run configuration: one JSON file with a section per module, dot-path overrides."""
from __future__ import annotations

import copy
import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from .bg_engine import Constants
from .geometry import is_dyadic


class ConfigError(ValueError):
    pass


@dataclass
class AmbientCfg:
    n: int = 2
    D: int = 4
    D_list: list = field(default_factory=lambda: [4, 8, 16])
    eps: float = 0.1
    L: float = 4.0
    D0: int | None = 2


@dataclass
class NormsCfg:
    which: str = "decoupling"          # lp | decoupling | broad | max | xi
    p: float = 4.0
    k: int = 2
    A: int = 1
    M: int = 2
    search_mode: str = "auto"
    candidate_strategy: str = "mixed"
    candidate_budget: int = 256
    candidate_samples: int = 16
    sample_budget: int = 200_000
    spacing: float = 0.125
    quad_mode: str = "auto"
    region_side: float | None = None   # default D^2


@dataclass
class LadderCfg:
    R: int | None = None
    K: list | None = None
    A: list | None = None
    m: int = 2


@dataclass
class EnsembleCfg:
    kind: str = "random-phase"
    density: int = 2
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    field_path: str | None = None      # read this field-v1 file instead of generating


@dataclass
class DecomposeCfg:
    mode: str = "steps"                # steps | recursion
    k: int = 2
    A: int = 16
    M: int = 4
    D0: int = 2
    region_side: float | None = None   # default D^2


@dataclass
class SweepCfg:
    mode: str = "theorem"              # theorem | conjecture
    v_strategy: str = "normals"
    D0_rule: str = "quarter"           # quarter: max(2, D/4) | fixed: ambient D0
    run_id: str = "sweep"


@dataclass
class VerifyCfg:
    K: int = 16
    D: int = 4
    n: int = 1
    k: int = 2
    p: float = 4.0
    A: int = 1
    lam: float | None = None           # default: a dyadic level near the bucket's typical modulus
    regime_D: list = field(default_factory=lambda: [8, 16, 32])
    regime_p: list = field(default_factory=lambda: [10 / 3, 3.5, 4.0])
    octaves: int = 20


@dataclass
class SuiteCfg:
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    sizes: list = field(default_factory=lambda: [[1, 4], [1, 8], [2, 4]])


@dataclass
class OutputCfg:
    dir: str = "out"
    prefix: str = "run"


@dataclass
class RunConfig:
    ambient: AmbientCfg = field(default_factory=AmbientCfg)
    norms: NormsCfg = field(default_factory=NormsCfg)
    ladder: LadderCfg = field(default_factory=LadderCfg)
    constants: Constants = field(default_factory=Constants)
    ensemble: EnsembleCfg = field(default_factory=EnsembleCfg)
    decompose: DecomposeCfg = field(default_factory=DecomposeCfg)
    sweep: SweepCfg = field(default_factory=SweepCfg)
    verify: VerifyCfg = field(default_factory=VerifyCfg)
    suite: SuiteCfg = field(default_factory=SuiteCfg)
    output: OutputCfg = field(default_factory=OutputCfg)
    seed: int = 0
    workers: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, data, path=""):
    if not isinstance(data, dict):
        raise ConfigError(f"section {path or '<root>'} must be an object")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, val in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key {path + key!r}")
        default = getattr(cls(), key) if key in known else None
        if is_dataclass(default):
            kwargs[key] = _build(type(default), val, f"{path}{key}.")
        else:
            kwargs[key] = val
    return cls(**kwargs)


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise ConfigError(f"unknown config section in override {dotted!r}")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigError(f"unknown config key in override {dotted!r}")
    node[keys[-1]] = value


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    data = RunConfig().to_dict()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            user = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
        merged = copy.deepcopy(data)
        _merge(merged, user, "")
        data = merged
    for k, v in (overrides or {}).items():
        apply_override(data, k, v)
    cfg = _build(RunConfig, data)
    validate(cfg)
    return cfg


def _merge(base: dict, user: dict, path: str) -> None:
    if not isinstance(user, dict):
        raise ConfigError(f"section {path or '<root>'} must be an object")
    for k, v in user.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            _merge(base[k], v, f"{path}{k}.")
        else:
            base[k] = v


def _dyadic(name, x, lo=2):
    if not isinstance(x, int) or isinstance(x, bool) or x < lo or not is_dyadic(x):
        raise ConfigError(f"{name}={x!r} must be a power of two >= {lo}")


def validate(cfg: RunConfig) -> None:
    """Check every field against the preconditions of the module that uses it."""
    a, nm = cfg.ambient, cfg.norms
    if not isinstance(a.n, int) or a.n < 1:
        raise ConfigError("ambient.n must be a positive integer")
    _dyadic("ambient.D", a.D)
    for D in a.D_list:
        _dyadic("ambient.D_list entry", D)
    if a.D0 is not None:
        _dyadic("ambient.D0", a.D0)
        if a.D0 > a.D:
            raise ConfigError("ambient.D0 must not exceed ambient.D")
    if not a.eps > 0:
        raise ConfigError("ambient.eps must be positive")
    if nm.which not in ("lp", "decoupling", "broad", "max", "xi"):
        raise ConfigError(f"norms.which={nm.which!r}: choose lp, decoupling, broad, max or xi")
    if not nm.p >= 2:
        raise ConfigError("norms.p must be >= 2")
    if not 2 <= nm.k <= a.n + 1:
        raise ConfigError(f"norms.k must lie in 2..n+1 = {a.n + 1}")
    if nm.A < 1 or nm.M < 1:
        raise ConfigError("norms.A and norms.M must be >= 1")
    if nm.search_mode not in ("exact", "greedy", "auto"):
        raise ConfigError("norms.search_mode must be exact, greedy or auto")
    if nm.candidate_strategy not in ("normals", "sampled", "coordinate", "mixed"):
        raise ConfigError("norms.candidate_strategy must be normals, sampled, coordinate or mixed")
    if nm.quad_mode not in ("auto", "full-grid", "stratified-sample"):
        raise ConfigError("norms.quad_mode must be auto, full-grid or stratified-sample")
    if nm.sample_budget < 1000:
        raise ConfigError("norms.sample_budget must be >= 1000")
    if not nm.spacing > 0:
        raise ConfigError("norms.spacing must be positive")
    L = cfg.ladder
    if L.R is not None:
        _dyadic("ladder.R", L.R, 4)
    if (L.K is None) != (L.A is None):
        raise ConfigError("ladder.K and ladder.A must be overridden together")
    if cfg.decompose.mode == "recursion" and not 2 <= L.m <= a.n:
        raise ConfigError(f"ladder.m must lie in 2..n = {a.n}")
    for f in fields(Constants):
        if not getattr(cfg.constants, f.name) > 0:
            raise ConfigError(f"constants.{f.name} must be positive")
    e = cfg.ensemble
    from .lab import ENSEMBLE_KINDS
    if e.kind not in ENSEMBLE_KINDS:
        raise ConfigError(f"ensemble.kind must be one of {', '.join(ENSEMBLE_KINDS)}")
    if e.density < 1:
        raise ConfigError("ensemble.density must be >= 1")
    if e.field_path is not None and not Path(e.field_path).is_file():
        raise ConfigError(f"ensemble.field_path not found: {e.field_path}")
    d = cfg.decompose
    if d.mode not in ("steps", "recursion"):
        raise ConfigError("decompose.mode must be steps or recursion")
    if d.M * d.M > d.A:
        raise ConfigError(f"decompose needs M^2 <= A (M={d.M}, A={d.A})")
    _dyadic("decompose.D0", d.D0)
    if cfg.sweep.mode not in ("theorem", "conjecture"):
        raise ConfigError("sweep.mode must be theorem or conjecture")
    if cfg.sweep.v_strategy not in ("normals", "axis"):
        raise ConfigError("sweep.v_strategy must be normals or axis")
    if cfg.sweep.D0_rule not in ("quarter", "fixed"):
        raise ConfigError("sweep.D0_rule must be quarter or fixed")
    v = cfg.verify
    _dyadic("verify.K", v.K)
    _dyadic("verify.D", v.D)
    if v.D * v.D > v.K:
        raise ConfigError("verify needs D <= sqrt(K)")
    if not 2 <= v.p <= 2 * v.k / (v.k - 1):
        raise ConfigError("verify.p must lie in [2, p_k]")
    for s in cfg.suite.sizes:
        if len(s) != 2:
            raise ConfigError("suite.sizes entries are [n, D] pairs")
        _dyadic("suite.sizes D", s[1])
    if cfg.workers is not None and (not isinstance(cfg.workers, int) or cfg.workers < 1):
        raise ConfigError("workers must be a positive integer")


def resolve_workers(cfg: RunConfig) -> int:
    env = os.environ.get("DECOUPLING_LAB_WORKERS")
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ConfigError(f"DECOUPLING_LAB_WORKERS={env!r} is not an integer") from None
        if w < 1:
            raise ConfigError("DECOUPLING_LAB_WORKERS must be >= 1")
        return w
    return cfg.workers or (os.cpu_count() or 1)
