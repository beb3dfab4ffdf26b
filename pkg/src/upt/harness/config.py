"""Experiment configuration, presets and YAML loading."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import yaml

from ..covmodel import CovarianceSpec

METHODS = ("UPT_ideal", "UPT_estimated", "BH", "BY", "oracle")
DESIGNS = ("gaussian", "uniform")
DEFAULT_TAUS = (2.0, 4.0, 6.0, 8.0)
T1_FACTORS = (1.10, 1.05, 1.00, 0.95, 0.90)


@dataclass(frozen=True)
class CovarianceConfig:
    kind: str = "identity"
    a: float = 0.5
    a1: float = 0.5
    a2: float = 0.1
    path: Optional[str] = None

    def spec(self, p) -> CovarianceSpec:
        if self.kind == "identity":
            return CovarianceSpec.identity(p)
        if self.kind == "block_diag":
            return CovarianceSpec.block_diag(p, self.a)
        if self.kind == "penta_diag":
            return CovarianceSpec.penta_diag(p, self.a1, self.a2)
        if self.kind == "custom":
            if self.path is None:
                raise ValueError("custom covariance needs 'path'")
            spec = CovarianceSpec.from_csv(self.path)
            if spec.p != p:
                raise ValueError(f"covariance file is {spec.p}x{spec.p}, config has p={p}")
            return spec
        raise ValueError(f"unknown covariance kind {self.kind!r}")


@dataclass(frozen=True)
class SignalConfig:
    """Signal draw. ``exact_count`` places ``ceil(p^(1-theta))`` signals, half of each sign."""

    theta: float = 0.5
    perturbation: float = 0.0
    signed: bool = True
    exact_count: bool = False


@dataclass(frozen=True)
class TuningConfig:
    q: Optional[float] = None
    K: Union[int, str] = 5
    sign_mode: str = "signed"
    penalty: str = "half"
    gram_threshold: Optional[float] = None
    max_component: int = 12
    clamp: bool = False
    two_sided_estimates: bool = True
    oracle_lambda: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "custom"
    p: int = 1000
    n: Optional[int] = None
    phi: Optional[float] = None
    covariance: CovarianceConfig = field(default_factory=CovarianceConfig)
    signal: SignalConfig = field(default_factory=SignalConfig)
    design: str = "gaussian"
    tau_grid: Tuple[float, ...] = DEFAULT_TAUS
    methods: Tuple[str, ...] = ("UPT_ideal", "UPT_estimated", "BH", "BY")
    alpha: float = 0.05
    reps: int = 100
    master_seed: int = 20240101
    t1_factors: Tuple[float, ...] = (1.0,)
    tuning: TuningConfig = field(default_factory=TuningConfig)
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.tau_grid:
            raise ValueError("tau_grid must be nonempty")
        if not self.t1_factors:
            raise ValueError("t1_factors must be nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if self.design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if (self.n is None) == (self.phi is None):
            raise ValueError("set exactly one of n / phi")
        if self.phi is not None and not 1 - self.signal.theta < self.phi < 1:
            raise ValueError(f"phi must lie in (1 - theta, 1) = ({1 - self.signal.theta}, 1)")
        if "oracle" in self.methods:
            if self.p > 12:
                raise ValueError("the oracle method enumerates configurations and needs p <= 12")
            if self.signal.perturbation:
                raise ValueError("the oracle method needs a point-mass signal (perturbation 0)")
        k = self.tuning.K
        if not (k == "auto" or (isinstance(k, int) and k >= 1)):
            raise ValueError("tuning.K must be a positive integer or 'auto'")

    @property
    def n_obs(self):
        return self.n if self.n is not None else int(round(self.p**self.phi))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["tau_grid"] = list(self.tau_grid)
        d["methods"] = list(self.methods)
        d["t1_factors"] = list(self.t1_factors)
        return d

    def digest(self):
        """Stable hash of every field that affects results."""
        d = self.to_dict()
        d.pop("out_dir", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_SECTIONS = {"covariance": CovarianceConfig, "signal": SignalConfig, "tuning": TuningConfig}
_TUPLES = ("tau_grid", "methods", "t1_factors")


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValueError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS and cls is ExperimentConfig:
            value = _build(_SECTIONS[key], value, f"{where}.{key}")
        elif key in _TUPLES:
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Build a config from nested mappings; unknown keys are rejected.

    With ``base``, the mapping overrides its fields (sections merge key-wise).
    """
    if base is not None:
        merged = base.to_dict()
        for key, value in data.items():
            if key in _SECTIONS and isinstance(value, dict):
                merged[key] = {**merged[key], **value}
            else:
                merged[key] = value
        data = merged
    return _build(ExperimentConfig, data, "config")


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    base = None
    if "preset" in data:
        base = preset(data.pop("preset"))
    return config_from_dict(data, base)


def _exp1():
    return ExperimentConfig(
        name="EXP1",
        p=5000,
        n=1000,
        covariance=CovarianceConfig(kind="block_diag", a=0.5),
        signal=SignalConfig(theta=0.5, perturbation=0.0),
        methods=("UPT_ideal", "UPT_estimated", "BH", "BY"),
        reps=100,
    )


def _exp2():
    return _exp1().replace(
        name="EXP2",
        covariance=CovarianceConfig(kind="penta_diag", a1=0.5, a2=0.1),
        signal=SignalConfig(theta=0.5, perturbation=0.5),
    )


def _exp3():
    return _exp2().replace(name="EXP3", methods=("UPT_ideal",), t1_factors=T1_FACTORS)


def _exp4():
    return _exp2().replace(name="EXP4", design="uniform")


def _exp5():
    return _exp4().replace(name="EXP5", methods=("UPT_ideal", "UPT_estimated", "BH"))


def _smoke():
    return _exp1().replace(name="SMOKE", p=1000, n=300, reps=20)


def table1_config(a):
    """BH on marginal t-tests with block correlation ``a``."""
    return ExperimentConfig(
        name=f"TABLE1-A{a:g}",
        p=1000,
        n=200,
        covariance=CovarianceConfig(kind="block_diag", a=a),
        signal=SignalConfig(theta=0.5, exact_count=True),
        tau_grid=(math.sqrt(2 * 0.7 * math.log(1000)),),
        methods=("BH",),
        reps=100,
    )


PRESETS = {
    "EXP1": _exp1,
    "EXP2": _exp2,
    "EXP3": _exp3,
    "EXP4": _exp4,
    "EXP5": _exp5,
    "SMOKE": _smoke,
}
TABLE1_AS = (0.0, 0.3, 0.5, 0.7, 0.9)


def preset(name) -> ExperimentConfig:
    key = name.upper()
    if key in PRESETS:
        return PRESETS[key]()
    if key.startswith("TABLE1-A"):
        return table1_config(float(key[len("TABLE1-A"):]))
    choices = sorted(PRESETS) + [f"TABLE1-A{a:g}" for a in TABLE1_AS]
    raise ValueError(f"unknown preset {name!r}; choose from {choices}")
