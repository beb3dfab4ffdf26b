"""Synthetic data from the rare/weak linear model ``Y = X beta + eps``.

All draws take an explicit :class:`numpy.random.Generator`.  Replicates get
their own streams from :func:`replicate_streams`, so results never depend on
execution order.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import csvio
from .covmodel import LowerTriangularFactor


@dataclass(frozen=True)
class SignalSpec:
    """Sparsity exponent plus signal magnitude.

    Give either ``r`` (magnitude ``sqrt(2 r log p)``) or ``tau`` directly.
    Nonzero coordinates get magnitude ``tau + Uniform[-u, u]`` with
    ``u = perturbation``, and a random sign when ``signed``.
    """

    theta: float
    r: Optional[float] = None
    tau: Optional[float] = None
    perturbation: float = 0.0
    signed: bool = True

    def __post_init__(self):
        if (self.r is None) == (self.tau is None):
            raise ValueError("set exactly one of r / tau")
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.perturbation < 0:
            raise ValueError("perturbation half-width must be >= 0")
        if self.r is not None and self.r < 0:
            raise ValueError("r must be >= 0")
        if self.tau is not None and self.tau < 0:
            raise ValueError("tau must be >= 0")

    def magnitude(self, p):
        if self.tau is not None:
            return float(self.tau)
        return math.sqrt(2 * self.r * math.log(p))

    def strength_exponent(self, p):
        """``r`` such that the magnitude equals ``sqrt(2 r log p)``."""
        if self.r is not None:
            return float(self.r)
        return self.tau**2 / (2 * math.log(p))

    def pi1(self, p):
        return float(p) ** (-self.theta)


@dataclass(frozen=True)
class SignalPattern:
    """Magnitude-free part of a coefficient draw.

    Sharing one pattern across a grid of magnitudes gives paired comparisons
    over the grid.
    """

    support: np.ndarray
    signs: np.ndarray
    offsets: np.ndarray

    def beta(self, tau):
        mags = np.where(self.support, tau + self.offsets, 0.0)
        return mags * self.signs


def draw_signal_pattern(p, theta, perturbation, signed, rng) -> SignalPattern:
    # Fixed draw order keeps streams aligned across specs.
    support = rng.random(p) < float(p) ** (-theta)
    flips = rng.random(p) < 0.5
    offsets = rng.uniform(-perturbation, perturbation, size=p) if perturbation > 0 else np.zeros(p)
    signs = np.where(flips & signed, -1.0, 1.0)
    return SignalPattern(support=support, signs=signs, offsets=np.where(support, offsets, 0.0))


def draw_signal_pattern_exact(p, count, perturbation, signed, rng) -> SignalPattern:
    """Exactly ``count`` signals at random positions; half of them negative when ``signed``."""
    if not 0 <= count <= p:
        raise ValueError(f"count must lie in [0, {p}], got {count}")
    pos = rng.permutation(p)[:count]
    support = np.zeros(p, dtype=bool)
    support[pos] = True
    signs = np.ones(p)
    if signed:
        signs[pos[rng.permutation(count)[: count // 2]]] = -1.0
    offsets = np.zeros(p)
    if perturbation > 0:
        offsets[pos] = rng.uniform(-perturbation, perturbation, size=count)
    return SignalPattern(support=support, signs=signs, offsets=offsets)


def draw_beta(p, spec: SignalSpec, rng):
    """Draw ``(beta, theta)``; ``theta`` is the 0/1 indicator of ``beta != 0``."""
    pattern = draw_signal_pattern(p, spec.theta, spec.perturbation, spec.signed, rng)
    beta = pattern.beta(spec.magnitude(p))
    return beta, (beta != 0).astype(np.int8)


def _check_factor(p, factor):
    if factor.p != p:
        raise ValueError(f"factor has dimension {factor.p}, expected p={p}")


def _normalize(X):
    norms = np.linalg.norm(X, axis=0)
    norms[norms == 0] = 1.0
    return X / norms


def draw_design_gaussian(n, p, factor: LowerTriangularFactor, rng, normalize=False):
    """Rows iid ``N(0, omega / n)``."""
    _check_factor(p, factor)
    X = factor.apply_rows(rng.standard_normal((n, p))) / math.sqrt(n)
    return _normalize(X) if normalize else X


def draw_design_uniform(n, p, factor: LowerTriangularFactor, rng, normalize=False):
    """``M L' / sqrt(n)`` with ``M`` iid Uniform(-sqrt 3, sqrt 3) (unit variance)."""
    _check_factor(p, factor)
    s3 = math.sqrt(3.0)
    X = factor.apply_rows(rng.uniform(-s3, s3, size=(n, p))) / math.sqrt(n)
    return _normalize(X) if normalize else X


NoiseSource = Callable[[int], np.ndarray]


def draw_response(X, beta, rng, noise: Optional[NoiseSource] = None):
    """``Y = X beta + eps`` with standard normal ``eps`` unless ``noise`` is given."""
    X = np.asarray(X)
    beta = np.asarray(beta, dtype=float)
    if X.ndim != 2 or X.shape[1] != beta.shape[0]:
        raise ValueError(f"X has shape {X.shape} but beta has length {beta.shape[0]}")
    n = X.shape[0]
    eps = rng.standard_normal(n) if noise is None else np.asarray(noise(n), dtype=float)
    if eps.shape != (n,):
        raise ValueError(f"noise source returned shape {eps.shape}, expected ({n},)")
    return X @ beta + eps


STREAMS = ("signal", "design", "noise")


def replicate_streams(master_seed, replicate):
    """Independent generators for one replicate, keyed by stream name."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(replicate),))
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, ss.spawn(len(STREAMS)))}


@dataclass
class RegressionDataset:
    X: np.ndarray
    Y: np.ndarray
    beta: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.X.ndim != 2 or self.Y.shape != (self.X.shape[0],):
            raise ValueError(f"X shape {self.X.shape} and Y shape {self.Y.shape} disagree")
        if self.beta is not None:
            self.beta = np.asarray(self.beta, dtype=float)
            if self.theta is None:
                self.theta = (self.beta != 0).astype(np.int8)
        if self.theta is not None:
            self.theta = np.asarray(self.theta).astype(np.int8)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def save(self, directory):
        """Write X.csv, Y.csv, optional beta.csv/theta.csv and meta.txt."""
        os.makedirs(directory, exist_ok=True)
        csvio.write_matrix(os.path.join(directory, "X.csv"), self.X)
        csvio.write_matrix(os.path.join(directory, "Y.csv"), self.Y)
        if self.beta is not None:
            csvio.write_matrix(os.path.join(directory, "beta.csv"), self.beta)
        if self.theta is not None:
            csvio.write_matrix(os.path.join(directory, "theta.csv"), self.theta)
        with open(os.path.join(directory, "meta.txt"), "w") as fh:
            for key in sorted(self.provenance):
                fh.write(f"{key}={self.provenance[key]}\n")

    @classmethod
    def load(cls, directory):
        X = csvio.read_matrix(os.path.join(directory, "X.csv"))
        Y = csvio.read_vector(os.path.join(directory, "Y.csv"))
        beta = theta = None
        bpath = os.path.join(directory, "beta.csv")
        if os.path.exists(bpath):
            beta = csvio.read_vector(bpath)
        tpath = os.path.join(directory, "theta.csv")
        if os.path.exists(tpath):
            theta = csvio.read_vector(tpath)
        provenance = {}
        mpath = os.path.join(directory, "meta.txt")
        if os.path.exists(mpath):
            provenance = read_key_values(mpath)
        return cls(X, Y, beta, theta, provenance)


def read_key_values(path):
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def simulate_dataset(n, p, factor, spec: SignalSpec, master_seed, replicate, design="gaussian", noise=None):
    """One full draw, fully determined by ``(master_seed, replicate)``."""
    if design not in ("gaussian", "uniform"):
        raise ValueError(f"design must be 'gaussian' or 'uniform', got {design!r}")
    streams = replicate_streams(master_seed, replicate)
    beta, theta = draw_beta(p, spec, streams["signal"])
    draw = draw_design_gaussian if design == "gaussian" else draw_design_uniform
    X = draw(n, p, factor, streams["design"])
    Y = draw_response(X, beta, streams["noise"], noise=noise)
    prov = {"master_seed": master_seed, "replicate": replicate, "design": design}
    return RegressionDataset(X, Y, beta, theta, prov)
