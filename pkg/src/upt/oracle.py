"""Exact posterior local fdr by enumeration, for tiny p.

Coefficients are iid from ``pi0 * delta_0 + pi1 * h1`` with ``h1`` a discrete
distribution, and ``Y = X beta + N(0, I)``.  All ``(1 + #atoms)^p`` joint
configurations are enumerated and weighted in the log domain.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .decisions import DecisionVector

MAX_P = 12


@dataclass(frozen=True)
class DiscretePrior:
    pi1: float
    atoms: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        if not 0 <= self.pi1 < 1:
            raise ValueError(f"pi1 must lie in [0, 1), got {self.pi1}")
        atoms = tuple((float(v), float(w)) for v, w in self.atoms)
        if not atoms:
            raise ValueError("need at least one atom")
        if any(v == 0 for v, _ in atoms):
            raise ValueError("the signal distribution must not put mass at 0")
        if any(w <= 0 for _, w in atoms) or not math.isclose(sum(w for _, w in atoms), 1.0, abs_tol=1e-12):
            raise ValueError("atom weights must be positive and sum to 1")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def symmetric(cls, pi1, tau):
        """Signals at ``+tau`` and ``-tau`` with equal weight."""
        return cls(pi1, ((tau, 0.5), (-tau, 0.5)))

    @property
    def values(self):
        return np.array([0.0] + [v for v, _ in self.atoms])

    @property
    def log_weights(self):
        with np.errstate(divide="ignore"):
            return np.log(np.array([1 - self.pi1] + [self.pi1 * w for _, w in self.atoms]))

    def sample(self, size, rng):
        probs = np.exp(self.log_weights)
        states = rng.choice(len(probs), size=size, p=probs / probs.sum())
        return self.values[states]


def _configurations(p, prior: DiscretePrior):
    if p > MAX_P:
        raise ValueError(f"enumeration is capped at p={MAX_P}, got p={p}")
    states = np.array(list(itertools.product(range(len(prior.values)), repeat=p)), dtype=np.intp).reshape(-1, p)
    betas = prior.values[states]
    log_prior = prior.log_weights[states].sum(axis=1)
    return states, betas, log_prior


def _log_posterior(X, Ys, prior):
    """Unnormalized log posterior, shape (draws, configurations)."""
    X = np.asarray(X, dtype=float)
    states, betas, log_prior = _configurations(X.shape[1], prior)
    means = betas @ X.T  # (configs, n)
    loglik = Ys @ means.T - 0.5 * np.einsum("ij,ij->i", means, means)
    return states, loglik + log_prior


def posterior_weights(X, Y, prior: DiscretePrior):
    """Configurations (coefficient vectors) and their posterior probabilities."""
    Ys = np.atleast_2d(np.asarray(Y, dtype=float))
    states, logpost = _log_posterior(X, Ys, prior)
    w = np.exp(logpost[0] - logsumexp(logpost[0]))
    return prior.values[states], w


def local_fdr_batch(X, Ys, prior: DiscretePrior):
    """``P(beta_i = 0 | Y)`` for each row of ``Ys``; shape (draws, p)."""
    Ys = np.atleast_2d(np.asarray(Ys, dtype=float))
    states, logpost = _log_posterior(X, Ys, prior)
    norm = logsumexp(logpost, axis=1, keepdims=True)
    out = np.empty((Ys.shape[0], states.shape[1]))
    for i in range(states.shape[1]):
        null = states[:, i] == 0
        with np.errstate(divide="ignore"):
            out[:, i] = np.exp(logsumexp(logpost[:, null], axis=1) - norm[:, 0])
    return np.clip(out, 0.0, 1.0)


def exact_local_fdr(X, Y, prior: DiscretePrior) -> np.ndarray:
    """Local fdr vector for a single response ``Y``."""
    if prior.pi1 == 0:
        return np.ones(np.asarray(X).shape[1])
    return local_fdr_batch(X, np.asarray(Y, dtype=float)[None, :], prior)[0]


def oracle_threshold(lam):
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return 0.0 if math.isinf(lam) else 1.0 / (1.0 + lam)


def oracle_decide(fdr, lam) -> DecisionVector:
    """Reject where ``fdr <= 1 / (1 + lam)``."""
    return DecisionVector.from_mask(np.asarray(fdr) <= oracle_threshold(lam))


def weighted_loss(theta, delta, lam):
    """``lam * (false positives) + (false negatives)``."""
    theta = np.asarray(theta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if theta.shape != delta.shape:
        raise ValueError(f"theta has shape {theta.shape} but delta has shape {delta.shape}")
    return float(np.sum(lam * (1 - theta) * delta + theta * (1 - delta)))


def simulate_prior_draws(X, prior: DiscretePrior, reps, rng):
    """``reps`` independent ``(beta, Y)`` pairs from the prior and the model."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    betas = prior.sample((reps, p), rng)
    Ys = betas @ X.T + rng.standard_normal((reps, n))
    return betas, Ys


def oracle_risk_terms(X, Ys, prior: DiscretePrior, lam):
    """Per-draw value of the closed-form risk expression for the oracle rule."""
    fdr = local_fdr_batch(X, Ys, prior)
    below = fdr <= oracle_threshold(lam)
    return np.sum(below * ((lam + 1) * fdr - 1) + prior.pi1, axis=1)


def oracle_risk_formula(X, prior: DiscretePrior, lam, reps, rng):
    """Monte Carlo estimate of the oracle risk expression and its standard error."""
    if prior.pi1 == 0:
        return 0.0, 0.0
    _, Ys = simulate_prior_draws(X, prior, reps, rng)
    terms = oracle_risk_terms(X, Ys, prior, lam)
    return float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(reps))
