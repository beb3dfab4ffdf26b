"""Threshold selection: ideal (known exponents) and data-driven tuning.

Thresholds live on the scale of ``X'Y``: ``t1`` screens, ``t3`` is the
nonzero level in the cleaning step and ``t2`` sets its L0 penalty.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import NegativeRadicandError, NoExceedanceError, TuningError

DEFAULT_ALPHA = 0.05
DEFAULT_K = 5
PILOT_Q = 0.25


@dataclass(frozen=True)
class TuningParams:
    t1: float
    t2: float
    t3: float
    zeta: float
    q: float
    K: float
    alpha: float
    M: float
    source: str
    theta_used: float
    r_used: float

    def scaled_t1(self, factor):
        """Copy with the screening threshold multiplied by ``factor``."""
        return TuningParams(**{**asdict(self), "t1": self.t1 * factor})

    def audit(self) -> str:
        """key=value block with every field, one per line."""
        return "".join(f"{k}={v!r}\n" for k, v in asdict(self).items())


def zeta_exponent(theta, r):
    """Rate-optimal exponent of the type-I weight: ``(sqrt r - sqrt theta)^2``."""
    return (math.sqrt(r) - math.sqrt(theta)) ** 2


def mfdr_constant(alpha, theta, r, K):
    """Constant ``M`` entering the second-order term of ``t2*``."""
    s = r + theta - zeta_exponent(theta, r)
    return alpha * math.sqrt(math.pi) * s / ((2 * math.e) ** K * math.sqrt(r) * (1 - alpha))


def t2_star_squared(p, theta, r, alpha, K):
    zeta = zeta_exponent(theta, r)
    s = r + theta - zeta
    logp = math.log(p)
    M = mfdr_constant(alpha, theta, r, K)
    return 2 * (theta - zeta) * logp + 4 * r / s * ((K - 0.5) * math.log(logp) - math.log(M))


def q_interval(theta, r, delta0, eta):
    """Open-closed interval ``(lower, theta]`` admissible for the screening exponent."""
    zeta = zeta_exponent(theta, r)
    return max(delta0**2 * (1 + eta) ** 2 * r, theta - zeta), theta


def ideal_params(
    p,
    theta,
    r,
    alpha=DEFAULT_ALPHA,
    K=DEFAULT_K,
    q=None,
    delta0=None,
    eta=None,
    clamp=False,
    source="ideal",
) -> TuningParams:
    """Tuning parameters from known ``(theta, r)``.

    ``q`` defaults to ``theta``.  When ``delta0`` and ``eta`` are both given,
    ``q`` is checked against the admissible interval.  A negative radicand
    for ``t2*`` raises :class:`NegativeRadicandError` unless ``clamp`` is set,
    in which case ``t2`` is clamped to 0 with a warning.
    """
    if p < 3:
        raise TuningError("p must be >= 3 so that log log p > 0")
    if theta <= 0 or r <= 0:
        raise TuningError(f"need theta > 0 and r > 0, got theta={theta}, r={r}")
    if not 0 < alpha < 1:
        raise TuningError(f"alpha must lie in (0, 1), got {alpha}")
    if K < 1:
        raise TuningError(f"K must be >= 1, got {K}")
    if theta >= r:
        warnings.warn(
            f"theta={theta:.4g} >= r={r:.4g}: outside the regime the thresholds are derived for",
            RuntimeWarning,
            stacklevel=2,
        )
    if q is None:
        q = theta
    if delta0 is not None and eta is not None:
        lo, hi = q_interval(theta, r, delta0, eta)
        if not lo < q <= hi:
            raise TuningError(f"q={q:.4g} outside admissible interval ({lo:.4g}, {hi:.4g}]")
    if q <= 0:
        raise TuningError(f"q must be positive, got {q}")

    logp = math.log(p)
    radicand = t2_star_squared(p, theta, r, alpha, K)
    if radicand < 0:
        if not clamp:
            raise NegativeRadicandError(radicand)
        warnings.warn(f"t2* radicand {radicand:.4g} < 0; clamping t2 to 0", RuntimeWarning, stacklevel=2)
        radicand = 0.0
    return TuningParams(
        t1=math.sqrt(2 * q * logp),
        t2=math.sqrt(radicand),
        t3=math.sqrt(2 * r * logp),
        zeta=zeta_exponent(theta, r),
        q=q,
        K=K,
        alpha=alpha,
        M=mfdr_constant(alpha, theta, r, K),
        source=source,
        theta_used=theta,
        r_used=r,
    )


def ideal_params_from_tau(p, theta, tau, **kwargs) -> TuningParams:
    """:func:`ideal_params` with ``r`` chosen so that ``t3 == tau``."""
    return ideal_params(p, theta, tau**2 / (2 * math.log(p)), **kwargs)


@dataclass(frozen=True)
class TailEstimates:
    theta_hat: float
    r_hat: float
    f_bar: float
    mu_bar: float
    t1: float
    two_sided: bool


def estimate_theta_r(y_tilde, t1, p=None, two_sided=True) -> TailEstimates:
    """Estimate the sparsity and strength exponents from exceedances of ``t1``.

    ``f_bar`` is the fraction of statistics above ``t1`` and ``mu_bar`` the
    mean of ``y_tilde * 1(y_tilde > t1)``; with ``two_sided`` both use
    ``|y_tilde|``.
    """
    y = np.asarray(y_tilde, dtype=float)
    p = y.shape[0] if p is None else p
    vals = np.abs(y) if two_sided else y
    hit = vals > t1
    if not hit.any():
        raise NoExceedanceError(t1)
    f_bar = hit.sum() / p
    mu_bar = vals[hit].sum() / p
    logp = math.log(p)
    return TailEstimates(
        theta_hat=-math.log(f_bar) / logp,
        r_hat=(mu_bar / f_bar) ** 2 / (2 * logp),
        f_bar=float(f_bar),
        mu_bar=float(mu_bar),
        t1=float(t1),
        two_sided=two_sided,
    )


def data_driven_params(
    y_tilde,
    p=None,
    alpha=DEFAULT_ALPHA,
    K=DEFAULT_K,
    q=None,
    q0=PILOT_Q,
    two_sided=True,
    clamp=False,
) -> TuningParams:
    """Plug-in tuning from the marginal statistics alone.

    Without an explicit ``q`` a pilot pass at ``q0`` estimates ``theta``, the
    screening exponent is set to that estimate and the exponents are
    re-estimated at the resulting ``t1``.
    """
    y = np.asarray(y_tilde, dtype=float)
    if y.size == 0:
        raise TuningError("y_tilde is empty")
    p = y.shape[0] if p is None else p
    logp = math.log(p)
    if q is None:
        pilot = estimate_theta_r(y, math.sqrt(2 * q0 * logp), p, two_sided)
        q = pilot.theta_hat
    est = estimate_theta_r(y, math.sqrt(2 * q * logp), p, two_sided)
    return ideal_params(
        p, est.theta_hat, est.r_hat, alpha=alpha, K=K, q=q, clamp=clamp, source="estimated"
    )


def resolve_K(max_component_size, floor=DEFAULT_K):
    """Automatic K: the largest observed component size, at least ``floor``."""
    return max(int(max_component_size), int(floor))
