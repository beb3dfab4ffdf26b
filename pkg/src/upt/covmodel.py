"""Correlation models for the random design and their Cholesky factors.

Banded models (identity, 2x2 block diagonal, penta-diagonal) are stored in
lower band form ``bands[d, j] = omega[j + d, j]``, the layout used by
:func:`scipy.linalg.cholesky_banded`.  Custom matrices are kept dense.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefiniteError

KINDS = ("identity", "block_diag", "penta_diag", "custom")

# Reporting-only defaults for the matrix-class check.
DEFAULT_GAMMA = 0.5
DEFAULT_A = 3.0
DEFAULT_OMEGA0 = 0.45


@dataclass(frozen=True)
class CovarianceSpec:
    kind: str
    p: int
    a: float = 0.5
    a1: float = 0.5
    a2: float = 0.1
    matrix: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.kind == "block_diag":
            if self.p % 2:
                raise ValueError(f"block_diag requires even p, got p={self.p}")
            if not -1 < self.a < 1:
                raise ValueError("block correlation a must lie in (-1, 1)")
        if self.kind == "custom":
            if self.matrix is None:
                raise ValueError("custom covariance needs a matrix")
            if self.matrix.shape != (self.p, self.p):
                raise ValueError(
                    f"custom matrix has shape {self.matrix.shape}, expected ({self.p}, {self.p})"
                )

    @classmethod
    def identity(cls, p):
        return cls("identity", p)

    @classmethod
    def block_diag(cls, p, a=0.5):
        return cls("block_diag", p, a=a)

    @classmethod
    def penta_diag(cls, p, a1=0.5, a2=0.1):
        return cls("penta_diag", p, a1=a1, a2=a2)

    @classmethod
    def custom(cls, matrix):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("custom covariance must be a square matrix")
        return cls("custom", matrix.shape[0], matrix=matrix)

    @classmethod
    def from_csv(cls, path):
        """Read a headerless p x p CSV of decimal floats."""
        rows = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rows.append([float(v) for v in line.split(",")])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
        if not rows:
            raise ValueError(f"{path}: empty covariance file")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ValueError(f"{path}: ragged rows (widths {sorted(widths)})")
        return cls.custom(np.array(rows))


class CovarianceMatrix:
    """A realized correlation matrix.

    Exactly one of ``bands`` / ``_dense`` is populated.  Values are treated as
    immutable after construction.
    """

    def __init__(self, spec: CovarianceSpec, bands=None, dense=None):
        self.spec = spec
        self.p = spec.p
        self.bands = bands
        self._dense = dense
        for arr in (bands, dense):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def is_banded(self):
        return self.bands is not None

    @property
    def bandwidth(self):
        if self.is_banded:
            return self.bands.shape[0] - 1
        return self.p - 1

    def dense(self):
        if not self.is_banded:
            return self._dense.copy()
        out = np.zeros((self.p, self.p))
        for d in range(self.bands.shape[0]):
            idx = np.arange(self.p - d)
            out[idx + d, idx] = self.bands[d, : self.p - d]
            out[idx, idx + d] = self.bands[d, : self.p - d]
        return out

    def __repr__(self):
        return f"CovarianceMatrix(kind={self.spec.kind!r}, p={self.p})"


def build_covariance(spec: CovarianceSpec) -> CovarianceMatrix:
    """Realize ``spec`` as a symmetric, unit-diagonal, positive definite matrix.

    Raises
    ------
    NotPositiveDefiniteError
        If the resulting matrix is not positive definite.
    """
    p = spec.p
    if spec.kind == "identity":
        cov = CovarianceMatrix(spec, bands=np.ones((1, p)))
    elif spec.kind == "block_diag":
        bands = np.zeros((2, p))
        bands[0] = 1.0
        bands[1, 0::2] = spec.a
        cov = CovarianceMatrix(spec, bands=bands)
    elif spec.kind == "penta_diag":
        bands = np.zeros((3, p))
        bands[0] = 1.0
        bands[1, : max(p - 1, 0)] = spec.a1
        bands[2, : max(p - 2, 0)] = spec.a2
        cov = CovarianceMatrix(spec, bands=bands)
    else:
        m = np.asarray(spec.matrix, dtype=float)
        asym = np.max(np.abs(m - m.T)) if p > 1 else 0.0
        if asym > 1e-10:
            raise ValueError(f"custom covariance is not symmetric (max |A - A'| = {asym:.3g})")
        diag_err = np.max(np.abs(np.diag(m) - 1.0))
        if diag_err > 1e-10:
            raise ValueError(f"custom covariance must have unit diagonal (max error {diag_err:.3g})")
        m = 0.5 * (m + m.T)
        np.fill_diagonal(m, 1.0)
        cov = CovarianceMatrix(spec, dense=m)
    # Positive definiteness is checked by attempting the factorization.
    factorize(cov)
    return cov


class LowerTriangularFactor:
    """Lower Cholesky factor ``L`` with ``L @ L.T == omega``."""

    def __init__(self, bands=None, dense=None):
        self.bands = bands
        self._dense = dense
        self.p = bands.shape[1] if bands is not None else dense.shape[0]

    @property
    def is_banded(self):
        return self.bands is not None

    def dense(self):
        if not self.is_banded:
            return self._dense.copy()
        out = np.zeros((self.p, self.p))
        for d in range(self.bands.shape[0]):
            idx = np.arange(self.p - d)
            out[idx + d, idx] = self.bands[d, : self.p - d]
        return out

    def apply_rows(self, Z):
        """Return ``Z @ L.T``; each row ``z`` becomes ``L @ z``."""
        Z = np.asarray(Z, dtype=float)
        if not self.is_banded:
            return Z @ self._dense.T
        out = Z * self.bands[0]
        for d in range(1, self.bands.shape[0]):
            # (Z L')[:, i] += Z[:, i - d] * L[i, i - d]
            out[:, d:] += Z[:, :-d] * self.bands[d, :-d]
        return out


def factorize(cov: Union[CovarianceMatrix, np.ndarray]) -> LowerTriangularFactor:
    """Cholesky-factorize a correlation matrix, exploiting band structure."""
    if isinstance(cov, np.ndarray):
        cov = CovarianceMatrix(CovarianceSpec.custom(cov), dense=np.array(cov, dtype=float))
    try:
        if cov.is_banded:
            if cov.bands.shape[0] == 1:
                return LowerTriangularFactor(bands=np.sqrt(cov.bands))
            lb = scipy.linalg.cholesky_banded(cov.bands, lower=True)
            return LowerTriangularFactor(bands=lb)
        return LowerTriangularFactor(dense=np.linalg.cholesky(cov.dense()))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"covariance is not positive definite: {exc}") from None


@dataclass(frozen=True)
class MatrixClassReport:
    gamma: float
    A: float
    omega0: float
    max_row_power: float
    d_omega: float
    delta0: float
    in_class: bool
    eta: Optional[float] = None


def _band_summaries(cov: CovarianceMatrix, gamma):
    p = cov.p
    row_power = np.ones(p)
    upper_row = np.zeros(p)
    upper_col = np.zeros(p)
    delta0 = 0.0
    for d in range(1, cov.bands.shape[0]):
        vals = np.abs(cov.bands[d, : p - d])
        if vals.size == 0:
            continue
        pw = vals**gamma
        row_power[: p - d] += pw  # U[j, j + d]
        row_power[d:] += pw  # mirror in the lower part
        upper_row[: p - d] += vals
        upper_col[d:] += vals
        delta0 = max(delta0, float(vals.max()))
    return row_power, upper_row, upper_col, delta0


def check_matrix_class(
    omega,
    gamma=DEFAULT_GAMMA,
    A=DEFAULT_A,
    omega0=DEFAULT_OMEGA0,
    theta=None,
    r=None,
) -> MatrixClassReport:
    """Report how ``omega`` sits relative to the weak-dependence matrix class.

    Report-only: nothing downstream refuses an out-of-class matrix.  ``eta`` is
    filled in when both ``theta`` and ``r`` are supplied.
    """
    if isinstance(omega, CovarianceMatrix) and omega.is_banded:
        row_power, upper_row, upper_col, delta0 = _band_summaries(omega, gamma)
    else:
        m = omega.dense() if isinstance(omega, CovarianceMatrix) else np.asarray(omega, dtype=float)
        absm = np.abs(m)
        row_power = (absm**gamma).sum(axis=1)
        upper = np.triu(absm, k=1)
        upper_row = upper.sum(axis=1)
        upper_col = upper.sum(axis=0)
        delta0 = float(upper.max()) if m.shape[0] > 1 else 0.0
    max_row_power = float(row_power.max())
    d_omega = float(max(upper_row.max(), upper_col.max()))
    eta = None
    if theta is not None and r is not None:
        eta = compute_eta(theta, r, omega0)
    return MatrixClassReport(
        gamma=gamma,
        A=A,
        omega0=omega0,
        max_row_power=max_row_power,
        d_omega=d_omega,
        delta0=delta0,
        in_class=bool(max_row_power <= A and d_omega <= omega0),
        eta=eta,
    )


def compute_eta(theta, r, omega0):
    """Width constant of the admissible signal support.

    ``theta`` is the sparsity exponent, ``r`` the strength exponent and
    ``omega0`` the bound on the off-diagonal mass of the correlation matrix.
    """
    if not 0 < theta < r:
        raise ValueError(f"need 0 < theta < r, got theta={theta}, r={r}")
    if not 0 <= omega0 < 0.5:
        raise ValueError(f"need 0 <= omega0 < 1/2, got {omega0}")
    ratio = theta / r
    prefactor = theta * r / ((theta + r) * math.sqrt(1 + 2 * omega0))
    return prefactor * min(2 * ratio, 1 - ratio, math.sqrt(2 * (1 - omega0)) - 1 + ratio)
