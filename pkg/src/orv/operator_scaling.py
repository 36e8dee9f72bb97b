r"""Matrix exponentials, power matrices and the quasi-homogeneous gauge.

The scaling operators used here are symmetric positive-definite matrices
:math:`E = O^{-1} D O` with :math:`O` orthogonal and :math:`D` diagonal, so
that :math:`t^E = O^{-1} t^D O`.  Matrices cross the package boundary as
``numpy`` arrays (or JSON arrays of rows).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DomainError, NumericalFailure

SYMMETRY_TOL = 1e-12
INVARIANT_TOL = 1e-10


def as_square_matrix(a) -> np.ndarray:
    """Validate ``a`` as a finite square float matrix and return a copy."""
    m = np.array(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DomainError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has non-finite entries")
    return m


def is_symmetric(m: np.ndarray, tol: float = SYMMETRY_TOL) -> bool:
    scale = max(1.0, float(np.max(np.abs(m))))
    return bool(np.max(np.abs(m - m.T)) <= tol * scale)


@dataclass(frozen=True)
class SpectralDecomposition:
    """``source = orthogonal.T @ diag(eigenvalues) @ orthogonal``.

    Rows of ``orthogonal`` are eigenvectors; eigenvalues ascend and the first
    nonzero component of every eigenvector is positive.
    """

    orthogonal: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        o = self.orthogonal
        err = np.max(np.abs(o @ o.T - np.eye(o.shape[0])))
        if err > INVARIANT_TOL:
            raise NumericalFailure(f"eigenvector matrix not orthogonal (error {err:.2e})")
        o.setflags(write=False)
        self.eigenvalues.setflags(write=False)

    def reconstruct(self) -> np.ndarray:
        return self.orthogonal.T @ np.diag(self.eigenvalues) @ self.orthogonal


def spectral_decompose(m) -> SpectralDecomposition:
    """Eigendecomposition of a symmetric matrix with deterministic conventions."""
    m = as_square_matrix(m)
    if not is_symmetric(m):
        raise DomainError("spectral decomposition requires a symmetric matrix")
    m = 0.5 * (m + m.T)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue iteration did not converge: {exc}") from exc
    o = v.T.copy()
    for row in o:
        nz = np.flatnonzero(np.abs(row) > 1e-14)
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    dec = SpectralDecomposition(orthogonal=o, eigenvalues=w.copy())
    err = np.max(np.abs(dec.reconstruct() - m))
    if err > INVARIANT_TOL * max(1.0, float(np.max(np.abs(m)))):
        raise NumericalFailure(f"reconstruction error {err:.2e} exceeds tolerance")
    return dec


@dataclass(frozen=True)
class OperatorIndex:
    """A symmetric positive-definite scaling operator with its decomposition."""

    matrix: np.ndarray
    decomposition: SpectralDecomposition = field(repr=False)
    trace: float

    @classmethod
    def from_matrix(cls, m) -> "OperatorIndex":
        m = as_square_matrix(m)
        if not is_symmetric(m):
            raise DomainError("operator index must be symmetric")
        dec = spectral_decompose(m)
        if np.any(dec.eigenvalues <= 0):
            raise DomainError(
                f"operator index must be positive definite, eigenvalues {dec.eigenvalues}"
            )
        m.setflags(write=False)
        return cls(matrix=m, decomposition=dec, trace=float(np.trace(m)))

    @classmethod
    def diagonal(cls, exponents) -> "OperatorIndex":
        return cls.from_matrix(np.diag(np.asarray(exponents, dtype=float)))

    def __post_init__(self):
        if abs(self.trace - float(np.sum(self.decomposition.eigenvalues))) > INVARIANT_TOL * max(
            1.0, abs(self.trace)
        ):
            raise NumericalFailure("trace does not match the eigenvalue sum")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.decomposition.eigenvalues

    @property
    def orthogonal(self) -> np.ndarray:
        return self.decomposition.orthogonal


def matrix_exponential(a) -> np.ndarray:
    """Return ``exp(a)``.

    Symmetric input goes through the eigendecomposition; anything else falls
    back to scaling-and-squaring Pade (:func:`scipy.linalg.expm`).
    """
    a = as_square_matrix(a)
    if is_symmetric(a):
        dec = spectral_decompose(a)
        o = dec.orthogonal
        return o.T @ np.diag(np.exp(dec.eigenvalues)) @ o
    return linalg.expm(a)


def matrix_exponential_series(a, terms: int = 60) -> np.ndarray:
    """Truncated power series ``sum_{k<terms} a^k / k!``.

    Only accurate for modest norms; kept as an independent reference for
    :func:`matrix_exponential`.
    """
    a = as_square_matrix(a)
    out = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


def _as_operator(e) -> OperatorIndex:
    return e if isinstance(e, OperatorIndex) else OperatorIndex.from_matrix(e)


def power_matrix(e, t: float) -> np.ndarray:
    """Return ``t**E = exp(E log t)`` for an operator index ``E`` and ``t > 0``."""
    if not (t > 0) or not math.isfinite(t):
        raise DomainError(f"power matrix needs t > 0, got {t}")
    op = _as_operator(e)
    o = op.orthogonal
    return o.T @ np.diag(np.power(float(t), op.eigenvalues)) @ o


@dataclass(frozen=True)
class Gauge:
    """Quasi-homogeneous gauge ``[x] = sum |x_i|**(1/lambda_i)``.

    For ``D = diag(lambda)`` it satisfies ``[t**D x] = t [x]``.
    """

    exponents: tuple

    def __post_init__(self):
        ex = tuple(float(v) for v in self.exponents)
        if not ex or any(not (v > 0) or not math.isfinite(v) for v in ex):
            raise DomainError("gauge exponents must be positive and finite")
        object.__setattr__(self, "exponents", ex)

    def __call__(self, x):
        return gauge_eval(self, x)


def gauge_eval(gauge: Gauge, x):
    """Evaluate the gauge at a point, or row-wise on an ``(n, d)`` array."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("gauge argument has non-finite entries")
    if x.shape[-1] != len(gauge.exponents):
        raise DomainError(f"dimension mismatch: {x.shape[-1]} vs {len(gauge.exponents)}")
    inv = 1.0 / np.asarray(gauge.exponents)
    val = np.sum(np.abs(x) ** inv, axis=-1)
    return float(val) if val.ndim == 0 else val
