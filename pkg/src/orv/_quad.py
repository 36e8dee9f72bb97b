"""Adaptive quadrature wrappers for the half-line integrals used throughout.

All integrals have the form ``int_0^inf y**(p-1) phi(y) dy`` with ``phi``
smooth on ``(0, inf)``.  The piece on ``[0, 1]`` is mapped by ``v = y**p``,
which removes the algebraic endpoint singularity for ``p < 1``; the piece on
``[1, inf)`` is mapped by ``y = exp(z)``, turning power-law tails into
exponential decay.  Both pieces go to QUADPACK (Gauss-Kronrod, adaptive).
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

from .errors import NumericalFailure

EPSREL = 1e-10
LIMIT = 200


def quad_checked(f, a, b, epsrel=EPSREL, limit=LIMIT, fail_rel=1e-6):
    """``scipy.integrate.quad`` that raises when the error estimate is poor."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *msg = integrate.quad(
            f, a, b, epsabs=0.0, epsrel=epsrel, limit=limit, full_output=1
        )
    if not np.isfinite(val):
        raise NumericalFailure(f"quadrature produced a non-finite value on [{a}, {b}]")
    if msg and err > fail_rel * max(abs(val), 1e-300) and err > 1e-300:
        raise NumericalFailure(f"quadrature did not converge on [{a}, {b}]: {msg[0]}")
    return val, err


def halfline_power(logphi, p, epsrel=EPSREL):
    """Return ``(value, abserr)`` of ``int_0^inf y**(p-1) exp(logphi(y)) dy``."""
    p = float(p)

    def head(v):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return np.exp(logphi(v ** (1.0 / p))) / p

    def tail(z):
        with np.errstate(over="ignore"):
            y = math.exp(z) if z < 709.0 else math.inf
        # past the overflow point every integrable tail has already vanished
        if math.isinf(y):
            return 0.0
        with np.errstate(divide="ignore", under="ignore"):
            lv = p * z + logphi(y)
        return 0.0 if lv == -np.inf else float(np.exp(lv))

    v1, e1 = quad_checked(head, 0.0, 1.0, epsrel=epsrel)
    v2, e2 = quad_checked(tail, 0.0, np.inf, epsrel=epsrel)
    return v1 + v2, e1 + e2
