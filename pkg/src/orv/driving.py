r"""Driving functions, Liouville moment integrals and Weyl fractional integrals.

A driving function :math:`g` determines a Liouville law through
:math:`g(\sum_i x_i)`.  The built-in families are

``inverted-dirichlet``  :math:`c\,(1+t)^{-\beta}`
``pareto-log``          :math:`c\,(1+t)^{-\beta}\log(e+t)^{\delta}`
``exponential``         :math:`c\,e^{-rt}` (rapidly varying; negative control)
``tabulated``           log-linear interpolation of ``(t, g)`` pairs

plus two derived families produced by marginalization and conditioning:
``weyl`` (:math:`W^\alpha` applied to a base function) and ``shifted``
(:math:`c\,g(t+s)`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from scipy import special

from ._quad import halfline_power
from .errors import ConfigError, DivergenceError, DomainError

FAMILIES = ("inverted-dirichlet", "pareto-log", "exponential", "tabulated", "weyl", "shifted")


def _log_gamma_ratio(a, b):
    """log(Gamma(a) / Gamma(b)) for positive arguments."""
    return special.gammaln(a) - special.gammaln(b)


class DrivingFunction:
    """Interface shared by every driving-function family.

    Subclasses implement :meth:`log` (vectorized, ``t >= 0``) and may provide
    closed forms through :meth:`moment` and :meth:`weyl_closed`.
    """

    family: str = ""

    def __call__(self, t):
        with np.errstate(under="ignore"):
            return np.exp(self.log(t))

    def log(self, t):
        raise NotImplementedError

    @property
    def rv_index(self) -> Optional[float]:
        """Declared regular-variation index ``-beta``, or ``None``."""
        return None

    @property
    def has_closed_weyl(self) -> bool:
        """Whether :meth:`weyl_closed` yields an analytic (quadrature-free) function."""
        return False

    @property
    def params(self) -> dict:
        raise NotImplementedError

    def to_config(self) -> dict:
        return {"family": self.family, "params": self.params}

    def moment(self, p: float) -> Optional[float]:
        """Closed form of ``int_0^inf t**(p-1) g(t) dt`` if one is known."""
        return None

    def weyl_closed(self, alpha: float) -> Optional["DrivingFunction"]:
        """A driving function equal to ``W**alpha g``, if one is known."""
        return None


def tail_beta(g: DrivingFunction) -> Optional[float]:
    """``beta`` for ``g`` in RV_{-beta}, ``None`` when no index is declared."""
    idx = g.rv_index
    return None if idx is None else -idx


def _check_positive(name, value, allow_zero=False):
    value = float(value)
    ok = value >= 0 if allow_zero else value > 0
    if not ok or not math.isfinite(value):
        bound = ">= 0" if allow_zero else "> 0"
        raise DomainError(f"{name} must be finite and {bound}, got {value}")
    return value


@dataclass(frozen=True)
class InvertedDirichlet(DrivingFunction):
    """``scale * (1 + t)**(-beta)``."""

    beta: float
    scale: float = 1.0
    family = "inverted-dirichlet"

    def __post_init__(self):
        object.__setattr__(self, "beta", _check_positive("beta", self.beta, allow_zero=True))
        object.__setattr__(self, "scale", _check_positive("scale", self.scale))

    def __call__(self, t):
        return self.scale * (1.0 + np.asarray(t, dtype=float)) ** (-self.beta)

    def log(self, t):
        return math.log(self.scale) - self.beta * np.log1p(np.asarray(t, dtype=float))

    @property
    def rv_index(self):
        return -self.beta

    @property
    def params(self):
        out = {"beta": self.beta}
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out

    def moment(self, p):
        if self.beta <= p:
            return math.inf
        return self.scale * math.exp(special.betaln(p, self.beta - p))

    @property
    def has_closed_weyl(self):
        return True

    def weyl_closed(self, alpha):
        if alpha >= self.beta:
            return None
        c = self.scale * math.exp(_log_gamma_ratio(self.beta - alpha, self.beta))
        return InvertedDirichlet(self.beta - alpha, c)


@dataclass(frozen=True)
class ParetoLog(DrivingFunction):
    """``scale * (1 + t)**(-beta) * log(e + t)**delta``."""

    beta: float
    delta: float = 0.0
    scale: float = 1.0
    family = "pareto-log"

    def __post_init__(self):
        object.__setattr__(self, "beta", _check_positive("beta", self.beta, allow_zero=True))
        if not math.isfinite(self.delta):
            raise DomainError("delta must be finite")
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "scale", _check_positive("scale", self.scale))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.scale * (1.0 + t) ** (-self.beta) * np.log(math.e + t) ** self.delta

    def log(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore"):
            out = (
                math.log(self.scale)
                - self.beta * np.log1p(t)
                + self.delta * np.log(np.log(math.e + t))
            )
        return np.where(np.isinf(t), -np.inf, out) if self.beta > 0 else out

    @property
    def rv_index(self):
        return -self.beta

    @property
    def params(self):
        out = {"beta": self.beta, "delta": self.delta}
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out

    def moment(self, p):
        if self.delta == 0.0:
            return InvertedDirichlet(self.beta, self.scale).moment(p)
        return None


@dataclass(frozen=True)
class Exponential(DrivingFunction):
    """``scale * exp(-rate * t)``; not regularly varying."""

    rate: float
    scale: float = 1.0
    family = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "rate", _check_positive("rate", self.rate))
        object.__setattr__(self, "scale", _check_positive("scale", self.scale))

    def log(self, t):
        return math.log(self.scale) - self.rate * np.asarray(t, dtype=float)

    @property
    def params(self):
        out = {"rate": self.rate}
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out

    def moment(self, p):
        return self.scale * math.exp(special.gammaln(p) - p * math.log(self.rate))

    @property
    def has_closed_weyl(self):
        return True

    def weyl_closed(self, alpha):
        return Exponential(self.rate, self.scale * self.rate ** (-alpha))


@dataclass(frozen=True)
class Tabulated(DrivingFunction):
    """Positive samples ``(t_k, g_k)``; ``log g`` is linear in ``t`` between knots.

    Below the first knot the first value is held constant.  Evaluation past
    the last knot is an error: tabulated functions carry no tail model.
    """

    knots: tuple
    values: tuple
    family = "tabulated"

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=float)
        g = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != g.shape or t.size < 2:
            raise DomainError("tabulated driving needs at least two (t, g) pairs")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(g)):
            raise DomainError("tabulated driving has non-finite entries")
        if t[0] < 0 or np.any(np.diff(t) <= 0):
            raise DomainError("tabulated t values must be nonnegative and strictly increasing")
        if np.any(g <= 0):
            raise DomainError("tabulated g values must be positive")
        object.__setattr__(self, "knots", tuple(t.tolist()))
        object.__setattr__(self, "values", tuple(g.tolist()))

    def log(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.knots[-1]):
            raise DomainError(f"tabulated driving is only defined up to t={self.knots[-1]}")
        return np.interp(t, self.knots, np.log(self.values))

    @property
    def params(self):
        return {"t": list(self.knots), "g": list(self.values)}


@dataclass(frozen=True)
class WeylTransform(DrivingFunction):
    """``W**order base`` evaluated by quadrature."""

    base: DrivingFunction
    order: float
    family = "weyl"

    def __post_init__(self):
        object.__setattr__(self, "order", _check_positive("order", self.order))
        _check_weyl_order(self.base, self.order)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        f = np.vectorize(lambda s: weyl_integral(self.base, self.order, float(s)).value)
        out = f(t)
        return float(out) if out.ndim == 0 else out

    def log(self, t):
        with np.errstate(divide="ignore"):
            return np.log(self(t))

    @property
    def rv_index(self):
        idx = self.base.rv_index
        return None if idx is None else idx + self.order

    @property
    def params(self):
        return {"base": self.base.to_config(), "order": self.order}

    def moment(self, p):
        res = integrability_check(self.base, p + self.order)
        if not res.finite:
            return math.inf
        return math.exp(_log_gamma_ratio(p, p + self.order)) * res.value

    def weyl_closed(self, alpha):
        return weyl_transform(self.base, self.order + alpha)


@dataclass(frozen=True)
class Shifted(DrivingFunction):
    """``scale * base(t + shift)``."""

    base: DrivingFunction
    shift: float
    scale: float = 1.0
    family = "shifted"

    def __post_init__(self):
        object.__setattr__(self, "shift", _check_positive("shift", self.shift, allow_zero=True))
        object.__setattr__(self, "scale", _check_positive("scale", self.scale))

    def __call__(self, t):
        return self.scale * self.base(np.asarray(t, dtype=float) + self.shift)

    def log(self, t):
        return math.log(self.scale) + self.base.log(np.asarray(t, dtype=float) + self.shift)

    @property
    def rv_index(self):
        return self.base.rv_index

    @property
    def params(self):
        return {"base": self.base.to_config(), "shift": self.shift, "scale": self.scale}

    def moment(self, p):
        beta = tail_beta(self.base)
        if beta is not None and beta <= p:
            return math.inf
        return self.scale * math.gamma(p) * weyl_integral(self.base, p, self.shift).value

    @property
    def has_closed_weyl(self):
        return self.base.has_closed_weyl

    def weyl_closed(self, alpha):
        return Shifted(weyl_transform(self.base, alpha), self.shift, self.scale)


# ---------------------------------------------------------------------------
# operations


def eval_driving(g: DrivingFunction, t: float) -> float:
    if not (t >= 0):
        raise DomainError(f"driving functions are defined on t >= 0, got {t}")
    return float(g(float(t)))


def rv_ratio(g: DrivingFunction, t: float, x: float) -> float:
    """``g(t x) / g(t)``; tends to ``x**rv_index`` for regularly varying ``g``."""
    if not (t > 0 and x > 0):
        raise DomainError("rv_ratio needs t > 0 and x > 0")
    den = float(g(float(t)))
    if den == 0.0:
        raise ZeroDivisionError(f"g({t}) = 0")
    return float(g(float(t) * float(x))) / den


class Integrability(NamedTuple):
    finite: bool
    value: float


def integrability_check(g: DrivingFunction, a_sum: float, method: str = "auto") -> Integrability:
    """Decide whether ``int_0^inf t**(a_sum-1) g(t) dt`` is finite and evaluate it.

    For regularly varying families finiteness is decided from the index
    (finite iff ``beta > a_sum``).  ``method="quadrature"`` skips closed forms.
    """
    a_sum = _check_positive("a_sum", a_sum)
    if isinstance(g, Tabulated):
        raise DomainError("tabulated driving functions have no tail model; use the estimator")
    beta = tail_beta(g)
    if beta is not None and beta <= a_sum:
        return Integrability(False, math.inf)
    value = g.moment(a_sum) if method == "auto" else None
    if value is None:
        value, _ = halfline_power(g.log, a_sum)
    if not math.isfinite(value):
        return Integrability(False, math.inf)
    return Integrability(True, float(value))


@dataclass(frozen=True)
class WeylResult:
    order: float
    at: float
    value: float
    abs_error_estimate: float


def _check_weyl_order(g: DrivingFunction, alpha: float):
    if isinstance(g, Tabulated):
        raise DomainError("tabulated driving functions have no tail model; use the estimator")
    beta = tail_beta(g)
    if beta is not None and alpha >= beta:
        raise DivergenceError(f"Weyl integral of order {alpha} diverges for tail index -{beta}")


def weyl_integral(g: DrivingFunction, alpha: float, t: float, method: str = "auto") -> WeylResult:
    r"""``W^alpha g(t) = (1/Gamma(alpha)) int_t^inf (s - t)**(alpha-1) g(s) ds``.

    ``method`` is ``"auto"`` (closed form where the family has one, else
    quadrature), ``"closed"`` or ``"quadrature"``.  The quadrature substitutes
    ``s = t + y * max(t, 1)`` and integrates over ``y`` on the half line.
    """
    alpha = _check_positive("alpha", alpha)
    if not (t >= 0) or not math.isfinite(t):
        raise DomainError(f"Weyl integral evaluated at t >= 0 only, got {t}")
    t = float(t)
    _check_weyl_order(g, alpha)
    if method == "auto" and isinstance(g, WeylTransform):
        return weyl_integral(g.base, g.order + alpha, t)
    if method in ("auto", "closed") and g.has_closed_weyl:
        val = float(g.weyl_closed(alpha)(t))
        return WeylResult(alpha, t, val, 4 * np.finfo(float).eps * val)
    if method == "closed":
        raise DomainError(f"no closed-form Weyl integral for family {g.family}")
    tau = max(t, 1.0)
    integral, err = halfline_power(lambda y: g.log(t + tau * y), alpha)
    factor = math.exp(alpha * math.log(tau) - special.gammaln(alpha))
    return WeylResult(alpha, t, factor * integral, factor * err)


def weyl_transform(g: DrivingFunction, alpha: float) -> DrivingFunction:
    """The driving function ``W**alpha g``, in closed form where possible."""
    _check_weyl_order(g, alpha)
    closed = g.weyl_closed(alpha)
    return closed if closed is not None else WeylTransform(g, alpha)


def weyl_limit_constant(alpha: float, beta: float, method: str = "closed") -> float:
    """``lim W^alpha g(t) / (t**alpha g(t))`` for ``g`` in RV_{-beta}.

    The closed form is ``Gamma(beta-alpha)/Gamma(beta)``; ``method="quadrature"``
    integrates ``int_1^inf (x-1)**(alpha-1) x**(-beta) dx / Gamma(alpha)`` instead.
    """
    alpha = _check_positive("alpha", alpha)
    beta = _check_positive("beta", beta)
    if alpha >= beta:
        raise DivergenceError(f"limit constant needs alpha < beta, got {alpha} >= {beta}")
    if method == "closed":
        return math.exp(_log_gamma_ratio(beta - alpha, beta))
    # x = 1 + y: int_0^inf y**(alpha-1) (1+y)**(-beta) dy
    val, _ = halfline_power(lambda y: -beta * np.log1p(y), alpha)
    return val / math.gamma(alpha)


def weyl_kernel_integral(g: DrivingFunction, h: DrivingFunction, a: float, t: float):
    """``int_t^inf (y-t)**(a-1) h(y-t) g(y) dy`` with its error estimate."""
    tau = max(float(t), 1.0)
    val, err = halfline_power(lambda y: h.log(tau * y) + g.log(t + tau * y), a)
    factor = tau**a
    return factor * val, factor * err


# ---------------------------------------------------------------------------
# configuration


def load_tabulated_csv(path) -> Tabulated:
    """Read ``(t, g)`` pairs from a two-column CSV; a header row is optional."""
    ts, gs = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                t, gv = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue
                raise ConfigError(f"line {lineno}: expected two numbers", field=str(path))
            ts.append(t)
            gs.append(gv)
    return Tabulated(tuple(ts), tuple(gs))


def _param(params, key, where, default=None, required=True):
    if key in params:
        try:
            return float(params[key])
        except (TypeError, ValueError):
            raise ConfigError(f"expected a number, got {params[key]!r}", field=f"{where}.{key}")
    if required and default is None:
        raise ConfigError("missing required field", field=f"{where}.{key}")
    return default


def driving_from_config(cfg, where: str = "driving", base_dir=None) -> DrivingFunction:
    """Build a driving function from ``{"family": ..., "params": {...}}``."""
    if not isinstance(cfg, dict):
        raise ConfigError("expected an object", field=where)
    if "family" not in cfg:
        raise ConfigError("missing required field", field=f"{where}.family")
    family = cfg["family"]
    params = cfg.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("expected an object", field=f"{where}.params")
    pw = f"{where}.params"
    try:
        if family == "inverted-dirichlet":
            return InvertedDirichlet(_param(params, "beta", pw), _param(params, "scale", pw, 1.0))
        if family == "pareto-log":
            return ParetoLog(
                _param(params, "beta", pw),
                _param(params, "delta", pw, 0.0),
                _param(params, "scale", pw, 1.0),
            )
        if family == "exponential":
            return Exponential(_param(params, "rate", pw, 1.0), _param(params, "scale", pw, 1.0))
        if family == "tabulated":
            if "csv" in params:
                path = Path(params["csv"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                return load_tabulated_csv(path)
            if "t" not in params or "g" not in params:
                raise ConfigError("tabulated driving needs 'csv' or both 't' and 'g'", field=pw)
            return Tabulated(tuple(params["t"]), tuple(params["g"]))
        if family == "weyl":
            base = driving_from_config(params.get("base"), f"{pw}.base", base_dir)
            return WeylTransform(base, _param(params, "order", pw))
        if family == "shifted":
            base = driving_from_config(params.get("base"), f"{pw}.base", base_dir)
            return Shifted(base, _param(params, "shift", pw), _param(params, "scale", pw, 1.0))
    except (DomainError, DivergenceError) as exc:
        raise ConfigError(str(exc), field=pw) from exc
    raise ConfigError(f"unknown family {family!r}; expected one of {FAMILIES}", field=f"{where}.family")


__all__ = [
    "DrivingFunction",
    "tail_beta",
    "InvertedDirichlet",
    "ParetoLog",
    "Exponential",
    "Tabulated",
    "WeylTransform",
    "Shifted",
    "Integrability",
    "WeylResult",
    "eval_driving",
    "rv_ratio",
    "integrability_check",
    "weyl_integral",
    "weyl_transform",
    "weyl_limit_constant",
    "weyl_kernel_integral",
    "driving_from_config",
    "load_tabulated_csv",
]
