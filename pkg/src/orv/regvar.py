r"""Limit functions, intensity measures and convergence checks.

For a Liouville model with :math:`g \in RV_{-\beta}` and diagonal scaling
:math:`E = \mathrm{diag}(\alpha_i)`, with :math:`\alpha = \max_k \alpha_k` and
:math:`(\alpha) = \{i : \alpha_i = \alpha\}`:

* scale function  :math:`V(t) = g(t^\alpha)\, t^{\sum_i \alpha_i a_i}`,
  regularly varying with index :math:`-\rho = -(\alpha\beta - \sum_i \alpha_i a_i)`;
* limit function  :math:`\lambda(x) = \kappa (\sum_{i\in(\alpha)} x_i)^{-\beta} \prod_i x_i^{a_i-1}`;
* density ratio   :math:`f(t^E x) / (t^{-\mathrm{tr} E} V(t)) \to \lambda(x)`;
* tail ratio      :math:`P(X \in t^E B) / V(t) \to \mu(B) = \int_B \lambda`.

Every check returns a :class:`ConvergenceReport`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._quad import EPSREL
from .errors import DivergenceError, DomainError, NumericalFailure
from .liouville import LiouvilleModel, condition, iter_blocks, log_density
from .operator_scaling import OperatorIndex, power_matrix

ARGMAX_TOL = 1e-12


def geometric_grid(lo: float = 1e1, hi: float = 1e6, per_decade: int = 12) -> np.ndarray:
    """Geometric grid with ``per_decade`` points per factor of ten, ends included."""
    if not (0 < lo < hi):
        raise DomainError("grid needs 0 < lo < hi")
    n = int(round(per_decade * math.log10(hi / lo))) + 1
    return np.geomspace(lo, hi, max(n, 2))


def _as_grid(t_grid) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t.ndim != 1 or np.any(~np.isfinite(t)) or np.any(t <= 0):
        raise DomainError("t grid must be positive and finite")
    if np.any(np.diff(t) <= 0):
        raise DomainError("t grid must be strictly increasing")
    return t


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class ScalingSpec:
    """Diagonal operator index ``diag(exponents)`` paired with a model's tail.

    ``rho`` is ``alpha_max * beta - sum(alpha_i a_i)``; it is ``None`` when the
    driving function declares no regular-variation index.
    """

    exponents: tuple
    alpha_max: float
    argmax_set: tuple
    rho: float | None

    @classmethod
    def build(cls, exponents, model: LiouvilleModel) -> "ScalingSpec":
        ex = tuple(float(v) for v in exponents)
        if len(ex) != model.d:
            raise DomainError(f"need {model.d} scaling exponents, got {len(ex)}")
        if any(not (v > 0) or not math.isfinite(v) for v in ex):
            raise DomainError("scaling exponents must be positive")
        amax = max(ex)
        argmax = tuple(i for i, v in enumerate(ex) if abs(v - amax) <= ARGMAX_TOL)
        beta = model.beta
        rho = None
        if beta is not None:
            rho = amax * beta - math.fsum(a * b for a, b in zip(ex, model.shapes))
        return cls(ex, amax, argmax, rho)

    @classmethod
    def isotropic(cls, model: LiouvilleModel) -> "ScalingSpec":
        return cls.build((1.0,) * model.d, model)

    @property
    def trace(self) -> float:
        return math.fsum(self.exponents)

    @property
    def operator(self) -> OperatorIndex:
        return OperatorIndex.diagonal(self.exponents)


@dataclass(frozen=True)
class BoxRegion:
    """Axis-aligned box ``prod [lower_i, upper_i]`` with ``lower > 0``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise DomainError("box bounds must have equal, nonzero length")
        if any(not (v > 0) or not math.isfinite(v) for v in lo):
            raise DomainError("box lower bounds must be positive (bounded away from 0)")
        if any(not (h > l) for l, h in zip(lo, hi)):
            raise DomainError("box needs lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def epsilon(self) -> float:
        """Euclidean distance from the origin to the box."""
        return float(np.linalg.norm(self.lower))

    def scaled(self, exponents, t: float) -> "BoxRegion":
        f = np.power(float(t), np.asarray(exponents, dtype=float))
        return BoxRegion(tuple(np.asarray(self.lower) * f), tuple(np.asarray(self.upper) * f))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def to_config(self) -> dict:
        enc = lambda v: "inf" if math.isinf(v) else v  # noqa: E731
        return {"lower": list(self.lower), "upper": [enc(v) for v in self.upper]}


@dataclass
class ConvergenceReport:
    """Empirical ratios on a grid of scales against an analytic target."""

    t_grid: np.ndarray
    ratios: np.ndarray
    limit: float
    rel_errors: np.ndarray
    tolerance: float
    passed: bool
    stderr: np.ndarray | None = None
    diagnostics: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.t_grid) <= 0):
            raise DomainError("report t grid must be strictly increasing")
        if not np.all(np.isfinite(self.ratios)):
            raise NumericalFailure("report ratios must be finite")

    @property
    def max_rel_error(self) -> float:
        e = np.asarray(self.rel_errors)
        return float(np.max(e)) if e.size and np.all(np.isfinite(e)) else math.nan

    @property
    def targets(self) -> np.ndarray:
        tg = self.extra.get("targets")
        return np.asarray(tg) if tg is not None else np.full_like(self.ratios, self.limit)

    def curve_rows(self):
        """Rows ``(t, ratio, target, rel_error)`` for the CSV curve files."""
        return list(zip(self.t_grid.tolist(), self.ratios.tolist(),
                        self.targets.tolist(), self.rel_errors.tolist()))

    def to_dict(self) -> dict:
        out = {
            "t_grid": self.t_grid.tolist(),
            "ratios": self.ratios.tolist(),
            "limit": _json_float(self.limit),
            "rel_errors": [_json_float(v) for v in self.rel_errors],
            "max_rel_error": _json_float(self.max_rel_error),
            "tolerance": self.tolerance,
            "passed": bool(self.passed),
            "diagnostics": list(self.diagnostics),
        }
        if self.stderr is not None:
            out["stderr"] = self.stderr.tolist()
        if self.extra:
            out["extra"] = {k: _jsonable(v) for k, v in self.extra.items()}
        return out


@dataclass(frozen=True)
class TailIndexEstimate:
    index: float
    stderr: float
    grid: np.ndarray = field(repr=False)
    intercept: float = 0.0

    def to_dict(self) -> dict:
        return {"index": self.index, "stderr": self.stderr, "intercept": self.intercept,
                "grid": self.grid.tolist()}


def _json_float(v):
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_json_float(x) for x in v.ravel()] if v.dtype.kind == "f" else v.tolist()
    if isinstance(v, (float, np.floating)):
        return _json_float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _converged(t: np.ndarray, rel: np.ndarray, tol: float) -> bool:
    """Final error below ``tol`` and non-increasing over the last decade."""
    if not np.all(np.isfinite(rel)):
        return False
    last = rel[t >= t[-1] / 10.0]
    noise = 64 * np.finfo(float).eps
    monotone = np.all((np.diff(last) <= 0) | (last[1:] <= noise))
    return bool(rel[-1] < tol and monotone)


# ---------------------------------------------------------------------------
# limit and scale functions


def _require_beta(m: LiouvilleModel) -> float:
    beta = m.beta
    if beta is None:
        raise DomainError(f"driving family {m.driving.family} is not regularly varying")
    return beta


def _positive_points(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise DomainError(f"expected points of dimension {d}")
    if np.any(x <= 0):
        raise DomainError("limit function is evaluated on the open orthant only")
    return x


def _shape_factor(m, x):
    return np.prod(x ** (np.asarray(m.shapes) - 1.0), axis=-1)


def limit_function(m: LiouvilleModel, s: ScalingSpec, x):
    """``kappa * (sum_{i in argmax} x_i)**(-beta) * prod x_i**(a_i - 1)``."""
    beta = _require_beta(m)
    x = _positive_points(x, m.d)
    lam = m.kappa * x[..., list(s.argmax_set)].sum(axis=-1) ** (-beta) * _shape_factor(m, x)
    return float(lam) if np.ndim(lam) == 0 else lam


def limit_function_isotropic(m: LiouvilleModel, x):
    """Scalar-scaling limit ``kappa * (sum x_i)**(-beta) * prod x_i**(a_i - 1)``."""
    beta = _require_beta(m)
    x = _positive_points(x, m.d)
    lam = m.kappa * x.sum(axis=-1) ** (-beta) * _shape_factor(m, x)
    return float(lam) if np.ndim(lam) == 0 else lam


def log_scale_function_V(m: LiouvilleModel, s: ScalingSpec, t):
    t = np.asarray(t, dtype=float)
    weight = math.fsum(al * a for al, a in zip(s.exponents, m.shapes))
    return m.driving.log(t**s.alpha_max) + weight * np.log(t)


def scale_function_V(m: LiouvilleModel, s: ScalingSpec, t):
    """``V(t) = g(t**alpha_max) * t**sum(alpha_i a_i)``."""
    if np.any(np.asarray(t) <= 0):
        raise DomainError("scale function needs t > 0")
    with np.errstate(under="ignore"):
        v = np.exp(log_scale_function_V(m, s, t))
    return float(v) if np.ndim(v) == 0 else v


def log_scale_function_isotropic(m: LiouvilleModel, t):
    t = np.asarray(t, dtype=float)
    return m.driving.log(t) + math.fsum(m.shapes) * np.log(t)


def scale_function_isotropic(m: LiouvilleModel, t):
    """``V(t) = g(t) * t**sum(a_i)``."""
    with np.errstate(under="ignore"):
        v = np.exp(log_scale_function_isotropic(m, t))
    return float(v) if np.ndim(v) == 0 else v


# ---------------------------------------------------------------------------
# density ratios


def _log_density_ratios(m, exponents, log_v, x, t):
    logt = np.log(t)
    pts = x[None, :] * np.power(t[:, None], np.asarray(exponents)[None, :])
    return log_density(m, pts) + math.fsum(exponents) * logt - log_v


def _ratio_report(t, log_ratios, limit, tol, diagnostics):
    ratios = np.exp(log_ratios)
    if math.isfinite(limit) and limit > 0:
        rel = np.abs(ratios / limit - 1.0)
        passed = _converged(t, rel, tol)
    else:
        rel = np.full_like(ratios, np.nan)
        passed = False
    return ConvergenceReport(t, ratios, limit, rel, tol, passed, diagnostics=diagnostics)


def density_ratio_curve(m: LiouvilleModel, s: ScalingSpec, x, t_grid=None, tol: float = 1e-3):
    """``f(t**E x) / (t**(-tr E) V(t))`` on ``t_grid`` against ``lambda(x)``.

    Computed in log space so that density underflow at large ``t`` does not
    destroy the ratio; underflow is still reported as a diagnostic.
    """
    t = _as_grid(geometric_grid() if t_grid is None else t_grid)
    x = _positive_points(x, m.d)
    diagnostics = []
    try:
        limit = limit_function(m, s, x)
    except DomainError as exc:
        limit = math.nan
        diagnostics.append(f"no analytic limit: {exc}")
    log_r = _log_density_ratios(m, s.exponents, log_scale_function_V(m, s, t), x, t)
    _underflow_note(m, s.exponents, x, t, diagnostics)
    return _ratio_report(t, log_r, limit, tol, diagnostics)


def density_ratio_curve_isotropic(m: LiouvilleModel, x, t_grid=None, tol: float = 1e-3):
    """Scalar-scaling density ratio ``f(t x) / (t**(-d) V(t))``."""
    t = _as_grid(geometric_grid() if t_grid is None else t_grid)
    x = _positive_points(x, m.d)
    limit = limit_function_isotropic(m, x)
    ones = (1.0,) * m.d
    log_r = _log_density_ratios(m, ones, log_scale_function_isotropic(m, t), x, t)
    return _ratio_report(t, log_r, limit, tol, [])


def _underflow_note(m, exponents, x, t, diagnostics):
    pts = x[None, :] * np.power(t[:, None], np.asarray(exponents)[None, :])
    with np.errstate(under="ignore"):
        direct = np.exp(log_density(m, pts))
    bad = t[direct == 0.0]
    if bad.size:
        diagnostics.append(f"density underflows to 0 for t >= {bad[0]:.6g}; ratios use log space")


# ---------------------------------------------------------------------------
# intensity measure


def _measure_diverges(m: LiouvilleModel, s: ScalingSpec, box: BoxRegion, beta: float) -> bool:
    unbounded = [i for i, u in enumerate(box.upper) if math.isinf(u)]
    if any(i not in s.argmax_set for i in unbounded):
        return True
    return beta <= math.fsum(m.shapes[i] for i in unbounded)


def limiting_measure(
    m: LiouvilleModel,
    s: ScalingSpec,
    box: BoxRegion,
    epsrel: float = EPSREL,
    return_error: bool = False,
    n_mc: int = 200_000,
    seed: int = 0,
):
    """``mu(B) = int_B lambda(x) dx``; ``inf`` when the integral diverges.

    Adaptive nested quadrature for ``d <= 3``; above that, Monte Carlo on the
    compactified box (``x = l / u`` on unbounded sides) with a standard error.
    """
    beta = _require_beta(m)
    if box.dim != m.d:
        raise DomainError(f"box dimension {box.dim} does not match model dimension {m.d}")
    if _measure_diverges(m, s, box, beta):
        return (math.inf, 0.0) if return_error else math.inf
    idx = list(s.argmax_set)
    a1 = np.asarray(m.shapes) - 1.0
    logk = math.log(m.kappa)

    def lam(*x):
        x = np.asarray(x)
        return math.exp(logk - beta * math.log(x[idx].sum()) + float(np.dot(a1, np.log(x))))

    if m.d <= 3:
        val, err = _box_integral(lam, box, epsrel)
    else:
        val, err = _measure_mc(lam, box, n_mc, seed)
    return (val, err) if return_error else val


def _measure_mc(lam, box, n, seed):
    rng = np.random.default_rng(seed)
    u = 1.0 - rng.random((n, box.dim))
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    inf = np.isinf(hi)
    x = np.where(inf, lo / u, lo + u * np.where(inf, 0.0, hi - lo))
    jac = np.prod(np.where(inf, lo / u**2, np.where(inf, 0.0, hi - lo)), axis=1)
    w = np.array([lam(*row) for row in x]) * jac
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(n))


def scaling_exponent_check(m: LiouvilleModel, s: ScalingSpec, box: BoxRegion, t_grid, tol=1e-6):
    """Check ``mu(t**E B) = t**(-rho) mu(B)`` by quadrature on the scaled boxes."""
    mu = limiting_measure(m, s, box)
    if not (0 < mu < math.inf):
        raise DivergenceError(f"mu(B) = {mu} is not finite and positive")
    t = _as_grid(t_grid)
    scaled = np.array([limiting_measure(m, s, box.scaled(s.exponents, ti)) for ti in t])
    ratios = scaled * t**s.rho
    rel = np.abs(ratios / mu - 1.0)
    rep = ConvergenceReport(t, ratios, mu, rel, tol, bool(np.max(rel) < tol))
    rep.extra["rho"] = s.rho
    rep.extra["scaled_measures"] = scaled
    return rep


# ---------------------------------------------------------------------------
# Monte Carlo tail probabilities


def max_usable_t(m, s, box, n, min_hits=100.0, t_grid=None):
    """Largest grid ``t`` with ``n * mu(B) * V(t) >= min_hits``, else ``None``."""
    mu = limiting_measure(m, s, box)
    t = _as_grid(geometric_grid(1.0, 1e8) if t_grid is None else t_grid)
    ok = t[n * mu * scale_function_V(m, s, t) >= min_hits]
    return float(ok[-1]) if ok.size else None


def tail_prob_ratio(
    m: LiouvilleModel,
    s: ScalingSpec,
    box: BoxRegion,
    t,
    n_mc: int,
    seed: int,
    k_sigma: float = 3.0,
    workers: int = 1,
):
    """Monte Carlo ``P(X in t**E B) / V(t)`` against ``mu(B)``.

    A point is a hit when ``x_i / t**alpha_i`` lies in ``B`` for every ``i``.
    The report passes when every grid point is within ``k_sigma`` binomial
    standard errors of ``mu(B)``.
    """
    t = _as_grid(t)
    mu = limiting_measure(m, s, box)
    scale = np.power(t[:, None], np.asarray(s.exponents)[None, :])
    lo, hi = np.asarray(box.lower), np.asarray(box.upper)
    hits = np.zeros(t.size, dtype=np.int64)
    for block in iter_blocks(m, n_mc, seed, workers):
        for k in range(t.size):
            z = block / scale[k]
            hits[k] += int(np.count_nonzero(np.all((z >= lo) & (z <= hi), axis=1)))
    usable = max_usable_t(m, s, box, n_mc) if math.isfinite(mu) else None
    if np.any(hits == 0):
        raise DomainError(
            f"no Monte Carlo hits at t = {t[hits == 0].tolist()} with n = {n_mc}; "
            f"largest t with n*p >= 100 is about {usable}"
        )
    p = hits / n_mc
    v = scale_function_V(m, s, t)
    ratios = p / v
    stderr = np.sqrt(p * (1.0 - p) / n_mc) / v
    if math.isfinite(mu):
        rel = np.abs(ratios / mu - 1.0)
        passed = bool(np.all(np.abs(ratios - mu) <= k_sigma * stderr))
    else:
        rel = np.full_like(ratios, np.nan)
        passed = False
    rep = ConvergenceReport(t, ratios, mu, rel, k_sigma, passed, stderr=stderr)
    rep.extra.update(hits=hits, n=int(n_mc), seed=int(seed), max_usable_t=usable,
                     z_scores=(ratios - mu) / stderr)
    for tk, hk in zip(t, hits):
        if hk < 100:
            rep.diagnostics.append(f"only {hk} hits at t = {tk:.6g}; n*p < 100")
    return rep


# ---------------------------------------------------------------------------
# rotated densities


def rotate_density_check(f, O, E, x, t: float, V=None):
    """Evaluate the normalized density ratio via ``E`` and via its diagonal form.

    Returns ``(f(t**E x) / (t**-tr(E) V(t)), f*(t**D O x) / (t**-tr(D) V(t)))``
    with ``D = O E O^T`` and ``f*(y) = f(O^T y)``; the two agree whenever
    ``O`` diagonalizes ``E``.
    """
    O = np.asarray(O, dtype=float)
    if O.ndim != 2 or O.shape[0] != O.shape[1]:
        raise DomainError("O must be square")
    if np.max(np.abs(O @ O.T - np.eye(O.shape[0]))) > 1e-10:
        raise DomainError("O is not orthogonal")
    op = E if isinstance(E, OperatorIndex) else OperatorIndex.from_matrix(E)
    D = O @ op.matrix @ O.T
    off = D - np.diag(np.diag(D))
    if np.max(np.abs(off)) > 1e-10 * max(1.0, float(np.max(np.abs(D)))):
        raise DomainError("O does not diagonalize E")
    lam = np.diag(D)
    x = np.asarray(x, dtype=float)
    vt = 1.0 if V is None else float(V(t))
    direct = f(power_matrix(op, t) @ x) / (t ** (-op.trace) * vt)
    y = O @ x
    f_star = lambda z: f(O.T @ z)  # noqa: E731
    rotated = f_star(np.power(t, lam) * y) / (t ** (-float(np.sum(lam))) * vt)
    return float(direct), float(rotated)


# ---------------------------------------------------------------------------
# conditional tails


def _box_integral(fn, box: BoxRegion, epsrel=EPSREL, fail_rel=1e-6):
    """Nested adaptive quadrature of ``fn`` over ``box``; raises on a poor error estimate."""
    ranges = [list(r) for r in zip(box.lower, box.upper)]
    opts = {"epsabs": 0.0, "epsrel": epsrel, "limit": 200}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.nquad(fn, ranges, opts=[opts] * box.dim)
    if not math.isfinite(val) or err > fail_rel * abs(val):
        raise NumericalFailure(f"box quadrature unreliable: value {val:.6g}, error estimate {err:.2g}")
    return val, err


def conditional_tail_ratio(
    m: LiouvilleModel,
    r: int,
    x_fixed_unit,
    box: BoxRegion,
    t_grid=None,
    tol: float = 0.02,
    scale_conditioning: bool = True,
):
    r"""Conditional tail ``P((X_{r+1}, ..., X_d) in tB | X_{1..r} = t x) / V(t)``.

    With ``scale_conditioning`` the conditioning values move with ``t``; the
    scale function is ``V(t) = g_{r,t}(t) t**a`` and the target is
    ``kappa' int_B ((c + sum y) / (1 + c))**(-beta) prod y_i**(a_i-1) dy``
    with ``c = sum(x)`` and one constant ``kappa'`` fitted over the last decade.
    Without it the conditioning values stay fixed, ``V(t) = g_r(t) t**a`` and
    the target is the exact intensity ``kappa_r int_B (sum y)**(-beta) ...``.

    Log-log slopes of the conditional probability and of ``V`` are returned
    in ``extra``.
    """
    beta = _require_beta(m)
    t = _as_grid(geometric_grid() if t_grid is None else t_grid)
    x_fixed = tuple(float(v) for v in x_fixed_unit)
    if box.dim != m.d - r:
        raise DomainError(f"box must have dimension d - r = {m.d - r}")
    a_rest = np.asarray(m.shapes[r:]) - 1.0
    a = float(sum(m.shapes[r:]))
    c = float(sum(x_fixed))

    probs, log_v = [], []
    cond_fixed = None if scale_conditioning else condition(m, r, x_fixed)
    for tk in t:
        cm = condition(m, r, [tk * v for v in x_fixed]) if scale_conditioning else cond_fixed
        model = cm.model
        logk, g = math.log(model.kappa), model.driving

        # P(Y in tB) = t**k int_B f(t z) dz keeps the integration domain fixed
        log_jac = box.dim * math.log(tk)

        def dens(*z, _g=g, _logk=logk + log_jac, _t=tk):
            y = _t * np.asarray(z)
            return math.exp(_logk + float(_g.log(y.sum())) + float(np.dot(a_rest, np.log(y))))

        probs.append(_box_integral(dens, box)[0])
        log_v.append(float(g.log(tk)) + a * math.log(tk))
    probs = np.asarray(probs)
    log_v = np.asarray(log_v)
    with np.errstate(under="ignore"):
        ratios = probs / np.exp(log_v)

    if scale_conditioning:
        def target_fn(*y):
            y = np.asarray(y)
            return ((c + y.sum()) / (1.0 + c)) ** (-beta) * float(np.prod(y**a_rest))

        target = _box_integral(target_fn, box)[0]
        last = t >= t[-1] / 10.0
        kappa_fit = float(np.exp(np.mean(np.log(ratios[last] / target))))
        limit = kappa_fit * target
        rel = np.abs(ratios / limit - 1.0)
        passed = bool(np.max(rel[last]) < tol)
    else:
        kr = cond_fixed.model.kappa

        def target_fn(*y):
            y = np.asarray(y)
            return kr * y.sum() ** (-beta) * float(np.prod(y**a_rest))

        limit = _box_integral(target_fn, box)[0]
        kappa_fit = None
        rel = np.abs(ratios / limit - 1.0)
        passed = _converged(t, rel, tol)

    rep = ConvergenceReport(t, ratios, limit, rel, tol, passed)
    rep.extra.update(
        conditional_probabilities=probs,
        kappa_fit=kappa_fit,
        scale_conditioning=scale_conditioning,
        probability_slope=_slope(t, np.log(probs)),
        scale_function_slope=_slope(t, log_v),
        expected_slope=a - beta,
    )
    return rep


# ---------------------------------------------------------------------------
# index estimation


def _ols(x, y):
    """Slope, intercept and slope standard error from the residuals.

    Computing the error from residuals (rather than from 1 - r**2) keeps it
    at rounding level for exact power laws.
    """
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    slope = float(np.dot(xc, y - y.mean()) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    stderr = math.sqrt(float(np.dot(resid, resid)) / (x.size - 2) / sxx)
    return slope, intercept, stderr


def _slope(t, logy):
    return _ols(np.log(t), np.asarray(logy, dtype=float))[0]


def rv_index_estimate(fn, t_grid) -> TailIndexEstimate:
    """OLS slope of ``log fn(t)`` against ``log t`` with its standard error."""
    t = _as_grid(t_grid)
    if t.size < 8:
        raise DomainError("index estimation needs at least 8 grid points")
    q = t[1:] / t[:-1]
    if np.max(np.abs(q / q[0] - 1.0)) > 1e-8:
        raise DomainError("index estimation needs a geometric grid")
    y = np.array([float(fn(float(tk))) for tk in t])
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise DomainError("function must be positive and finite on the grid")
    slope, intercept, stderr = _ols(np.log(t), np.log(y))
    return TailIndexEstimate(slope, stderr, t, intercept)
