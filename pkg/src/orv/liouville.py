r"""Multivariate Liouville laws :math:`L_d[g; a_1, \dots, a_d]`.

The density is :math:`\kappa\, g(\sum_i x_i) \prod_i x_i^{a_i - 1}` on the
open positive orthant.  Sampling uses the stochastic representation
:math:`X = R\,Y` with :math:`Y \sim \mathrm{Dirichlet}(a)` and an independent
radial part :math:`R` whose density is proportional to
:math:`r^{\sum a_i - 1} g(r)`.

Random streams
--------------
A sample of size ``n`` is the concatenation of blocks of :data:`BLOCK_SIZE`
draws; block ``b`` uses ``PCG64(SeedSequence(seed, spawn_key=(b,)))`` and
draws the radial uniforms first, then the Dirichlet directions.  The output
therefore depends only on ``(model, n, seed)``, not on the worker count.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, special

from .driving import (
    DrivingFunction,
    Exponential,
    InvertedDirichlet,
    ParetoLog,
    Shifted,
    integrability_check,
    tail_beta,
    weyl_integral,
    weyl_kernel_integral,
    weyl_transform,
)
from .errors import DivergenceError, DomainError, NumericalFailure

BLOCK_SIZE = 1 << 18
NORMALIZATION_TOL = 1e-8


@functools.lru_cache(maxsize=256)
def _moment(driving: DrivingFunction, a_sum: float, method: str = "auto"):
    return integrability_check(driving, a_sum, method)


@dataclass(frozen=True)
class LiouvilleModel:
    """Shapes, driving function and normalizing constant of a Liouville law.

    Build instances with :func:`normalize`; direct construction re-checks
    that ``kappa`` normalizes the density.
    """

    shapes: tuple
    driving: DrivingFunction
    kappa: float

    def __post_init__(self):
        shapes = tuple(float(a) for a in self.shapes)
        if not shapes:
            raise DomainError("a Liouville model needs at least one shape parameter")
        if any(not (a > 0) or not math.isfinite(a) for a in shapes):
            raise DomainError(f"shape parameters must be positive, got {shapes}")
        object.__setattr__(self, "shapes", shapes)
        res = _moment(self.driving, sum(shapes))
        if not res.finite:
            raise DivergenceError(
                f"int t^(A-1) g(t) dt diverges for A = {sum(shapes)} "
                f"(tail index {self.driving.rv_index})"
            )
        if not (self.kappa > 0):
            raise DomainError("kappa must be positive")
        log_total = (
            math.log(self.kappa)
            + float(np.sum(special.gammaln(shapes)))
            - float(special.gammaln(sum(shapes)))
            + math.log(res.value)
        )
        if abs(math.expm1(log_total)) > NORMALIZATION_TOL:
            raise DomainError(f"kappa={self.kappa} does not normalize the density")

    @property
    def d(self) -> int:
        return len(self.shapes)

    @property
    def a_sum(self) -> float:
        return float(sum(self.shapes))

    @property
    def beta(self):
        return tail_beta(self.driving)

    def to_config(self) -> dict:
        return {"shapes": list(self.shapes), "driving": self.driving.to_config()}

    def model_hash(self) -> str:
        blob = json.dumps(self.to_config(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def density(self, x):
        return density(self, x)

    def log_density(self, x):
        return log_density(self, x)


def normalize(shapes, driving: DrivingFunction, method: str = "auto") -> LiouvilleModel:
    """Attach ``kappa = Gamma(A) / (prod Gamma(a_i) * int t^(A-1) g(t) dt)``."""
    shapes = tuple(float(a) for a in shapes)
    if not shapes or any(not (a > 0) for a in shapes):
        raise DomainError(f"shape parameters must be positive, got {shapes}")
    a_sum = sum(shapes)
    res = _moment(driving, a_sum, method)
    if not res.finite:
        raise DivergenceError(
            f"driving function is not integrable against t^(A-1), A = {a_sum}; "
            f"tail index {driving.rv_index}"
        )
    log_kappa = (
        float(special.gammaln(a_sum))
        - float(np.sum(special.gammaln(shapes)))
        - math.log(res.value)
    )
    return LiouvilleModel(shapes, driving, math.exp(log_kappa))


def log_density(m: LiouvilleModel, x):
    """Log density; ``-inf`` outside the closed orthant.

    On a coordinate hyperplane the factor ``x_i**(a_i-1)`` is extended by
    continuity when ``a_i >= 1``; for ``a_i < 1`` it is unbounded and the
    evaluation raises :class:`DomainError`.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.d:
        raise DomainError(f"expected points of dimension {m.d}, got {x.shape[-1]}")
    a = np.asarray(m.shapes)
    zero = x == 0
    if np.any(zero & (a < 1)):
        raise DomainError("density is unbounded on the boundary when a_i < 1")
    outside = np.any(x < 0, axis=-1) | np.any(zero & (a > 1), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        powers = np.where(zero, 0.0, (a - 1.0) * np.log(np.where(zero, 1.0, x)))
        out = math.log(m.kappa) + m.driving.log(np.sum(np.maximum(x, 0.0), axis=-1))
        out = out + np.sum(powers, axis=-1)
    out = np.where(outside, -np.inf, out)
    return float(out) if out.ndim == 0 else out


def density(m: LiouvilleModel, x):
    with np.errstate(under="ignore"):
        out = np.exp(log_density(m, x))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# radial law


class RadialLaw:
    """Inverse CDF of the radial part ``R = sum X_i``.

    Closed forms: beta-prime quantiles for the inverted-Dirichlet family and
    gamma quantiles for the exponential family.  Otherwise a monotone (PCHIP)
    spline through ``knots`` points of the numerically integrated CDF, with
    power-law extrapolation beyond the table.
    """

    def __init__(self, m: LiouvilleModel, knots: int = 2048, force_table: bool = False):
        self.a_sum = m.a_sum
        self.driving = m.driving
        g = m.driving
        self.kind = "table"
        if not force_table:
            if isinstance(g, InvertedDirichlet) or (isinstance(g, ParetoLog) and g.delta == 0.0):
                self.kind = "beta-prime"
                self._b = g.beta - self.a_sum
            elif isinstance(g, Exponential):
                self.kind = "gamma"
        if self.kind == "table":
            self._build_table(knots)

    def _build_table(self, knots, lo=-28.0, hi=37.0, order=8):
        g, A = self.driving, self.a_sum
        s = np.linspace(lo, hi, knots)
        nodes, weights = np.polynomial.legendre.leggauss(order)
        h = np.diff(s)
        mid = 0.5 * (s[1:] + s[:-1])
        pts = mid[:, None] + 0.5 * h[:, None] * nodes[None, :]
        with np.errstate(under="ignore", over="ignore"):
            vals = np.exp(A * pts + g.log(np.exp(pts)))
        seg = 0.5 * h * (vals @ weights)
        r_lo, r_hi = math.exp(lo), math.exp(hi)
        head = float(g(0.0)) * r_lo**A / A
        beta = tail_beta(g)
        tail = 0.0
        if beta is not None:
            tail = float(g(r_hi)) * r_hi**A / (beta - A)
        total = head + float(seg.sum()) + tail
        exact = _moment(g, A).value
        if not math.isfinite(total) or abs(total / exact - 1.0) > 1e-6:
            raise NumericalFailure(
                f"radial CDF table failed: tabulated mass {total:.10g} vs integral {exact:.10g}"
            )
        cdf = (head + np.concatenate([[0.0], np.cumsum(seg)])) / total
        sf = (tail + np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])) / total
        keep = (cdf > 0) & (sf > 0)
        with np.errstate(divide="ignore"):
            z = np.log(cdf[keep]) - np.log(sf[keep])
        logr = s[keep]
        inc = np.concatenate([[True], np.diff(z) > 0])
        z, logr = z[inc], logr[inc]
        self._spline = interpolate.PchipInterpolator(z, logr, extrapolate=False)
        self._z = (z[0], z[-1])
        self._ends = (
            (math.exp(logr[0]), float(cdf[keep][inc][0])),
            (math.exp(logr[-1]), float(sf[keep][inc][-1])),
        )
        self._beta = beta

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        A = self.a_sum
        if self.kind == "beta-prime":
            lower = u <= 0.5
            b = np.where(lower, special.betaincinv(A, self._b, u), 0.0)
            c = np.where(lower, 0.0, special.betaincinv(self._b, A, 1.0 - u))
            return np.where(lower, b / (1.0 - b), (1.0 - c) / np.where(lower, 1.0, c))
        if self.kind == "gamma":
            lower = u <= 0.5
            x = np.where(lower, special.gammaincinv(A, u), special.gammainccinv(A, 1.0 - u))
            return x / self.driving.rate
        z = np.log(u) - np.log1p(-u)
        out = np.exp(self._spline(np.clip(z, *self._z)))
        (r0, f0), (r1, s1) = self._ends
        below = z < self._z[0]
        out = np.where(below, r0 * (u / f0) ** (1.0 / A), out)
        above = z > self._z[1]
        if self._beta is not None:
            with np.errstate(divide="ignore"):
                ext = r1 * ((1.0 - u) / s1) ** (-1.0 / (self._beta - A))
            out = np.where(above, ext, out)
        else:
            out = np.where(above, r1, out)
        return out

    def cdf(self, r):
        """Radial CDF (closed forms only; used by goodness-of-fit checks)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "beta-prime":
            return special.betainc(self.a_sum, self._b, r / (1.0 + r))
        if self.kind == "gamma":
            return special.gammainc(self.a_sum, self.driving.rate * r)
        raise DomainError("radial CDF is only available in closed form for built-in families")


@functools.lru_cache(maxsize=64)
def radial_law(m: LiouvilleModel) -> RadialLaw:
    return RadialLaw(m)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SampleBatch:
    points: np.ndarray = field(repr=False)
    seed: int
    model: dict

    def __post_init__(self):
        if not np.all(self.points > 0):
            raise NumericalFailure("sampler produced a non-positive coordinate")
        self.points.setflags(write=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def model_hash(self) -> str:
        blob = json.dumps(self.model, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "n": self.n,
            "block_size": BLOCK_SIZE,
            "model": self.model,
            "model_hash": self.model_hash(),
        }

    def to_csv(self, path):
        d = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(d)])
            for row in self.points:
                w.writerow([repr(float(v)) for v in row])


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _draw_block(m: LiouvilleModel, law: RadialLaw, size: int, seed: int, block: int):
    rng = block_rng(seed, block)
    # uniforms strictly inside (0, 1)
    u = (rng.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) / 2.0**53
    r = law.ppf(u)
    if m.d == 1:
        return r[:, None]
    y = rng.dirichlet(m.shapes, size=size)
    return r[:, None] * y


def iter_blocks(m: LiouvilleModel, n: int, seed: int, workers: int = 1):
    """Yield the blocks of ``sample(m, n, seed)`` in order."""
    if n < 1:
        raise DomainError("sample size must be at least 1")
    seed = _check_seed(seed)
    law = radial_law(m)
    sizes = [min(BLOCK_SIZE, n - b * BLOCK_SIZE) for b in range(-(-n // BLOCK_SIZE))]
    if workers <= 1:
        for b, size in enumerate(sizes):
            yield _draw_block(m, law, size, seed, b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(lambda bs: _draw_block(m, law, bs[1], seed, bs[0]), enumerate(sizes))


def sample(m: LiouvilleModel, n: int, seed: int, workers: int = 1) -> SampleBatch:
    """``n`` i.i.d. draws from ``m``; reproducible for a given ``seed``."""
    pts = np.concatenate(list(iter_blocks(m, int(n), seed, workers)), axis=0)
    return SampleBatch(pts, _check_seed(seed), m.to_config())


# ---------------------------------------------------------------------------
# margins and conditioning


def _check_split(m: LiouvilleModel, r: int):
    if not (isinstance(r, (int, np.integer)) and 1 <= r < m.d):
        raise DomainError(f"split index r must satisfy 1 <= r < d = {m.d}, got {r}")
    return int(r)


def marginal(m: LiouvilleModel, r: int) -> LiouvilleModel:
    """Law of ``(X_1, ..., X_r)``: shapes ``a_1..a_r``, driving ``W**a g``."""
    r = _check_split(m, r)
    a = float(sum(m.shapes[r:]))
    return normalize(m.shapes[:r], weyl_transform(m.driving, a))


@dataclass(frozen=True)
class ConditionalModel:
    """Law of ``(X_{r+1}, ..., X_d)`` given ``X_i = fixed_i`` for ``i <= r``."""

    base: LiouvilleModel
    r: int
    fixed: tuple
    model: LiouvilleModel

    @property
    def driving(self) -> DrivingFunction:
        return self.model.driving

    @property
    def order(self) -> float:
        return float(sum(self.base.shapes[self.r :]))


def condition(m: LiouvilleModel, r: int, fixed) -> ConditionalModel:
    r"""Condition on the first ``r`` coordinates.

    The result is Liouville with shapes ``a_{r+1}..a_d`` and driving function
    ``g_r(t) = g(t + c) / W^a g(c)``, where ``c = sum(fixed)`` and
    ``a = a_{r+1} + ... + a_d``.
    """
    r = _check_split(m, r)
    fixed = tuple(float(v) for v in fixed)
    if len(fixed) != r or any(not (v > 0) for v in fixed):
        raise DomainError(f"need {r} positive conditioning values, got {fixed}")
    c = float(sum(fixed))
    a = float(sum(m.shapes[r:]))
    w = weyl_integral(m.driving, a, c).value
    if not (w > 0) or not math.isfinite(w):
        raise NumericalFailure(f"W^{a} g({c}) = {w} cannot normalize the conditional law")
    g_r = Shifted(m.driving, c, 1.0 / w)
    return ConditionalModel(m, r, fixed, normalize(m.shapes[r:], g_r))


def _check_order_sum(m, r):
    r = _check_split(m, r)
    return r, float(sum(m.shapes[r:]))


def conditional_moment_ratio(m: LiouvilleModel, r: int, j, t: float) -> float:
    """``W^(J+a) g(t) / W^a g(t)`` with ``J = sum(j)``.

    Proportional to ``E(prod_{i>r} X_i**j_i | X_1 + ... + X_r = t)``.
    """
    r, a = _check_order_sum(m, r)
    j = tuple(j)
    if len(j) != m.d - r or any(int(v) != v or v < 0 for v in j):
        raise DomainError(f"j must be {m.d - r} nonnegative integers, got {j}")
    total = float(sum(j))
    if total == 0:
        return 1.0
    num = weyl_integral(m.driving, total + a, t).value
    return num / weyl_integral(m.driving, a, t).value


def conditional_h_expectation(m: LiouvilleModel, r: int, h: DrivingFunction, t: float) -> float:
    """``int_t^inf (y-t)**(a-1) h(y-t) g(y) dy / W^a g(t)``.

    Proportional to ``E(h(X_{r+1} + ... + X_d) | X_1 + ... + X_r = t)``;
    ``h`` must carry a regular-variation index.
    """
    r, a = _check_order_sum(m, r)
    if h.rv_index is None:
        raise DomainError(f"h must be regularly varying; family {h.family} has no index")
    num, _ = weyl_kernel_integral(m.driving, h, a, t)
    if not math.isfinite(num):
        raise DivergenceError("conditional h-expectation diverges")
    return num / weyl_integral(m.driving, a, t).value
