import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate, special, stats

from orv.driving import Exponential, InvertedDirichlet, ParetoLog, weyl_transform
from orv.errors import DivergenceError, DomainError
from orv.liouville import (
    BLOCK_SIZE,
    RadialLaw,
    condition,
    conditional_h_expectation,
    conditional_moment_ratio,
    density,
    iter_blocks,
    marginal,
    normalize,
    sample,
)
from orv.regvar import geometric_grid, rv_index_estimate


def ref_cell_probs(edges):
    """Cell probabilities of the reference model from P(X>x, Y>y) = (1+x+y)^-1."""
    e = np.asarray(edges)
    h = 1.0 / (1.0 + e[:, None] + e[None, :])
    return h[:-1, :-1] - h[1:, :-1] - h[:-1, 1:] + h[1:, 1:]


def test_normalize_examples(ref):
    assert ref.kappa == pytest.approx(2.0, rel=1e-8)
    assert normalize((1.0,), Exponential(1.0)).kappa == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DivergenceError):
        normalize((1.0, 1.0), InvertedDirichlet(2.0))


@pytest.mark.parametrize("shapes,beta", [((0.5, 1.5), 3.0), ((2.0, 1.0, 0.7), 5.0), ((1.2,), 2.0)])
def test_normalization_invariant(shapes, beta):
    m = normalize(shapes, InvertedDirichlet(beta))
    a = sum(shapes)
    # inverted Dirichlet with extra shape beta - a: kappa = Gamma(beta) / (Gamma(beta - a) prod Gamma(a_i))
    expect = math.exp(math.lgamma(beta) - math.lgamma(beta - a) - sum(math.lgamma(s) for s in shapes))
    assert m.kappa == pytest.approx(expect, rel=1e-8)
    mq = normalize(shapes, InvertedDirichlet(beta), method="quadrature")
    assert mq.kappa == pytest.approx(expect, rel=1e-8)


def test_normalize_pareto_log_quadrature():
    m = normalize((1.0, 1.0), ParetoLog(3.0, 1.0))
    mp.mp.dps = 30
    moment = mp.quad(lambda t: t * (1 + t) ** -3 * mp.log(mp.e + t), [0, 1, 10, mp.inf])
    assert m.kappa == pytest.approx(float(1 / moment), rel=1e-8)


def test_shapes_validated():
    with pytest.raises(DomainError):
        normalize((), InvertedDirichlet(3.0))
    with pytest.raises(DomainError):
        normalize((1.0, 0.0), InvertedDirichlet(3.0))


def test_density_examples(ref):
    assert density(ref, [1.0, 1.0]) == pytest.approx(2 / 27, rel=1e-12)
    assert density(ref, [0.0, 1.0]) == pytest.approx(2 * 2.0**-3, rel=1e-12)
    m = normalize((2.0, 1.0), InvertedDirichlet(4.0))
    assert density(m, [1.0, 1.0]) == pytest.approx(6 / 81, rel=1e-12)
    assert density(m, [0.0, 1.0]) == 0.0
    assert density(ref, [-1.0, 1.0]) == 0.0
    with pytest.raises(DomainError):
        density(normalize((0.5, 1.0), InvertedDirichlet(3.0)), [0.0, 1.0])


def test_density_vectorized(ref):
    pts = np.array([[1.0, 1.0], [2.0, 0.5], [0.1, 3.0]])
    np.testing.assert_allclose(density(ref, pts), 2 * (1 + pts.sum(1)) ** -3, rtol=1e-13)


def orthant_mass(m, r_nodes=32, y_nodes=48):
    """Integrate the density over the orthant in (radius, simplex) coordinates.

    Tensor Gauss-Legendre on geometric radial panels; independent of the
    moment formula used to normalize the model.
    """
    gx, gw = np.polynomial.legendre.leggauss(r_nodes)
    edges = np.concatenate([[0.0], np.geomspace(1e-8, 1e10, 91)])
    lo, hi = edges[:-1, None], edges[1:, None]
    r = (0.5 * (hi - lo) * gx + 0.5 * (hi + lo)).ravel()
    rw = (0.5 * (hi - lo) * gw).ravel()
    yx, yw = np.polynomial.legendre.leggauss(y_nodes)
    u, uw = 0.5 * (yx + 1), 0.5 * yw
    if m.d == 2:
        # Gauss-Jacobi absorbs the u**(a1-1) (1-u)**(a2-1) boundary behaviour
        a1, a2 = m.shapes
        jx, jw = special.roots_jacobi(y_nodes, a2 - 1, a1 - 1)
        u = 0.5 * (jx + 1)
        simplex = np.stack([u, 1 - u], axis=1)
        sw = jw * 0.5 ** (a1 + a2 - 1) / (u ** (a1 - 1) * (1 - u) ** (a2 - 1))
    else:
        uu, ww = np.meshgrid(u, u, indexing="ij")
        simplex = np.stack([uu.ravel(), ((1 - uu) * ww).ravel(), ((1 - uu) * (1 - ww)).ravel()], axis=1)
        sw = np.outer(uw, uw).ravel() * (1 - uu.ravel())
    total = 0.0
    for rk, wk in zip(r, rw):
        total += wk * rk ** (m.d - 1) * np.dot(sw, density(m, rk * simplex))
    return total


@pytest.mark.parametrize("shapes,g", [((1.0, 1.0), InvertedDirichlet(3.0)), ((1.5, 2.0), ParetoLog(5.0, 0.5)),
                                      ((1.0, 2.0), Exponential(1.3)), ((1.0, 1.5, 2.0), InvertedDirichlet(6.0))])
def test_density_integrates_to_one(shapes, g):
    assert orthant_mass(normalize(shapes, g)) == pytest.approx(1.0, abs=1e-5)


def test_samples_positive_and_reproducible(ref):
    a = sample(ref, 1000, seed=11)
    b = sample(ref, 1000, seed=11)
    assert np.all(a.points > 0)
    assert a.points.tobytes() == b.points.tobytes()
    assert sample(ref, 1000, seed=12).points.tobytes() != a.points.tobytes()
    with pytest.raises(ValueError):
        a.points[0, 0] = 1.0


def test_samples_independent_of_workers(ref):
    n = 2 * BLOCK_SIZE + 17
    a = sample(ref, n, seed=5, workers=1)
    b = sample(ref, n, seed=5, workers=3)
    assert a.points.tobytes() == b.points.tobytes()


def test_iter_blocks_sizes(ref):
    sizes = [blk.shape[0] for blk in iter_blocks(ref, BLOCK_SIZE + 3, 0)]
    assert sizes == [BLOCK_SIZE, 3]
    with pytest.raises(DomainError):
        list(iter_blocks(ref, 0, 0))
    with pytest.raises(DomainError):
        sample(ref, 10, seed=-1)


def test_radial_median(ref):
    r = sample(ref, 100_000, seed=1).points.sum(1)
    f = 2 * 2.4142 / 3.4142**3
    se = 1 / (2 * f * math.sqrt(r.size))
    assert abs(np.median(r) - (math.sqrt(0.5) / (1 - math.sqrt(0.5)))) < 4 * se


def test_radial_ks_reference(ref):
    r = sample(ref, 100_000, seed=2).points.sum(1)
    assert stats.kstest(r, lambda x: x**2 / (1 + x) ** 2).pvalue > 0.01


def test_exponential_1d_ks():
    m = normalize((1.0,), Exponential(1.0))
    x = sample(m, 10_000, seed=3).points[:, 0]
    assert stats.kstest(x, "expon").pvalue > 0.01


def test_chi_square_grid_reference(ref):
    pts = sample(ref, 100_000, seed=4).points
    edges = np.linspace(0.0, 5.0, 11)
    counts, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=[edges, edges])
    p = ref_cell_probs(edges)
    expected = p / p.sum() * counts.sum()
    assert stats.chisquare(counts.ravel(), expected.ravel()).pvalue > 0.01


@pytest.mark.parametrize("g,shapes", [(InvertedDirichlet(3.0), (1.0, 1.0)), (InvertedDirichlet(4.5), (0.6, 1.1)),
                                      (Exponential(2.0), (1.5, 1.0))])
def test_radial_table_matches_closed_form(g, shapes):
    m = normalize(shapes, g)
    closed, table = RadialLaw(m), RadialLaw(m, force_table=True)
    assert closed.kind != "table" and table.kind == "table"
    u = np.linspace(1e-6, 1 - 1e-6, 2001)
    np.testing.assert_allclose(table.ppf(u), closed.ppf(u), rtol=1e-6)


def test_radial_table_for_pareto_log():
    m = normalize((1.0, 1.0), ParetoLog(3.0, 1.0))
    law = RadialLaw(m)
    assert law.kind == "table"
    q = law.ppf(np.array([0.1, 0.5, 0.9]))
    # check the quantiles against direct quadrature of the radial density
    dens = lambda r: m.kappa * r * m.driving(r)  # noqa: E731
    for u, r in zip((0.1, 0.5, 0.9), q):
        assert integrate.quad(dens, 0, r, epsabs=0, epsrel=1e-11)[0] == pytest.approx(u, rel=1e-6)


def test_sample_metadata_and_csv(ref, tmp_path):
    batch = sample(ref, 5, seed=9)
    meta = batch.metadata()
    assert meta["seed"] == 9 and meta["n"] == 5 and meta["model_hash"] == ref.model_hash()
    batch.to_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "x1,x2" and len(rows) == 6
    assert float(rows[1].split(",")[0]) == batch.points[0, 0]


def test_marginal_reference(ref):
    mg = marginal(ref, 1)
    assert mg.shapes == (1.0,)
    assert mg.driving(3.0) == pytest.approx(0.5 * 4.0**-2, rel=1e-12)
    for x in (0.0, 0.5, 2.0):
        assert density(mg, [x]) == pytest.approx((1 + x) ** -2, rel=1e-10)
    with pytest.raises(DomainError):
        marginal(ref, 2)


def test_marginal_matches_integration_3d():
    m = normalize((1.0, 1.5, 2.0), ParetoLog(6.0, 0.0))
    mg = marginal(m, 1)
    gx, gw = np.polynomial.legendre.leggauss(48)
    u, uw = 0.5 * (gx + 1), 0.5 * gw
    edges = np.concatenate([[0.0], np.geomspace(1e-8, 1e8, 65)])
    for x in (0.2, 1.0, 3.0, 7.0, 20.0):
        # integrate out (y, z) = s * (u, 1 - u)
        val = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            s_nodes = 0.5 * (hi - lo) * gx + 0.5 * (hi + lo)
            for sk, wk in zip(s_nodes, 0.5 * (hi - lo) * gw):
                pts = np.column_stack([np.full(u.size, x), sk * u, sk * (1 - u)])
                val += wk * sk * np.dot(uw, density(m, pts))
        assert density(mg, [x]) == pytest.approx(val, rel=1e-4)


def test_marginal_of_marginal():
    m = normalize((1.0, 1.0, 1.0), InvertedDirichlet(5.0))
    twice = marginal(marginal(m, 2), 1)
    once = marginal(m, 1)
    for t in (0.0, 1.0, 10.0):
        assert twice.driving(t) * twice.kappa == pytest.approx(once.driving(t) * once.kappa, rel=1e-8)
    assert weyl_transform(weyl_transform(m.driving, 1.0), 1.0)(2.0) == pytest.approx(once.driving(2.0), rel=1e-12)


def test_condition_reference(ref):
    cm = condition(ref, 1, (1.0,))
    for t in (0.0, 1.0, 5.0):
        assert cm.driving(t) == pytest.approx(8 * (2 + t) ** -3, rel=1e-12)
    assert cm.model.kappa == pytest.approx(1.0, rel=1e-8)
    assert cm.driving.rv_index == -3.0
    val = integrate.quad(lambda y: float(density(cm.model, [y])), 0, np.inf, epsrel=1e-10)[0]
    assert val == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(DomainError):
        condition(ref, 1, (0.0,))


def test_condition_3d_integrates():
    m = normalize((1.0, 0.7, 1.6), InvertedDirichlet(5.0))
    cm = condition(m, 1, (2.0,))
    assert orthant_mass(cm.model, y_nodes=64) == pytest.approx(1.0, abs=1e-6)


def test_conditional_moment_ratio(ref5):
    assert conditional_moment_ratio(ref5, 1, (0,), 7.0) == 1.0
    for t in (0.0, 1.0, 100.0):
        assert conditional_moment_ratio(ref5, 1, (1,), t) == pytest.approx((1 + t) / 3, rel=1e-12)
    est = rv_index_estimate(lambda t: conditional_moment_ratio(ref5, 1, (1,), t), geometric_grid(1e2, 1e6))
    assert abs(est.index - 1.0) < 0.02
    with pytest.raises(DomainError):
        conditional_moment_ratio(ref5, 1, (0.5,), 1.0)


def test_conditional_moments_from_samples(ref5):
    pts = sample(ref5, 1_000_000, seed=8).points
    edges = np.geomspace(0.3, 4.0, 9)
    centers, means = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (pts[:, 0] >= lo) & (pts[:, 0] < hi)
        centers.append(pts[sel, 0].mean())
        means.append(pts[sel, 1].mean())
    centers = np.asarray(centers)
    emp = stats.linregress(np.log(centers), np.log(means)).slope
    model = stats.linregress(np.log(centers),
                             np.log([conditional_moment_ratio(ref5, 1, (1,), c) for c in centers])).slope
    assert abs(emp - model) < 0.05


def test_conditional_h_expectation(ref5):
    one = InvertedDirichlet(0.0)
    est = rv_index_estimate(lambda t: conditional_h_expectation(ref5, 1, one, t), geometric_grid(1e2, 1e6))
    assert abs(est.index) < 0.02
    with pytest.raises(DomainError):
        conditional_h_expectation(ref5, 1, Exponential(1.0), 2.0)
    # level against a high-precision oracle
    h = InvertedDirichlet(1.0)
    t = 10.0
    mp.mp.dps = 30
    num = mp.quad(lambda y: (1 + y) ** -1 * (1 + t + y) ** -5, [0, 1, 10, mp.inf])
    oracle = float(num / ((1 + t) ** -4 / 4))
    assert conditional_h_expectation(ref5, 1, h, t) == pytest.approx(oracle, rel=1e-8)


def test_model_hash_stable(ref):
    again = normalize((1.0, 1.0), InvertedDirichlet(3.0))
    assert again.model_hash() == ref.model_hash()
    assert normalize((1.0, 1.0), InvertedDirichlet(4.0)).model_hash() != ref.model_hash()
