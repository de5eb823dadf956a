import itertools
import math
import zlib

import numpy as np
import pytest

from nactree.generator import Generator, psi, psi_inv
from nactree.kendall import pair_pseudo_obs
from nactree.sampler import (
    NacModel,
    NestingError,
    make_rng,
    positive_stable,
    sample_archimedean,
    sample_frailty,
    sample_inner_frailty,
    sample_nac,
    sibuya,
)
from nactree.tree import fan, lca, parse_tree

from conftest import NESTED3, TWO_PAIRS
from oracles import empirical_tau, kendall_cdf_oracle, kolmogorov_to_cdf, tau_se

LT_GRID = np.linspace(0.0, 5.0, 26)


def rng_for(*key):
    # stable integer keys for string labels
    return make_rng(*(zlib.crc32(k.encode()) if isinstance(k, str) else k for k in key))


def mc_laplace(v, grid=LT_GRID):
    return np.array([np.mean(np.exp(-x * v)) for x in grid])


# --- frailties -----------------------------------------------------------------------


def test_clayton_frailty_mean():
    v = sample_frailty(Generator("clayton", 2.0), 100_000, make_rng(1))
    se = math.sqrt(0.5 / 100_000)  # Gamma(0.5, 1) variance 0.5
    assert abs(v.mean() - 0.5) < 3 * se


def test_degenerate_frailties():
    assert np.all(sample_frailty(Generator("amh", 0.0), 1000, make_rng(2)) == 1.0)
    np.testing.assert_allclose(sample_frailty(Generator("gumbel", 1.0), 1000, make_rng(3)), 1.0)


@pytest.mark.parametrize(
    "family,theta", [("clayton", 2.0), ("gumbel", 2.0), ("frank", 5.0), ("joe", 3.0), ("amh", 0.7)]
)
def test_frailty_laplace_transform(family, theta):
    g = Generator(family, theta)
    v = sample_frailty(g, 100_000, rng_for(4, family))
    assert np.max(np.abs(mc_laplace(v) - psi(g, LT_GRID))) < 0.01


def test_frailty_support():
    rng = make_rng(5)
    for fam, th in [("frank", 5.0), ("joe", 3.0), ("amh", 0.7)]:
        v = sample_frailty(Generator(fam, th), 10_000, rng)
        assert np.all(v >= 1) and np.all(v == np.round(v))
    assert np.all(sample_frailty(Generator("clayton", 0.3), 10_000, rng) > 0)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.9])
def test_positive_stable_laplace(alpha):
    s = positive_stable(alpha, 100_000, make_rng(6))
    assert np.max(np.abs(mc_laplace(s) - np.exp(-(LT_GRID**alpha)))) < 0.01


def test_positive_stable_alpha_one():
    np.testing.assert_allclose(positive_stable(1.0, 100, make_rng(7)), 1.0)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.9])
def test_sibuya_pmf(alpha):
    k = sibuya(alpha, 200_000, make_rng(8))
    # p(1) = alpha, p(2) = alpha (1 - alpha) / 2
    assert np.mean(k == 1) == pytest.approx(alpha, abs=0.005)
    assert np.mean(k == 2) == pytest.approx(alpha * (1 - alpha) / 2, abs=0.005)
    assert np.max(np.abs(mc_laplace(k) - (1 - (1 - np.exp(-LT_GRID)) ** alpha))) < 0.01


# --- inner frailties ------------------------------------------------------------------

INNER_CASES = [
    ("gumbel", 1.0, 2.0, 1.0),
    ("gumbel", 1.5, 3.0, 2.3),
    ("clayton", 1.0, 2.0, 1.0),
    ("clayton", 0.5, 3.0, 0.2),
    ("clayton", 1.0, 2.0, 4.5),
    ("frank", 2.0, 6.0, 1.0),
    ("frank", 2.0, 6.0, 3.0),
    ("joe", 1.5, 4.0, 1.0),
    ("joe", 1.5, 4.0, 2.0),
    ("amh", 0.3, 0.8, 1.0),
    ("amh", 0.3, 0.8, 3.0),
]


@pytest.mark.parametrize("family,th0,th1,v0", INNER_CASES)
def test_inner_frailty_laplace(family, th0, th1, v0):
    outer, inner = Generator(family, th0), Generator(family, th1)
    v = sample_inner_frailty(outer, inner, np.full(100_000, v0), rng_for(9, family, int(10 * v0)))
    expected = np.exp(-v0 * psi_inv(outer, psi(inner, LT_GRID)))
    assert np.max(np.abs(mc_laplace(v) - expected)) < 0.01


def test_gumbel_inner_against_stable_law():
    v = sample_inner_frailty(Generator("gumbel", 1.0), Generator("gumbel", 2.0), np.ones(100_000), make_rng(10))
    assert np.max(np.abs(mc_laplace(v) - np.exp(-np.sqrt(LT_GRID)))) < 0.01


def test_clayton_inner_closed_form():
    v = sample_inner_frailty(Generator("clayton", 1.0), Generator("clayton", 2.0), np.ones(100_000), make_rng(11))
    assert np.max(np.abs(mc_laplace(v) - np.exp(-(np.sqrt(1 + LT_GRID) - 1)))) < 0.01


def test_gumbel_inner_near_equal_parameters():
    v = sample_inner_frailty(
        Generator("gumbel", 2.0 * (1 - 1e-9)), Generator("gumbel", 2.0), np.full(1000, 1.7), make_rng(12)
    )
    np.testing.assert_allclose(v, 1.7, rtol=1e-6)


def test_inner_frailty_requires_nesting():
    with pytest.raises(NestingError):
        sample_inner_frailty(Generator("clayton", 3.0), Generator("clayton", 1.0), np.ones(3), make_rng(0))
    with pytest.raises(NestingError):
        sample_inner_frailty(Generator("clayton", 1.0), Generator("gumbel", 3.0), np.ones(3), make_rng(0))


# --- Archimedean samples ---------------------------------------------------------------


@pytest.mark.parametrize("family,theta", [("clayton", 2.0), ("gumbel", 2.0), ("gumbel", 1.0)])
def test_archimedean_tau(family, theta):
    g = Generator(family, theta)
    u = sample_archimedean(g, 2, 100_000, rng_for(13, family))
    t = g.tau
    assert abs(empirical_tau(u[:, 0], u[:, 1]) - t) < 3 * tau_se(t, 100_000)


@pytest.mark.parametrize(
    "family,theta", [("clayton", 2.0), ("gumbel", 2.0), ("frank", 5.0), ("joe", 3.0), ("amh", 0.7)]
)
def test_archimedean_kendall_cdf(family, theta):
    g = Generator(family, theta)
    u = sample_archimedean(g, 2, 100_000, rng_for(14, family))
    w = pair_pseudo_obs(u[:, 0], u[:, 1]).w
    assert kolmogorov_to_cdf(w, kendall_cdf_oracle(g)) < 0.02


def test_archimedean_range():
    for fam, th in [("clayton", 20.0), ("gumbel", 15.0), ("joe", 20.0), ("frank", 30.0), ("amh", 0.99)]:
        u = sample_archimedean(Generator(fam, th), 4, 10_000, make_rng(15))
        assert np.all((u > 0) & (u < 1))


def test_archimedean_arguments():
    with pytest.raises(ValueError):
        sample_archimedean(Generator("clayton", 1.0), 1, 10, make_rng(0))


# --- nested models ---------------------------------------------------------------------


def nested3_model(family="clayton"):
    t = parse_tree(NESTED3)
    return NacModel.from_taus(t, family, {t.root: 0.2, frozenset({"U2", "U3"}): 0.8})


def test_nac_pairwise_tau():
    n = 100_000
    u = sample_nac(nested3_model(), n, make_rng(16))
    for (i, j), t in {(0, 1): 0.2, (0, 2): 0.2, (1, 2): 0.8}.items():
        assert abs(empirical_tau(u[:, i], u[:, j]) - t) < 3 * tau_se(t, n)


def test_nac_marginal_uniformity():
    u = sample_nac(nested3_model(), 100_000, make_rng(17))
    for j in range(3):
        assert kolmogorov_to_cdf(u[:, j], lambda v: v) < 0.01


@pytest.mark.parametrize("family", ["clayton", "gumbel", "frank", "joe"])
def test_nac_bivariate_margins(family):
    t = parse_tree(TWO_PAIRS)
    model = NacModel.from_taus(
        t, family, {t.root: 0.25, frozenset({"U1", "U2"}): 0.5, frozenset({"U3", "U4"}): 0.7}
    )
    u = sample_nac(model, 100_000, rng_for(18, family))
    for i, j in itertools.combinations(range(4), 2):
        node = lca(t, {t.leaves[i], t.leaves[j]})
        w = pair_pseudo_obs(u[:, i], u[:, j]).w
        assert kolmogorov_to_cdf(w, kendall_cdf_oracle(model.generators[node])) < 0.02


def test_nac_amh():
    t = parse_tree(NESTED3)
    model = NacModel.from_taus(t, "amh", {t.root: 0.1, frozenset({"U2", "U3"}): 0.3})
    u = sample_nac(model, 50_000, make_rng(19))
    assert abs(empirical_tau(u[:, 1], u[:, 2]) - 0.3) < 3 * tau_se(0.3, 50_000)


def test_fan_matches_archimedean():
    g = Generator("clayton", 2.0)
    f = fan(["U1", "U2", "U3", "U4"])
    model = NacModel(f, {f.root: g})
    a = sample_nac(model, 500, make_rng(20))
    b = sample_archimedean(g, 4, 500, make_rng(20))
    assert np.array_equal(a, b)


def test_nac_deterministic():
    m = nested3_model("gumbel")
    assert np.array_equal(sample_nac(m, 1000, make_rng(21)), sample_nac(m, 1000, make_rng(21)))
    assert not np.array_equal(sample_nac(m, 1000, make_rng(21)), sample_nac(m, 1000, make_rng(22)))


def test_exchangeability_within_node():
    t = parse_tree("(U1,(U2,U3,U4))")
    model = NacModel.from_taus(t, "clayton", {t.root: 0.2, frozenset({"U2", "U3", "U4"}): 0.6})
    n = 50_000
    u = sample_nac(model, n, make_rng(23))
    taus = [empirical_tau(u[:, i], u[:, j]) for i, j in [(1, 2), (1, 3), (2, 3)]]
    assert max(taus) - min(taus) < 6 * tau_se(0.6, n)


def test_model_validation():
    t = parse_tree(NESTED3)
    with pytest.raises(ValueError):
        NacModel.from_taus(t, "clayton", {t.root: 0.2})  # inner node missing
    with pytest.raises(NestingError):
        NacModel.from_taus(t, "clayton", {t.root: 0.8, frozenset({"U2", "U3"}): 0.2})
    with pytest.raises(NestingError):
        NacModel(t, {t.root: Generator("clayton", 1.0), frozenset({"U2", "U3"}): Generator("gumbel", 3.0)})


def test_model_json_round_trip():
    m = nested3_model()
    back = NacModel.from_dict(m.to_dict())
    assert back.tree == m.tree
    for node, g in m.generators.items():
        assert back.generators[node].family == g.family
        assert back.generators[node].theta == pytest.approx(g.theta, rel=1e-15)


def test_model_from_text_keyed_dict():
    m = NacModel.from_dict(
        {
            "tree": NESTED3,
            "family": "clayton",
            "generators": {NESTED3: {"tau": 0.2}, "(U2,U3)": {"theta": 3.0}},
        }
    )
    assert m.generators[frozenset({"U2", "U3"})].theta == 3.0
    assert m.generators[m.tree.root].theta == pytest.approx(0.5)
