import numpy as np
import pytest
from scipy import stats
from scipy.special import expit

from monoord.simulate import (
    SEMI_BETA,
    SEMI_RANGE,
    ScenarioSpec,
    TruthOracle,
    make_scenario,
    make_selection_scenario,
    truth_probs,
)


def grid_101():
    g = np.linspace(0, 1, 101)
    a, b = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


@pytest.mark.parametrize("family", ["linear", "continuous", "discontinuous"])
@pytest.mark.parametrize("mode", ["nonparametric", "semiparametric"])
def test_oracle_monotone_and_ordered_on_grid(family, mode):
    oracle = TruthOracle(family, mode)
    X = grid_101()
    S = oracle.survival(X)
    # level ordering at every node
    assert np.all(np.diff(S, axis=1) <= 1e-12)
    assert np.all(S[:, 0] == 1.0)
    # monotone along both axes of the 101x101 grid
    cube = S.reshape(101, 101, -1)
    assert np.all(np.diff(cube, axis=0) >= -1e-12)
    assert np.all(np.diff(cube, axis=1) >= -1e-12)


@pytest.mark.parametrize("family", ["linear", "continuous", "discontinuous"])
def test_truth_probs_sum_to_one(family):
    oracle = TruthOracle(family, "nonparametric")
    rng = np.random.default_rng(0)
    X = rng.random((500, 2))
    probs = oracle.category_probs(X)
    assert np.all(probs >= -1e-15)
    assert np.max(np.abs(probs.sum(axis=1) - 1.0)) < 1e-15


def test_truth_probs_match_survival_differences():
    # category probabilities equal the finite differences of adjacent
    # survival levels computed independently
    oracle = TruthOracle("continuous", "semiparametric")
    rng = np.random.default_rng(1)
    X = rng.random((200, 2))
    Z = rng.standard_normal((200, 3))
    probs = oracle.category_probs(X, Z)
    S = oracle.survival(X, Z)
    S_ext = np.hstack([S, np.zeros((200, 1))])
    assert np.allclose(probs, S_ext[:, :-1] - S_ext[:, 1:], atol=1e-15)


def test_semiparametric_zero_z_matches_scaled_shape():
    oracle = TruthOracle("linear", "semiparametric")
    shape = TruthOracle("linear", "nonparametric")
    rng = np.random.default_rng(2)
    X = rng.random((100, 2))
    lo, hi = SEMI_RANGE
    expected = expit(lo + (hi - lo) * shape.survival(X)[:, 1:])
    got = oracle.survival(X, np.zeros((100, 3)))[:, 1:]
    assert np.allclose(got, expected, atol=1e-14)


def test_linear_nonparametric_categories_roughly_equal():
    ds, _ = make_scenario(ScenarioSpec(family="linear", n=50_000, seed=5))
    freq = np.bincount(ds.y, minlength=6)[1:] / ds.n
    assert np.all(np.abs(freq - 0.2) < 0.02)


def test_continuous_nonparametric_category_pattern():
    ds, _ = make_scenario(ScenarioSpec(family="continuous", n=50_000, seed=6))
    freq = np.bincount(ds.y, minlength=6)[1:] / ds.n
    assert freq[0] == max(freq)
    assert freq[4] == sorted(freq)[-2]


def test_discontinuous_top_category_has_most_mass():
    ds, _ = make_scenario(ScenarioSpec(family="discontinuous", n=50_000, seed=7))
    freq = np.bincount(ds.y, minlength=6)[1:] / ds.n
    assert freq[4] == max(freq)


def test_semiparametric_continuous_fractions():
    spec = ScenarioSpec(family="continuous", mode="semiparametric", n=100_000, seed=8)
    ds, _ = make_scenario(spec)
    freq = np.bincount(ds.y, minlength=6)[1:] / ds.n
    assert freq[0] == pytest.approx(0.39, abs=0.02)
    assert freq[4] == pytest.approx(0.27, abs=0.025)


def test_empirical_frequencies_match_oracle_marginals():
    spec = ScenarioSpec(family="discontinuous", n=5000, seed=9)
    ds, oracle = make_scenario(spec)
    expected = oracle.category_probs(ds.X).sum(axis=0)
    observed = np.bincount(ds.y, minlength=6)[1:]
    chi2 = ((observed - expected) ** 2 / expected).sum()
    assert stats.chi2.sf(chi2, df=4) > 0.01


def test_same_seed_is_deterministic():
    spec = ScenarioSpec(family="linear", mode="semiparametric", n=500, seed=10)
    a, _ = make_scenario(spec)
    b, _ = make_scenario(spec)
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.y, b.y)
    assert np.array_equal(a.Z, b.Z)


def test_small_sample_nests_inside_large():
    small, _ = make_scenario(ScenarioSpec(family="continuous", n=1000, seed=11))
    large, _ = make_scenario(ScenarioSpec(family="continuous", n=5000, seed=11))
    assert np.array_equal(small.X, large.X[:1000])
    assert np.array_equal(small.y, large.y[:1000])
    spec = ScenarioSpec(family="continuous", mode="semiparametric", n=1000, seed=11)
    small_semi, _ = make_scenario(spec)
    spec5 = ScenarioSpec(family="continuous", mode="semiparametric", n=5000, seed=11)
    large_semi, _ = make_scenario(spec5)
    assert np.array_equal(small_semi.Z, large_semi.Z[:1000])


def test_truth_probs_single_point():
    oracle = TruthOracle("linear", "nonparametric")
    probs = truth_probs(oracle, (0.0, 0.0))
    # closed form at the origin: S levels are the family intercepts
    s = np.array([1.0, 0.65, 0.35, 0.15, 0.05, 0.0])
    assert np.allclose(probs, s[:-1] - s[1:], atol=1e-15)
    assert probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_selection_scenario_ignores_noise_covariate():
    ds, oracle = make_selection_scenario(n=1000, seed=12)
    assert ds.p == 3
    X = ds.X.copy()
    p0 = oracle.category_probs(X)
    X[:, 2] = 0.0
    assert np.allclose(oracle.category_probs(X), p0)


def test_scenario_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec(family="quadratic")
    with pytest.raises(ValueError):
        ScenarioSpec(family="linear", mode="other")
    with pytest.raises(ValueError):
        ScenarioSpec(family="linear", n=0)
