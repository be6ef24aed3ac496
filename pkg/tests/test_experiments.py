import numpy as np

from monoord.experiments import (
    nonparametric_model,
    run_fit,
    run_parallel,
    semiparametric_model,
)
from monoord.sampler import SamplerConfig
from monoord.simulate import ScenarioSpec, make_scenario


def test_run_fit_summary_fields():
    ds, oracle = make_scenario(ScenarioSpec(family="linear", n=150, seed=1))
    cfg = SamplerConfig(iterations=1200, burn_in=200, thin=20, seed=2)
    summary = run_fit(ds, oracle, nonparametric_model(), cfg, check_invariants=True)
    assert summary.n_records == 60
    assert summary.n_invalid_records == 0
    assert 0.0 <= summary.mae_overall <= 1.0
    assert summary.mae_by_category.shape == (5,)
    assert summary.inclusion.shape == (2,)
    assert summary.mean_counts.shape == (2,)
    assert summary.mean_origin_survival[0] == 1.0
    assert np.all(np.diff(summary.mean_origin_survival) <= 1e-12)
    assert summary.beta_mean is None


def test_run_fit_semiparametric_interval_fields():
    spec = ScenarioSpec(family="linear", mode="semiparametric", n=150, seed=3)
    ds, oracle = make_scenario(spec)
    cfg = SamplerConfig(iterations=800, burn_in=100, thin=20, seed=4)
    summary = run_fit(ds, oracle, semiparametric_model(), cfg)
    assert summary.beta_mean.shape == (3,)
    assert np.all(summary.beta_lo <= summary.beta_mean)
    assert np.all(summary.beta_mean <= summary.beta_hi)


def test_run_parallel_preserves_order():
    def worker(job):
        return job * job

    assert run_parallel(worker, [3, 1, 2], max_workers=1) == [9, 1, 4]
