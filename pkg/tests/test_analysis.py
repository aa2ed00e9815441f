import math

import numpy as np
import pytest

from hidden_sir import (ChainSpec, EpidemicParams, IncidenceModel, InsufficientData, NoiseBundle, RateLaw,
                        SimPath, TimeGrid, Verdict, barycenter_deviation, extinction_verdict,
                        lyapunov_slope, make_predicted_system, moment_check, occupation_histogram,
                        permanence_means, simulate_ensemble)
from hidden_sir.analysis import LyapunovEstimate, histogram_l1, pool_estimates, quarter_means
from hidden_sir.experiments import has_downward_trend


def make_path(times, s, i, clamp=None):
    s = np.asarray(s, dtype=float).reshape(len(times), -1)
    i = np.asarray(i, dtype=float).reshape(len(times), -1)
    n = s.shape[1]
    first = np.full((n, 2), np.nan)
    if clamp is not None:
        first[:, 1] = clamp
    return SimPath(np.asarray(times, dtype=float), np.stack([s, i], axis=-1), ("S", "I"),
                   tuple(range(n)), np.zeros((n, 2), dtype=int), first, (0, 1))


# -- Lyapunov slope ----------------------------------------------------------------

def test_slope_of_deterministic_decay():
    p = EpidemicParams(0.5, 1.0, 2.0, 1.0, 0.0, allow_zero_noise=True)
    none = IncidenceModel(RateLaw("zero"), RateLaw("zero"))
    g = TimeGrid.from_horizon(20.0, 1e-3)
    path = simulate_ensemble(make_predicted_system(p, none, 0.0), [0.5, 1.0], g, [NoiseBundle(0, 3, g)], 10)
    est = lyapunov_slope(path, burn_in=2.0)
    assert est.slope == pytest.approx(math.log1p(-2e-3) / 1e-3, abs=1e-9)
    assert abs(est.slope + 2.0) < 1e-2


def test_slope_of_constant_path():
    t = np.linspace(0, 100, 1001)
    est = lyapunov_slope(make_path(t, np.ones_like(t), np.full_like(t, 0.3)))
    assert est.slope == pytest.approx(0.0, abs=1e-14) and est.stderr == pytest.approx(0.0, abs=1e-12)


def test_slope_stops_at_first_clamp():
    t = np.linspace(0, 100, 1001)
    i = np.exp(-t)
    i[t >= 50] = 1e-300
    est = lyapunov_slope(make_path(t, np.ones_like(t), i, clamp=50.0), burn_in=0.0)
    assert est.slope == pytest.approx(-1.0, rel=1e-10)
    assert est.window[1] < 50.0


def test_slope_of_random_walk_has_honest_error():
    rng = np.random.default_rng(1)
    slopes, errs = [], []
    t = np.linspace(0, 200, 2001)
    for _ in range(200):
        z = -0.5 * t + np.concatenate([[0], np.cumsum(rng.standard_normal(2000) * math.sqrt(0.1))])
        e = lyapunov_slope(make_path(t, np.ones_like(t), np.exp(z)), burn_in=0.0)
        slopes.append(e.slope)
        errs.append(e.stderr)
    # OLS on Brownian motion: sd(slope) = sqrt(6/(5L))
    assert np.std(slopes) == pytest.approx(math.sqrt(6 / (5 * 200)), rel=0.15)
    assert np.mean(errs) == pytest.approx(math.sqrt(6 / (5 * 200)), rel=0.15)


def test_slope_needs_data():
    t = np.linspace(0, 1, 50)
    with pytest.raises(InsufficientData):
        lyapunov_slope(make_path(t, np.ones_like(t), np.ones_like(t)))


def test_pooling():
    ests = [LyapunovEstimate(v, 0.1, (1.0, 10.0 + k), 100) for k, v in enumerate([1.0, 2.0, 3.0])]
    pooled = pool_estimates(ests)
    assert pooled.slope == 2.0 and pooled.stderr == pytest.approx(1 / math.sqrt(3))
    assert pooled.window == (1.0, 12.0)
    with pytest.raises(InsufficientData):
        pool_estimates([])


def test_verdicts():
    est = LyapunovEstimate(-1.7, 0.02, (0, 1))
    assert extinction_verdict(est, -1.745) is Verdict.EXTINCTION
    assert extinction_verdict(est, -1.0) is Verdict.INDETERMINATE
    assert extinction_verdict(LyapunovEstimate(0.01, 0.02, (0, 1)), 14.85, 2.0, 0.01) is Verdict.PERMANENCE
    assert extinction_verdict(LyapunovEstimate(0.01, 0.02, (0, 1)), 14.85, 0.001, 0.01) is Verdict.INDETERMINATE


# -- means and moments ---------------------------------------------------------------

def test_permanence_means():
    t = np.linspace(0, 10, 101)
    s = np.where(t < 1, 100.0, 2.0)
    path = make_path(t, s, np.full_like(t, 0.25))
    assert permanence_means(path) == (2.0, 0.25)
    with pytest.raises(InsufficientData):
        permanence_means(path, burn_in=20.0)


def test_quarter_means_and_trend():
    t = np.linspace(0, 4, 401)
    path = make_path(t, np.ones_like(t), 10 - t)
    q = quarter_means(path)
    assert np.all(np.diff(q) < 0) and has_downward_trend(q)
    assert not has_downward_trend([5.0, 2.0, 2.1, 2.05])
    assert not has_downward_trend([5.0, 2.0, 1.99, 1.98])


def test_moment_bound_on_example1(ex1):
    p, model, _ = ex1
    g = TimeGrid.from_horizon(50.0, 1e-3)
    path = simulate_ensemble(make_predicted_system(p, model, 1.0), [0.5, 0.1], g,
                             [NoiseBundle(s, 3, g) for s in range(200)], record_every=100)
    mb = moment_check(path, 0.5, p)
    assert mb.bounded and np.all(np.isfinite(mb.quarter_estimates))


def test_moment_check_errors(ex1):
    t = np.linspace(0, 10, 101)
    path = make_path(t, np.ones_like(t), np.ones_like(t))
    with pytest.raises(ValueError):
        moment_check(path, 0.0)
    with pytest.raises(ValueError):
        moment_check(path, 3.0, ex1[0])  # limit is 2 min(b) / max(sigma^2) = 2
    with pytest.raises(InsufficientData):
        moment_check(make_path(t[:4], np.ones(4), np.ones(4)), 0.5)


# -- histograms ------------------------------------------------------------------------

def test_histogram_normalised():
    rng = np.random.default_rng(0)
    t = np.arange(500.0)
    path = make_path(t, rng.random((500, 4)) * 3, rng.random((500, 4)))
    h = occupation_histogram(path, (12, 7), burn_in=0.0)
    assert h.mass.sum() == pytest.approx(1.0, abs=1e-12)
    assert len(list(h.rows())) == 84


def test_histogram_constant_path_is_one_cell():
    t = np.arange(100.0)
    h = occupation_histogram(make_path(t, np.full(100, 2.0), np.full(100, 0.5)), (5, 5), burn_in=0.0)
    assert np.count_nonzero(h.mass) == 1


def test_histogram_extinct_paths_fill_the_bottom_row():
    t = np.arange(100.0)
    h = occupation_histogram(make_path(t, np.linspace(0, 1, 100), np.zeros(100)), (4, [0.0, 1e-6, 1.0]),
                             burn_in=0.0)
    assert h.mass[:, 0].sum() == pytest.approx(1.0)


def test_histogram_l1():
    edges = np.array([0.0, 1.0, 2.0])
    assert histogram_l1([0.5, 1.5], edges, [0.5, 0.5]) == 0.0
    assert histogram_l1([0.5, 5.0], edges, [0.5, 0.5]) == pytest.approx(1.0)
    assert histogram_l1([0.5, 5.0], edges, [0.5, 0.0]) == pytest.approx(0.0)


# -- barycenter ---------------------------------------------------------------------------

def test_barycenter_of_stationary_filter():
    spec = ChainSpec.two_state(5.0, 25.0)
    e = np.tile([25 / 30, 5 / 30], (100, 1))
    dev = barycenter_deviation(e, spec, [lambda m: m, lambda m: m * m + 1])
    assert np.all(dev < 1e-15)


def test_barycenter_frozen_filter_needs_its_own_law():
    spec = ChainSpec.two_state(5.0, 25.0)
    e = np.tile([0.3, 0.7], (50, 3, 1))
    assert barycenter_deviation(e, spec, [lambda m: m])[0] == pytest.approx(0.7 - 5 / 30)
    assert barycenter_deviation(e, spec, [lambda m: m], mu=[0.3, 0.7])[0] == pytest.approx(0.0, abs=1e-13)


def test_barycenter_burn_in():
    spec = ChainSpec.two_state(1.0, 1.0)
    e = np.vstack([np.tile([1.0, 0.0], (10, 1)), np.tile([0.5, 0.5], (10, 1))])
    assert barycenter_deviation(e, spec, [lambda m: m], burn_in=10)[0] == 0.0
    with pytest.raises(InsufficientData):
        barycenter_deviation(e, spec, [lambda m: m], burn_in=30)


# -- long-run behaviour ---------------------------------------------------------------------

def test_susceptibles_settle_on_boundary_law_after_extinction():
    from scipy.special import gammainccinv
    from hidden_sir import invgamma_from_params, parse_config
    from hidden_sir.config import override
    from hidden_sir.experiments import run_ensemble

    cfg = override(parse_config("", "example1"), seeds=100, base_seed=500, horizon=60.0)
    path = run_ensemble(cfg, ("hidden",), record_every=50).hidden
    late = path.times >= 30.0
    assert np.all(path.component("I")[late] < 1e-6)
    law = invgamma_from_params(cfg.params)
    edges = np.sort(law.b / gammainccinv(law.a, np.linspace(0, 1, 11)[1:-1]))
    assert histogram_l1(path.component("S")[late], edges, law.bin_probs(edges)) < 0.1


@pytest.mark.parametrize("changes", [{}, {"sigma2": 2.0}, {"a1": 4.0}])
def test_permanence_when_threshold_is_clearly_positive(changes):
    from dataclasses import replace
    from hidden_sir import lambda_discrete, parse_config
    from hidden_sir.config import override
    from hidden_sir.experiments import run_ensemble, summarize

    cfg = override(parse_config("", "example2"), seeds=20, base_seed=600, horizon=100.0)
    cfg = replace(cfg, params=replace(cfg.params, **changes))
    lam = lambda_discrete(cfg.params, cfg.incidence, cfg.chain).lam
    assert lam > 0.5
    row = summarize(run_ensemble(cfg, ("hidden",)).hidden, lam, cfg, "hidden")
    assert row.i_mean_min > cfg.permanence_floor and not row.downward_trend
