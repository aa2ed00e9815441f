import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hidden_sir import (ChainSpec, EpidemicParams, IncidenceModel, NoiseBundle, OutOfDomain, RateLaw,
                        TimeGrid, check_incidence, incidence_eval, make_boundary_system, make_filtered_system,
                        make_hidden_system, make_predicted_system, simulate_ctmc, simulate_ensemble)

EX1_MODEL = IncidenceModel.example({0.0: 0.1, 1.0: 4.0}, 0.1)
P1 = EpidemicParams(0.5, 1.0, 2.0, 1.0, 0.5)
EX1 = ChainSpec.two_state(5.0, 25.0)

laws = st.sampled_from([
    RateLaw("bilinear", beta={0.0: 0.1, 1.0: 4.0}),
    RateLaw("holling2", beta=2.0, m1=0.5),
    RateLaw("beddington_deangelis", beta={0.0: 0.3, 1.0: 1.5}, m1=0.7, m2=2.0),
    RateLaw("zero"),
])
models = st.builds(IncidenceModel, laws, laws)
params = st.builds(EpidemicParams, st.floats(0.01, 20), st.floats(0.01, 5), st.floats(0.01, 5),
                   st.floats(0.05, 2), st.floats(0.05, 2))


# -- params and rates ------------------------------------------------------------

def test_derived_coefficients():
    assert (P1.c1, P1.c2) == (1.5, 2.125)


@pytest.mark.parametrize("kw", [dict(a1=0), dict(b1=-1), dict(b2=0), dict(sigma1=0), dict(sigma2=0)])
def test_params_validation(kw):
    base = dict(a1=0.5, b1=1.0, b2=2.0, sigma1=1.0, sigma2=0.5)
    with pytest.raises(ValueError):
        EpidemicParams(**{**base, **kw})


def test_incidence_examples():
    assert incidence_eval(EX1_MODEL, 1.0, 0.5, 3.0)[0] == 2.0
    assert incidence_eval(EX1_MODEL, 1.0, 1.0, 0.0)[1] == pytest.approx(0.05, abs=1e-16)
    for law in ("bilinear", "holling2", "beddington_deangelis"):
        m = IncidenceModel(RateLaw(law, beta=1.3, m1=0.4, m2=0.2), RateLaw(law, beta=0.7, m1=1.0, m2=1.0))
        assert incidence_eval(m, 0.4, 0.0, 2.0) == (0.0, 0.0)


def test_holling_and_bd_forms():
    hol = RateLaw("holling2", beta=2.0, m1=0.5)
    assert hol(0.3, 1.5, 9.0) == pytest.approx(2.0 * 1.5 / 2.0)
    bd = RateLaw("beddington_deangelis", beta=2.0, m1=0.5, m2=0.25)
    assert bd(0.3, 2.0, 4.0) == pytest.approx(4.0 / 3.0)


def test_table_interpolates_between_states():
    law = RateLaw("bilinear", beta={0.0: 0.1, 1.0: 4.0})
    assert law(0.5, 1.0, 0.0) == pytest.approx(2.05)


def test_incidence_domain_checks():
    with pytest.raises(OutOfDomain):
        incidence_eval(EX1_MODEL, 0.5, -1.0, 0.0)
    with pytest.raises(OutOfDomain):
        incidence_eval(EX1_MODEL, 1.5, 1.0, 0.0)


@pytest.mark.parametrize("bad", [dict(kind="holling2", beta=1.0, m1=0.0), dict(kind="bilinear", beta=-1.0),
                                 dict(kind="nope"), dict(kind="custom")])
def test_rate_validation(bad):
    with pytest.raises(ValueError):
        RateLaw(**bad)


def test_assumption_sampler_flags():
    flags = check_incidence(EX1_MODEL)
    assert flags["f_zero_at_s0"] and flags["h_zero_at_s0"]
    assert flags["f_nonnegative"] and flags["h_monotone_in_s"]
    # L1 metric: constant is the largest partial, |df/dx| = 3.9 s <= 39 on the box
    assert 4.0 < flags["f_lipschitz"] <= 39.0 + 1e-4
    bad = IncidenceModel.custom(lambda x, s, i: 1.0 + 0 * s, lambda x, s, i: -s)
    flags = check_incidence(bad)
    assert not flags["f_zero_at_s0"] and not flags["h_nonnegative"] and not flags["h_monotone_in_s"]


# -- drifts by hand -----------------------------------------------------------------

def _const_chain(index, grid):
    return [simulate_ctmc(ChainSpec.two_state(1e-12, 1e-12), index, grid, 0)]


def test_hidden_drift_example():
    g = TimeGrid(0.0, 1e-3, 10)
    sysh = make_hidden_system(P1, EX1_MODEL, EX1, _const_chain(1, g), g)
    d = sysh.drift(0.0, np.array([[0.5, 0.1]]))[0]
    assert d[1] == pytest.approx(0.003125, abs=1e-15)


def test_predicted_drift_example():
    d = make_predicted_system(P1, EX1_MODEL, 0.0).drift(0.0, np.array([[0.5, 0.1]]))[0]
    assert d[1] == pytest.approx(-0.195, abs=1e-15)


def test_filtered_averaged_incidence_example():
    sysf = make_filtered_system(P1, EX1_MODEL, EX1)
    x = np.array([[0.5, 0.1, 5 / 6, 1 / 6]])
    d = sysf.drift(0.0, x)[0]
    h_avg = (1 / 6) * 0.1 * 0.5 / 1.6
    inc = 0.1 * (0.375 + h_avg)
    assert d[1] == pytest.approx(-0.2 + inc, abs=1e-15)
    assert d[0] == pytest.approx(0.5 - 0.5 - inc, abs=1e-15)


def _identity_gap(drift, x, p):
    s, i = x[:, 0], x[:, 1]
    target = p.a1 - p.b1 * s - p.b2 * i
    scale = p.a1 + p.b1 * s + p.b2 * i + 2 * np.abs(drift[:, 1] + p.b2 * i)
    return np.abs(drift[:, 0] + drift[:, 1] - target) / scale


@given(params, models, st.integers(0, 2 ** 32 - 1))
def test_incidence_cancels_in_total_drift(p, model, seed):
    rng = np.random.default_rng(seed)
    x = rng.random((200, 2)) * 10
    g = TimeGrid(0.0, 1e-3, 10)
    chains = [simulate_ctmc(EX1, int(k), g, int(k)) for k in rng.integers(0, 2, 200)]
    e = rng.dirichlet([1, 1], 200)
    systems = [(make_hidden_system(p, model, EX1, chains, g), x),
               (make_predicted_system(p, model, rng.random()), x),
               (make_filtered_system(p, model, EX1), np.hstack([x, e]))]
    for sysx, state in systems:
        assert _identity_gap(sysx.drift(0.0, state), x, p).max() <= 4 * np.finfo(float).eps


def test_diffusion_is_diagonal_in_s_and_i():
    x = np.array([[2.0, 3.0]])
    g = make_predicted_system(P1, EX1_MODEL, 1.0).diffusion(0.0, x)
    assert np.array_equal(g, [[1.0 * 2.0, 0.5 * 3.0]])


# -- absorption and reductions ----------------------------------------------------------

def _ensemble(system_fn, init, seeds, horizon=5.0):
    g = TimeGrid.from_horizon(horizon, 1e-3)
    chains = [simulate_ctmc(EX1, 0, g, s) for s in seeds]
    sysx = system_fn(g, chains)
    return g, simulate_ensemble(sysx, init, g, [NoiseBundle(s, 3, g) for s in seeds])


@pytest.mark.parametrize("which", ["hidden", "filtered", "predicted"])
def test_zero_infected_is_absorbing(which):
    build = {
        "hidden": (lambda g, c: make_hidden_system(P1, EX1_MODEL, EX1, c, g), [0.5, 0.0]),
        "filtered": (lambda g, c: make_filtered_system(P1, EX1_MODEL, EX1, "observation", c, g),
                     [0.5, 0.0, 1.0, 0.0]),
        "predicted": (lambda g, c: make_predicted_system(P1, EX1_MODEL, 1.0), [0.5, 0.0]),
    }[which]
    _, path = _ensemble(build[0], build[1], range(3))
    assert np.all(path.component("I") == 0.0)


def test_hidden_with_no_infected_is_the_boundary_equation():
    _, hidden = _ensemble(lambda g, c: make_hidden_system(P1, EX1_MODEL, EX1, c, g), [0.7, 0.0], [5])
    g = TimeGrid.from_horizon(5.0, 1e-3)
    phi = simulate_ensemble(make_boundary_system(P1), [0.7], g, [NoiseBundle(5, 1, g)])
    assert np.array_equal(hidden.component("S"), phi.component("phi"))


def test_frozen_filter_reduces_to_predicted():
    frozen = ChainSpec([0.0, 1.0], np.zeros((2, 2)), obs_map=[0.4, 0.4])
    g = TimeGrid.from_horizon(3.0, 1e-3)
    nb = [NoiseBundle(2, 3, g)]
    f = simulate_ensemble(make_filtered_system(P1, EX1_MODEL, frozen), [0.5, 0.1, 0.0, 1.0], g, nb)
    p = simulate_ensemble(make_predicted_system(P1, EX1_MODEL, 1.0), [0.5, 0.1], g, nb)
    assert np.allclose(f.states[:, :, :2], p.states, rtol=1e-13, atol=0)
    assert np.array_equal(f.states[:, 0, 2:], np.tile([0.0, 1.0], (g.n_steps + 1, 1)))


def test_predicted_at_zero_drops_h():
    sysp = make_predicted_system(P1, EX1_MODEL, 0.0)
    bil = make_predicted_system(P1, IncidenceModel(RateLaw("bilinear", beta={0.0: 0.1, 1.0: 4.0})), 0.0)
    x = np.random.default_rng(0).random((50, 2)) * 3
    assert np.array_equal(sysp.drift(0, x), bil.drift(0, x))


def test_predicted_rejects_bad_guess():
    with pytest.raises(ValueError):
        make_predicted_system(P1, EX1_MODEL, 1.5)


def test_boundary_examples():
    still = EpidemicParams(0.5, 1.0, 2.0, 0.0, 0.5, allow_zero_noise=True)
    g = TimeGrid.from_horizon(2.0, 1e-3)
    p = simulate_ensemble(make_boundary_system(still), [0.5], g, [NoiseBundle(0, 1, g)])
    assert np.all(p.states == 0.5)
    g1 = TimeGrid(0.0, 1e-3, 1)
    p = simulate_ensemble(make_boundary_system(P1), [0.0], g1, [NoiseBundle(0, 1, g1)])
    assert p.states[-1, 0, 0] == pytest.approx(0.5e-3, abs=1e-18)


@given(st.floats(0.0, 1.0), st.floats(0.0, 0.9), st.integers(0, 1000))
def test_boundary_comparison(extra_a1, less_b1, seed):
    g = TimeGrid.from_horizon(3.0, 1e-3)
    low = EpidemicParams(0.5, 1.0, 2.0, 1.0, 0.5)
    high = EpidemicParams(0.5 + extra_a1, 1.0 - less_b1, 2.0, 1.0, 0.5)
    nb = [NoiseBundle(seed, 1, g)]
    a = simulate_ensemble(make_boundary_system(low), [0.5], g, nb).states
    b = simulate_ensemble(make_boundary_system(high), [0.5], g, nb).states
    assert np.all(b >= a)


def test_clamps_are_rare_while_infection_persists():
    p2 = EpidemicParams(10.0, 1.0, 3.0, 1.0, 1.0)
    m2 = IncidenceModel.example({0.0: 0.1, 1.0: 2.0}, 0.1)
    spec2 = ChainSpec.two_state(10.0, 1.0)
    g = TimeGrid.from_horizon(50.0, 1e-3)
    seeds = range(10)
    chains = [simulate_ctmc(spec2, 1, g, s) for s in seeds]
    path = simulate_ensemble(make_hidden_system(p2, m2, spec2, chains, g, floor=1e-300), [10.0, 0.1], g,
                             [NoiseBundle(s, 3, g) for s in seeds], record_every=100)
    assert path.clamp_counts.sum() < 1e-3 * g.n_steps * len(seeds)
