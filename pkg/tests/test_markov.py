import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import null_space

from hidden_sir import (ChainSpec, FixedNoise, NoiseBundle, ReducibleChain, TimeGrid, observation_path,
                        simulate_ctmc, stationary_distribution)


@st.composite
def generators(draw, n_min=2, n_max=5):
    n = draw(st.integers(n_min, n_max))
    rates = draw(st.lists(st.floats(0.01, 10.0), min_size=n * n, max_size=n * n))
    q = np.array(rates).reshape(n, n)
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    return ChainSpec(np.linspace(0, 1, n), q)


def test_two_state_examples():
    assert np.allclose(stationary_distribution(ChainSpec.two_state(5, 25)), [5 / 6, 1 / 6], atol=1e-15)
    assert np.allclose(stationary_distribution(ChainSpec.two_state(10, 1)), [1 / 11, 10 / 11], atol=1e-15)


def test_symmetric_three_state():
    q = np.ones((3, 3)) - 3 * np.eye(3)
    assert np.allclose(stationary_distribution(ChainSpec([0, 0.5, 1], q)), 1 / 3, atol=1e-15)


@given(generators())
def test_stationary_matches_null_space(spec):
    mu = stationary_distribution(spec)
    ref = null_space(spec.generator.T)[:, 0]
    ref = ref / ref.sum()
    assert np.abs(mu @ spec.generator).max() < 1e-12
    assert np.all(mu > 0) and mu.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(mu, ref, atol=1e-12)


def test_reducible_chains_rejected():
    with pytest.raises(ReducibleChain):
        stationary_distribution(ChainSpec([0, 1], np.zeros((2, 2))))
    one_way = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [0.0, 0.0, 0.0]])
    spec = ChainSpec([0, 0.5, 1], one_way)
    assert not spec.is_irreducible()
    with pytest.raises(ReducibleChain):
        simulate_ctmc(spec, 0, TimeGrid(0.0, 0.1, 10), 0)


@pytest.mark.parametrize("states,q", [
    ([0, 1], [[-1, 2], [1, -1]]),          # row does not sum to zero
    ([0, 1], [[1, -1], [1, -1]]),          # negative off-diagonal
    ([1, 0], [[-1, 1], [1, -1]]),          # not increasing
    ([0, 1.5], [[-1, 1], [1, -1]]),        # outside [0, 1]
    ([0, 1], [[-1, 1, 0], [1, -1, 0]]),    # wrong shape
])
def test_spec_validation(states, q):
    with pytest.raises(ValueError):
        ChainSpec(states, np.array(q, dtype=float))


def test_path_is_deterministic_and_piecewise_constant():
    spec = ChainSpec.two_state(5, 25)
    g = TimeGrid.from_horizon(10.0, 1e-3)
    a, b = simulate_ctmc(spec, 1, g, 3), simulate_ctmc(spec, 1, g, 3)
    assert np.array_equal(a.jump_times, b.jump_times) and np.array_equal(a.indices, b.indices)
    assert a.jump_times[0] == 0.0 and a.indices[0] == 1
    assert np.all(np.diff(a.jump_times) > 0)
    assert np.all(a.indices[1:] != a.indices[:-1])
    vals = a.on_grid(g)
    assert set(np.unique(vals)) <= {0, 1}
    # left-endpoint sampling: value at a jump time is the new state
    t = a.jump_times[3]
    assert a.index_at(t) == a.indices[3] and a.index_at(np.nextafter(t, 0)) == a.indices[2]


@pytest.mark.parametrize("q1,q2", [(5.0, 25.0), (10.0, 1.0)])
def test_occupation_matches_stationary_law(q1, q2):
    spec = ChainSpec.two_state(q1, q2)
    path = simulate_ctmc(spec, 0, TimeGrid.from_horizon(1e4, 1.0), 11)
    occ = path.occupation(2)
    mu = stationary_distribution(spec)
    assert np.abs(occ - mu).max() < 0.01
    # binomial-style 3 sigma with the chain's correlation time 1/(q1+q2)
    n_eff = 1e4 * (q1 + q2) / 2
    assert abs(occ[0] - mu[0]) < 3 * math.sqrt(mu[0] * mu[1] / n_eff)


def test_holding_times_are_exponential():
    spec = ChainSpec.two_state(5, 25)
    path = simulate_ctmc(spec, 0, TimeGrid.from_horizon(2000.0, 1.0), 4)
    hold = np.diff(path.jump_times)
    from0 = hold[path.indices[:-1] == 0]
    assert from0.mean() == pytest.approx(1 / 5, rel=0.03)
    assert np.median(from0) == pytest.approx(math.log(2) / 5, rel=0.05)


def test_three_state_jump_distribution():
    q = np.array([[-3.0, 1.0, 2.0], [1.0, -1.0, 0.0], [1.0, 1.0, -2.0]])
    spec = ChainSpec([0, 0.5, 1], q)
    path = simulate_ctmc(spec, 0, TimeGrid.from_horizon(5000.0, 1.0), 8)
    i, k = path.indices[:-1], path.indices[1:]
    to2 = np.mean(k[i == 0] == 2)
    n0 = np.count_nonzero(i == 0)
    assert abs(to2 - 2 / 3) < 4 * math.sqrt(2 / 9 / n0)


def test_observation_examples():
    g = TimeGrid(0.0, 0.01, 500)
    nb = NoiseBundle(1, 1, g)
    zero_map = ChainSpec.two_state(1.0, 1.0, obs_map=(0.0, 0.0))
    path = simulate_ctmc(zero_map, 0, g, 1)
    assert np.array_equal(observation_path(path, zero_map, g, nb, channel=0), nb.increments[0])

    frozen = ChainSpec([0.3], [[0.0]], obs_map=[1.0])
    const = simulate_ctmc(frozen, 0, g, 0)
    dy = observation_path(const, frozen, g, FixedNoise(np.zeros((1, 500)), g), channel=0)
    assert dy.sum() == pytest.approx(g.t_end, abs=1e-12)


def test_observation_noise_variance():
    spec = ChainSpec.two_state(5, 25)
    g = TimeGrid.from_horizon(1.0, 0.01)
    resid = []
    for s in range(10_000):
        nb = NoiseBundle(s, 1, g)
        path = simulate_ctmc(spec, 0, g, s)
        dy = observation_path(path, spec, g, nb, channel=0)
        drift = spec.obs_map[path.on_grid(g)[:-1]].sum() * g.dt
        resid.append(dy.sum() - drift)
    assert np.var(resid) == pytest.approx(g.t_end, rel=0.02)


def test_observation_ergodic_mean():
    spec = ChainSpec.two_state(5, 25)
    g = TimeGrid.from_horizon(50.0, 0.01)
    ratios = []
    for s in range(200):
        nb = NoiseBundle(s, 1, g)
        path = simulate_ctmc(spec, int(s % 2), g, s)
        ratios.append(observation_path(path, spec, g, nb, channel=0).sum() / g.t_end)
    ratios = np.array(ratios)
    se = ratios.std(ddof=1) / math.sqrt(ratios.size)
    assert abs(ratios.mean() - 1 / 6) < 3 * se
