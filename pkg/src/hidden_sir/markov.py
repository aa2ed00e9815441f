"""Finite-state continuous-time Markov signal and its noisy observation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ReducibleChain
from .sde import TimeGrid


@dataclass(frozen=True)
class ChainSpec:
    """Hidden signal on values ``states`` with generator ``generator``.

    ``obs_map`` holds ``g(m_k)``; by default ``g`` is the identity.
    """

    states: np.ndarray
    generator: np.ndarray
    obs_map: np.ndarray = None

    def __post_init__(self):
        m = np.asarray(self.states, dtype=float).ravel()
        q = np.asarray(self.generator, dtype=float)
        g = m.copy() if self.obs_map is None else np.asarray(self.obs_map, dtype=float).ravel()
        n = m.size
        if n < 1:
            raise ValueError("chain needs at least one state")
        if q.shape != (n, n):
            raise ValueError(f"generator must be {n}x{n}, got {q.shape}")
        if g.shape != (n,):
            raise ValueError("obs_map must have one entry per state")
        if np.any(m < 0) or np.any(m > 1):
            raise ValueError("state values must lie in [0, 1]")
        if np.any(np.diff(m) <= 0):
            raise ValueError("state values must be strictly increasing")
        off = q - np.diag(np.diag(q))
        if np.any(off < 0):
            raise ValueError("off-diagonal rates must be non-negative")
        if not np.allclose(q.sum(axis=1), 0.0, atol=1e-12 * max(1.0, np.abs(q).max())):
            raise ValueError("generator rows must sum to zero")
        for name, v in (("states", m), ("generator", q), ("obs_map", g)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.states.size

    @classmethod
    def two_state(cls, q1: float, q2: float, states=(0.0, 1.0), obs_map=None) -> "ChainSpec":
        """Chain on two values; leaves the first at rate ``q1``, the second at ``q2``."""
        return cls(np.array(states, dtype=float),
                   np.array([[-q1, q1], [q2, -q2]], dtype=float), obs_map)

    def is_irreducible(self) -> bool:
        adj = (self.generator - np.diag(np.diag(self.generator))) > 0
        n = self.n

        def reach(a):
            seen = np.zeros(n, dtype=bool)
            seen[0] = True
            frontier = [0]
            while frontier:
                i = frontier.pop()
                for k in np.flatnonzero(a[i] & ~seen):
                    seen[k] = True
                    frontier.append(k)
            return seen.all()

        return reach(adj) and reach(adj.T)


def stationary_distribution(spec: ChainSpec) -> np.ndarray:
    """Solve ``mu Q = 0``, ``sum(mu) = 1`` for an irreducible generator."""
    if not spec.is_irreducible():
        raise ReducibleChain("positive-rate graph is not strongly connected")
    n = spec.n
    a = np.vstack([spec.generator.T, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    mu, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    resid = np.abs(mu @ spec.generator).max() / max(1.0, np.abs(spec.generator).max())
    if resid > 1e-12 or np.any(mu <= 0):
        raise ReducibleChain(f"stationary solve failed (residual {resid:.3g})")
    return mu


@dataclass(frozen=True)
class ChainPath:
    """Right-continuous piecewise-constant path: state ``indices[j]`` on
    ``[jump_times[j], jump_times[j+1])``."""

    jump_times: np.ndarray
    indices: np.ndarray
    t_end: float

    def index_at(self, t) -> np.ndarray:
        pos = np.searchsorted(self.jump_times, t, side="right") - 1
        return self.indices[np.clip(pos, 0, None)]

    def on_grid(self, grid: TimeGrid) -> np.ndarray:
        """State index at each grid point (left-endpoint sampling)."""
        return self.index_at(grid.times)

    def values(self, spec: ChainSpec, t) -> np.ndarray:
        return spec.states[self.index_at(t)]

    def occupation(self, n_states: int) -> np.ndarray:
        """Fraction of ``[t0, t_end]`` spent in each state."""
        edges = np.append(self.jump_times, self.t_end)
        dur = np.diff(edges)
        occ = np.bincount(self.indices, weights=dur, minlength=n_states)
        return occ / dur.sum()


def simulate_ctmc(spec: ChainSpec, init_index: int, grid: TimeGrid, seed: int) -> ChainPath:
    """Exact jump-chain simulation over ``[grid.t0, grid.t_end]``.

    Uses the root stream ``default_rng(seed)``; Brownian channels of a
    :class:`NoiseBundle` with the same seed come from spawned children, so
    the two never overlap.
    """
    if not 0 <= init_index < spec.n:
        raise ValueError(f"init_index {init_index} out of range")
    if not spec.is_irreducible():
        raise ReducibleChain("positive-rate graph is not strongly connected")
    rng = np.random.default_rng(seed)
    q = spec.generator
    rates = -np.diag(q)
    jump_probs = np.where(rates[:, None] > 0, (q - np.diag(np.diag(q))) / np.where(rates > 0, rates, 1.0)[:, None], 0.0)
    cum = np.cumsum(jump_probs, axis=1)

    t, i = grid.t0, int(init_index)
    times, idx = [t], [i]
    t_end = grid.t_end
    while rates[i] > 0:
        t += rng.standard_exponential() / rates[i]
        if t > t_end:
            break
        u = rng.random() * cum[i, -1]
        i = int(min(np.searchsorted(cum[i], u, side="right"), spec.n - 1))
        times.append(t)
        idx.append(i)
    return ChainPath(np.asarray(times), np.asarray(idx, dtype=np.int64), t_end)


def observation_path(alpha: ChainPath, spec: ChainSpec, grid: TimeGrid, noise, channel: int = -1) -> np.ndarray:
    """Increments ``dy_k = g(alpha(t_k)) dt + dW_k`` (``y(0) = 0``)."""
    dw = noise.increments[channel][: grid.n_steps]
    g = spec.obs_map[alpha.on_grid(grid)[:-1]]
    return g * grid.dt + dw
