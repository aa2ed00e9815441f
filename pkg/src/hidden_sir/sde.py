"""Fixed-step Euler-Maruyama integration with seeded Brownian noise.

Every system is integrated in batched form: states have shape
``(n_paths, dim)`` and each path owns its own :class:`NoiseBundle`, so a
batch of paths is bitwise identical to running the paths one at a time.

Noise layout (part of the reproducibility contract): a bundle with seed
``s`` and ``c`` channels draws channel ``j`` from
``PCG64(SeedSequence(s).spawn(c)[j])``, standard normals scaled by
``sqrt(dt)``, in time order. Streams are consumed sequentially, so the
block size used while streaming does not affect the values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import NonFiniteState

DEFAULT_DT = 1e-3
DEFAULT_FLOOR = 1e-12
_BLOCK = 4096


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.t0 >= 0:
            raise ValueError(f"t0 must be non-negative, got {self.t0}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @classmethod
    def from_horizon(cls, horizon: float, dt: float = DEFAULT_DT, t0: float = 0.0) -> "TimeGrid":
        return cls(t0, dt, max(1, int(round(horizon / dt))))

    @property
    def times(self) -> np.ndarray:
        # t0 + k*dt per point; never accumulated
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * self.n_steps

    def time(self, k: int) -> float:
        return self.t0 + self.dt * k

    def index(self, t: float) -> int:
        return int(round((t - self.t0) / self.dt))


@dataclass(frozen=True)
class NoiseBundle:
    """Lazily generated Brownian increments for one path."""

    seed: int
    n_channels: int
    grid: TimeGrid

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.n_channels < 1:
            raise ValueError("n_channels must be >= 1")

    def _generators(self):
        children = np.random.SeedSequence(self.seed).spawn(self.n_channels)
        return [np.random.Generator(np.random.PCG64(c)) for c in children]

    def blocks(self, size: int = _BLOCK) -> Iterator[tuple[int, np.ndarray]]:
        """Yield ``(start_step, increments[n_channels, m])`` in time order."""
        gens = self._generators()
        scale = np.sqrt(self.grid.dt)
        for start in range(0, self.grid.n_steps, size):
            m = min(size, self.grid.n_steps - start)
            yield start, np.stack([g.standard_normal(m) * scale for g in gens])

    @property
    def increments(self) -> np.ndarray:
        return np.concatenate([b for _, b in self.blocks()], axis=1)


@dataclass(frozen=True)
class FixedNoise:
    """Explicit increments with the NoiseBundle interface (tests, replays)."""

    values: np.ndarray
    grid: TimeGrid
    seed: int = 0

    @property
    def n_channels(self) -> int:
        return np.atleast_2d(self.values).shape[0]

    def blocks(self, size: int = _BLOCK):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        for start in range(0, self.grid.n_steps, size):
            yield start, v[:, start:start + size]

    @property
    def increments(self) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.values, dtype=float))


def brownian_increments(n_channels: int, grid: TimeGrid, seed: int) -> NoiseBundle:
    return NoiseBundle(int(seed), int(n_channels), grid)


@dataclass(frozen=True)
class SdeSystem:
    """``dx = drift(t, x) dt + diffusion(t, x) dW`` with a post-step projection.

    ``drift`` maps ``(t, x[n_paths, dim])`` to ``[n_paths, dim]``. With a
    ``noise_map`` the diffusion is diagonal-like: it returns ``[n_paths, dim]``
    and component ``d`` is driven by channel ``noise_map[d]``. Without one it
    returns the full ``[n_paths, dim, n_channels]``.

    ``joint``, if given, returns ``(drift, diffusion)`` in one call and is
    used by the integrator in place of the two separate callables.

    Components listed in ``positive`` that land below ``floor`` are raised to
    it before the optional ``constraint`` is applied. An exact zero is left
    alone: for the epidemic systems ``I = 0`` is absorbing and stays so.
    """

    dim: int
    n_channels: int
    drift: Callable
    diffusion: Callable
    noise_map: Optional[tuple] = None
    positive: tuple = ()
    floor: float = DEFAULT_FLOOR
    constraint: Optional[Callable] = None
    names: tuple = ()
    joint: Optional[Callable] = None

    def __post_init__(self):
        if self.noise_map is not None:
            idx = np.asarray(self.noise_map, dtype=int)
            if idx.shape != (self.dim,) or idx.min() < 0 or idx.max() >= self.n_channels:
                raise ValueError("noise_map needs one valid channel per component")
            identity = self.dim == self.n_channels and bool(np.all(idx == np.arange(self.dim)))
            object.__setattr__(self, "_noise_idx", None if identity else idx)
        pos = sorted(self.positive)
        contiguous = bool(pos) and pos == list(range(pos[0], pos[-1] + 1))
        object.__setattr__(self, "_pos", slice(pos[0], pos[-1] + 1) if contiguous else pos)

    def constrain(self, x: np.ndarray) -> np.ndarray:
        x = np.array(x, dtype=float, copy=True)
        squeeze = x.ndim == 1
        x = np.atleast_2d(x)
        if self.positive:
            v = x[:, self._pos]
            x[:, self._pos] = np.where((v < self.floor) & (v != 0.0), self.floor, v)
        if self.constraint is not None:
            x = self.constraint(x)
        return x[0] if squeeze else x

    def coefficients(self, t, x):
        if self.joint is not None:
            return self.joint(t, x)
        return self.drift(t, x), self.diffusion(t, x)

    def apply_noise(self, g, dW):
        if self.noise_map is None:
            return (g * dW[:, None, :]).sum(axis=-1)
        if self._noise_idx is None:
            return g * dW
        return g * dW[:, self._noise_idx]

    def noise_term(self, t, x, dW):
        return self.apply_noise(self.diffusion(t, x), dW)


@dataclass
class SimPath:
    """Recorded trajectory of one or more paths.

    ``states`` has shape ``(n_records, n_paths, dim)``. ``first_clamp`` holds,
    per path and floored component, the time of the first positivity clamp
    (``nan`` if never clamped).
    """

    times: np.ndarray
    states: np.ndarray
    names: tuple
    seeds: tuple
    clamp_counts: np.ndarray
    first_clamp: np.ndarray
    positive: tuple = ()
    extras: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.states.shape[1]

    def component(self, name, path: Optional[int] = None) -> np.ndarray:
        j = self.names.index(name) if isinstance(name, str) else int(name)
        out = self.states[:, :, j]
        return out if path is None else out[:, path]

    def clamp_time(self, name, path: int) -> float:
        j = self.names.index(name) if isinstance(name, str) else int(name)
        if j not in self.positive:
            return float("nan")
        return float(self.first_clamp[path, self.positive.index(j)])

    def path(self, j: int) -> "SimPath":
        extras = {k: v[:, j:j + 1] if np.ndim(v) == 2 else v for k, v in self.extras.items()}
        return SimPath(self.times, self.states[:, j:j + 1], self.names, (self.seeds[j],),
                       self.clamp_counts[j:j + 1], self.first_clamp[j:j + 1],
                       self.positive, extras)


def _advance(system: SdeSystem, x, t, dt, dW):
    drift, g = system.coefficients(t, x)
    raw = x + drift * dt
    raw += system.apply_noise(g, dW)
    low = None
    if system.positive:
        low = raw[:, system._pos] < system.floor
        if low.any():
            block = raw[:, system._pos]
            low &= block != 0.0  # an exact zero is absorbing, not clamped
            raw[:, system._pos] = np.where(low, system.floor, block)
        if not low.any():
            low = None
    if system.constraint is not None:
        raw = system.constraint(raw)
    return raw, low


def euler_maruyama_step(system: SdeSystem, state, t: float, dt: float, dW, step=None) -> np.ndarray:
    """One step: ``constraint(state + drift*dt + sum_c diffusion_c * dW_c)``."""
    x = np.asarray(state, dtype=float)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    new, _ = _advance(system, x, t, dt, dW)
    if not math.isfinite(new.sum()):
        raise NonFiniteState(step if step is not None else 0)
    return new[0] if squeeze else new


def _stacked_blocks(noises, n_channels, size):
    iters = [n.blocks(size) for n in noises]
    for parts in zip(*iters):
        start = parts[0][0]
        for _, b in parts:
            if b.shape[0] < n_channels:
                raise ValueError(f"noise has {b.shape[0]} channels, system needs {n_channels}")
        block = np.stack([b[:n_channels] for _, b in parts])  # (paths, c, m)
        yield start, np.ascontiguousarray(block.transpose(2, 0, 1))


def simulate_ensemble(system: SdeSystem, init, grid: TimeGrid, noises: Sequence,
                      record_every: int = 1) -> SimPath:
    """Integrate independent paths side by side, one noise bundle per path."""
    noises = list(noises)
    n_paths = len(noises)
    x = np.array(np.broadcast_to(np.asarray(init, dtype=float), (n_paths, system.dim)))
    x = system.constrain(x)
    for nz in noises:
        if nz.grid.n_steps < grid.n_steps:
            raise ValueError("noise bundle is shorter than the grid")

    r = max(1, int(record_every))
    rec_steps = list(range(0, grid.n_steps + 1, r))
    if rec_steps[-1] != grid.n_steps:
        rec_steps.append(grid.n_steps)
    records = np.empty((len(rec_steps), n_paths, system.dim))
    records[0] = x
    ri = 1

    n_pos = len(system.positive)
    counts = np.zeros((n_paths, n_pos), dtype=np.int64)
    first = np.full((n_paths, n_pos), -1, dtype=np.int64)

    dt = grid.dt
    for start, block in _stacked_blocks(noises, system.n_channels, _BLOCK):
        for j in range(block.shape[0]):
            k = start + j
            if k >= grid.n_steps:
                break
            x, low = _advance(system, x, grid.t0 + k * dt, dt, block[j])
            if not math.isfinite(x.sum()):
                raise NonFiniteState(k + 1)
            if low is not None:
                counts += low
                first[low & (first < 0)] = k + 1
            if ri < len(rec_steps) and rec_steps[ri] == k + 1:
                records[ri] = x
                ri += 1

    times = grid.t0 + dt * np.asarray(rec_steps, dtype=float)
    first_t = np.where(first >= 0, grid.t0 + dt * first, np.nan)
    names = system.names or tuple(f"x{i}" for i in range(system.dim))
    return SimPath(times, records, names, tuple(int(n.seed) for n in noises),
                   counts, first_t, tuple(system.positive))


def simulate_path(system: SdeSystem, init, grid: TimeGrid, noise, record_every: int = 1) -> SimPath:
    return simulate_ensemble(system, init, grid, [noise], record_every)
