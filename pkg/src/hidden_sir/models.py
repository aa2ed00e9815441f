"""Epidemic SDE systems over a shared incidence-rate family.

State layout: ``(S, I)`` for the hidden, predicted and unhidden systems,
``(S, I, e_1..e_n)`` for the filtered system, ``(phi,)`` for the boundary
equation. Brownian channels are ``(B1, B2, W)`` throughout so hidden and
filtered systems can share one noise bundle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import OutOfDomain
from .filtering import project_simplex, wonham_coefficients
from .markov import ChainPath, ChainSpec
from .sde import DEFAULT_FLOOR, SdeSystem, TimeGrid


@dataclass(frozen=True)
class EpidemicParams:
    a1: float
    b1: float
    b2: float
    sigma1: float
    sigma2: float
    allow_zero_noise: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("a1", "b1", "b2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.allow_zero_noise:
            for name in ("sigma1", "sigma2"):
                if getattr(self, name) == 0:
                    raise ValueError(f"{name} must be non-zero")

    @property
    def c1(self) -> float:
        return self.b1 + self.sigma1 ** 2 / 2

    @property
    def c2(self) -> float:
        return self.b2 + self.sigma2 ** 2 / 2


def _table(value):
    """Scalar or ``{x: value}`` mapping -> interpolation nodes over [0, 1]."""
    if isinstance(value, dict):
        items = sorted((float(k), float(v)) for k, v in value.items())
        xs = np.array([k for k, _ in items])
        vs = np.array([v for _, v in items])
        if xs.size == 0:
            raise ValueError("empty coefficient table")
        if np.any(xs < 0) or np.any(xs > 1):
            raise ValueError("table nodes must lie in [0, 1]")
        return xs, vs
    v = float(value)
    return np.array([0.0, 1.0]), np.array([v, v])


@dataclass(frozen=True)
class RateLaw:
    """``beta(x) s / (d0 + d1 s + d2 i)`` with the denominator set by ``kind``.

    ======================  ======================================
    kind                    rate
    ======================  ======================================
    ``zero``                0
    ``bilinear``            beta s
    ``holling2``            beta s / (m1 + s)
    ``beddington_deangelis`` beta s / (1 + m1 s + m2 i)
    ``custom``              ``func(x, s, i)``
    ======================  ======================================

    ``beta``, ``m1`` and ``m2`` are scalars or per-state tables
    ``{x: value}`` (linearly interpolated between nodes).
    """

    kind: str = "zero"
    beta: object = 0.0
    m1: object = 0.0
    m2: object = 0.0
    func: Optional[Callable] = field(default=None, compare=False)

    KINDS = ("zero", "bilinear", "holling2", "beddington_deangelis", "custom")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown rate kind {self.kind!r}")
        if self.kind == "custom":
            if self.func is None:
                raise ValueError("custom rate needs func")
            return
        beta, m1, m2 = (_table(v)[1] for v in (self.beta, self.m1, self.m2))
        if np.any(beta < 0):
            raise ValueError("beta must be non-negative")
        if self.kind == "holling2" and np.any(m1 <= 0):
            raise ValueError("holling2 needs m1 > 0")
        if self.kind == "beddington_deangelis" and (np.any(m1 < 0) or np.any(m2 < 0)):
            raise ValueError("beddington_deangelis needs m1, m2 >= 0")

    def coefficients(self, x):
        x = np.asarray(x, dtype=float)
        beta, m1, m2 = (np.interp(x, *_table(v)) for v in (self.beta, self.m1, self.m2))
        one, zero = np.ones_like(x), np.zeros_like(x)
        if self.kind == "zero":
            return zero, one, zero, zero
        if self.kind == "bilinear":
            return beta, one, zero, zero
        if self.kind == "holling2":
            return beta, m1, one, zero
        return beta, one, m1, m2

    def __call__(self, x, s, i):
        if self.kind == "custom":
            return self.func(x, s, i)
        beta, d0, d1, d2 = self.coefficients(x)
        return beta * s / (d0 + d1 * s + d2 * i)

    def at_states(self, states) -> Callable:
        """Fast evaluator ``fn(state_index, s, i)`` for rates at chain states."""
        states = np.asarray(states, dtype=float)
        if self.kind == "custom":
            return lambda idx, s, i: self.func(states[idx], s, i)
        beta, d0, d1, d2 = self.coefficients(states)
        if self.kind == "zero":
            return lambda idx, s, i: np.zeros(np.broadcast(s, i).shape)
        if self.kind == "bilinear":
            return lambda idx, s, i: beta[idx] * s
        return lambda idx, s, i: beta[idx] * s / (d0[idx] + d1[idx] * s + d2[idx] * i)

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise TypeError("custom rate laws do not serialise")
        out = {"kind": self.kind}
        for name in ("beta", "m1", "m2"):
            v = getattr(self, name)
            if isinstance(v, dict) or float(v) != 0.0:
                out[name] = {float(k): float(x) for k, x in v.items()} if isinstance(v, dict) else float(v)
        return out


@dataclass(frozen=True)
class IncidenceModel:
    f: RateLaw
    h: RateLaw = RateLaw()

    @classmethod
    def example(cls, m1, m2) -> "IncidenceModel":
        """``f = m1(x) s`` and ``h = m2(x) s / (1 + s + i)``."""
        return cls(RateLaw("bilinear", beta=m1),
                   RateLaw("beddington_deangelis", beta=m2, m1=1.0, m2=1.0))

    @classmethod
    def custom(cls, f: Callable, h: Optional[Callable] = None) -> "IncidenceModel":
        return cls(RateLaw("custom", func=f), RateLaw("custom", func=h) if h else RateLaw())

    def to_dict(self) -> dict:
        return {"f": self.f.to_dict(), "h": self.h.to_dict()}


def incidence_eval(model: IncidenceModel, x, s, i):
    """``(f(x, s, i), h(x, s, i))`` with domain checks."""
    x, s, i = (np.asarray(v, dtype=float) for v in (x, s, i))
    if np.any(x < 0) or np.any(x > 1):
        raise OutOfDomain("x must lie in [0, 1]")
    if np.any(s < 0) or np.any(i < 0):
        raise OutOfDomain("s and i must be non-negative")
    f, h = model.f(x, s, i), model.h(x, s, i)
    if np.ndim(f) == 0 and np.ndim(h) == 0:
        return float(f), float(h)
    return f, h


def check_incidence(model: IncidenceModel, n_samples: int = 2000, box: float = 10.0, seed: int = 0) -> dict:
    """Sample the standing incidence assumptions on ``[0,1] x [0,box]^2``.

    Returns flags for: zero at ``s = 0``, non-negativity, monotonicity of
    ``f(x,.,0)`` and ``h(x,.,0)`` in ``s``, plus a finite-difference Lipschitz
    estimate per function.
    """
    rng = np.random.default_rng(seed)
    x = rng.random(n_samples)
    s = rng.random(n_samples) * box
    i = rng.random(n_samples) * box
    out = {}
    for name, law in (("f", model.f), ("h", model.h)):
        v = law(x, s, i)
        out[f"{name}_zero_at_s0"] = bool(np.all(law(x, 0.0 * s, i) == 0))
        out[f"{name}_nonnegative"] = bool(np.all(v >= 0))
        s_sorted = np.sort(s)
        mono = all(np.all(np.diff(law(np.full_like(s_sorted, xv), s_sorted, 0.0 * s_sorted)) >= -1e-12)
                   for xv in (0.0, 0.5, 1.0))
        out[f"{name}_monotone_in_s"] = bool(mono)
        eps = 1e-6
        d = rng.standard_normal((3, n_samples))
        d /= np.abs(d).sum(axis=0)
        x2 = np.clip(x + eps * d[0], 0, 1)
        s2 = np.abs(s + eps * d[1])
        i2 = np.abs(i + eps * d[2])
        dist = np.abs(x2 - x) + np.abs(s2 - s) + np.abs(i2 - i)
        ratio = np.abs(law(x2, s2, i2) - v) / np.where(dist > 0, dist, 1)
        out[f"{name}_lipschitz"] = float(ratio.max())
    return out


def _sir_joint(params: EpidemicParams, rate: Callable):
    """Drift and diffusion of ``(S, I)`` given the per-capita incidence ``rate(t, x)``."""
    a1, b1, b2 = params.a1, params.b1, params.b2
    sig = np.array([params.sigma1, params.sigma2])

    def joint(t, x):
        s, i = x[:, 0], x[:, 1]
        inc = i * rate(t, x)
        out = np.empty_like(x)
        out[:, 0] = a1 - b1 * s - inc
        out[:, 1] = inc - b2 * i
        return out, x * sig

    return joint


def _split(joint):
    return (lambda t, x: joint(t, x)[0]), (lambda t, x: joint(t, x)[1])


def _alpha_table(chain_paths, grid: TimeGrid, n_states: int) -> np.ndarray:
    if isinstance(chain_paths, ChainPath):
        chain_paths = [chain_paths]
    dtype = np.int8 if n_states < 128 else np.int64
    return np.stack([p.on_grid(grid).astype(dtype) for p in chain_paths], axis=1)


def make_hidden_system(params: EpidemicParams, model: IncidenceModel, spec: ChainSpec,
                       chain_paths, grid: TimeGrid, floor: float = DEFAULT_FLOOR) -> SdeSystem:
    """System driven by the true signal; one chain path per simulated path."""
    table = _alpha_table(chain_paths, grid, spec.n)
    f_at, h_at = model.f.at_states(spec.states), model.h.at_states(spec.states)
    m = spec.states
    t0, dt = grid.t0, grid.dt

    def rate(t, x):
        idx = table[int(round((t - t0) / dt))]
        s, i = x[:, 0], x[:, 1]
        return f_at(idx, s, i) + m[idx] * h_at(idx, s, i)

    joint = _sir_joint(params, rate)
    return SdeSystem(2, 2, *_split(joint), noise_map=(0, 1), positive=(0, 1), floor=floor,
                     names=("S", "I"), joint=joint)


def make_predicted_system(params: EpidemicParams, model: IncidenceModel, m_k0: float,
                          floor: float = DEFAULT_FLOOR) -> SdeSystem:
    """Signal frozen at the guess ``m_k0``."""
    if not 0 <= m_k0 <= 1:
        raise ValueError("m_k0 must lie in [0, 1]")
    f_at, h_at = model.f.at_states([m_k0]), model.h.at_states([m_k0])

    def rate(t, x):
        s, i = x[:, 0], x[:, 1]
        return f_at(0, s, i) + m_k0 * h_at(0, s, i)

    joint = _sir_joint(params, rate)
    return SdeSystem(2, 2, *_split(joint), noise_map=(0, 1), positive=(0, 1), floor=floor,
                     names=("S", "I"), joint=joint)


def _simplex_tail(start: int):
    def constraint(x):
        x[:, start:] = project_simplex(x[:, start:])
        return x
    return constraint


def _signal_obs(spec, chain_paths, grid):
    if chain_paths is None or grid is None:
        raise ValueError("observation-driven filter needs chain_paths and grid")
    table = _alpha_table(chain_paths, grid, spec.n)
    return lambda t: spec.obs_map[table[int(round((t - grid.t0) / grid.dt))]]


def make_filtered_system(params: EpidemicParams, model: IncidenceModel, spec: ChainSpec,
                         driver: str = "innovation", chain_paths=None, grid: Optional[TimeGrid] = None,
                         floor: float = DEFAULT_FLOOR) -> SdeSystem:
    """Incidence averaged over the Wonham weights ``e``; state ``(S, I, e)``.

    ``driver="innovation"``: channel 2 is the innovation Brownian motion.
    ``driver="observation"``: channel 2 is the observation noise ``W`` of a
    co-simulated hidden chain (``chain_paths``), so ``dy = g(alpha) dt + dW``.
    """
    if driver not in ("innovation", "observation"):
        raise ValueError(f"unknown driver {driver!r}")
    n = spec.n
    every = slice(None)
    f_at, h_at = model.f.at_states(spec.states), model.h.at_states(spec.states)
    m, g, q = spec.states, spec.obs_map, spec.generator
    a1, b1, b2 = params.a1, params.b1, params.b2
    sig = np.array([params.sigma1, params.sigma2])
    obs = _signal_obs(spec, chain_paths, grid) if driver == "observation" else None

    def joint(t, x):
        s, i, e = x[:, 0], x[:, 1], x[:, 2:]
        sc, ic = x[:, 0:1], x[:, 1:2]
        inc = i * ((f_at(every, sc, ic) + m * h_at(every, sc, ic)) * e).sum(axis=1)
        gbar = e @ g
        gain = (g - gbar[:, None]) * e
        out = np.empty_like(x)
        out[:, 0] = a1 - b1 * s - inc
        out[:, 1] = inc - b2 * i
        out[:, 2:] = e @ q
        if obs is not None:
            out[:, 2:] += gain * (obs(t) - gbar)[:, None]
        diff = np.empty_like(x)
        diff[:, :2] = x[:, :2] * sig
        diff[:, 2:] = gain
        return out, diff

    names = ("S", "I") + tuple(f"e_{j + 1}" for j in range(n))
    return SdeSystem(2 + n, 3, *_split(joint), noise_map=(0, 1) + (2,) * n,
                     positive=(0, 1), floor=floor, constraint=_simplex_tail(2), names=names,
                     joint=joint)


def make_boundary_system(params: EpidemicParams, floor: float = DEFAULT_FLOOR) -> SdeSystem:
    """``dphi = (a1 - b1 phi) dt + sigma1 phi dB1``."""
    def drift(t, x):
        return params.a1 - params.b1 * x

    def diffusion(t, x):
        return params.sigma1 * x

    return SdeSystem(1, 1, drift, diffusion, noise_map=(0,), positive=(0,), floor=floor, names=("phi",))


def make_wonham_system(spec: ChainSpec, driver: str = "innovation", chain_paths=None,
                       grid: Optional[TimeGrid] = None) -> SdeSystem:
    """The filter on its own, one Brownian channel; for two states ``e_1``
    follows ``de = [q2 - (q1 + q2) e] dt + (g1 - g2) e (1 - e) dWbar``."""
    obs = _signal_obs(spec, chain_paths, grid) if driver == "observation" else None

    def joint(t, x):
        return wonham_coefficients(x, spec, None if obs is None else obs(t))

    return SdeSystem(spec.n, 1, *_split(joint), noise_map=(0,) * spec.n, constraint=project_simplex,
                     names=tuple(f"e_{j + 1}" for j in range(spec.n)), joint=joint)
