"""Statistics of simulated paths: growth rates, means, moments, occupation.

Functions taking a :class:`SimPath` work per path; ensemble summaries pool
the per-path results. Burn-in defaults to 10% of the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientData
from .markov import ChainSpec, stationary_distribution
from .sde import SimPath

BURN_IN_FRACTION = 0.1
MIN_POINTS = 100


def _burn_in(path: SimPath, burn_in: Optional[float]) -> float:
    if burn_in is None:
        return path.times[0] + BURN_IN_FRACTION * (path.times[-1] - path.times[0])
    return burn_in


@dataclass(frozen=True)
class LyapunovEstimate:
    slope: float
    stderr: float
    window: tuple
    n_points: int = 0


def _slope_fit(t, z) -> LyapunovEstimate:
    """OLS slope of ``z`` on ``t`` with a random-walk error model.

    The regression residual of ``ln I`` is Brownian-like, so the residual
    scatter understates the slope uncertainty. Instead the diffusion rate is
    estimated from detrended block increments and converted with
    ``Var(slope) = 6 sigma^2 / (5 L)`` for a window of length ``L``.
    """
    n = t.size
    tc = t - t.mean()
    slope = float(np.dot(tc, z - z.mean()) / np.dot(tc, tc))
    length = float(t[-1] - t[0])
    n_blocks = max(2, min(50, n // 4))
    cuts = np.linspace(0, n - 1, n_blocks + 1).round().astype(int)
    dz = np.diff(z[cuts]) - slope * np.diff(t[cuts])
    tau = np.diff(t[cuts])
    sigma2 = float(np.sum(dz * dz / tau) / (n_blocks - 1))
    return LyapunovEstimate(slope, math.sqrt(6 * sigma2 / (5 * length)), (float(t[0]), float(t[-1])), n)


def lyapunov_slope(path: SimPath, burn_in: Optional[float] = None, component: str = "I",
                   j: int = 0) -> LyapunovEstimate:
    """Fitted growth rate of ``ln I(t)`` over ``[burn_in, T]`` for path ``j``.

    A path that hit the positivity floor is cut at its first clamp time.
    """
    t0 = _burn_in(path, burn_in)
    t = path.times
    x = path.component(component, j)
    t_end = t[-1]
    clamp = path.clamp_time(component, j)
    if not math.isnan(clamp):
        t_end = min(t_end, clamp)
    keep = (t >= t0) & (t < t_end) if not math.isnan(clamp) else (t >= t0)
    keep &= x > 0
    if keep.sum() < MIN_POINTS:
        raise InsufficientData(f"only {int(keep.sum())} usable points after burn-in")
    return _slope_fit(t[keep], np.log(x[keep]))


def pool_estimates(estimates: Sequence[LyapunovEstimate]) -> LyapunovEstimate:
    """Mean slope with the across-path standard error."""
    if len(estimates) == 0:
        raise InsufficientData("no estimates to pool")
    s = np.array([e.slope for e in estimates])
    se = float(s.std(ddof=1) / math.sqrt(s.size)) if s.size > 1 else estimates[0].stderr
    lo = min(e.window[0] for e in estimates)
    hi = max(e.window[1] for e in estimates)
    return LyapunovEstimate(float(s.mean()), se, (lo, hi), sum(e.n_points for e in estimates))


def permanence_means(path: SimPath, burn_in: Optional[float] = None, j: Optional[int] = None):
    """Time averages of ``S`` and ``I`` after burn-in (per path if ``j`` is None)."""
    t0 = _burn_in(path, burn_in)
    keep = path.times >= t0
    if keep.sum() < 2 or t0 >= path.times[-1]:
        raise InsufficientData("path is not longer than the burn-in")
    s = path.component("S")[keep].mean(axis=0)
    i = path.component("I")[keep].mean(axis=0)
    if j is None and path.n_paths == 1:
        j = 0
    return (float(s[j]), float(i[j])) if j is not None else (s, i)


def quarter_means(path: SimPath, name: str = "I") -> np.ndarray:
    """Pooled mean of a component over each quarter of the horizon."""
    t, x = path.times, path.component(name)
    edges = np.linspace(t[0], t[-1], 5)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        keep = (t >= lo) & (t <= hi)
        out.append(x[keep].mean())
    return np.array(out)


@dataclass(frozen=True)
class MomentBound:
    p: float
    quarter_estimates: np.ndarray
    estimate: float
    relative_drift: float
    bounded: bool


def moment_check(paths: SimPath, p: float, params=None, drift_tol: float = 0.1) -> MomentBound:
    """Estimate ``E (S + I)^(1 + p)`` per horizon quarter and check it levels off.

    With ``params`` the exponent is checked against ``2 kappa / sigma*^2``,
    reading ``kappa = min(b1, b2)`` and ``sigma*^2 = max(sigma1^2, sigma2^2)``.
    """
    if paths is None or paths.states.size == 0 or paths.times.size < 8:
        raise InsufficientData("no paths to check")
    if not p > 0:
        raise ValueError("p must be positive")
    if params is not None:
        limit = 2 * min(params.b1, params.b2) / max(params.sigma1 ** 2, params.sigma2 ** 2)
        if p >= limit:
            raise ValueError(f"p must be below {limit:g}")
    t = paths.times
    total = (paths.component("S") + paths.component("I")) ** (1 + p)
    ens = total.mean(axis=1)
    edges = np.linspace(t[0], t[-1], 5)
    q = np.array([ens[(t >= lo) & (t <= hi)].mean() for lo, hi in zip(edges[:-1], edges[1:])])
    drift = abs(q[-1] - q[-2]) / max(abs(q[-2]), 1e-300)
    return MomentBound(p, q, float(q[-1]), float(drift), bool(drift < drift_tol))


@dataclass(frozen=True)
class OccupationHistogram:
    s_edges: np.ndarray
    i_edges: np.ndarray
    density: np.ndarray

    @property
    def mass(self) -> np.ndarray:
        return self.density * np.outer(np.diff(self.s_edges), np.diff(self.i_edges))

    def rows(self):
        """``(S_bin_centre, I_bin_centre, density)`` triples."""
        sc = 0.5 * (self.s_edges[:-1] + self.s_edges[1:])
        ic = 0.5 * (self.i_edges[:-1] + self.i_edges[1:])
        for a, s in enumerate(sc):
            for b, i in enumerate(ic):
                yield float(s), float(i), float(self.density[a, b])


def _edges(values, spec, floor_zero=True):
    if isinstance(spec, (int, np.integer)):
        lo = 0.0 if floor_zero else float(values.min())
        hi = float(values.max())
        if hi <= lo:
            hi = lo + 1.0
        return np.linspace(lo, np.nextafter(hi, np.inf), int(spec) + 1)
    return np.asarray(spec, dtype=float)


def occupation_histogram(paths: SimPath, bins=(40, 40), burn_in: Optional[float] = None) -> OccupationHistogram:
    """Pooled normalised histogram of ``(S, I)`` after burn-in.

    Integer bin counts span ``[0, max]`` so an ``I = 0`` path lands in the
    first ``I`` row; samples outside explicit edges are dropped.
    """
    t0 = _burn_in(paths, burn_in)
    keep = paths.times >= t0
    if keep.sum() == 0 or paths.n_paths == 0:
        raise InsufficientData("no samples after burn-in")
    s = paths.component("S")[keep].ravel()
    i = paths.component("I")[keep].ravel()
    se, ie = _edges(s, bins[0]), _edges(i, bins[1])
    counts, _, _ = np.histogram2d(s, i, bins=[se, ie])
    total = counts.sum()
    if total == 0:
        raise InsufficientData("no samples inside the bin range")
    mass = counts / total
    area = np.outer(np.diff(se), np.diff(ie))
    return OccupationHistogram(se, ie, mass / area)


def histogram_l1(samples, edges, probs) -> float:
    """L1 distance between empirical and exact bin masses.

    Mass outside ``edges`` counts as one extra bin on each side.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    edges = np.asarray(edges, dtype=float)
    probs = np.asarray(probs, dtype=float)
    n = samples.size
    counts, _ = np.histogram(samples, bins=edges)
    emp = counts / n
    below = np.count_nonzero(samples < edges[0]) / n
    above = np.count_nonzero(samples >= edges[-1]) / n
    tail = max(0.0, 1.0 - probs.sum())
    return float(np.abs(emp - probs).sum() + abs(below + above - tail))


class Verdict(str, Enum):
    EXTINCTION = "Extinction"
    PERMANENCE = "Permanence"
    INDETERMINATE = "Indeterminate"


def extinction_verdict(estimate: LyapunovEstimate, lam: float, i_mean: Optional[float] = None,
                       floor: Optional[float] = None, n_sigma: float = 3.0) -> Verdict:
    if estimate.slope < 0 and lam < 0 and abs(estimate.slope - lam) <= n_sigma * estimate.stderr:
        return Verdict.EXTINCTION
    if lam > 0 and i_mean is not None and floor is not None and i_mean > floor:
        return Verdict.PERMANENCE
    return Verdict.INDETERMINATE


def barycenter_deviation(filter_path, spec: ChainSpec, test_fns: Sequence, burn_in: float = 0.0,
                         times=None, mu=None) -> np.ndarray:
    """``|avg_t sum_k l(m_k) e_k(t) - sum_k l(m_k) mu*_k|`` per test function.

    ``filter_path`` is ``(n_times, n)`` or ``(n_times, n_paths, n)``; samples
    are pooled over paths. ``mu`` overrides the stationary law of ``spec``.
    """
    e = np.asarray(filter_path, dtype=float)
    if times is not None:
        e = e[np.asarray(times) >= burn_in]
    elif burn_in:
        e = e[int(burn_in):]
    if e.shape[0] == 0:
        raise InsufficientData("filter path is empty after burn-in")
    e = e.reshape(-1, spec.n)
    mu = stationary_distribution(spec) if mu is None else np.asarray(mu, dtype=float)
    avg = e.mean(axis=0)
    out = []
    for fn in test_fns:
        lv = np.asarray([fn(m) for m in spec.states], dtype=float)
        out.append(abs(float(np.dot(lv, avg)) - float(np.dot(lv, mu))))
    return np.array(out)
