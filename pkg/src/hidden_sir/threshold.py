"""Extinction/permanence threshold and the stationary laws it is built from.

All integrals against the boundary law ``mu_hat = InvGamma(a, b)`` are taken
after ``z = b / y``, which turns the weight into the Gamma(a, 1) density
``z^(a-1) e^(-z) / Gamma(a)``; that integrand is then mapped onto (0, 1) and
handed to the adaptive Gauss-Kronrod rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaincc, gammaln

from .errors import AssumptionViolated
from .markov import ChainSpec, stationary_distribution
from .models import EpidemicParams, IncidenceModel
from .quadrature import gauss_kronrod, integrate_half_line

QUAD_TOL = 1e-10
QUAD_BUDGET = 100_000


class Label(str, Enum):
    OVERCAUTIOUS = "Overcautious"
    INCAUTIOUS = "Incautious"
    EXACT = "Exact"


@dataclass(frozen=True)
class InvGammaLaw:
    """Stationary law of the disease-free equation, shape ``a`` and scale ``b``."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("inverse-gamma parameters must be positive")

    def logpdf(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return self.a * np.log(self.b) - gammaln(self.a) - (self.a + 1) * np.log(y) - self.b / y

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(self.logpdf(y[pos]))
        return out

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(y > 0, gammaincc(self.a, self.b / np.where(y > 0, y, 1.0)), 0.0)

    @property
    def mean(self) -> float:
        return self.b / (self.a - 1) if self.a > 1 else float("inf")

    def bin_probs(self, edges) -> np.ndarray:
        return np.diff(self.cdf(np.asarray(edges, dtype=float)))


def invgamma_from_params(params: EpidemicParams) -> InvGammaLaw:
    s2 = params.sigma1 ** 2
    if s2 == 0:
        raise ValueError("sigma1 must be non-zero")
    return InvGammaLaw(2 * params.c1 / s2, 2 * params.a1 / s2)


def expectation_under_invgamma(g: Callable, law: InvGammaLaw, tol: float = QUAD_TOL,
                               max_evals: int = QUAD_BUDGET) -> tuple[float, float]:
    """``E[g(Y)]`` for ``Y ~ law`` with an error estimate ``<= tol``."""
    a, b = law.a, law.b
    lg = gammaln(a)

    def integrand(z):
        return np.asarray(g(b / z), dtype=float) * np.exp((a - 1) * np.log(z) - z - lg)

    return integrate_half_line(integrand, abs_tol=tol, max_evals=max_evals)


@dataclass
class ThresholdReport:
    lam: float
    states: np.ndarray
    stationary: np.ndarray
    lambda_pre: np.ndarray
    classifications: list
    quadrature_error: float
    components: dict
    f_integrals: np.ndarray = field(repr=False, default=None)
    h_integrals: np.ndarray = field(repr=False, default=None)
    pre_errors: np.ndarray = field(repr=False, default=None)

    def to_record(self) -> str:
        rows = [("lambda", self.lam), ("quadrature_error", self.quadrature_error)]
        rows += [(f"component_{k}", v) for k, v in self.components.items()]
        for j, m in enumerate(self.states):
            rows += [(f"state_{j + 1}", m), (f"mu_star_{j + 1}", self.stationary[j]),
                     (f"lambda_pre_{j + 1}", self.lambda_pre[j]),
                     (f"classification_{j + 1}", self.classifications[j].value)]
        return "".join(f"{k}={_fmt(v)}\n" for k, v in rows)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _boundary_integrals(params, model, atoms, tol):
    law = invgamma_from_params(params)
    f_int, h_int, f_err, h_err = [], [], [], []
    for x in atoms:
        fv, fe = expectation_under_invgamma(lambda y: model.f(x, y, 0.0 * y), law, tol)
        hv, he = expectation_under_invgamma(lambda y: model.h(x, y, 0.0 * y), law, tol)
        f_int.append(fv)
        h_int.append(hv)
        f_err.append(fe)
        h_err.append(he)
    return tuple(np.array(v) for v in (f_int, h_int, f_err, h_err))


def lambda_general(params: EpidemicParams, model: IncidenceModel, atoms, weights,
                   tol: float = QUAD_TOL, tie_tol: float = None) -> ThresholdReport:
    """Threshold for a signal whose invariant law is approximated by atoms."""
    atoms = np.asarray(atoms, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if atoms.shape != weights.shape or not np.isclose(weights.sum(), 1.0):
        raise ValueError("weights must be a probability vector matching atoms")
    f_int, h_int, f_err, h_err = _boundary_integrals(params, model, atoms, tol)
    components = {
        "neg_c2": -params.c2,
        "f_term": float(np.dot(weights, f_int)),
        "h_term": float(np.dot(weights * atoms, h_int)),
    }
    lam = components["neg_c2"] + components["f_term"] + components["h_term"]
    err = float(np.dot(weights, f_err) + np.dot(weights * atoms, h_err))
    pre = -params.c2 + f_int + atoms * h_int
    pre_err = f_err + atoms * h_err
    labels = [classify_prediction(p, lam, 10 * (err + pe) if tie_tol is None else tie_tol)
              for p, pe in zip(pre, pre_err)]
    return ThresholdReport(lam, atoms, weights, pre, labels, err, components, f_int, h_int, pre_err)


def lambda_discrete(params: EpidemicParams, model: IncidenceModel, spec: ChainSpec,
                    tol: float = QUAD_TOL, tie_tol: float = None) -> ThresholdReport:
    return lambda_general(params, model, spec.states, stationary_distribution(spec), tol, tie_tol)


def lambda_predicted(params: EpidemicParams, model: IncidenceModel, m_k0: float,
                     tol: float = QUAD_TOL) -> float:
    if not 0 <= m_k0 <= 1:
        raise ValueError("m_k0 must lie in [0, 1]")
    f_int, h_int, _, _ = _boundary_integrals(params, model, [m_k0], tol)
    return float(-params.c2 + f_int[0] + m_k0 * h_int[0])


def classify_prediction(lambda_pre: float, lam: float, tol: float = 0.0) -> Label:
    if lambda_pre > lam + tol:
        return Label.OVERCAUTIOUS
    if lambda_pre < lam - tol:
        return Label.INCAUTIOUS
    return Label.EXACT


def check_monotone_in_x(model: IncidenceModel, xs, ys) -> bool:
    """Non-decreasing ``f(x, y, 0)`` and ``h(x, y, 0)`` along sorted ``xs``."""
    xs = np.sort(np.asarray(xs, dtype=float))
    X, Y = np.meshgrid(xs, np.asarray(ys, dtype=float), indexing="ij")
    for law in (model.f, model.h):
        v = law(X, Y, 0.0 * Y)
        if np.any(np.diff(v, axis=0) < -1e-12 * (1 + np.abs(v[1:]))):
            return False
    return True


@dataclass(frozen=True)
class BoundsCheck:
    lower: float
    lam: float
    upper: float
    passed: bool


def monotone_prediction_bounds(params: EpidemicParams, model: IncidenceModel, spec: ChainSpec,
                               tol: float = QUAD_TOL) -> BoundsCheck:
    """Check ``lambda_pre(m_1) <= lambda <= lambda_pre(m_n)`` under monotone rates."""
    law = invgamma_from_params(params)
    ys = np.concatenate([np.linspace(0.0, 5 * law.b, 101)[1:], law.b * np.logspace(1, 4, 20)])
    xs = np.union1d(spec.states, np.linspace(spec.states[0], spec.states[-1], 51))
    if not check_monotone_in_x(model, xs, ys):
        raise AssumptionViolated("incidence rates are not increasing in x")
    rep = lambda_discrete(params, model, spec, tol)
    lower, upper = rep.lambda_pre[0], rep.lambda_pre[-1]
    slack = 10 * (rep.quadrature_error + rep.pre_errors.max())
    return BoundsCheck(float(lower), rep.lam, float(upper),
                       bool(lower - slack <= rep.lam <= upper + slack))


def sufficient_conditions(params: EpidemicParams, model: IncidenceModel, spec: ChainSpec,
                          k0: int, tol: float = QUAD_TOL) -> dict:
    """Evaluate the sufficient conditions for the order of ``lambda_pre(m_k0)``.

    ``weighted_incautious`` / ``weighted_overcautious`` compare the
    ``mu_k0``-weighted boundary rate of the guessed state against the full
    (resp. rescaled partial) mixture. ``endpoint_overcautious`` and
    ``endpoint_incautious`` are the unweighted forms for the extreme states,
    evaluated only when ``k0`` is the last or first state.
    """
    rep = lambda_discrete(params, model, spec, tol)
    mu, m = rep.stationary, rep.states
    G = rep.f_integrals + m * rep.h_integrals
    total = float(np.dot(mu, G))
    n = spec.n
    out = {
        "weighted_incautious": bool(mu[k0] * G[k0] < total),
        "weighted_overcautious": bool(
            mu[k0] * G[k0] > np.dot(mu[:-1], G[:-1]) / (1 - mu[-1])) if n > 1 else False,
        "endpoint_overcautious": None,
        "endpoint_incautious": None,
        "lambda": rep.lam,
        "lambda_pre": float(rep.lambda_pre[k0]),
    }
    if k0 == n - 1 and n > 1:
        lhs = rep.f_integrals[-1] + rep.h_integrals[-1]
        out["endpoint_overcautious"] = bool(lhs > np.dot(mu[:-1], G[:-1]) / (1 - mu[-1]))
    if k0 == 0 and n > 1:
        lhs = rep.f_integrals[0] + rep.h_integrals[0]
        out["endpoint_incautious"] = bool(lhs < np.dot(mu[1:], G[1:]) / (1 - mu[0]))
    return out


def filter_log_density_unnormalized(x, d1: float, d2: float, cutoff: float = 2.0):
    """Log of the two-state filter's stationary density up to a constant.

    Solving the stationary Fokker-Planck equation for
    ``de = [q2 - (q1 + q2) e] dt + g e (1 - e) dW`` gives exponential
    cut-offs ``exp(-2 d1 / (1 - x) - 2 d2 / x)``; ``cutoff`` scales them.
    """
    x = np.asarray(x, dtype=float)
    return (-cutoff * d1 / (1 - x) + 2 * (d1 - d2 - 1) * np.log1p(-x)
            - cutoff * d2 / x + 2 * (d2 - d1 - 1) * np.log(x))


@dataclass(frozen=True)
class TwoStateFilterDensity:
    """Stationary density of ``e = P(alpha = m_1 | observations)`` on (0, 1)."""

    d1: float
    d2: float
    log_c: float
    norm_error: float

    def logpdf(self, x):
        return self.log_c + filter_log_density_unnormalized(x, self.d1, self.d2)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = (x > 0) & (x < 1)
        out[inside] = np.exp(self.logpdf(x[inside]))
        return out

    def integrate(self, fn=None, lo: float = 0.0, hi: float = 1.0) -> float:
        fn = fn or (lambda x: 1.0)
        return gauss_kronrod(lambda x: fn(x) * self.pdf(x), lo, hi, abs_tol=1e-13, rel_tol=1e-12)[0]

    @property
    def mean(self) -> float:
        return self.integrate(lambda x: x)

    def bin_probs(self, edges) -> np.ndarray:
        e = np.clip(np.asarray(edges, dtype=float), 0.0, 1.0)
        return np.array([self.integrate(lo=lo, hi=hi) if hi > lo else 0.0 for lo, hi in zip(e[:-1], e[1:])])


def two_state_filter_density(q1: float, q2: float, g_gap: float) -> TwoStateFilterDensity:
    if not (q1 > 0 and q2 > 0):
        raise ValueError("q1 and q2 must be positive")
    if g_gap == 0:
        raise ValueError("g_gap must be non-zero")
    d1, d2 = q1 / g_gap ** 2, q2 / g_gap ** 2
    grid = np.linspace(0, 1, 4001)[1:-1]
    peak = float(np.max(filter_log_density_unnormalized(grid, d1, d2)))
    z, err = gauss_kronrod(lambda x: np.exp(filter_log_density_unnormalized(x, d1, d2) - peak),
                           0.0, 1.0, abs_tol=1e-300, rel_tol=1e-12)
    return TwoStateFilterDensity(d1, d2, -(peak + np.log(z)), err / z)
