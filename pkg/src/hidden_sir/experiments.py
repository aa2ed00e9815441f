"""Experiment runners behind the command line: ensembles, verdicts, artifacts.

Path ``j`` of an ensemble uses seed ``base + j`` for everything random on
that path: its Brownian channels ``(B1, B2, W)`` come from
``NoiseBundle(seed, 3)``, the chain jumps from ``default_rng(seed)`` and the
initial chain state from ``default_rng([seed, 1])`` drawn from ``mu*``.
Hidden, filtered and predicted systems with the same seed share ``B1``,
``B2``; the filter in observation mode sees ``dy = g(alpha) dt + dW``.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (Verdict, extinction_verdict, lyapunov_slope, occupation_histogram,
                       pool_estimates, quarter_means)
from .config import ExperimentConfig
from .errors import InsufficientData
from .markov import ChainSpec, observation_path, simulate_ctmc, stationary_distribution
from .models import make_filtered_system, make_hidden_system, make_predicted_system
from .sde import NoiseBundle, SimPath, TimeGrid, simulate_ensemble
from .threshold import Label, classify_prediction, lambda_discrete, lambda_predicted

N_CHANNELS = 3
EXTINCT_LEVEL = 1e-6
TREND_TOL = 0.1


def initial_state_index(spec: ChainSpec, seed: int) -> int:
    mu = stationary_distribution(spec)
    return int(np.random.default_rng([int(seed), 1]).choice(spec.n, p=mu))


def initial_filter(spec: ChainSpec, e0, index: int) -> np.ndarray:
    if isinstance(e0, (tuple, list, np.ndarray)):
        return np.asarray(e0, dtype=float)
    if e0 == "stationary":
        return stationary_distribution(spec)
    out = np.zeros(spec.n)
    out[index] = 1.0
    return out


@dataclass
class Ensemble:
    grid: TimeGrid
    seeds: tuple
    chains: list
    init_index: np.ndarray
    hidden: Optional[SimPath] = None
    filtered: Optional[SimPath] = None
    predicted: dict = field(default_factory=dict)

    def system(self, name: str, m_k0: Optional[float] = None) -> SimPath:
        if name == "predicted":
            return self.predicted[float(m_k0)]
        return getattr(self, name)


def run_ensemble(cfg: ExperimentConfig, systems: Sequence[str] = ("hidden", "filtered"),
                 predicted: Sequence[float] = (), seeds: Optional[Sequence[int]] = None,
                 horizon: Optional[float] = None, record_every: Optional[int] = None) -> Ensemble:
    """Co-simulate the requested systems over one set of seeds."""
    seeds = tuple(cfg.seeds if seeds is None else seeds)
    grid = TimeGrid.from_horizon(cfg.horizon if horizon is None else horizon, cfg.dt)
    r = cfg.record_every if record_every is None else record_every
    spec = cfg.chain
    idx0 = np.array([initial_state_index(spec, s) for s in seeds])
    chains = [simulate_ctmc(spec, i, grid, s) for s, i in zip(seeds, idx0)]
    noises = [NoiseBundle(int(s), N_CHANNELS, grid) for s in seeds]
    ens = Ensemble(grid, seeds, chains, idx0)
    s0, i0 = cfg.init
    if "hidden" in systems:
        sys_h = make_hidden_system(cfg.params, cfg.incidence, spec, chains, grid, cfg.floor)
        ens.hidden = simulate_ensemble(sys_h, [s0, i0], grid, noises, r)
    if "filtered" in systems:
        sys_f = make_filtered_system(cfg.params, cfg.incidence, spec, cfg.driver, chains, grid, cfg.floor)
        init = np.array([np.concatenate([[s0, i0], initial_filter(spec, cfg.e0, i)]) for i in idx0])
        ens.filtered = simulate_ensemble(sys_f, init, grid, noises, r)
    for m in predicted:
        sys_p = make_predicted_system(cfg.params, cfg.incidence, m, cfg.floor)
        ens.predicted[float(m)] = simulate_ensemble(sys_p, [s0, i0], grid, noises, r)
    return ens


def observation_record(ens: Ensemble, spec: ChainSpec, j: int, times) -> np.ndarray:
    """``y(t)`` of path ``j`` at the given grid times."""
    noise = NoiseBundle(int(ens.seeds[j]), N_CHANNELS, ens.grid)
    dy = observation_path(ens.chains[j], spec, ens.grid, noise, channel=2)
    y = np.concatenate([[0.0], np.cumsum(dy)])
    return y[np.array([ens.grid.index(t) for t in times])]


@dataclass(frozen=True)
class SystemSummary:
    system: str
    m_k0: Optional[float]
    threshold: float
    label: str
    slope: float
    stderr: float
    i_mean_min: float
    quarter_means: tuple
    downward_trend: bool
    extinct_fraction: float
    clamped_paths: int
    verdict: Verdict


def has_downward_trend(q, tol: float = TREND_TOL) -> bool:
    """Quarters 2..4 strictly decreasing with a relative drop above ``tol``."""
    q = np.asarray(q, dtype=float)[1:]
    return bool(np.all(np.diff(q) < 0) and q[-1] < (1 - tol) * q[0])


def summarize(path: SimPath, threshold: float, cfg: ExperimentConfig, system: str,
              m_k0: Optional[float] = None, label: str = Label.EXACT.value) -> SystemSummary:
    """Pooled slope, late-time ``I`` means and the verdict for one system."""
    t_end = path.times[-1]
    burn_in = cfg.burn_in if cfg.burn_in is not None else path.times[0] + 0.1 * (t_end - path.times[0])
    estimates = []
    for j in range(path.n_paths):
        try:
            estimates.append(lyapunov_slope(path, burn_in, "I", j))
        except InsufficientData:
            pass
    pooled = pool_estimates(estimates) if estimates else None
    half = path.times >= 0.5 * (path.times[0] + t_end)
    i_means = path.component("I")[half].mean(axis=0)
    q = quarter_means(path, "I")
    i_final = path.component("I")[-1]
    verdict = Verdict.INDETERMINATE
    if pooled is not None:
        verdict = extinction_verdict(pooled, threshold, float(i_means.min()), cfg.permanence_floor, cfg.n_sigma)
    return SystemSummary(system, m_k0, float(threshold), label,
                         float("nan") if pooled is None else pooled.slope,
                         float("nan") if pooled is None else pooled.stderr,
                         float(i_means.min()), tuple(float(v) for v in q), has_downward_trend(q),
                         float(np.mean(i_final < EXTINCT_LEVEL)),
                         int(np.count_nonzero(path.clamp_counts[:, path.positive.index(1)])),
                         verdict)


def compare(cfg: ExperimentConfig, ens: Optional[Ensemble] = None) -> list:
    """Verdicts for hidden, filtered and each predicted system."""
    report = lambda_discrete(cfg.params, cfg.incidence, cfg.chain)
    if ens is None:
        ens = run_ensemble(cfg, ("hidden", "filtered"), cfg.predicted)
    rows = []
    for name in ("hidden", "filtered"):
        path = ens.system(name)
        if path is not None:
            rows.append(summarize(path, report.lam, cfg, name))
    for m, path in ens.predicted.items():
        lp = lambda_predicted(cfg.params, cfg.incidence, m)
        label = classify_prediction(lp, report.lam, 10 * report.quadrature_error)
        rows.append(summarize(path, lp, cfg, "predicted", m, label.value))
    return rows


def sweep(cfg: ExperimentConfig) -> list:
    """``(value, report, predicted lambdas)`` over the configured parameter grid."""
    out = []
    for v in cfg.sweep.values:
        params, spec = cfg.params, cfg.chain
        if cfg.sweep.parameter in ("q1", "q2"):
            q1, q2 = spec.generator[0, 1], spec.generator[1, 0]
            q1, q2 = (v, q2) if cfg.sweep.parameter == "q1" else (q1, v)
            spec = ChainSpec.two_state(q1, q2, tuple(spec.states), tuple(spec.obs_map))
        else:
            params = replace(params, **{cfg.sweep.parameter: v})
        rep = lambda_discrete(params, cfg.incidence, spec)
        pre = [lambda_predicted(params, cfg.incidence, m) for m in cfg.predicted]
        out.append((v, rep, pre))
    return out


def density(cfg: ExperimentConfig, ens: Optional[Ensemble] = None):
    d = cfg.density
    if ens is None:
        if d.system == "predicted":
            ens = run_ensemble(cfg, (), (d.m_k0,))
        else:
            ens = run_ensemble(cfg, (d.system,))
    path = ens.system(d.system, d.m_k0)
    return occupation_histogram(path, d.bins, d.burn_in if d.burn_in is not None else cfg.burn_in)


# -- artifacts ---------------------------------------------------------------

def provenance(cfg: ExperimentConfig, seed) -> str:
    return f"# hidden-sir {__version__} config_sha256={cfg.hash} seed={seed}"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(getattr(v, "value", v))


def write_csv(path: str, header: Sequence[str], rows, comment: str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(comment + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _seed_label(cfg: ExperimentConfig) -> str:
    if cfg.n_seeds == 1:
        return str(cfg.base_seed)
    return f"{cfg.base_seed}..{cfg.base_seed + cfg.n_seeds - 1}"


def _write_simulate(cfg: ExperimentConfig, out: str) -> list:
    ens = run_ensemble(cfg, ("hidden", "filtered"), cfg.predicted)
    spec, files = cfg.chain, []
    times = ens.hidden.times
    e_names = [f"e_{k + 1}" for k in range(spec.n)]
    for j, seed in enumerate(ens.seeds):
        y = observation_record(ens, spec, j, times)
        alpha = ens.chains[j].values(spec, times)
        tag = provenance(cfg, seed)
        h = ens.hidden.states[:, j]
        name = os.path.join(out, f"paths_hidden_{seed}.csv")
        write_csv(name, ["t", "S", "I", "alpha", "y"], zip(times, h[:, 0], h[:, 1], alpha, y), tag)
        files.append(name)
        f = ens.filtered.states[:, j]
        name = os.path.join(out, f"paths_filtered_{seed}.csv")
        write_csv(name, ["t", "S", "I", *e_names, "y"],
                  (row for row in zip(times, *f.T, y)), tag)
        files.append(name)
        for m, path in ens.predicted.items():
            p = path.states[:, j]
            name = os.path.join(out, f"paths_predicted_m{m:g}_{seed}.csv")
            write_csv(name, ["t", "S", "I", "alpha", "y"],
                      zip(times, p[:, 0], p[:, 1], np.full(times.size, m), y), tag)
            files.append(name)
    return files


def _write_threshold(cfg: ExperimentConfig, out: str) -> list:
    report = lambda_discrete(cfg.params, cfg.incidence, cfg.chain)
    lines = [provenance(cfg, _seed_label(cfg)), report.to_record().rstrip("\n")]
    for j, m in enumerate(cfg.predicted):
        lp = lambda_predicted(cfg.params, cfg.incidence, m)
        label = classify_prediction(lp, report.lam, 10 * report.quadrature_error)
        lines += [f"predicted_m_k0_{j + 1}={m!r}", f"predicted_lambda_pre_{j + 1}={lp!r}",
                  f"predicted_classification_{j + 1}={label.value}"]
    name = os.path.join(out, "threshold.txt")
    with open(name, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return [name]


COMPARE_HEADER = ["system", "m_k0", "threshold", "label", "slope", "stderr", "i_mean_min",
                  "q1_mean", "q2_mean", "q3_mean", "q4_mean", "downward_trend",
                  "extinct_fraction", "clamped_paths", "verdict"]


def compare_rows(rows) -> list:
    return [[r.system, r.m_k0, r.threshold, r.label, r.slope, r.stderr, r.i_mean_min, *r.quarter_means,
             r.downward_trend, r.extinct_fraction, r.clamped_paths, r.verdict] for r in rows]


def _write_compare(cfg: ExperimentConfig, out: str) -> list:
    name = os.path.join(out, "compare.csv")
    write_csv(name, COMPARE_HEADER, compare_rows(compare(cfg)), provenance(cfg, _seed_label(cfg)))
    return [name]


def _write_sweep(cfg: ExperimentConfig, out: str) -> list:
    n = cfg.chain.n
    header = [cfg.sweep.parameter, "lambda", *[f"lambda_pre_{k + 1}" for k in range(n)],
              *[f"classification_{k + 1}" for k in range(n)],
              *[f"predicted_lambda_pre_m{m:g}" for m in cfg.predicted]]
    rows = [[v, rep.lam, *rep.lambda_pre, *rep.classifications, *pre] for v, rep, pre in sweep(cfg)]
    name = os.path.join(out, "sweep.csv")
    write_csv(name, header, rows, provenance(cfg, _seed_label(cfg)))
    return [name]


def _write_density(cfg: ExperimentConfig, out: str) -> list:
    hist = density(cfg)
    name = os.path.join(out, "density.csv")
    write_csv(name, ["S_bin", "I_bin", "density"], hist.rows(), provenance(cfg, _seed_label(cfg)))
    return [name]


_WRITERS = {"simulate": _write_simulate, "threshold": _write_threshold, "compare": _write_compare,
            "sweep": _write_sweep, "density": _write_density}


def run_experiment(cfg: ExperimentConfig) -> list:
    """Run ``cfg.kind`` and write its artifacts under ``cfg.out_dir``; returns the paths."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    return _WRITERS[cfg.kind](cfg, cfg.out_dir)
