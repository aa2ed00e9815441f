"""Experiment configuration: YAML documents, built-in presets, validation.

A document is a nested mapping. Any subset of keys may be given; missing
keys come from the preset named by ``preset`` (or the ``--preset`` flag),
else from :data:`DEFAULTS`. Unknown keys are rejected.

Schema::

    kind: simulate | threshold | compare | sweep | density
    preset: example1 | example2
    params: {a1, b1, b2, sigma1, sigma2}
    chain: {q1, q2, states}  or  {states, generator, obs_map}
    incidence:
      f: {kind, beta, m1, m2}      # beta/m1/m2: scalar or {state: value}
      h: {kind, beta, m1, m2}
    grid: {dt, horizon, record_every}
    seeds: {count, base}
    init: {S, I}
    simulation: {driver, e0, floor}
    predicted: [m_k0, ...]
    analysis: {burn_in, permanence_floor, n_sigma}
    sweep: {parameter, values}
    density: {system, m_k0, bins, burn_in}
    out_dir: path
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from .errors import ConfigError
from .markov import ChainSpec
from .models import EpidemicParams, IncidenceModel, RateLaw
from .sde import TimeGrid

KINDS = ("simulate", "threshold", "compare", "sweep", "density")
SYSTEMS = ("hidden", "filtered", "predicted")
SWEEPABLE = ("a1", "b1", "b2", "sigma1", "sigma2", "q1", "q2")

DEFAULTS = {
    "kind": "threshold",
    "grid": {"dt": 1e-3, "horizon": 500.0, "record_every": 100},
    "seeds": {"count": 1, "base": 0},
    "simulation": {"driver": "observation", "e0": "delta", "floor": 1e-300},
    "predicted": [],
    "analysis": {"burn_in": None, "permanence_floor": 0.01, "n_sigma": 3.0},
    "sweep": None,
    "density": {"system": "filtered", "m_k0": None, "bins": [40, 40], "burn_in": None},
    "out_dir": "out",
}

# The incidence family shared by both presets: f = m1(x) s, h = m2(x) s / (1 + s + i).
PRESETS = {
    "example1": {
        "params": {"a1": 0.5, "b1": 1.0, "b2": 2.0, "sigma1": 1.0, "sigma2": 0.5},
        "chain": {"q1": 5.0, "q2": 25.0, "states": [0.0, 1.0]},
        "incidence": {
            "f": {"kind": "bilinear", "beta": {0.0: 0.1, 1.0: 4.0}},
            "h": {"kind": "beddington_deangelis", "beta": 0.1, "m1": 1.0, "m2": 1.0},
        },
        "init": {"S": 0.5, "I": 0.1},
        "predicted": [0.0, 1.0],
        "seeds": {"count": 100, "base": 0},
        "sweep": {"parameter": "sigma2", "values": [0.25, 0.5, 1.0, 1.5, 2.0]},
        "analysis": {"permanence_floor": 0.01},
    },
    "example2": {
        "params": {"a1": 10.0, "b1": 1.0, "b2": 3.0, "sigma1": 1.0, "sigma2": 1.0},
        "chain": {"q1": 10.0, "q2": 1.0, "states": [0.0, 1.0]},
        "incidence": {
            "f": {"kind": "bilinear", "beta": {0.0: 0.1, 1.0: 2.0}},
            "h": {"kind": "beddington_deangelis", "beta": 0.1, "m1": 1.0, "m2": 1.0},
        },
        "init": {"S": 10.0, "I": 0.1},
        "predicted": [0.0, 1.0],
        "seeds": {"count": 100, "base": 0},
        "sweep": {"parameter": "sigma2", "values": [0.5, 1.0, 2.0, 4.0, 6.0]},
        "analysis": {"permanence_floor": 0.01},
    },
}

_SCHEMA = {
    "kind": None, "preset": None, "out_dir": None, "predicted": None,
    "params": {"a1", "b1", "b2", "sigma1", "sigma2"},
    "chain": {"q1", "q2", "states", "generator", "obs_map"},
    "incidence": {"f", "h"},
    "grid": {"dt", "horizon", "record_every"},
    "seeds": {"count", "base"},
    "init": {"S", "I"},
    "simulation": {"driver", "e0", "floor"},
    "analysis": {"burn_in", "permanence_floor", "n_sigma"},
    "sweep": {"parameter", "values"},
    "density": {"system", "m_k0", "bins", "burn_in"},
}
_RATE_KEYS = {"kind", "beta", "m1", "m2"}


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple


@dataclass(frozen=True)
class DensitySpec:
    system: str
    m_k0: Optional[float]
    bins: tuple
    burn_in: Optional[float]


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: EpidemicParams
    chain: ChainSpec
    incidence: IncidenceModel
    dt: float
    horizon: float
    record_every: int
    n_seeds: int
    base_seed: int
    init: tuple
    driver: str
    e0: object
    floor: float
    predicted: tuple
    burn_in: Optional[float]
    permanence_floor: float
    n_sigma: float
    sweep: Optional[SweepSpec]
    density: DensitySpec
    out_dir: str
    document: dict

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.from_horizon(self.horizon, self.dt)

    @property
    def seeds(self) -> tuple:
        return tuple(self.base_seed + j for j in range(self.n_seeds))

    @property
    def hash(self) -> str:
        """SHA-256 of the canonical document, output directory excluded."""
        doc = {k: v for k, v in self.document.items() if k != "out_dir"}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k == "incidence" and isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **copy.deepcopy(v)}  # f and h replace whole
        elif k == "chain" and isinstance(v, dict) and "generator" in v:
            out[k] = copy.deepcopy(v)  # a full generator replaces a q1/q2 chain
        elif isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_keys(doc: dict):
    for k, v in doc.items():
        if k not in _SCHEMA:
            raise ConfigError(k, "unknown key")
        allowed = _SCHEMA[k]
        if allowed is None or v is None:
            continue
        if not isinstance(v, dict):
            raise ConfigError(k, "expected a mapping")
        for sub in v:
            if sub not in allowed:
                raise ConfigError(f"{k}.{sub}", "unknown key")
        if k == "incidence":
            for name, law in v.items():
                if not isinstance(law, dict):
                    raise ConfigError(f"incidence.{name}", "expected a mapping")
                for sub in law:
                    if sub not in _RATE_KEYS:
                        raise ConfigError(f"incidence.{name}.{sub}", "unknown key")


def _num(value, path, positive=False, nonneg=False, integer=False):
    if isinstance(value, str):
        # YAML 1.1 reads "1e-3" as a string
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, "expected an integer")
    if not np.isfinite(value):
        raise ConfigError(path, "must be finite")
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value}")
    if nonneg and value < 0:
        raise ConfigError(path, f"must be non-negative, got {value}")
    return int(value) if integer else float(value)


def _need(doc, key):
    if key not in doc or doc[key] is None:
        raise ConfigError(key, "missing (give it or choose a preset)")
    return doc[key]


def _params(doc) -> EpidemicParams:
    p = _need(doc, "params")
    vals = {}
    for name in ("a1", "b1", "b2", "sigma1", "sigma2"):
        if name not in p:
            raise ConfigError(f"params.{name}", "missing")
        vals[name] = _num(p[name], f"params.{name}", positive=name in ("a1", "b1", "b2"))
        if name.startswith("sigma") and vals[name] == 0:
            raise ConfigError(f"params.{name}", "must be non-zero")
    return EpidemicParams(**vals)


def _chain(doc) -> ChainSpec:
    c = _need(doc, "chain")
    try:
        if "generator" in c:
            if "q1" in c or "q2" in c:
                raise ConfigError("chain", "give either q1/q2 or generator, not both")
            return ChainSpec(tuple(c.get("states", ())), np.asarray(c["generator"], dtype=float),
                             c.get("obs_map"))
        for q in ("q1", "q2"):
            if q not in c:
                raise ConfigError(f"chain.{q}", "missing")
            _num(c[q], f"chain.{q}", positive=True)
        return ChainSpec.two_state(float(c["q1"]), float(c["q2"]), tuple(c.get("states", (0.0, 1.0))),
                                   c.get("obs_map"))
    except (ValueError, TypeError) as exc:
        raise ConfigError("chain", str(exc)) from None


def _rate(spec, path) -> RateLaw:
    if spec is None:
        return RateLaw()
    kw = {}
    for k in ("beta", "m1", "m2"):
        if k in spec:
            v = spec[k]
            if isinstance(v, dict):
                kw[k] = {_num(x, f"{path}.{k}"): _num(y, f"{path}.{k}") for x, y in v.items()}
            else:
                kw[k] = _num(v, f"{path}.{k}")
    kind = spec.get("kind", "zero")
    if kind == "custom":
        raise ConfigError(f"{path}.kind", "custom rates cannot be given in a config file")
    try:
        return RateLaw(kind, **kw)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _incidence(doc) -> IncidenceModel:
    inc = _need(doc, "incidence")
    if "f" not in inc:
        raise ConfigError("incidence.f", "missing")
    return IncidenceModel(_rate(inc["f"], "incidence.f"), _rate(inc.get("h"), "incidence.h"))


def _opt_num(value, path, **kw):
    return None if value is None else _num(value, path, **kw)


def parse_document(doc: dict, preset: Optional[str] = None) -> ExperimentConfig:
    """Validate a mapping (already parsed) into an :class:`ExperimentConfig`."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "document must be a mapping")
    _check_keys(doc)
    name = preset or doc.get("preset")
    merged = copy.deepcopy(DEFAULTS)
    if name is not None:
        if name not in PRESETS:
            raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        merged = _merge(merged, PRESETS[name])
        merged["preset"] = name
    merged = _merge(merged, {k: v for k, v in doc.items() if k != "preset"})

    kind = merged["kind"]
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {KINDS}")
    params = _params(merged)
    chain = _chain(merged)
    incidence = _incidence(merged)

    g = merged["grid"]
    dt = _num(g.get("dt"), "grid.dt", positive=True)
    horizon = _num(g.get("horizon"), "grid.horizon", positive=True)
    if horizon < dt:
        raise ConfigError("grid.horizon", "shorter than one step")
    record_every = _num(g.get("record_every"), "grid.record_every", positive=True, integer=True)
    s = merged["seeds"]
    n_seeds = _num(s.get("count"), "seeds.count", positive=True, integer=True)
    base = _num(s.get("base"), "seeds.base", nonneg=True, integer=True)
    if base + n_seeds > 2 ** 63:
        raise ConfigError("seeds.base", "seed range overflows")

    init = merged.get("init") or {}
    s0 = _num(init.get("S", params.a1 / params.b1), "init.S", nonneg=True)
    i0 = _num(init.get("I", 0.1), "init.I", nonneg=True)

    sim = merged["simulation"]
    driver = sim.get("driver")
    if driver not in ("observation", "innovation"):
        raise ConfigError("simulation.driver", "must be 'observation' or 'innovation'")
    e0 = sim.get("e0")
    if isinstance(e0, list):
        arr = np.asarray(e0, dtype=float)
        if arr.shape != (chain.n,) or np.any(arr < 0) or abs(arr.sum() - 1) > 1e-9:
            raise ConfigError("simulation.e0", "must be a probability vector over the chain states")
        e0 = tuple(float(v) for v in arr)
    elif e0 not in ("delta", "stationary"):
        raise ConfigError("simulation.e0", "must be 'delta', 'stationary' or a probability vector")
    floor = _num(sim.get("floor"), "simulation.floor", positive=True)

    predicted = merged.get("predicted") or []
    if not isinstance(predicted, list):
        raise ConfigError("predicted", "expected a list of state values")
    pred = []
    for j, m in enumerate(predicted):
        v = _num(m, f"predicted[{j}]")
        if not 0 <= v <= 1:
            raise ConfigError(f"predicted[{j}]", "must lie in [0, 1]")
        pred.append(v)

    an = merged["analysis"]
    burn_in = _opt_num(an.get("burn_in"), "analysis.burn_in", nonneg=True)
    if burn_in is not None and burn_in >= horizon:
        raise ConfigError("analysis.burn_in", "must be shorter than the horizon")
    pfloor = _num(an.get("permanence_floor"), "analysis.permanence_floor", positive=True)
    n_sigma = _num(an.get("n_sigma"), "analysis.n_sigma", positive=True)

    sweep = None
    if merged.get("sweep") is not None:
        sw = merged["sweep"]
        if sw.get("parameter") not in SWEEPABLE:
            raise ConfigError("sweep.parameter", f"must be one of {SWEEPABLE}")
        if sw["parameter"] in ("q1", "q2") and "generator" in merged["chain"]:
            raise ConfigError("sweep.parameter", "q1/q2 sweeps need a two-state chain given by q1, q2")
        vals = sw.get("values")
        if not isinstance(vals, list) or not vals:
            raise ConfigError("sweep.values", "expected a non-empty list")
        sweep = SweepSpec(sw["parameter"], tuple(_num(v, f"sweep.values[{j}]") for j, v in enumerate(vals)))
    if kind == "sweep" and sweep is None:
        raise ConfigError("sweep", "missing for a sweep experiment")

    d = merged["density"]
    if d.get("system") not in SYSTEMS:
        raise ConfigError("density.system", f"must be one of {SYSTEMS}")
    m_k0 = _opt_num(d.get("m_k0"), "density.m_k0")
    if d["system"] == "predicted" and (m_k0 is None or not 0 <= m_k0 <= 1):
        raise ConfigError("density.m_k0", "predicted density needs m_k0 in [0, 1]")
    bins = d.get("bins")
    if not (isinstance(bins, list) and len(bins) == 2):
        raise ConfigError("density.bins", "expected [n_S, n_I]")
    bins = tuple(_num(b, f"density.bins[{j}]", positive=True, integer=True) for j, b in enumerate(bins))
    d_burn = _opt_num(d.get("burn_in"), "density.burn_in", nonneg=True)

    out_dir = merged.get("out_dir")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("out_dir", "expected a path")

    return ExperimentConfig(kind, params, chain, incidence, dt, horizon, record_every, n_seeds, base,
                            (s0, i0), driver, e0, floor, tuple(pred), burn_in, pfloor, n_sigma, sweep,
                            DensitySpec(d["system"], m_k0, bins, d_burn), out_dir, merged)


def parse_config(text: str, preset: Optional[str] = None) -> ExperimentConfig:
    """Parse a YAML document; see the module docstring for the schema."""
    try:
        doc = yaml.safe_load(text) if text and text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"malformed YAML: {exc}") from None
    return parse_document(doc, preset)


def load_config(path: str, preset: Optional[str] = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, preset)


def override(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Re-validate with command-line style overrides.

    Recognised keys: ``kind``, ``out_dir``, ``seeds``, ``base_seed``, ``dt``,
    ``horizon``. ``None`` values are ignored.
    """
    doc = copy.deepcopy(cfg.document)
    preset = doc.pop("preset", None)
    mapping = {"seeds": ("seeds", "count"), "base_seed": ("seeds", "base"),
               "dt": ("grid", "dt"), "horizon": ("grid", "horizon")}
    for key, value in changes.items():
        if value is None:
            continue
        if key in ("kind", "out_dir"):
            doc[key] = value
        elif key in mapping:
            sect, sub = mapping[key]
            doc.setdefault(sect, {})[sub] = value
        else:
            raise ConfigError(key, "cannot be overridden")
    out = parse_document(doc)
    if preset is not None:
        out.document["preset"] = preset
    return out
