"""Experiment configuration: a versioned JSON file describing state, schedule and pipeline.

Example::

    {
      "version": 1,
      "pipeline": "single-mode",
      "state": {"kind": "squeezed_vacuum", "r": 0.5},
      "schedule": {"transmittances": [0.5, 1.0], "shots": 1000000, "seed": 7}
    }
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import core
from .entanglement import DEFAULT_MULTIMODE_TRANSMITTANCES, DEFAULT_TRANSMITTANCES
from .errors import ClicklessError, ConfigError

SCHEMA_VERSION = 1
PIPELINES = ("single-mode", "multimode", "negativity")
DEFAULT_SHOTS = 1_000_000
DEFAULT_TOTAL_SHOTS = 12_000_000

_TOP_KEYS = {"version", "pipeline", "state", "schedule", "two_copy", "sigmas"}
_SCHEDULE_KEYS = {"transmittances", "efficiency", "shots", "total_shots", "seed",
                  "multimode_transmittances", "weights"}
_STATE_PARAMS = {
    "vacuum": {"modes"},
    "thermal": {"nbar"},
    "squeezed_vacuum": {"r", "theta"},
    "coherent": {"alpha"},
    "two_mode_squeezed_vacuum": {"r"},
    "product": {"factors"},
    "explicit": {"covariance"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: str
    state: core.GaussianState
    transmittances: tuple
    efficiency: float
    shots: int
    seed: int
    multimode_transmittances: tuple
    weights: dict
    two_copy: bool
    sigmas: float
    raw: dict

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)

    def detected_state(self) -> core.GaussianState:
        """State reaching the detectors (after the optional two-copy interference)."""
        from .optics import prepare_minus_mode
        return prepare_minus_mode(self.state) if self.two_copy else self.state


def default_transmittances(n_modes: int) -> tuple:
    """2N equally spaced transmittances from 0.5 to 1, rounded to 4 decimals."""
    if n_modes == 1:
        return DEFAULT_TRANSMITTANCES
    return tuple(round(float(t), 4) for t in np.linspace(0.5, 1.0, 2 * n_modes))


def config_hash(raw: dict) -> str:
    """sha256 of the canonical (sorted-key, compact) JSON of the effective config."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _number(obj, key, path, default=None, lo=None, hi=None, lo_open=False):
    if key not in obj:
        if default is None:
            _fail(f"{path}.{key}", "required")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(f"{path}.{key}", f"expected a number, got {v!r}")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        _fail(f"{path}.{key}", f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        _fail(f"{path}.{key}", f"must be <= {hi}, got {v}")
    return float(v)


def _integer(obj, key, path, default, lo=1, hi=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < lo or (hi is not None and v > hi):
        _fail(f"{path}.{key}", f"expected an integer in [{lo}, {hi if hi is not None else 'inf'}), got {v!r}")
    return v


def _matrix(v, path, shape=None):
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError):
        _fail(path, "expected a numeric array")
    if shape is not None and a.ndim != len(shape):
        _fail(path, f"expected a {len(shape)}-d array")
    if not np.all(np.isfinite(a)):
        _fail(path, "entries must be finite")
    return a


def _unknown(obj, allowed, path):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        _fail(path, f"unknown keys {extra}")


def parse_state(spec, path="state") -> core.GaussianState:
    if not isinstance(spec, dict):
        _fail(path, "expected an object")
    kind = spec.get("kind")
    if kind not in _STATE_PARAMS:
        _fail(f"{path}.kind", f"expected one of {sorted(_STATE_PARAMS)}, got {kind!r}")
    allowed = _STATE_PARAMS[kind] | {"kind", "displacement"}
    _unknown(spec, allowed, path)
    if kind == "vacuum":
        state = core.vacuum(_integer(spec, "modes", path, 1))
    elif kind == "thermal":
        state = core.thermal(_number(spec, "nbar", path, lo=0))
    elif kind == "squeezed_vacuum":
        state = core.squeezed_vacuum(_number(spec, "r", path), _number(spec, "theta", path, 0.0))
    elif kind == "coherent":
        a = spec.get("alpha")
        if isinstance(a, (int, float)) and not isinstance(a, bool):
            alpha = complex(a)
        elif isinstance(a, list) and len(a) == 2:
            alpha = complex(*_matrix(a, f"{path}.alpha", (2,)))
        else:
            _fail(f"{path}.alpha", "expected a number or [re, im]")
        state = core.coherent(alpha)
    elif kind == "two_mode_squeezed_vacuum":
        state = core.two_mode_squeezed_vacuum(_number(spec, "r", path))
    elif kind == "product":
        factors = spec.get("factors")
        if not isinstance(factors, list) or not factors:
            _fail(f"{path}.factors", "expected a non-empty list of state objects")
        state = core.tensor(*[parse_state(f, f"{path}.factors[{j}]") for j, f in enumerate(factors)])
    else:
        if "covariance" not in spec:
            _fail(f"{path}.covariance", "required")
        g = _matrix(spec["covariance"], f"{path}.covariance", (0, 0))
        state = core.make_state(np.zeros(g.shape[0]), g)
    if "displacement" in spec:
        xi = _matrix(spec["displacement"], f"{path}.displacement", (0,))
        state = core.make_state(xi, state.gamma)
    return state


def _grid(obj, key, path, default):
    if key not in obj:
        return tuple(default)
    v = obj[key]
    if not isinstance(v, list) or not v:
        _fail(f"{path}.{key}", "expected a non-empty list")
    for j, t in enumerate(v):
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not 0 < t <= 1:
            _fail(f"{path}.{key}[{j}]", f"transmittance must lie in (0, 1], got {t!r}")
    return tuple(float(t) for t in v)


def parse_config(raw: dict, seed: int | None = None) -> ExperimentConfig:
    """Validate decoded JSON and build the experiment; ``seed`` overrides the schedule seed.

    Raises:
        ConfigError: with the dotted path of the offending field.
        Unphysical: the state violates the uncertainty principle.
    """
    if not isinstance(raw, dict):
        _fail("<root>", "expected a JSON object")
    raw = copy.deepcopy(raw)
    _unknown(raw, _TOP_KEYS, "<root>")
    if raw.get("version") != SCHEMA_VERSION:
        _fail("version", f"expected {SCHEMA_VERSION}, got {raw.get('version')!r}")
    pipeline = raw.get("pipeline")
    if pipeline not in PIPELINES:
        _fail("pipeline", f"expected one of {list(PIPELINES)}, got {pipeline!r}")
    if "state" not in raw:
        _fail("state", "required")
    try:
        state = parse_state(raw["state"])
    except ConfigError:
        raise
    except ClicklessError as exc:
        if exc.exit_code == 1:
            raise ConfigError(f"state: {exc}") from None
        raise

    sched = raw.setdefault("schedule", {})
    if not isinstance(sched, dict):
        _fail("schedule", "expected an object")
    _unknown(sched, _SCHEDULE_KEYS, "schedule")
    if seed is not None:
        sched["seed"] = int(seed)
    seed_v = _integer(sched, "seed", "schedule", 0, lo=0, hi=2**64 - 1)

    n = state.mode_count
    if pipeline == "single-mode" and n != 1:
        _fail("state", f"single-mode pipeline needs a 1-mode state, got {n} modes")
    if pipeline == "negativity" and n != 2:
        _fail("state", f"negativity pipeline needs a 2-mode state, got {n} modes")
    if pipeline == "negativity":
        shots = _integer(sched, "total_shots", "schedule", DEFAULT_TOTAL_SHOTS)
        if "shots" in sched:
            _fail("schedule.shots", "negativity pipeline takes schedule.total_shots")
    else:
        shots = _integer(sched, "shots", "schedule", DEFAULT_SHOTS)
        for key in ("total_shots", "weights", "multimode_transmittances"):
            if key in sched:
                _fail(f"schedule.{key}", "only used by the negativity pipeline")
    grid_default = DEFAULT_TRANSMITTANCES if pipeline == "negativity" else default_transmittances(n)
    weights = sched.get("weights", {})
    if not isinstance(weights, dict):
        _fail("schedule.weights", "expected an object of label: weight")
    for k in weights:
        _number(weights, k, "schedule.weights", lo=0, lo_open=True)

    two_copy = raw.get("two_copy", True)
    if not isinstance(two_copy, bool):
        _fail("two_copy", f"expected true or false, got {two_copy!r}")
    if pipeline == "negativity" and not two_copy:
        _fail("two_copy", "the negativity protocol always interferes two copies")
    return ExperimentConfig(
        pipeline=pipeline,
        state=state,
        transmittances=_grid(sched, "transmittances", "schedule", grid_default),
        efficiency=_number(sched, "efficiency", "schedule", 1.0, lo=0, hi=1, lo_open=True),
        shots=shots,
        seed=seed_v,
        multimode_transmittances=_grid(sched, "multimode_transmittances", "schedule",
                                       DEFAULT_MULTIMODE_TRANSMITTANCES),
        weights={k: float(v) for k, v in weights.items()},
        two_copy=two_copy,
        sigmas=_number(raw, "sigmas", "sigmas", 3.0, lo=0),
        raw=raw,
    )


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    """Read and validate a config file; JSON syntax errors report line and column."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(raw, seed)
