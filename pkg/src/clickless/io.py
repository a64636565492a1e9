"""Tally CSV, observation JSON and report serialization."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidParameter
from .estimator import Observation
from .optics import TallyRow, TallyTable

TALLY_COLUMNS = ("label", "T", "eta", "phi", "shots", "no_click_count")


def tally_to_csv(table: TallyTable) -> str:
    """CSV text with a mandatory header; floats use ``repr`` so they round-trip exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TALLY_COLUMNS)
    for r in table.rows:
        writer.writerow([r.label, repr(float(r.T)), repr(float(r.eta)), repr(float(r.phi)),
                         int(r.shots), int(r.no_click_count)])
    return buf.getvalue()


def write_tally_csv(table: TallyTable, path) -> None:
    Path(path).write_text(tally_to_csv(table), encoding="utf-8")


def _field(row: dict, name: str, kind, where: str):
    raw = row.get(name)
    if raw is None or raw == "":
        raise ConfigError(f"{where}: missing value for column {name!r}")
    try:
        value = kind(raw)
    except ValueError:
        raise ConfigError(f"{where}: column {name!r} has non-{kind.__name__} value {raw!r}") from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{where}: column {name!r} is not finite")
    return value


def parse_tally_csv(text: str, seed: int | None = None) -> TallyTable:
    """Parse tally CSV text.

    Raises:
        ConfigError: on a missing or wrong header or any malformed row; the
            message names the offending line.
    """
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ConfigError("tally CSV is empty (a header row is required)")
    header = tuple(h.strip() for h in reader.fieldnames)
    if header != TALLY_COLUMNS:
        raise ConfigError(f"tally CSV line 1: header must be {','.join(TALLY_COLUMNS)}, got {','.join(header)}")
    rows = []
    for raw in reader:
        where = f"tally CSV line {reader.line_num}"
        if None in raw or any(v is None for v in raw.values()):
            raise ConfigError(f"{where}: expected {len(TALLY_COLUMNS)} columns")
        raw = {k.strip(): v.strip() for k, v in raw.items()}
        try:
            rows.append(TallyRow(
                raw["label"],
                _field(raw, "T", float, where),
                _field(raw, "eta", float, where),
                _field(raw, "phi", float, where),
                _field(raw, "shots", int, where),
                _field(raw, "no_click_count", int, where),
            ))
        except InvalidParameter as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if not rows:
        raise ConfigError("tally CSV has a header but no rows")
    return TallyTable(tuple(rows), seed)


def read_tally_csv(path, seed: int | None = None) -> TallyTable:
    return parse_tally_csv(Path(path).read_text(encoding="utf-8"), seed)


def parse_observations(data) -> list[Observation]:
    """Observation records from decoded JSON.

    Accepts a list (or ``{"observations": [...]}``) of objects with keys
    ``T``, ``eta`` (default 1), ``P``, optional ``shots`` (absent or null means
    exact), ``label`` and ``phi``.
    """
    if isinstance(data, dict):
        data = data.get("observations")
    if not isinstance(data, list) or not data:
        raise ConfigError("observations JSON must be a non-empty list of rows")
    out = []
    for j, row in enumerate(data):
        where = f"observations[{j}]"
        if not isinstance(row, dict):
            raise ConfigError(f"{where}: expected an object")
        unknown = set(row) - {"label", "T", "eta", "P", "shots", "phi"}
        if unknown:
            raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
        try:
            T = float(row["T"])
            p = float(row["P"])
            eta = float(row.get("eta", 1.0))
            phi = float(row.get("phi", 0.0))
        except KeyError as exc:
            raise ConfigError(f"{where}: missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: T, eta, P and phi must be numbers") from None
        shots = row.get("shots")
        if shots is not None and (not isinstance(shots, int) or isinstance(shots, bool) or shots < 1):
            raise ConfigError(f"{where}: shots must be a positive integer or null")
        if not 0 < T <= 1 or not 0 < eta <= 1:
            raise ConfigError(f"{where}: T and eta must lie in (0, 1]")
        out.append(Observation(T, eta, p, shots, str(row.get("label", f"T#{j}")), phi))
    return out


def read_observations_json(path) -> list[Observation]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_observations(data)


def tally_records(table: TallyTable) -> list[dict]:
    return [dict(zip(TALLY_COLUMNS, (r.label, r.T, r.eta, r.phi, r.shots, r.no_click_count)))
            for r in table.rows]


def to_jsonable(obj):
    """Plain JSON types; NaN becomes null and infinities the strings "inf"/"-inf"."""
    if isinstance(obj, enum.Enum):
        return to_jsonable(obj.value)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, trailing newline)."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"
