"""CSV and JSON artifacts exchanged between pipeline stages.

Every CSV starts with one ``# manifest: {...}`` comment line recording the
command that produced it. Floats are written with ``repr`` so files round-trip
exactly.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigurationError
from .evaluation import SummaryReport
from .policy import PolicyWeights
from .predict import PopulationParams
from .records import AGENTS, GroundTruthRecord, RunRecord
from .stats import FeatureVector, SweepCell

MANIFEST_PREFIX = "# manifest: "

RUN_COLUMNS = ("level_id", "seed", "agent", "passed", "moves_used", "moves_left",
               "goals_cleared_fraction", "agent_budget")
TRUTH_COLUMNS = ("level_id", "pass_rate", "churn_rate")
SWEEP_COLUMNS = ("fraction", "feature", "rho")
PREDICTION_COLUMNS = ("level_id", "pass_pred", "churn_pred", "pass_true", "churn_true")
REPORT_COLUMNS = ("configuration", "predictor", "agent", "feature_set",
                  "pass_mse_mean", "pass_mse_std", "churn_mse_mean", "churn_mse_std",
                  "pass_mse_folds", "churn_mse_folds")


class SchemaError(ConfigurationError):
    """A file does not have the expected columns or values."""


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps_csv(columns: Sequence[str], rows: Iterable[Sequence], manifest: Mapping | None = None) -> str:
    buf = io.StringIO()
    if manifest is not None:
        buf.write(MANIFEST_PREFIX + json.dumps(manifest, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, columns, rows, manifest=None) -> None:
    Path(path).write_text(dumps_csv(columns, rows, manifest))


def loads_csv(text: str, expected: Sequence[str] | None = None, prefix: Sequence[str] | None = None
              ) -> tuple[dict | None, list[str], list[dict]]:
    """Parse manifest, header and rows; check the header against ``expected`` or ``prefix``."""
    lines = text.splitlines()
    manifest = None
    if lines and lines[0].startswith(MANIFEST_PREFIX):
        try:
            manifest = json.loads(lines[0][len(MANIFEST_PREFIX):])
        except json.JSONDecodeError as exc:
            raise SchemaError(f"bad manifest line: {exc}") from exc
        lines = lines[1:]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("missing CSV header") from None
    if expected is not None and tuple(header) != tuple(expected):
        raise SchemaError(f"expected columns {list(expected)}, got {header}")
    if prefix is not None and tuple(header[: len(prefix)]) != tuple(prefix):
        raise SchemaError(f"expected leading columns {list(prefix)}, got {header}")
    rows = []
    for n, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise SchemaError(f"row {n}: {len(row)} fields, header has {len(header)}")
        rows.append(dict(zip(header, row)))
    return manifest, header, rows


def read_csv(path, expected=None, prefix=None):
    return loads_csv(Path(path).read_text(), expected, prefix)


def _convert(fn, value, what):
    try:
        return fn(value)
    except (TypeError, ValueError, ConfigurationError) as exc:
        raise SchemaError(f"bad {what} value {value!r}: {exc}") from exc


def _bool(s: str) -> bool:
    if s not in ("0", "1"):
        raise ValueError("expected 0 or 1")
    return s == "1"


# --------------------------------------------------------------------------- runs


def run_rows(records: Iterable[RunRecord]):
    for r in records:
        yield (r.level_id, r.seed, r.agent, r.passed, r.moves_used, r.moves_left,
               r.goals_cleared_fraction, r.agent_budget)


def write_runs(path, records, manifest=None) -> None:
    write_csv(path, RUN_COLUMNS, run_rows(records), manifest)


def _run_from_row(row: dict) -> RunRecord:
    if row["agent"] not in AGENTS:
        raise SchemaError(f"unknown agent {row['agent']!r}")
    return RunRecord(int(row["level_id"]), row["agent"], int(row["seed"]), _bool(row["passed"]),
                     int(row["moves_used"]), int(row["moves_left"]),
                     float(row["goals_cleared_fraction"]), int(row["agent_budget"]))


def read_runs(path) -> list[RunRecord]:
    _, _, rows = read_csv(path, RUN_COLUMNS)
    return [_convert(_run_from_row, row, "run") for row in rows]


# --------------------------------------------------------------------------- features and sweep


def write_features(path, vectors: Iterable[FeatureVector], manifest=None) -> None:
    vectors = list(vectors)
    if not vectors:
        raise ConfigurationError("no feature vectors to write")
    names = vectors[0].names
    rows = [(v.level_id, v.feature_set) + tuple(v.values[n] for n in names) for v in vectors]
    write_csv(path, ("level_id", "feature_set") + names, rows, manifest)


def read_features(path) -> dict[int, FeatureVector]:
    _, header, rows = read_csv(path, prefix=("level_id", "feature_set"))
    names = header[2:]
    out = {}
    for row in rows:
        lid = _convert(int, row["level_id"], "level_id")
        vals = {n: _convert(float, row[n], n) for n in names}
        out[lid] = FeatureVector(lid, row["feature_set"], vals)
    return out


def write_sweep(path, cells: Iterable[SweepCell], manifest=None) -> None:
    write_csv(path, SWEEP_COLUMNS, ((c.fraction, c.feature, c.rho) for c in cells), manifest)


def read_sweep(path) -> list[SweepCell]:
    _, _, rows = read_csv(path, SWEEP_COLUMNS)
    return [SweepCell(_convert(float, r["fraction"], "fraction"), r["feature"],
                      _convert(float, r["rho"], "rho")) for r in rows]


# --------------------------------------------------------------------------- truth, predictions, reports


def write_truth(path, records: Iterable[GroundTruthRecord], manifest=None) -> None:
    write_csv(path, TRUTH_COLUMNS, ((r.level_id, r.pass_rate, r.churn_rate) for r in records), manifest)


def read_truth(path) -> dict[int, GroundTruthRecord]:
    _, _, rows = read_csv(path, TRUTH_COLUMNS)
    recs = [_convert(lambda r: GroundTruthRecord(int(r["level_id"]), float(r["pass_rate"]),
                                                 float(r["churn_rate"])), row, "truth") for row in rows]
    return {r.level_id: r for r in recs}


def write_predictions(path, rows, manifest=None) -> None:
    write_csv(path, PREDICTION_COLUMNS, rows, manifest)


def report_row(rep: SummaryReport) -> tuple:
    folds = lambda xs: ";".join(repr(float(x)) for x in xs)
    return (rep.tag, rep.predictor, rep.agent, rep.feature_set, rep.pass_mu, rep.pass_sigma,
            rep.churn_mu, rep.churn_sigma, folds(rep.pass_folds), folds(rep.churn_folds))


def write_report(path, reports: Iterable[SummaryReport], manifest=None) -> None:
    write_csv(path, REPORT_COLUMNS, (report_row(r) for r in reports), manifest)


def read_report(path) -> list[SummaryReport]:
    _, _, rows = read_csv(path, REPORT_COLUMNS)
    parse = lambda s: tuple(float(x) for x in s.split(";")) if s else ()
    return [SummaryReport(r["predictor"], r["agent"], r["feature_set"],
                          _convert(parse, r["pass_mse_folds"], "folds"),
                          _convert(parse, r["churn_mse_folds"], "folds")) for r in rows]


# --------------------------------------------------------------------------- JSON artifacts


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def write_weights(path, weights: Mapping[int, PolicyWeights], manifest=None) -> None:
    levels = [{"level_id": lid, "weights": list(w.weights), "temperature": w.temperature, "seed": w.seed}
              for lid, w in sorted(weights.items())]
    _write_json(path, {"manifest": manifest, "levels": levels})


def read_weights(path) -> dict[int, PolicyWeights]:
    data = _read_json(path)
    try:
        out = {}
        for e in data["levels"]:
            extra = set(e) - {"level_id", "weights", "temperature", "seed"}
            if extra:
                raise SchemaError(f"unknown weight keys {sorted(extra)}")
            lid = int(e["level_id"])
            out[lid] = PolicyWeights(tuple(e["weights"]), float(e["temperature"]), lid, e.get("seed"))
        return out
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed weights file ({exc})") from exc


def write_params(path, params: PopulationParams, manifest=None) -> None:
    _write_json(path, {"manifest": manifest, "params": params.to_dict()})


def read_params(path) -> PopulationParams:
    data = _read_json(path)
    try:
        return PopulationParams.from_dict(data["params"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{path}: malformed params file ({exc})") from exc
