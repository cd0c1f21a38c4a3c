"""Experiment reports: per-trial records, aggregates, JSON and CSV output."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction

from scipy.stats import binomtest

SCHEMA_VERSION = 1
LOW_POWER_TRIALS = 10


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("need at least one trial")
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def aggregate(trials: list[dict]) -> dict:
    """Success rate with a Wilson 95% interval, plus mean and max of every
    numeric counter found in the trial records (``seed`` excluded)."""
    if not trials:
        raise ValueError("cannot aggregate an empty trial list")
    n = len(trials)
    wins = sum(1 for t in trials if t.get("success"))
    lo, hi = wilson_interval(wins, n)
    out = {
        "trials": n,
        "successes": wins,
        "successRate": wins / n,
        "wilson95": [lo, hi],
        "lowPower": n < LOW_POWER_TRIALS,
    }
    counters = sorted({k for t in trials for k, v in t.items() if k not in ("seed", "success") and isinstance(v, (int, float)) and not isinstance(v, bool)})
    for key in counters:
        vals = [t[key] for t in trials if isinstance(t.get(key), (int, float)) and not isinstance(t.get(key), bool)]
        out[f"mean_{key}"] = sum(vals) / len(vals)
        out[f"max_{key}"] = max(vals)
    return out


def _plain(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if hasattr(v, "item") and callable(v.item):  # numpy scalar
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class ExperimentReport:
    experiment_id: str
    parameters: dict
    trials: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    formula_values: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def finalize(self, expected_trials: int | None = None) -> "ExperimentReport":
        if expected_trials is not None and len(self.trials) != expected_trials:
            raise ValueError(f"expected {expected_trials} trials, got {len(self.trials)}")
        if any("seed" not in t for t in self.trials):
            raise ValueError("every trial must record its seed")
        if self.trials:
            self.aggregates = aggregate(self.trials)
        return self

    def to_json(self) -> dict:
        return _plain(
            {
                "schemaVersion": SCHEMA_VERSION,
                "experimentId": self.experiment_id,
                "parameters": self.parameters,
                "config": self.config,
                "trials": self.trials,
                "aggregates": self.aggregates,
                "formulaValues": self.formula_values,
            }
        )

    def trials_csv(self) -> str:
        buf = io.StringIO()
        keys: list[str] = []
        for t in self.trials:
            for k in t:
                if k not in keys:
                    keys.append(k)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for t in self.trials:
            w.writerow([_csv_cell(t.get(k)) for k in keys])
        return buf.getvalue()

    def write(self, path) -> tuple[str, str]:
        """Write ``path`` (JSON) and a CSV mirror next to it; returns both paths."""
        path = str(path)
        root = path[:-5] if path.endswith(".json") else path
        csv_path = root + ".csv"
        atomic_write(path, json.dumps(self.to_json(), indent=2) + "\n")
        atomic_write(csv_path, self.trials_csv())
        return path, csv_path


def _csv_cell(v):
    v = _plain(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v)
    return "" if v is None else v


def atomic_write(path, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_report(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schemaVersion") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema version {data.get('schemaVersion')!r}")
    return data
