"""Tuning instruments: confusion sequences, per-layer weight change, report files.

CSV files are pinned to '.' decimals, ',' separators and LF line endings so
golden-file comparisons stay byte-stable. All report emission is deterministic
for identical results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError
from . import svgplot


def weight_change(prev, new):
    """Mean absolute parameter delta per layer between two snapshots.

    Shared layers must match shapes exactly. The output layer is compared over
    the classes present in both snapshots, so expanding-head runs still report
    a head change (freshly added columns are not a change of anything).
    """
    if len(prev.weights) != len(new.weights):
        raise ContractError("snapshots come from different architectures (depth differs)")
    changes = []
    last = len(prev.weights) - 1
    for i in range(last):
        if prev.weights[i].shape != new.weights[i].shape:
            raise ContractError(f"layer {i} shapes differ: {prev.weights[i].shape} vs "
                                f"{new.weights[i].shape}")
        deltas = np.concatenate([(new.weights[i] - prev.weights[i]).ravel(),
                                 new.biases[i] - prev.biases[i]])
        changes.append(float(np.mean(np.abs(deltas))))
    common = [c for c in prev.class_ids if c in set(new.class_ids)]
    if prev.weights[last].shape[0] != new.weights[last].shape[0] or not common:
        raise ContractError("output layers share no comparable columns")
    pc = [prev.class_ids.index(c) for c in common]
    nc = [new.class_ids.index(c) for c in common]
    deltas = np.concatenate([(new.weights[last][:, nc] - prev.weights[last][:, pc]).ravel(),
                             new.biases[last][nc] - prev.biases[last][pc]])
    changes.append(float(np.mean(np.abs(deltas))))
    return changes


def saturation_alarm(confusion, threshold=0.5):
    """Predicted classes soaking up more than a threshold share of all predictions.

    A sharp vertical band in the confusion matrix is the usual sign of a
    saturated or under-regularized model; meaningful with more than two classes.
    """
    confusion = np.asarray(confusion)
    total = confusion.sum()
    if total == 0:
        return []
    shares = confusion.sum(axis=0) / total
    return [int(j) for j in np.flatnonzero(shares > threshold)]


# ---------------------------------------------------------------------------
# Report payloads and emission
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    """Everything needed to re-emit one run's reports."""

    strategy_id: str
    hyperparameters: dict
    run_index: int
    seed: int
    overall: list
    accuracy_matrix: list  # T x T, NaN for undefined cells
    confusions: list  # T matrices of ints
    weight_changes: list  # T rows, one mean |delta| per layer
    layer_names: list
    bwt: float | None
    final_accuracy: float
    class_sets: list
    config_echo: dict = field(default_factory=dict)

    kind = "run"


@dataclass
class AggregateRecord:
    """Across-run averages for one strategy."""

    strategy_id: str
    hyperparameters: dict
    runs: int
    mean_overall: list
    std_overall: list
    mean_matrix: list
    summed_confusions: list
    mean_weight_changes: list
    layer_names: list
    bwt_per_run: list
    final_per_run: list
    class_sets: list
    config_echo: dict = field(default_factory=dict)

    kind = "aggregate"

    @property
    def mean_bwt(self):
        vals = [b for b in self.bwt_per_run if b is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def mean_final(self):
        return float(np.mean(self.final_per_run))


@dataclass
class MtRunRecord:
    """One multi-task run: per-task accuracies under the task oracle."""

    strategy_id: str
    hyperparameters: dict
    run_index: int
    seed: int
    per_task: list
    average: float
    class_sets: list
    config_echo: dict = field(default_factory=dict)

    kind = "mt_run"


@dataclass
class MtAggregateRecord:
    """Across-run averages of a multi-task experiment."""

    strategy_id: str
    hyperparameters: dict
    runs: int
    mean_per_task: list
    average_per_run: list
    class_sets: list
    config_echo: dict = field(default_factory=dict)

    kind = "mt_aggregate"

    @property
    def mean_average(self):
        return float(np.mean(self.average_per_run))


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path, payload):
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _nan_to_none(matrix):
    return [[None if (isinstance(v, float) and math.isnan(v)) else v for v in row]
            for row in matrix]


def _none_to_nan(matrix):
    return [[math.nan if v is None else v for v in row] for row in matrix]


def _emit_curve(out, batches, mean, std, title):
    _write_csv(out / "accuracy_curve.csv", ["batch", "overall_accuracy", "std"],
               [[i + 1, float(mean[i]), float(std[i])] for i in range(batches)])
    xs = list(range(1, batches + 1))
    svgplot.write_line_chart(out / "accuracy_curve.svg",
                             [("overall", xs, [float(v) for v in mean])],
                             title=title, x_label="training batch",
                             y_label="test accuracy", y_range=(0.0, 1.0))


def _emit_matrix(out, matrix):
    t = len(matrix)
    _write_csv(out / "accuracy_matrix.csv",
               ["after_batch"] + [f"B{j + 1}" for j in range(t)],
               [[i + 1] + [float(v) if v is not None else math.nan for v in row]
                for i, row in enumerate(_nan_to_none(matrix))])


def _emit_confusions(out, confusions):
    for i, matrix in enumerate(confusions, start=1):
        c = len(matrix)
        _write_csv(out / f"confusion_B{i}.csv",
                   ["true_class"] + [f"pred_{j}" for j in range(c)],
                   [[r] + [int(v) for v in matrix[r]] for r in range(c)])


def _emit_weight_change(out, weight_changes, layer_names, title):
    _write_csv(out / "weight_change.csv", ["batch"] + list(layer_names),
               [[i + 1] + [float(v) for v in row] for i, row in enumerate(weight_changes)])
    xs = list(range(1, len(weight_changes) + 1))
    series = [(name, xs, [float(row[k]) for row in weight_changes])
              for k, name in enumerate(layer_names)]
    svgplot.write_line_chart(out / "weight_change.svg", series, title=title,
                             x_label="training batch", y_label="mean |delta|")


def emit_reports(record, out_dir):
    """Write the full report set for a run/aggregate/MT record; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if record.kind == "run":
        batches = len(record.overall)
        _emit_curve(out, batches, record.overall, [0.0] * batches,
                    f"{record.strategy_id} (run {record.run_index})")
        _emit_matrix(out, record.accuracy_matrix)
        _emit_confusions(out, record.confusions)
        _emit_weight_change(out, record.weight_changes, record.layer_names,
                            f"weight change by layer: {record.strategy_id}")
        _write_json(out / "summary.json", {
            "strategy": record.strategy_id,
            "hyperparameters": record.hyperparameters,
            "run_index": record.run_index,
            "seed": record.seed,
            "bwt": record.bwt,
            "final_accuracy": record.final_accuracy,
            "overall": [float(v) for v in record.overall],
            "batches": batches,
        })
    elif record.kind == "aggregate":
        batches = len(record.mean_overall)
        _emit_curve(out, batches, record.mean_overall, record.std_overall,
                    f"{record.strategy_id} (mean of {record.runs} runs)")
        _emit_matrix(out, record.mean_matrix)
        _emit_confusions(out, record.summed_confusions)
        _emit_weight_change(out, record.mean_weight_changes, record.layer_names,
                            f"mean weight change by layer: {record.strategy_id}")
        _write_json(out / "summary.json", {
            "strategy": record.strategy_id,
            "hyperparameters": record.hyperparameters,
            "runs": record.runs,
            "bwt": record.mean_bwt,
            "bwt_per_run": record.bwt_per_run,
            "final_accuracy": record.mean_final,
            "final_accuracy_per_run": record.final_per_run,
            "overall": [float(v) for v in record.mean_overall],
            "overall_std": [float(v) for v in record.std_overall],
            "batches": batches,
        })
    elif record.kind == "mt_run":
        _write_csv(out / "per_task_accuracy.csv", ["task", "classes", "accuracy"],
                   [[t + 1, ";".join(str(c) for c in record.class_sets[t]), float(a)]
                    for t, a in enumerate(record.per_task)])
        _write_json(out / "summary.json", {
            "strategy": record.strategy_id,
            "hyperparameters": record.hyperparameters,
            "run_index": record.run_index,
            "seed": record.seed,
            "average_accuracy": record.average,
            "per_task": [float(v) for v in record.per_task],
            "tasks": len(record.per_task),
        })
    elif record.kind == "mt_aggregate":
        _write_csv(out / "per_task_accuracy.csv", ["task", "classes", "mean_accuracy"],
                   [[t + 1, ";".join(str(c) for c in record.class_sets[t]), float(a)]
                    for t, a in enumerate(record.mean_per_task)])
        _write_json(out / "summary.json", {
            "strategy": record.strategy_id,
            "hyperparameters": record.hyperparameters,
            "runs": record.runs,
            "average_accuracy": record.mean_average,
            "average_per_run": [float(v) for v in record.average_per_run],
            "mean_per_task": [float(v) for v in record.mean_per_task],
            "tasks": len(record.mean_per_task),
        })
    else:
        raise ContractError(f"unknown record kind: {record.kind!r}")
    return sorted(p for p in out.iterdir() if p.is_file())


# ---------------------------------------------------------------------------
# Persistence (results.json round-trip for `report --from`)
# ---------------------------------------------------------------------------


def record_to_dict(record):
    if record.kind == "run":
        return {
            "kind": "run", "strategy": record.strategy_id,
            "hyperparameters": record.hyperparameters, "run_index": record.run_index,
            "seed": record.seed, "overall": [float(v) for v in record.overall],
            "accuracy_matrix": _nan_to_none(record.accuracy_matrix),
            "confusions": [[[int(v) for v in row] for row in m] for m in record.confusions],
            "weight_changes": [[float(v) for v in row] for row in record.weight_changes],
            "layer_names": list(record.layer_names), "bwt": record.bwt,
            "final_accuracy": record.final_accuracy,
            "class_sets": [[int(c) for c in s] for s in record.class_sets],
            "config_echo": record.config_echo,
        }
    if record.kind == "aggregate":
        return {
            "kind": "aggregate", "strategy": record.strategy_id,
            "hyperparameters": record.hyperparameters, "runs": record.runs,
            "mean_overall": [float(v) for v in record.mean_overall],
            "std_overall": [float(v) for v in record.std_overall],
            "mean_matrix": _nan_to_none(record.mean_matrix),
            "summed_confusions": [[[int(v) for v in row] for row in m]
                                  for m in record.summed_confusions],
            "mean_weight_changes": [[float(v) for v in row] for row in record.mean_weight_changes],
            "layer_names": list(record.layer_names),
            "bwt_per_run": record.bwt_per_run, "final_per_run": record.final_per_run,
            "class_sets": [[int(c) for c in s] for s in record.class_sets],
            "config_echo": record.config_echo,
        }
    if record.kind == "mt_run":
        return {
            "kind": "mt_run", "strategy": record.strategy_id,
            "hyperparameters": record.hyperparameters, "run_index": record.run_index,
            "seed": record.seed, "per_task": [float(v) for v in record.per_task],
            "average": record.average,
            "class_sets": [[int(c) for c in s] for s in record.class_sets],
            "config_echo": record.config_echo,
        }
    if record.kind == "mt_aggregate":
        return {
            "kind": "mt_aggregate", "strategy": record.strategy_id,
            "hyperparameters": record.hyperparameters, "runs": record.runs,
            "mean_per_task": [float(v) for v in record.mean_per_task],
            "average_per_run": [float(v) for v in record.average_per_run],
            "class_sets": [[int(c) for c in s] for s in record.class_sets],
            "config_echo": record.config_echo,
        }
    raise ContractError(f"unknown record kind: {record.kind!r}")


def record_from_dict(d):
    kind = d.get("kind")
    if kind == "run":
        return RunRecord(d["strategy"], d["hyperparameters"], d["run_index"], d["seed"],
                         d["overall"], _none_to_nan(d["accuracy_matrix"]), d["confusions"],
                         d["weight_changes"], d["layer_names"], d["bwt"],
                         d["final_accuracy"], [tuple(s) for s in d["class_sets"]],
                         d.get("config_echo", {}))
    if kind == "aggregate":
        return AggregateRecord(d["strategy"], d["hyperparameters"], d["runs"],
                               d["mean_overall"], d["std_overall"],
                               _none_to_nan(d["mean_matrix"]), d["summed_confusions"],
                               d["mean_weight_changes"], d["layer_names"],
                               d["bwt_per_run"], d["final_per_run"],
                               [tuple(s) for s in d["class_sets"]], d.get("config_echo", {}))
    if kind == "mt_run":
        return MtRunRecord(d["strategy"], d["hyperparameters"], d["run_index"], d["seed"],
                           d["per_task"], d["average"],
                           [tuple(s) for s in d["class_sets"]], d.get("config_echo", {}))
    if kind == "mt_aggregate":
        return MtAggregateRecord(d["strategy"], d["hyperparameters"], d["runs"],
                                 d["mean_per_task"], d["average_per_run"],
                                 [tuple(s) for s in d["class_sets"]],
                                 d.get("config_echo", {}))
    raise ContractError(f"unknown record kind in results file: {kind!r}")


def save_record(record, path):
    _write_json(path, record_to_dict(record))


def load_record(path):
    with open(path) as fh:
        return record_from_dict(json.load(fh))
