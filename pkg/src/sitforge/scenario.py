"""Protocol execution: class-disjoint batch splitting, SIT/MT loops, accuracy records.

A run is strictly sequential over its batches; the fixed test set (all classes,
including the still-unseen ones) is evaluated after every batch, which is what
makes early accuracies top out at the fraction of classes seen so far.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, TrainingDiverged
from .network import forward
from .strategies import run_strategy_batch


@dataclass
class TrainingBatch:
    """One incremental batch: patterns of classes never seen before."""

    inputs: np.ndarray
    labels: np.ndarray
    class_ids: tuple
    index: int  # 1-based

    @property
    def size(self):
        return len(self.inputs)


@dataclass
class TestSet:
    inputs: np.ndarray
    labels: np.ndarray


@dataclass
class ScenarioSpec:
    mode: str = "SIT"  # "SIT" | "MT"
    update_type: str = "NC"
    class_schedule: list = field(default_factory=lambda: [2, 2, 2, 2, 2])
    class_ordering_seed: int = 0
    test_set_policy: str = "fixed"  # "fixed" | "expanding"

    def validate(self):
        if self.mode not in ("SIT", "MT"):
            raise ConfigError(f"unknown scenario mode: {self.mode!r}")
        if self.update_type != "NC":
            raise ConfigError("only the new-classes (NC) update content type is supported")
        if self.test_set_policy not in ("fixed", "expanding"):
            raise ConfigError(f"unknown test set policy: {self.test_set_policy!r}")
        if not self.class_schedule or any(int(s) < 1 for s in self.class_schedule):
            raise ConfigError("class schedule entries must be positive")


@dataclass
class AccuracyMatrix:
    """matrix[i][j]: accuracy on batch-j test classes after training batch i (0-based)."""

    matrix: np.ndarray
    overall: np.ndarray


@dataclass
class SitResult:
    accuracy: AccuracyMatrix
    confusions: list  # one (C, C) int matrix per batch
    snapshots: list  # initial model snapshot + one per batch
    class_sets: list  # class ids per batch, in training order


@dataclass
class MtResult:
    per_task: list
    average: float
    class_sets: list


def split_nc(dataset, spec):
    """Partition a dataset into class-disjoint batches following the schedule.

    Classes are permuted by the scenario seed, then dealt out in schedule-sized
    groups; pattern order inside each batch is shuffled from the same seed. The
    test set always contains every class.
    """
    spec.validate()
    schedule = [int(s) for s in spec.class_schedule]
    if sum(schedule) > dataset.n_classes:
        raise ConfigError(f"schedule covers {sum(schedule)} classes but the dataset has "
                          f"{dataset.n_classes}")
    if sum(schedule) != dataset.n_classes:
        raise ConfigError("schedule must cover every dataset class (the fixed test set "
                          "includes all of them)")
    rng = np.random.default_rng(spec.class_ordering_seed)
    order = rng.permutation(dataset.n_classes)
    batches = []
    cursor = 0
    for i, count in enumerate(schedule, start=1):
        classes = tuple(int(c) for c in order[cursor:cursor + count])
        cursor += count
        x, y = dataset.train_patterns(classes)
        perm = rng.permutation(len(x))
        batches.append(TrainingBatch(x[perm], y[perm], classes, i))
    test_x, test_y = dataset.test_patterns()
    return batches, TestSet(test_x, test_y)


def evaluate(net, inputs, labels, n_classes, policy="fixed", classes_seen=None):
    """Score a model on test patterns; returns (accuracy, confusion matrix).

    Fixed policy scores everything against the full class universe (unseen
    classes can only be right by chance); expanding policy restricts the test
    set to the classes seen so far. Predictions are the argmax of the softmax
    over the classes the head represents.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if policy == "expanding":
        if classes_seen is None:
            raise ConfigError("expanding evaluation needs the set of classes seen so far")
        mask = np.isin(labels, np.asarray(sorted(classes_seen)))
        inputs, labels = inputs[mask], labels[mask]
    elif policy != "fixed":
        raise ConfigError(f"unknown test set policy: {policy!r}")
    if len(inputs) == 0:
        raise ConfigError("no test patterns to evaluate")
    logits, _ = forward(net, inputs)
    pred = np.asarray(net.class_ids, dtype=np.int64)[np.argmax(logits, axis=1)]
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (labels, pred), 1)
    accuracy = float(np.trace(confusion)) / float(confusion.sum())
    return accuracy, confusion


def _per_batch_accuracies(confusion, class_sets):
    out = np.full(len(class_sets), np.nan)
    for j, classes in enumerate(class_sets):
        rows = list(classes)
        total = confusion[rows, :].sum()
        if total > 0:
            out[j] = sum(confusion[c, c] for c in rows) / total
    return out


def run_sit(strategy, net, batches, test_set, spec, plan, n_classes):
    """Sequential single-incremental-task run with per-batch evaluation.

    Records the full accuracy matrix, the confusion matrix sequence, and a
    parameter snapshot of the evaluation model after every batch. On training
    divergence the partial result is attached to the raised error.
    """
    spec.validate()
    t = len(batches)
    class_sets = [b.class_ids for b in batches]
    matrix = np.full((t, t), np.nan)
    overall = np.full(t, np.nan)
    confusions = []
    baseline = net.snapshot()
    if strategy.manages_head:
        # consolidated heads start at zero, whatever the live head holds
        baseline.weights[-1] = np.zeros_like(baseline.weights[-1])
        baseline.biases[-1] = np.zeros_like(baseline.biases[-1])
    snapshots = [baseline]
    seen = set()
    for i, batch in enumerate(batches):
        seen.update(batch.class_ids)
        try:
            net, eval_net = run_strategy_batch(strategy, net, batch, plan)
        except TrainingDiverged as exc:
            exc.partial_result = SitResult(
                AccuracyMatrix(matrix[:i], overall[:i]), confusions, snapshots, class_sets)
            raise
        acc, confusion = evaluate(eval_net, test_set.inputs, test_set.labels,
                                  n_classes, spec.test_set_policy, seen)
        overall[i] = acc
        matrix[i] = _per_batch_accuracies(confusion, class_sets)
        confusions.append(confusion)
        snapshots.append(eval_net.snapshot())
    return SitResult(AccuracyMatrix(matrix, overall), confusions, snapshots, class_sets)


def evaluate_task(net, inputs, labels, task_classes):
    """Accuracy of one task against its own head, task membership known."""
    labels = np.asarray(labels, dtype=np.int64)
    if not set(np.unique(labels)).issubset(set(int(c) for c in task_classes)):
        raise ContractError("test patterns evaluated against the wrong task head")
    logits, _ = forward(net, np.asarray(inputs, dtype=np.float64))
    pred = np.asarray(net.class_ids, dtype=np.int64)[np.argmax(logits, axis=1)]
    return float(np.mean(pred == labels))


def run_mt(strategy, net, batches, test_set, plan):
    """Multi-task run: one disjoint head per batch, shared layers in common.

    Each task head is freshly initialized, trained through the strategy's
    normal lifecycle, then stored; at the end every task is scored with its own
    head on its own classes only. Strategies that manage the output head
    themselves are single-incremental-task constructions and are rejected.
    """
    if strategy.manages_head or strategy.id == "cumulative":
        raise ConfigError(f"strategy {strategy.id!r} is SIT-specific and has no MT form")
    if getattr(strategy, "scope", "shared") != "shared":
        raise ConfigError("MT runs need importance scoped to shared tensors "
                          "(heads are swapped per task)")
    heads = []
    for batch in batches:
        net.reinit_head(batch.class_ids)
        net, _ = run_strategy_batch(strategy, net, batch, plan)
        heads.append((net.head.W.copy(), net.head.b.copy(), list(net.class_ids)))
    labels = np.asarray(test_set.labels, dtype=np.int64)
    per_task = []
    for batch, (w, b, ids) in zip(batches, heads):
        task_net = net.with_head(w, b, ids)
        mask = np.isin(labels, np.asarray(batch.class_ids))
        per_task.append(evaluate_task(task_net, test_set.inputs[mask], labels[mask],
                                      batch.class_ids))
    return MtResult(per_task, float(np.mean(per_task)), [b.class_ids for b in batches])


def backward_transfer(matrix):
    """Average accuracy change on earlier batches after the last one is learned.

    mean over j < T of (final accuracy on batch-j classes - accuracy right
    after batch j). Negative under forgetting.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    t = matrix.shape[0]
    if t < 2:
        raise ConfigError("backward transfer needs at least two batches")
    return float(np.mean([matrix[t - 1, j] - matrix[j, j] for j in range(t - 1)]))
