"""The eight continual-learning strategies behind one per-batch lifecycle.

Each strategy owns its state (captured predictions, importance accumulators,
consolidated head weights) and implements run_batch(net, batch, plan), which
returns the updated training net plus the model to evaluate with. For the
copy-weights family the evaluation model carries the consolidated head, never
the temporary one being trained.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import softmax
from .errors import ConfigError, ContractError
from .network import Regularizer, backward, cross_entropy_soft, forward, train_batch


def clip_importance(values, cap):
    """Clamp importance into [0, cap]; saturation compensates averaging."""
    return np.clip(values, 0.0, cap)


# ---------------------------------------------------------------------------
# Output-stability targets (soft-target fusion)
# ---------------------------------------------------------------------------


@dataclass
class LwfState:
    """Per-batch captured predictions plus the stability blend schedule."""

    seen_counts: list = field(default_factory=list)
    stored_targets: np.ndarray | None = None
    blend: float = 0.0
    map_params: tuple | None = None  # (in_lo, in_hi, out_lo, out_hi) linear map


def lwf_lambda(batch_index, counts, map_params=None):
    """Stability blend for a batch: 0 for the first, then the mapped share of the past.

    For batch i > 1 the raw value is 1 - n_i / sum(n_j, j <= i); map_params, when
    given, applies a linear shift/stretch (in_lo, in_hi) -> (out_lo, out_hi).
    Outputs falling outside [0, 1] are clamped with a warning.
    """
    if batch_index < 1:
        raise ConfigError("batch index starts at 1")
    if len(counts) < batch_index:
        raise ConfigError("need a pattern count for every batch up to the current one")
    if any(c <= 0 for c in counts[:batch_index]):
        raise ConfigError("pattern counts must be positive")
    if batch_index == 1:
        return 0.0
    raw = 1.0 - counts[batch_index - 1] / sum(counts[:batch_index])
    if map_params is None:
        value = raw
    else:
        in_lo, in_hi, out_lo, out_hi = map_params
        if in_hi == in_lo:
            raise ConfigError("degenerate blend map: in_lo == in_hi")
        value = out_lo + (raw - in_lo) * (out_hi - out_lo) / (in_hi - in_lo)
    if value < 0.0 or value > 1.0:
        warnings.warn(f"blend {value:.4f} outside [0, 1]; clamped", stacklevel=2)
        value = min(max(value, 0.0), 1.0)
    return value


def lwf_capture(net, inputs):
    """Record the net's softmax predictions for a batch, before any training on it."""
    if net._in_training:
        raise ContractError("capture must happen before training starts on the batch")
    logits, _ = forward(net, np.asarray(inputs, dtype=np.float64))
    return softmax(logits)


def lwf_fuse(onehot, captured, blend):
    """Weighted soft target: (1 - blend) * one-hot + blend * captured prediction."""
    if not 0.0 <= blend <= 1.0:
        raise ConfigError("blend must lie in [0, 1]")
    onehot = np.asarray(onehot, dtype=np.float64)
    captured = np.asarray(captured, dtype=np.float64)
    if onehot.shape != captured.shape:
        raise ValueError(f"shape mismatch: {onehot.shape} vs {captured.shape}")
    return (1.0 - blend) * onehot + blend * captured


# ---------------------------------------------------------------------------
# Importance state (gradient-variance and path-integral flavors)
# ---------------------------------------------------------------------------


class ImportanceState:
    """Accumulated per-parameter importance, its clipped form, and the anchors.

    Stores exactly one importance and one anchor value per covered parameter.
    scope="all" covers every tensor (standalone regularization); scope="shared"
    leaves the head out (the combined architectural strategies regularize only
    the layers below it).
    """

    def __init__(self, net, mode, strength, max_importance=0.001, scope="all"):
        if mode not in ("ewc", "si"):
            raise ConfigError(f"unknown importance mode: {mode!r}")
        if scope not in ("all", "shared"):
            raise ConfigError(f"unknown importance scope: {scope!r}")
        arrays = net.param_arrays()
        self.mode = mode
        self.scope = scope
        self.strength = strength
        self.max_importance = max_importance
        self.indices = [k for k in range(len(arrays))
                        if scope == "all" or net.is_shared_tensor(k)]
        self.f = {k: np.zeros_like(arrays[k]) for k in self.indices}
        self.anchor = {k: np.zeros_like(arrays[k]) for k in self.indices}
        self.batch_count = 0

    @property
    def f_hat(self):
        """Clipped importance; averaged over batches in ewc mode, raw sum in si mode."""
        if self.batch_count == 0:
            return {k: np.zeros_like(v) for k, v in self.f.items()}
        if self.mode == "ewc":
            return {k: clip_importance(v / self.batch_count, self.max_importance)
                    for k, v in self.f.items()}
        return {k: clip_importance(v, self.max_importance) for k, v in self.f.items()}

    def regularizer(self):
        """Decay terms for the next batch, or None before the first consolidation."""
        if self.batch_count == 0:
            return None
        return Regularizer(importance=self.f_hat, anchor=self.anchor, strength=self.strength)

    def state_size(self):
        return sum(v.size for v in self.f.values()) + sum(v.size for v in self.anchor.values())

    def _take_anchor(self, net):
        arrays = net.param_arrays()
        for k in self.indices:
            self.anchor[k] = arrays[k].copy()


def ewc_fisher_diagonal(net, inputs, labels, granularity="minibatch", minibatch_size=32):
    """Diagonal Fisher estimate: per-parameter variance of the loss gradient.

    granularity "pattern" takes one gradient per pattern; "minibatch" uses the
    mean gradient of consecutive chunks (cheaper, no observed accuracy cost).
    Population variance over the units; needs at least two of them.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels)
    n = len(inputs)
    if granularity == "pattern":
        units = [np.array([i]) for i in range(n)]
    elif granularity == "minibatch":
        units = [np.arange(s, min(s + minibatch_size, n)) for s in range(0, n, minibatch_size)]
    else:
        raise ConfigError(f"unknown fisher granularity: {granularity!r}")
    if len(units) < 2:
        raise ConfigError("variance needs at least 2 gradient units")
    onehot = net.one_hot(labels)
    per_unit = []
    for idx in units:
        logits, cache = forward(net, inputs[idx])
        probs = softmax(logits)
        _, logit_grad = cross_entropy_soft(probs, onehot[idx])
        per_unit.append(backward(net, cache, logit_grad / len(idx)).tensors)
    return [np.var(np.stack([u[k] for u in per_unit]), axis=0)
            for k in range(len(per_unit[0]))]


def ewc_consolidate(state, f_batch, net):
    """Fold one batch's Fisher estimate into the running importance.

    The accumulator only grows; the clipped form divides by the number of
    consolidated batches, with the cap soaking up weights that matter for a
    single batch. Anchors move to the current parameters.
    """
    if state.mode != "ewc":
        raise ContractError("consolidating fisher importance into a non-ewc state")
    for k in state.indices:
        state.f[k] = state.f[k] + f_batch[k]
    state.batch_count += 1
    state._take_anchor(net)
    return state


class SiTrajectory:
    """Running per-step loss-decrease credit over one batch's weight trajectory."""

    def __init__(self, net, damping=1e-7, scope="all"):
        if damping <= 0:
            raise ConfigError("damping must be positive")
        arrays = net.param_arrays()
        self.damping = damping
        self.indices = [k for k in range(len(arrays))
                        if scope == "all" or net.is_shared_tensor(k)]
        self.start = {k: arrays[k].copy() for k in self.indices}
        self.running_sum = {k: np.zeros_like(arrays[k]) for k in self.indices}


def si_observe_step(traj, deltas, grads):
    """Accumulate -delta * gradient for one update step.

    Positive for plain descent steps (the step moved against the gradient, so
    the loss decreased). Frozen tensors pass delta=None and contribute nothing.
    """
    for k in traj.indices:
        d = deltas[k]
        if d is None:
            continue
        g = grads[k]
        if d.shape != g.shape or d.shape != traj.running_sum[k].shape:
            raise ContractError("delta/gradient shape mismatch in trajectory observation")
        traj.running_sum[k] += -(d * g)
    return traj


def si_batch_importance(traj, net):
    """Per-parameter importance: accumulated credit over squared total movement.

    The damping constant keeps unmoved weights at finite importance; a closed
    trajectory (large credit, near-zero net movement) blows up toward
    credit/damping, which is this estimator's known failure mode.
    """
    arrays = net.param_arrays()
    return {k: traj.running_sum[k] / ((arrays[k] - traj.start[k]) ** 2 + traj.damping)
            for k in traj.indices}


def si_consolidate(state, f_batch, batch_weight, net):
    """Weighted-sum consolidation (no batch averaging) plus anchor refresh."""
    if state.mode != "si":
        raise ContractError("consolidating trajectory importance into a non-si state")
    if batch_weight < 0:
        raise ConfigError("batch consolidation weight must be nonnegative")
    for k in state.indices:
        state.f[k] = state.f[k] + batch_weight * f_batch[k]
    state.batch_count += 1
    state._take_anchor(net)
    return state


# ---------------------------------------------------------------------------
# Consolidated output head (copy-weights family)
# ---------------------------------------------------------------------------


class ConsolidatedHead:
    """Inference copy of the output layer, filled class by class.

    The live head on the network is the temporary one used for training; this
    copy starts at zero and receives the trained columns of each batch's
    classes. Evaluation always goes through this copy.
    """

    def __init__(self, net):
        self.weights = np.zeros((net.penultimate_width, net.output_width))
        self.biases = np.zeros(net.output_width)
        self.class_ids = list(net.class_ids)
        self.consolidated = set()

    def ensure_classes(self, net):
        """Grow to match an expanded head; existing columns are untouched."""
        if len(net.class_ids) > len(self.class_ids):
            extra = len(net.class_ids) - len(self.class_ids)
            self.weights = np.concatenate([self.weights, np.zeros((self.weights.shape[0], extra))], axis=1)
            self.biases = np.concatenate([self.biases, np.zeros(extra)])
            self.class_ids = list(net.class_ids)

    def columns(self, class_ids):
        col = {c: j for j, c in enumerate(self.class_ids)}
        return np.asarray([col[int(c)] for c in class_ids])

    def state_size(self):
        return self.weights.size + self.biases.size

    def eval_net(self, net):
        return net.with_head(self.weights, self.biases, self.class_ids)


def cwr_consolidate(head, net, batch_classes, batch_weight):
    """Scale-and-copy the trained columns of the current batch's classes.

    Only those columns move; every previously consolidated column stays
    bit-identical. Re-consolidating a class is an error under class-disjoint
    batches.
    """
    seen_again = head.consolidated.intersection(int(c) for c in batch_classes)
    if seen_again:
        raise ContractError(f"classes consolidated twice under disjoint batches: {sorted(seen_again)}")
    cols = head.columns(batch_classes)
    head.weights[:, cols] = batch_weight * net.head.W[:, cols]
    head.biases[cols] = batch_weight * net.head.b[cols]
    head.consolidated.update(int(c) for c in batch_classes)
    return head


def cwrplus_consolidate(head, net, batch_classes, avg_scope="full"):
    """Mean-shifted copy: subtract the scalar mean of the temporary head first.

    The subtraction is a uniform logit shift for the consolidated columns, so
    predictions among them are unchanged while the batch-weight rescaling
    becomes unnecessary. avg_scope "full" averages over every temporary-head
    entry (weights and biases); "batch_classes" restricts to the columns being
    consolidated.
    """
    cols = head.columns(batch_classes)
    if avg_scope == "full":
        avg = float(np.mean(np.concatenate([net.head.W.ravel(), net.head.b])))
    elif avg_scope == "batch_classes":
        avg = float(np.mean(np.concatenate([net.head.W[:, cols].ravel(), net.head.b[cols]])))
    else:
        raise ConfigError(f"unknown avg scope: {avg_scope!r}")
    head.weights[:, cols] = net.head.W[:, cols] - avg
    head.biases[cols] = net.head.b[cols] - avg
    head.consolidated.update(int(c) for c in batch_classes)
    return head


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------


class Strategy:
    id = None
    manages_head = False

    def run_batch(self, net, batch, plan):
        raise NotImplementedError

    def hyperparameters(self):
        return {}


class Naive(Strategy):
    """Plain incremental fine-tuning; early stopping is the only brake on forgetting."""

    id = "naive"

    def run_batch(self, net, batch, plan):
        net.ensure_classes(batch.class_ids)
        train_batch(net, batch.inputs, batch.labels, plan, batch.index)
        return net, net


class Cumulative(Strategy):
    """Retrain from scratch on everything seen so far; the upper-bound baseline.

    The only strategy allowed to keep past patterns around.
    """

    id = "cumulative"

    def __init__(self):
        self._past = []

    def run_batch(self, net, batch, plan):
        self._past.append((batch.inputs, batch.labels, tuple(batch.class_ids)))
        fresh = net.reinitialized()
        fresh.ensure_classes([c for _, _, cs in self._past for c in cs])
        union_x = np.concatenate([x for x, _, _ in self._past])
        union_y = np.concatenate([y for _, y, _ in self._past])
        train_batch(fresh, union_x, union_y, plan, batch.index)
        return fresh, fresh


class Lwf(Strategy):
    """Output-stability training against predictions captured at batch start."""

    id = "lwf"

    def __init__(self, map_params=None):
        self.state = LwfState(map_params=tuple(map_params) if map_params else None)

    def hyperparameters(self):
        return {"map": list(self.state.map_params) if self.state.map_params else None}

    def run_batch(self, net, batch, plan):
        net.ensure_classes(batch.class_ids)
        captured = lwf_capture(net, batch.inputs)
        self.state.seen_counts.append(batch.size)
        blend = lwf_lambda(batch.index, self.state.seen_counts, self.state.map_params)
        self.state.stored_targets = captured
        self.state.blend = blend
        onehot = net.one_hot(batch.labels)
        provider = lambda idx: lwf_fuse(onehot[idx], captured[idx], blend)
        train_batch(net, batch.inputs, batch.labels, plan, batch.index,
                    target_provider=provider)
        return net, net


class Ewc(Strategy):
    """Quadratic anchoring weighted by the gradient-variance (Fisher) diagonal."""

    id = "ewc"

    def __init__(self, strength, max_importance=0.001, fisher_mode="minibatch",
                 fisher_minibatch=None, scope="all"):
        self.strength = strength
        self.max_importance = max_importance
        self.fisher_mode = fisher_mode
        self.fisher_minibatch = fisher_minibatch
        self.scope = scope
        self.state = None

    def hyperparameters(self):
        return {"strength": self.strength, "max_f": self.max_importance,
                "fisher_mode": self.fisher_mode}

    def run_batch(self, net, batch, plan):
        net.ensure_classes(batch.class_ids)
        if self.state is None:
            self.state = ImportanceState(net, "ewc", self.strength, self.max_importance, self.scope)
        train_batch(net, batch.inputs, batch.labels, plan, batch.index,
                    regularizer=self.state.regularizer())
        mb = self.fisher_minibatch or plan.minibatch_size
        f_batch = ewc_fisher_diagonal(net, batch.inputs, batch.labels, self.fisher_mode, mb)
        ewc_consolidate(self.state, f_batch, net)
        return net, net


class Si(Strategy):
    """Quadratic anchoring weighted by path-integral importance gathered during SGD."""

    id = "si"

    def __init__(self, strength, max_importance=0.001, damping=1e-7,
                 weights=(0.00001, 0.005), scope="all"):
        self.strength = strength
        self.max_importance = max_importance
        self.damping = damping
        self.weights = tuple(weights)
        self.scope = scope
        self.state = None

    def hyperparameters(self):
        return {"strength": self.strength, "max_f": self.max_importance,
                "xi": self.damping, "weights": list(self.weights)}

    def _batch_weight(self, index):
        return self.weights[0] if index == 1 else self.weights[1]

    def run_batch(self, net, batch, plan):
        net.ensure_classes(batch.class_ids)
        if self.state is None:
            self.state = ImportanceState(net, "si", self.strength, self.max_importance, self.scope)
        traj = SiTrajectory(net, self.damping, self.scope)
        train_batch(net, batch.inputs, batch.labels, plan, batch.index,
                    regularizer=self.state.regularizer(),
                    step_observer=lambda deltas, grads: si_observe_step(traj, deltas, grads))
        f_batch = si_batch_importance(traj, net)
        si_consolidate(self.state, f_batch, self._batch_weight(batch.index), net)
        return net, net


class Cwr(Strategy):
    """Copy-weights with re-init: per-batch head training against a frozen backbone.

    The temporary head is randomly re-initialized before every batch; trained
    columns are scaled and copied into the consolidated head; shared layers
    freeze after the first batch.
    """

    id = "cwr"
    manages_head = True

    def __init__(self, weights=(1.25, 1.0), reinit_std=0.01, seed=0):
        self.weights = tuple(weights)
        self.reinit_std = reinit_std
        self._rng = np.random.default_rng((seed, 0xC3))
        self.head = None

    def hyperparameters(self):
        return {"weights": list(self.weights), "reinit_std": self.reinit_std}

    def _batch_weight(self, index):
        return self.weights[0] if index == 1 else self.weights[1]

    def run_batch(self, net, batch, plan):
        net.ensure_classes(batch.class_ids)
        if self.head is None:
            self.head = ConsolidatedHead(net)
        self.head.ensure_classes(net)
        net.set_head_arrays(self._rng.normal(0.0, self.reinit_std, net.head.W.shape),
                            np.zeros_like(net.head.b))
        train_batch(net, batch.inputs, batch.labels, plan, batch.index,
                    freeze_shared=batch.index > 1)
        cwr_consolidate(self.head, net, batch.class_ids, self._batch_weight(batch.index))
        return net, self.head.eval_net(net)


class CwrPlus(Strategy):
    """Copy-weights with zero re-init and mean-shift consolidation.

    Starting the temporary head at zero keeps early softmax outputs uniform, so
    no spurious error signal hits the backbone; the mean shift replaces the
    per-batch scaling weights.
    """

    id = "cwrplus"
    manages_head = True

    def __init__(self, avg_scope="full"):
        self.avg_scope = avg_scope
        self.head = None

    def hyperparameters(self):
        return {"avg_scope": self.avg_scope}

    def run_batch(self, net, batch, plan):
        net.ensure_classes(batch.class_ids)
        if self.head is None:
            self.head = ConsolidatedHead(net)
        self.head.ensure_classes(net)
        net.set_head_arrays(np.zeros_like(net.head.W), np.zeros_like(net.head.b))
        train_batch(net, batch.inputs, batch.labels, plan, batch.index,
                    freeze_shared=batch.index > 1)
        cwrplus_consolidate(self.head, net, batch.class_ids, self.avg_scope)
        return net, self.head.eval_net(net)


class Ar1(Strategy):
    """Mean-shifted copy-weights head plus trajectory-regularized shared layers.

    The head trains unregularized from zero each batch; the layers below keep
    learning under the path-integral anchoring, whose state covers only the
    shared tensors. freeze_shared_after_first exists as a diagnostic switch
    (with it and zero strength/weights this reduces exactly to the plain
    mean-shift strategy).
    """

    id = "ar1"
    manages_head = True

    def __init__(self, strength, max_importance=0.001, damping=1e-7,
                 weights=(0.0015, 0.0015), avg_scope="full",
                 freeze_shared_after_first=False):
        self.strength = strength
        self.max_importance = max_importance
        self.damping = damping
        self.weights = tuple(weights)
        self.avg_scope = avg_scope
        self.freeze_shared_after_first = freeze_shared_after_first
        self.head = None
        self.state = None

    def hyperparameters(self):
        return {"strength": self.strength, "max_f": self.max_importance,
                "xi": self.damping, "weights": list(self.weights),
                "avg_scope": self.avg_scope}

    def _batch_weight(self, index):
        return self.weights[0] if index == 1 else self.weights[1]

    def run_batch(self, net, batch, plan):
        net.ensure_classes(batch.class_ids)
        if self.head is None:
            self.head = ConsolidatedHead(net)
        if self.state is None:
            self.state = ImportanceState(net, "si", self.strength, self.max_importance, scope="shared")
        self.head.ensure_classes(net)
        net.set_head_arrays(np.zeros_like(net.head.W), np.zeros_like(net.head.b))
        traj = SiTrajectory(net, self.damping, scope="shared")
        train_batch(net, batch.inputs, batch.labels, plan, batch.index,
                    regularizer=self.state.regularizer(),
                    freeze_shared=self.freeze_shared_after_first and batch.index > 1,
                    step_observer=lambda deltas, grads: si_observe_step(traj, deltas, grads))
        cwrplus_consolidate(self.head, net, batch.class_ids, self.avg_scope)
        f_batch = si_batch_importance(traj, net)
        si_consolidate(self.state, f_batch, self._batch_weight(batch.index), net)
        return net, self.head.eval_net(net)


STRATEGY_IDS = ("naive", "cumulative", "lwf", "ewc", "si", "cwr", "cwrplus", "ar1")


def run_strategy_batch(strategy, net, batch, plan):
    """One full per-batch lifecycle; returns (training net, evaluation model)."""
    if strategy.id not in STRATEGY_IDS:
        raise ConfigError(f"unknown strategy id: {strategy.id!r}")
    return strategy.run_batch(net, batch, plan)
