"""Dense feed-forward network: construction, backprop, and the per-batch training loop.

The network is a stack of fully connected layers, ReLU on hidden layers and raw
logits at the output. Everything below the output layer counts as "shared"
parameters; the output layer is the "head". Output columns are tagged with
global class ids so a head can cover the full class universe from the start
(maximal mode) or grow as classes arrive (expanding mode).
"""

from __future__ import annotations

import copy
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import GradientRecord, ParamTensor, cross_entropy_soft, sgd_step_regularized, softmax
from .errors import ConfigError, ContractError, TrainingDiverged


@dataclass
class InitPolicy:
    """How to draw initial weights. Hidden layers must not be all-zero."""

    hidden_std: float = 0.01
    output_init: str = "zero"  # "zero" | "gaussian"
    output_std: float = 0.01

    def validate(self):
        if self.hidden_std <= 0:
            raise ConfigError("hidden layers cannot be zero-initialized (zero activations kill backprop)")
        if self.output_init not in ("zero", "gaussian"):
            raise ConfigError(f"unknown output init policy: {self.output_init!r}")
        if self.output_init == "gaussian" and self.output_std <= 0:
            raise ConfigError("gaussian output init needs a positive std")


@dataclass
class TrainPlan:
    """Fixed-epoch training schedule, possibly different for the first batch."""

    epochs_first: int = 20
    epochs_later: int = 20
    eta_first: float = 0.05
    eta_later: float = 0.05
    minibatch_size: int = 32
    shuffle_seed: int = 0

    def validate(self):
        if self.epochs_first < 1 or self.epochs_later < 1:
            raise ConfigError("epoch counts must be >= 1")
        if self.eta_first <= 0 or self.eta_later <= 0:
            raise ConfigError("learning rates must be positive")
        if self.minibatch_size < 1:
            raise ConfigError("minibatch size must be >= 1")

    def epochs_for(self, batch_index):
        return self.epochs_first if batch_index == 1 else self.epochs_later

    def eta_for(self, batch_index):
        return self.eta_first if batch_index == 1 else self.eta_later


@dataclass
class Regularizer:
    """Anchored decay terms for selected tensors, keyed by tensor index."""

    importance: dict = field(default_factory=dict)
    anchor: dict = field(default_factory=dict)
    strength: float = 0.0


@dataclass
class ModelSnapshot:
    """Portable copy of a network's parameters (row-major per layer)."""

    layer_sizes: list
    class_ids: list
    weights: list
    biases: list

    def to_dict(self):
        return {
            "layer_sizes": [int(s) for s in self.layer_sizes],
            "class_ids": [int(c) for c in self.class_ids],
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d):
        sizes = [int(s) for s in d["layer_sizes"]]
        weights = []
        biases = []
        for i in range(len(sizes) - 1):
            weights.append(np.asarray(d["weights"][i], dtype=np.float64).reshape(sizes[i], sizes[i + 1]))
            biases.append(np.asarray(d["biases"][i], dtype=np.float64))
        return cls(sizes, [int(c) for c in d["class_ids"]], weights, biases)


@dataclass
class ForwardCache:
    version: int
    inputs: list  # activation fed into each layer, batch rows
    preacts: list  # pre-activation of each hidden layer
    single: bool


class Layer:
    def __init__(self, weights, biases):
        self.W = weights
        self.b = biases


class Network:
    """Mutable dense net. Not safe for concurrent mutation; copies are cheap."""

    def __init__(self, layers, class_ids, head_mode, policy, seed, rng, init_args):
        self.layers = layers
        self.class_ids = list(class_ids)
        self.head_mode = head_mode
        self.policy = policy
        self.seed = seed
        self._rng = rng
        self._init_args = init_args  # (layer_sizes, class_ids) at construction
        self._version = 0
        self._in_training = False
        self._refresh_class_index()

    def _refresh_class_index(self):
        self._class_to_col = {c: j for j, c in enumerate(self.class_ids)}

    # ---- structure -------------------------------------------------------

    @property
    def layer_sizes(self):
        return [self.layers[0].W.shape[0]] + [l.W.shape[1] for l in self.layers]

    @property
    def head(self):
        return self.layers[-1]

    @property
    def head_layer_id(self):
        return len(self.layers) - 1

    @property
    def output_width(self):
        return self.head.W.shape[1]

    @property
    def penultimate_width(self):
        return self.head.W.shape[0]

    def param_arrays(self):
        out = []
        for layer in self.layers:
            out.append(layer.W)
            out.append(layer.b)
        return out

    def param_tensors(self):
        out = []
        for i, layer in enumerate(self.layers):
            out.append(ParamTensor(layer.W, i, "weight"))
            out.append(ParamTensor(layer.b, i, "bias"))
        return out

    def tensor_layer(self, k):
        return k // 2

    def is_shared_tensor(self, k):
        return self.tensor_layer(k) < self.head_layer_id

    @property
    def num_params(self):
        return sum(a.size for a in self.param_arrays())

    @property
    def num_shared_params(self):
        return sum(a.size for k, a in enumerate(self.param_arrays()) if self.is_shared_tensor(k))

    def class_col(self, labels):
        """Map global class ids to output column indices."""
        try:
            return np.asarray([self._class_to_col[int(c)] for c in np.atleast_1d(labels)])
        except KeyError as exc:
            raise ContractError(f"class {exc.args[0]} is not represented in the head") from exc

    def one_hot(self, labels):
        cols = self.class_col(labels)
        t = np.zeros((len(cols), self.output_width))
        t[np.arange(len(cols)), cols] = 1.0
        return t

    # ---- lifecycle -------------------------------------------------------

    def copy(self):
        layers = [Layer(l.W.copy(), l.b.copy()) for l in self.layers]
        net = Network(layers, list(self.class_ids), self.head_mode, self.policy,
                      self.seed, copy.deepcopy(self._rng), self._init_args)
        net._version = self._version
        return net

    def reinitialized(self):
        """Fresh network with the construction-time shape, policy and seed."""
        sizes, class_ids = self._init_args
        return init_network(sizes, self.policy, self.seed, class_ids=class_ids, head_mode=self.head_mode)

    def snapshot(self):
        return ModelSnapshot(self.layer_sizes, list(self.class_ids),
                             [l.W.copy() for l in self.layers],
                             [l.b.copy() for l in self.layers])

    def with_head(self, weights, biases, class_ids=None):
        """Copy of this net with the output layer replaced (consolidated-head inference)."""
        net = self.copy()
        if weights.shape[0] != net.penultimate_width:
            raise ContractError("replacement head does not match the penultimate width")
        net.layers[-1] = Layer(np.array(weights, dtype=np.float64), np.array(biases, dtype=np.float64))
        if class_ids is not None:
            net.class_ids = list(class_ids)
            net._refresh_class_index()
        net._version += 1
        return net

    def set_head_arrays(self, weights, biases):
        """Overwrite the live head parameters in place (temporary-weights reset)."""
        if weights.shape != self.head.W.shape or biases.shape != self.head.b.shape:
            raise ContractError("head replacement must be shape-congruent")
        self.head.W[...] = weights
        self.head.b[...] = biases
        self._version += 1

    def reinit_head(self, class_ids):
        """Replace the head with a fresh one for the given classes (per-task heads)."""
        width = len(class_ids)
        if self.policy.output_init == "zero":
            W = np.zeros((self.penultimate_width, width))
        else:
            W = self._rng.normal(0.0, self.policy.output_std, (self.penultimate_width, width))
        self.layers[-1] = Layer(W, np.zeros(width))
        self.class_ids = list(class_ids)
        self._refresh_class_index()
        self._version += 1

    def ensure_classes(self, class_ids):
        """Make sure every class id has an output column, expanding if allowed."""
        missing = [c for c in class_ids if c not in self._class_to_col]
        if not missing:
            return self
        if self.head_mode == "maximal":
            raise ContractError(f"classes {missing} missing from a maximal head")
        return expand_head(self, missing)


def init_network(layer_sizes, policy=None, seed=0, class_ids=None, head_mode="maximal"):
    """Build a dense net: ReLU hidden layers, logit output, seeded Gaussian init.

    Hidden weights are Gaussian(0, hidden_std); biases start at zero. The
    output layer starts at zero under the zero-init policy (valid only at the
    output level: its weight gradient is the error times the penultimate
    activation, so zeros do not block the update), Gaussian otherwise.
    """
    policy = policy or InitPolicy()
    policy.validate()
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 3:
        raise ConfigError("need at least one hidden layer (input, hidden..., output)")
    if any(s < 1 for s in sizes):
        raise ConfigError("layer sizes must be positive")
    if head_mode not in ("maximal", "expanding"):
        raise ConfigError(f"unknown head mode: {head_mode!r}")
    if class_ids is None:
        class_ids = list(range(sizes[-1]))
    if len(class_ids) != sizes[-1]:
        raise ConfigError("class_ids length must equal the output width")
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(len(sizes) - 2):
        layers.append(Layer(rng.normal(0.0, policy.hidden_std, (sizes[i], sizes[i + 1])),
                            np.zeros(sizes[i + 1])))
    if policy.output_init == "zero":
        head_w = np.zeros((sizes[-2], sizes[-1]))
    else:
        head_w = rng.normal(0.0, policy.output_std, (sizes[-2], sizes[-1]))
    layers.append(Layer(head_w, np.zeros(sizes[-1])))
    return Network(layers, class_ids, head_mode, policy, seed, rng, (sizes, list(class_ids)))


def expand_head(net, new_classes):
    """Grow the output layer by one column per new class.

    Existing columns are preserved bit-for-bit; new ones follow the output init
    policy. In maximal mode this is a no-op that emits a warning.
    """
    if net.head_mode == "maximal":
        warnings.warn("expand_head on a maximal head is a no-op", stacklevel=2)
        return net
    new_classes = [int(c) for c in new_classes]
    already = [c for c in new_classes if c in net._class_to_col]
    if already:
        raise ConfigError(f"classes already present in the head: {already}")
    if not new_classes:
        return net
    pn = net.penultimate_width
    k = len(new_classes)
    if net.policy.output_init == "zero":
        extra_w = np.zeros((pn, k))
    else:
        extra_w = net._rng.normal(0.0, net.policy.output_std, (pn, k))
    head = net.head
    net.layers[-1] = Layer(np.concatenate([head.W, extra_w], axis=1),
                           np.concatenate([head.b, np.zeros(k)]))
    net.class_ids.extend(new_classes)
    net._refresh_class_index()
    net._version += 1
    return net


def forward(net, x):
    """Run the net on one pattern or a batch; returns (logits, cache for backward)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.shape[1] != net.layers[0].W.shape[0]:
        raise ConfigError(f"input dimension {a.shape[1]} does not match the input layer "
                          f"({net.layers[0].W.shape[0]})")
    inputs = []
    preacts = []
    for i, layer in enumerate(net.layers):
        inputs.append(a)
        z = a @ layer.W + layer.b
        if i < len(net.layers) - 1:
            preacts.append(z)
            a = np.maximum(z, 0.0)
        else:
            a = z
    logits = a[0] if single else a
    return logits, ForwardCache(net._version, inputs, preacts, single)


def backward(net, cache, logit_gradient):
    """Backpropagate a gradient at the logits into a full GradientRecord.

    Row gradients are summed over the batch; pass gradient/n for a mean-loss
    gradient. The cache must come from a forward pass on the current parameters.
    """
    if cache.version != net._version:
        raise ContractError("stale forward cache: parameters changed since the forward pass")
    g = np.asarray(logit_gradient, dtype=np.float64)
    if cache.single and g.ndim == 1:
        g = g[None, :]
    grads = [None] * (2 * len(net.layers))
    delta = g
    for i in range(len(net.layers) - 1, -1, -1):
        grads[2 * i] = cache.inputs[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.layers[i].W.T) * (cache.preacts[i - 1] > 0)
    return GradientRecord(grads)


def predict_proba(net, x):
    logits, _ = forward(net, x)
    return softmax(logits)


def train_batch(net, inputs, labels, plan, batch_index=1, target_provider=None,
                regularizer=None, freeze_shared=False, step_observer=None):
    """Run the planned epochs of minibatch SGD on one training batch.

    target_provider(pattern_indices) supplies per-pattern soft targets (defaults
    to one-hot of the labels); regularizer adds anchored decay on the tensors it
    covers; freeze_shared discards gradients to everything below the head;
    step_observer(deltas, grads) fires after every parameter update, with None
    deltas for frozen tensors.
    """
    plan.validate()
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels)
    n = len(inputs)
    if n == 0:
        raise ConfigError("cannot train on an empty batch")
    epochs = plan.epochs_for(batch_index)
    eta = plan.eta_for(batch_index)
    onehot = net.one_hot(labels)
    if target_provider is None:
        target_provider = lambda idx: onehot[idx]
    reg = regularizer
    rng = np.random.default_rng((plan.shuffle_seed, batch_index))
    arrays = net.param_arrays()
    net._in_training = True
    try:
        for epoch in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, plan.minibatch_size):
                idx = order[start:start + plan.minibatch_size]
                logits, cache = forward(net, inputs[idx])
                probs = softmax(logits)
                targets = target_provider(idx)
                losses, logit_grad = cross_entropy_soft(probs, targets)
                mean_loss = float(np.mean(losses))
                if not np.isfinite(mean_loss):
                    raise TrainingDiverged(
                        f"non-finite loss at batch {batch_index}, epoch {epoch + 1}",
                        snapshot={"batch_index": batch_index, "epoch": epoch + 1,
                                  "step": start // plan.minibatch_size, "loss": mean_loss},
                    )
                grads = backward(net, cache, logit_grad / len(idx))
                deltas = [None] * len(arrays)
                for k, arr in enumerate(arrays):
                    if freeze_shared and net.is_shared_tensor(k):
                        continue
                    imp = reg.importance.get(k) if reg else None
                    anc = reg.anchor.get(k) if reg else None
                    new = sgd_step_regularized(arr, grads[k], eta, imp, anc,
                                               reg.strength if (reg and imp is not None) else 0.0)
                    deltas[k] = new - arr
                    arr[...] = new
                net._version += 1
                if step_observer is not None:
                    step_observer(deltas, grads.tensors)
    finally:
        net._in_training = False
    return net
