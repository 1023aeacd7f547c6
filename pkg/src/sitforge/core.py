"""Numerical primitives: softmax, soft-target cross-entropy, regularized SGD step.

Everything is float64. Functions are pure and accept either a single pattern
(1-D) or a row-per-pattern batch (2-D).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OvershootError

LOG_EPS = 1e-12  # clamp for log() on saturated probabilities


@dataclass
class ParamTensor:
    """One parameter array of the network, tagged with its position."""

    values: np.ndarray
    layer_id: int
    kind: str  # "weight" | "bias"


@dataclass
class GradientRecord:
    """Per-tensor gradients, aligned 1:1 with a network's parameter list."""

    tensors: list

    def __iter__(self):
        return iter(self.tensors)

    def __getitem__(self, k):
        return self.tensors[k]

    def __len__(self):
        return len(self.tensors)


def softmax(logits):
    """Stabilized softmax over the last axis."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def validate_soft_target(t, tol=1e-9):
    """Check that t is a probability vector (rows of a matrix each count)."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < -tol) or np.any(t > 1 + tol):
        raise ValueError("soft target entries must lie in [0, 1]")
    sums = np.sum(t, axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise ValueError("soft target rows must sum to 1")
    return t


def cross_entropy_soft(probs, targets):
    """Cross-entropy against a soft target, plus its gradient at the logits.

    Returns (loss, logit_gradient). For 2-D inputs the loss is a vector with
    one entry per row and the gradient one row per pattern. The gradient with
    respect to the pre-softmax logits is simply probs - targets.
    """
    probs = np.asarray(probs, dtype=np.float64)
    targets = validate_soft_target(targets)
    if probs.shape != targets.shape:
        raise ValueError(f"shape mismatch: probs {probs.shape} vs targets {targets.shape}")
    loss = -np.sum(targets * np.log(np.maximum(probs, LOG_EPS)), axis=-1)
    return loss, probs - targets


def sgd_step_regularized(theta, gradient, eta, importance=None, anchor=None, strength=0.0):
    """One SGD step with an optional importance-weighted pull toward an anchor.

    theta' = theta - eta * gradient - eta * strength * importance * (theta - anchor)

    The pull acts as a per-parameter weight decay toward the anchor instead of
    toward zero. The strength factor multiplies the importance explicitly here;
    formulations that pre-fold the strength into the importance are equivalent.

    Raises OvershootError when eta * strength * max(importance) exceeds 1,
    because then the decay step jumps past the anchor instead of approaching it.
    With importance omitted this is a plain SGD step (bit-identical to
    theta - eta * gradient).
    """
    theta = np.asarray(theta, dtype=np.float64)
    gradient = np.asarray(gradient, dtype=np.float64)
    if theta.shape != gradient.shape:
        raise ValueError(f"shape mismatch: theta {theta.shape} vs gradient {gradient.shape}")
    if eta <= 0:
        raise ValueError("learning rate must be positive")
    if strength < 0:
        raise ValueError("regularization strength must be nonnegative")
    if importance is None or strength == 0.0:
        return theta - eta * gradient
    importance = np.asarray(importance, dtype=np.float64)
    anchor = np.asarray(anchor, dtype=np.float64)
    if importance.shape != theta.shape or anchor.shape != theta.shape:
        raise ValueError("importance and anchor must be shape-congruent with theta")
    peak = eta * strength * float(np.max(importance)) if importance.size else 0.0
    if peak > 1.0:
        raise OvershootError(
            f"eta*strength*max(importance) = {peak:.6g} > 1; "
            f"reduce strength below 1/(eta*max_importance)"
        )
    return theta - eta * gradient - eta * strength * importance * (theta - anchor)
