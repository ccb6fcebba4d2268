"""Categorical cross-entropy over probability vectors."""

from __future__ import annotations

import numpy as np

EPS = 1e-12


def cross_entropy(probs: np.ndarray, labels) -> float:
    """Mean of -log(probs[label] + eps) over the batch.

    Accepts a single probability vector with an int label, or a (B, K)
    matrix with a length-B label array.
    """
    probs = np.asarray(probs, dtype=np.float64)
    single = probs.ndim == 1
    if single:
        probs = probs[None, :]
        labels = np.asarray([labels])
    else:
        labels = np.asarray(labels)
    K = probs.shape[1]
    if labels.min() < 0 or labels.max() >= K:
        raise ValueError(f"label out of range for {K} classes")
    picked = probs[np.arange(len(labels)), labels]
    return float(np.mean(-np.log(picked + EPS)))


def cross_entropy_grad(probs: np.ndarray, labels) -> np.ndarray:
    """d(mean CE)/d(probs), same shape as probs."""
    probs = np.asarray(probs, dtype=np.float64)
    single = probs.ndim == 1
    if single:
        probs = probs[None, :]
        labels = np.asarray([labels])
    else:
        labels = np.asarray(labels)
    B = probs.shape[0]
    grad = np.zeros_like(probs)
    picked = probs[np.arange(B), labels]
    grad[np.arange(B), labels] = -1.0 / (picked + EPS) / B
    return grad[0] if single else grad
