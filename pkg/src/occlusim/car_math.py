"""Counterfactual-corrected prediction and the CE + alpha * KL training loss.

Notation: ``p`` factual logits, ``c`` counterfactual logits (actor erased),
``P = softmax(p)``, corrected prediction ``Y = softmax(p - c)``, label
distribution ``q``.

    loss = CE + alpha * KL(P || Y)

Two CE orientations are supported:

* ``"standard"``: ``-sum(q * log P)``, finite for one-hot labels.
* ``"printed"``:  ``-sum(P * log q)``, operands mirrored;
  it diverges for one-hot ``q``, so it needs label smoothing.

Everything is float64 and reduces with log-sum-exp.
"""
from dataclasses import dataclass

import numpy as np

from .errors import EmptyBatch, EmptyVector, LengthMismatch, NonFiniteLoss

CE_MODES = ("standard", "printed")
DEFAULT_ALPHAS = (0.0, 0.5, 1.0, 2.0)


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 1.0
    label_smoothing_epsilon: float = 0.0
    mode: str = "standard"

    def __post_init__(self):
        if not (self.alpha >= 0 and np.isfinite(self.alpha)):
            raise ValueError(f"alpha must be a finite value >= 0, got {self.alpha}")
        if not 0 <= self.label_smoothing_epsilon <= 0.1:
            raise ValueError("label_smoothing_epsilon must lie in [0, 0.1]")
        if self.mode not in CE_MODES:
            raise ValueError(f"mode must be one of {CE_MODES}")
        if self.mode == "printed" and self.label_smoothing_epsilon <= 0:
            raise ValueError("printed CE orientation needs label_smoothing_epsilon > 0")


@dataclass(frozen=True, eq=False)
class PredictionPair:
    """Factual and counterfactual logits for one sample."""

    p: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        p, c = _pair(self.p, self.c)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "c", c)


def _vector(v, name="logits"):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if v.size == 0:
        raise EmptyVector(f"{name} is empty")
    if not np.all(np.isfinite(v)):
        raise NonFiniteLoss(f"{name} contains non-finite entries")
    return v


def _pair(p, c):
    p, c = _vector(p, "p"), _vector(c, "c")
    if p.shape != c.shape:
        raise LengthMismatch(f"p has {p.size} entries, c has {c.size}")
    return p, c


def log_softmax(logits):
    v = _vector(logits)
    shifted = v - v.max()
    return shifted - np.log(np.exp(shifted).sum())


def softmax(logits):
    v = _vector(logits)
    e = np.exp(v - v.max())
    return e / e.sum()


def corrected_prediction(p, c):
    p, c = _pair(p, c)
    return softmax(p - c)


def label_distribution(label, n, epsilon=0.0):
    """One-hot (int label) or explicit distribution, optionally smoothed."""
    if isinstance(label, (int, np.integer)):
        if not 0 <= label < n:
            raise ValueError(f"class index {label} outside [0, {n})")
        q = np.zeros(n)
        q[label] = 1.0
    else:
        q = np.asarray(label, dtype=np.float64)
        if q.shape != (n,):
            raise LengthMismatch(f"label has {q.size} entries, logits have {n}")
        if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
            raise ValueError("label must be non-negative and sum to 1")
    if epsilon:
        q = (1.0 - epsilon) * q + epsilon / n
    return q


def cross_entropy(p, q):
    """-sum(q * log softmax(p))."""
    return float(-(np.asarray(q) * log_softmax(p)).sum())


def _terms(p, c, q, cfg):
    logP = log_softmax(p)
    logY = log_softmax(p - c)
    P = np.exp(logP)
    if cfg.mode == "standard":
        ce = float(-(q * logP).sum())
    else:
        if np.any(q <= 0):
            raise ValueError("printed CE orientation needs a strictly positive label")
        ce = float(-(P * np.log(q)).sum())
    kl = max(float((P * (logP - logY)).sum()), 0.0)
    loss = ce + cfg.alpha * kl
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss}")
    return ce, kl, loss, logP, logY


def car_loss_terms(p, c, label, cfg=LossConfig()):
    """Return (ce, kl, loss) for one sample."""
    p, c = _pair(p, c)
    q = label_distribution(label, p.size, cfg.label_smoothing_epsilon)
    ce, kl, loss, _, _ = _terms(p, c, q, cfg)
    return ce, kl, loss


def car_loss(p, c, label, cfg=LossConfig()):
    return car_loss_terms(p, c, label, cfg)[2]


def car_loss_gradient(p, c, label, cfg=LossConfig()):
    """Analytic (dL/dp, dL/dc).

    With r = log P - log Y, the KL term contributes
    P * (r - <P, r>) + (Y - P) to dL/dp and alpha * (P - Y) to dL/dc.
    """
    p, c = _pair(p, c)
    q = label_distribution(label, p.size, cfg.label_smoothing_epsilon)
    _, _, _, logP, logY = _terms(p, c, q, cfg)
    P, Y = np.exp(logP), np.exp(logY)
    if cfg.mode == "standard":
        d_ce = P * q.sum() - q
    else:
        h = -np.log(q)
        d_ce = P * (h - P @ h)
    r = logP - logY
    d_kl_p = P * (r - P @ r) + (Y - P)
    grad_p = d_ce + cfg.alpha * d_kl_p
    grad_c = cfg.alpha * (P - Y)
    return grad_p, grad_c


def car_loss_batch(p, c, labels, cfg=LossConfig()):
    """Mean (ce, kl, loss) over a batch of rows."""
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    c = np.atleast_2d(np.asarray(c, dtype=np.float64))
    if p.shape != c.shape:
        raise LengthMismatch(f"p batch {p.shape} vs c batch {c.shape}")
    if len(labels) != p.shape[0]:
        raise LengthMismatch(f"{len(labels)} labels for {p.shape[0]} rows")
    if p.shape[0] == 0:
        raise EmptyBatch("empty batch")
    terms = np.array([car_loss_terms(pi, ci, li, cfg) for pi, ci, li in zip(p, c, labels)])
    ce, kl, loss = terms.mean(axis=0)
    return float(ce), float(kl), float(loss)


def alpha_sweep(p, c, labels, alphas=DEFAULT_ALPHAS, epsilon=0.0, mode="standard"):
    """Loss table over ``alphas`` for one batch: rows of alpha, ce, kl, loss."""
    rows = []
    for a in alphas:
        ce, kl, loss = car_loss_batch(p, c, labels, LossConfig(a, epsilon, mode))
        rows.append({"alpha": float(a), "ce": ce, "kl": kl, "loss": loss})
    return rows


def causal_effect(factual_probs, counterfactual_probs, class_index):
    """Mean gap between factual and counterfactual probability of one class."""
    f = np.asarray(factual_probs, dtype=np.float64)
    cf = np.asarray(counterfactual_probs, dtype=np.float64)
    if f.ndim == 1:
        f = f[None, :]
    if cf.ndim == 1:
        cf = cf[None, :]
    if f.shape[0] == 0 or cf.shape[0] == 0:
        raise EmptyBatch("causal effect needs at least one pair")
    if f.shape != cf.shape:
        raise LengthMismatch(f"factual {f.shape} vs counterfactual {cf.shape}")
    return float(np.mean(f[:, class_index] - cf[:, class_index]))
