"""The generalized softmax loss family and its exact gradients.

Every variant is an instance of

    l(y, f(x)) = -w_y * log softmax_y(delta * f(x) + ell)

with per-class weights ``w``, multiplicative logits ``delta`` and additive
logits ``ell``, plus three per-sample rules that do not fit the static
form: the focal weight (1 - p_hat)^2, the margin applied only to the
true-class logit, and the geometric-mean loss which couples samples
through batch class counts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .priors import Prior

VARIANTS = ("CE", "WCE", "Focal", "FocalAlpha", "LDAM", "LA", "VS", "TWCE", "TLA", "GML")

_FOCAL_GAMMA = 2.0


@dataclass(frozen=True)
class GeneralizedLossSpec:
    variant: str
    weights: np.ndarray                          # (K,), static per-class w_y
    delta: np.ndarray                            # (K,), multiplicative logits
    ell: np.ndarray                              # (K,), additive logits, all coordinates
    true_class_offsets: Optional[np.ndarray] = None  # (K,), added only at the label coordinate
    focal_gamma: Optional[float] = None

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown loss variant {self.variant!r}, expected one of {VARIANTS}")
        w = np.asarray(self.weights, dtype=np.float64)
        d = np.asarray(self.delta, dtype=np.float64)
        e = np.asarray(self.ell, dtype=np.float64)
        if not (w.shape == d.shape == e.shape) or w.ndim != 1:
            raise ValueError("weights, delta and ell must be 1-d vectors of equal length")
        if np.any(w <= 0):
            raise ValueError("per-class weights must be positive")
        if np.any(d <= 0):
            raise ValueError("multiplicative logits must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "ell", e)
        if self.true_class_offsets is not None:
            t = np.asarray(self.true_class_offsets, dtype=np.float64)
            if t.shape != w.shape:
                raise ValueError("true_class_offsets must match the class count")
            object.__setattr__(self, "true_class_offsets", t)

    @property
    def class_count(self) -> int:
        return int(self.weights.size)

    def with_weights(self, weights: np.ndarray) -> "GeneralizedLossSpec":
        return replace(self, weights=np.asarray(weights, dtype=np.float64))


def tla_offsets(pi_train: Prior, pi_target: Prior, tau: float) -> np.ndarray:
    """Additive logits tau * (ln pi_train_y - ln pi_target_y).

    Training with these offsets makes the raw network output Bayes-consistent
    for ``pi_target`` instead of the training prior.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    pt = pi_train.p
    pg = pi_target.p
    if pt.size != pg.size:
        raise ValueError("priors have different class counts")
    if np.any(pg == 0):
        raise ValueError("target prior has a zero coordinate, offset diverges")
    if np.any(pt == 0):
        raise ValueError("training prior has a zero coordinate (class absent from training data)")
    return tau * (np.log(pt) - np.log(pg))


def deferred_reweighting_weights(counts, beta: float = 0.9999) -> np.ndarray:
    """Effective-number class weights (1 - beta) / (1 - beta^N_y) used when a
    re-weighting switch is scheduled late in training."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 1):
        raise ValueError("all classes need at least one sample")
    return (1.0 - beta) / (1.0 - beta**counts)


def spec_from_variant(
    variant: str,
    pi_train: Prior,
    pi_target: Optional[Prior] = None,
    *,
    counts=None,
    tau: float = 1.0,
    gamma: float = 0.15,
    ldam_max_margin: float = 0.5,
) -> GeneralizedLossSpec:
    """Instantiate one of the named variants.

    ``counts`` (realized per-class sample counts) is required for WCE,
    FocalAlpha, LDAM and VS; ``pi_target`` for TWCE and TLA; ``tau`` applies
    to LA, VS and TLA; ``gamma`` to VS only.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown loss variant {variant!r}, expected one of {VARIANTS}")
    k = pi_train.class_count
    ones = np.ones(k)
    zeros = np.zeros(k)

    def need_counts() -> np.ndarray:
        if counts is None:
            raise ValueError(f"variant {variant} needs per-class counts")
        c = np.asarray(counts, dtype=np.float64)
        if c.shape != (k,) or np.any(c < 1):
            raise ValueError("counts must be positive and match the class count")
        return c

    def need_target() -> Prior:
        if pi_target is None:
            raise ValueError(f"variant {variant} needs a target prior")
        return pi_target

    if variant == "CE" or variant == "GML":
        return GeneralizedLossSpec(variant, ones, ones, zeros)
    if variant == "WCE":
        return GeneralizedLossSpec(variant, 1.0 / need_counts(), ones, zeros)
    if variant == "Focal":
        return GeneralizedLossSpec(variant, ones, ones, zeros, focal_gamma=_FOCAL_GAMMA)
    if variant == "FocalAlpha":
        return GeneralizedLossSpec(
            variant, 1.0 / need_counts(), ones, zeros, focal_gamma=_FOCAL_GAMMA
        )
    if variant == "LDAM":
        c = need_counts()
        # margin C * N_y^(-1/4) with C chosen so the largest margin is ldam_max_margin
        raw = c**-0.25
        margins = ldam_max_margin * raw / raw.max()
        return GeneralizedLossSpec(variant, ones, ones, zeros, true_class_offsets=-margins)
    if variant == "LA":
        if tau <= 0:
            raise ValueError(f"tau must be positive, got {tau}")
        return GeneralizedLossSpec(variant, ones, ones, tau * np.log(pi_train.p))
    if variant == "VS":
        if tau <= 0 or gamma < 0:
            raise ValueError(f"invalid VS hyperparameters tau={tau}, gamma={gamma}")
        c = need_counts()
        delta = (c / c.max()) ** gamma
        return GeneralizedLossSpec(variant, ones, delta, tau * np.log(pi_train.p))
    if variant == "TWCE":
        target = need_target()
        if np.any(pi_train.p == 0):
            raise ValueError("training prior has a zero coordinate")
        return GeneralizedLossSpec(variant, target.p / pi_train.p, ones, zeros)
    # TLA
    return GeneralizedLossSpec(variant, ones, ones, tla_offsets(pi_train, need_target(), tau))


def log_softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax with max subtraction."""
    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=1, keepdims=True)


def _check_batch(spec: GeneralizedLossSpec, logits: np.ndarray, labels: np.ndarray):
    f = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if f.ndim != 2 or f.shape[1] != spec.class_count:
        raise ValueError(f"logits must be (N, {spec.class_count}), got {f.shape}")
    if f.shape[0] == 0:
        raise ValueError("empty batch")
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite logits")
    if y.shape != (f.shape[0],) or y.min() < 0 or y.max() >= spec.class_count:
        raise ValueError("labels must be a vector of class indices matching the batch")
    return f, y


def _adjusted_logits(spec: GeneralizedLossSpec, f: np.ndarray, y: np.ndarray) -> np.ndarray:
    z = spec.delta * f + spec.ell
    if spec.true_class_offsets is not None:
        z = z.copy()
        z[np.arange(y.size), y] += spec.true_class_offsets[y]
    return z


def batch_loss(spec: GeneralizedLossSpec, logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean per-sample loss over the batch."""
    f, y = _check_batch(spec, logits, labels)
    if spec.variant == "GML":
        return gml_batch_loss(f, y, np.bincount(y, minlength=spec.class_count))
    z = _adjusted_logits(spec, f, y)
    logp = log_softmax(z)
    rows = np.arange(y.size)
    ce = -logp[rows, y]
    w = spec.weights[y]
    if spec.focal_gamma is not None:
        p_true = np.exp(logp[rows, y])
        w = w * (1.0 - p_true) ** spec.focal_gamma
    return float(np.mean(w * ce))


def batch_loss_gradient(
    spec: GeneralizedLossSpec, logits: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Exact gradient of :func:`batch_loss` with respect to the logits."""
    f, y = _check_batch(spec, logits, labels)
    if spec.variant == "GML":
        return gml_batch_loss_gradient(f, y, np.bincount(y, minlength=spec.class_count))
    n = y.size
    rows = np.arange(n)
    z = _adjusted_logits(spec, f, y)
    p = softmax(z)
    onehot = np.zeros_like(p)
    onehot[rows, y] = 1.0
    base = spec.weights[y][:, None] * spec.delta[None, :] * (p - onehot)
    if spec.focal_gamma is None:
        return base / n
    gamma = spec.focal_gamma
    p_true = p[rows, y]
    ce = -np.log(p_true)
    focal = (1.0 - p_true) ** gamma
    # d/df of (1-p_y)^gamma * ce: product rule, with
    # dp_y/df_k = delta_k * p_y * (1[k=y] - p_k)
    dp_true = spec.delta[None, :] * (p_true[:, None] * (onehot - p))
    grad = (
        -gamma * (1.0 - p_true)[:, None] ** (gamma - 1.0) * ce[:, None] * dp_true
        + focal[:, None] * spec.delta[None, :] * (p - onehot)
    )
    return spec.weights[y][:, None] * grad / n


def gml_batch_loss(logits: np.ndarray, labels: np.ndarray, batch_class_counts) -> float:
    """Negative mean log of the count-normalized class scores.

    Classes absent from the batch are skipped and the averaging constant is
    the number of classes actually present.
    """
    f = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    counts = np.asarray(batch_class_counts, dtype=np.float64)
    if f.shape[0] == 0:
        raise ValueError("empty batch")
    p_class = _gml_class_scores(f, y, counts)
    present = counts > 0
    return float(-np.mean(np.log(p_class[present])))


def gml_batch_loss_gradient(
    logits: np.ndarray, labels: np.ndarray, batch_class_counts
) -> np.ndarray:
    f = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    counts = np.asarray(batch_class_counts, dtype=np.float64)
    if f.shape[0] == 0:
        raise ValueError("empty batch")
    k_present = int(np.count_nonzero(counts > 0))
    rows = np.arange(y.size)
    m = f.max(axis=1, keepdims=True)
    e = np.exp(f - m)
    denom = (e * counts[None, :]).sum(axis=1)
    ratio = e / denom[:, None]              # (N, K): exp(f_k) / sum_k' n_k' exp(f_k')
    t = ratio[rows, y]                      # per-sample contribution to its class score
    p_class = np.zeros(counts.size)
    np.add.at(p_class, y, t)
    onehot = np.zeros_like(f)
    onehot[rows, y] = 1.0
    # d t_i / d f_{i,k} = t_i * (1[k=y_i] - n_k * ratio_{i,k})
    dt = t[:, None] * (onehot - counts[None, :] * ratio)
    return -dt / (k_present * p_class[y][:, None])


def _gml_class_scores(f: np.ndarray, y: np.ndarray, counts: np.ndarray) -> np.ndarray:
    m = f.max(axis=1, keepdims=True)
    e = np.exp(f - m)
    denom = (e * counts[None, :]).sum(axis=1)
    t = e[np.arange(y.size), y] / denom
    p_class = np.zeros(counts.size)
    np.add.at(p_class, y, t)
    return p_class
