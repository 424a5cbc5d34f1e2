"""Target-prior updates: estimate per-class risks on held-out data, then move
the prior toward the adversary by linear ascent or exponentiated gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import LabeledDataset
from .model import ModelParams, predict
from .priors import Prior

LINEAR_ASCENT = "linear"
EGA = "ega"


@dataclass(frozen=True)
class ClassRisks:
    """Per-class empirical error rates and the sample counts behind them."""

    estimates: np.ndarray  # (K,), values in [0, 1]
    counts: np.ndarray     # (K,), samples used per class
    exact: bool = False    # True when the estimates carry no sampling error

    def __post_init__(self) -> None:
        e = np.asarray(self.estimates, dtype=np.float64)
        c = np.asarray(self.counts, dtype=np.int64)
        if e.ndim != 1 or c.shape != e.shape:
            raise ValueError("estimates and counts must be 1-d vectors of equal length")
        if np.any((e < 0) | (e > 1)):
            raise ValueError("risk estimates must lie in [0, 1]")
        if np.any(c < 1):
            raise ValueError("every class needs at least one sample")
        object.__setattr__(self, "estimates", e)
        object.__setattr__(self, "counts", c)

    @property
    def class_count(self) -> int:
        return int(self.estimates.size)

    def standard_errors(self) -> np.ndarray:
        if self.exact:
            return np.zeros(self.class_count)
        p = self.estimates
        return np.sqrt(p * (1.0 - p) / self.counts)


@dataclass
class AscentState:
    """Mutable state of one prior-ascent run (single driver)."""

    prior: Prior
    method: str
    alpha: float
    m_worst: int = 1
    trajectory: list = field(default_factory=list)
    tie_rng: Optional[np.random.Generator] = None

    def __post_init__(self) -> None:
        if self.method not in (LINEAR_ASCENT, EGA):
            raise ValueError(f"unknown ascent method {self.method!r}")
        if self.method == LINEAR_ASCENT and not (0.0 < self.alpha < 1.0):
            raise ValueError(f"linear ascent needs alpha in (0, 1), got {self.alpha}")
        if self.method == EGA and self.alpha <= 0:
            raise ValueError(f"EGA needs alpha > 0, got {self.alpha}")
        if not (1 <= self.m_worst <= self.prior.class_count):
            raise ValueError(f"m_worst must be in [1, {self.prior.class_count}]")
        if self.tie_rng is None:
            self.tie_rng = np.random.default_rng(0)
        if not self.trajectory:
            self.trajectory.append(self.prior)


def estimate_class_risks(params: ModelParams, dataset: LabeledDataset) -> ClassRisks:
    """Empirical per-class error rates of the model on the dataset."""
    counts = dataset.per_class_counts
    if np.any(counts < 1):
        missing = np.flatnonzero(counts < 1).tolist()
        raise ValueError(f"classes {missing} absent from dataset, risks undefined")
    predictions = predict(params, dataset.instances)
    errors = np.zeros(dataset.class_count, dtype=np.int64)
    wrong = predictions != dataset.labels
    np.add.at(errors, dataset.labels[wrong], 1)
    return ClassRisks(errors / counts, counts)


def worst_m_indicator(risks: ClassRisks, m_worst: int, rng: np.random.Generator) -> Prior:
    """Uniform mass 1/M on the M classes with the largest risk estimates.

    Ties are broken by a seeded random permutation, so tied classes are
    selected with equal probability.
    """
    k = risks.class_count
    if not (1 <= m_worst <= k):
        raise ValueError(f"m_worst must be in [1, {k}]")
    tiebreak = rng.permutation(k)
    # primary key: risk descending; secondary: random permutation position
    order = np.lexsort((tiebreak, -risks.estimates))
    indicator = np.zeros(k)
    indicator[order[:m_worst]] = 1.0 / m_worst
    return Prior(indicator)


def auto_m(risks: ClassRisks, margin: float = 0.05) -> int:
    """Smallest M covering every class whose estimated risk is within
    ``margin`` of the worst one."""
    worst = float(risks.estimates.max())
    return int(np.count_nonzero(risks.estimates >= worst - margin))


def linear_ascent_step(state: AscentState, indicator: Prior) -> Prior:
    """pi <- pi + alpha (indicator - pi). Appends to the trajectory."""
    if state.method != LINEAR_ASCENT:
        raise ValueError(f"state method is {state.method!r}, not linear")
    p = state.prior.p + state.alpha * (indicator.p - state.prior.p)
    new = Prior(p / p.sum())
    state.prior = new
    state.trajectory.append(new)
    return new


def ega_step(state: AscentState, risks: ClassRisks) -> Prior:
    """pi_y <- pi_y exp(alpha risk_y), renormalized. Zero coordinates stay zero."""
    if state.method != EGA:
        raise ValueError(f"state method is {state.method!r}, not ega")
    if risks.class_count != state.prior.class_count:
        raise ValueError("risk vector does not match the prior's class count")
    w = state.prior.p * np.exp(state.alpha * risks.estimates)
    new = Prior(w / w.sum())
    state.prior = new
    state.trajectory.append(new)
    return new


def ascent_step(state: AscentState, risks: ClassRisks) -> Prior:
    """Dispatch one update of either method from a risk vector."""
    if state.method == LINEAR_ASCENT:
        indicator = worst_m_indicator(risks, state.m_worst, state.tie_rng)
        return linear_ascent_step(state, indicator)
    return ega_step(state, risks)
