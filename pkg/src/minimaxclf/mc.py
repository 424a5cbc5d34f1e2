"""Monte Carlo validation of the worst-class identification probability and
the exponentiated-risk MSE.

Trials run in fixed-size chunks with chunk seeds derived from the master
seed, so results do not depend on how the chunks would be scheduled, and the
failure count is an exact integer reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_CHUNK = 1 << 14
_MIN_TRIALS = 10_000


@dataclass(frozen=True)
class McEstimate:
    value: float
    ci_low: float
    ci_high: float
    trials: int
    standard_error: float


def _wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple:
    p = successes / trials
    denom = 1.0 + z**2 / trials
    center = (p + z**2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z**2 / (4 * trials**2)) / denom
    return center - half, center + half


def _check(probabilities: np.ndarray, trials: int) -> np.ndarray:
    p = np.asarray(probabilities, dtype=np.float64)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("error probabilities must lie in [0, 1]")
    if trials < _MIN_TRIALS:
        raise ValueError(f"need at least {_MIN_TRIALS} trials for a usable interval")
    return p


def mc_worst_class_failure(
    error_vector, m_worst: int, n_samples: int, trials: int, master_seed: int
) -> McEstimate:
    """Fraction of trials in which the true worst class is missed by the
    M-worst selection, with a Wilson 95% interval.

    Each trial draws N Bernoulli outcomes per class, ranks the empirical
    rates, and breaks ties fairly at random (uniform jitter below the 1/N
    resolution of the estimates).
    """
    p = _check(error_vector, trials)
    k = p.size
    if not (1 <= m_worst <= k):
        raise ValueError(f"m_worst must be in [1, {k}]")
    true_worst = int(np.argmax(p))
    failures = 0
    done = 0
    chunk_index = 0
    while done < trials:
        n = min(_CHUNK, trials - done)
        rng = np.random.default_rng(np.random.SeedSequence([master_seed, chunk_index]))
        counts = rng.binomial(n_samples, p, size=(n, k)).astype(np.float64)
        # integer counts differ by >= 1, so jitter in [0, 0.5) only breaks ties
        keyed = counts + 0.5 * rng.random((n, k))
        top = np.argpartition(-keyed, m_worst - 1, axis=1)[:, :m_worst]
        failures += int(np.sum(~np.any(top == true_worst, axis=1)))
        done += n
        chunk_index += 1
    rate = failures / trials
    lo, hi = _wilson_interval(failures, trials)
    se = math.sqrt(max(rate * (1 - rate), 1e-300) / trials)
    return McEstimate(rate, lo, hi, trials, se)


def mc_ega_mse(
    p_error: float, n_samples: int, trials: int, master_seed: int
) -> McEstimate:
    """Sample mean of (exp(P) - exp(Phat))^2 over seeded trials, with its
    standard error and a normal 95% interval."""
    p = float(_check(np.array([p_error]), trials)[0])
    target = math.exp(p)
    total = 0.0
    total_sq = 0.0
    done = 0
    chunk_index = 0
    while done < trials:
        n = min(_CHUNK, trials - done)
        rng = np.random.default_rng(np.random.SeedSequence([master_seed, chunk_index]))
        counts = rng.binomial(n_samples, p, size=n)
        values = (target - np.exp(counts / n_samples)) ** 2
        total += float(values.sum())
        total_sq += float((values**2).sum())
        done += n
        chunk_index += 1
    mean = total / trials
    variance = max(total_sq / trials - mean**2, 0.0)
    se = math.sqrt(variance / trials)
    z = 1.959963984540054
    return McEstimate(mean, mean - z * se, mean + z * se, trials, se)
