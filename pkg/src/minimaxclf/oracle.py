"""Bayes-optimal reference machinery for Gaussian mixtures.

For one-dimensional mixtures with a shared variance the class scores are
lines in x, so decision regions are intervals and per-class risks reduce to
normal CDF differences; everything else falls back to seeded Monte Carlo.
The total risk of the Bayes rule is concave in the prior, and its
supergradient at pi is the vector of per-class risks, which drives the
projected-ascent search for the adversarial prior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .ascent import ClassRisks
from .data import MixtureSpec, sample_mixture
from .priors import Prior, project_to_simplex

GRID = "grid"
ASCENT = "ascent"
AUTO = "auto"

_MIN_MC_SAMPLES = 10_000


def class_log_densities(spec: MixtureSpec, x: np.ndarray) -> np.ndarray:
    """(N, K) matrix of log N(x; mu_y, Sigma_y)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != spec.dim:
        raise ValueError(f"instances must be (N, {spec.dim}), got {x.shape}")
    n = x.shape[0]
    out = np.empty((n, spec.class_count))
    const = spec.dim * math.log(2.0 * math.pi)
    for y in range(spec.class_count):
        chol = np.linalg.cholesky(spec.covariances[y])
        diff = x - spec.means[y]
        sol = np.linalg.solve(chol, diff.T)
        maha = np.sum(sol**2, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        out[:, y] = -0.5 * (const + logdet + maha)
    return out


def _log_prior(pi: Prior) -> np.ndarray:
    p = pi.p
    return np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)


def bayes_predict(spec: MixtureSpec, pi: Prior, x: np.ndarray) -> np.ndarray:
    """argmax_y [ln pi_y + ln p(x|y)] with smallest-index tie-break."""
    scores = class_log_densities(spec, x) + _log_prior(pi)
    return np.argmax(scores, axis=1)


def _shared_sigma_1d(spec: MixtureSpec):
    """Common standard deviation if the mixture is 1-d with one shared
    variance, else None."""
    if spec.dim != 1:
        return None
    variances = spec.covariances[:, 0, 0]
    if np.allclose(variances, variances[0], rtol=1e-12, atol=0.0):
        return float(np.sqrt(variances[0]))
    return None


def _exact_risks_1d(means: np.ndarray, sigma: float, pi: Prior) -> np.ndarray:
    """Per-class Bayes risks for a 1-d shared-variance mixture.

    The class scores are lines a_y x + c_y with a_y = mu_y / sigma^2; the
    upper envelope assigns an interval (possibly empty) to each class.
    A class that never wins has risk 1.
    """
    k = means.size
    logp = _log_prior(pi)
    active = [y for y in range(k) if pi.p[y] > 0]
    slopes = means / sigma**2
    intercepts = logp - means**2 / (2.0 * sigma**2)
    # envelope sweep over classes sorted by slope (ascending); for equal
    # slopes only the best intercept can win (smallest index on exact ties,
    # matching bayes_predict)
    order = sorted(active, key=lambda y: (slopes[y], -intercepts[y], y))
    filtered = []
    for y in order:
        if filtered and slopes[y] == slopes[filtered[-1]]:
            continue  # same slope, worse or equal intercept
        filtered.append(y)
    hull = []        # class indices on the envelope, slope ascending
    breaks = []      # breaks[i] = x where hull[i+1] overtakes hull[i]
    for y in filtered:
        while hull:
            prev = hull[-1]
            bx = (intercepts[prev] - intercepts[y]) / (slopes[y] - slopes[prev])
            if breaks and bx <= breaks[-1]:
                # prev never wins once y exists: drop it and retry
                hull.pop()
                breaks.pop()
            else:
                breaks.append(bx)
                break
        hull.append(y)
    risks = np.ones(k)
    lo = -np.inf
    for i, y in enumerate(hull):
        hi = breaks[i] if i < len(breaks) else np.inf
        mass = ndtr((hi - means[y]) / sigma) - ndtr((lo - means[y]) / sigma)
        risks[y] = 1.0 - mass
        lo = hi
    return risks


def bayes_class_risks(
    spec: MixtureSpec, pi: Prior, mc_samples: int = 100_000, seed: int = 0
) -> ClassRisks:
    """Per-class error rates of the Bayes rule at prior ``pi``.

    Exact (normal CDF) for 1-d shared-variance mixtures; Monte Carlo with
    per-class sample counts and independent seed streams otherwise.
    """
    if pi.class_count != spec.class_count:
        raise ValueError("prior does not match the mixture's class count")
    sigma = _shared_sigma_1d(spec)
    if sigma is not None:
        risks = _exact_risks_1d(spec.means[:, 0], sigma, pi)
        return ClassRisks(risks, np.ones(spec.class_count, dtype=np.int64), exact=True)
    if mc_samples < _MIN_MC_SAMPLES:
        raise ValueError(f"no closed form for this mixture; need mc_samples >= {_MIN_MC_SAMPLES}")
    counts = np.full(spec.class_count, int(mc_samples), dtype=np.int64)
    ds = sample_mixture(spec, counts, seed)
    predictions = bayes_predict(spec, pi, ds.instances)
    estimates = np.empty(spec.class_count)
    for y in range(spec.class_count):
        idx = ds.class_indices(y)
        estimates[y] = np.mean(predictions[idx] != y)
    return ClassRisks(estimates, counts)


def bayes_total_risk(
    spec: MixtureSpec, pi: Prior, mc_samples: int = 100_000, seed: int = 0
) -> float:
    """R(pi) = sum_y pi_y P_e(y) for the Bayes rule at pi."""
    risks = bayes_class_risks(spec, pi, mc_samples=mc_samples, seed=seed)
    return float(np.dot(pi.p, risks.estimates))


def _exact_total_risk_grid_1d(means: np.ndarray, sigma: float, pis: np.ndarray) -> np.ndarray:
    """Vectorized R(pi) over an array of priors, for K in {2, 3} 1-d
    shared-variance mixtures (used by the grid search)."""
    k = means.size
    order = np.argsort(means)
    mu = means[order]
    p = pis[:, order]
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)

        def threshold(i, j):
            return (mu[i] + mu[j]) / 2.0 + sigma**2 * (logp[:, i] - logp[:, j]) / (mu[j] - mu[i])

        if k == 2:
            t = threshold(0, 1)
            r0 = 1.0 - ndtr((t - mu[0]) / sigma)
            r1 = ndtr((t - mu[1]) / sigma)
            risks = np.stack([r0, r1], axis=1)
        elif k == 3:
            t01 = threshold(0, 1)
            t12 = threshold(1, 2)
            t02 = threshold(0, 2)
            mid = (p[:, 1] > 0) & (t01 < t12)
            b_low = np.where(mid, t01, t02)   # upper edge of class 0's region
            b_high = np.where(mid, t12, t02)  # lower edge of class 2's region
            r0 = 1.0 - ndtr((b_low - mu[0]) / sigma)
            r2 = ndtr((b_high - mu[2]) / sigma)
            r1 = np.where(mid, 1.0 - (ndtr((t12 - mu[1]) / sigma) - ndtr((t01 - mu[1]) / sigma)), 1.0)
            risks = np.stack([r0, r1, r2], axis=1)
        else:
            raise ValueError("vectorized grid evaluation supports K <= 3 only")
        risks = np.where(p > 0, risks, 1.0)
    return np.einsum("gk,gk->g", p, np.nan_to_num(risks, nan=1.0))


def _simplex_grid(k: int, resolution: float) -> np.ndarray:
    steps = int(round(1.0 / resolution))
    if k == 2:
        i = np.arange(steps + 1)
        return np.stack([i, steps - i], axis=1) / steps
    if k == 3:
        i, j = np.meshgrid(np.arange(steps + 1), np.arange(steps + 1), indexing="ij")
        keep = i + j <= steps
        i, j = i[keep], j[keep]
        return np.stack([i, j, steps - i - j], axis=1) / steps
    raise ValueError("exhaustive simplex grid supported for K <= 3 only")


@dataclass(frozen=True)
class SearchResult:
    prior: Prior
    risk: float
    method: str
    converged: bool
    iterations: int


def adversarial_prior_search(
    spec: MixtureSpec,
    method: str = AUTO,
    resolution: float = 1e-3,
    iterations: int = 2000,
    step_scale: float = 0.1,
    mc_samples: int = 100_000,
    seed: int = 0,
) -> SearchResult:
    """Maximize the concave R(pi) over the simplex.

    Grid search enumerates the simplex at ``resolution`` (K <= 3 only);
    supergradient ascent iterates pi <- project(pi + (c/sqrt t) risks(pi)),
    valid because the risk vector is a supergradient of R.
    """
    k = spec.class_count
    if method == AUTO:
        method = GRID if k <= 3 else ASCENT
    sigma = _shared_sigma_1d(spec)
    if method == GRID:
        if k > 3:
            raise ValueError("grid search supports K <= 3; use method='ascent'")
        grid = _simplex_grid(k, resolution)
        if sigma is not None:
            values = _exact_total_risk_grid_1d(spec.means[:, 0], sigma, grid)
        else:
            values = np.array(
                [
                    bayes_total_risk(spec, Prior(g), mc_samples=mc_samples, seed=seed)
                    for g in grid
                ]
            )
        best = int(np.argmax(values))
        return SearchResult(
            prior=Prior(grid[best]),
            risk=float(values[best]),
            method=GRID,
            converged=True,
            iterations=len(grid),
        )
    if method != ASCENT:
        raise ValueError(f"unknown search method {method!r}")
    pi = np.full(k, 1.0 / k)
    best_pi = pi.copy()
    best_risk = -np.inf
    last_improvement = 0
    for t in range(1, iterations + 1):
        risks = bayes_class_risks(spec, Prior(pi), mc_samples=mc_samples, seed=seed)
        value = float(np.dot(pi, risks.estimates))
        if value > best_risk:
            best_risk = value
            best_pi = pi.copy()
            last_improvement = t
        pi = project_to_simplex(pi + step_scale / math.sqrt(t) * risks.estimates)
    # flagged as unconverged if the best point still moved late in the run
    converged = last_improvement <= max(1, int(0.75 * iterations))
    return SearchResult(
        prior=Prior(best_pi),
        risk=best_risk,
        method=ASCENT,
        converged=converged,
        iterations=iterations,
    )
