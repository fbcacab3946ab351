"""Validation metrics: marginal statistics, state alignment and confusion tables."""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import Hyperparameters, PointParams, posterior_means

NO_DATA = float("nan")
MAX_ALIGN_STATES = 8


@dataclass(frozen=True, eq=False)
class LocationStats:
    dry_proportion: np.ndarray  # (L,)
    mean_intensity: np.ndarray  # (L,), NaN where no wet day was seen
    n_days: int = 0


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # (K, K), rows decoded, columns true
    per_state_recall: np.ndarray
    accuracy: float


def location_stats(data, states=None, state=None):
    """Dry-day fraction and wet-day mean per location, optionally for one decoded state."""
    y = np.asarray(data, dtype=np.float64)
    if state is not None:
        if states is None or len(states) != y.shape[0]:
            raise DomainError("a state mask needs a decoded path of matching length")
        y = y[np.asarray(states) == state]
    n = y.shape[0]
    if n == 0:
        L = y.shape[1]
        return LocationStats(np.full(L, NO_DATA), np.full(L, NO_DATA), 0)
    wet = y > 0
    n_wet = wet.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        intensity = np.where(n_wet > 0, np.where(wet, y, 0.0).sum(axis=0) / n_wet, NO_DATA)
    return LocationStats(dry_proportion=1.0 - n_wet / n, mean_intensity=intensity, n_days=n)


def per_state_stats(data, states, K):
    return [location_stats(data, states, j) for j in range(K)]


def expected_wetness(params):
    """Expected daily rainfall per state, averaged over locations."""
    if isinstance(params, Hyperparameters):
        params = posterior_means(params)
    return np.mean(np.sum(params.C[..., 1:] / params.Lambda, axis=-1), axis=1)


def order_by_wetness(params):
    """Permutation putting the wettest state first (stable for ties)."""
    return np.argsort(-expected_wetness(params), kind="stable")


def _param_cost(ref, cand, perm):
    tv = 0.5 * np.abs(ref.C - cand.C[list(perm)]).sum(axis=-1).sum()
    rate = np.abs(np.log(ref.Lambda) - np.log(cand.Lambda[list(perm)])).mean(axis=-1).sum()
    return tv + rate


def align_states(reference, candidate, K=None):
    """Best state matching by exhaustive search over permutations.

    Accepts two PointParams/Hyperparameters (matched on mixture-weight total
    variation plus log-rate distance) or two label sequences (Hamming
    distance). Returns ``perm`` with ``perm[j]`` the candidate state that plays
    reference state ``j``; ties go to the lexicographically first permutation.
    """
    if isinstance(reference, Hyperparameters):
        reference = posterior_means(reference)
    if isinstance(candidate, Hyperparameters):
        candidate = posterior_means(candidate)
    if isinstance(reference, PointParams):
        K = reference.dims.K

        def cost(perm):
            return _param_cost(reference, candidate, perm)

    else:
        ref = np.asarray(reference)
        cand = np.asarray(candidate)
        if ref.shape != cand.shape:
            raise DomainError("label sequences differ in length")
        K = K or int(max(ref.max(), cand.max())) + 1
        joint = np.zeros((K, K), dtype=np.int64)
        np.add.at(joint, (ref, cand), 1)

        def cost(perm):
            return -int(joint[np.arange(K), list(perm)].sum())

    if K > MAX_ALIGN_STATES:
        raise DomainError(f"exhaustive alignment limited to K <= {MAX_ALIGN_STATES}; order by wetness instead")
    best, best_cost = None, None
    for perm in itertools.permutations(range(K)):
        c = cost(perm)
        if best_cost is None or c < best_cost:
            best, best_cost = perm, c
    return np.array(best)


def relabel(labels, perm):
    """Map candidate labels onto reference labels given ``perm`` from align_states."""
    return np.argsort(perm)[np.asarray(labels)]


def confusion(true_states, decoded_states, perm=None, K=None):
    true_states = np.asarray(true_states)
    decoded = np.asarray(decoded_states)
    if true_states.shape != decoded.shape:
        raise DomainError("sequence lengths differ")
    if perm is not None:
        decoded = relabel(decoded, perm)
        K = K or len(perm)
    K = K or int(max(true_states.max(), decoded.max())) + 1
    counts = np.zeros((K, K), dtype=np.int64)
    np.add.at(counts, (decoded, true_states), 1)
    col = counts.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        recall = np.where(col > 0, np.diag(counts) / col, NO_DATA)
    return ConfusionMatrix(counts, recall, float(np.trace(counts) / counts.sum()))


def monthly_state_distribution(states, dates, K):
    """Percentage of days in each state per calendar month.

    Returns ``(months, table)`` with ``table[j, i]`` the share of month
    ``months[i]`` spent in state ``j``; each column sums to 100.
    """
    states = np.asarray(states)
    month = np.asarray(dates, dtype="datetime64[M]").astype(int) % 12 + 1
    if month.shape != states.shape:
        raise DomainError("dates and states differ in length")
    months = np.unique(month)
    table = np.zeros((K, len(months)))
    for i, m in enumerate(months):
        sel = states[month == m]
        table[:, i] = 100.0 * np.bincount(sel, minlength=K)[:K] / len(sel)
    return months.tolist(), table


def rmse(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DomainError("rmse inputs differ in shape")
    if np.any(np.isnan(a)) or np.any(np.isnan(b)):
        raise DomainError("rmse over no-data entries")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def replicate_rmse(replicate_values, reference):
    """Per-location RMSE of replicate statistics (n, L) around a reference (L,)."""
    r = np.asarray(replicate_values, dtype=np.float64)
    return np.sqrt(np.nanmean((r - np.asarray(reference)[None, :]) ** 2, axis=0))


def replicate_summary(runs, quantiles=(0.025, 0.25, 0.5, 0.75, 0.975)):
    """Distribution of per-location dry fraction and wet-day mean over replicate runs."""
    dry, inten = [], []
    for run in runs:
        data = getattr(run, "data", run)
        s = location_stats(data)
        dry.append(s.dry_proportion)
        inten.append(s.mean_intensity)
    dry = np.array(dry)
    inten = np.array(inten)
    q = np.asarray(quantiles)
    return {
        "replicates": int(dry.shape[0]),
        "quantile_levels": q.tolist(),
        "dry_proportion": dry,
        "mean_intensity": inten,
        "dry_quantiles": np.nanquantile(dry, q, axis=0),
        "intensity_quantiles": np.nanquantile(inten, q, axis=0),
    }
