"""Semi-continuous per-location emissions: a dry atom plus M exponentials.

An observation ``y == 0`` can only come from the dry atom (component 0) and
``y > 0`` only from the exponential components, so the two cases never mix.
Rainfall below the ingestion threshold must already be clamped to exactly 0.

All work is done in time chunks so that the (T, K, L, M) intermediate never
materialises at full size; chunks can be farmed out to threads and partial
sums are always combined in chunk order, so results do not depend on the
thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .numkernel import log_sum_exp

DEFAULT_CHUNK = 256


@dataclass(frozen=True, eq=False)
class EmissionScores:
    log_b_star: np.ndarray  # (T, K)


@dataclass(frozen=True, eq=False)
class Responsibilities:
    q_r: np.ndarray  # (T, K, L, M+1)


def check_data(data, L=None):
    y = np.asarray(data, dtype=np.float64)
    if y.ndim != 2:
        raise DomainError(f"data must be a (T, L) matrix, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise DomainError("data contains non-finite values")
    if np.any(y < 0):
        t, l = np.argwhere(y < 0)[0]
        raise DomainError(f"negative precipitation at t={t}, l={l}")
    if L is not None and y.shape[1] != L:
        raise DomainError(f"data has {y.shape[1]} locations, model has {L}")
    return y


def _chunks(T, chunk):
    return [(s, min(s + chunk, T)) for s in range(0, T, chunk)]


def _map_chunks(fn, T, chunk, threads):
    spans = _chunks(T, chunk)
    if threads is None or threads <= 1 or len(spans) == 1:
        return [fn(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), spans))


def _wet_terms(y, params):
    # (n, K, L, M): log c*_jlm + log lambda*_jlm - y * lambda_hat_jlm
    return (
        params.log_c_star[None, :, :, 1:]
        + params.log_lambda_star[None]
        - y[:, None, :, None] * params.lambda_hat[None]
    )


def _chunk_scores(y, params):
    wet = y > 0
    terms = _wet_terms(y, params)
    wet_score = log_sum_exp(terms, axis=-1)
    s = np.where(wet[:, None, :], wet_score, params.log_c_star[None, :, :, 0])
    return s, terms, wet_score, wet


def log_emission_matrix(data, params, chunk=DEFAULT_CHUNK, threads=1):
    """ln b*_tj = sum over locations of the log mixture score, shape (T, K)."""
    y = check_data(data, params.dims.L)

    def work(a, b):
        return _chunk_scores(y[a:b], params)[0].sum(axis=2)

    parts = _map_chunks(work, y.shape[0], chunk, threads)
    return EmissionScores(log_b_star=np.concatenate(parts, axis=0))


def _chunk_resp(y, params):
    _, terms, wet_score, wet = _chunk_scores(y, params)
    n, K, L, M = terms.shape
    q = np.zeros((n, K, L, M + 1))
    q[..., 1:] = np.exp(terms - wet_score[..., None])
    wet4 = wet[:, None, :, None]
    q[..., 1:] = np.where(wet4, q[..., 1:], 0.0)
    q[..., 0] = np.where(wet[:, None, :], 0.0, 1.0)
    return q


def responsibilities(data, params):
    """Mixture-component posteriors q_tjlm for every (t, j, l), shape (T, K, L, M+1)."""
    y = check_data(data, params.dims.L)
    return Responsibilities(q_r=_chunk_resp(y, params))


def emission_statistics(data, params, weights, chunk=DEFAULT_CHUNK, threads=1):
    """State-weighted mixture sufficient statistics, streamed over time.

    Returns ``(counts, wet_sums)`` with
    ``counts[j, l, m] = sum_t w_tj q_tjlm`` (m = 0..M) and
    ``wet_sums[j, l, m] = sum_t w_tj q_tjlm y_tl`` (m = 1..M).
    """
    y = check_data(data, params.dims.L)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (y.shape[0], params.dims.K):
        raise DomainError(f"weights must have shape {(y.shape[0], params.dims.K)}")

    def work(a, b):
        q = _chunk_resp(y[a:b], params)
        counts = np.einsum("tj,tjlm->jlm", w[a:b], q)
        wet_sums = np.einsum("tj,tjlm,tl->jlm", w[a:b], q[..., 1:], y[a:b])
        return counts, wet_sums

    parts = _map_chunks(work, y.shape[0], chunk, threads)
    counts = parts[0][0].copy()
    wet_sums = parts[0][1].copy()
    for c, s in parts[1:]:
        counts += c
        wet_sums += s
    return counts, wet_sums
