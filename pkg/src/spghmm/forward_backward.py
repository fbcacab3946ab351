"""Scaled forward-backward recursions on the starred (sub-normalised) parameters.

The recursions run on ``a*`` and ``b*`` exactly as a Baum-Welch E-step would,
except that those quantities need not be normalised; the product of the
scaling constants then gives ``ln q(y | Theta)``, the leading ELBO term.

With hundreds of locations ``b*_tj`` underflows, so every row of the
emission scores is shifted by its maximum before exponentiation and the
shift is folded back into ``log_c``. The stored ``b_tilde`` is therefore the
textbook scaled backward variable multiplied by ``exp(max_j ln b*_tj)``;
this per-time constant cancels in every marginal.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .errors import DegeneracyError, DomainError


@dataclass(frozen=True, eq=False)
class FBResult:
    f_tilde: np.ndarray  # (T, K), rows sum to 1
    b_tilde: np.ndarray  # (T, K)
    log_c: np.ndarray  # (T,), ln c_t
    log_lik: float


@dataclass(frozen=True, eq=False)
class LatentMarginals:
    """Expected latent-variable statistics from one E-step.

    ``q_init`` is the summed first-day state posterior over all chains (the
    ``q_1j`` entering the initial-distribution update). ``counts`` and
    ``wet_sums`` are the state-weighted mixture statistics consumed by the
    M-step; ``resp`` holds the full responsibility array only when asked for.
    """

    q_t: np.ndarray  # (T, K)
    q_trans: np.ndarray  # (K, K)
    q_init: np.ndarray  # (K,)
    counts: np.ndarray = None  # (K, L, M+1)
    wet_sums: np.ndarray = None  # (K, L, M)
    resp: object = None


@numba.njit(cache=True)
def _forward_kernel(log_b, log_a1, log_a):
    T, K = log_b.shape
    a1 = np.exp(log_a1)
    A = np.exp(log_a)
    f = np.empty((T, K))
    log_c = np.empty(T)
    row = np.empty(K)
    for t in range(T):
        m = log_b[t, 0]
        for j in range(1, K):
            if log_b[t, j] > m:
                m = log_b[t, j]
        if not np.isfinite(m):
            return f, log_c, t
        s = 0.0
        for k in range(K):
            if t == 0:
                acc = a1[k]
            else:
                acc = 0.0
                for j in range(K):
                    acc += f[t - 1, j] * A[j, k]
            row[k] = acc * np.exp(log_b[t, k] - m)
            s += row[k]
        if not (s > 0.0) or not np.isfinite(s):
            return f, log_c, t
        for k in range(K):
            f[t, k] = row[k] / s
        log_c[t] = -(np.log(s) + m)
    return f, log_c, -1


@numba.njit(cache=True)
def _backward_kernel(log_b, log_a, log_c):
    T, K = log_b.shape
    A = np.exp(log_a)
    b = np.empty((T, K))
    e = np.empty(K)
    m_next = log_b[T - 1, 0]
    for j in range(1, K):
        if log_b[T - 1, j] > m_next:
            m_next = log_b[T - 1, j]
    c_hat = np.exp(log_c[T - 1] + m_next)
    for j in range(K):
        b[T - 1, j] = c_hat
    for t in range(T - 2, -1, -1):
        for k in range(K):
            e[k] = np.exp(log_b[t + 1, k] - m_next) * b[t + 1, k]
        m = log_b[t, 0]
        for j in range(1, K):
            if log_b[t, j] > m:
                m = log_b[t, j]
        c_hat = np.exp(log_c[t] + m)
        for j in range(K):
            acc = 0.0
            for k in range(K):
                acc += A[j, k] * e[k]
            b[t, j] = c_hat * acc
        m_next = m
    return b


def forward(scores, params):
    """Scaled forward pass. Returns ``(f_tilde, log_c, log_lik)``."""
    log_b = np.ascontiguousarray(getattr(scores, "log_b_star", scores), dtype=np.float64)
    f, log_c, bad = _forward_kernel(
        log_b,
        np.ascontiguousarray(params.log_a1_star, dtype=np.float64),
        np.ascontiguousarray(params.log_a_star, dtype=np.float64),
    )
    if bad >= 0:
        raise DegeneracyError(f"forward recursion degenerate at t={bad}: no state has positive mass", t=int(bad))
    return f, log_c, float(-np.sum(log_c))


def backward(scores, params, log_c):
    log_b = np.ascontiguousarray(getattr(scores, "log_b_star", scores), dtype=np.float64)
    return _backward_kernel(
        log_b,
        np.ascontiguousarray(params.log_a_star, dtype=np.float64),
        np.ascontiguousarray(log_c, dtype=np.float64),
    )


def marginals(f_tilde, b_tilde, scores, params, resp=None):
    log_b = np.asarray(getattr(scores, "log_b_star", scores), dtype=np.float64)
    T, K = log_b.shape
    post = f_tilde * b_tilde
    norm = post.sum(axis=1, keepdims=True)
    if not np.all(norm > 0):
        t = int(np.argmin(norm[:, 0] > 0))
        raise DegeneracyError(f"state marginal normaliser is zero at t={t}", t=t)
    q_t = post / norm

    q_trans = np.zeros((K, K))
    if T > 1:
        A = np.exp(params.log_a_star)
        e = np.exp(log_b[1:] - log_b[1:].max(axis=1, keepdims=True)) * b_tilde[1:]
        pair = f_tilde[:-1, :, None] * A[None] * e[:, None, :]
        pnorm = pair.sum(axis=(1, 2))
        if not np.all(pnorm > 0):
            t = int(np.argmin(pnorm > 0))
            raise DegeneracyError(f"pairwise normaliser is zero at t={t}", t=t)
        q_trans = (pair / pnorm[:, None, None]).sum(axis=0)
    return LatentMarginals(q_t=q_t, q_trans=q_trans, q_init=q_t[0].copy(), resp=resp)


def forward_backward(scores, params):
    """One full pass on a single chain: ``(FBResult, LatentMarginals)``."""
    f, log_c, log_lik = forward(scores, params)
    b = backward(scores, params, log_c)
    return FBResult(f, b, log_c, log_lik), marginals(f, b, scores, params)


def chain_bounds(T, lengths=None):
    """Start/stop indices of consecutive independent chains covering ``T`` rows."""
    if lengths is None:
        return [(0, T)]
    lengths = [int(n) for n in lengths]
    if sum(lengths) != T or any(n < 1 for n in lengths):
        raise DomainError(f"chain lengths {lengths} do not partition T={T}")
    ends = np.cumsum(lengths)
    return list(zip(np.concatenate([[0], ends[:-1]]).tolist(), ends.tolist()))


def forward_backward_chains(scores, params, lengths=None):
    """Forward-backward over independent chains, each restarting from ``a*_1``.

    Returns ``(log_lik, LatentMarginals)`` with the log-likelihoods, first-day
    posteriors and transition expectations summed over chains.
    """
    log_b = np.asarray(getattr(scores, "log_b_star", scores), dtype=np.float64)
    T, K = log_b.shape
    q_t = np.empty((T, K))
    q_trans = np.zeros((K, K))
    q_init = np.zeros(K)
    log_lik = 0.0
    for a, b in chain_bounds(T, lengths):
        fb, mg = forward_backward(log_b[a:b], params)
        q_t[a:b] = mg.q_t
        q_trans += mg.q_trans
        q_init += mg.q_init
        log_lik += fb.log_lik
    return log_lik, LatentMarginals(q_t=q_t, q_trans=q_trans, q_init=q_init)
