"""Max-product decoding of the most likely state path."""

from dataclasses import dataclass

import numba
import numpy as np

from .emissions import log_emission_matrix
from .forward_backward import chain_bounds
from .model import ExpectedParams, expected_params, posterior_means


@dataclass(frozen=True, eq=False)
class StatePath:
    states: np.ndarray  # (T,), 0-based state labels
    log_score: float


@numba.njit(cache=True)
def _viterbi_kernel(log_b, log_a1, log_a):
    T, K = log_b.shape
    delta = np.empty(K)
    nxt = np.empty(K)
    back = np.zeros((T, K), dtype=np.int64)
    for k in range(K):
        delta[k] = log_a1[k] + log_b[0, k]
    for t in range(1, T):
        for k in range(K):
            best = delta[0] + log_a[0, k]
            arg = 0
            for j in range(1, K):
                v = delta[j] + log_a[j, k]
                if v > best:
                    best = v
                    arg = j
            back[t, k] = arg
            nxt[k] = best + log_b[t, k]
        for k in range(K):
            delta[k] = nxt[k]
    path = np.empty(T, dtype=np.int64)
    best = delta[0]
    arg = 0
    for k in range(1, K):
        if delta[k] > best:
            best = delta[k]
            arg = k
    path[T - 1] = arg
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, best


def viterbi(scores, params):
    """Decode one chain from (T, K) log emission scores and starred parameters."""
    log_b = np.ascontiguousarray(getattr(scores, "log_b_star", scores), dtype=np.float64)
    path, score = _viterbi_kernel(
        log_b,
        np.ascontiguousarray(params.log_a1_star, dtype=np.float64),
        np.ascontiguousarray(params.log_a_star, dtype=np.float64),
    )
    return StatePath(states=path, log_score=float(score))


def point_as_expected(point):
    """Plug-in parameter set that makes the decoder use posterior means."""
    with np.errstate(divide="ignore"):
        return ExpectedParams(
            log_a1_star=np.log(point.pi1),
            log_a_star=np.log(point.A),
            log_c_star=np.log(point.C),
            log_lambda_star=np.log(point.Lambda),
            lambda_hat=point.Lambda,
        )


def decode(data, posterior, lengths=None, use_means=False, threads=1):
    """Most likely state path, one independent chain per entry of ``lengths``.

    By default decoding uses the starred expectations of the E-step; with
    ``use_means`` it uses the posterior-mean point parameters instead.
    """
    params = point_as_expected(posterior_means(posterior)) if use_means else expected_params(posterior)
    log_b = log_emission_matrix(data, params, threads=threads).log_b_star
    states = np.empty(log_b.shape[0], dtype=np.int64)
    total = 0.0
    for a, b in chain_bounds(log_b.shape[0], lengths):
        sp = viterbi(log_b[a:b], params)
        states[a:b] = sp.states
        total += sp.log_score
    return StatePath(states=states, log_score=total)


def path_log_joint(states, scores, params):
    """Log of a1*[s_1] * prod a*[s_t, s_t+1] * prod b*[t, s_t] for a given path."""
    log_b = np.asarray(getattr(scores, "log_b_star", scores))
    s = np.asarray(states)
    return float(
        params.log_a1_star[s[0]]
        + params.log_a_star[s[:-1], s[1:]].sum()
        + log_b[np.arange(len(s)), s].sum()
    )
