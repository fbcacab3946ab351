"""Synthetic precipitation from explicit or fitted HMM parameters."""

from dataclasses import dataclass

import numba
import numpy as np

from .forward_backward import chain_bounds
from .model import PointParams, posterior_means


@dataclass(frozen=True, eq=False)
class SyntheticRun:
    data: np.ndarray  # (T, L) mm/day
    states: np.ndarray  # (T,) 0-based
    components: np.ndarray  # (T, L), 0 = dry atom
    seed: object = None


def paper_simulation_preset():
    """Three-state, three-location, two-exponential truth of the simulation study."""
    C = [
        [[0.10, 0.60, 0.30], [0.20, 0.70, 0.10], [0.20, 0.60, 0.20]],
        [[0.20, 0.40, 0.40], [0.40, 0.20, 0.40], [0.50, 0.30, 0.20]],
        [[0.30, 0.40, 0.30], [0.50, 0.20, 0.30], [0.60, 0.20, 0.20]],
    ]
    Lambda = [
        [[0.08, 1.0], [0.05, 1.0], [0.10, 1.0]],
        [[0.60, 5.0], [0.50, 4.0], [0.10, 5.0]],
        [[1.00, 8.0], [1.00, 10.0], [0.90, 6.0]],
    ]
    return PointParams(
        pi1=[0.38, 0.34, 0.28],
        A=[[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.3, 0.2, 0.5]],
        C=C,
        Lambda=Lambda,
    )


@numba.njit(cache=True)
def _chain(cum_pi, cum_A, u, starts):
    T = u.shape[0]
    K = cum_pi.shape[0]
    s = np.empty(T, dtype=np.int64)
    for t in range(T):
        cum = cum_pi if starts[t] else cum_A[s[t - 1]]
        k = 0
        while k < K - 1 and u[t] >= cum[k]:
            k += 1
        s[t] = k
    return s


def simulate(params, T, rng, lengths=None):
    """Draw a state path and rainfall field of length ``T``.

    ``lengths`` splits the run into independent blocks, each starting afresh
    from the initial distribution.
    """
    K, L, M = params.C.shape[0], params.C.shape[1], params.C.shape[2] - 1
    starts = np.zeros(T, dtype=np.bool_)
    for a, _ in chain_bounds(T, lengths):
        starts[a] = True
    u_state = rng.random(T)
    u_comp = rng.random((T, L))
    expo = rng.standard_exponential((T, L))

    states = _chain(np.cumsum(params.pi1), np.cumsum(params.A, axis=1), u_state, starts)
    cum_c = np.cumsum(params.C[states], axis=-1)  # (T, L, M+1)
    comps = np.minimum((u_comp[..., None] >= cum_c).sum(axis=-1), M)
    rates = params.Lambda[states[:, None], np.arange(L)[None, :], np.maximum(comps - 1, 0)]
    expo = np.where(expo > 0, expo, np.finfo(float).tiny)
    data = np.where(comps > 0, expo / rates, 0.0)
    return SyntheticRun(data=data, states=states, components=comps)


def draw_point_params(posterior, rng):
    """One draw of (pi1, A, C, Lambda) from the variational posterior."""
    K, L, M1 = posterior.zeta.shape

    def dirichlet_rows(a):
        g = rng.standard_gamma(a)
        return g / g.sum(axis=-1, keepdims=True)

    return PointParams(
        pi1=dirichlet_rows(posterior.xi),
        A=dirichlet_rows(posterior.alpha),
        C=dirichlet_rows(posterior.zeta),
        Lambda=rng.standard_gamma(posterior.gamma_shape) / posterior.delta_rate,
    )


def simulate_from_posterior(posterior, T, rng, lengths=None, draw_params=False):
    """Simulate from posterior means (default) or from one posterior draw."""
    params = draw_point_params(posterior, rng) if draw_params else posterior_means(posterior)
    return simulate(params, T, rng, lengths)


def replicate_rngs(seed, n):
    """Independent generators derived deterministically from a master seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def simulate_replicates(params, T, n, seed, lengths=None):
    """Yield ``n`` independent SyntheticRuns."""
    for i, rng in enumerate(replicate_rngs(seed, n)):
        run = simulate(params, T, rng, lengths)
        yield SyntheticRun(run.data, run.states, run.components, seed=(seed, i))
