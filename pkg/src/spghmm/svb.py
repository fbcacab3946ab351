"""Stochastic VB over exchangeable year blocks.

Each iteration draws one block uniformly with replacement, runs the usual
E-step on it as an independent chain, and moves every hyperparameter a step
``tau_i = (1 + i) ** -kappa`` towards ``prior + N * block statistics``. For
conjugate-exponential models this blend is the natural-gradient step, so the
Fisher matrix is never formed. The run ends with a few full-data CAVI sweeps.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .forward_backward import LatentMarginals
from .model import Hyperparameters
from .vbem import FitConfig, FitTrace, elbo, fit_cavi, jittered, sufficient_statistics, vbe_step

log = logging.getLogger(__name__)


@dataclass
class SvbConfig:
    svb_iterations: int = 500
    kappa: float = 0.9
    polish_cavi_iterations: int = 50
    seed: int = 0
    scale_initial: bool = False
    batch_blocks: int = 1
    polish_as_blocks: bool = True

    def __post_init__(self):
        check_kappa(self.kappa)
        if self.svb_iterations < 0 or self.polish_cavi_iterations < 0:
            raise ConfigError("iteration counts must be >= 0")
        if self.batch_blocks < 1:
            raise ConfigError("batch_blocks must be >= 1")


def check_kappa(kappa):
    # Robbins-Monro: sum tau diverges and sum tau**2 converges iff 0.5 < kappa <= 1
    if not 0.5 < kappa <= 1.0:
        raise ConfigError(f"step exponent kappa={kappa} must lie in (0.5, 1]")


def step_size(i, kappa):
    """tau_i = (1 + i) ** -kappa for iteration i >= 1."""
    check_kappa(kappa)
    if i < 1:
        raise DomainError("iteration index starts at 1")
    return (1.0 + i) ** (-kappa)


def _blocks_of(dataset):
    """(values, lengths) of a block-structured dataset or a (N, D, L) array."""
    if isinstance(dataset, np.ndarray) and dataset.ndim == 3:
        N, D, L = dataset.shape
        return dataset.reshape(N * D, L), [D] * N
    blocks = getattr(dataset, "blocks", None)
    if not blocks:
        raise ConfigError("SVB needs a dataset with year-block structure")
    values = np.asarray(dataset.values)
    order = np.concatenate([np.arange(b.start, b.start + b.length) for b in blocks])
    return values[order], [b.length for b in blocks]


def sample_minibatch(dataset, rng):
    """Draw one block uniformly at random. Returns ``(block_values (D, L), block_index)``."""
    if isinstance(dataset, np.ndarray) and dataset.ndim == 3:
        n = int(rng.integers(dataset.shape[0]))
        return dataset[n], n
    blocks = getattr(dataset, "blocks", None)
    if not blocks:
        raise ConfigError("SVB needs a dataset with year-block structure")
    n = int(rng.integers(len(blocks)))
    b = blocks[n]
    return np.asarray(dataset.values)[b.start : b.start + b.length], n


def svb_m_step(prev, minibatch_marginals, minibatch_data, prior, tau, N, scale_initial=False):
    """Blend ``prev`` towards the N-scaled minibatch conjugate update.

    The initial-state term uses the unscaled first-day posterior unless
    ``scale_initial`` is set.
    """
    if not 0.0 < tau <= 1.0:
        raise DomainError(f"step size tau={tau} must lie in (0, 1]")
    q_init, q_trans, counts, wet_sums = sufficient_statistics(minibatch_marginals, minibatch_data)
    init_scale = N if scale_initial else 1.0
    target = {
        "xi": prior.xi + init_scale * q_init,
        "alpha": prior.alpha + N * q_trans,
        "zeta": prior.zeta + N * counts,
        "gamma_shape": prior.gamma_shape + N * counts[..., 1:],
        "delta_rate": prior.delta_rate + N * wet_sums,
    }
    old = prev.arrays()
    return Hyperparameters(**{k: (1.0 - tau) * old[k] + tau * target[k] for k in target})


def _batch_stats(dataset, rng, post, batch_blocks, threads, chunk):
    """E-step on ``batch_blocks`` sampled blocks, statistics averaged per block."""
    draws = [sample_minibatch(dataset, rng) for _ in range(batch_blocks)]
    block = np.concatenate([d[0] for d in draws], axis=0)
    mg, log_lik = vbe_step(block, post, [len(d[0]) for d in draws], threads=threads, chunk=chunk)
    if batch_blocks > 1:
        b = float(batch_blocks)
        mg = LatentMarginals(
            q_t=mg.q_t,
            q_trans=mg.q_trans / b,
            q_init=mg.q_init / b,
            counts=mg.counts / b,
            wet_sums=mg.wet_sums / b,
        )
        log_lik /= b
    return mg, block, log_lik


def fit_svb(dataset, prior, svb_config=None, fit_config=None, init=None):
    """Stochastic VB on year blocks followed by full-data CAVI polishing.

    During the stochastic phase the trace stores the noisy estimate
    ``N * block log-likelihood - KL``; the polish phase stores exact ELBOs.
    """
    svb_config = svb_config or SvbConfig()
    fit_config = fit_config or FitConfig()
    values, lengths = _blocks_of(dataset)
    N = len(lengths)
    rng = np.random.default_rng(svb_config.seed)
    trace = FitTrace()
    if init is not None:
        post = init
    elif fit_config.jitter > 0:
        post = jittered(prior, fit_config.jitter, fit_config.seed)
    else:
        post = prior

    for i in range(1, svb_config.svb_iterations + 1):
        tau = step_size(i, svb_config.kappa)
        mg, block, log_lik = _batch_stats(
            dataset, rng, post, svb_config.batch_blocks, fit_config.threads, fit_config.chunk
        )
        trace.record(N * log_lik + elbo(0.0, post, prior), "svb", tau)
        if fit_config.progress_every and i % fit_config.progress_every == 0:
            log.info("svb iter %d tau %.4f elbo~ %.4f", i, tau, trace.elbo[-1])
        post = svb_m_step(post, mg, block, prior, tau, N, svb_config.scale_initial)
        trace.iterations_run += 1

    polish = FitConfig(
        max_iterations=svb_config.polish_cavi_iterations,
        elbo_rel_tolerance=fit_config.elbo_rel_tolerance,
        seed=fit_config.seed,
        threads=fit_config.threads,
        chunk=fit_config.chunk,
        progress_every=fit_config.progress_every,
    )
    post, trace = fit_cavi(
        values,
        prior,
        polish,
        lengths=lengths if svb_config.polish_as_blocks else None,
        init=post,
        trace=trace,
    )
    return post, trace
