"""Full-data coordinate-ascent VB (VBEM) for the semi-continuous HMM."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .emissions import (
    DEFAULT_CHUNK,
    check_data,
    emission_statistics,
    log_emission_matrix,
    responsibilities,
)
from .errors import ConfigError, DomainError
from .forward_backward import LatentMarginals, forward_backward_chains
from .model import Hyperparameters, expected_params
from .numkernel import kl_dirichlet, kl_gamma

log = logging.getLogger(__name__)


@dataclass
class FitConfig:
    max_iterations: int = 1000
    elbo_rel_tolerance: float = 1e-9
    seed: int = 0
    jitter: float = 0.0
    threads: int = 1
    chunk: int = DEFAULT_CHUNK
    progress_every: int = 0

    def __post_init__(self):
        if not self.elbo_rel_tolerance > 0:
            raise ConfigError("elbo_rel_tolerance must be > 0")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be >= 0")
        if self.jitter < 0:
            raise ConfigError("jitter must be >= 0")


@dataclass
class FitTrace:
    """Per-iteration record of a fit.

    ``elbo[i]`` is the ELBO of the posterior entering iteration ``i``;
    ``phase`` marks entries as ``"cavi"`` (exact) or ``"svb"`` (minibatch
    estimate) and ``step`` holds the SVB step size (NaN for CAVI).
    """

    elbo: list = field(default_factory=list)
    phase: list = field(default_factory=list)
    step: list = field(default_factory=list)
    converged: bool = False
    iterations_run: int = 0

    def record(self, value, phase="cavi", step=float("nan")):
        self.elbo.append(float(value))
        self.phase.append(phase)
        self.step.append(float(step))

    @property
    def final_elbo(self):
        return self.elbo[-1] if self.elbo else float("nan")

    def rows(self):
        """(iteration, phase, step, elbo, delta) tuples for CSV output."""
        out = []
        prev = None
        for i, (e, p, s) in enumerate(zip(self.elbo, self.phase, self.step)):
            out.append((i, p, s, e, float("nan") if prev is None else e - prev))
            prev = e
        return out


def vbe_step(data, posterior, lengths=None, threads=1, chunk=DEFAULT_CHUNK, keep_resp=False):
    """Variational E-step. Returns ``(LatentMarginals, log_lik)``.

    ``lengths`` splits the rows into independent chains (e.g. year blocks).
    """
    y = check_data(data, posterior.dims.L)
    params = expected_params(posterior)
    scores = log_emission_matrix(y, params, chunk=chunk, threads=threads)
    log_lik, mg = forward_backward_chains(scores, params, lengths)
    counts, wet_sums = emission_statistics(y, params, mg.q_t, chunk=chunk, threads=threads)
    resp = responsibilities(y, params) if keep_resp else None
    return (
        LatentMarginals(
            q_t=mg.q_t,
            q_trans=mg.q_trans,
            q_init=mg.q_init,
            counts=counts,
            wet_sums=wet_sums,
            resp=resp,
        ),
        log_lik,
    )


def sufficient_statistics(marginals, data):
    """(q_init, q_trans, counts, wet_sums) from a LatentMarginals."""
    if marginals.counts is not None:
        return marginals.q_init, marginals.q_trans, marginals.counts, marginals.wet_sums
    if marginals.resp is None:
        raise DomainError("marginals carry neither summary statistics nor responsibilities")
    y = check_data(data)
    q = marginals.resp.q_r
    counts = np.einsum("tj,tjlm->jlm", marginals.q_t, q)
    wet_sums = np.einsum("tj,tjlm,tl->jlm", marginals.q_t, q[..., 1:], y)
    return marginals.q_init, marginals.q_trans, counts, wet_sums


def vbm_step(marginals, prior, data):
    """Conjugate M-step: prior hyperparameters plus expected sufficient statistics."""
    y = np.asarray(data)
    if y.shape[0] != marginals.q_t.shape[0]:
        raise DomainError("marginals and data disagree on T")
    q_init, q_trans, counts, wet_sums = sufficient_statistics(marginals, y)
    return Hyperparameters(
        xi=prior.xi + q_init,
        alpha=prior.alpha + q_trans,
        zeta=prior.zeta + counts,
        gamma_shape=prior.gamma_shape + counts[..., 1:],
        delta_rate=prior.delta_rate + wet_sums,
    )


def kl_terms(posterior, prior):
    return {
        "pi1": float(kl_dirichlet(posterior.xi, prior.xi)),
        "A": float(np.sum(kl_dirichlet(posterior.alpha, prior.alpha))),
        "C": float(np.sum(kl_dirichlet(posterior.zeta, prior.zeta))),
        "Lambda": float(
            np.sum(
                kl_gamma(
                    posterior.gamma_shape, posterior.delta_rate, prior.gamma_shape, prior.delta_rate
                )
            )
        ),
    }


def elbo(log_lik, posterior, prior):
    """ln q(y | Theta) minus the KL of each parameter block from its prior."""
    kl = kl_terms(posterior, prior)
    return log_lik - kl["pi1"] - kl["A"] - kl["C"] - kl["Lambda"]


def relative_change(new, old):
    return abs(new - old) / (abs(new) + 1.0)


def jittered(prior, scale, seed):
    """Prior with multiplicative log-normal noise on the Gamma shapes."""
    rng = np.random.default_rng(seed)
    noise = np.exp(scale * rng.standard_normal(prior.gamma_shape.shape))
    arrays = prior.arrays()
    arrays["gamma_shape"] = prior.gamma_shape * noise
    return Hyperparameters(**arrays)


def fit_cavi(data, prior, config=None, lengths=None, init=None, trace=None):
    """Alternate VBE/VBM steps until the relative ELBO change drops below tolerance.

    Starts from ``init`` if given, otherwise from the prior (optionally
    jittered). Hitting ``max_iterations`` is not an error: the trace reports
    ``converged=False``. The returned posterior is the one whose ELBO is last
    in the trace.
    """
    config = config or FitConfig()
    y = check_data(data, prior.dims.L)
    trace = trace if trace is not None else FitTrace()
    if init is not None:
        post = init
    elif config.jitter > 0:
        post = jittered(prior, config.jitter, config.seed)
    else:
        post = prior

    prev = None
    for it in range(config.max_iterations):
        mg, log_lik = vbe_step(y, post, lengths, threads=config.threads, chunk=config.chunk)
        value = elbo(log_lik, post, prior)
        trace.record(value, "cavi")
        if config.progress_every and it % config.progress_every == 0:
            log.info("cavi iter %d elbo %.6f", it, value)
        if prev is not None and relative_change(value, prev) < config.elbo_rel_tolerance:
            trace.converged = True
            return post, trace
        post = vbm_step(mg, prior, y)
        trace.iterations_run += 1
        prev = value

    _, log_lik = vbe_step(y, post, lengths, threads=config.threads, chunk=config.chunk)
    value = elbo(log_lik, post, prior)
    trace.record(value, "cavi")
    trace.converged = prev is not None and relative_change(value, prev) < config.elbo_rel_tolerance
    return post, trace
