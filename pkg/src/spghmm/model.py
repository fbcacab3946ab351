"""Model dimensions, conjugate hyperparameters and derived parameter sets.

Array layout (0-based state, location and component indices):

* ``xi``           (K,)        Dirichlet parameters of the initial distribution
* ``alpha``        (K, K)      row-wise Dirichlet parameters of the transitions
* ``zeta``         (K, L, M+1) Dirichlet parameters of the mixture weights;
                               component 0 is the dry atom
* ``gamma_shape``  (K, L, M)   Gamma shapes of the exponential rates
* ``delta_rate``   (K, L, M)   Gamma rates of the exponential rates

The same container holds the prior and every posterior iterate.
"""

from dataclasses import dataclass, fields

import numpy as np

from .errors import DomainError
from .numkernel import digamma

# Wet-to-dry ordered templates: state 0 is the wettest, component 1 the
# heavy-rain (lowest rate) one.
SIMULATION_TEMPLATES = {
    "zeta": [[3.0, 4.0, 3.0], [3.0, 3.5, 3.5], [4.0, 3.0, 3.0]],
    "gamma": [[0.5, 2.0], [1.5, 9.0], [2.0, 16.0]],
    "delta": [[2.0, 2.0], [2.0, 2.0], [2.0, 2.0]],
}
CHESAPEAKE_TEMPLATES = {
    "zeta": [[3.0, 4.0, 3.0], [3.0, 3.5, 3.5], [4.0, 3.0, 3.0]],
    "gamma": [[0.5, 2.0], [1.5, 5.0], [2.0, 10.0]],
    "delta": [[2.0, 2.0], [2.0, 2.0], [2.0, 2.0]],
}


@dataclass(frozen=True)
class ModelDims:
    K: int
    L: int
    M: int
    T: int = None
    N: int = None
    D: int = None

    def __post_init__(self):
        for name in ("K", "L", "M"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise DomainError(f"{name} must be a positive integer, got {v!r}")
        if self.N is not None and self.D is not None and self.T is not None:
            if self.N * self.D != self.T:
                raise DomainError(f"N*D = {self.N * self.D} != T = {self.T}")


def _frozen_copy(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Hyperparameters:
    xi: np.ndarray
    alpha: np.ndarray
    zeta: np.ndarray
    gamma_shape: np.ndarray
    delta_rate: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, _frozen_copy(getattr(self, f.name)))
        K = self.xi.shape[0]
        if self.xi.ndim != 1 or self.alpha.shape != (K, K):
            raise DomainError("xi must be (K,) and alpha (K, K)")
        if self.zeta.ndim != 3 or self.zeta.shape[0] != K or self.zeta.shape[2] < 2:
            raise DomainError("zeta must be (K, L, M+1) with M >= 1")
        K, L, M1 = self.zeta.shape
        for name in ("gamma_shape", "delta_rate"):
            if getattr(self, name).shape != (K, L, M1 - 1):
                raise DomainError(f"{name} must have shape {(K, L, M1 - 1)}")
        for f in fields(self):
            a = getattr(self, f.name)
            if not (np.all(np.isfinite(a)) and np.all(a > 0)):
                raise DomainError(f"{f.name} entries must be finite and > 0")

    @property
    def dims(self):
        K, L, M1 = self.zeta.shape
        return ModelDims(K=K, L=L, M=M1 - 1)

    def arrays(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def equals(self, other, atol=0.0):
        return all(
            np.allclose(a, b, rtol=0.0, atol=atol) if atol else np.array_equal(a, b)
            for a, b in zip(self.arrays().values(), other.arrays().values())
        )

    def max_abs_diff(self, other):
        return max(
            float(np.max(np.abs(a - b)))
            for a, b in zip(self.arrays().values(), other.arrays().values())
        )


@dataclass(frozen=True, eq=False)
class ExpectedParams:
    """Expected logs under q(Theta) plus the posterior mean rates."""

    log_a1_star: np.ndarray
    log_a_star: np.ndarray
    log_c_star: np.ndarray
    log_lambda_star: np.ndarray
    lambda_hat: np.ndarray

    @property
    def dims(self):
        K, L, M1 = self.log_c_star.shape
        return ModelDims(K=K, L=L, M=M1 - 1)


@dataclass(frozen=True, eq=False)
class PointParams:
    pi1: np.ndarray
    A: np.ndarray
    C: np.ndarray
    Lambda: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, _frozen_copy(getattr(self, f.name)))
        K = self.pi1.shape[0]
        if self.A.shape != (K, K) or self.C.shape[0] != K:
            raise DomainError("inconsistent state dimension")
        if self.Lambda.shape != (K, self.C.shape[1], self.C.shape[2] - 1):
            raise DomainError("Lambda must be (K, L, M)")
        if np.any(self.pi1 < 0) or np.any(self.A < 0) or np.any(self.C < 0):
            raise DomainError("probabilities must be nonnegative")
        for name, a in (("pi1", self.pi1), ("A", self.A), ("C", self.C)):
            if not np.allclose(a.sum(axis=-1), 1.0, rtol=0.0, atol=1e-12):
                raise DomainError(f"{name} rows must sum to 1")
        if not np.all(self.Lambda > 0):
            raise DomainError("Lambda must be > 0")

    @property
    def dims(self):
        K, L, M1 = self.C.shape
        return ModelDims(K=K, L=L, M=M1 - 1)


def ordered_templates(K, M):
    """Wet-to-dry prior templates for arbitrary (K, M).

    For K=3, M=2 this returns the simulation-study templates. Otherwise the
    dry-atom weight grows with the state index and the prior mean rates grow
    with both the state and the component index, keeping the same total
    concentration of 10 per mixture row.
    """
    if (K, M) == (3, 2):
        return {k: np.array(v) for k, v in SIMULATION_TEMPLATES.items()}
    frac = np.linspace(0.0, 1.0, K) if K > 1 else np.zeros(1)
    dry = 3.0 + frac
    zeta = np.empty((K, M + 1))
    zeta[:, 0] = dry
    zeta[:, 1:] = ((10.0 - dry) / M)[:, None]
    j = np.arange(K)[:, None]
    m = np.arange(M)[None, :]
    mean_rate = 0.25 * (1.0 + j) * (4.0 * (1.0 + j)) ** m
    delta = np.full((K, M), 2.0)
    return {"zeta": zeta, "gamma": mean_rate * delta, "delta": delta}


def default_priors(
    dims,
    pi_concentration=1.0,
    row_concentration=10.0,
    zeta_template=None,
    gamma_template=None,
    delta_template=None,
):
    """Symmetric Dirichlet priors on pi1 and A, location-replicated emission priors.

    Missing templates default to ``ordered_templates(K, M)``.
    """
    K, L, M = dims.K, dims.L, dims.M
    if not (pi_concentration > 0 and row_concentration > 0):
        raise DomainError("concentrations must be > 0")
    defaults = ordered_templates(K, M)
    zeta_t = np.asarray(defaults["zeta"] if zeta_template is None else zeta_template, float)
    gamma_t = np.asarray(defaults["gamma"] if gamma_template is None else gamma_template, float)
    delta_t = np.asarray(defaults["delta"] if delta_template is None else delta_template, float)
    if zeta_t.shape != (K, M + 1) or gamma_t.shape != (K, M) or delta_t.shape != (K, M):
        raise DomainError("template shapes must be (K, M+1), (K, M), (K, M)")
    for name, t in (("zeta", zeta_t), ("gamma", gamma_t), ("delta", delta_t)):
        if not np.all(t > 0):
            raise DomainError(f"{name}_template entries must be > 0")
    return Hyperparameters(
        xi=np.full(K, pi_concentration / K),
        alpha=np.full((K, K), row_concentration / K),
        zeta=np.repeat(zeta_t[:, None, :], L, axis=1),
        gamma_shape=np.repeat(gamma_t[:, None, :], L, axis=1),
        delta_rate=np.repeat(delta_t[:, None, :], L, axis=1),
    )


def expected_params(posterior):
    xi, alpha, zeta = posterior.xi, posterior.alpha, posterior.zeta
    return ExpectedParams(
        log_a1_star=digamma(xi) - digamma(xi.sum()),
        log_a_star=digamma(alpha) - digamma(alpha.sum(axis=1))[:, None],
        log_c_star=digamma(zeta) - digamma(zeta.sum(axis=2))[..., None],
        log_lambda_star=digamma(posterior.gamma_shape) - np.log(posterior.delta_rate),
        lambda_hat=posterior.gamma_shape / posterior.delta_rate,
    )


def posterior_means(posterior):
    return PointParams(
        pi1=posterior.xi / posterior.xi.sum(),
        A=posterior.alpha / posterior.alpha.sum(axis=1, keepdims=True),
        C=posterior.zeta / posterior.zeta.sum(axis=2, keepdims=True),
        Lambda=posterior.gamma_shape / posterior.delta_rate,
    )


def permute_states(obj, perm):
    """Relabel states: new state ``j`` is old state ``perm[j]``.

    Works for Hyperparameters and PointParams.
    """
    perm = np.asarray(perm, dtype=int)
    if isinstance(obj, Hyperparameters):
        return Hyperparameters(
            xi=obj.xi[perm],
            alpha=obj.alpha[np.ix_(perm, perm)],
            zeta=obj.zeta[perm],
            gamma_shape=obj.gamma_shape[perm],
            delta_rate=obj.delta_rate[perm],
        )
    if isinstance(obj, PointParams):
        return PointParams(
            pi1=obj.pi1[perm], A=obj.A[np.ix_(perm, perm)], C=obj.C[perm], Lambda=obj.Lambda[perm]
        )
    raise TypeError(f"cannot permute {type(obj).__name__}")
