"""Special functions, stable reductions and closed-form KL divergences.

Everything here is vectorised over numpy arrays and pure. ``digamma`` and
``log_gamma`` use upward recurrence into the asymptotic regime ``x >= 10``
followed by the standard Stirling/Bernoulli series; truncation error there
is below 1e-16.

Gamma distributions use the **shape-rate** convention throughout:
``Gamma(x | shape, rate) ∝ x**(shape - 1) * exp(-rate * x)``, mean
``shape / rate``.
"""

import numpy as np

from .errors import DomainError

_ASYMPTOTIC_START = 10.0
_HALF_LOG_2PI = 0.9189385332046727418

# B_2k / (2k) for the digamma series, k = 1..7
_DIGAMMA_COEF = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

# B_2k / (2k (2k - 1)) for the log-gamma series, k = 1..7
_LGAMMA_COEF = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
)


def _positive_array(x, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.size and not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if arr.size and not np.all(arr > 0):
        raise DomainError(f"{name} must be strictly positive, got min {arr.min()!r}")
    return arr


def _shift_steps(x):
    return np.ceil(np.maximum(_ASYMPTOTIC_START - x, 0.0)).astype(np.int64)


def digamma(x):
    """Psi(x) = d/dx ln Gamma(x) for x > 0 (scalar or array)."""
    x = _positive_array(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    steps = _shift_steps(x)
    acc = np.zeros_like(x)
    y = x.copy()
    for k in range(int(steps.max(initial=0))):
        live = steps > k
        acc[live] -= 1.0 / y[live]
        y[live] += 1.0
    inv2 = 1.0 / (y * y)
    series = np.zeros_like(y)
    for c in reversed(_DIGAMMA_COEF):
        series = (series + c) * inv2
    out = acc + np.log(y) - 0.5 / y - series
    return out[0] if scalar else out


def log_gamma(x):
    """ln Gamma(x) for x > 0 (scalar or array)."""
    x = _positive_array(x)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    steps = _shift_steps(x)
    prod = np.ones_like(x)
    y = x.copy()
    for k in range(int(steps.max(initial=0))):
        live = steps > k
        prod[live] *= y[live]
        y[live] += 1.0
    inv = 1.0 / y
    inv2 = inv * inv
    series = np.zeros_like(y)
    for c in reversed(_LGAMMA_COEF):
        series = series * inv2 + c
    series *= inv
    out = (y - 0.5) * np.log(y) - y + _HALF_LOG_2PI + series - np.log(prod)
    return out[0] if scalar else out


def log_sum_exp(v, axis=None, keepdims=False):
    """ln sum(exp(v)) by max-shift.

    Entries equal to -inf are allowed and contribute nothing; a slice of all
    -inf yields -inf.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise DomainError("log_sum_exp of an empty sequence")
    vmax = np.max(v, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(vmax), vmax, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(v - shift), axis=axis, keepdims=True)) + shift
    if not keepdims:
        out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    return out[()] if out.ndim == 0 else out


def kl_dirichlet(q_params, p_params):
    """KL(Dirichlet(q) || Dirichlet(p)) over the last axis.

    Leading axes broadcast, so a stack of Dirichlet rows gives one KL per row.
    """
    q = _positive_array(q_params, "q_params")
    p = _positive_array(p_params, "p_params")
    if q.shape != p.shape:
        raise DomainError(f"shape mismatch {q.shape} vs {p.shape}")
    if q.ndim == 0 or q.shape[-1] < 2:
        raise DomainError("Dirichlet parameter vectors need length >= 2")
    q0 = q.sum(axis=-1)
    p0 = p.sum(axis=-1)
    out = (
        log_gamma(q0)
        - log_gamma(p0)
        - np.sum(log_gamma(q) - log_gamma(p), axis=-1)
        + np.sum((q - p) * (digamma(q) - digamma(q0)[..., None]), axis=-1)
    )
    out = np.maximum(out, 0.0)
    return out[()] if np.ndim(out) == 0 else out


def kl_gamma(shape_q, rate_q, shape_p, rate_p):
    """KL(Gamma(shape_q, rate_q) || Gamma(shape_p, rate_p)), elementwise.

    Shape-rate parameterisation (rate is the inverse scale).
    """
    aq = _positive_array(shape_q, "shape_q")
    bq = _positive_array(rate_q, "rate_q")
    ap = _positive_array(shape_p, "shape_p")
    bp = _positive_array(rate_p, "rate_p")
    out = (
        (aq - ap) * digamma(aq)
        - log_gamma(aq)
        + log_gamma(ap)
        + ap * (np.log(bq) - np.log(bp))
        + aq * (bp - bq) / bq
    )
    out = np.maximum(out, 0.0)
    return out[()] if np.ndim(out) == 0 else out
