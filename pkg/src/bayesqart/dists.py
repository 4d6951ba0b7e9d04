"""Densities and random-variate generators used by the quantile tree sampler.

Every sampler takes an explicit :class:`numpy.random.Generator` and is a pure
function of its state, so identical generator state gives identical output.
All functions broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

Side = Literal["right", "left"]


@dataclass(frozen=True)
class QuantileSpec:
    """Quantile level and the constants of the exponential-normal mixture.

    ``theta1 = (1 - 2 tau) / (tau (1 - tau))`` and
    ``theta2_sq = 2 / (tau (1 - tau))``.
    """

    tau: float
    theta1: float = field(init=False)
    theta2_sq: float = field(init=False)

    def __post_init__(self):
        tau = float(self.tau)
        if not 0.0 < tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {tau}")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "theta1", (1.0 - 2.0 * tau) / (tau * (1.0 - tau)))
        object.__setattr__(self, "theta2_sq", 2.0 / (tau * (1.0 - tau)))


@dataclass(frozen=True)
class GigParams:
    """Parameters of a GIG draw with order fixed at 1/2.

    The density is proportional to ``x**-0.5 * exp(-(delta1 / x + delta2 * x) / 2)``.
    Both fields may be arrays; they broadcast against each other.
    """

    delta1: np.ndarray | float
    delta2: np.ndarray | float

    def __post_init__(self):
        d1 = np.asarray(self.delta1, dtype=float)
        d2 = np.asarray(self.delta2, dtype=float)
        if np.any(d1 < 0) or not np.all(np.isfinite(d1)):
            raise ValueError("delta1 must be finite and >= 0")
        if np.any(d2 <= 0) or not np.all(np.isfinite(d2)):
            raise ValueError("delta2 must be finite and > 0")


def check_loss(w, tau: float):
    """Check (pinball) loss ``w * (tau - 1{w < 0})``."""
    w = np.asarray(w, dtype=float)
    return w * (tau - (w < 0))


def ald_pdf(w, q: QuantileSpec):
    """Asymmetric Laplace density with location 0 at quantile level ``q.tau``."""
    return q.tau * (1.0 - q.tau) * np.exp(-check_loss(w, q.tau))


def ald_cdf(w, q: QuantileSpec):
    """Closed-form asymmetric Laplace CDF; equals ``tau`` at 0."""
    w = np.asarray(w, dtype=float)
    tau = q.tau
    # evaluate each branch only where it is used so exp never overflows
    neg = np.minimum(w, 0.0)
    pos = np.maximum(w, 0.0)
    return np.where(
        w <= 0.0,
        tau * np.exp((1.0 - tau) * neg),
        1.0 - (1.0 - tau) * np.exp(-tau * pos),
    )


def ald_moments(q: QuantileSpec) -> tuple[float, float]:
    """Mean and variance of ALD(tau, 0)."""
    tau = q.tau
    denom = tau * (1.0 - tau)
    mean = (1.0 - 2.0 * tau) / denom
    var = (1.0 - 2.0 * tau + 2.0 * tau**2) / denom**2
    return mean, var


def sample_ald_mixture(q: QuantileSpec, rng: np.random.Generator, size=None):
    """Draw ``theta1 V + theta2 sqrt(V) Z`` with V ~ Exp(1) and Z ~ N(0, 1)."""
    v = rng.standard_exponential(size)
    z = rng.standard_normal(size)
    return q.theta1 * v + np.sqrt(q.theta2_sq * v) * z


def sample_gig_half(p: GigParams, rng: np.random.Generator, size=None):
    """Sample the order-1/2 GIG distribution.

    The reciprocal of the target is inverse Gaussian with mean
    ``sqrt(delta2 / delta1)`` and shape ``delta2``; this uses the
    Michael-Schucany-Haas transformation written directly for the target
    variable, parametrised by ``sqrt(delta1 / delta2)`` so that the
    ``delta1 = 0`` case reduces continuously to a Gamma(1/2, delta2 / 2) draw.
    """
    d1 = np.asarray(p.delta1, dtype=float)
    d2 = np.asarray(p.delta2, dtype=float)
    if size is None:
        size = np.broadcast(d1, d2).shape
    inv_mean = np.sqrt(d1 / d2)
    chi2 = rng.standard_normal(size) ** 2
    u = rng.random(size)
    h = chi2 / (2.0 * d2)
    # larger root of the MSH quadratic, mapped to the target scale
    root = inv_mean + h + np.sqrt(h * h + 2.0 * h * inv_mean)
    keep = u * (root + inv_mean) <= root
    with np.errstate(divide="ignore", invalid="ignore"):
        other = inv_mean * inv_mean / root
    out = np.where(keep, root, other)
    return out if np.ndim(out) else float(out)


def sample_inverse_gamma(shape, rate, rng: np.random.Generator, size=None):
    """Draw X with ``1 / X ~ Gamma(shape, rate)``."""
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise ValueError("inverse gamma needs shape > 0 and rate > 0")
    out = 1.0 / rng.gamma(shape, 1.0 / rate, size)
    return out if np.ndim(out) else float(out)


# below this standardized bound plain normal rejection accepts often enough
_TAIL_SWITCH = 0.45


def _std_normal_above(a: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Standard normal draws conditioned on ``z >= a`` (elementwise)."""
    out = np.empty_like(a)
    pending = np.arange(a.size)
    while pending.size:
        lo = a[pending]
        body = lo < _TAIL_SWITCH
        z = np.empty(pending.size)
        ok = np.zeros(pending.size, dtype=bool)

        nb = int(body.sum())
        if nb:
            zb = rng.standard_normal(nb)
            z[body] = zb
            ok[body] = zb >= lo[body]

        tail = ~body
        nt = pending.size - nb
        if nt:
            # exponential proposal with the optimal rate for the bound
            at = lo[tail]
            lam = 0.5 * (at + np.sqrt(at * at + 4.0))
            zt = at + rng.standard_exponential(nt) / lam
            ut = rng.random(nt)
            z[tail] = zt
            ok[tail] = ut <= np.exp(-0.5 * (zt - lam) ** 2)

        out[pending[ok]] = z[ok]
        pending = pending[~ok]
    return out


def sample_truncated_normal(mean, variance, side: Side | np.ndarray, rng: np.random.Generator):
    """Normal draws truncated to ``x >= 0`` (``side="right"``) or ``x < 0``.

    ``side`` may also be a boolean array, True meaning right-of-zero.
    Far tails go through an exponential rejection scheme so the result stays
    finite and inside the support for any mean.
    """
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if np.any(variance <= 0):
        raise ValueError("variance must be positive")
    if isinstance(side, str):
        if side not in ("right", "left"):
            raise ValueError(f"side must be 'right' or 'left', got {side!r}")
        right = np.full(np.broadcast(mean, variance).shape, side == "right")
    else:
        right = np.asarray(side, dtype=bool)
    shape = np.broadcast(mean, variance, right).shape
    mean = np.broadcast_to(mean, shape).ravel()
    sd = np.sqrt(np.broadcast_to(variance, shape)).ravel()
    right = np.broadcast_to(right, shape).ravel()

    # left-of-zero is the mirror image of right-of-zero with mean negated
    sign = np.where(right, 1.0, -1.0)
    m = sign * mean
    out = np.empty(mean.size)
    pending = np.arange(mean.size)
    while pending.size:
        z = _std_normal_above(-m[pending] / sd[pending], rng)
        x = m[pending] + sd[pending] * z
        # rounding can land on the wrong side of zero; redraw those
        good = (x > 0) | ((x == 0) & right[pending])
        out[pending[good]] = sign[pending[good]] * x[good]
        pending = pending[~good]
    out = out.reshape(shape)
    return out if out.ndim else float(out)
