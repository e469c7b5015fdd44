"""Log-normal channel transmittance model (PDTC) for one and two channels.

With ``ln(eta) ~ Normal(ln(eta0) - sigma**2 / 2, sigma**2)`` the untruncated
mean transmittance is exactly ``eta0``.  Physical transmittances live in
``(0, 1]``, so every probability below is taken with respect to the
distribution truncated at 1 and renormalized by :func:`truncation_mass`.
A channel with ``sigma == 0`` is static (a point mass at ``eta0``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateDistributionError, EmptySelectionError

#: Selection probabilities below this value are treated as empty.
UNDERFLOW_FLOOR = 1e-30


@dataclass(frozen=True)
class ChannelParams:
    """Mean transmittance ``eta0`` and log-scale spread ``sigma`` of one channel."""

    eta0: float
    sigma: float

    def __post_init__(self):
        if not (0.0 < self.eta0 <= 1.0):
            raise ValueError(f"eta0 must lie in (0, 1], got {self.eta0!r}")
        if not (self.sigma >= 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma!r}")

    @property
    def is_static(self) -> bool:
        return self.sigma == 0.0

    @property
    def log_mean(self) -> float:
        """Mean of ``ln(eta)`` for the untruncated distribution."""
        return math.log(self.eta0) - 0.5 * self.sigma**2


@dataclass(frozen=True)
class JointPdtc:
    """Two independent channels, Alice's and Bob's."""

    alice: ChannelParams
    bob: ChannelParams

    @classmethod
    def symmetric(cls, eta0: float, sigma: float) -> "JointPdtc":
        ch = ChannelParams(eta0, sigma)
        return cls(ch, ch)


def gauss_interval(a, b):
    """P(a <= Z <= b) for a standard normal Z, accurate in both tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = ndtr(b) - ndtr(a)
    # in the upper tail use survival functions to avoid cancellation
    lower = ndtr(-a) - ndtr(-b)
    return np.where(a > 0, lower, upper)


def pdtc_density(params: ChannelParams, eta):
    """Untruncated log-normal density p(eta) with mean ``eta0``."""
    if params.is_static:
        raise DegenerateDistributionError("sigma = 0 has no density; use the static-channel path")
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise ValueError("transmittance must be > 0")
    s = params.sigma
    z = (np.log(eta / params.eta0) + 0.5 * s * s) / s
    out = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * s * eta)
    return out if out.ndim else float(out)


def truncation_mass(params: ChannelParams) -> float:
    """Probability that eta <= 1 under the untruncated distribution."""
    if params.is_static:
        return 1.0
    return float(ndtr(-params.log_mean / params.sigma))


def selection_probability(params: ChannelParams, eta_t: float, eta_max: float = 1.0) -> float:
    """Truncated-distribution probability that ``eta_t <= eta <= eta_max``."""
    if params.is_static:
        return 1.0 if eta_t <= params.eta0 <= eta_max else 0.0
    m, s = params.log_mean, params.sigma
    with np.errstate(divide="ignore"):
        lo = (math.log(eta_t) - m) / s if eta_t > 0 else -math.inf
    hi = (math.log(eta_max) - m) / s
    return float(gauss_interval(lo, hi)) / truncation_mass(params)


def conditional_mean(params: ChannelParams, eta_t: float, floor: float = UNDERFLOW_FLOOR) -> float:
    """Mean transmittance of the signals with ``eta >= eta_t`` (truncated at 1)."""
    if not (0.0 <= eta_t < 1.0):
        raise ValueError(f"threshold must lie in [0, 1), got {eta_t!r}")
    if params.is_static:
        if params.eta0 < eta_t:
            raise EmptySelectionError("static channel lies below the threshold")
        return params.eta0
    m, s = params.log_mean, params.sigma
    lo = (math.log(eta_t) - m) / s if eta_t > 0 else -math.inf
    hi = -m / s
    mass = float(gauss_interval(lo, hi))
    if mass < floor:
        raise EmptySelectionError(f"selection probability {mass:.3g} below floor")
    # E[e^u; a<u<b] for u ~ N(m, s^2) is eta0 * P(a - s^2 < u' < b - s^2)
    first = params.eta0 * float(gauss_interval(lo - s, hi - s))
    return min(max(first / mass, eta_t), 1.0)


def joint_density(joint: JointPdtc, eta_a, eta_b):
    """Product of the two marginal densities."""
    return pdtc_density(joint.alice, eta_a) * pdtc_density(joint.bob, eta_b)


def _sample_channel(rng: np.random.Generator, params: ChannelParams, count: int) -> np.ndarray:
    if params.is_static:
        return np.full(count, params.eta0)
    out = np.empty(count)
    filled = 0
    while filled < count:
        need = count - filled
        g = rng.normal(params.log_mean, params.sigma, size=need)
        keep = g[g <= 0.0]
        out[filled:filled + keep.size] = np.exp(keep)
        filled += keep.size
    return out


def sample_pairs(joint: JointPdtc, count: int, seed) -> np.ndarray:
    """Draw ``count`` (eta_a, eta_b) pairs from the truncated joint PDTC.

    Draws above 1 are rejected and redrawn.  Returns an array of shape
    ``(count, 2)``; the same ``(seed, count)`` always gives the same array.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    a = _sample_channel(rng, joint.alice, count)
    b = _sample_channel(rng, joint.bob, count)
    return np.column_stack([a, b])
