"""4-intensity MDI-QKD key rate and the turbulent-channel rate models."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .decoy import DEFAULT_CUTOFF, DecoyBounds, decoy_bounds
from .domains import BoundaryDomain, FullDomain, QuadratureSettings, SelectionDomain, integrate, selection_statistics
from .errors import EmptySelectionError, InconsistentObservablesError, OutOfGridError
from .physics import DeviceParams, IntensitySet, Observables, observables
from .turbulence import JointPdtc

log = logging.getLogger(__name__)


def h2(x):
    """Binary entropy in bits, with ``h2(0) = h2(1) = 0``."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise ValueError("h2 is defined on [0, 1]")
    inner = (x > 0) & (x < 1)
    xs = np.where(inner, x, 0.5)
    out = np.where(inner, -xs * np.log2(xs) - (1 - xs) * np.log2(1 - xs), 0.0)
    return out if out.ndim else float(out)


def key_rate(device: DeviceParams, alice: IntensitySet, bob: IntensitySet,
             obs: Observables, bounds: DecoyBounds, signed: bool = False) -> float:
    """Asymptotic key rate per pulse pair.

    ``R = P_sA P_sB [ sA e^-sA sB e^-sB Y11 (1 - h2(e11)) - f_e Q_ss h2(E_ss) ]``.
    With equal settings for both users this is the usual ``P_s^2 (s e^-s)^2``
    form.  Returns ``max(R, 0)`` unless ``signed`` is set.
    """
    qz = float(obs.qz)
    tz = float(obs.tz)
    if qz <= 0.0:
        if tz > 0.0:
            raise InconsistentObservablesError("Z-basis error-gain without gain")
        ec = 0.0
    else:
        ec = device.f_e * qz * h2(min(max(tz / qz, 0.0), 1.0))
    if bounds.y11_lower > 0.0:
        single = alice.s * math.exp(-alice.s) * bob.s * math.exp(-bob.s)
        pa = single * bounds.y11_lower * (1.0 - h2(min(bounds.e11_upper, 0.5)))
    else:
        pa = 0.0
    r = alice.p_s * bob.p_s * (pa - ec)
    return r if signed else max(r, 0.0)


def rate_from_observables(device: DeviceParams, alice: IntensitySet, bob: IntensitySet,
                          obs: Observables, signed: bool = False, cutoff: int = DEFAULT_CUTOFF) -> float:
    bounds = decoy_bounds(obs.qx, obs.tx, alice, bob, cutoff=cutoff)
    return key_rate(device, alice, bob, obs, bounds, signed=signed)


def rate_point(device: DeviceParams, alice: IntensitySet, bob: IntensitySet,
               eta_a: float, eta_b: float, signed: bool = False) -> float:
    """Key rate for static channel transmittances ``eta_a``, ``eta_b``."""
    obs = observables(device, alice, bob, float(eta_a), float(eta_b))
    return rate_from_observables(device, alice, bob, obs, signed=signed)


def rates(device: DeviceParams, alice: IntensitySet, bob: IntensitySet, eta_a, eta_b,
          signed: bool = False) -> np.ndarray:
    """:func:`rate_point` over broadcast arrays of transmittances."""
    eta_a, eta_b = np.broadcast_arrays(np.asarray(eta_a, dtype=float), np.asarray(eta_b, dtype=float))
    obs = observables(device, alice, bob, eta_a.ravel(), eta_b.ravel())
    out = np.empty(eta_a.size)
    for k in range(eta_a.size):
        single = Observables(obs.qx[k], obs.tx[k], obs.qz[k], obs.tz[k])
        out[k] = rate_from_observables(device, alice, bob, single, signed=signed)
    return out.reshape(eta_a.shape)


# ---------------------------------------------------------------------------
# rate map


@dataclass(frozen=True)
class GridSpec:
    """Log-spaced square grid ``eta_min .. 1`` with ``resolution`` points per axis."""

    resolution: int = 192
    eta_min: float = 1e-4

    def __post_init__(self):
        if self.resolution < 64:
            raise ValueError("grid resolution must be at least 64")
        if not (0.0 < self.eta_min < 1.0):
            raise ValueError("eta_min must lie in (0, 1)")

    def axis(self) -> np.ndarray:
        return np.logspace(math.log10(self.eta_min), 0.0, self.resolution)


@dataclass(frozen=True, eq=False)
class RateMap:
    """Signed key rate sampled on a grid, ``raw[i_a, i_b]``.

    Interpolation is bilinear in ``(ln eta_a, ln eta_b)`` applied to the
    shape function ``raw / (eta_a * eta_b)``, which varies far more gently
    than the rate itself.
    """

    grid_a: np.ndarray
    grid_b: np.ndarray
    raw: np.ndarray
    device: DeviceParams
    alice: IntensitySet
    bob: IntensitySet
    grid: GridSpec

    @property
    def values(self) -> np.ndarray:
        return np.maximum(self.raw, 0.0)

    @property
    def log_grid_a(self) -> np.ndarray:
        return np.log(self.grid_a)

    @property
    def log_grid_b(self) -> np.ndarray:
        return np.log(self.grid_b)

    @property
    def shape_values(self) -> np.ndarray:
        return self.raw / np.outer(self.grid_a, self.grid_b)

    def interpolate(self, eta_a, eta_b, signed: bool = False, strict: bool = True):
        """Rate at arbitrary points; ``strict`` raises outside the grid, otherwise
        coordinates are clamped onto it."""
        a, b = np.broadcast_arrays(np.asarray(eta_a, dtype=float), np.asarray(eta_b, dtype=float))
        ga, gb = self.log_grid_a, self.log_grid_b
        with np.errstate(divide="ignore"):
            ua, ub = np.log(a), np.log(b)
        tol = 1e-12
        outside = (ua < ga[0] - tol) | (ua > ga[-1] + tol) | (ub < gb[0] - tol) | (ub > gb[-1] + tol)
        if strict and np.any(outside):
            raise OutOfGridError("point outside the rate-map grid")
        ua = np.clip(ua, ga[0], ga[-1])
        ub = np.clip(ub, gb[0], gb[-1])
        i = np.clip(np.searchsorted(ga, ua, side="right") - 1, 0, len(ga) - 2)
        j = np.clip(np.searchsorted(gb, ub, side="right") - 1, 0, len(gb) - 2)
        s = (ua - ga[i]) / (ga[i + 1] - ga[i])
        t = (ub - gb[j]) / (gb[j + 1] - gb[j])
        g = self.shape_values
        shape = ((1 - s) * (1 - t) * g[i, j] + s * (1 - t) * g[i + 1, j]
                 + (1 - s) * t * g[i, j + 1] + s * t * g[i + 1, j + 1])
        out = shape * np.exp(ua + ub)
        if not signed:
            out = np.maximum(out, 0.0)
        return out if out.ndim else float(out)


def rate_map(device: DeviceParams, alice: IntensitySet, bob: IntensitySet,
             grid: GridSpec | None = None) -> RateMap:
    """Evaluate the signed rate on ``grid``; symmetric settings are computed once
    per unordered pair and mirrored."""
    grid = grid or GridSpec()
    axis = grid.axis()
    n = len(axis)
    raw = np.empty((n, n))
    if alice == bob:
        iu, ju = np.triu_indices(n)
        vals = rates(device, alice, bob, axis[iu], axis[ju], signed=True)
        raw[iu, ju] = vals
        raw[ju, iu] = vals
    else:
        aa, bb = np.meshgrid(axis, axis, indexing="ij")
        raw[:] = rates(device, alice, bob, aa, bb, signed=True)
    return RateMap(axis, axis.copy(), raw, device, alice, bob, grid)


# ---------------------------------------------------------------------------
# turbulent-channel models


def model_simplified(joint: JointPdtc, domain: SelectionDomain, device: DeviceParams,
                     alice: IntensitySet, bob: IntensitySet,
                     settings: QuadratureSettings | None = None) -> float:
    """Pass probability times the static rate at the post-selected mean transmittances."""
    try:
        p, means = selection_statistics(joint, domain, lambda a, b: np.column_stack([a, b]), settings)
    except EmptySelectionError:
        return 0.0
    ea = min(float(means[0]), 1.0)
    eb = min(float(means[1]), 1.0)
    return p * rate_point(device, alice, bob, ea, eb)


def model_integration(joint: JointPdtc, device: DeviceParams, alice: IntensitySet, bob: IntensitySet,
                      rate_map: RateMap | None = None, domain: SelectionDomain | None = None,
                      settings: QuadratureSettings | None = None) -> float:
    """PDTC-weighted average of the pointwise rate.

    With ``rate_map`` the integrand is the interpolated map, which is fast
    enough for sweeps; without it every quadrature node calls the full
    pipeline.  ``domain`` defaults to the full plane; since the rate is
    clamped at zero, the boundary domain gives the same value.
    """
    if rate_map is not None:
        if domain is None:
            # the clamped rate vanishes outside R >= 0; cut at grid cells for smooth pieces
            domain = BoundaryDomain(rate_map, split_cells=True)
        f = lambda a, b: rate_map.interpolate(a, b, strict=False)  # noqa: E731
    else:
        domain = domain or FullDomain()
        f = lambda a, b: rates(device, alice, bob, a, b)  # noqa: E731
    _, total = integrate(joint, domain, f, settings)
    return 0.0 if total is None else max(float(total), 0.0)


def averaged_observables(joint: JointPdtc, domain: SelectionDomain, device: DeviceParams,
                         alice: IntensitySet, bob: IntensitySet,
                         settings: QuadratureSettings | None = None) -> tuple[float, Observables]:
    """``(P_pass, <observables | domain>)``; raises :class:`EmptySelectionError`."""
    f = lambda a, b: observables(device, alice, bob, a, b).as_vector()  # noqa: E731
    p, mean = selection_statistics(joint, domain, f, settings)
    return p, Observables.from_vector(mean)


def _clamp_errors(obs: Observables) -> Observables:
    qx = np.maximum(obs.qx, 0.0)
    qz = np.maximum(obs.qz, 0.0)
    tx = np.clip(obs.tx, 0.0, qx)
    tz = np.clip(obs.tz, 0.0, qz)
    if np.any(tx != obs.tx) or np.any(tz != obs.tz):
        log.warning("averaged error-gains clamped to the gains")
    return Observables(qx, tx, qz, tz)


def model_observable(joint: JointPdtc, domain: SelectionDomain, device: DeviceParams,
                     alice: IntensitySet, bob: IntensitySet, include_pass: bool = True,
                     settings: QuadratureSettings | None = None) -> float:
    """Rate computed from observables averaged over the post-selected signals.

    ``include_pass`` multiplies by the pass probability so the result is key
    per transmitted pulse pair, comparable with the other two models.
    """
    try:
        p, obs = averaged_observables(joint, domain, device, alice, bob, settings)
    except EmptySelectionError:
        return 0.0
    r = rate_from_observables(device, alice, bob, _clamp_errors(obs))
    return p * r if include_pass else r
