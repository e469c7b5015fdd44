"""Post-selection domains in the (eta_a, eta_b) plane and 2D quadrature over them.

Integrals run in log-transmittance coordinates ``u = ln(eta)``, where each
log-normal channel becomes a Gaussian truncated at ``u = 0``.  Bob's axis is
the outer integral; for every outer node the domain reports the exact set of
admissible ``u_a`` as a union of intervals, which the inner Gauss-Legendre
rule covers.  Threshold and ratio constraints are therefore applied exactly
rather than by including or excluding whole panels.  The rule is refined by
doubling the panel count until successive results agree to ``rtol``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EmptySelectionError
from .turbulence import UNDERFLOW_FLOOR, ChannelParams, JointPdtc, truncation_mass

log = logging.getLogger(__name__)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


class SelectionDomain:
    """Base class for domains; subclasses define membership and inner intervals."""

    def contains(self, eta_a, eta_b, strict: bool = True):
        raise NotImplementedError

    def a_intervals(self, ub: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Admissible ``u_a`` intervals at each ``u_b``; arrays of shape (N, K)."""
        raise NotImplementedError

    def b_breakpoints(self) -> list[float]:
        """Values of ``u_b`` where the interval end points change form."""
        return []


@dataclass(frozen=True)
class FullDomain(SelectionDomain):
    """No post-selection."""

    def contains(self, eta_a, eta_b, strict=True):
        return np.ones(np.broadcast(eta_a, eta_b).shape, dtype=bool)

    def a_intervals(self, ub):
        n = len(ub)
        return np.full((n, 1), -np.inf), np.zeros((n, 1))


@dataclass(frozen=True)
class SquareDomain(SelectionDomain):
    """Independent thresholds on each channel."""

    eta_at: float
    eta_bt: float

    def __post_init__(self):
        if not (0.0 <= self.eta_at < 1.0 and 0.0 <= self.eta_bt < 1.0):
            raise ValueError("square thresholds must lie in [0, 1)")

    def contains(self, eta_a, eta_b, strict=True):
        return (np.asarray(eta_a) >= self.eta_at) & (np.asarray(eta_b) >= self.eta_bt)

    def a_intervals(self, ub):
        ub = np.asarray(ub)
        lo = np.full((len(ub), 1), _log(self.eta_at))
        hi = np.where(ub >= _log(self.eta_bt), 0.0, -np.inf)[:, None]
        return lo, hi

    def b_breakpoints(self):
        return [_log(self.eta_bt)]


@dataclass(frozen=True)
class JointDomain(SelectionDomain):
    """Per-channel thresholds plus limits on the mismatch ``eta_a / eta_b``."""

    eta_at: float
    eta_bt: float
    x_min: float
    x_max: float

    def __post_init__(self):
        if not (0.0 <= self.eta_at < 1.0 and 0.0 <= self.eta_bt < 1.0):
            raise ValueError("thresholds must lie in [0, 1)")
        if not (0.0 < self.x_min <= self.x_max):
            raise ValueError("need 0 < x_min <= x_max")

    def contains(self, eta_a, eta_b, strict=True):
        a = np.asarray(eta_a, dtype=float)
        b = np.asarray(eta_b, dtype=float)
        ratio = a / b
        return (a >= self.eta_at) & (b >= self.eta_bt) & (ratio >= self.x_min) & (ratio <= self.x_max)

    def a_intervals(self, ub):
        ub = np.asarray(ub, dtype=float)
        lo = np.maximum(_log(self.eta_at), ub + math.log(self.x_min))
        hi = np.minimum(0.0, ub + math.log(self.x_max))
        hi = np.where(ub >= _log(self.eta_bt), hi, -np.inf)
        return lo[:, None], hi[:, None]

    def b_breakpoints(self):
        la = _log(self.eta_at)
        pts = [_log(self.eta_bt), -math.log(self.x_min), -math.log(self.x_max)]
        if math.isfinite(la):
            pts += [la - math.log(self.x_min), la - math.log(self.x_max)]
        return pts


@dataclass(frozen=True, eq=False)
class BoundaryDomain(SelectionDomain):
    """The region where a precomputed rate map is nonnegative.

    ``rate_map`` must provide ``log_grid_a``, ``log_grid_b`` and ``shape_values``
    (the signed rate divided by ``eta_a * eta_b``, indexed ``[i_a, i_b]``) and
    an ``interpolate`` method.  With ``split_cells`` the inner intervals are cut
    at every grid line, so integrands built from the same interpolant are
    smooth on each piece.
    """

    rate_map: object
    split_cells: bool = False

    def contains(self, eta_a, eta_b, strict=True):
        r = self.rate_map.interpolate(eta_a, eta_b, signed=True, strict=strict)
        return np.asarray(r) >= 0.0

    def a_intervals(self, ub):
        ga = self.rate_map.log_grid_a
        gb = self.rate_map.log_grid_b
        g = self.rate_map.shape_values
        ub = np.asarray(ub, dtype=float)
        rows = []
        for u in ub:
            if not (gb[0] <= u <= gb[-1]):
                rows.append([])
                continue
            j = min(int(np.searchsorted(gb, u, side="right")) - 1, len(gb) - 2)
            t = (u - gb[j]) / (gb[j + 1] - gb[j])
            line = (1.0 - t) * g[:, j] + t * g[:, j + 1]
            runs = _nonnegative_runs(ga, line)
            if self.split_cells:
                runs = [piece for run in runs for piece in _split(run, ga)]
            rows.append(runs)
        k = max(1, max(len(r) for r in rows))
        lo = np.zeros((len(ub), k))
        hi = np.full((len(ub), k), -np.inf)
        for n, r in enumerate(rows):
            for m, (a, b) in enumerate(r):
                lo[n, m] = a
                hi[n, m] = b
        return lo, hi

    def b_breakpoints(self):
        # between these values the runs keep their structure and their end
        # points move smoothly: grid lines, plus every u_b where an
        # interpolated row value changes sign inside a cell
        gb = self.rate_map.log_grid_b
        g = self.rate_map.shape_values
        left, right = g[:, :-1], g[:, 1:]
        flip = (left >= 0) != (right >= 0)
        i, j = np.nonzero(flip)
        t = left[i, j] / (left[i, j] - right[i, j])
        crossings = gb[j] + t * (gb[j + 1] - gb[j])
        return sorted(set(gb.tolist()) | set(crossings.tolist()))


def _split(run: tuple[float, float], grid: np.ndarray) -> list[tuple[float, float]]:
    a, b = run
    inner = grid[(grid > a) & (grid < b)]
    edges = [a, *inner, b]
    return list(zip(edges[:-1], edges[1:]))


def _nonnegative_runs(x: np.ndarray, y: np.ndarray) -> list[tuple[float, float]]:
    """Intervals of ``x`` where the piecewise-linear ``y`` is >= 0."""
    pos = y >= 0.0
    if not pos.any():
        return []
    runs = []
    start = x[0] if pos[0] else None
    for k in range(len(x) - 1):
        if pos[k] and not pos[k + 1]:
            end = x[k] + (x[k + 1] - x[k]) * y[k] / (y[k] - y[k + 1])
            runs.append((start, end))
            start = None
        elif not pos[k] and pos[k + 1]:
            start = x[k] + (x[k + 1] - x[k]) * y[k] / (y[k] - y[k + 1])
    if start is not None:
        runs.append((start, x[-1]))
    return runs


def contains(domain: SelectionDomain, eta_a, eta_b, strict: bool = True):
    """Membership test; ``strict`` raises for points a rate map does not cover."""
    return domain.contains(eta_a, eta_b, strict=strict)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureSettings:
    order: int = 8
    panels: int = 8
    max_panels: int = 128
    rtol: float = 1e-5
    span: float = 9.0


DEFAULT_QUADRATURE = QuadratureSettings()


@lru_cache(maxsize=None)
def _gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


class _Axis:
    """One channel's log-transmittance distribution, continuous or a point."""

    def __init__(self, params: ChannelParams, span: float):
        self.static = params.is_static
        if self.static:
            self.u0 = math.log(params.eta0)
            return
        self.m = params.log_mean
        self.s = params.sigma
        self.norm = 1.0 / (self.s * math.sqrt(2.0 * math.pi) * truncation_mass(params))
        self.lo = self.m - span * self.s
        self.hi = min(0.0, self.m + span * self.s)

    def density(self, u):
        z = (u - self.m) / self.s
        return self.norm * np.exp(-0.5 * z * z)

    def outer_rule(self, panels: int, order: int, breaks, refine: int = 1):
        if self.static:
            return np.array([self.u0]), np.array([1.0])
        cuts = sorted({self.lo, self.hi, *(b for b in breaks if self.lo < b < self.hi)})
        lengths = np.diff(cuts)
        # every segment is refined at least ``refine``-fold, so doubling always changes the rule
        alloc = np.maximum(refine, np.round(panels * lengths / lengths.sum()).astype(int))
        x, w = _gauss_legendre(order)
        nodes, weights = [], []
        for a, n, length in zip(cuts[:-1], alloc, lengths):
            h = length / n
            left = a + h * np.arange(n)
            nodes.append((left[:, None] + h * x[None, :]).ravel())
            weights.append(np.tile(h * w, n))
        u = np.concatenate(nodes)
        return u, np.concatenate(weights) * self.density(u)

    def inner_rule(self, lo, hi, panels: int, order: int, refine: int = 1):
        """Nodes and weights over intervals ``[lo, hi]`` (arrays of shape (N, K)).

        Each interval gets the same number of panels, scaled to the widest one.
        """
        if self.static:
            inside = (lo <= self.u0) & (self.u0 <= hi)
            w = inside.any(axis=1).astype(float)
            return np.full((len(lo), 1), self.u0), w[:, None]
        lo = np.clip(lo, self.lo, self.hi)
        hi = np.clip(hi, self.lo, self.hi)
        width = np.where(hi > lo, hi - lo, 0.0)
        widest = float(width.max()) if width.size else 0.0
        panels = max(refine, math.ceil(panels * widest / (self.hi - self.lo)))
        x, w = _gauss_legendre(order)
        frac = ((np.arange(panels)[:, None] + x[None, :]) / panels).ravel()
        wt = np.tile(w, panels) / panels
        u = lo[..., None] + width[..., None] * frac
        weights = width[..., None] * wt * self.density(u)
        n = lo.shape[0]
        return u.reshape(n, -1), weights.reshape(n, -1)


def _evaluate(joint: JointPdtc, domain: SelectionDomain, f, panels: int, settings: QuadratureSettings):
    ax_a = _Axis(joint.alice, settings.span)
    ax_b = _Axis(joint.bob, settings.span)
    refine = max(1, panels // settings.panels)
    ub, wb = ax_b.outer_rule(panels, settings.order, domain.b_breakpoints(), refine)
    lo, hi = domain.a_intervals(ub)
    ua, wa = ax_a.inner_rule(lo, hi, panels, settings.order, refine)
    w = wb[:, None] * wa
    prob = float(w.sum())
    if f is None:
        return prob, None
    mask = w > 0
    if not mask.any():
        return prob, None
    eta_a = np.exp(ua[mask])
    eta_b = np.exp(np.broadcast_to(ub[:, None], ua.shape)[mask])
    vals = np.asarray(f(eta_a, eta_b), dtype=float)
    return prob, np.tensordot(w[mask], vals, axes=(0, 0))


def integrate(joint: JointPdtc, domain: SelectionDomain, f=None, settings: QuadratureSettings | None = None):
    """Return ``(P, I)``: the domain probability and ``integral of f * p`` over it.

    ``f(eta_a, eta_b)`` receives 1D arrays and returns shape ``(n,)`` or
    ``(n, k)``.  ``I`` is ``None`` when ``f`` is ``None`` or the domain is empty.
    """
    settings = settings or DEFAULT_QUADRATURE
    if joint.alice.is_static and joint.bob.is_static:
        a, b = joint.alice.eta0, joint.bob.eta0
        if not bool(domain.contains(a, b, strict=False)):
            return 0.0, None
        if f is None:
            return 1.0, None
        return 1.0, np.asarray(f(np.array([a]), np.array([b])), dtype=float)[0]

    panels = settings.panels
    prev = _evaluate(joint, domain, f, panels, settings)
    while True:
        panels *= 2
        cur = _evaluate(joint, domain, f, panels, settings)
        if _converged(prev, cur, settings.rtol):
            return cur
        if panels >= settings.max_panels:
            log.warning("quadrature not converged to rtol=%g at %d panels", settings.rtol, panels)
            return cur
        prev = cur


def _converged(prev, cur, rtol) -> bool:
    p0, i0 = prev
    p1, i1 = cur
    if abs(p1 - p0) > rtol * max(abs(p1), UNDERFLOW_FLOOR):
        return False
    if i1 is None or i0 is None:
        return (i0 is None) == (i1 is None)
    i0 = np.atleast_1d(i0)
    i1 = np.atleast_1d(i1)
    scale = np.maximum(np.abs(i1), 1e-15 * np.max(np.abs(i1)))
    return bool(np.all(np.abs(i1 - i0) <= rtol * scale + 1e-300))


def region_probability(joint: JointPdtc, domain: SelectionDomain, settings: QuadratureSettings | None = None,
                       floor: float = UNDERFLOW_FLOOR) -> float:
    """Probability that a pair of transmittances falls in ``domain``."""
    p, _ = integrate(joint, domain, None, settings)
    p = min(max(p, 0.0), 1.0)
    return p if p >= floor else 0.0


def region_expectation(joint: JointPdtc, domain: SelectionDomain, f, settings: QuadratureSettings | None = None,
                       floor: float = UNDERFLOW_FLOOR):
    """Conditional expectation of ``f`` given selection into ``domain``."""
    p, i = integrate(joint, domain, f, settings)
    if p < floor or i is None:
        raise EmptySelectionError(f"selection probability {p:.3g} below floor")
    out = i / p
    return float(out) if np.ndim(out) == 0 else out


def selection_statistics(joint: JointPdtc, domain: SelectionDomain, f, settings: QuadratureSettings | None = None,
                         floor: float = UNDERFLOW_FLOOR):
    """``(P, E[f | domain])`` from a single quadrature pass."""
    p, i = integrate(joint, domain, f, settings)
    if p < floor or i is None:
        raise EmptySelectionError(f"selection probability {p:.3g} below floor")
    return p, i / p


__all__ = [
    "SelectionDomain",
    "FullDomain",
    "SquareDomain",
    "JointDomain",
    "BoundaryDomain",
    "QuadratureSettings",
    "contains",
    "integrate",
    "region_probability",
    "region_expectation",
    "selection_statistics",
]
