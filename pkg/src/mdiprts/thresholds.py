"""Pre-fixed selection thresholds read off a key-rate map.

Everything here is a function of the rate map alone (device, intensities and
grid), never of a channel distribution, so thresholds can be fixed before any
data are taken.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from skimage.measure import find_contours

from .domains import JointDomain
from .errors import NoBoundaryError
from .keyrate import RateMap, rate_point

log = logging.getLogger(__name__)

#: contour points with max(eta_a, eta_b) at or above this define the asymptotes
HIGH_EDGE = 0.5


@dataclass(frozen=True, eq=False)
class ThresholdSet:
    eta_a_critical: float
    eta_b_critical: float
    x_min: float
    x_max: float
    boundary: np.ndarray  # (n, 2) polyline of (eta_a, eta_b)

    def as_row(self) -> tuple[float, float, float, float]:
        return (self.eta_a_critical, self.eta_b_critical, self.x_min, self.x_max)


def _refine(rmap: RateMap, ua: float, ub: float, on_a: bool, k: int, tol: float) -> tuple[float, float]:
    """Root of the full-pipeline rate along the grid edge through ``(ua, ub)``."""
    grid = rmap.log_grid_a if on_a else rmap.log_grid_b
    lo, hi = grid[k], grid[k + 1]

    def f(u):
        a, b = (math.exp(u), math.exp(ub)) if on_a else (math.exp(ua), math.exp(u))
        return rate_point(rmap.device, rmap.alice, rmap.bob, a, b, signed=True)

    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        root = lo
    elif fhi == 0.0:
        root = hi
    elif (flo > 0) != (fhi > 0):
        root = brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    else:
        return ua, ub
    return (root, ub) if on_a else (ua, root)


def extract_boundary(rmap: RateMap, tol: float = 1e-9, refine: bool = True) -> np.ndarray:
    """The ``R = 0`` contour as an ``(n, 2)`` array of ``(eta_a, eta_b)``.

    Marching squares runs on the map in log coordinates; each vertex sits on
    a grid edge and, with ``refine``, is moved to the exact root of the rate
    on that edge (``tol`` in ``ln eta``).  If several contours exist the
    longest is returned.

    Raises
    ------
    NoBoundaryError
        If the map has no sign change.
    """
    g = rmap.shape_values
    if np.all(g >= 0) or np.all(g < 0):
        raise NoBoundaryError("rate map does not change sign")
    contours = find_contours(g, 0.0, fully_connected="high")
    if not contours:
        raise NoBoundaryError("no zero contour found")
    if len(contours) > 1:
        log.warning("rate map has %d zero contours; keeping the longest", len(contours))
    path = max(contours, key=len)

    ga, gb = rmap.log_grid_a, rmap.log_grid_b
    out = np.empty_like(path)
    for n, (ri, ci) in enumerate(path):
        ia, ib = int(math.floor(ri)), int(math.floor(ci))
        ia, ib = min(ia, len(ga) - 2), min(ib, len(gb) - 2)
        ua = ga[ia] + (ri - ia) * (ga[ia + 1] - ga[ia])
        ub = gb[ib] + (ci - ib) * (gb[ib + 1] - gb[ib])
        if refine:
            on_a = not float(ri).is_integer()
            ua, ub = _refine(rmap, ua, ub, on_a, ia if on_a else ib, tol)
        out[n] = ua, ub
    return np.exp(out)


def critical_etas(boundary: np.ndarray) -> tuple[float, float]:
    """Smallest ``eta_a`` and smallest ``eta_b`` reached by the positive region."""
    return float(boundary[:, 0].min()), float(boundary[:, 1].min())


def asymmetry_limits(boundary: np.ndarray, high_edge: float = HIGH_EDGE) -> tuple[float, float]:
    """Extreme mismatch ratios ``eta_a / eta_b`` on the high-transmittance part
    of the contour, where it runs along its asymptotes."""
    high = np.maximum(boundary[:, 0], boundary[:, 1]) >= high_edge
    if not high.any():
        raise NoBoundaryError("contour never reaches the high-transmittance edge")
    ratio = boundary[high, 0] / boundary[high, 1]
    return float(ratio.min()), float(ratio.max())


def find_thresholds(rmap: RateMap, tol: float = 1e-9) -> ThresholdSet:
    boundary = extract_boundary(rmap, tol)
    ca, cb = critical_etas(boundary)
    x_min, x_max = asymmetry_limits(boundary)
    return ThresholdSet(ca, cb, x_min, x_max, boundary)


def build_joint_domain(ts: ThresholdSet) -> JointDomain:
    """Four-line approximation of the positive region."""
    return JointDomain(ts.eta_a_critical, ts.eta_b_critical, ts.x_min, ts.x_max)
