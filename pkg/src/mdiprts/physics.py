"""Coherent-state Bell-state-measurement model for polarization MDI-QKD.

Alice and Bob send phase-randomized weak coherent pulses through channels of
transmittance ``eta_a`` and ``eta_b`` to a relay with a 50/50 beamsplitter,
two polarizing beamsplitters and four threshold detectors ``cH, cV, dH, dV``.
A Bell-state measurement succeeds when exactly two detectors of orthogonal
polarization click: ``{cH, dV}`` or ``{cV, dH}`` announce psi-minus,
``{cH, cV}`` or ``{dH, dV}`` announce psi-plus.  Every other pattern is
discarded.

Misalignment is a relative polarization rotation ``theta`` between the two
users, ``sin(theta)**2 = e_d``, split evenly as ``+theta/2`` on Alice and
``-theta/2`` on Bob so the model is symmetric under exchanging the users.

Two independent evaluation routes are provided:

* :func:`observables` averages the closed-form click probabilities of coherent
  states over the relative phase (a periodic trapezoid rule, exponentially
  convergent).
* :func:`yield_matrix` propagates Fock states through the same optics
  (multi-photon interference via permanents of the mode-overlap matrix) and
  gives the photon-number-resolved yields ``Y_nm`` that the decoy analysis
  bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import gammaln
from scipy.stats import binom

# detector bit flags
CH, CV, DH, DV = 1, 2, 4, 8
PSI_MINUS = (CH | DV, CV | DH)
PSI_PLUS = (CH | CV, DH | DV)

_S2 = 1.0 / math.sqrt(2.0)
POLARIZATIONS = {
    "H": (1.0, 0.0),
    "V": (0.0, 1.0),
    "D": (_S2, _S2),
    "A": (_S2, -_S2),
}
BASIS_STATES = {"Z": ("H", "V"), "X": ("D", "A")}

#: phase nodes on [0, pi] for the relative-phase average
PHASE_NODES = 13
#: Fock-expansion photon-number cutoff
FOCK_CUTOFF = 20


@dataclass(frozen=True)
class DeviceParams:
    """Detector and post-processing constants."""

    y0: float = 1e-5
    eta_d: float = 0.45
    e_d: float = 0.01
    f_e: float = 1.16

    def __post_init__(self):
        if not (0.0 <= self.y0 < 1.0):
            raise ValueError(f"y0 must lie in [0, 1), got {self.y0!r}")
        if not (0.0 < self.eta_d <= 1.0):
            raise ValueError(f"eta_d must lie in (0, 1], got {self.eta_d!r}")
        if not (0.0 <= self.e_d < 0.5):
            raise ValueError(f"e_d must lie in [0, 0.5), got {self.e_d!r}")
        if not (self.f_e >= 1.0):
            raise ValueError(f"f_e must be >= 1, got {self.f_e!r}")

    @property
    def rotation(self) -> float:
        """Relative polarization misalignment angle in radians."""
        return math.asin(math.sqrt(self.e_d))


@dataclass(frozen=True)
class IntensitySet:
    """One user's 4-intensity settings: Z-basis signal ``s`` and X-basis decoys."""

    s: float
    p_s: float
    mu: float
    nu: float
    omega: float = 0.0

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("signal intensity s must be > 0")
        if not (0.0 < self.p_s < 1.0):
            raise ValueError("p_s must lie in (0, 1)")
        if not (self.mu > self.nu > self.omega >= 0.0):
            raise ValueError("decoys must satisfy mu > nu > omega >= 0")

    @property
    def decoys(self) -> tuple[float, float, float]:
        return (self.mu, self.nu, self.omega)


@dataclass(frozen=True, eq=False)
class Observables:
    """Gains and error-gains; arrays may carry leading batch dimensions.

    ``qx[..., i, j]`` is the X-basis gain for Alice's decoy ``i`` and Bob's
    decoy ``j`` (order mu, nu, omega); ``tx`` the matching error-gain.
    """

    qx: np.ndarray
    tx: np.ndarray
    qz: np.ndarray
    tz: np.ndarray

    def as_vector(self) -> np.ndarray:
        """Stack to shape ``(..., 20)``: qx (9), tx (9), qz, tz."""
        batch = np.shape(self.qz)
        return np.concatenate(
            [
                np.reshape(self.qx, batch + (9,)),
                np.reshape(self.tx, batch + (9,)),
                np.asarray(self.qz)[..., None],
                np.asarray(self.tz)[..., None],
            ],
            axis=-1,
        )

    @classmethod
    def from_vector(cls, vec) -> "Observables":
        vec = np.asarray(vec, dtype=float)
        batch = vec.shape[:-1]
        return cls(
            qx=vec[..., :9].reshape(batch + (3, 3)),
            tx=vec[..., 9:18].reshape(batch + (3, 3)),
            qz=vec[..., 18],
            tz=vec[..., 19],
        )

    def check(self, atol: float = 0.0) -> None:
        """Raise if any entry violates ``0 <= T <= Q <= 1``."""
        from .errors import InconsistentObservablesError

        q = np.concatenate([np.ravel(self.qx), np.ravel(self.qz)])
        t = np.concatenate([np.ravel(self.tx), np.ravel(self.tz)])
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise InconsistentObservablesError("observables must be finite")
        if np.any(t < -atol) or np.any(q > 1 + atol):
            raise InconsistentObservablesError("observables must satisfy 0 <= T and Q <= 1")
        if np.any(t > q + atol):
            raise InconsistentObservablesError("error-gain exceeds gain (T > Q)")


def photon_weight(intensity, n):
    """Poisson probability of ``n`` photons in a pulse of mean ``intensity``."""
    intensity = np.asarray(intensity, dtype=float)
    n = np.asarray(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = n * np.log(intensity) - intensity - gammaln(n + 1)
    out = np.where(n == 0, np.exp(-intensity), np.where(intensity > 0, np.exp(logp), 0.0))
    return out if out.ndim else float(out)


def _rotate(vec, angle):
    c, s = math.cos(angle), math.sin(angle)
    return (c * vec[0] - s * vec[1], s * vec[0] + c * vec[1])


def input_modes(device: DeviceParams, basis: str):
    """Yield ``(label_a, label_b, U_a, U_b)`` for the four input combinations.

    ``U_a[k]`` is the amplitude that a photon from Alice reaches detector ``k``
    (order cH, cV, dH, dV).
    """
    half = 0.5 * device.rotation
    for la, lb in product(BASIS_STATES[basis], repeat=2):
        u = _rotate(POLARIZATIONS[la], half)
        v = _rotate(POLARIZATIONS[lb], -half)
        ua = np.array([u[0], u[1], u[0], u[1]]) * _S2
        ub = np.array([v[0], v[1], -v[0], -v[1]]) * _S2
        yield la, lb, ua, ub


def error_weight(basis: str, la: str, lb: str) -> tuple[float, float]:
    """Return (psi-minus, psi-plus) error indicators for an input pair.

    Z basis: Bob flips his bit for both Bell states, so equal inputs are
    errors.  X basis: psi-minus flips, psi-plus keeps.
    """
    same = float(la == lb)
    if basis == "Z":
        return same, same
    return same, 1.0 - same


@lru_cache(maxsize=None)
def _phase_rule(nodes: int):
    phi = np.linspace(0.0, math.pi, nodes)
    w = np.full(nodes, 1.0 / (nodes - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return np.cos(phi), w


def _bell_probabilities(lam_a, lam_b, ua, ub, y0, nodes=PHASE_NODES):
    """Phase-averaged (P(psi-), P(psi+)) for coherent inputs of mean lam_a, lam_b."""
    cosphi, w = _phase_rule(nodes)
    lam_a = np.asarray(lam_a, dtype=float)[..., None]
    lam_b = np.asarray(lam_b, dtype=float)[..., None]
    cross = 2.0 * np.sqrt(lam_a * lam_b) * cosphi
    log_q = math.log1p(-y0)
    nc = []
    cl = []
    for k in range(4):
        m = lam_a * ua[k] ** 2 + lam_b * ub[k] ** 2 + cross * (ua[k] * ub[k])
        x = log_q - m
        nc.append(np.exp(x))
        cl.append(-np.expm1(x))
    p_minus = cl[0] * nc[1] * nc[2] * cl[3] + nc[0] * cl[1] * cl[2] * nc[3]
    p_plus = cl[0] * cl[1] * nc[2] * nc[3] + nc[0] * nc[1] * cl[2] * cl[3]
    return p_minus @ w, p_plus @ w


def gain_pair(device: DeviceParams, basis: str, int_a, int_b, eta_a, eta_b):
    """Gain and error-gain for intensities ``int_a``, ``int_b`` in ``basis``."""
    lam_a = np.asarray(int_a) * np.asarray(eta_a, dtype=float) * device.eta_d
    lam_b = np.asarray(int_b) * np.asarray(eta_b, dtype=float) * device.eta_d
    q = 0.0
    t = 0.0
    for la, lb, ua, ub in input_modes(device, basis):
        pm, pp = _bell_probabilities(lam_a, lam_b, ua, ub, device.y0)
        em, ep = error_weight(basis, la, lb)
        q = q + 0.25 * (pm + pp)
        t = t + 0.25 * (em * pm + ep * pp)
    return q, t


def observables(device: DeviceParams, alice: IntensitySet, bob: IntensitySet, eta_a, eta_b) -> Observables:
    """Gains and error-gains at channel transmittances ``(eta_a, eta_b)``.

    ``eta_a`` and ``eta_b`` may be arrays (broadcast together); the result
    then carries their shape as leading dimensions.
    """
    eta_a, eta_b = np.broadcast_arrays(np.asarray(eta_a, dtype=float), np.asarray(eta_b, dtype=float))
    if np.any((eta_a < 0) | (eta_a > 1) | (eta_b < 0) | (eta_b > 1)):
        raise ValueError("transmittances must lie in [0, 1]")
    batch = eta_a.shape
    qx = np.empty(batch + (3, 3))
    tx = np.empty(batch + (3, 3))
    for i, ia in enumerate(alice.decoys):
        for j, ib in enumerate(bob.decoys):
            qx[..., i, j], tx[..., i, j] = gain_pair(device, "X", ia, ib, eta_a, eta_b)
    qz, tz = gain_pair(device, "Z", alice.s, bob.s, eta_a, eta_b)
    return Observables(qx=qx, tx=tx, qz=np.asarray(qz), tz=np.asarray(tz))


# ---------------------------------------------------------------------------
# Fock-state route


def _no_photon_probability(na: int, nb: int, gaa: float, gbb: float, gab: float) -> float:
    """Probability that every photon ends up in a chosen subset of detectors.

    ``gaa``, ``gbb`` and ``gab`` are the overlaps of Alice's and Bob's
    detector-amplitude vectors restricted to that subset.  This is the
    permanent of a block-constant Gram matrix.
    """
    total = 0.0
    for k in range(min(na, nb) + 1):
        total += math.comb(na, k) * math.comb(nb, k) * gaa ** (na - k) * gbb ** (nb - k) * gab ** (2 * k)
    return total


@lru_cache(maxsize=65536)
def fock_click_distribution(na: int, nb: int, ua: tuple, ub: tuple) -> np.ndarray:
    """Distribution over the 16 photon-occupied detector sets.

    ``na`` photons enter in Alice's mode and ``nb`` in Bob's (after all loss);
    ``ua``, ``ub`` are the mode-to-detector amplitudes.  Index ``mask`` of the
    result is the probability that exactly the detectors in ``mask`` receive
    at least one photon.
    """
    ua = np.asarray(ua)
    ub = np.asarray(ub)
    inside = np.zeros(16)
    for mask in range(16):
        sel = np.array([(mask >> k) & 1 for k in range(4)], dtype=bool)
        inside[mask] = _no_photon_probability(
            na, nb, float(ua[sel] @ ua[sel]), float(ub[sel] @ ub[sel]), float(ua[sel] @ ub[sel])
        )
    # exactly-occupied sets by inclusion-exclusion over subsets
    dist = np.zeros(16)
    for mask in range(16):
        sub = mask
        while True:
            sign = -1.0 if bin(mask ^ sub).count("1") % 2 else 1.0
            dist[mask] += sign * inside[sub]
            if sub == 0:
                break
            sub = (sub - 1) & mask
    return np.clip(dist, 0.0, None)


@lru_cache(maxsize=None)
def _dark_transfer(y0: float) -> np.ndarray:
    """M[photon_mask, final_mask]: dark counts add clicks independently."""
    m = np.zeros((16, 16))
    for pm in range(16):
        for fm in range(16):
            if pm & ~fm:
                continue
            extra = bin(fm & ~pm).count("1")
            silent = 4 - bin(fm).count("1")
            m[pm, fm] = y0**extra * (1.0 - y0) ** silent
    return m


def success_probabilities(na: int, nb: int, ua, ub, y0: float) -> tuple[float, float]:
    """(P(psi-), P(psi+)) for ``na``, ``nb`` detected-mode photons plus dark counts."""
    dist = fock_click_distribution(na, nb, tuple(float(x) for x in ua), tuple(float(x) for x in ub))
    final = dist @ _dark_transfer(y0)
    return final[PSI_MINUS[0]] + final[PSI_MINUS[1]], final[PSI_PLUS[0]] + final[PSI_PLUS[1]]


@dataclass(frozen=True)
class YieldMatrix:
    """Photon-number-resolved yields ``y[n, m]`` and error-yields ``ey[n, m]``."""

    y: np.ndarray
    ey: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)


def yield_matrix(device: DeviceParams, eta_a: float, eta_b: float, basis: str = "X",
                 cutoff: int = FOCK_CUTOFF, prune: float = 1e-22) -> YieldMatrix:
    """Yields for ``n`` photons from Alice and ``m`` from Bob, ``n, m <= cutoff``.

    Photons are lost independently (channel times detector efficiency), the
    survivors interfere at the relay, and dark counts are added.  Binomial
    survival weights below ``prune`` are skipped.
    """
    ta = float(eta_a) * device.eta_d
    tb = float(eta_b) * device.eta_d
    n_idx = np.arange(cutoff + 1)
    # surv_a[n, k] = P(k of n photons survive)
    surv_a = binom.pmf(n_idx[None, :], n_idx[:, None], ta)
    surv_b = binom.pmf(n_idx[None, :], n_idx[:, None], tb)
    keep_a = np.any(surv_a > prune, axis=0)
    keep_b = np.any(surv_b > prune, axis=0)
    s_gain = np.zeros((cutoff + 1, cutoff + 1))
    s_err = np.zeros((cutoff + 1, cutoff + 1))
    for la, lb, ua, ub in input_modes(device, basis):
        em, ep = error_weight(basis, la, lb)
        for ka in np.nonzero(keep_a)[0]:
            for kb in np.nonzero(keep_b)[0]:
                pm, pp = success_probabilities(int(ka), int(kb), ua, ub, device.y0)
                s_gain[ka, kb] += 0.25 * (pm + pp)
                s_err[ka, kb] += 0.25 * (em * pm + ep * pp)
    y = surv_a @ s_gain @ surv_b.T
    ey = surv_a @ s_err @ surv_b.T
    return YieldMatrix(y=y, ey=ey, meta={"basis": basis, "cutoff": cutoff})


def true_single_photon(device: DeviceParams, eta_a: float, eta_b: float) -> tuple[float, float]:
    """Ground-truth X-basis single-photon-pair yield ``Y11`` and error rate ``e11``."""
    ym = yield_matrix(device, eta_a, eta_b, basis="X", cutoff=1)
    y11 = float(ym.y[1, 1])
    e11 = float(ym.ey[1, 1] / y11) if y11 > 0 else 0.0
    return y11, min(max(e11, 0.0), 0.5)
