"""Seeded Monte-Carlo oracles for the analytic and quadrature code paths.

Every routine takes an explicit seed and returns the estimate together with
its standard error, so checks are of the form ``|analytic - mc| <= 3 se``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest, norm

from .domains import SelectionDomain
from .errors import EmptySelectionError
from .keyrate import _clamp_errors, rate_from_observables
from .physics import (
    PSI_MINUS,
    PSI_PLUS,
    DeviceParams,
    IntensitySet,
    Observables,
    error_weight,
    fock_click_distribution,
    input_modes,
    observables,
)
from .turbulence import ChannelParams, JointPdtc, sample_pairs

_CHUNK = 1_000_000


@dataclass(frozen=True)
class McEstimate:
    """Monte-Carlo estimate; ``proportion`` marks a hit frequency out of ``n``."""

    value: float
    std_error: float
    n: int
    seed: int | None
    proportion: bool = False

    def z_score(self, reference: float) -> float:
        """Standardized distance to ``reference``.

        Frequencies use an exact two-sided binomial test against the reference
        probability, reported as the equivalent normal deviate, so the verdict
        stays valid when only a handful of hits is expected.
        """
        if self.proportion:
            return _binomial_z(round(self.value * self.n), self.n, reference)
        diff = abs(self.value - reference)
        if self.std_error > 0:
            return diff / self.std_error
        return 0.0 if diff <= 1e-12 * max(1.0, abs(reference)) else math.inf

    def agrees(self, reference: float, k: float = 3.0) -> bool:
        return self.z_score(reference) <= k


def _binomial_z(hits: int, n: int, p: float) -> float:
    if n == 0:
        return 0.0
    p = min(max(float(p), 0.0), 1.0)
    if p in (0.0, 1.0):
        return 0.0 if hits == round(p * n) else math.inf
    pvalue = binomtest(hits, n, p).pvalue
    return float(norm.isf(min(pvalue, 1.0) / 2))


def _proportion(hits: int, n: int, seed) -> McEstimate:
    p = hits / n if n else 0.0
    se = math.sqrt(max(p * (1 - p), 0.0) / n) if n else 0.0
    return McEstimate(p, se, n, seed, proportion=True)


# ---------------------------------------------------------------------------
# channel sampling


def mc_region_probability(joint: JointPdtc, domain: SelectionDomain, n: int, seed: int) -> McEstimate:
    pairs = sample_pairs(joint, n, seed)
    hits = int(np.count_nonzero(domain.contains(pairs[:, 0], pairs[:, 1], strict=False)))
    return _proportion(hits, n, seed)


def mc_conditional_mean(params: ChannelParams, eta_t: float, n: int, seed: int) -> McEstimate:
    eta = sample_pairs(JointPdtc(params, params), n, seed)[:, 0]
    sel = eta[eta >= eta_t]
    if sel.size < 2:
        raise EmptySelectionError("no samples above the threshold")
    return McEstimate(float(sel.mean()), float(sel.std(ddof=1) / np.sqrt(sel.size)), n, seed)


def mc_expectation(joint: JointPdtc, f, n: int, seed: int) -> McEstimate:
    """Plain sample mean of ``f(eta_a, eta_b)`` over the joint PDTC."""
    pairs = sample_pairs(joint, n, seed)
    vals = np.concatenate([
        np.asarray(f(pairs[k:k + _CHUNK, 0], pairs[k:k + _CHUNK, 1]), dtype=float)
        for k in range(0, n, _CHUNK)
    ])
    return McEstimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n)), n, seed)


def mc_observable_model(joint: JointPdtc, domain: SelectionDomain, device: DeviceParams,
                        alice: IntensitySet, bob: IntensitySet, n: int, seed: int,
                        batches: int = 20, include_pass: bool = True) -> McEstimate:
    """Observable-model rate from sampled channels; error from batch means."""
    if batches < 2 or n < batches:
        raise ValueError("need at least two batches and one sample per batch")
    pairs = sample_pairs(joint, n, seed)
    keep = np.asarray(domain.contains(pairs[:, 0], pairs[:, 1], strict=False))
    if not keep.any():
        raise EmptySelectionError("no sampled pair passed the selection")

    size = n // batches
    sums = np.zeros((batches, 20))
    counts = np.zeros(batches)
    for b in range(batches):
        sl = slice(b * size, n if b == batches - 1 else (b + 1) * size)
        sel = pairs[sl][keep[sl]]
        counts[b] = sel.shape[0]
        if sel.shape[0]:
            sums[b] = observables(device, alice, bob, sel[:, 0], sel[:, 1]).as_vector().sum(axis=0)

    def rate(total, accepted, drawn):
        if accepted == 0:
            return 0.0
        obs = _clamp_errors(Observables.from_vector(total / accepted))
        r = rate_from_observables(device, alice, bob, obs)
        return r * accepted / drawn if include_pass else r

    sizes = np.array([size] * (batches - 1) + [n - size * (batches - 1)], dtype=float)
    value = rate(sums.sum(axis=0), counts.sum(), n)
    per_batch = np.array([rate(sums[b], counts[b], sizes[b]) for b in range(batches)])
    se = float(per_batch.std(ddof=1) / np.sqrt(batches))
    return McEstimate(value, se, n, seed)


# ---------------------------------------------------------------------------
# photon-number Bell-state measurement


def _bsm_counts(device: DeviceParams, basis: str, na: np.ndarray, nb: np.ndarray,
                rng: np.random.Generator) -> tuple[int, int]:
    """Successes and errors for trials with ``na``, ``nb`` emitted photons."""
    n = na.size
    combo = rng.integers(0, 4, size=n)
    ka = rng.binomial(na, device.eta_d)
    kb = rng.binomial(nb, device.eta_d)
    pattern = np.zeros(n, dtype=np.int64)
    modes = list(input_modes(device, basis))
    err_m = np.zeros(n, dtype=bool)
    err_p = np.zeros(n, dtype=bool)
    for c, (la, lb, ua, ub) in enumerate(modes):
        em, ep = error_weight(basis, la, lb)
        in_c = combo == c
        err_m[in_c] = bool(em)
        err_p[in_c] = bool(ep)
        ta, tb = tuple(float(x) for x in ua), tuple(float(x) for x in ub)
        idx = np.nonzero(in_c)[0]
        key = ka[idx] * (int(kb.max()) + 1) + kb[idx]
        order = np.argsort(key, kind="stable")
        values, starts = np.unique(key[order], return_index=True)
        for g, rows in zip(values, np.split(idx[order], starts[1:])):
            na_g, nb_g = divmod(int(g), int(kb.max()) + 1)
            if na_g == 0 and nb_g == 0:
                continue  # nothing arrives, no detector fires
            probs = fock_click_distribution(na_g, nb_g, ta, tb)
            pattern[rows] = rng.choice(16, size=rows.size, p=probs / probs.sum())
    dark = rng.random((n, 4)) < device.y0
    pattern |= dark @ np.array([1, 2, 4, 8])
    minus = np.isin(pattern, PSI_MINUS)
    plus = np.isin(pattern, PSI_PLUS)
    success = int(np.count_nonzero(minus | plus))
    errors = int(np.count_nonzero((minus & err_m) | (plus & err_p)))
    return success, errors


def mc_gain_pair(device: DeviceParams, basis: str, int_a: float, int_b: float,
                 eta_a: float, eta_b: float, n: int, seed: int) -> tuple[McEstimate, McEstimate]:
    """Photon-number Monte-Carlo estimate of ``(Q, T)`` for one intensity pair.

    Each trial draws Poisson photon numbers, a random input pair in ``basis``,
    binomial survival through channel and detector, the set of detectors hit
    from the exact multi-photon distribution, and independent dark counts.
    """
    rng = np.random.default_rng(seed)
    succ = err = 0
    for start in range(0, n, _CHUNK):
        m = min(_CHUNK, n - start)
        na = rng.binomial(rng.poisson(int_a, m), eta_a)
        nb = rng.binomial(rng.poisson(int_b, m), eta_b)
        s, e = _bsm_counts(device, basis, na, nb, rng)
        succ += s
        err += e
    return _proportion(succ, n, seed), _proportion(err, n, seed)


def mc_observables(device: DeviceParams, alice: IntensitySet, bob: IntensitySet,
                   eta_a: float, eta_b: float, n: int, seed: int) -> dict:
    """Estimates for every observable, keyed ``("X", i, j, "Q")`` etc.

    Each intensity pair gets its own child seed derived from ``seed``.
    """
    seeds = np.random.SeedSequence(seed).generate_state(10)
    out = {}
    k = 0
    for i, ia in enumerate(alice.decoys):
        for j, ib in enumerate(bob.decoys):
            q, t = mc_gain_pair(device, "X", ia, ib, eta_a, eta_b, n, int(seeds[k]))
            out[("X", i, j, "Q")], out[("X", i, j, "T")] = q, t
            k += 1
    q, t = mc_gain_pair(device, "Z", alice.s, bob.s, eta_a, eta_b, n, int(seeds[k]))
    out[("Z", 0, 0, "Q")], out[("Z", 0, 0, "T")] = q, t
    return out


def analytic_lookup(device: DeviceParams, alice: IntensitySet, bob: IntensitySet,
                    eta_a: float, eta_b: float) -> dict:
    """The analytic observables keyed like :func:`mc_observables`."""
    obs = observables(device, alice, bob, eta_a, eta_b)
    out = {}
    for i in range(3):
        for j in range(3):
            out[("X", i, j, "Q")] = float(obs.qx[i, j])
            out[("X", i, j, "T")] = float(obs.tx[i, j])
    out[("Z", 0, 0, "Q")] = float(obs.qz)
    out[("Z", 0, 0, "T")] = float(obs.tz)
    return out


def mc_single_photon(device: DeviceParams, eta_a: float, eta_b: float, n: int,
                     seed: int) -> tuple[McEstimate, McEstimate]:
    """Monte-Carlo ``(Y11, e11)``: one photon from each user, X basis."""
    rng = np.random.default_rng(seed)
    succ = err = 0
    for start in range(0, n, _CHUNK):
        m = min(_CHUNK, n - start)
        na = rng.binomial(np.ones(m, dtype=np.int64), eta_a)
        nb = rng.binomial(np.ones(m, dtype=np.int64), eta_b)
        s, e = _bsm_counts(device, "X", na, nb, rng)
        succ += s
        err += e
    return _proportion(succ, n, seed), _proportion(err, succ, seed)
