"""Decoy-state bounds on the single-photon-pair yield and error rate.

The X-basis gains obey ``Q_ij = sum_nm P_i(n) P_j(m) Y_nm`` with Poisson
weights ``P``.  Truncating at ``n, m <= cutoff`` leaves an unknown tail worth
at most ``tail_ij = 1 - sum_{n,m<=cutoff} P_i(n) P_j(m)``.  The lower bound on
``Y_11`` is the minimum over every yield matrix in ``[0, 1]`` consistent with
all observed gains; the upper bound on ``e_11`` maximizes the error-yield
``(eY)_11`` under the analogous error-gain constraints with
``0 <= (eY)_nm <= Y_nm`` and divides by the yield lower bound.

Both programs are solved with HiGHS from a cold start so that results do not
depend on the order of previous calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import highspy
import numpy as np
import scipy.sparse as sp

from .errors import InconsistentObservablesError
from .physics import IntensitySet, photon_weight

DEFAULT_CUTOFF = 10
#: relative slack on every gain constraint, absorbs floating-point noise
DEFAULT_RTOL = 1e-9
#: solver feasibility tolerance; also added as absolute slack (in scaled units)
_FEAS_TOL = 1e-10

_OPTIONS = {
    "output_flag": False,
    "primal_feasibility_tolerance": _FEAS_TOL,
    "dual_feasibility_tolerance": _FEAS_TOL,
    "presolve": "off",
    "random_seed": 0,
    "threads": 1,
}

# tried in order when the simplex run ends without a verdict (rare, near-degenerate rows)
_RESET = {"presolve": "off", "solver": "simplex"}
_FALLBACKS = ({}, {"presolve": "on"}, {"solver": "ipm"})


@dataclass(frozen=True)
class DecoyBounds:
    y11_lower: float
    e11_upper: float


def _decoy_tuple(x) -> tuple[float, ...]:
    if isinstance(x, IntensitySet):
        return x.decoys
    return tuple(float(v) for v in x)


@lru_cache(maxsize=None)
def _weights(decoys_a: tuple, decoys_b: tuple, cutoff: int):
    n = np.arange(cutoff + 1)
    pa = np.array([photon_weight(mu, n) for mu in decoys_a])
    pb = np.array([photon_weight(mu, n) for mu in decoys_b])
    rows = np.einsum("in,jm->ijnm", pa, pb).reshape(len(decoys_a) * len(decoys_b), -1)
    tails = np.clip(1.0 - rows.sum(axis=1), 0.0, None)
    return rows, tails


class _Program:
    """A reusable HiGHS model whose row and column bounds change per solve."""

    def __init__(self, matrix: sp.csc_matrix, cost: np.ndarray):
        self.n_rows, self.n_cols = matrix.shape
        self.h = highspy.Highs()
        for key, val in _OPTIONS.items():
            self.h.setOptionValue(key, val)
        lp = highspy.HighsLp()
        lp.num_col_ = self.n_cols
        lp.num_row_ = self.n_rows
        lp.col_cost_ = cost
        lp.col_lower_ = np.zeros(self.n_cols)
        lp.col_upper_ = np.ones(self.n_cols)
        lp.row_lower_ = np.zeros(self.n_rows)
        lp.row_upper_ = np.zeros(self.n_rows)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = matrix.indptr
        lp.a_matrix_.index_ = matrix.indices
        lp.a_matrix_.value_ = matrix.data
        self.h.passModel(lp)
        self._rows = np.arange(self.n_rows, dtype=np.int32)
        self._cols = np.arange(self.n_cols, dtype=np.int32)

    def solve(self, row_lower, row_upper, col_upper) -> float | None:
        """Optimal objective, or ``None`` if every strategy finds no solution."""
        h = self.h
        h.changeColsBounds(self.n_cols, self._cols, np.zeros(self.n_cols), col_upper)
        h.changeRowsBounds(self.n_rows, self._rows, row_lower, row_upper)
        for extra in _FALLBACKS:
            for key, val in {**_RESET, **extra}.items():
                h.setOptionValue(key, val)
            h.clearSolver()
            h.run()
            if h.getModelStatus() == highspy.HighsModelStatus.kOptimal:
                return h.getInfo().objective_function_value
        return None


@lru_cache(maxsize=None)
def _programs(decoys_a: tuple, decoys_b: tuple, cutoff: int):
    rows, _ = _weights(decoys_a, decoys_b, cutoff)
    n_var = rows.shape[1]
    target = (cutoff + 1) * 1 + 1  # flat index of (1, 1)

    cost = np.zeros(n_var)
    cost[target] = 1.0
    yield_lp = _Program(sp.csc_matrix(rows), cost)

    # variables [Y, eY]; rows: gain constraints, error-gain constraints, eY - Y <= 0
    zero = sp.csr_matrix(rows.shape)
    eye = sp.identity(n_var, format="csr")
    block = sp.vstack(
        [
            sp.hstack([rows, zero]),
            sp.hstack([zero, rows]),
            sp.hstack([-eye, eye]),
        ]
    ).tocsc()
    cost2 = np.zeros(2 * n_var)
    cost2[n_var + target] = -1.0
    error_lp = _Program(block, cost2)
    return yield_lp, error_lp


def decoy_bounds(qx, tx, alice, bob, cutoff: int = DEFAULT_CUTOFF, rtol: float = DEFAULT_RTOL) -> DecoyBounds:
    """Bound ``Y_11`` from below and ``e_11`` from above.

    Parameters
    ----------
    qx, tx : array_like, shape (ka, kb)
        X-basis gains and error-gains, row ``i`` for Alice's decoy ``i``.
    alice, bob : IntensitySet or sequence of float
        Decoy intensities (``mu, nu, omega`` for an :class:`IntensitySet`).
    cutoff : int
        Largest photon number kept as an explicit variable.
    rtol : float
        Relative slack added to each constraint.

    Raises
    ------
    InconsistentObservablesError
        If ``T > Q`` anywhere or no yield matrix reproduces the observables.
    """
    da, db = _decoy_tuple(alice), _decoy_tuple(bob)
    q = np.asarray(qx, dtype=float).reshape(-1)
    t = np.asarray(tx, dtype=float).reshape(-1)
    if q.size != len(da) * len(db) or t.size != q.size:
        raise ValueError("observable shape does not match the decoy sets")
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
        raise InconsistentObservablesError("observables must be finite")
    if np.any(t < 0) or np.any(t > q * (1 + rtol)) or np.any(q > 1):
        raise InconsistentObservablesError("observables must satisfy 0 <= T <= Q <= 1")

    scale = float(q.max())
    if scale <= 0.0:
        return DecoyBounds(0.0, 0.5)

    rows, tails = _weights(da, db, cutoff)
    yield_lp, error_lp = _programs(da, db, cutoff)
    n_var = rows.shape[1]

    # widening a constraint can only loosen the bounds, so slack stays sound
    q_lo = (q * (1 - rtol) - tails) / scale - _FEAS_TOL
    q_hi = q * (1 + rtol) / scale + _FEAS_TOL
    obj = yield_lp.solve(q_lo, q_hi, np.full(n_var, 1.0 / scale))
    if obj is None:
        raise InconsistentObservablesError("no yield matrix reproduces the X-basis gains")
    y11 = max(obj * scale, 0.0)
    if y11 <= 0.0:
        return DecoyBounds(0.0, 0.5)

    t_lo = (t * (1 - rtol) - tails) / scale - _FEAS_TOL
    t_hi = t * (1 + rtol) / scale + _FEAS_TOL
    n_cpl = n_var
    lower = np.concatenate([q_lo, t_lo, np.full(n_cpl, -np.inf)])
    upper = np.concatenate([q_hi, t_hi, np.zeros(n_cpl)])
    obj = error_lp.solve(lower, upper, np.full(2 * n_var, 1.0 / scale))
    if obj is None:
        raise InconsistentObservablesError("no error-yield matrix reproduces the X-basis error-gains")
    ey11 = max(-obj * scale, 0.0)
    return DecoyBounds(y11_lower=y11, e11_upper=min(ey11 / y11, 0.5))
