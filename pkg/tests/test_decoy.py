import numpy as np
import pytest

from mdiprts.decoy import decoy_bounds
from mdiprts.errors import InconsistentObservablesError
from mdiprts.physics import DeviceParams, IntensitySet, observables, true_single_photon

DEV = DeviceParams(y0=1e-5, eta_d=0.45, e_d=0.02)
INT = IntensitySet(s=0.45, p_s=0.5, mu=0.3, nu=0.02, omega=0.0)


def _bounds(ea, eb, dev=DEV, ints=INT):
    obs = observables(dev, ints, ints, ea, eb)
    return decoy_bounds(obs.qx, obs.tx, ints, ints)


def test_golden_reference_point():
    b = _bounds(0.01, 0.01)
    assert b.y11_lower == pytest.approx(1.0158328032015025e-05, rel=1e-6)
    assert b.e11_upper == pytest.approx(0.029520454715653177, rel=1e-6)


@pytest.mark.parametrize("ea", np.logspace(-3, 0, 5))
@pytest.mark.parametrize("eb", np.logspace(-3, 0, 5))
def test_bounds_bracket_truth(ea, eb):
    b = _bounds(ea, eb)
    y11, e11 = true_single_photon(DEV, ea, eb)
    assert b.y11_lower <= y11 * (1 + 1e-9)
    assert b.e11_upper >= e11 * (1 - 1e-9)


def test_more_decoys_tighten():
    obs = observables(DEV, INT, INT, 0.05, 0.02)
    full = decoy_bounds(obs.qx, obs.tx, INT, INT)
    two = decoy_bounds(obs.qx[:2, :2], obs.tx[:2, :2], INT.decoys[:2], INT.decoys[:2])
    assert full.y11_lower >= two.y11_lower * (1 - 1e-9)
    assert full.e11_upper <= two.e11_upper * (1 + 1e-9)


def test_independent_of_call_history():
    first = _bounds(0.2, 0.003)
    _bounds(0.9, 0.9)
    _bounds(1e-3, 0.5)
    assert _bounds(0.2, 0.003) == first


def test_zero_gains():
    z = np.zeros((3, 3))
    b = decoy_bounds(z, z, INT, INT)
    assert (b.y11_lower, b.e11_upper) == (0.0, 0.5)


def test_rejects_inconsistent_observables():
    obs = observables(DEV, INT, INT, 0.1, 0.1)
    with pytest.raises(InconsistentObservablesError):
        decoy_bounds(obs.qx, obs.qx * 1.01, INT, INT)
    with pytest.raises(InconsistentObservablesError):
        decoy_bounds(obs.qx, -obs.tx, INT, INT)
    with pytest.raises(ValueError):
        decoy_bounds(obs.qx[:2], obs.tx[:2], INT, INT)


def test_unphysical_gains_are_infeasible():
    obs = observables(DEV, INT, INT, 0.1, 0.1)
    qx = obs.qx.copy()
    # a weaker pulse with much larger gain than the strong one has no yield model
    qx[1, 1] = 50 * qx[0, 0]
    with pytest.raises(InconsistentObservablesError):
        decoy_bounds(qx, np.minimum(obs.tx, qx), INT, INT)
