import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdiprts.errors import InconsistentObservablesError
from mdiprts.physics import (
    DeviceParams,
    IntensitySet,
    Observables,
    fock_click_distribution,
    gain_pair,
    input_modes,
    observables,
    photon_weight,
    true_single_photon,
    yield_matrix,
)

DEV = DeviceParams(y0=1e-5, eta_d=0.45, e_d=0.02)
ALICE = IntensitySet(s=0.45, p_s=0.5, mu=0.3, nu=0.02)
BOB = IntensitySet(s=0.6, p_s=0.4, mu=0.4, nu=0.05, omega=0.001)


def test_parameter_validation():
    with pytest.raises(ValueError):
        DeviceParams(y0=1.0)
    with pytest.raises(ValueError):
        DeviceParams(eta_d=0.0)
    with pytest.raises(ValueError):
        DeviceParams(e_d=0.5)
    with pytest.raises(ValueError):
        DeviceParams(f_e=0.9)
    with pytest.raises(ValueError):
        IntensitySet(s=0.5, p_s=0.5, mu=0.1, nu=0.2)
    with pytest.raises(ValueError):
        IntensitySet(s=0.5, p_s=1.0, mu=0.3, nu=0.1)


def test_photon_weight_sums_to_one():
    n = np.arange(60)
    assert photon_weight(0.45, n).sum() == pytest.approx(1.0, abs=1e-14)
    assert photon_weight(0.0, 0) == 1.0
    assert photon_weight(0.0, 3) == 0.0


def test_detector_amplitudes_are_unitary_columns():
    for basis in "XZ":
        for _, _, ua, ub in input_modes(DEV, basis):
            assert ua @ ua == pytest.approx(1.0)
            assert ub @ ub == pytest.approx(1.0)


def test_click_distribution_normalized():
    for _, _, ua, ub in input_modes(DEV, "X"):
        for na, nb in [(0, 0), (1, 0), (1, 1), (2, 3), (5, 4)]:
            d = fock_click_distribution(na, nb, tuple(ua), tuple(ub))
            assert d.sum() == pytest.approx(1.0, abs=1e-12)
            assert d[0] == (1.0 if na + nb == 0 else pytest.approx(0.0, abs=1e-15))


@pytest.mark.parametrize("basis", ["X", "Z"])
@pytest.mark.parametrize("eta", [(0.01, 0.01), (0.3, 0.02), (1.0, 0.5)])
def test_phase_and_fock_routes_agree(basis, eta):
    ym = yield_matrix(DEV, *eta, basis=basis, cutoff=20)
    n = np.arange(21)
    for ia, ib in [(0.3, 0.4), (0.02, 0.05), (0.45, 0.6)]:
        pa, pb = photon_weight(ia, n), photon_weight(ib, n)
        q, t = gain_pair(DEV, basis, ia, ib, *eta)
        assert pa @ ym.y @ pb == pytest.approx(float(q), rel=1e-9)
        assert pa @ ym.ey @ pb == pytest.approx(float(t), rel=1e-9, abs=1e-18)


def test_user_exchange_symmetry():
    fwd = observables(DEV, ALICE, BOB, 0.2, 0.03)
    rev = observables(DEV, BOB, ALICE, 0.03, 0.2)
    assert np.allclose(fwd.qx, rev.qx.T, rtol=1e-13, atol=0)
    assert np.allclose(fwd.tx, rev.tx.T, rtol=1e-13, atol=0)
    assert float(fwd.qz) == pytest.approx(float(rev.qz), rel=1e-13)
    assert float(fwd.tz) == pytest.approx(float(rev.tz), rel=1e-13)


def test_single_photon_ideal_devices():
    dev = DeviceParams(y0=0.0, eta_d=0.45, e_d=0.0)
    ea, eb = 0.3, 0.07
    y11, e11 = true_single_photon(dev, ea, eb)
    assert y11 == pytest.approx(ea * eb * dev.eta_d**2 / 2, rel=1e-12)
    assert e11 == pytest.approx(0.0, abs=1e-14)


def test_single_photon_misalignment_raises_errors():
    _, e_lo = true_single_photon(DeviceParams(y0=0.0, e_d=0.01), 0.1, 0.1)
    _, e_hi = true_single_photon(DeviceParams(y0=0.0, e_d=0.04), 0.1, 0.1)
    assert 0 < e_lo < e_hi


def test_dark_counts_only():
    dev = DeviceParams(y0=1e-3)
    q, t = gain_pair(dev, "Z", 0.5, 0.5, 0.0, 0.0)
    assert float(q) == pytest.approx(4 * dev.y0**2 * (1 - dev.y0) ** 2, rel=1e-12)
    assert float(t) == pytest.approx(float(q) / 2, rel=1e-12)


def test_vectorized_matches_scalar():
    ea = np.array([0.01, 0.2, 0.9])
    eb = np.array([0.5, 0.02, 0.9])
    vec = observables(DEV, ALICE, BOB, ea, eb).as_vector()
    for k in range(3):
        assert np.allclose(vec[k], observables(DEV, ALICE, BOB, ea[k], eb[k]).as_vector(), rtol=1e-14, atol=0)


def test_vector_round_trip():
    obs = observables(DEV, ALICE, BOB, np.array([0.1, 0.2]), np.array([0.3, 0.4]))
    back = Observables.from_vector(obs.as_vector())
    assert np.array_equal(back.qx, obs.qx)
    assert np.array_equal(back.tz, obs.tz)


def test_check_rejects_inconsistent():
    obs = observables(DEV, ALICE, BOB, 0.1, 0.1)
    obs.check()
    bad = Observables(obs.qx, obs.qx * 1.1, obs.qz, obs.tz)
    with pytest.raises(InconsistentObservablesError):
        bad.check()
    with pytest.raises(ValueError):
        observables(DEV, ALICE, BOB, 1.5, 0.1)


@settings(max_examples=50, deadline=None)
@given(
    ea=st.floats(0.0, 1.0),
    eb=st.floats(0.0, 1.0),
    y0=st.floats(0.0, 1e-2),
    e_d=st.floats(0.0, 0.2),
)
def test_gains_are_ordered(ea, eb, y0, e_d):
    dev = DeviceParams(y0=y0, e_d=e_d)
    v = observables(dev, ALICE, BOB, ea, eb)
    q = np.concatenate([v.qx.ravel(), [float(v.qz)]])
    t = np.concatenate([v.tx.ravel(), [float(v.tz)]])
    assert np.all(t >= 0)
    assert np.all(t <= q * (1 + 1e-12))
    assert np.all(q <= 1)


@settings(max_examples=40, deadline=None)
@given(e1=st.floats(0.0, 1.0), e2=st.floats(0.0, 1.0))
def test_gain_monotone_in_transmittance(e1, e2):
    lo, hi = sorted((e1, e2))
    q_lo, _ = gain_pair(DEV, "Z", 0.45, 0.45, lo, 0.1)
    q_hi, _ = gain_pair(DEV, "Z", 0.45, 0.45, hi, 0.1)
    assert float(q_lo) <= float(q_hi) * (1 + 1e-12)


def test_x_basis_qber_grows_with_mismatch():
    product = 1e-3
    ratios = np.array([1.0, 2.0, 5.0, 20.0, 100.0])
    ea, eb = np.sqrt(product * ratios), np.sqrt(product / ratios)
    obs = observables(DEV, ALICE, ALICE, ea, eb)
    qber = obs.tx[:, 0, 0] / obs.qx[:, 0, 0]
    assert np.all(np.diff(qber) > 0)
    swapped = observables(DEV, ALICE, ALICE, eb, ea)
    assert np.allclose(swapped.tx[:, 0, 0] / swapped.qx[:, 0, 0], qber, rtol=1e-12)
