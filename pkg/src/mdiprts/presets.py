"""Reference device and intensity settings used by the examples and tests."""

from .physics import DeviceParams, IntensitySet

REFERENCE_DEVICE = DeviceParams(y0=1e-5, eta_d=0.45, e_d=0.02, f_e=1.16)
REFERENCE_INTENSITIES = IntensitySet(s=0.45, p_s=0.5, mu=0.3, nu=0.02, omega=0.0)
REFERENCE_SIGMA = 0.9
