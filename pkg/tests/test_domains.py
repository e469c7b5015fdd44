import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdiprts.domains import (
    BoundaryDomain,
    FullDomain,
    JointDomain,
    SquareDomain,
    integrate,
    region_expectation,
    region_probability,
    selection_statistics,
)
from mdiprts.errors import EmptySelectionError
from mdiprts.turbulence import ChannelParams, JointPdtc, conditional_mean, selection_probability
from mdiprts.validation import mc_expectation, mc_region_probability

JOINT = JointPdtc(ChannelParams(0.1, 0.9), ChannelParams(0.05, 0.6))


def test_full_domain_probability_is_one():
    assert region_probability(JOINT, FullDomain()) == pytest.approx(1.0, abs=1e-6)


def test_square_domain_factorizes():
    dom = SquareDomain(0.08, 0.03)
    expected = selection_probability(JOINT.alice, 0.08) * selection_probability(JOINT.bob, 0.03)
    assert region_probability(JOINT, dom) == pytest.approx(expected, rel=1e-5)
    means = region_expectation(JOINT, dom, lambda a, b: np.column_stack([a, b]))
    assert means[0] == pytest.approx(conditional_mean(JOINT.alice, 0.08), rel=1e-5)
    assert means[1] == pytest.approx(conditional_mean(JOINT.bob, 0.03), rel=1e-5)


def test_joint_domain_matches_sampling():
    dom = JointDomain(0.03, 0.02, 0.5, 3.0)
    p = region_probability(JOINT, dom)
    est = mc_region_probability(JOINT, dom, 10**6, seed=5)
    assert est.agrees(p)
    f = lambda a, b: a * b  # noqa: E731
    _, total = integrate(JOINT, dom, f)
    est = mc_expectation(JOINT, lambda a, b: f(a, b) * dom.contains(a, b), 10**6, seed=6)
    assert est.agrees(float(total))


def test_joint_domain_rejects_mismatch():
    dom = JointDomain(0.0, 0.0, 0.184, 1 / 0.184)
    assert not dom.contains(0.5, 0.05)
    assert dom.contains(0.5, 0.1)
    with pytest.raises(ValueError):
        JointDomain(0.1, 0.1, 2.0, 1.0)


def test_boundary_domain_follows_rate_sign(coarse_map):
    dom = BoundaryDomain(coarse_map)
    grid = coarse_map.grid_a
    i, j = 40, 45
    assert bool(dom.contains(grid[i], grid[j])) == (coarse_map.raw[i, j] >= 0)
    assert dom.contains(0.1, 0.1)
    assert not dom.contains(2e-4, 2e-4)


def test_boundary_probability_matches_sampling(coarse_map):
    joint = JointPdtc(ChannelParams(0.01, 0.9), ChannelParams(0.01, 0.9))
    dom = BoundaryDomain(coarse_map)
    p = region_probability(joint, dom)
    assert 0.05 < p < 0.99
    est = mc_region_probability(joint, dom, 10**6, seed=8)
    assert est.agrees(p)


def test_empty_selection():
    static = JointPdtc(ChannelParams(0.01, 0.0), ChannelParams(0.01, 0.0))
    assert region_probability(static, SquareDomain(0.02, 0.0)) == 0.0
    with pytest.raises(EmptySelectionError):
        selection_statistics(static, SquareDomain(0.02, 0.0), lambda a, b: a)
    tiny = JointPdtc(ChannelParams(1e-6, 0.1), ChannelParams(1e-6, 0.1))
    with pytest.raises(EmptySelectionError):
        region_expectation(tiny, SquareDomain(0.9, 0.9), lambda a, b: a)


def test_static_channels_evaluate_pointwise():
    static = JointPdtc(ChannelParams(0.2, 0.0), ChannelParams(0.3, 0.0))
    p, val = integrate(static, FullDomain(), lambda a, b: a + b)
    assert p == 1.0
    assert val == pytest.approx(0.5)


@settings(max_examples=25, deadline=None)
@given(t1=st.floats(0.0, 0.5), t2=st.floats(0.0, 0.5), r=st.floats(1.0, 20.0))
def test_nested_domains_have_ordered_probability(t1, t2, r):
    lo, hi = sorted((t1, t2))
    outer = JointDomain(lo, lo, 1 / (2 * r), 2 * r)
    inner = JointDomain(hi, hi, 1 / r, r)
    assert region_probability(JOINT, inner) <= region_probability(JOINT, outer) * (1 + 1e-5) + 1e-12
