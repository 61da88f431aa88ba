import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revgeo import Metric, Point, make_profile
from revgeo.loops import (
    BrokenLoop,
    DescentParams,
    critical_test,
    descend,
    geometric_distinct,
    polish_to_critical,
)

TWO_PI = 2.0 * math.pi
FOUR_PI_SQ = 4.0 * math.pi ** 2


@pytest.fixture(scope="module")
def flat():
    return Metric.intrinsic(make_profile("flat"))


@pytest.fixture(scope="module")
def cosh():
    return Metric.intrinsic(make_profile("cosh-waist"))


@pytest.fixture(scope="module")
def dwell():
    return Metric.intrinsic(make_profile("double-well"))


@pytest.fixture(scope="module")
def waist_loop(cosh):
    res = descend(BrokenLoop.parallel(cosh, 1.0, 1, 64), DescentParams(tol=1e-8))
    assert res.outcome == "converged"
    return res.loop


def test_flat_parallel_energy_exact(flat):
    lp = BrokenLoop.parallel(flat, 0.0, 1, 32)
    assert lp.energy() == pytest.approx(FOUR_PI_SQ, abs=1e-11)
    assert lp.max_segment_length() == pytest.approx(TWO_PI / 32, rel=1e-10)


def test_constant_loop_zero_energy(cosh):
    lp = BrokenLoop(cosh, np.zeros(8), np.full(8, 0.3), degree=0)
    assert lp.energy() == pytest.approx(0.0, abs=1e-20)
    assert lp.degree == 0


def test_iterate_scales_energy_exactly(flat, cosh):
    for metric, z0 in ((flat, 0.0), (cosh, 0.0)):
        lp = BrokenLoop.parallel(metric, z0, 1, 24)
        e1 = lp.energy()
        for m in (1, 2, 3):
            it = lp.iterate(m)
            assert it.energy() == pytest.approx(m * m * e1, rel=1e-12)
            assert it.degree == m
            assert it.j == 24 * m
    with pytest.raises(ValueError):
        lp.iterate(0)


def test_gradient_zero_on_flat_parallel(flat):
    lp = BrokenLoop.parallel(flat, 1.3, 1, 32)
    assert np.abs(lp.gradient()).max() < 1e-12


def test_gradient_points_uphill_on_cosh_parallel(cosh):
    # energy grows with |z| here, so the gradient z-components are positive,
    # matching finite differences of the energy
    lp = BrokenLoop.parallel(cosh, 0.5, 1, 48)
    g = lp.gradient()
    assert np.all(g[:, 1] > 0)
    gcov = lp.gradient_covector()
    d = 1e-6
    i = 7
    zp = lp.z.copy()
    zp[i] += d
    em = BrokenLoop(cosh, lp.theta, zp, 1)
    zp[i] -= 2 * d
    ep = BrokenLoop(cosh, lp.theta, zp, 1)
    fd = (em.energy() - ep.energy()) / (2 * d)
    assert fd > 0
    assert gcov[i, 1] == pytest.approx(fd, rel=1e-6)


def test_gradient_matches_finite_differences_random_loops(cosh, dwell):
    rng = np.random.default_rng(11)
    for metric in (cosh, dwell):
        for _ in range(3):
            j = 10
            theta = TWO_PI * np.arange(j) / j + rng.uniform(-0.1, 0.1, j)
            z = rng.uniform(-0.4, 0.4, j)
            lp = BrokenLoop(metric, theta, z, 1)
            gcov = lp.gradient_covector()
            d = 1e-6
            worst = 0.0
            for i in range(j):
                for comp in range(2):
                    th = lp.theta.copy()
                    zz = lp.z.copy()
                    (th if comp == 0 else zz)[i] += d
                    ep = BrokenLoop(metric, th, zz, 1).energy()
                    (th if comp == 0 else zz)[i] -= 2 * d
                    em = BrokenLoop(metric, th, zz, 1).energy()
                    fd = (ep - em) / (2 * d)
                    worst = max(worst, abs(fd - gcov[i, comp]))
            assert worst / np.abs(gcov).max() < 1e-4


def test_descend_cosh_to_waist(cosh, waist_loop):
    assert np.abs(waist_loop.z).max() < 1e-5
    assert waist_loop.energy() == pytest.approx(FOUR_PI_SQ, rel=1e-6)
    assert waist_loop.degree == 1


def test_descend_exp_monotone_escapes():
    expm = Metric.intrinsic(make_profile("exp-monotone"))
    res = descend(BrokenLoop.parallel(expm, 0.0, 1, 32), DescentParams(escape_z=8.0))
    assert res.outcome == "escaped"
    assert res.loop.z.mean() < -7.0


def test_descend_flat_parallel_immediate(flat):
    res = descend(BrokenLoop.parallel(flat, 0.7, 1, 32))
    assert res.outcome == "converged"
    assert res.iterations == 0


def test_descend_trace_non_increasing_and_degree_kept(dwell):
    seed = BrokenLoop.parallel(dwell, 1.1, 1, 48)
    res = descend(seed, DescentParams(tol=1e-8, escape_z=8.0))
    assert res.outcome == "converged"
    assert res.loop.degree == 1
    # float resolution of E allows ~1e-12 wiggle at the polish handoff
    tr = res.energy_trace
    assert np.all(np.diff(tr) <= 1e-11 * (1.0 + np.abs(tr[:-1])))


def test_degree_bookkeeping(flat):
    par2 = BrokenLoop.parallel(flat, 0.0, 2, 24)
    assert par2.degree == 2
    pts = [Point(0.0, 0.0), Point(2.0, 0.1), Point(4.0, 0.2), Point(2.0, 0.3)]
    back_forth = BrokenLoop.from_points(flat, pts)
    assert back_forth.degree == 0
    const = BrokenLoop(flat, np.zeros(5), np.zeros(5), 0)
    assert const.degree == 0


def test_from_points_infers_winding(flat):
    j = 12
    pts = [Point(TWO_PI * i / j, 0.1 * math.sin(TWO_PI * i / j)) for i in range(j)]
    lp = BrokenLoop.from_points(flat, pts)
    assert lp.degree == 1


def test_resample_flat_energy_exact(flat):
    lp = BrokenLoop.parallel(flat, 0.0, 1, 32)
    fine = lp.resample(64)
    assert fine.j == 64
    assert fine.energy() == pytest.approx(lp.energy(), abs=1e-11)
    with pytest.raises(ValueError):
        lp.resample(2)


def test_resample_keeps_converged_loop_critical(waist_loop):
    fine = waist_loop.resample(96)
    fine, gn, ok = polish_to_critical(fine, tol=1e-8, max_steps=30)
    assert ok
    assert critical_test(fine, 1e-8)


def test_critical_test(waist_loop, cosh):
    assert critical_test(waist_loop, 1e-8)
    assert not critical_test(BrokenLoop.parallel(cosh, 0.5, 1, 32), 1e-8)


def test_geometric_distinct_rotation_and_iterate(cosh, waist_loop):
    rot = waist_loop.rotate_nodes(waist_loop.j // 2)
    assert not geometric_distinct(waist_loop, rot, tol=1e-3)
    assert not geometric_distinct(waist_loop, waist_loop.iterate(2), tol=1e-3)


def test_geometric_distinct_double_well_parallels(dwell):
    zc = 1.0 / math.sqrt(2.0)
    a = BrokenLoop.parallel(dwell, -zc, 1, 32)
    b = BrokenLoop.parallel(dwell, zc, 1, 32)
    assert geometric_distinct(a, b, tol=1e-3)
    # chart Hausdorff distance is the z separation sqrt(2)
    from revgeo.loops import _hausdorff

    d = _hausdorff(a.sample_image(), b.sample_image())
    assert d == pytest.approx(math.sqrt(2.0), abs=1e-6)


def test_serialization_roundtrip(cosh):
    lp = BrokenLoop.parallel(cosh, 0.8, 2, 16)
    text = lp.to_text()
    back = BrokenLoop.from_text(cosh, text)
    assert back.degree == 2
    assert np.array_equal(back.theta, lp.theta)
    assert np.array_equal(back.z, lp.z)
    assert "# degree=2 j=16" in text.splitlines()[0]


@given(st.integers(min_value=0, max_value=31))
@settings(max_examples=12, deadline=None)
def test_cyclic_rotation_invariance(shift):
    metric = Metric.intrinsic(make_profile("double-well"))
    j = 32
    rng = np.random.default_rng(5)
    theta = TWO_PI * np.arange(j) / j + 0.05 * np.sin(3 * TWO_PI * np.arange(j) / j)
    z = 0.3 * np.cos(TWO_PI * np.arange(j) / j)
    lp = BrokenLoop(metric, theta, z, 1)
    rot = lp.rotate_nodes(shift)
    assert rot.energy() == pytest.approx(lp.energy(), rel=1e-12)
    assert rot.grad_norm() == pytest.approx(lp.grad_norm(), rel=1e-9, abs=1e-12)


def test_reversal_energy_invariant(dwell):
    j = 24
    theta = TWO_PI * np.arange(j) / j
    z = 0.2 * np.sin(2 * TWO_PI * np.arange(j) / j) + 0.4
    lp = BrokenLoop(dwell, theta, z, 1)
    rev = lp.reverse()
    assert rev.energy() == pytest.approx(lp.energy(), rel=1e-12)
    assert rev.degree == -1


def test_parallels_critical_iff_profile_slope_vanishes():
    tanh3 = Metric.intrinsic(make_profile("tanh-cubed-inflection"))
    assert BrokenLoop.parallel(tanh3, 0.0, 1, 32).grad_norm() < 1e-10
    assert BrokenLoop.parallel(tanh3, 0.5, 1, 32).grad_norm() > 1e-3
    dwell = Metric.intrinsic(make_profile("double-well"))
    for zc in (0.0, 1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0)):
        assert BrokenLoop.parallel(dwell, zc, 1, 32).grad_norm() < 1e-9
    assert BrokenLoop.parallel(dwell, 0.4, 1, 32).grad_norm() > 1e-3


def test_plane_pole_exclusion_rejected():
    plane = Metric.intrinsic(make_profile("plane-tanh"))
    from revgeo import DomainError

    with pytest.raises(DomainError):
        BrokenLoop.parallel(plane, 0.005, 1, 16)
    lp = BrokenLoop.parallel(plane, 1.0, 1, 16)
    assert lp.energy() > 0
