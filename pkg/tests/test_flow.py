import math

import numpy as np
import pytest
from scipy.optimize import brentq, minimize

from revgeo import Metric, Point, Tangent, UnsupportedModeError, make_profile
from revgeo.flow import (
    clairaut_momentum,
    connect,
    find_trapping_crest,
    integrate,
    shoot_closed,
)

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="module")
def flat():
    return Metric.intrinsic(make_profile("flat"))


@pytest.fixture(scope="module")
def cosh():
    return Metric.intrinsic(make_profile("cosh-waist"))


@pytest.fixture(scope="module")
def bump():
    return Metric.intrinsic(make_profile("gaussian-bump"))


def test_integrate_flat_straight_line(flat):
    p = Point(0.0, 0.0)
    traj = integrate(flat, p, Tangent(1.0, 1.0, p), T=1.0, h=1e-3)
    assert traj.status == "completed"
    assert traj.theta[-1] == pytest.approx(1.0, abs=1e-12)
    assert traj.z[-1] == pytest.approx(1.0, abs=1e-12)


def test_integrate_waist_circle_stays_put(cosh):
    p = Point(0.0, 0.0)
    traj = integrate(cosh, p, Tangent(1.0, 0.0, p), T=1.0, h=1e-3)
    assert np.abs(traj.z).max() < 1e-10
    assert traj.theta[-1] == pytest.approx(1.0, abs=1e-10)


def test_turning_points_match_radius_root(bump):
    # oracle: at the turning points the revolution radius equals
    # momentum / speed, so root-find the radius directly
    p = Point(0.0, 0.5)
    v = Tangent(1.8 / float(bump.g_components(0.0, 0.5)[0]), 0.3, p)
    speed = float(bump.norm(p.theta, p.z, (v.dtheta, v.dz)))
    a = clairaut_momentum(bump, p, v)
    r_turn = a / speed
    traj = integrate(bump, p, v, T=20.0, h=1e-3)
    assert len(traj.events) >= 2
    prof = make_profile("gaussian-bump")
    for ev in traj.events[:2]:
        z_oracle = brentq(
            lambda z: float(prof.r(z)) - r_turn,
            0.0 if ev.z > 0 else -4.0,
            4.0 if ev.z > 0 else 0.0,
            xtol=1e-12,
        )
        assert abs(float(prof.r(ev.z)) - r_turn) < 1e-6
        assert abs(ev.z - z_oracle) < 1e-5


def test_conservation_drift_small(bump):
    p = Point(0.0, 0.2)
    gtt = float(bump.g_components(0.0, 0.2)[0])
    v = Tangent(1.4 / gtt, math.sqrt(1.0 - 1.4 ** 2 / gtt), p)
    speed0 = float(bump.norm(p.theta, p.z, (v.dtheta, v.dz)))
    T = 100.0 / speed0
    traj = integrate(bump, p, v, T=T, h=1e-3, collect_events=False)
    assert traj.status == "completed"
    gtt_t = np.asarray(bump.g_components(traj.theta, traj.z)[0])
    mom = gtt_t * traj.dtheta
    speed = np.sqrt(gtt_t * traj.dtheta ** 2 + traj.dz ** 2)
    assert np.abs(mom / mom[0] - 1.0).max() < 1e-8
    assert np.abs(speed / speed[0] - 1.0).max() < 1e-8


def test_clairaut_momentum_values(flat, bump):
    p = Point(0.3, 1.7)
    assert clairaut_momentum(flat, p, Tangent(1.0, 0.0, p)) == pytest.approx(1.0, abs=1e-15)
    r2 = float(bump.g_components(0.0, 0.9)[0])
    q = Point(0.0, 0.9)
    assert clairaut_momentum(bump, q, Tangent(2.0, 5.0, q)) == pytest.approx(2.0 * r2, rel=1e-14)
    chart = Metric.chart(
        lambda t, z: 1.0 + 0.1 * np.sin(np.asarray(t)) + 0.0 * np.asarray(z),
        lambda t, z: 0.0 * np.asarray(z),
        lambda t, z: 1.0 + 0.0 * np.asarray(z),
    )
    with pytest.raises(UnsupportedModeError):
        clairaut_momentum(chart, p, Tangent(1.0, 0.0, p))


def test_connect_flat_straight(flat):
    seg = connect(flat, Point(0.0, 0.0), Point(0.1, 0.2))
    assert seg.length == pytest.approx(math.hypot(0.1, 0.2), rel=1e-12)
    assert seg.end.theta == pytest.approx(0.1, abs=1e-11)
    assert seg.end.z == pytest.approx(0.2, abs=1e-11)


def test_connect_identical_points_zero_segment(cosh):
    seg = connect(cosh, Point(1.0, 0.4), Point(1.0, 0.4))
    assert seg.length == pytest.approx(0.0, abs=1e-13)


def test_connect_dips_toward_waist_and_beats_parallel_arc(cosh):
    p, q = Point(0.0, 0.3), Point(0.2, 0.3)
    seg = connect(cosh, p, q, steps=32)
    mid = seg.z[len(seg.z) // 2]
    assert mid < 0.3
    arc = math.cosh(0.3) * 0.2
    assert seg.length < arc

    # independent oracle: direct minimization of the polyline length over
    # interior z heights at fixed theta fractions
    n = 12
    thetas = np.linspace(0.0, 0.2, n + 2)

    def poly_length(zs):
        z_all = np.concatenate([[0.3], zs, [0.3]])
        r_mid = np.cosh(0.5 * (z_all[:-1] + z_all[1:]))
        dth = np.diff(thetas)
        dz = np.diff(z_all)
        return float(np.sum(np.sqrt(dz ** 2 + r_mid ** 2 * dth ** 2)))

    best = minimize(poly_length, np.full(n, 0.3), method="BFGS", options={"gtol": 1e-12})
    assert seg.length == pytest.approx(best.fun, abs=2e-4)


def test_connect_reversal_symmetric_length(cosh):
    p, q = Point(0.1, -0.2), Point(0.35, 0.15)
    fwd = connect(cosh, p, q)
    bwd = connect(cosh, q, p)
    assert fwd.length == pytest.approx(bwd.length, abs=1e-10)


def test_connect_rejects_distant_endpoints(flat):
    with pytest.raises(ValueError):
        connect(flat, Point(0.0, 0.0), Point(0.0, 3.0), eps_cap=0.5)


def test_integrate_escape_reported():
    expm = Metric.intrinsic(make_profile("exp-monotone"))
    p = Point(0.0, 0.0)
    traj = integrate(expm, p, Tangent(0.0, -1.0, p), T=100.0, h=1e-2, escape_z=5.0)
    assert traj.status == "escaped"
    assert traj.z[-1] <= -5.0
    assert len(traj.t) < 100 / 1e-2 + 1


def test_trapping_crest_detection(bump, flat):
    assert find_trapping_crest(bump) == pytest.approx(0.0, abs=1e-9)
    assert find_trapping_crest(flat) is None
    expm = Metric.intrinsic(make_profile("exp-monotone"))
    assert find_trapping_crest(expm) is None


def test_shoot_closed_gaussian_bump():
    rec = shoot_closed(make_profile("gaussian-bump"), "intrinsic", 2, 1, (1.01, 1.99))
    assert rec is not None
    assert rec.degree == 1
    assert rec.extras["closure_defect"] < 1e-6
    lp = rec.loop
    assert lp.z.min() < 0.0 < lp.z.max()  # image crosses the z=0 parallel
    assert lp.grad_norm() < 1e-6  # critical after discretization
    assert rec.energy == pytest.approx(rec.length ** 2, rel=1e-12)
    # frozen regression: closing momentum and energy of the oblique geodesic
    assert rec.extras["momentum"] == pytest.approx(1.17355993, abs=1e-6)
    assert rec.energy == pytest.approx(114.602444, abs=1e-3)


def test_shoot_closed_no_trapping_cases():
    assert shoot_closed(make_profile("exp-monotone"), "intrinsic", 2, 1, (0.5, 1.5)) is None
    assert shoot_closed(make_profile("flat"), "intrinsic", 2, 1, (0.5, 0.9)) is None


def test_shoot_closed_argument_checks():
    prof = make_profile("gaussian-bump")
    with pytest.raises(ValueError):
        shoot_closed(prof, "intrinsic", 2, 4, (1.01, 1.99))
    with pytest.raises(ValueError):
        shoot_closed(prof, "intrinsic", 0, 1, (1.01, 1.99))
    # an odd number of z-extrema cannot close up
    assert shoot_closed(prof, "intrinsic", 3, 1, (1.01, 1.99)) is None


def test_integrator_fourth_order_convergence(bump):
    p = Point(0.0, 0.2)
    gtt = float(bump.g_components(0.0, 0.2)[0])
    v = Tangent(1.4 / gtt, math.sqrt(1.0 - 1.4 ** 2 / gtt), p)
    T = 50.0
    drifts = []
    # at h = 1e-3 the drift is already at roundoff; the order is measured
    # where truncation still dominates
    for h in (2e-2, 1e-2):
        traj = integrate(bump, p, v, T=T, h=h, collect_events=False)
        gtt_t = np.asarray(bump.g_components(traj.theta, traj.z)[0])
        speed = np.sqrt(gtt_t * traj.dtheta ** 2 + traj.dz ** 2)
        mom = gtt_t * traj.dtheta
        drifts.append(
            (
                np.abs(speed / speed[0] - 1.0).max(),
                np.abs(mom / mom[0] - 1.0).max(),
            )
        )
    assert drifts[0][0] / drifts[1][0] >= 12.0
    assert drifts[0][1] / drifts[1][1] >= 12.0
