import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revgeo import (
    DomainError,
    Metric,
    Point,
    UnsupportedModeError,
    brioschi_curvature_fd,
    christoffel,
    curvature_at,
    make_profile,
    parallel_data,
)

TWO_PI = 2.0 * math.pi

ANALYTIC_FAMILIES = [
    "flat",
    "exp-monotone",
    "cosh-waist",
    "gaussian-bump",
    "double-well",
    "tanh-cubed-inflection",
    "plane-tanh",
]


@given(st.floats(min_value=-100.0, max_value=100.0), st.floats(min_value=-5.0, max_value=5.0))
def test_point_theta_reduced(theta, z):
    p = Point(theta, z)
    assert 0.0 <= p.theta < TWO_PI
    # reduction is idempotent and preserves the angle mod 2*pi
    assert abs(math.remainder(p.theta - theta, TWO_PI)) < 1e-9


def test_curvature_flat_zero():
    m = Metric.intrinsic(make_profile("flat"))
    for z in (-3.0, 0.0, 1.7):
        assert curvature_at(m, Point(0.3, z)) == pytest.approx(0.0, abs=1e-14)


def test_curvature_cosh_waist_constant_minus_one():
    m = Metric.intrinsic(make_profile("cosh-waist"))
    for z in (-2.0, -0.5, 0.0, 1.3):
        assert curvature_at(m, Point(0.0, z)) == pytest.approx(-1.0, abs=1e-12)


def test_curvature_gaussian_bump_at_crest():
    m = Metric.intrinsic(make_profile("gaussian-bump"))
    assert curvature_at(m, Point(1.0, 0.0)) == pytest.approx(1.0, abs=1e-12)


def test_christoffel_flat_all_zero():
    m = Metric.intrinsic(make_profile("flat"))
    g = christoffel(m, Point(0.5, 2.0))
    assert all(v == pytest.approx(0.0, abs=1e-14) for v in g.values())


def test_christoffel_cosh_waist():
    m = Metric.intrinsic(make_profile("cosh-waist"))
    g0 = christoffel(m, Point(0.0, 0.0))
    assert all(v == pytest.approx(0.0, abs=1e-14) for v in g0.values())
    g1 = christoffel(m, Point(0.0, 1.0))
    assert g1["z_tt"] == pytest.approx(-math.cosh(1.0) * math.sinh(1.0), rel=1e-12)
    assert g1["t_tz"] == pytest.approx(math.tanh(1.0), rel=1e-12)
    assert g1["t_tt"] == g1["t_zz"] == g1["z_tz"] == g1["z_zz"] == 0.0


def test_embedded_christoffel_and_curvature():
    prof = make_profile("gaussian-bump")
    m = Metric.embedded(prof)
    z = 0.7
    r, rp, rpp = (float(f(z)) for f in (prof.r, prof.dr, prof.d2r))
    g = christoffel(m, Point(0.0, z))
    assert g["t_tz"] == pytest.approx(rp / r, rel=1e-12)
    assert g["z_tt"] == pytest.approx(-r * rp / (1 + rp * rp), rel=1e-12)
    assert g["z_zz"] == pytest.approx(rp * rpp / (1 + rp * rp), rel=1e-12)
    assert curvature_at(m, Point(0.0, z)) == pytest.approx(
        -rpp / (r * (1 + rp * rp) ** 2), rel=1e-12
    )


def test_domain_error_plane_and_tabulated():
    plane = Metric.intrinsic(make_profile("plane-tanh"))
    with pytest.raises(DomainError):
        curvature_at(plane, Point(0.0, 0.001))  # inside the pole exclusion
    zs = np.linspace(-2.0, 2.0, 41)
    tab = make_profile("tabulated", samples=(zs, np.cosh(zs)))
    m = Metric.intrinsic(tab)
    with pytest.raises(DomainError):
        curvature_at(m, Point(0.0, 2.5))


def test_tabulated_tracks_cosh_curvature():
    zs = np.linspace(-3.0, 3.0, 121)
    tab = make_profile("tabulated", samples=(zs, np.cosh(zs)))
    m = Metric.intrinsic(tab)
    # natural spline end conditions pollute the boundary; check the interior
    for z in (-1.0, 0.0, 0.8):
        assert curvature_at(m, Point(0.0, z)) == pytest.approx(-1.0, abs=5e-4)


def test_tabulated_rejects_nonpositive_radius():
    zs = np.linspace(-1.0, 1.0, 21)
    with pytest.raises(ValueError):
        make_profile("tabulated", samples=(zs, zs))


def test_parallel_data_flat_and_bump():
    flat = make_profile("flat")
    d = parallel_data(flat, "intrinsic", z0=0.37, degree=1)
    assert d["length"] == pytest.approx(TWO_PI, rel=1e-15)
    assert d["energy"] == pytest.approx(4 * math.pi ** 2, rel=1e-15)
    bump = make_profile("gaussian-bump")
    d = parallel_data(bump, "intrinsic", z0=0.0, degree=1)
    assert d["length"] == pytest.approx(4 * math.pi, rel=1e-15)
    assert d["energy"] == pytest.approx(16 * math.pi ** 2, rel=1e-15)
    with pytest.raises(UnsupportedModeError):
        parallel_data(flat, "chart", 0.0)


@given(
    st.sampled_from(ANALYTIC_FAMILIES),
    st.floats(min_value=0.1, max_value=3.0),
    st.integers(min_value=1, max_value=5),
)
@settings(max_examples=40, deadline=None)
def test_parallel_energy_scales_as_degree_squared(family, z0, n):
    prof = make_profile(family)
    base = parallel_data(prof, "intrinsic", z0, degree=1)
    dn = parallel_data(prof, "intrinsic", z0, degree=n)
    assert dn["energy"] == pytest.approx(n * n * base["energy"], rel=1e-12)
    assert dn["length"] == pytest.approx(n * base["length"], rel=1e-12)


def _metric_for(family, mode):
    return Metric.intrinsic(make_profile(family)) if mode == "intrinsic" else Metric.embedded(
        make_profile(family)
    )


@pytest.mark.parametrize("family", ANALYTIC_FAMILIES)
@pytest.mark.parametrize("mode", ["intrinsic", "embedded"])
def test_curvature_matches_brioschi_fd(family, mode):
    m = _metric_for(family, mode)
    rng = np.random.default_rng(42)
    lo, hi = (0.2, 3.0) if family == "plane-tanh" else (-2.5, 2.5)
    for z in rng.uniform(lo, hi, size=100):
        ka = float(m.curvature(0.0, z))
        kf = float(brioschi_curvature_fd(m, 0.0, z))
        assert abs(kf - ka) <= 1e-4 * (1.0 + abs(ka))


def test_tannery_curvature_and_validity():
    # h = 0 gives a round metric of constant curvature 1/alpha^2
    m0 = Metric.tannery(alpha=1.5)
    for z in (0.3, 1.0, 2.5):
        assert float(m0.curvature(0.0, z)) == pytest.approx(1 / 1.5 ** 2, rel=1e-12)
    m = Metric.tannery(alpha=1.3, h_odd=(0.2, -0.05))
    rng = np.random.default_rng(7)
    for z in rng.uniform(0.2, math.pi - 0.2, size=50):
        ka = float(m.curvature(0.0, z))
        kf = float(brioschi_curvature_fd(m, 0.0, z))
        assert abs(kf - ka) <= 1e-4 * (1.0 + abs(ka))
    with pytest.raises(ValueError):
        Metric.tannery(alpha=0.5, h_odd=(1.0,))


def test_chart_mode_curvature_fd():
    # chart clone of the intrinsic cosh metric must reproduce K = -1
    g_tt = lambda t, z: np.cosh(z) ** 2
    g_tz = lambda t, z: np.zeros_like(np.asarray(z, dtype=float))
    g_zz = lambda t, z: np.ones_like(np.asarray(z, dtype=float))
    m = Metric.chart(g_tt, g_tz, g_zz)
    assert float(m.curvature(0.3, 0.7)) == pytest.approx(-1.0, abs=1e-5)
    g = christoffel(m, Point(0.0, 1.0))
    assert g["t_tz"] == pytest.approx(math.tanh(1.0), abs=1e-7)
    assert g["z_tt"] == pytest.approx(-math.cosh(1.0) * math.sinh(1.0), abs=1e-6)


@given(
    st.sampled_from(ANALYTIC_FAMILIES),
    st.floats(min_value=-2.5, max_value=2.5),
)
@settings(max_examples=60, deadline=None)
def test_metric_positive_definite(family, z):
    prof = make_profile(family)
    if prof.is_plane:
        z = abs(z) + 0.05
    for m in (Metric.intrinsic(prof), Metric.embedded(prof)):
        gtt, gtz, gzz = m.g_components(0.0, z)
        assert gtt > 0 and gzz > 0 and gtt * gzz - gtz * gtz > 0


@pytest.mark.parametrize("family", ANALYTIC_FAMILIES)
def test_profile_derivatives_match_finite_differences(family):
    prof = make_profile(family)
    rng = np.random.default_rng(3)
    lo, hi = (0.1, 3.0) if prof.is_plane else (-3.0, 3.0)
    h = 1e-5
    for z in rng.uniform(lo + 2 * h, hi, size=50):
        fd1 = (float(prof.r(z + h)) - float(prof.r(z - h))) / (2 * h)
        assert abs(fd1 - float(prof.dr(z))) < 1e-6 * (1 + abs(fd1))
        fd2 = (float(prof.r(z + h)) - 2 * float(prof.r(z)) + float(prof.r(z - h))) / h ** 2
        assert abs(fd2 - float(prof.d2r(z))) < 1e-4 * (1 + abs(fd2))
