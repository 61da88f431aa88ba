"""Radius profiles and 2D chart metrics for surfaces of revolution.

A cylinder or plane of revolution is described in a (theta, z) chart by a
radius profile r(z) with two derivatives.  The induced metrics supported here
are the intrinsic warped product  dz^2 + r(z)^2 dtheta^2,  the embedded form
(1 + r'(z)^2) dz^2 + r(z)^2 dtheta^2  of the surface
(r(z) cos theta, r(z) sin theta, z) in 3-space, a two-parameter family
[alpha + h(cos z)]^2 dz^2 + sin(z)^2 dtheta^2  on the chart z in (0, pi), and
a generic user-supplied chart metric.  Gaussian curvature and Christoffel
symbols are exposed both analytically (per mode) and through a
finite-difference Brioschi evaluation used as an independent cross-check.

All evaluators are pure functions of immutable data and accept scalars or
numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, UnsupportedModeError

TWO_PI = 2.0 * math.pi

PROFILE_FAMILIES = (
    "flat",
    "exp-monotone",
    "cosh-waist",
    "gaussian-bump",
    "double-well",
    "tanh-cubed-inflection",
    "plane-tanh",
    "tabulated",
)

REVOLUTION_MODES = ("intrinsic", "embedded", "tannery")
METRIC_MODES = REVOLUTION_MODES + ("chart",)

_DEFAULT_PARAMS = {
    "flat": (1.0,),
    "exp-monotone": (1.0, 1.0),
    "cosh-waist": (1.0,),
    "gaussian-bump": (1.0, 1.0, 1.0),
    "double-well": (2.0, -1.0, 1.0),
    "tanh-cubed-inflection": (2.0, 1.0),
    "plane-tanh": (1.0,),
}

# Global switch for expensive runtime checks (positive definiteness at every
# metric evaluation).  Tests enable it; production paths leave it off.
_DEBUG_CHECKS = False


def enable_debug_checks(on=True):
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(on)


def wrap_angle(dtheta):
    """Reduce an angle difference to the principal branch [-pi, pi)."""
    return (np.asarray(dtheta) + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class Point:
    """Chart point; theta is stored reduced to [0, 2*pi)."""

    theta: float
    z: float

    def __post_init__(self):
        t = float(self.theta) % TWO_PI
        if t >= TWO_PI:  # tiny negatives round up to exactly 2*pi
            t = 0.0
        object.__setattr__(self, "theta", t)
        object.__setattr__(self, "z", float(self.z))


@dataclass(frozen=True)
class Tangent:
    """Tangent vector (dtheta, dz) at a base point."""

    dtheta: float
    dz: float
    base: Point


@dataclass(frozen=True, eq=False)
class Profile:
    """Radius profile r(z) of a surface of revolution.

    ``domain`` is the closed-interval support of z; cylinders default to all
    of R, planes to [0, inf).  ``r``, ``dr`` and ``d2r`` evaluate the profile
    and its first two derivatives and broadcast over numpy arrays.
    """

    family: str
    params: tuple
    domain: tuple
    spline: object = field(default=None, repr=False)

    @property
    def is_plane(self):
        return self.family == "plane-tanh"

    def contains(self, z):
        lo, hi = self.domain
        return (np.asarray(z) >= lo) & (np.asarray(z) <= hi)

    def r(self, z):
        z = np.asarray(z, dtype=float)
        f, p = self.family, self.params
        if f == "flat":
            return np.full_like(z, p[0])
        if f == "exp-monotone":
            return p[0] * np.exp(p[1] * z)
        if f == "cosh-waist":
            return p[0] * np.cosh(z / p[0])
        if f == "gaussian-bump":
            return p[0] + p[1] * np.exp(-((z / p[2]) ** 2))
        if f == "double-well":
            return p[0] + p[1] * z * z + p[2] * z ** 4
        if f == "tanh-cubed-inflection":
            return p[0] + p[1] * np.tanh(z) ** 3
        if f == "plane-tanh":
            return p[0] * np.tanh(z / p[0])
        return self.spline(z)

    def dr(self, z):
        z = np.asarray(z, dtype=float)
        f, p = self.family, self.params
        if f == "flat":
            return np.zeros_like(z)
        if f == "exp-monotone":
            return p[0] * p[1] * np.exp(p[1] * z)
        if f == "cosh-waist":
            return np.sinh(z / p[0])
        if f == "gaussian-bump":
            return p[1] * np.exp(-((z / p[2]) ** 2)) * (-2.0 * z / p[2] ** 2)
        if f == "double-well":
            return 2.0 * p[1] * z + 4.0 * p[2] * z ** 3
        if f == "tanh-cubed-inflection":
            t = np.tanh(z)
            return p[1] * 3.0 * t * t * (1.0 - t * t)
        if f == "plane-tanh":
            return 1.0 / np.cosh(z / p[0]) ** 2
        return self.spline(z, 1)

    def d2r(self, z):
        z = np.asarray(z, dtype=float)
        f, p = self.family, self.params
        if f == "flat":
            return np.zeros_like(z)
        if f == "exp-monotone":
            return p[0] * p[1] * p[1] * np.exp(p[1] * z)
        if f == "cosh-waist":
            return np.cosh(z / p[0]) / p[0]
        if f == "gaussian-bump":
            w2 = p[2] ** 2
            return p[1] * np.exp(-(z * z) / w2) * (4.0 * z * z / w2 ** 2 - 2.0 / w2)
        if f == "double-well":
            return 2.0 * p[1] + 12.0 * p[2] * z * z
        if f == "tanh-cubed-inflection":
            t = np.tanh(z)
            return p[1] * (6.0 * t - 12.0 * t ** 3) * (1.0 - t * t)
        if f == "plane-tanh":
            s = 1.0 / np.cosh(z / p[0])
            return -2.0 / p[0] * s * s * np.tanh(z / p[0])
        return self.spline(z, 2)

    def scalar_funcs(self):
        """(r, dr, d2r) as plain-float closures for tight integration loops."""
        f, p = self.family, self.params
        if f == "flat":
            c = p[0]
            return (lambda z: c), (lambda z: 0.0), (lambda z: 0.0)
        if f == "exp-monotone":
            a, b = p
            return (
                lambda z: a * math.exp(b * z),
                lambda z: a * b * math.exp(b * z),
                lambda z: a * b * b * math.exp(b * z),
            )
        if f == "cosh-waist":
            a = p[0]
            return (
                lambda z: a * math.cosh(z / a),
                lambda z: math.sinh(z / a),
                lambda z: math.cosh(z / a) / a,
            )
        if f == "gaussian-bump":
            b0, a1, w = p
            w2 = w * w
            return (
                lambda z: b0 + a1 * math.exp(-z * z / w2),
                lambda z: a1 * math.exp(-z * z / w2) * (-2.0 * z / w2),
                lambda z: a1 * math.exp(-z * z / w2) * (4.0 * z * z / (w2 * w2) - 2.0 / w2),
            )
        if f == "double-well":
            c0, c2, c4 = p
            return (
                lambda z: c0 + c2 * z * z + c4 * z ** 4,
                lambda z: 2.0 * c2 * z + 4.0 * c4 * z ** 3,
                lambda z: 2.0 * c2 + 12.0 * c4 * z * z,
            )
        if f == "tanh-cubed-inflection":
            b0, a1 = p
            return (
                lambda z: b0 + a1 * math.tanh(z) ** 3,
                lambda z: a1 * 3.0 * math.tanh(z) ** 2 * (1.0 - math.tanh(z) ** 2),
                lambda z: a1
                * (6.0 * math.tanh(z) - 12.0 * math.tanh(z) ** 3)
                * (1.0 - math.tanh(z) ** 2),
            )
        if f == "plane-tanh":
            a = p[0]
            return (
                lambda z: a * math.tanh(z / a),
                lambda z: 1.0 / math.cosh(z / a) ** 2,
                lambda z: -2.0 / a / math.cosh(z / a) ** 2 * math.tanh(z / a),
            )
        spl = self.spline
        return (
            (lambda z: float(spl(z))),
            (lambda z: float(spl(z, 1))),
            (lambda z: float(spl(z, 2))),
        )


def make_profile(family, params=None, domain=None, samples=None):
    """Build and validate a Profile.

    ``samples=(z, r)`` is required for the tabulated family and interpolated
    by a natural cubic spline (C^2, no extrapolation).  Analytic families take
    their parameter tuple or the documented defaults.
    """
    if family not in PROFILE_FAMILIES:
        raise ValueError(f"unknown profile family {family!r}")
    spline = None
    if family == "tabulated":
        if samples is None:
            raise ValueError("tabulated profile needs samples=(z, r)")
        zs = np.asarray(samples[0], dtype=float)
        rs = np.asarray(samples[1], dtype=float)
        if zs.ndim != 1 or zs.shape != rs.shape or zs.size < 4:
            raise ValueError("tabulated samples must be two equal 1-d arrays, >= 4 points")
        if np.any(np.diff(zs) <= 0):
            raise ValueError("tabulated z samples must be strictly increasing")
        spline = CubicSpline(zs, rs, bc_type="natural", extrapolate=False)
        domain = (float(zs[0]), float(zs[-1]))
        params = ()
    else:
        params = tuple(float(x) for x in (params or _DEFAULT_PARAMS[family]))
        if len(params) != len(_DEFAULT_PARAMS[family]):
            raise ValueError(f"{family} expects {len(_DEFAULT_PARAMS[family])} params")
        if domain is None:
            domain = (0.0, math.inf) if family == "plane-tanh" else (-math.inf, math.inf)
        domain = (float(domain[0]), float(domain[1]))

    prof = Profile(family=family, params=params, domain=domain, spline=spline)

    lo = max(domain[0], -50.0)
    hi = min(domain[1], 50.0)
    zs = np.linspace(lo, hi, 513)
    rv = prof.r(zs)
    if prof.is_plane:
        if abs(float(prof.r(domain[0]))) > 1e-12:
            raise ValueError("plane profile must have r = 0 at the pole")
        if np.any(rv[zs > domain[0] + 1e-12] <= 0):
            raise ValueError("plane profile must be positive away from the pole")
    else:
        if np.any(rv <= 0):
            raise ValueError("profile radius must stay positive on its domain")
    return prof


def _poly_odd(coeffs, x):
    """Odd polynomial sum_k c_k x^(2k+1) and its derivative."""
    x = np.asarray(x, dtype=float)
    val = np.zeros_like(x)
    der = np.zeros_like(x)
    for i, c in enumerate(coeffs):
        n = 2 * i + 1
        val = val + c * x ** n
        der = der + c * n * x ** (n - 1)
    return val, der


@dataclass(frozen=True, eq=False)
class Metric:
    """Chart metric on (theta, z) with curvature and Christoffel data.

    Modes: ``intrinsic`` and ``embedded`` are induced by a Profile,
    ``tannery`` is the two-parameter family on z in (0, pi), ``chart`` wraps
    user callables g_tt(theta, z), g_tz, g_zz.  Revolution modes depend on z
    only; the chart mode is the generic slow path with finite-difference
    curvature and symbols.
    """

    mode: str
    profile: Profile = None
    alpha: float = None
    h_odd: tuple = ()
    g_funcs: tuple = None
    pole_margin: float = 1e-2
    fd_step: float = 1e-5

    # -- constructors ------------------------------------------------------

    @classmethod
    def intrinsic(cls, profile, pole_margin=1e-2):
        return cls(mode="intrinsic", profile=profile, pole_margin=pole_margin)

    @classmethod
    def embedded(cls, profile, pole_margin=1e-2):
        return cls(mode="embedded", profile=profile, pole_margin=pole_margin)

    @classmethod
    def tannery(cls, alpha, h_odd=(), pole_margin=1e-2):
        alpha = float(alpha)
        h_odd = tuple(float(c) for c in h_odd)
        xs = np.linspace(-1.0, 1.0, 2001)
        hv, _ = _poly_odd(h_odd, xs)
        if np.any(np.abs(hv) >= alpha):
            raise ValueError("tannery family needs |h(cos z)| < alpha on (0, pi)")
        return cls(mode="tannery", alpha=alpha, h_odd=h_odd, pole_margin=pole_margin)

    @classmethod
    def chart(cls, g_tt, g_tz, g_zz, fd_step=1e-5):
        return cls(mode="chart", g_funcs=(g_tt, g_tz, g_zz), fd_step=fd_step)

    # -- domain ------------------------------------------------------------

    @property
    def is_revolution(self):
        return self.mode in REVOLUTION_MODES

    def z_interval(self):
        """Usable z range (profile domain shrunk by pole exclusions)."""
        if self.mode == "tannery":
            return (self.pole_margin, math.pi - self.pole_margin)
        if self.mode == "chart":
            return (-math.inf, math.inf)
        lo, hi = self.profile.domain
        if self.profile.is_plane:
            lo = lo + self.pole_margin
        return (lo, hi)

    def check_z(self, z):
        lo, hi = self.z_interval()
        if np.any(np.asarray(z) < lo) or np.any(np.asarray(z) > hi):
            raise DomainError(f"z outside chart domain [{lo}, {hi}]")

    # -- metric components -------------------------------------------------

    def g_components(self, theta, z):
        """(g_tt, g_tz, g_zz) broadcast over the inputs."""
        z = np.asarray(z, dtype=float)
        if self.mode == "intrinsic":
            r = self.profile.r(z)
            gtt, gtz, gzz = r * r, np.zeros_like(z), np.ones_like(z)
        elif self.mode == "embedded":
            r = self.profile.r(z)
            rp = self.profile.dr(z)
            gtt, gtz, gzz = r * r, np.zeros_like(z), 1.0 + rp * rp
        elif self.mode == "tannery":
            s = np.sin(z)
            hv, _ = _poly_odd(self.h_odd, np.cos(z))
            a = self.alpha + hv
            gtt, gtz, gzz = s * s, np.zeros_like(z), a * a
        else:
            gtt = np.asarray(self.g_funcs[0](theta, z), dtype=float)
            gtz = np.asarray(self.g_funcs[1](theta, z), dtype=float)
            gzz = np.asarray(self.g_funcs[2](theta, z), dtype=float)
        if _DEBUG_CHECKS:
            if np.any(gtt <= 0) or np.any(gzz <= 0) or np.any(gtt * gzz - gtz * gtz <= 0):
                raise DomainError("metric lost positive definiteness")
        return gtt, gtz, gzz

    def r_theta(self, z):
        """sqrt(g_tt): the revolution radius seen by the Clairaut integral."""
        if not self.is_revolution:
            raise UnsupportedModeError("r_theta needs a revolution-mode metric")
        if self.mode == "tannery":
            return np.sin(np.asarray(z, dtype=float))
        return self.profile.r(z)

    def inner(self, theta, z, v, w):
        gtt, gtz, gzz = self.g_components(theta, z)
        return gtt * v[0] * w[0] + gtz * (v[0] * w[1] + v[1] * w[0]) + gzz * v[1] * w[1]

    def norm(self, theta, z, v):
        return np.sqrt(self.inner(theta, z, v, v))

    # -- curvature ----------------------------------------------------------

    def curvature(self, theta, z):
        """Gaussian curvature, analytic per mode (FD Brioschi in chart mode)."""
        z = np.asarray(z, dtype=float)
        if self.mode == "intrinsic":
            return -self.profile.d2r(z) / self.profile.r(z)
        if self.mode == "embedded":
            r = self.profile.r(z)
            rp = self.profile.dr(z)
            return -self.profile.d2r(z) / (r * (1.0 + rp * rp) ** 2)
        if self.mode == "tannery":
            c = np.cos(z)
            hv, hd = _poly_odd(self.h_odd, c)
            a = self.alpha + hv
            return (a - c * hd) / a ** 3
        return brioschi_curvature_fd(self, theta, z)

    # -- Christoffel symbols -------------------------------------------------

    def christoffel_components(self, theta, z):
        """Six arrays (t_tt, t_tz, t_zz, z_tt, z_tz, z_zz), lower pair symmetric."""
        z = np.asarray(z, dtype=float)
        zero = np.zeros_like(z)
        if self.mode == "intrinsic":
            r = self.profile.r(z)
            rp = self.profile.dr(z)
            return zero, rp / r, zero, -r * rp, zero, zero
        if self.mode == "embedded":
            r = self.profile.r(z)
            rp = self.profile.dr(z)
            rpp = self.profile.d2r(z)
            den = 1.0 + rp * rp
            return zero, rp / r, zero, -r * rp / den, zero, rp * rpp / den
        if self.mode == "tannery":
            s, c = np.sin(z), np.cos(z)
            hv, hd = _poly_odd(self.h_odd, c)
            a = self.alpha + hv
            return zero, c / s, zero, -s * c / (a * a), zero, -s * hd / a
        return self._christoffel_fd(theta, z)

    def batch_rhs(self):
        """Vectorized geodesic right-hand side Y(...,4) -> dY, fused per mode."""
        if self.mode == "intrinsic":
            prof = self.profile

            def rhs(Y):
                z, u, w = Y[..., 1], Y[..., 2], Y[..., 3]
                r = prof.r(z)
                rp = prof.dr(z)
                out = np.empty_like(Y)
                out[..., 0] = u
                out[..., 1] = w
                out[..., 2] = -2.0 * (rp / r) * u * w
                out[..., 3] = r * rp * u * u
                return out

            return rhs
        if self.mode == "embedded":
            prof = self.profile

            def rhs(Y):
                z, u, w = Y[..., 1], Y[..., 2], Y[..., 3]
                r = prof.r(z)
                rp = prof.dr(z)
                den = 1.0 + rp * rp
                out = np.empty_like(Y)
                out[..., 0] = u
                out[..., 1] = w
                out[..., 2] = -2.0 * (rp / r) * u * w
                out[..., 3] = (r * rp * u * u - rp * prof.d2r(z) * w * w) / den
                return out

            return rhs
        if self.mode == "tannery":
            alpha, coeffs = self.alpha, self.h_odd

            def rhs(Y):
                z, u, w = Y[..., 1], Y[..., 2], Y[..., 3]
                s, c = np.sin(z), np.cos(z)
                hv, hd = _poly_odd(coeffs, c)
                a = alpha + hv
                out = np.empty_like(Y)
                out[..., 0] = u
                out[..., 1] = w
                out[..., 2] = -2.0 * (c / s) * u * w
                out[..., 3] = (s * c / (a * a)) * u * u + (s * hd / a) * w * w
                return out

            return rhs

        def rhs(Y):
            th, z, u, w = Y[..., 0], Y[..., 1], Y[..., 2], Y[..., 3]
            t_tt, t_tz, t_zz, z_tt, z_tz, z_zz = self.christoffel_components(th, z)
            out = np.empty_like(Y)
            out[..., 0] = u
            out[..., 1] = w
            out[..., 2] = -(t_tt * u * u + 2.0 * t_tz * u * w + t_zz * w * w)
            out[..., 3] = -(z_tt * u * u + 2.0 * z_tz * u * w + z_zz * w * w)
            return out

        return rhs

    def scalar_rhs(self):
        """Geodesic right-hand side (th, z, u, w) -> derivatives, plain floats.

        Used by the sequential integrator; the vectorized path goes through
        christoffel_components instead.
        """
        if self.mode == "intrinsic":
            R, dR, _ = self.profile.scalar_funcs()

            def rhs(th, z, u, w):
                r = R(z)
                rp = dR(z)
                return u, w, -2.0 * (rp / r) * u * w, r * rp * u * u

            return rhs
        if self.mode == "embedded":
            R, dR, d2R = self.profile.scalar_funcs()

            def rhs(th, z, u, w):
                r = R(z)
                rp = dR(z)
                den = 1.0 + rp * rp
                return (
                    u,
                    w,
                    -2.0 * (rp / r) * u * w,
                    (r * rp * u * u - rp * d2R(z) * w * w) / den,
                )

            return rhs
        if self.mode == "tannery":
            alpha, coeffs = self.alpha, self.h_odd

            def rhs(th, z, u, w):
                s, c = math.sin(z), math.cos(z)
                hv = 0.0
                hd = 0.0
                for i, coef in enumerate(coeffs):
                    n = 2 * i + 1
                    hv += coef * c ** n
                    hd += coef * n * c ** (n - 1)
                a = alpha + hv
                return (
                    u,
                    w,
                    -2.0 * (c / s) * u * w,
                    (s * c / (a * a)) * u * u + (s * hd / a) * w * w,
                )

            return rhs

        def rhs(th, z, u, w):
            t_tt, t_tz, t_zz, z_tt, z_tz, z_zz = self.christoffel_components(th, z)
            du = -(t_tt * u * u + 2 * t_tz * u * w + t_zz * w * w)
            dw = -(z_tt * u * u + 2 * z_tz * u * w + z_zz * w * w)
            return u, w, float(du), float(dw)

        return rhs

    def _christoffel_fd(self, theta, z):
        h = self.fd_step
        theta = np.asarray(theta, dtype=float)
        z = np.asarray(z, dtype=float)

        def comps(t, zz):
            return np.stack(self.g_components(t, zz), axis=-1)  # (..., 3)

        d_t = (comps(theta + h, z) - comps(theta - h, z)) / (2 * h)
        d_z = (comps(theta, z + h) - comps(theta, z - h)) / (2 * h)
        gtt, gtz, gzz = self.g_components(theta, z)
        det = gtt * gzz - gtz * gtz
        inv = np.stack([gzz / det, -gtz / det, gtt / det], axis=-1)  # g^tt, g^tz, g^zz

        # dg[k, i, j] with indices 0=theta, 1=z
        def dg(k, i, j):
            src = d_t if k == 0 else d_z
            idx = {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 2}[(i, j)]
            return src[..., idx]

        def gamma(a, b, c):
            # 0.5 * g^{ad} (d_b g_dc + d_c g_db - d_d g_bc); a+d indexes the
            # packed symmetric inverse (tt, tz, zz).
            out = 0.0
            for d in range(2):
                out = out + 0.5 * inv[..., a + d] * (dg(b, d, c) + dg(c, d, b) - dg(d, b, c))
            return out

        return (
            gamma(0, 0, 0),
            gamma(0, 0, 1),
            gamma(0, 1, 1),
            gamma(1, 0, 0),
            gamma(1, 0, 1),
            gamma(1, 1, 1),
        )


# -- public operations -------------------------------------------------------


def curvature_at(metric, p):
    """Gaussian curvature at a chart point (domain-checked)."""
    metric.check_z(p.z)
    return float(metric.curvature(p.theta, p.z))


def christoffel(metric, p):
    """Christoffel symbol table at p, keys like 'z_tt' for Gamma^z_{theta theta}."""
    metric.check_z(p.z)
    t_tt, t_tz, t_zz, z_tt, z_tz, z_zz = metric.christoffel_components(p.theta, p.z)
    return {
        "t_tt": float(t_tt),
        "t_tz": float(t_tz),
        "t_zz": float(t_zz),
        "z_tt": float(z_tt),
        "z_tz": float(z_tz),
        "z_zz": float(z_zz),
    }


def parallel_data(profile, mode, z0, degree=1):
    """Length and energy of the constant-speed parallel circle at z0, traversed
    ``degree`` times over the unit period."""
    if mode not in REVOLUTION_MODES:
        raise UnsupportedModeError(f"parallel_data needs a revolution mode, got {mode!r}")
    lo, hi = profile.domain
    if not (lo <= z0 <= hi):
        raise DomainError(f"z0={z0} outside profile domain")
    length = TWO_PI * abs(degree) * float(profile.r(z0))
    return {"length": length, "energy": length * length}


def brioschi_curvature_fd(metric, theta, z, step=1e-3):
    """Gaussian curvature by central finite differences of the metric components.

    Independent of the analytic curvature formulas; used as their oracle.
    """
    h = step
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)

    def E(t, zz):
        return metric.g_components(t, zz)[0]

    def F(t, zz):
        return metric.g_components(t, zz)[1]

    def G(t, zz):
        return metric.g_components(t, zz)[2]

    def du(f):
        return (f(theta + h, z) - f(theta - h, z)) / (2 * h)

    def dv(f):
        return (f(theta, z + h) - f(theta, z - h)) / (2 * h)

    def dvv(f):
        return (f(theta, z + h) - 2.0 * f(theta, z) + f(theta, z - h)) / (h * h)

    def duu(f):
        return (f(theta + h, z) - 2.0 * f(theta, z) + f(theta - h, z)) / (h * h)

    def duv(f):
        return (
            f(theta + h, z + h) - f(theta + h, z - h) - f(theta - h, z + h) + f(theta - h, z - h)
        ) / (4 * h * h)

    Ev, Eu, Evv = dv(E), du(E), dvv(E)
    Fu, Fv, Fuv = du(F), dv(F), duv(F)
    Gu, Gv, Guu = du(G), dv(G), duu(G)
    Ee, Fe, Ge = E(theta, z), F(theta, z), G(theta, z)

    m1 = np.array(
        [
            [-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev],
            [Fv - 0.5 * Gu, Ee, Fe],
            [0.5 * Gv, Fe, Ge],
        ]
    )
    m2 = np.array(
        [
            [np.zeros_like(Ee), 0.5 * Ev, 0.5 * Gu],
            [0.5 * Ev, Ee, Fe],
            [0.5 * Gu, Fe, Ge],
        ]
    )

    def det3(m):
        return (
            m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
        )

    return (det3(m1) - det3(m2)) / (Ee * Ge - Fe * Fe) ** 2
