"""Geodesic integration, short two-point boundary solves, and Clairaut shooting.

The integrator is a fixed-step classical 4th-order scheme (no adaptivity, for
determinism and clean convergence-order tests).  Turning points dz/dt = 0 are
located by sign change plus bisection of a single sub-step.  ``connect``
solves the short-segment boundary problem that underpins the broken-loop
model, and ``shoot_closed`` root-finds the Clairaut momentum whose turning
advance closes the geodesic up on a revolution surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConnectionFailure, DomainError, UnsupportedModeError
from .surface import TWO_PI, Metric, Point, Tangent, wrap_angle

_EVENT_BISECTIONS = 60


@dataclass
class TurningEvent:
    """A dz/dt = 0 crossing; direction +1 for a z-maximum, -1 for a minimum."""

    t: float
    theta: float
    z: float
    direction: int


@dataclass
class Trajectory:
    """Sampled geodesic with unwrapped theta-lift and turning events."""

    t: np.ndarray
    theta: np.ndarray
    z: np.ndarray
    dtheta: np.ndarray
    dz: np.ndarray
    events: list = field(default_factory=list)
    status: str = "completed"  # completed | escaped | failed
    note: str = ""

    def endpoint(self):
        return Point(self.theta[-1], self.z[-1])

    def export_text(self, path):
        with open(path, "w") as fh:
            fh.write("# t theta_lift z\n")
            for t, th, z in zip(self.t, self.theta, self.z):
                fh.write(f"{float(t)!r} {float(th)!r} {float(z)!r}\n")


@dataclass
class GeodesicSegment:
    """Short geodesic from start to end over unit parameter time."""

    start: Point
    end: Point
    v_start: Tangent
    v_end: Tangent
    duration: float
    length: float
    t: np.ndarray
    theta: np.ndarray
    z: np.ndarray
    dtheta: np.ndarray
    dz: np.ndarray


def _rk4_scalar(rhs, th, z, u, w, h):
    a1, b1, c1, d1 = rhs(th, z, u, w)
    a2, b2, c2, d2 = rhs(th + 0.5 * h * a1, z + 0.5 * h * b1, u + 0.5 * h * c1, w + 0.5 * h * d1)
    a3, b3, c3, d3 = rhs(th + 0.5 * h * a2, z + 0.5 * h * b2, u + 0.5 * h * c2, w + 0.5 * h * d2)
    a4, b4, c4, d4 = rhs(th + h * a3, z + h * b3, u + h * c3, w + h * d3)
    return (
        th + h * (a1 + 2 * a2 + 2 * a3 + a4) / 6.0,
        z + h * (b1 + 2 * b2 + 2 * b3 + b4) / 6.0,
        u + h * (c1 + 2 * c2 + 2 * c3 + c4) / 6.0,
        w + h * (d1 + 2 * d2 + 2 * d3 + d4) / 6.0,
    )


def _refine_event(rhs, state, w_prev, h):
    """Bisect the sub-step length at which dz/dt crosses zero."""
    lo, hi = 0.0, h
    th = z = u = w = None
    for _ in range(_EVENT_BISECTIONS):
        mid = 0.5 * (lo + hi)
        th, z, u, w = _rk4_scalar(rhs, *state, mid)
        if w == 0.0:
            lo = hi = mid
            break
        if (w > 0) == (w_prev > 0):
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    th, z, u, w = _rk4_scalar(rhs, *state, s)
    return s, th, z


def integrate(metric, p, v, T, h, escape_z=50.0, collect_events=True, _halved=False):
    """Integrate the geodesic starting at p with velocity v for time T.

    Returns a Trajectory; if the path leaves the chart domain or |z| exceeds
    ``escape_z`` the trajectory is truncated with status "escaped".  A
    non-finite state triggers one automatic retry at half the step before the
    run is reported as "failed".
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    metric.check_z(p.z)
    rhs = metric.scalar_rhs()
    z_lo, z_hi = metric.z_interval()
    z_lo = max(z_lo, -escape_z)
    z_hi = min(z_hi, escape_z)

    n = max(1, int(math.ceil(T / h)))
    ts = [0.0]
    ths = [p.theta]
    zs = [p.z]
    us = [v.dtheta]
    ws = [v.dz]
    events = []
    status = "completed"
    note = ""

    t = 0.0
    state = (p.theta, p.z, v.dtheta, v.dz)
    for i in range(n):
        step = min(h, T - t)
        new = _rk4_scalar(rhs, *state, step)
        if not all(math.isfinite(x) for x in new):
            if not _halved:
                return integrate(metric, p, v, T, h / 2.0, escape_z, collect_events, True)
            status = "failed"
            note = "non-finite state after step-halving retry"
            break
        if collect_events and ws[-1] * new[3] < 0.0:
            s, th_e, z_e = _refine_event(rhs, state, ws[-1], step)
            events.append(
                TurningEvent(t=t + s, theta=th_e, z=z_e, direction=1 if ws[-1] > 0 else -1)
            )
        t += step
        state = new
        ts.append(t)
        ths.append(new[0])
        zs.append(new[1])
        us.append(new[2])
        ws.append(new[3])
        if not (z_lo <= new[1] <= z_hi):
            status = "escaped"
            note = f"z left [{z_lo:.6g}, {z_hi:.6g}] at t={t:.6g}"
            break

    return Trajectory(
        t=np.asarray(ts),
        theta=np.asarray(ths),
        z=np.asarray(zs),
        dtheta=np.asarray(us),
        dz=np.asarray(ws),
        events=events,
        status=status,
        note=note,
    )


def clairaut_momentum(metric, p, v):
    """Conserved angular momentum g_tt(z) * dtheta on a revolution surface."""
    if not metric.is_revolution:
        raise UnsupportedModeError("Clairaut momentum needs a revolution-mode metric")
    gtt, _, _ = metric.g_components(p.theta, p.z)
    return float(gtt) * v.dtheta


# -- batched segment machinery ------------------------------------------------


def _integrate_batch(rhs, theta0, z0, v, steps):
    """RK4 with ``steps`` fixed steps over unit time; returns (n, steps+1, 4)."""
    n = z0.shape[0]
    out = np.empty((n, steps + 1, 4))
    Y = np.stack([theta0, z0, v[:, 0], v[:, 1]], axis=-1)
    out[:, 0] = Y
    h = 1.0 / steps
    # wild trial velocities may overflow; the NaNs are rejected by the caller
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(steps):
            k1 = rhs(Y)
            k2 = rhs(Y + 0.5 * h * k1)
            k3 = rhs(Y + 0.5 * h * k2)
            k4 = rhs(Y + h * k3)
            Y = Y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            out[:, k + 1] = Y
    return out


def connect_batch(
    metric,
    theta0,
    z0,
    dtheta,
    z1,
    v_guess=None,
    jac_guess=None,
    steps=8,
    tol=1e-12,
    max_iter=50,
):
    """Shoot all segments (theta0_i, z0_i) -> (theta0_i + dtheta_i, z1_i) at once.

    ``dtheta`` is the lifted angular increment of each segment, so no wrapping
    ambiguity enters.  Damped quasi-Newton on the initial velocities: the 2x2
    endpoint Jacobians are finite-differenced once and reused (``jac_guess``
    carries them between calls on slowly moving loops).  Returns
    (v0, v1, lengths, path, jac); raises ConnectionFailure when any segment
    fails to converge.
    """
    theta0 = np.asarray(theta0, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    dtheta = np.asarray(dtheta, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    n = z0.shape[0]
    target = np.stack([dtheta, z1], axis=-1)
    rhs = metric.batch_rhs()

    v = np.stack([dtheta, z1 - z0], axis=-1) if v_guess is None else np.array(v_guess, dtype=float)

    def residual(vv):
        path = _integrate_batch(rhs, theta0, z0, vv, steps)
        res = np.stack([path[:, -1, 0] - theta0, path[:, -1, 1]], axis=-1) - target
        resn = np.hypot(res[:, 0], res[:, 1])
        resn = np.where(np.isfinite(resn), resn, np.inf)
        return res, resn, path

    def fd_jacobian(vv, res):
        cols = []
        for comp in range(2):
            eps = 1e-7 * (1.0 + np.abs(vv[:, comp]))
            vp = vv.copy()
            vp[:, comp] += eps
            r2, _, _ = residual(vp)
            cols.append((r2 - res) / eps[:, None])
        return np.stack([cols[0], cols[1]], axis=-1)  # (n, 2, 2): J[i,row,col]

    def solve2(J, res):
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        det = np.where(np.abs(det) < 1e-300, 1e-300, det)
        dt = (J[:, 1, 1] * res[:, 0] - J[:, 0, 1] * res[:, 1]) / det
        dz = (-J[:, 1, 0] * res[:, 0] + J[:, 0, 0] * res[:, 1]) / det
        return np.stack([dt, dz], axis=-1)

    res, resn, path = residual(v)
    if not np.all(np.isfinite(resn)):
        raise ConnectionFailure("segment shooting left the representable range")
    J = None if jac_guess is None else jac_guess
    refreshes = 0
    for it in range(max_iter):
        if np.all(resn < tol):
            break
        if J is None:
            J = fd_jacobian(v, res)
        delta = solve2(J, res)
        delta = np.where(np.isfinite(delta), delta, 0.0)
        active = resn >= tol
        scale = np.ones(n)
        accepted = False
        for _ in range(12):
            v_try = v - (scale * active)[:, None] * delta
            res2, resn2, path2 = residual(v_try)
            worse = active & (resn2 > resn)
            if not np.any(worse):
                v, res, resn, path = v_try, res2, resn2, path2
                accepted = True
                break
            scale[worse] *= 0.5
        if not accepted or (it >= 6 and it % 4 == 0):
            if refreshes >= 4 and not accepted:
                break
            J = fd_jacobian(v, res)
            refreshes += 1
    if not np.all(resn < tol):
        worst = int(np.argmax(resn))
        raise ConnectionFailure(
            f"segment {worst} did not converge: residual {resn[worst]:.3e} "
            f"from ({theta0[worst]:.4f}, {z0[worst]:.4f})"
        )
    v1 = path[:, -1, 2:4]
    speed = metric.norm(theta0, z0, (v[:, 0], v[:, 1]))
    return v, v1, np.asarray(speed, dtype=float), path, J


def connect(metric, p, q, guess=None, eps_cap=None, steps=16, tol=1e-12):
    """Short geodesic segment from p to q over unit parameter time.

    The angular increment is taken on the principal branch, so p and q must be
    chart-close (enforced against ``eps_cap`` when given).  Newton shooting is
    damped: the update is halved whenever the endpoint residual grows.
    """
    metric.check_z(p.z)
    metric.check_z(q.z)
    dth = float(wrap_angle(q.theta - p.theta))
    if eps_cap is not None:
        chord = math.hypot(dth, q.z - p.z)
        if chord > eps_cap:
            raise ValueError(f"endpoints {chord:.4f} apart exceed the segment cap {eps_cap}")
    v_guess = None if guess is None else np.array([[guess.dtheta, guess.dz]])
    v0, v1, lengths, path, _ = connect_batch(
        metric,
        np.array([p.theta]),
        np.array([p.z]),
        np.array([dth]),
        np.array([q.z]),
        v_guess=v_guess,
        steps=steps,
        tol=tol,
    )
    seg_end = Point(path[0, -1, 0], path[0, -1, 1])
    return GeodesicSegment(
        start=p,
        end=seg_end,
        v_start=Tangent(v0[0, 0], v0[0, 1], p),
        v_end=Tangent(v1[0, 0], v1[0, 1], seg_end),
        duration=1.0,
        length=float(lengths[0]),
        t=np.linspace(0.0, 1.0, steps + 1),
        theta=path[0, :, 0],
        z=path[0, :, 1],
        dtheta=path[0, :, 2],
        dz=path[0, :, 3],
    )


def _hermite_sample(t, y, dy, times):
    """Cubic Hermite interpolation of a sampled trajectory component."""
    t = np.asarray(t)
    idx = np.clip(np.searchsorted(t, times, side="right") - 1, 0, len(t) - 2)
    h = t[idx + 1] - t[idx]
    s = (times - t[idx]) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y[idx] + h10 * h * dy[idx] + h01 * y[idx + 1] + h11 * h * dy[idx + 1]


# -- Clairaut shooting ---------------------------------------------------------


def find_trapping_crest(metric, window=(-10.0, 10.0), grid=4001):
    """Interior strict local maximum of the revolution radius, or None.

    Oscillating geodesics are trapped around such a crest; monotone or flat
    profiles have none and support no shooting targets.
    """
    if not metric.is_revolution:
        raise UnsupportedModeError("trapping detection needs a revolution metric")
    lo, hi = metric.z_interval()
    lo, hi = max(lo, window[0]), min(hi, window[1])
    zs = np.linspace(lo, hi, grid)
    r = np.asarray(metric.r_theta(zs))
    best = None
    for i in range(1, grid - 1):
        if r[i] > r[i - 1] and r[i] > r[i + 1]:
            if best is None or r[i] > best[1]:
                best = (zs[i], r[i])
    if best is None:
        return None
    # polish the crest with bisection on the radius derivative sign
    z_lo, z_hi = best[0] - (zs[1] - zs[0]), best[0] + (zs[1] - zs[0])

    def slope(z, dd=1e-7):
        return float(metric.r_theta(z + dd) - metric.r_theta(z - dd))

    if slope(z_lo) > 0 and slope(z_hi) < 0:
        z_c = brentq(slope, z_lo, z_hi, xtol=1e-13)
    else:
        z_c = best[0]
    return float(z_c)


def _turning_point(metric, a, z_crest, side, escape_z=50.0):
    """z beyond the crest (side=+1 above, -1 below) where r_theta == a."""
    z_lo, z_hi = metric.z_interval()
    limit = min(escape_z, z_hi) if side > 0 else max(-escape_z, z_lo)
    f = lambda z: float(metric.r_theta(z)) - a
    step = 0.05 * side
    z_in = z_crest + step * 1e-6
    z_out = z_crest + step
    while (z_out < limit if side > 0 else z_out > limit) and f(z_out) > 0:
        z_out += step
    if f(z_out) > 0:
        return None
    return float(brentq(f, z_crest + side * 1e-12, z_out, xtol=1e-14))


def turning_advance(metric, a, z_crest, h=1e-3, escape_z=50.0, t_max=200.0):
    """theta advance and period of one full z-oscillation at momentum ``a``.

    Launches at the upper turning point and integrates until the next turning
    event of the same direction.  Returns (dtheta, period) or None when the
    oscillation does not close within the budget.
    """
    z_top = _turning_point(metric, a, z_crest, +1, escape_z)
    if z_top is None:
        return None
    gtt = float(metric.g_components(0.0, z_top)[0])
    p = Point(0.0, z_top)
    v = Tangent(a / gtt, 0.0, p)
    traj = integrate(metric, p, v, t_max, h, escape_z=escape_z)
    same = [e for e in traj.events if e.direction == 1]
    if traj.status != "completed" and len(same) < 1:
        return None
    if len(same) < 1:
        return None
    ev = same[0]
    return float(ev.theta - p.theta), float(ev.t)


def shoot_closed(
    profile,
    mode,
    n_osc,
    q,
    bracket,
    *,
    h=1e-3,
    j=None,
    escape_z=50.0,
    scan_points=24,
    pole_margin=1e-2,
):
    """Root-find the Clairaut momentum closing a trapped oscillating geodesic.

    ``n_osc`` counts the turning points (z-extrema) of the closed geodesic per
    period and must be even and coprime with the winding number ``q``; the
    closing condition is a theta advance of 2*pi*q/(n_osc/2) per full
    oscillation.  Returns a GeodesicRecord with degree q, or None when no
    momentum in ``bracket`` yields that advance.
    """
    if n_osc < 1 or q < 1:
        raise ValueError("n_osc and q must be positive")
    if math.gcd(n_osc, q) != 1:
        raise ValueError("n_osc and q must be coprime")
    if mode == "tannery":
        raise UnsupportedModeError("shooting works on profile-induced metrics")
    metric = Metric.intrinsic(profile, pole_margin) if mode == "intrinsic" else Metric.embedded(
        profile, pole_margin
    )
    if n_osc % 2:
        return None  # closed trapped geodesics alternate maxima and minima
    n_full = n_osc // 2
    target = TWO_PI * q / n_full

    z_crest = find_trapping_crest(metric)
    if z_crest is None:
        return None
    r_crest = float(metric.r_theta(z_crest))
    a_lo = max(bracket[0], 1e-9)
    a_hi = min(bracket[1], r_crest * (1.0 - 1e-9))
    if a_lo >= a_hi:
        return None

    def advance_mismatch(a, step):
        adv = turning_advance(metric, a, z_crest, h=step, escape_z=escape_z)
        return math.nan if adv is None else adv[0] - target

    # bracket and root-find on a coarse step first; the advance is a smooth
    # function of the momentum, so the coarse root localizes the fine one
    h_scan = max(h, 5e-3)
    f_scan = lambda a: advance_mismatch(a, h_scan)
    grid = np.linspace(a_lo, a_hi, scan_points)
    vals = np.array([f_scan(a) for a in grid])
    root = None
    for i in range(scan_points - 1):
        if math.isnan(vals[i]) or math.isnan(vals[i + 1]):
            continue
        if vals[i] == 0.0:
            root = grid[i]
            break
        if vals[i] * vals[i + 1] < 0:
            root = brentq(f_scan, grid[i], grid[i + 1], xtol=1e-10)
            break
    if root is None:
        return None
    if h_scan > h:
        lo = max(a_lo, root - 1e-4)
        hi = min(a_hi, root + 1e-4)
        f_fine = lambda a: advance_mismatch(a, h)
        flo, fhi = f_fine(lo), f_fine(hi)
        if not (math.isnan(flo) or math.isnan(fhi)) and flo * fhi < 0:
            root = brentq(f_fine, lo, hi, xtol=1e-13)

    adv = turning_advance(metric, root, z_crest, h=h, escape_z=escape_z)
    period = n_full * adv[1]
    z_top = _turning_point(metric, root, z_crest, +1, escape_z)
    gtt = float(metric.g_components(0.0, z_top)[0])
    p0 = Point(0.0, z_top)
    v0 = Tangent(root / gtt, 0.0, p0)
    traj = integrate(metric, p0, v0, period, h, escape_z=escape_z, collect_events=False)
    defect = math.hypot(
        float(wrap_angle(traj.theta[-1] - p0.theta)), float(traj.z[-1] - p0.z)
    )

    from .loops import BrokenLoop, polish_to_critical  # loops builds on this module
    from .records import GeodesicRecord

    if j is None:
        j = max(32, 16 * n_osc)
    # sample at equal times = equal arc length, so node speeds match and the
    # discretized loop stays critical
    times = period * np.arange(j) / j
    theta_nodes = _hermite_sample(traj.t, traj.theta, traj.dtheta, times)
    z_nodes = _hermite_sample(traj.t, traj.z, traj.dz, times)
    loop = BrokenLoop(metric, theta_nodes, z_nodes, degree=q)
    loop, _, _ = polish_to_critical(loop, tol=1e-10, max_steps=60)
    speed = float(metric.norm(p0.theta, p0.z, (v0.dtheta, v0.dz)))
    length = speed * period
    return GeodesicRecord(
        provenance="shooting",
        loop=loop,
        degree=q,
        length=length,
        energy=length * length,
        extras={
            "momentum": float(root),
            "closure_defect": float(defect),
            "period": float(period),
            "n_osc": n_osc,
        },
    )
