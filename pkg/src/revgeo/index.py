"""Jacobi-field index theory along closed geodesics.

On a surface the Jacobi equation reduces to the scalar normal equation
u'' + K(c(t)) L^2 u = 0 over the unit-period parametrization (L the length);
the tangential fields are trivial and dropped.  Conjugate points are the
interior zeros of the solution with u(0) = 0, u'(0) = 1, each of multiplicity
one; the fixed-endpoint index of the k-th iterate counts them over k periods.
The monodromy of the first-order system in (u, u'/L), its rotation (Prüfer)
phase, and the kernel dimension of P^k - I give the average index and the
per-iterate nullity.  A finite-difference Hessian of the loop energy in node
coordinates resolves the periodic index inside its one-sided bracket and
cross-checks degeneracies at the discretization level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .loops import BrokenLoop, DescentParams, descend, geometric_distinct
from .surface import TWO_PI

CLASSIFICATIONS = (
    "nondegenerate_minimum",
    "saddle",
    "degenerate_flat",
    "degenerate_other",
    "family_suspected",
)


@dataclass
class Monodromy:
    """Linearized normal return map over one period in (u, u'/L) coordinates."""

    matrix: np.ndarray
    det: float
    trace: float
    phase_advance: float  # Prüfer phase over one period from phase 0


@dataclass
class IterateRow:
    k: int
    ind_omega: int
    bracket: tuple
    nullity: int


@dataclass
class HessianSummary:
    negatives: int
    near_zeros: int
    threshold: float
    reported_nullity: int  # near-zeros minus the parameter-rotation mode


@dataclass
class IndexReport:
    rows: list
    mind: float
    classification: str
    hessian: HessianSummary = None

    def row(self, k):
        return self.rows[k - 1]

    def to_dict(self):
        d = {
            "mind": self.mind,
            "classification": self.classification,
            "iterates": [
                {
                    "k": r.k,
                    "ind_omega": r.ind_omega,
                    "bracket": list(r.bracket),
                    "nullity": r.nullity,
                }
                for r in self.rows
            ],
        }
        if self.hessian is not None:
            d["hessian"] = {
                "negatives": self.hessian.negatives,
                "near_zeros": self.hessian.near_zeros,
                "reported_nullity": self.hessian.reported_nullity,
            }
        return d


def _require_critical(loop, tol=1e-6):
    gn = loop.grad_norm()
    if gn >= tol:
        raise ValueError(f"loop is not critical (gradient norm {gn:.3e} >= {tol:.0e})")


def _cache(loop):
    store = getattr(loop, "_jacobi_cache", None)
    if store is None:
        store = {}
        loop._jacobi_cache = store
    return store


def _curvature_samples(loop):
    """Periodic samples (t_i, K_i) along the loop and its total length."""
    cache = _cache(loop)
    if "frame" not in cache:
        path = loop._segments()[3]
        steps = loop.steps_per_segment
        t = (np.arange(loop.j)[:, None] + np.arange(steps)[None, :] / steps) / loop.j
        t = t.reshape(-1)
        theta = path[:, :-1, 0].reshape(-1)
        z = path[:, :-1, 1].reshape(-1)
        K = np.asarray(loop.metric.curvature(theta, z), dtype=float)
        cache["frame"] = (t, K, loop.total_length())
    return cache["frame"]


def _k_interp(tgrid, tk, kk):
    """Periodic linear interpolation of the curvature samples."""
    ts = np.concatenate([tk, [1.0]])
    ks = np.concatenate([kk, [kk[0]]])
    return np.interp(np.mod(tgrid, 1.0), ts, ks)


def _jacobi_pass(loop, periods, n_per_period=1000, want_phase=False):
    """Integrate the normal Jacobi equation over ``periods`` periods.

    Returns (times, u, du) on the step grid, plus the phase trace when
    requested.  The linear solution is renormalized whenever it grows large;
    zeros and phases are invariant under that scaling.
    """
    tk, kk, L = _curvature_samples(loop)
    n = int(round(periods * n_per_period))
    h = periods / n
    tg = np.arange(2 * n + 1) * (0.5 * h)
    Kg = _k_interp(tg, tk, kk)
    qg = L * L * Kg  # u'' = -q(t) u

    u = np.empty(n + 1)
    du = np.empty(n + 1)
    u[0], du[0] = 0.0, 1.0
    phase = np.empty(n + 1) if want_phase else None
    if want_phase:
        phase[0] = 0.0
    uc, dc = 0.0, 1.0
    ph = 0.0
    for k in range(n):
        q0, qm, q1 = qg[2 * k], qg[2 * k + 1], qg[2 * k + 2]
        # RK4 for u' = p, p' = -q u
        k1u, k1p = dc, -q0 * uc
        k2u, k2p = dc + 0.5 * h * k1p, -qm * (uc + 0.5 * h * k1u)
        k3u, k3p = dc + 0.5 * h * k2p, -qm * (uc + 0.5 * h * k2u)
        k4u, k4p = dc + h * k3p, -q1 * (uc + h * k3u)
        uc = uc + h * (k1u + 2 * k2u + 2 * k3u + k4u) / 6.0
        dc = dc + h * (k1p + 2 * k2p + 2 * k3p + k4p) / 6.0
        mag = max(abs(uc), abs(dc))
        if mag > 1e100:
            uc /= mag
            dc /= mag
        if want_phase:
            # modified Pruefer phase for (u, u'/L): phi' = L (cos^2 + K sin^2)
            c0, cm, c1 = Kg[2 * k], Kg[2 * k + 1], Kg[2 * k + 2]
            f = lambda p, c: L * (math.cos(p) ** 2 + c * math.sin(p) ** 2)
            p1 = f(ph, c0)
            p2 = f(ph + 0.5 * h * p1, cm)
            p3 = f(ph + 0.5 * h * p2, cm)
            p4 = f(ph + h * p3, c1)
            ph = ph + h * (p1 + 2 * p2 + 2 * p3 + p4) / 6.0
            phase[k + 1] = ph
        u[k + 1] = uc
        du[k + 1] = dc
    times = np.arange(n + 1) * h
    return (times, u, du, phase) if want_phase else (times, u, du)


def _hermite_zero(t0, t1, u0, u1, d0, d1):
    """Zero of the cubic Hermite interpolant on [t0, t1] by bisection."""
    h = t1 - t0

    def val(s):
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return h00 * u0 + h10 * h * d0 + h01 * u1 + h11 * h * d1

    lo, hi = 0.0, 1.0
    flo = val(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = val(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return t0 + 0.5 * (lo + hi) * h


def conjugate_points(loop, k=1, n_per_period=1000, tol=1e-6):
    """Parameter values in (0, k) conjugate to 0 along the k-fold iterate.

    Integrates u'' + K L^2 u = 0 with u(0) = 0, u'(0) = 1 over k periods; each
    zero has multiplicity one on a surface.  Zeros within ``tol`` of the
    endpoints are the endpoints themselves, not interior conjugate points.
    """
    _require_critical(loop)
    if k < 1:
        raise ValueError("iterate must be >= 1")
    cache = _cache(loop)
    key = ("zeros", k, n_per_period)
    if key not in cache:
        times, u, du = _jacobi_pass(loop, k, n_per_period)
        zeros = []
        for i in range(1, len(u) - 1):
            if u[i] == 0.0:
                zeros.append(times[i])
            elif u[i] * u[i + 1] < 0:
                zeros.append(
                    _hermite_zero(times[i], times[i + 1], u[i], u[i + 1], du[i], du[i + 1])
                )
        cache[key] = np.array([t for t in zeros if tol < t < k - tol])
    return cache[key]


def index_omega(loop, k=1):
    """Fixed-endpoint Morse index of the k-th iterate: the conjugate-point count."""
    return int(len(conjugate_points(loop, k)))


def index_bracket(loop, k=1):
    """The periodic Morse index lies in [ind_omega, ind_omega + 1] on a surface."""
    lo = index_omega(loop, k)
    return (lo, lo + 1)


def monodromy(loop, n_per_period=1000):
    """Monodromy of the normal Jacobi system over one period."""
    _require_critical(loop)
    cache = _cache(loop)
    if "monodromy" not in cache:
        tk, kk, L = _curvature_samples(loop)
        n = n_per_period
        h = 1.0 / n
        tg = np.arange(2 * n + 1) * (0.5 * h)
        Kg = _k_interp(tg, tk, kk)
        Y = np.eye(2)
        ph = 0.0
        for k in range(n):
            c0, cm, c1 = Kg[2 * k], Kg[2 * k + 1], Kg[2 * k + 2]

            def A(c):
                return np.array([[0.0, L], [-L * c, 0.0]])

            k1 = A(c0) @ Y
            k2 = A(cm) @ (Y + 0.5 * h * k1)
            k3 = A(cm) @ (Y + 0.5 * h * k2)
            k4 = A(c1) @ (Y + h * k3)
            Y = Y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

            f = lambda p, c: L * (math.cos(p) ** 2 + c * math.sin(p) ** 2)
            p1 = f(ph, c0)
            p2 = f(ph + 0.5 * h * p1, cm)
            p3 = f(ph + 0.5 * h * p2, cm)
            p4 = f(ph + h * p3, c1)
            ph = ph + h * (p1 + 2 * p2 + 2 * p3 + p4) / 6.0
        cache["monodromy"] = Monodromy(
            matrix=Y, det=float(np.linalg.det(Y)), trace=float(np.trace(Y)), phase_advance=ph
        )
    return cache["monodromy"]


def average_index(loop, cap=16, n_per_period=1000):
    """Average index: the Prüfer rotation number of the normal equation / pi.

    On the hyperbolic and parabolic monodromy branches the rotation number is
    an integer and is returned exactly; on the elliptic branch it is
    reconstructed from the monodromy rotation angle, with the long-run phase
    fixing the winding.
    """
    mono = monodromy(loop, n_per_period)
    cache = _cache(loop)
    key = ("phase", cap, n_per_period)
    if key not in cache:
        _, _, _, phase = _jacobi_pass(loop, cap, n_per_period, want_phase=True)
        cache[key] = float(phase[-1])
    raw = cache[key] / (cap * math.pi)
    if abs(mono.trace) >= 2.0 - 1e-9:
        return float(round(raw))
    beta = math.acos(max(-1.0, min(1.0, mono.trace / 2.0)))
    # per period the phase advances 2*pi*n + beta or 2*pi*(n+1) - beta
    cands = []
    for nwind in range(0, int(raw) + 3):
        cands.append((TWO_PI * nwind + beta) / math.pi)
        cands.append((TWO_PI * (nwind + 1) - beta) / math.pi)
    cands = np.array(sorted(set(cands)))
    gaps = np.abs(cands - raw)
    best = int(np.argmin(gaps))
    # candidate branches closer than the phase sampling error are ambiguous
    if gaps[best] > 1.0 / cap:
        return float(raw)
    return float(cands[best])


def nullity(loop, k=1):
    """dim ker(P^k - I): the number of periodic normal Jacobi fields (0, 1 or 2)."""
    mono = monodromy(loop)
    P = mono.matrix
    tr = mono.trace
    ptol = 1e-7
    if abs(tr) > 2.0 + ptol:
        return 0  # hyperbolic: eigenvalues off the unit circle
    scale = max(1.0, float(np.abs(P).max()))
    if abs(tr - 2.0) <= ptol:
        # parabolic at +1: identity (nullity 2) or a shear (nullity 1)
        return 2 if float(np.abs(P - np.eye(2)).max()) < 1e-6 * scale else 1
    if abs(tr + 2.0) <= ptol:
        if k % 2 == 1:
            return 0
        P2 = P @ P
        return 2 if float(np.abs(P2 - np.eye(2)).max()) < 1e-6 * scale else 1
    beta = math.acos(max(-1.0, min(1.0, tr / 2.0)))
    # elliptic: P^k = I exactly when k beta is a multiple of 2*pi
    frac = (k * beta) % TWO_PI
    return 2 if min(frac, TWO_PI - frac) < 1e-6 * k else 0


def discrete_hessian(loop, fd_step=1e-5, threshold_factor=1e-6):
    """Eigenvalue signs of the energy Hessian in chart node coordinates.

    Built column-by-column from central differences of the exact gradient and
    symmetrized.  ``reported_nullity`` discounts the one exact zero mode from
    rotating the loop parameter.
    """
    _require_critical(loop)
    cache = _cache(loop)
    key = ("hessian", fd_step, threshold_factor)
    if key in cache:
        return cache[key]
    j = loop.j
    H = np.empty((2 * j, 2 * j))
    for col in range(2 * j):
        th_p = loop.theta.copy()
        z_p = loop.z.copy()
        th_m = loop.theta.copy()
        z_m = loop.z.copy()
        if col < j:
            th_p[col] += fd_step
            th_m[col] -= fd_step
        else:
            z_p[col - j] += fd_step
            z_m[col - j] -= fd_step
        gp = loop.with_nodes(th_p, z_p).gradient_covector()
        gm = loop.with_nodes(th_m, z_m).gradient_covector()
        H[:, col] = np.concatenate(
            [(gp[:, 0] - gm[:, 0]), (gp[:, 1] - gm[:, 1])]
        ) / (2.0 * fd_step)
    H = 0.5 * (H + H.T)
    evals = np.linalg.eigvalsh(H)
    thr = threshold_factor * float(np.abs(evals).max())
    negatives = int(np.sum(evals < -thr))
    near = int(np.sum(np.abs(evals) <= thr))
    out = HessianSummary(
        negatives=negatives,
        near_zeros=near,
        threshold=thr,
        reported_nullity=max(0, near - 1),
    )
    cache[key] = out
    return out


def _continuum_nearby(loop, delta=1e-3, params=None):
    """Perturbed descents detect a neighboring critical loop with a new image."""
    params = params or DescentParams(tol=1e-8, max_iter=300)
    for sign in (+1.0, -1.0):
        try:
            seed = loop.with_nodes(loop.theta, loop.z + sign * delta)
            res = descend(seed, params)
        except Exception:
            continue
        if res.outcome != "converged":
            continue
        if geometric_distinct(loop, res.loop, tol=delta / 2.0):
            return True
    return False


def classify(loop, cap=16, hessian=None, descent_params=None):
    """Heuristic critical-point label for the geodesic's circle.

    saddle: resolved index >= 1.  nondegenerate_minimum: no index, no nullity
    at any tested iterate.  family_suspected: degenerate with a neighboring
    geodesic found by perturbed descents.  degenerate_flat: degenerate with
    all tested iterate indices zero (the invisible-candidate profile).
    degenerate_other: everything else.
    """
    hess = hessian if hessian is not None else discrete_hessian(loop)
    ind1 = index_omega(loop, 1)
    resolved = min(max(hess.negatives, ind1), ind1 + 1)
    if resolved >= 1:
        return "saddle"
    nullities = [nullity(loop, k) for k in range(1, cap + 1)]
    if all(n == 0 for n in nullities):
        return "nondegenerate_minimum"
    if _continuum_nearby(loop, params=descent_params):
        return "family_suspected"
    inds = [index_omega(loop, k) for k in range(1, cap + 1)]
    if all(i == 0 for i in inds):
        return "degenerate_flat"
    return "degenerate_other"


def index_report(loop, cap=16, with_hessian=True, descent_params=None):
    """Full per-iterate index table with classification."""
    rows = []
    for k in range(1, cap + 1):
        lo, hi = index_bracket(loop, k)
        rows.append(IterateRow(k=k, ind_omega=lo, bracket=(lo, hi), nullity=nullity(loop, k)))
    hess = discrete_hessian(loop) if with_hessian else None
    mind = average_index(loop, cap)
    label = classify(loop, cap, hessian=hess, descent_params=descent_params)
    return IndexReport(rows=rows, mind=mind, classification=label, hessian=hess)
