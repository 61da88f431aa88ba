"""Broken-geodesic loops: discrete energy, exact gradient, and descent flow.

A loop is j nodes joined by short geodesic segments, each parametrized over
1/j of the period.  Node angles are stored as a lifted (unwrapped) sequence,
so the winding number is explicit and interpolation and descent never fight
branch cuts; the closing segment advances by theta[0] + 2*pi*degree -
theta[-1].  With segment lengths L_i the energy is j * sum L_i^2, which is the
exact energy of the piecewise-geodesic parametrization, and the gradient at a
node is twice the jump of the loop-time velocity across it.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConnectionFailure, DomainError
from .surface import TWO_PI, Point, wrap_angle
from .flow import connect_batch

_DEFAULT_EPS = 0.5


@dataclass
class DescentParams:
    """Knobs for the negative-gradient descent.

    ``bb`` seeds each backtracking search with a Barzilai-Borwein step; the
    plain ``armijo`` rule grows the previous accepted step instead.  Both are
    safeguarded by the same sufficient-decrease test, so the energy trace is
    monotone either way; bb converges far faster at tight tolerances.
    """

    tol: float = 1e-8
    max_iter: int = 5000
    escape_z: float = 50.0
    step_rule: str = "bb"  # bb | armijo
    armijo_c: float = 1e-4
    shrink: float = 0.5
    grow: float = 2.0
    max_backtracks: int = 60
    # deep downhill drifts need steps ~ exp(2|z|) against gradients of the
    # reciprocal size; the mode cap keeps oscillatory modes stable regardless
    step_max: float = 1e30


@dataclass
class DescentResult:
    outcome: str  # converged | escaped | max_iter | connection_failure
    loop: object
    iterations: int
    grad_norm: float
    energy_trace: np.ndarray


class BrokenLoop:
    """Immutable discrete loop; construct new loops instead of mutating."""

    def __init__(self, metric, theta, z, degree, eps=_DEFAULT_EPS, steps_per_segment=8,
                 v_guess=None, jac_guess=None):
        theta = np.array(theta, dtype=float)
        z = np.array(z, dtype=float)
        if theta.ndim != 1 or theta.shape != z.shape:
            raise ValueError("theta and z must be equal-length 1-d arrays")
        if theta.size < 3:
            raise ValueError("a broken loop needs at least 3 nodes")
        metric.check_z(z)
        theta.setflags(write=False)
        z.setflags(write=False)
        self.metric = metric
        self.theta = theta
        self.z = z
        self.degree = int(degree)
        self.eps = float(eps)
        self.steps_per_segment = int(steps_per_segment)
        self._v_guess = v_guess
        self._jac_guess = jac_guess
        self._cache = None

    # -- construction --------------------------------------------------------

    @classmethod
    def from_points(cls, metric, points, eps=_DEFAULT_EPS, steps_per_segment=16):
        """Build from chart points, inferring lifts by minimal angle steps."""
        thetas = [float(points[0].theta)]
        for p in points[1:]:
            thetas.append(thetas[-1] + float(wrap_angle(p.theta - (thetas[-1] % TWO_PI))))
        closure = float(wrap_angle(points[0].theta - (thetas[-1] % TWO_PI)))
        total = thetas[-1] + closure - thetas[0]
        degree = round(total / TWO_PI)
        if abs(total - TWO_PI * degree) > 1e-9:
            raise ValueError("node angles do not close up to a full winding")
        return cls(metric, thetas, [p.z for p in points], degree, eps, steps_per_segment)

    @classmethod
    def parallel(cls, metric, z0, degree, j, eps=_DEFAULT_EPS, steps_per_segment=16):
        """Nodes equally spaced on the parallel circle at z0."""
        theta = TWO_PI * degree * np.arange(j) / j
        return cls(metric, theta, np.full(j, float(z0)), degree, eps, steps_per_segment)

    def with_nodes(self, theta, z):
        """Same loop structure with moved nodes; reuses segment solver state."""
        if self._cache is not None:
            guess, jac = self._cache[0], self._cache[4]
        else:
            guess, jac = self._v_guess, self._jac_guess
        return BrokenLoop(
            self.metric, theta, z, self.degree, self.eps, self.steps_per_segment,
            v_guess=guess, jac_guess=jac,
        )

    # -- geometry ------------------------------------------------------------

    @property
    def j(self):
        return self.theta.size

    def dtheta_steps(self):
        """Lifted angular increment of each segment (closing one included)."""
        ahead = np.roll(self.theta, -1)
        ahead[-1] = self.theta[0] + TWO_PI * self.degree
        return ahead - self.theta

    def _segments(self):
        if self._cache is None:
            z_next = np.roll(self.z, -1)
            self._cache = connect_batch(
                self.metric,
                self.theta,
                self.z,
                self.dtheta_steps(),
                z_next,
                v_guess=self._v_guess,
                jac_guess=self._jac_guess,
                steps=self.steps_per_segment,
            )
        return self._cache

    def lengths(self):
        return self._segments()[2]

    def max_segment_length(self):
        return float(self.lengths().max())

    def energy(self):
        L = self.lengths()
        return float(self.j * np.sum(L * L))

    def total_length(self):
        return float(np.sum(self.lengths()))

    def gradient(self):
        """Per-node tangent components (j, 2): 2 j (v_in - v_out)."""
        v0, v1 = self._segments()[:2]
        return 2.0 * self.j * (np.roll(v1, 1, axis=0) - v0)

    def gradient_covector(self):
        """Chart partial derivatives of the energy (index lowered with g)."""
        g = self.gradient()
        gtt, gtz, gzz = self.metric.g_components(self.theta, self.z)
        return np.stack(
            [gtt * g[:, 0] + gtz * g[:, 1], gtz * g[:, 0] + gzz * g[:, 1]], axis=-1
        )

    def grad_norm(self):
        """Metric-weighted norm sqrt(sum_i |grad_i|_g^2)."""
        g = self.gradient()
        gtt, gtz, gzz = self.metric.g_components(self.theta, self.z)
        sq = gtt * g[:, 0] ** 2 + 2.0 * gtz * g[:, 0] * g[:, 1] + gzz * g[:, 1] ** 2
        return float(np.sqrt(np.sum(sq)))

    def points(self):
        return [Point(t, z) for t, z in zip(self.theta, self.z)]

    def sample_image(self):
        """Dense (n, 2) chart samples of the loop image, theta reduced mod 2*pi."""
        path = self._segments()[3]
        pts = path[:, :-1, :2].reshape(-1, 2)
        return np.stack([pts[:, 0] % TWO_PI, pts[:, 1]], axis=-1)

    def point_at(self, t):
        """Chart position at loop parameter t in [0, 1), cubic in each sub-step."""
        path = self._segments()[3]
        t = float(t) % 1.0
        i = min(int(t * self.j), self.j - 1)
        s = t * self.j - i
        steps = self.steps_per_segment
        k = min(int(s * steps), steps - 1)
        x = s * steps - k
        seg = path[i]
        h = 1.0 / steps
        h00 = (1 + 2 * x) * (1 - x) ** 2
        h10 = x * (1 - x) ** 2
        h01 = x * x * (3 - 2 * x)
        h11 = x * x * (x - 1)
        th = h00 * seg[k, 0] + h10 * h * seg[k, 2] + h01 * seg[k + 1, 0] + h11 * h * seg[k + 1, 2]
        zz = h00 * seg[k, 1] + h10 * h * seg[k, 3] + h01 * seg[k + 1, 1] + h11 * h * seg[k + 1, 3]
        return float(th), float(zz)

    # -- rebuilding operations -------------------------------------------------

    def iterate(self, m):
        """The m-fold cover: node cycle repeated m times, degree scaled by m."""
        if m < 1:
            raise ValueError("iterate count must be >= 1")
        if m == 1:
            return self
        th = np.concatenate([self.theta + TWO_PI * self.degree * k for k in range(m)])
        zz = np.tile(self.z, m)
        return BrokenLoop(
            self.metric, th, zz, self.degree * m, self.eps, self.steps_per_segment
        )

    def resample(self, j_new):
        """Nodes at equal parameter fractions along the current broken curve."""
        if j_new < 3:
            raise ValueError("cannot resample below 3 nodes")
        ts = np.arange(j_new) / j_new
        th = np.empty(j_new)
        zz = np.empty(j_new)
        for k, t in enumerate(ts):
            th[k], zz[k] = self.point_at(t)
        return BrokenLoop(self.metric, th, zz, self.degree, self.eps, self.steps_per_segment)

    def rotate_nodes(self, shift):
        """Cyclic relabeling of the node list (discrete S^1 action)."""
        shift = int(shift) % self.j
        if shift == 0:
            return self
        th = np.concatenate([self.theta[shift:], self.theta[:shift] + TWO_PI * self.degree])
        zz = np.concatenate([self.z[shift:], self.z[:shift]])
        return BrokenLoop(self.metric, th, zz, self.degree, self.eps, self.steps_per_segment)

    def reverse(self):
        """Orientation reversal; the degree flips sign."""
        th = self.theta[::-1].copy()
        zz = self.z[::-1].copy()
        return BrokenLoop(self.metric, th, zz, -self.degree, self.eps, self.steps_per_segment)

    # -- serialization ----------------------------------------------------------

    def to_text(self):
        buf = io.StringIO()
        buf.write(f"# degree={self.degree} j={self.j}\n")
        for t, z in zip(self.theta, self.z):
            buf.write(f"{float(t)!r} {float(z)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, metric, text, eps=_DEFAULT_EPS, steps_per_segment=16):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        head = lines[0]
        if not head.startswith("#"):
            raise ValueError("loop text must start with a '# degree=.. j=..' header")
        fields = dict(tok.split("=") for tok in head[1:].split())
        degree = int(fields["degree"])
        j = int(fields["j"])
        rows = [ln.split() for ln in lines[1:]]
        if len(rows) != j:
            raise ValueError(f"header says j={j} but {len(rows)} node lines found")
        theta = np.array([float(r[0]) for r in rows])
        z = np.array([float(r[1]) for r in rows])
        return cls(metric, theta, z, degree, eps, steps_per_segment)


def degree(loop):
    """Winding number of the theta lift divided by 2*pi."""
    return loop.degree


def energy(loop):
    return loop.energy()


def gradient(loop):
    return loop.gradient()


def critical_test(loop, tol=1e-8):
    """True when the metric-weighted gradient norm is below tol."""
    return loop.grad_norm() < tol


def _hausdorff(A, B):
    """Symmetric chart Hausdorff distance with theta compared mod 2*pi."""
    dth = np.abs(A[:, None, 0] - B[None, :, 0])
    dth = np.minimum(dth, TWO_PI - dth)
    dz = A[:, None, 1] - B[None, :, 1]
    d = np.sqrt(dth * dth + dz * dz)
    return max(float(d.min(axis=1).max()), float(d.min(axis=0).max()))


def geometric_distinct(a, b, tol=1e-3):
    """True iff the loop images differ by more than tol in Hausdorff distance.

    Rotations in parameter and iterates of one geodesic share an image and are
    therefore not distinct.
    """
    A = a.sample_image()
    B = b.sample_image()
    cap = 4096
    if A.shape[0] > cap:
        A = A[:: A.shape[0] // cap + 1]
    if B.shape[0] > cap:
        B = B[:: B.shape[0] // cap + 1]
    return _hausdorff(A, B) > tol


def _escaped(loop, escape_z):
    z_lo, z_hi = loop.metric.z_interval()
    lo = max(z_lo, -escape_z)
    hi = min(z_hi, escape_z)
    return bool(np.any(loop.z < lo) or np.any(loop.z > hi))


def _sobolev_direction(gcov, j, alpha=1.0, mode_cap=1.5):
    """Solve the circulant second-difference system per component.

    The loop-energy Hessian is dominated by 2j * (discrete Laplacian), so this
    H^1 preconditioner makes the descent stiffness roughly mode-independent;
    the (2*pi/j)^2 shift keeps the translation modes moving at the same rate.
    When the caller intends a step larger than ``mode_cap`` (long downhill
    drifts), the oscillatory modes are clamped to their stability limit and
    only the node-uniform mode takes the full step.
    """
    m = np.arange(j // 2 + 1)
    lam = 2.0 * j * (2.0 - 2.0 * np.cos(TWO_PI * m / j) + (TWO_PI / j) ** 2)
    w = np.full(m.shape, min(1.0, mode_cap / max(alpha, 1e-300)))
    w[0] = 1.0
    d0 = np.fft.irfft(np.fft.rfft(gcov[:, 0]) * w / lam, n=j)
    d1 = np.fft.irfft(np.fft.rfft(gcov[:, 1]) * w / lam, n=j)
    return np.stack([d0, d1], axis=-1)


def polish_to_critical(loop, tol=1e-8, max_steps=200):
    """Drive the gradient itself to zero by preconditioned fixed-point steps.

    Line searches on the energy stall once the remaining decrease drops under
    the float resolution of E, well above gradient norm 1e-8; this endgame
    accepts steps on gradient-norm decrease instead, which has no such floor.
    Works from any point close to a critical one (minimum or saddle).
    Returns (loop, grad_norm, converged).
    """
    cur = loop
    gnorm = cur.grad_norm()
    alpha = 1.0
    stalls = 0
    for _ in range(max_steps):
        if gnorm < tol:
            return cur, gnorm, True
        d = _sobolev_direction(cur.gradient_covector(), cur.j)
        try:
            trial = cur.with_nodes(cur.theta - alpha * d[:, 0], cur.z - alpha * d[:, 1])
            gn_new = trial.grad_norm()
        except (ConnectionFailure, DomainError):
            gn_new = math.inf
        if gn_new < gnorm:
            cur, gnorm = trial, gn_new
            alpha = min(1.0, alpha * 1.5)
            stalls = 0
        else:
            alpha *= 0.5
            stalls += 1
            if stalls >= 12:
                break
    return cur, gnorm, gnorm < tol


def descend(loop, params=None):
    """Backtracking line search along the negative gradient.

    The energy trace is non-increasing and the degree is preserved by
    construction.  Outcomes: converged (metric-weighted gradient norm under
    tol), escaped (a node left the allowed band), max_iter, or
    connection_failure.  A failed segment solve or a segment growing past the
    loop's cap triggers an automatic node-count doubling before giving up.
    """
    params = params or DescentParams()
    doublings = 0
    max_doublings = 3

    def doubled(cur):
        nonlocal doublings
        if doublings >= max_doublings or cur.j >= 2048:
            return None
        doublings += 1
        return cur.resample(2 * cur.j)

    cur = loop
    try:
        energy_trace = [cur.energy()]
        gnorm = cur.grad_norm()
    except (ConnectionFailure, DomainError):
        retry = doubled(cur)
        if retry is None:
            return DescentResult("connection_failure", cur, 0, math.inf, np.asarray([]))
        cur = retry
        energy_trace = [cur.energy()]
        gnorm = cur.grad_norm()

    plain = params.step_rule == "plain"
    step = 1.0 / (2.0 * cur.j) if plain else 1.0
    prev_x = None
    prev_d = None
    last_disp = 0.0  # guards against slow drifts whose gradient dips under tol
    it = 0
    while it < params.max_iter:
        if _escaped(cur, params.escape_z):
            return DescentResult("escaped", cur, it, gnorm, np.asarray(energy_trace))
        if gnorm < params.tol and last_disp < 1e-6:
            return DescentResult("converged", cur, it, gnorm, np.asarray(energy_trace))

        gcov = cur.gradient_covector()
        d_probe = cur.gradient() if plain else _sobolev_direction(gcov, cur.j)
        x = np.concatenate([cur.theta, cur.z])
        dflat = np.concatenate([d_probe[:, 0], d_probe[:, 1]])

        if params.step_rule == "bb" and prev_x is not None:
            s = x - prev_x
            y = dflat - prev_d
            sy = float(np.dot(s, y))
            if sy > 1e-300:
                step = float(np.dot(s, s)) / sy
        step = min(max(step, 1e-14), params.step_max)
        prev_x, prev_d = x, dflat

        d = d_probe if plain else _sobolev_direction(gcov, cur.j, alpha=step)
        slope = float(np.sum(d * gcov))  # directional decrease rate, > 0

        accepted = None
        saw_failure = False
        alpha = step
        z_cap = params.escape_z + 2.0  # flailing trials overflow the metric
        for _ in range(params.max_backtracks):
            z_try = cur.z - alpha * d[:, 1]
            if np.any(np.abs(z_try) > z_cap):
                alpha *= params.shrink
                continue
            try:
                trial = cur.with_nodes(cur.theta - alpha * d[:, 0], z_try)
                e_new = trial.energy()
            except (ConnectionFailure, DomainError):
                saw_failure = True
                alpha *= params.shrink
                continue
            if e_new <= energy_trace[-1] - params.armijo_c * alpha * slope:
                accepted = (trial, e_new, alpha)
                break
            alpha *= params.shrink
        if accepted is None:
            if saw_failure:
                retry = doubled(cur)
                if retry is None:
                    return DescentResult(
                        "connection_failure", cur, it, gnorm, np.asarray(energy_trace)
                    )
                cur = retry
                energy_trace.append(cur.energy())
                gnorm = cur.grad_norm()
                step = 1.0 / (2.0 * cur.j) if plain else 1.0
                prev_x = prev_d = None
                it += 1
                continue
            # energy decreases no longer resolve in float; finish on the
            # gradient itself, which has no such floor
            cur, gnorm, ok = polish_to_critical(cur, params.tol)
            energy_trace.append(cur.energy())
            if _escaped(cur, params.escape_z):
                return DescentResult("escaped", cur, it, gnorm, np.asarray(energy_trace))
            return DescentResult(
                "converged" if ok else "max_iter", cur, it, gnorm, np.asarray(energy_trace)
            )
        cur, e_new, alpha = accepted
        last_disp = alpha * float(np.abs(d).max())
        decrease = energy_trace[-1] - e_new
        if cur.max_segment_length() > cur.eps:
            retry = doubled(cur)
            if retry is not None:
                cur = retry
                step = 1.0 / (2.0 * cur.j) if plain else 1.0
                prev_x = prev_d = None
        if params.step_rule != "bb":
            step = alpha * params.grow
        energy_trace.append(cur.energy())
        gnorm = cur.grad_norm()
        it += 1
        if decrease < 1e-12 * (1.0 + abs(e_new)) and gnorm >= params.tol:
            # decreases no longer resolve in float; finish on the gradient
            cur, gnorm, ok = polish_to_critical(cur, params.tol)
            energy_trace.append(cur.energy())
            if _escaped(cur, params.escape_z):
                return DescentResult("escaped", cur, it, gnorm, np.asarray(energy_trace))
            return DescentResult(
                "converged" if ok else "max_iter", cur, it, gnorm, np.asarray(energy_trace)
            )
    return DescentResult("max_iter", cur, it, gnorm, np.asarray(energy_trace))
