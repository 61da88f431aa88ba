"""Mountain-pass and sweep constructions for saddle-type closed geodesics.

A path of loops is pushed down round by round: every movable stage takes a few
descent steps, then the path is reparametrized by arc length in configuration
space so stages stay spread across the barrier.  The running minimum of the
per-round maximum energy estimates the min-max value from above.  Once the
path stabilizes, a deterministic transverse kick probes for a lower, less
symmetric pass (a straight parallel-family path can ride a high symmetric
saddle when a tilted one is cheaper), and the highest stage is refined to a
genuine critical loop by minimizing the squared gradient norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConnectionFailure, DomainError
from .loops import (
    BrokenLoop,
    DescentParams,
    _sobolev_direction,
    descend,
    geometric_distinct,
)
from .surface import TWO_PI


@dataclass
class MinimaxParams:
    stages: int = 33  # path resolution: stages+1 loops including endpoints
    rounds: int = 250
    stage_steps: int = 4
    climb_budget: int = 500
    collapse_tol: float = 1e-6
    stabilize_window: int = 12
    stabilize_rtol: float = 1e-8
    neighbor_gap: float = 0.05
    max_doublings: int = 2
    kick_size: float = 1e-3
    kicks: int = 1
    descent: DescentParams = field(default_factory=lambda: DescentParams(tol=1e-8))


@dataclass
class LoopPath:
    """Discrete homotopy of loops; all stages share degree and node count."""

    stages: list
    endpoint_kind: str  # "fixed" for mountain passes, "half-regions" for sweeps

    def energies(self):
        return np.array([s.energy() for s in self.stages])

    def max_consecutive_displacement(self):
        worst = 0.0
        for a, b in zip(self.stages[:-1], self.stages[1:]):
            worst = max(
                worst,
                float(np.abs(a.theta - b.theta).max()),
                float(np.abs(a.z - b.z).max()),
            )
        return worst


@dataclass
class MinimaxResult:
    kappa0: float
    saddle: object
    history: list  # running inf-max estimate per pushdown round
    status: str  # saddle_found | collapsed | budget_exhausted
    diagnostics: dict = field(default_factory=dict)
    path: LoopPath = None


def _align_stage(reference, other):
    """Cyclic node shift and whole-turn offset minimizing the displacement."""
    best = None
    for shift in range(other.j):
        cand = other.rotate_nodes(shift)
        offs = TWO_PI * round(float(np.mean(cand.theta - reference.theta)) / TWO_PI)
        cost = float(
            np.sum((cand.theta - offs - reference.theta) ** 2)
            + np.sum((cand.z - reference.z) ** 2)
        )
        if best is None or cost < best[0]:
            best = (cost, shift, offs)
    _, shift, offs = best
    cand = other.rotate_nodes(shift)
    return BrokenLoop(
        other.metric, cand.theta - offs, cand.z, other.degree, other.eps,
        other.steps_per_segment,
    )


def _interp_path(metric, a, b, n_stages, degree, eps, steps):
    out = []
    for k in range(n_stages + 1):
        s = k / n_stages
        out.append(
            BrokenLoop(
                metric,
                (1.0 - s) * a.theta + s * b.theta,
                (1.0 - s) * a.z + s * b.z,
                degree,
                eps,
                steps,
            )
        )
    return out


def _reparametrize(stages, movable_lo, movable_hi):
    """Respace stages uniformly by configuration-space arc length.

    New stages inherit the segment-solver state of the nearest old stage, so
    their first energy evaluation starts warm.
    """
    coords = [np.concatenate([s.theta, s.z]) for s in stages]
    seglen = np.array(
        [float(np.linalg.norm(coords[i + 1] - coords[i])) for i in range(len(stages) - 1)]
    )
    total = seglen.sum()
    if total <= 0:
        return stages
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    targets = np.linspace(0.0, total, len(stages))
    out = list(stages)
    metric = stages[0].metric
    j = stages[0].j
    for k in range(movable_lo, movable_hi + 1):
        t = targets[k]
        i = min(int(np.searchsorted(cum, t, side="right")) - 1, len(seglen) - 1)
        denom = seglen[i] if seglen[i] > 0 else 1.0
        s = (t - cum[i]) / denom
        x = (1.0 - s) * coords[i] + s * coords[i + 1]
        donor = stages[i] if s < 0.5 else stages[i + 1]
        guess = donor._cache[0] if donor._cache is not None else None
        jac = donor._cache[4] if donor._cache is not None else None
        out[k] = BrokenLoop(
            metric, x[:j], x[j:], stages[0].degree, stages[0].eps,
            stages[0].steps_per_segment, v_guess=guess, jac_guess=jac,
        )
    return out


def climb_to_critical(loop, tol=1e-8, budget=500):
    """Refine a near-saddle loop by minimizing the squared gradient norm.

    The objective |dE|^2 is assembled from exact gradients only, so it avoids
    the float-resolution floor that stops energy line searches; its gradient
    2 H dE is formed by a directional difference of the loop gradient.
    Returns (loop, grad_norm, converged).
    """
    cur = loop
    gn = cur.grad_norm()
    evals = 0
    alpha = 1.0
    while evals < budget:
        if gn < tol:
            return cur, gn, True
        gcov = cur.gradient_covector()
        flat = np.concatenate([gcov[:, 0], gcov[:, 1]])
        nrm = float(np.linalg.norm(flat))
        if nrm == 0.0:
            return cur, gn, True
        u = gcov / nrm
        delta = 1e-6 * (1.0 + float(np.abs(cur.z).max()))
        try:
            gp = cur.with_nodes(cur.theta + delta * u[:, 0], cur.z + delta * u[:, 1])
            gm = cur.with_nodes(cur.theta - delta * u[:, 0], cur.z - delta * u[:, 1])
            hg = (gp.gradient_covector() - gm.gradient_covector()) * (nrm / (2.0 * delta))
        except (ConnectionFailure, DomainError):
            return cur, gn, False
        evals += 2
        dphi = 2.0 * hg  # gradient of |dE|^2
        d = _sobolev_direction(dphi, cur.j)
        slope = float(np.sum(dphi * d))
        if slope <= 0:
            d = dphi
            slope = float(np.sum(dphi * dphi))
        phi = nrm * nrm
        accepted = False
        a = alpha
        for _ in range(40):
            try:
                trial = cur.with_nodes(cur.theta - a * d[:, 0], cur.z - a * d[:, 1])
                gt = trial.gradient_covector()
            except (ConnectionFailure, DomainError):
                a *= 0.5
                continue
            evals += 1
            phi_t = float(np.sum(gt * gt))
            if phi_t <= phi - 1e-4 * a * slope:
                cur = trial
                gn = cur.grad_norm()
                alpha = min(a * 2.0, 1e6)
                accepted = True
                break
            a *= 0.5
        if not accepted:
            break
    return cur, gn, gn < tol


def _kick(stages, size):
    """Deterministic transverse wiggle breaking a parallel-symmetric path."""
    n = len(stages) - 1
    out = [stages[0]]
    for k in range(1, n):
        s = stages[k]
        window = math.sin(math.pi * k / n)
        wig = size * window * np.sin(TWO_PI * np.arange(s.j) / s.j)
        out.append(
            BrokenLoop(s.metric, s.theta, s.z + wig, s.degree, s.eps, s.steps_per_segment)
        )
    out.append(stages[n])
    return out


def _pushdown(stages, params, movable_lo, movable_hi, clamp=None, band=None, trace=None,
              history=None, diagnostics=None):
    """Rounds of bounded stage descents with arc-length respacing.

    Returns (stages, status, best_max) with status one of "stabilized",
    "collapsed", "budget".  ``clamp`` post-processes moved stages (half-region
    sweeps); ``band`` restricts the max-energy estimate to stages meeting it.
    """
    inner = DescentParams(
        tol=params.descent.tol,
        max_iter=params.stage_steps,
        escape_z=params.descent.escape_z,
        step_rule=params.descent.step_rule,
    )
    history = history if history is not None else []
    recent = []
    e_ends = (stages[0].energy(), stages[-1].energy())
    scale = 1.0 + max(e_ends)
    for rnd in range(params.rounds):
        escaped = []
        new_stages = list(stages)
        for k in range(movable_lo, movable_hi + 1):
            try:
                res = descend(new_stages[k], inner)
            except (ConnectionFailure, DomainError):
                escaped.append(k)
                continue
            stage = res.loop
            if clamp is not None:
                stage = clamp(k, stage)
            if res.outcome == "escaped":
                escaped.append(k)
            new_stages[k] = stage
        stages = _reparametrize(new_stages, max(movable_lo, 1), min(movable_hi, len(stages) - 2))
        energies = np.array([s.energy() for s in stages])
        if band is not None:
            meets = np.array([_meets_band(s, band) for s in stages])
            if not meets.any():
                if diagnostics is not None:
                    diagnostics["note"] = "no stage meets the middle band"
                return stages, "collapsed", float(history[-1]) if history else float(
                    energies.max()
                )
            e_max = float(energies[meets].max())
        else:
            e_max = float(energies.max())
        best = min(history[-1], e_max) if history else e_max
        history.append(best)
        if trace is not None:
            trace.append((rnd, int(np.argmax(energies)), e_max))
        if diagnostics is not None and escaped:
            diagnostics.setdefault("escaped_stages", []).append((rnd, escaped))
        if e_max <= max(e_ends) + params.collapse_tol * scale:
            return stages, "collapsed", best
        # stabilized once the inf-max estimate stops improving over the window
        recent.append(best)
        if len(recent) > params.stabilize_window:
            recent.pop(0)
            if recent[0] - recent[-1] <= params.stabilize_rtol * scale:
                return stages, "stabilized", best
    return stages, "budget", history[-1] if history else math.nan


def _meets_band(stage, band):
    return bool(np.any((stage.z >= band[0]) & (stage.z <= band[1])))


def mountain_pass(min_a, min_b, params=None, trace=None):
    """Min-max over discrete homotopies between two local-minimum geodesics.

    The endpoints stay fixed.  Returns the stabilized highest stage refined to
    a critical loop, its energy as the min-max estimate, and the per-round
    history of that estimate (non-increasing by construction).
    """
    params = params or MinimaxParams()
    tol = params.descent.tol
    if min_a.degree != min_b.degree:
        raise ValueError("mountain pass endpoints must share the degree")
    if not (min_a.grad_norm() < 100 * tol and min_b.grad_norm() < 100 * tol):
        raise ValueError("mountain pass endpoints must be critical loops")
    if min_b.j != min_a.j:
        min_b = min_b.resample(min_a.j)
    if not geometric_distinct(min_a, min_b):
        raise ValueError("mountain pass endpoints must be geometrically distinct")
    min_b = _align_stage(min_a, min_b)

    n = params.stages
    stages = _interp_path(
        min_a.metric, min_a, min_b, n, min_a.degree, min_a.eps, min_a.steps_per_segment
    )
    history = []
    diagnostics = {}
    doublings = 0
    kicks_left = params.kicks
    status = None
    while True:
        stages, state, best = _pushdown(
            stages, params, 1, len(stages) - 2, trace=trace, history=history,
            diagnostics=diagnostics,
        )
        if state == "collapsed":
            return MinimaxResult(
                kappa0=best,
                saddle=None,
                history=history,
                status="collapsed",
                diagnostics=diagnostics,
                path=LoopPath(stages, "fixed"),
            )
        if state == "budget":
            status = "budget_exhausted"
            break
        energies = np.array([s.energy() for s in stages])
        imax = int(np.argmax(energies))
        gap = max(
            abs(energies[imax] - energies[max(imax - 1, 0)]),
            abs(energies[imax] - energies[min(imax + 1, len(stages) - 1)]),
        )
        if gap > params.neighbor_gap * energies[imax] and doublings < params.max_doublings:
            doublings += 1
            stages = _refine_path(stages)
            continue
        if kicks_left > 0:
            kicks_left -= 1
            kicked = _kick(stages, params.kick_size)
            kicked, k_state, k_best = _pushdown(
                kicked, params, 1, len(stages) - 2, trace=trace, history=history,
                diagnostics=diagnostics,
            )
            if k_state in ("stabilized", "budget") and k_best <= best:
                stages, best = kicked, k_best
            if k_state == "collapsed":
                return MinimaxResult(
                    kappa0=k_best, saddle=None, history=history, status="collapsed",
                    diagnostics=diagnostics, path=LoopPath(kicked, "fixed"),
                )
            continue
        status = "saddle_found"
        break

    energies = np.array([s.energy() for s in stages])
    imax = int(np.argmax(energies))
    saddle, gn, ok = climb_to_critical(
        stages[imax], tol=tol, budget=params.climb_budget
    )
    diagnostics["climb_grad_norm"] = gn
    if status == "saddle_found" and not ok:
        status = "budget_exhausted"
    if ok and (
        not geometric_distinct(saddle, min_a) or not geometric_distinct(saddle, min_b)
    ):
        status = "collapsed"
    kappa0 = saddle.energy() if ok else history[-1]
    return MinimaxResult(
        kappa0=float(kappa0),
        saddle=saddle if ok else None,
        history=history,
        status=status,
        diagnostics=diagnostics,
        path=LoopPath(stages, "fixed"),
    )


def _refine_path(stages):
    """Double the number of stages by midpoint insertion."""
    out = []
    for a, b in zip(stages[:-1], stages[1:]):
        out.append(a)
        out.append(
            BrokenLoop(
                a.metric, 0.5 * (a.theta + b.theta), 0.5 * (a.z + b.z), a.degree,
                a.eps, a.steps_per_segment,
            )
        )
    out.append(stages[-1])
    return out


def sweep(metric, degree, z_minus, z_plus, params=None, j=64, trace=None):
    """Min-max over sweeps joining loops deep below z_minus to loops above z_plus.

    Endpoint stages may slide but are clamped to their half-regions
    z <= z_minus and z >= z_plus; the estimate takes the maximum only over
    stages meeting the middle band.
    """
    params = params or MinimaxParams()
    if z_minus >= z_plus:
        raise ValueError("need z_minus < z_plus")
    lo = BrokenLoop.parallel(metric, z_minus, degree, j)
    hi = BrokenLoop.parallel(metric, z_plus, degree, j)
    stages = _interp_path(metric, lo, hi, params.stages, degree, lo.eps, lo.steps_per_segment)

    def clamp(k, stage):
        if k == 0:
            z = np.minimum(stage.z, z_minus)
        elif k == len(stages) - 1:
            z = np.maximum(stage.z, z_plus)
        else:
            return stage
        return BrokenLoop(
            metric, stage.theta, z, stage.degree, stage.eps, stage.steps_per_segment
        )

    history = []
    diagnostics = {}
    band = (z_minus, z_plus)
    kicks_left = params.kicks
    status = None
    while True:
        stages, state, best = _pushdown(
            stages, params, 0, len(stages) - 1, clamp=clamp, band=band, trace=trace,
            history=history, diagnostics=diagnostics,
        )
        if state == "collapsed":
            return MinimaxResult(
                kappa0=best, saddle=None, history=history, status="collapsed",
                diagnostics=diagnostics, path=LoopPath(stages, "half-regions"),
            )
        if state == "budget":
            status = "budget_exhausted"
            break
        if kicks_left > 0:
            kicks_left -= 1
            kicked = _kick(stages, params.kick_size)
            kicked, k_state, k_best = _pushdown(
                kicked, params, 0, len(stages) - 1, clamp=clamp, band=band, trace=trace,
                history=history, diagnostics=diagnostics,
            )
            if k_state in ("stabilized", "budget") and k_best <= best:
                stages, best = kicked, k_best
            if k_state == "collapsed":
                return MinimaxResult(
                    kappa0=k_best, saddle=None, history=history, status="collapsed",
                    diagnostics=diagnostics, path=LoopPath(kicked, "half-regions"),
                )
            continue
        status = "saddle_found"
        break

    energies = np.array([s.energy() for s in stages])
    meets = np.array([_meets_band(s, band) for s in stages])
    if not meets.any():
        return MinimaxResult(
            kappa0=history[-1] if history else math.nan,
            saddle=None,
            history=history,
            status="collapsed",
            diagnostics=diagnostics,
            path=LoopPath(stages, "half-regions"),
        )
    masked = np.where(meets, energies, -np.inf)
    imax = int(np.argmax(masked))
    saddle, gn, ok = climb_to_critical(stages[imax], tol=params.descent.tol,
                                       budget=params.climb_budget)
    diagnostics["climb_grad_norm"] = gn
    if status == "saddle_found" and not ok:
        status = "budget_exhausted"
    kappa0 = saddle.energy() if ok else (history[-1] if history else math.nan)
    return MinimaxResult(
        kappa0=float(kappa0),
        saddle=saddle if ok else None,
        history=history,
        status=status,
        diagnostics=diagnostics,
        path=LoopPath(stages, "half-regions"),
    )
