"""Minimal-interference projection of a nominal action onto stacked constraints.

The problem is tiny by construction — two action variables, a per-axis box,
and a handful of halfplane rows — so the solver is an exact primal
active-set method rather than a general-purpose QP package.

Two phases:

1. Projection phase. If the unrelaxed feasible set (rows + box) is
   nonempty, return the exact Euclidean projection of the nominal action
   onto it (status "optimal", slack 0). Feasibility is decided exactly by
   enumerating candidate vertices of the 2-D polytope, which also yields
   the feasible starting point the active-set iteration needs.
2. Slack phase. Only when the rows conflict outright, one shared
   nonnegative slack s relaxes every row (a.u <= b + s) under a quadratic
   penalty, which is always solvable; status "relaxed" reports the
   safety-margin erosion instead of crashing.

Exceeding the iteration cap returns status "fallback" with the box-clipped
nominal; the caller substitutes its own recovery action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .barriers import LinearConstraint

STATUS_OPTIMAL = "optimal"
STATUS_RELAXED = "relaxed"
STATUS_FALLBACK = "fallback"

MAX_ITER = 64
_FEAS_TOL = 1e-9
_ZERO_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class QpProblem:
    """Projection instance: nominal action, halfplane rows, box, slack penalty."""

    nominal: np.ndarray
    constraints: tuple[LinearConstraint, ...] = ()
    box: float = 1.0
    slack_weight: float = 1e6

    def __post_init__(self):
        u = np.asarray(self.nominal, dtype=float).reshape(2)
        if not (math.isfinite(u[0]) and math.isfinite(u[1])):
            raise ValueError(f"nominal action must be finite, got {self.nominal!r}")
        if not (math.isfinite(self.box) and self.box > 0):
            raise ValueError("box must be a positive finite scalar")
        if not (math.isfinite(self.slack_weight) and self.slack_weight >= 0):
            raise ValueError("slack_weight must be >= 0")
        object.__setattr__(self, "nominal", u)
        object.__setattr__(self, "constraints", tuple(self.constraints))


@dataclass(frozen=True, eq=False)
class QpSolution:
    u_safe: np.ndarray
    slack: float
    active_set: tuple[int, ...]
    kkt_residual: float
    status: str
    iterations: int = 0


def _expanded_rows(problem: QpProblem) -> list[tuple[float, float, float]]:
    """Constraint rows followed by the four box rows, as (ax, ay, b) triples.

    Index scheme used everywhere (active sets, KKT checks): constraint rows
    come first in problem order, then +x, -x, +y, -y box rows; the slack
    nonnegativity row of the relaxed phase sits one past the box rows.
    """
    rows = [
        (float(c.normal[0]), float(c.normal[1]), float(c.bound)) for c in problem.constraints
    ]
    box = float(problem.box)
    rows += [(1.0, 0.0, box), (-1.0, 0.0, box), (0.0, 1.0, box), (0.0, -1.0, box)]
    return rows


def _feasible_start(rows, box, hx, hy):
    """A feasible point of the 2-D polytope, or None when it is empty.

    Exact vertex enumeration: box corners, row/box-edge crossings, row/row
    intersections. A nonempty compact polygon always exposes at least one
    such point; the one nearest the nominal is returned (first wins ties).
    """
    candidates = [(-box, -box), (-box, box), (box, -box), (box, box)]
    m = len(rows) - 4
    for i in range(m):
        ax, ay, b = rows[i]
        if abs(ay) > _ZERO_TOL:
            for x in (-box, box):
                candidates.append((x, (b - ax * x) / ay))
        if abs(ax) > _ZERO_TOL:
            for y in (-box, box):
                candidates.append(((b - ay * y) / ax, y))
        for j in range(i + 1, m):
            cx, cy, d = rows[j]
            det = ax * cy - ay * cx
            if abs(det) > _ZERO_TOL:
                candidates.append(((b * cy - ay * d) / det, (ax * d - b * cx) / det))
    best = None
    best_dist = math.inf
    for x, y in candidates:
        if abs(x) > box + _FEAS_TOL or abs(y) > box + _FEAS_TOL:
            continue
        if any(ax * x + ay * y > b + _FEAS_TOL for ax, ay, b in rows):
            continue
        d = (x - hx) ** 2 + (y - hy) ** 2
        if d < best_dist - _ZERO_TOL:
            best, best_dist = (x, y), d
    return best


def _project_working(hx, hy, rows, working):
    """Exact minimizer of |u - nominal| with equality on the working rows."""
    if not working:
        return hx, hy
    if len(working) == 1:
        ax, ay, b = rows[working[0]]
        t = (ax * hx + ay * hy - b) / (ax * ax + ay * ay)
        return hx - t * ax, hy - t * ay
    (a1x, a1y, b1), (a2x, a2y, b2) = rows[working[0]], rows[working[1]]
    det = a1x * a2y - a1y * a2x
    return (b1 * a2y - a1y * b2) / det, (a1x * b2 - b1 * a2x) / det


def _solve_projection(problem: QpProblem):
    """Phase 1: exact projection onto rows + box; None when rows conflict."""
    hx, hy = float(problem.nominal[0]), float(problem.nominal[1])
    box = float(problem.box)
    rows = _expanded_rows(problem)
    m = len(rows) - 4

    # Fast path: the box clip of the nominal already satisfies every row.
    # An inactive clip returns the nominal bit-exactly; an active clip is
    # the projection onto the box and a fortiori onto the region inside it.
    cx = min(max(hx, -box), box)
    cy = min(max(hy, -box), box)
    if all(ax * cx + ay * cy <= b for ax, ay, b in rows):
        active = []
        if cx != hx:
            active.append(m if hx > 0 else m + 1)
        if cy != hy:
            active.append(m + 2 if hy > 0 else m + 3)
        return (cx, cy), tuple(active), 0

    # Cheap starts first: the single-row projections of the nominal cover
    # the common one-active-constraint case without vertex enumeration.
    start = None
    for ax, ay, b in rows:
        v = ax * hx + ay * hy - b
        if v <= 0.0:
            continue
        t = v / (ax * ax + ay * ay)
        zx, zy = hx - t * ax, hy - t * ay
        if abs(zx) > box + _FEAS_TOL or abs(zy) > box + _FEAS_TOL:
            continue
        if all(cx * zx + cy * zy <= cb + _FEAS_TOL for cx, cy, cb in rows):
            start = (zx, zy)
            break
    if start is None:
        start = _feasible_start(rows, box, hx, hy)
    if start is None:
        return None
    zx, zy = start

    working: list[int] = []
    for i, (ax, ay, b) in enumerate(rows):
        if abs(ax * zx + ay * zy - b) <= _FEAS_TOL:
            if not working:
                working.append(i)
            elif len(working) == 1:
                wx, wy, _ = rows[working[0]]
                if abs(wx * ay - wy * ax) > 1e-12:
                    working.append(i)

    for it in range(1, MAX_ITER + 1):
        gx, gy = hx - zx, hy - zy
        if len(working) == 0:
            px, py = gx, gy
        elif len(working) == 1:
            ax, ay, _ = rows[working[0]]
            t = (ax * gx + ay * gy) / (ax * ax + ay * ay)
            px, py = gx - t * ax, gy - t * ay
        else:
            px, py = 0.0, 0.0

        if math.hypot(px, py) <= _ZERO_TOL * (1.0 + math.hypot(hx, hy)):
            if len(working) == 0:
                return (zx, zy), (), it
            if len(working) == 1:
                ax, ay, _ = rows[working[0]]
                lam = [(ax * gx + ay * gy) / (ax * ax + ay * ay)]
            else:
                (a1x, a1y, _), (a2x, a2y, _) = rows[working[0]], rows[working[1]]
                det = a1x * a2y - a1y * a2x
                lam = [(gx * a2y - gy * a2x) / det, (a1x * gy - a1y * gx) / det]
            worst = min(range(len(lam)), key=lambda k: (lam[k], working[k]))
            if lam[worst] >= -1e-10:
                # Re-derive the point from the final working set so active
                # rows hold with equality to machine precision.
                zx, zy = _project_working(hx, hy, rows, working)
                return (zx, zy), tuple(sorted(working)), it
            working.pop(worst)
            continue

        alpha = 1.0
        blocking = -1
        for i, (ax, ay, b) in enumerate(rows):
            if i in working:
                continue
            d = ax * px + ay * py
            if d <= 1e-14:
                continue
            ai = (b - ax * zx - ay * zy) / d
            if ai < 0.0:
                ai = 0.0
            if ai < alpha - 1e-14:  # ascending scan: lowest index enters on ties
                alpha = ai
                blocking = i
        zx += alpha * px
        zy += alpha * py
        if blocking >= 0 and alpha < 1.0:
            if len(working) == 1:
                wx, wy, _ = rows[working[0]]
                bx, by, _ = rows[blocking]
                if abs(wx * by - wy * bx) <= 1e-12:
                    working.pop(0)  # near-parallel pair: blocking row supersedes
            working.append(blocking)
    return "fallback"


def _solve_relaxed(problem: QpProblem):
    """Phase 2: shared-slack relaxation, always feasible; 3-variable active set.

    The slack variable is rescaled by sqrt(2w) so the objective becomes a
    pure Euclidean projection in three variables (identity Hessian); this
    keeps the iteration well conditioned for arbitrarily large penalties.
    """
    hx, hy = float(problem.nominal[0]), float(problem.nominal[1])
    box = float(problem.box)
    w = float(problem.slack_weight)
    m = len(problem.constraints)
    base = _expanded_rows(problem)

    ux = min(max(hx, -box), box)
    uy = min(max(hy, -box), box)
    violations = [ax * ux + ay * uy - b for ax, ay, b in base[:m]]
    s0 = max(0.0, max(violations))
    if w == 0.0:
        # Penalty-free slack absorbs every row; only the box binds the action.
        return (ux, uy, s0), (), 0

    scale = math.sqrt(2.0 * w)  # z[2] holds s * scale
    rows3 = [np.array([ax, ay, -1.0 / scale]) for ax, ay, _ in base[:m]]
    rows3 += [np.array([ax, ay, 0.0]) for ax, ay, _ in base[m:]]
    rows3.append(np.array([0.0, 0.0, -1.0]))
    bounds3 = [b for _, _, b in base] + [0.0]
    c = np.array([hx, hy, 0.0])

    z = np.array([ux, uy, s0 * scale])
    working = [int(np.argmax(violations))] if s0 > 0 else [m + 4]

    def equality_point(A, bw):
        # projection of c onto {A z = bw}: lstsq returns the minimal-norm
        # correction, which is exactly the projection step, without the
        # squared conditioning of normal equations
        correction, *_ = np.linalg.lstsq(A, bw - A @ c, rcond=None)
        return c + correction

    for it in range(1, MAX_ITER + 1):
        g = c - z
        if working:
            A = np.stack([rows3[i] for i in working])
            lam, *_ = np.linalg.lstsq(A.T, g, rcond=None)
            p = g - A.T @ lam
        else:
            lam = np.zeros(0)
            p = g

        # cancellation noise in p grows with the multiplier magnitude, so the
        # stationarity threshold must scale with it or the loop spins in place
        p_tol = 1e-11 * (1.0 + float(np.max(np.abs(c))) + float(np.max(np.abs(z)))) + 1e-12 * (
            float(np.sum(np.abs(lam))) if len(lam) else 0.0
        )
        if float(np.max(np.abs(p))) <= p_tol:
            if len(working) == 0 or float(np.min(lam)) >= -1e-10:
                A = np.stack([rows3[i] for i in working]) if working else None
                if A is not None:
                    z = equality_point(A, np.array([bounds3[i] for i in working]))
                return (float(z[0]), float(z[1]), float(z[2]) / scale), tuple(sorted(working)), it
            worst = min(range(len(working)), key=lambda i: (lam[i], working[i]))
            working.pop(worst)
            continue

        alpha = 1.0
        blocking = -1
        for i, row in enumerate(rows3):
            if i in working:
                continue
            d = float(row @ p)
            if d <= 1e-14:
                continue
            ai = (bounds3[i] - float(row @ z)) / d
            if ai < 0.0:
                ai = 0.0
            if ai < alpha - 1e-14:
                alpha = ai
                blocking = i
        z = z + alpha * p
        if blocking >= 0 and alpha < 1.0:
            working.append(blocking)
    return "fallback"


def _fallback_solution(problem: QpProblem) -> QpSolution:
    hx, hy = float(problem.nominal[0]), float(problem.nominal[1])
    box = float(problem.box)
    return QpSolution(
        u_safe=np.array([min(max(hx, -box), box), min(max(hy, -box), box)]),
        slack=0.0,
        active_set=(),
        kkt_residual=math.inf,
        status=STATUS_FALLBACK,
        iterations=MAX_ITER,
    )


def solve(problem: QpProblem) -> QpSolution:
    """Project the nominal action onto the stacked constraints.

    Returns the exact projection (status "optimal", slack 0) whenever the
    rows and box admit any action; otherwise minimizes the quadratic slack
    penalty (status "relaxed"). Status "fallback" only on iteration-cap
    exhaustion, with the box-clipped nominal as a placeholder the caller
    must replace.
    """
    result = _solve_projection(problem)
    if result == "fallback":
        return _fallback_solution(problem)
    if result is None:
        relaxed = _solve_relaxed(problem)
        if relaxed == "fallback":
            return _fallback_solution(problem)
        (ux, uy, s), active, iters = relaxed
        sol = QpSolution(
            u_safe=np.array([ux, uy]),
            slack=max(s, 0.0),
            active_set=active,
            kkt_residual=0.0,
            status=STATUS_RELAXED,
            iterations=iters,
        )
    else:
        (ux, uy), active, iters = result
        sol = QpSolution(
            u_safe=np.array([ux, uy]),
            slack=0.0,
            active_set=active,
            kkt_residual=0.0,
            status=STATUS_OPTIMAL,
            iterations=iters,
        )
    if sol.status == STATUS_OPTIMAL and sol.iterations == 0 and not sol.active_set:
        # fast path: nominal returned untouched with every row verified; the
        # gradient is exactly zero, so the certificate is zero by construction
        return sol
    object.__setattr__(sol, "kkt_residual", kkt_check(problem, sol))
    return sol


def kkt_check(problem: QpProblem, solution: QpSolution) -> float:
    """Max of the stationarity, feasibility, dual, and complementarity residuals.

    Multipliers are reconstructed from the solution's active set, so the
    residual certifies the returned point without trusting solver internals
    beyond that index set. Stationarity and complementarity are normalized
    by the multiplier scale: slack-penalty multipliers grow with the
    penalty weight, and the meaningful certificate at that scale is the
    constraint residual itself, not its product with the multiplier.
    """
    if solution.status == STATUS_FALLBACK:
        return math.inf
    ux, uy = float(solution.u_safe[0]), float(solution.u_safe[1])
    hx, hy = float(problem.nominal[0]), float(problem.nominal[1])
    base = _expanded_rows(problem)
    m = len(problem.constraints)

    if solution.status == STATUS_OPTIMAL:
        gx, gy = ux - hx, uy - hy
        primal = 0.0
        for ax, ay, b in base:
            v = ax * ux + ay * uy - b
            if v > primal:
                primal = v
        act = list(solution.active_set)
        if not act:
            return max(abs(gx), abs(gy), primal)
        normals = [(base[i][0], base[i][1]) for i in act]
        if len(act) == 1:
            (ax, ay), = normals
            lam = [-(ax * gx + ay * gy) / (ax * ax + ay * ay)]
            sx, sy = gx + lam[0] * ax, gy + lam[0] * ay
        else:
            (a1x, a1y), (a2x, a2y) = normals[0], normals[1]
            det = a1x * a2y - a1y * a2x
            if abs(det) <= _ZERO_TOL:
                return math.inf
            lam = [(-gx * a2y + gy * a2x) / det, (-a1x * gy + a1y * gx) / det]
            sx = gx + lam[0] * a1x + lam[1] * a2x
            sy = gy + lam[0] * a1y + lam[1] * a2y
        stationarity = max(abs(sx), abs(sy))
        dual = max(0.0, -min(lam))
        comp = max(
            abs(l * (base[i][2] - base[i][0] * ux - base[i][1] * uy)) for l, i in zip(lam, act)
        )
        return max(stationarity, primal, dual, comp)

    # Relaxed phase: variables (u, s), gradient (u - nominal, 2*w*s).
    w = float(problem.slack_weight)
    s = float(solution.slack)
    z = np.array([ux, uy, s])
    grad = np.array([ux - hx, uy - hy, 2.0 * w * s])
    rows3 = [np.array([ax, ay, -1.0]) for ax, ay, _ in base[:m]]
    rows3 += [np.array([ax, ay, 0.0]) for ax, ay, _ in base[m:]]
    rows3.append(np.array([0.0, 0.0, -1.0]))
    bounds3 = [b for _, _, b in base] + [0.0]
    primal = max([0.0] + [float(r @ z) - b for r, b in zip(rows3, bounds3)])
    act = list(solution.active_set)
    if not act:
        return max(float(np.max(np.abs(grad))), primal)
    A = np.stack([rows3[i] for i in act], axis=1)
    lam, *_ = np.linalg.lstsq(A, -grad, rcond=None)
    denom = 1.0 + float(np.max(np.abs(lam)))
    stationarity = float(np.max(np.abs(grad + A @ lam))) / denom
    dual = max(0.0, float(-np.min(lam)))
    comp = max(abs(float(l) * (bounds3[i] - float(rows3[i] @ z))) for l, i in zip(lam, act)) / denom
    return max(stationarity, primal, dual, comp)
