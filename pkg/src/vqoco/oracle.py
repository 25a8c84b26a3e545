"""Offline hindsight solvers used as comparators for the online runs.

``best_fixed_common_subset`` minimizes the realized time-average objective
over points satisfying every realized constraint; ``best_fixed_expected``
does the same with expected objective and constraints (i.i.d. families).

Both reduce to ``min phi(x)`` over ``x in X, A x <= b + tol``: on one- and
two-dimensional sets by exhaustive grid search, otherwise by a switching
projected-subgradient method followed by a feasibility pull toward an
interior point and a grid certificate on random planes through the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import InputError
from .geometry import grid_points
from .streams import Affine, AbsSum, Quadratic, generate_slot

GRID_FRACTION = 1e-3
SUBGRADIENT_ITERS = 100_000


@dataclass
class HindsightSolution:
    x_star: np.ndarray
    objective_avg: float
    feasibility_residual: float
    method: str
    tolerance: float
    feasible: bool
    objective_tolerance: float = 0.0  # optimality slack implied by the search resolution
    f_star: float = None
    expectation: str = None
    certificate_gap: float = None

    def to_dict(self):
        return {
            "x_star": np.asarray(self.x_star).tolist(),
            "objective_avg": self.objective_avg,
            "feasibility_residual": self.feasibility_residual,
            "method": self.method,
            "tolerance": self.tolerance,
            "feasible": self.feasible,
            "objective_tolerance": self.objective_tolerance,
            "f_star": self.f_star,
            "expectation": self.expectation,
            "certificate_gap": self.certificate_gap,
        }


class AveragedObjective:
    """Average of many quadratic / linear / l1 objectives, evaluated in closed form.

    Quadratics and linear terms collapse to a single quadratic; l1 terms are
    evaluated per coordinate from sorted centers and prefix sums.
    """

    def __init__(self, n):
        self.n = n
        self.count = 0
        self.quad_w = 0.0
        self.quad_wc = np.zeros(n)
        self.quad_wcc = 0.0
        self.lin = np.zeros(n)
        self.const = 0.0
        self._abs = []
        self._abs_sorted = None

    def add(self, fn, weight=1.0):
        self.count += weight
        if isinstance(fn, Quadratic):
            w = weight * fn.scale
            self.quad_w += w
            self.quad_wc += w * fn.center
            self.quad_wcc += w * float(fn.center @ fn.center)
        elif isinstance(fn, Affine):
            self.lin += weight * fn.a
            self.const -= weight * fn.b
        elif isinstance(fn, AbsSum):
            self._abs.append((weight * fn.scale, fn.center))
            self._abs_sorted = None
        else:
            raise InputError(f"cannot aggregate objective of type {type(fn).__name__}")

    def add_constant(self, value, weight=1.0):
        self.const += weight * value

    def _prepare_abs(self):
        if self._abs_sorted is None and self._abs:
            w = np.array([a[0] for a in self._abs])
            C = np.array([a[1] for a in self._abs])
            cols = []
            for j in range(self.n):
                order = np.argsort(C[:, j], kind="stable")
                c, ww = C[order, j], w[order]
                cols.append((c, np.concatenate([[0.0], np.cumsum(ww)]),
                             np.concatenate([[0.0], np.cumsum(ww * c)])))
            self._abs_sorted = cols
        return self._abs_sorted

    def total(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = (
            self.quad_w * np.sum(X * X, axis=1)
            - 2.0 * X @ self.quad_wc
            + self.quad_wcc
            + X @ self.lin
            + self.const
        )
        for j, (c, cw, cwc) in enumerate(self._prepare_abs() or ()):
            x = X[:, j]
            idx = np.searchsorted(c, x, side="right")
            w_left, s_left = cw[idx], cwc[idx]
            w_right, s_right = cw[-1] - w_left, cwc[-1] - s_left
            out = out + (x * w_left - s_left) + (s_right - x * w_right)
        return out

    def value(self, X):
        """Average value; shape (m,) for a batch, scalar for one point."""
        X = np.asarray(X, dtype=float)
        v = self.total(X) / self.count
        return float(v[0]) if X.ndim == 1 else v

    def subgradient(self, x):
        x = np.asarray(x, dtype=float)
        g = 2.0 * (self.quad_w * x - self.quad_wc) + self.lin
        for j, (c, cw, _) in enumerate(self._prepare_abs() or ()):
            lo = np.searchsorted(c, x[j], side="left")
            hi = np.searchsorted(c, x[j], side="right")
            g[j] += cw[lo] - (cw[-1] - cw[hi])
        return g / self.count


def reduce_halfspaces(A, b, interior=None):
    """Drop duplicate and (when an interior point is known) redundant rows of ``A x <= b``."""
    A, b = np.atleast_2d(A), np.asarray(b, dtype=float)
    if A.shape[0] == 0:
        return A, b
    rows, idx = np.unique(np.column_stack([A, b]), axis=0, return_index=True)
    A, b = rows[:, :-1], rows[:, -1]
    # constant rows (a = 0) never cut anything unless -b > 0
    nonzero = np.any(A != 0, axis=1)
    A_c, b_c = A[~nonzero], b[~nonzero]
    A, b = A[nonzero], b[nonzero]
    if interior is not None and A.shape[0] > 32:
        slack = b - A @ interior
        if np.all(slack > 0):
            dual = A / slack[:, None]
            if A.shape[1] == 1:
                keep = np.unique([int(np.argmax(dual[:, 0])), int(np.argmin(dual[:, 0]))])
            else:
                try:
                    hull = ConvexHull(np.vstack([dual, np.zeros(A.shape[1])]))
                    keep = np.array([v for v in hull.vertices if v < A.shape[0]], dtype=int)
                except QhullError:
                    keep = np.arange(A.shape[0])
            A, b = A[keep], b[keep]
    bad_const = b_c < 0
    if np.any(bad_const):
        A = np.vstack([A, A_c[bad_const]])
        b = np.concatenate([b, b_c[bad_const]])
    return A, b


def _violation(A, b, X):
    X = np.atleast_2d(X)
    if A.shape[0] == 0:
        return np.zeros(X.shape[0])
    out = np.empty(X.shape[0])
    for s in range(0, X.shape[0], 200_000):
        out[s:s + 200_000] = np.max(X[s:s + 200_000] @ A.T - b, axis=1)
    return out


def _lipschitz(objective, dset, x):
    pts = np.vstack([dset.extreme_points(), x[None, :], dset.witness[None, :]])
    return max(float(np.linalg.norm(objective.subgradient(p))) for p in pts)


def _grid_search(objective, A, b, dset, tol):
    spacing = GRID_FRACTION * max(dset.diameter, 1e-12)
    pts = grid_points(dset, spacing)
    viol = _violation(A, b, pts)
    vals = objective.value(pts)
    feasible = viol <= tol
    if np.any(feasible):
        j = int(np.flatnonzero(feasible)[np.argmin(vals[feasible])])
        ok = True
    else:
        j = int(np.argmin(viol))
        ok = False
    x = pts[j]
    obj_tol = _lipschitz(objective, dset, x) * spacing * math.sqrt(dset.dimension)
    return x, ok, "grid", obj_tol


def _pull_to_feasible(x, A, b, interior, tol):
    """Bisect along the segment toward ``interior`` until ``A x <= b + tol``."""
    if _violation(A, b, x)[0] <= tol:
        return x
    lo, hi = 0.0, 1.0  # fraction moved toward the interior point
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _violation(A, b, (1 - mid) * x + mid * interior)[0] <= tol:
            hi = mid
        else:
            lo = mid
    return (1 - hi) * x + hi * interior


def _subgradient_search(objective, A, b, dset, tol, interior, iters=SUBGRADIENT_ITERS):
    """Switching subgradient method: constraint step when infeasible, objective step otherwise."""
    x = dset.witness if interior is None else np.array(interior, dtype=float)
    D = max(dset.diameter, 1e-12)
    best, best_val = None, np.inf
    for j in range(1, iters + 1):
        viol = A @ x - b if A.shape[0] else np.zeros(0)
        if viol.size and viol.max() > tol:
            g = A[int(np.argmax(viol))]
        else:
            val = objective.value(x)
            if val < best_val:
                best, best_val = x.copy(), val
            g = objective.subgradient(x)
        norm = float(np.linalg.norm(g))
        if norm == 0.0:
            if best is not None and np.array_equal(best, x):
                break
            continue
        x = dset.project(x - (D / math.sqrt(j)) * g / norm)
    if best is None:
        best = x
    if interior is not None:
        best = _pull_to_feasible(best, A, b, np.asarray(interior, dtype=float), tol)
    ok = _violation(A, b, best)[0] <= tol
    return best, ok, "offline-subgradient", 0.0


def certify_on_planes(objective, A, b, dset, x, tol, planes=4, points=201, seed=0):
    """Largest improvement over ``x`` found on feasible grids of random 2D planes through ``x``."""
    rng = np.random.default_rng(seed)
    n, D = dset.dimension, dset.diameter
    base = objective.value(x)
    gap = 0.0
    axis = np.linspace(-D, D, points)
    u_grid, v_grid = np.meshgrid(axis, axis, indexing="ij")
    for _ in range(planes):
        Q, _ = np.linalg.qr(rng.standard_normal((n, 2)))
        pts = x + u_grid.reshape(-1, 1) * Q[:, 0] + v_grid.reshape(-1, 1) * Q[:, 1]
        pts = pts[dset.contains_many(pts, 1e-12)]
        pts = pts[_violation(A, b, pts) <= tol]
        if pts.shape[0]:
            gap = max(gap, base - float(np.min(objective.value(pts))))
    return gap


def minimize(objective, A, b, dset, tol, interior=None):
    """``min objective(x)`` over ``x in dset`` with ``A x <= b + tol``; returns a solution record."""
    A, b = reduce_halfspaces(A, b, interior)
    if dset.dimension <= 2:
        x, ok, method, obj_tol = _grid_search(objective, A, b, dset, tol)
        cert = None
    else:
        x, ok, method, obj_tol = _subgradient_search(objective, A, b, dset, tol, interior)
        cert = certify_on_planes(objective, A, b, dset, x, tol)
        obj_tol = max(obj_tol, cert)
    return HindsightSolution(
        x_star=x,
        objective_avg=float(objective.value(x)),
        feasibility_residual=float(_violation(A, b, x)[0]) if A.shape[0] else 0.0,
        method=method,
        tolerance=tol,
        feasible=bool(ok),
        objective_tolerance=obj_tol,
        certificate_gap=cert,
    )


def _interior_point(spec, dset):
    return spec.slater_point if spec.has_slater else None


def best_fixed_common_subset(spec, dset, T, tol=1e-9):
    """Best fixed decision over slots ``0..T-1`` among points meeting every realized constraint."""
    if not 1 <= T <= spec.horizon:
        raise InputError(f"T must lie in [1, {spec.horizon}]")
    objective = AveragedObjective(spec.dimension)
    A_rows, b_rows = [], []
    for t in range(T):
        slot = generate_slot(spec, t)
        objective.add(slot.objective)
        for g in slot.constraints:
            A_rows.append(g.a)
            b_rows.append(g.b)
    A = np.array(A_rows).reshape(-1, spec.dimension)
    b = np.array(b_rows, dtype=float)
    return minimize(objective, A, b, dset, tol, _interior_point(spec, dset))


# -- expected-value oracle ---------------------------------------------------


def _uniform_abs_mean(x, lo, hi):
    """``E|x - U|`` for ``U ~ Uniform[lo, hi]`` (elementwise)."""
    x, lo, hi = np.broadcast_arrays(np.asarray(x, float), np.asarray(lo, float), np.asarray(hi, float))
    width = hi - lo
    mid = 0.5 * (lo + hi)
    outside = np.abs(x - mid)
    with np.errstate(divide="ignore", invalid="ignore"):
        inside = ((x - lo) ** 2 + (hi - x) ** 2) / (2.0 * width)
    return np.where((width > 0) & (x > lo) & (x < hi), inside, outside)


class ExpectedObjective:
    """Average over a schedule of expected objectives with uniform centers.

    Each term is ``scale * E f(x, c)`` with ``c ~ Uniform[lo, hi]`` per coordinate.
    """

    def __init__(self, kind, scale, lows, highs):
        self.kind, self.scale = kind, scale
        self.lows, self.highs = np.atleast_2d(lows), np.atleast_2d(highs)
        self.mids = 0.5 * (self.lows + self.highs)
        self.var = float(np.mean(np.sum((self.highs - self.lows) ** 2, axis=1))) / 12.0
        self.mean_mid = self.mids.mean(axis=0)

    def value(self, X):
        X = np.asarray(X, dtype=float)
        P = np.atleast_2d(X)
        if self.kind == "quadratic":
            sq = np.mean(np.sum(self.mids**2, axis=1))
            v = self.scale * (np.sum(P * P, axis=1) - 2.0 * P @ self.mean_mid + sq + self.var)
        elif self.kind == "linear":
            v = self.scale * (P @ self.mean_mid)
        else:
            v = np.zeros(P.shape[0])
            for lo, hi in zip(self.lows, self.highs):
                v += np.sum(_uniform_abs_mean(P, lo, hi), axis=1)
            v = self.scale * v / self.lows.shape[0]
        return float(v[0]) if X.ndim == 1 else v

    def subgradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return 2.0 * self.scale * (x - self.mean_mid)
        if self.kind == "linear":
            return self.scale * self.mean_mid
        g = np.zeros_like(x)
        for lo, hi in zip(self.lows, self.highs):
            width = hi - lo
            with np.errstate(divide="ignore", invalid="ignore"):
                inside = (2.0 * x - lo - hi) / width
            g += np.where((width > 0) & (x > lo) & (x < hi), inside, np.sign(x - 0.5 * (lo + hi)))
        return self.scale * g / self.lows.shape[0]


def expected_objective(spec, T=None):
    obj = spec.objective
    if spec.family == "model2-fully-iid":
        return ExpectedObjective(obj.kind, obj.scale, obj.center_low, obj.center_high)
    T = T or spec.horizon or obj.centers.shape[0]
    centers = obj.centers[np.arange(T) % obj.centers.shape[0]]
    spread = obj.center_spread
    return ExpectedObjective(obj.kind, obj.scale, centers - spread, centers + spread)


def expected_constraints(spec):
    """``E g_i(x) = a_i^T x - b_i``: every perturbation in the built-in families has mean zero."""
    return spec._a_base.copy(), spec._b_base.copy()


def best_fixed_expected(spec, dset, mc_slots=None, seed=None, tol=None):
    """Best fixed decision for expected objective/constraints.

    With ``mc_slots`` the expectations are estimated from that many fresh
    slots (drawn with a seed independent of the run's); otherwise the
    closed forms of the built-in families are used.  Feasibility tolerance
    defaults to 1e-9 (closed form) or three standard errors of the
    constraint estimate (Monte Carlo).
    """
    if not spec.stochastic:
        raise InputError("best_fixed_expected needs a model1 or model2 family")
    interior = _interior_point(spec, dset)
    if mc_slots is None:
        objective = expected_objective(spec)
        A, b = expected_constraints(spec)
        sol = minimize(objective, A, b, dset, 1e-9 if tol is None else tol, interior)
        sol.expectation = "closed-form"
    else:
        if mc_slots < 2:
            raise InputError("mc_slots must be >= 2")
        fresh = replace(spec, horizon=mc_slots, seed=(spec.seed + 1) * 1_000_003 if seed is None else seed)
        objective = AveragedObjective(spec.dimension)
        A_sum = np.zeros((spec.k, spec.dimension))
        b_sum = np.zeros(spec.k)
        if spec.family == "model1-iid-constraints":
            # the objective schedule is not random: average it over the run horizon
            sched = replace(spec, horizon=max(spec.horizon, 1))
            for t in range(sched.horizon):
                objective.add(generate_slot(sched, t).objective)
        for t in range(mc_slots):
            slot = generate_slot(fresh, t)
            if spec.family == "model2-fully-iid":
                objective.add(slot.objective)
            for i, g in enumerate(slot.constraints):
                A_sum[i] += g.a
                b_sum[i] += g.b
        A, b = A_sum / mc_slots, b_sum / mc_slots
        if tol is None:
            tol = _mc_constraint_tolerance(fresh, dset, A, b, mc_slots)
        sol = minimize(objective, A, b, dset, tol, interior)
        sol.expectation = "monte-carlo"
    if spec.family == "model2-fully-iid":
        sol.f_star = sol.objective_avg
    return sol


def _mc_constraint_tolerance(fresh, dset, A, b, mc_slots, probes=64):
    """Three standard errors of the constraint mean, maximized over probe points."""
    if fresh.k == 0:
        return 1e-9
    pts = np.vstack([dset.extreme_points(), [dset.sample((fresh.seed, j)) for j in range(probes)]])
    n_use = min(mc_slots, 5000)
    vals = np.empty((n_use, pts.shape[0], fresh.k))
    for t in range(n_use):
        vals[t] = generate_slot(fresh, t).constraint_values(pts)
    se = vals.std(axis=0, ddof=1) / math.sqrt(mc_slots)
    return max(3.0 * float(se.max()), 1e-9)
