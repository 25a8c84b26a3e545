"""Check a run trace against the pathwise lemmas and the performance envelopes.

Selectors:

``t1``  objective gap vs the hindsight comparator, every prefix ``T``
``t2``  queue-norm bound, every slot
``t3``  time-average constraint bound, every prefix ``T``
``lemmas``  drift, virtual-queue, drift-plus-penalty, strong-convexity and
    queue-step checks (per frame for doubling traces)
``doubling``  cumulative regret ``<= beta sqrt(T)``
``zinkevich``  average regret ``<= c * step`` for ``T >= 1/step^2``

Pathwise inequalities use the slack ``1e-8 * (1 + |rhs|)``; the reported
margin for those checks is ``(lhs - rhs) / (1 + |rhs|)``.  Verification never
modifies the trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .. import bounds
from ..errors import ConfigError
from ..oracle import best_fixed_common_subset
from ..solver import AlgorithmParams
from ..streams import generate_slot
from .config import parse_config

LEMMA_TOL = 1e-8
THEOREM_TOL = 1e-6
QUEUE_TOL = 1e-8
STEP_TOL = 1e-10
GROWTH_BETAS = (0.5, 1.0, "V")
DPP_POINTS = 50

SELECTORS = ("t1", "t2", "t3", "lemmas", "doubling", "zinkevich")


@dataclass
class CheckResult:
    name: str
    inequality: str
    checked: int
    max_violation: float
    tolerance: float
    worst_at: int = None
    trials: int = None
    mean: float = None
    se: float = None
    note: str = ""

    @property
    def passed(self):
        return bool(self.max_violation <= self.tolerance)

    def to_dict(self):
        d = {
            "name": self.name,
            "inequality": self.inequality,
            "checked": self.checked,
            "max_violation": self.max_violation,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "worst_at": self.worst_at,
        }
        if self.trials is not None:
            d.update(trials=self.trials, mean=self.mean, se=self.se)
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def get(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks], "notes": list(self.notes)}


def _worst(margins, offset=0):
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        return -math.inf, None
    j = int(np.argmax(margins))
    return float(margins.flat[j]), j + offset


def _scaled(lhs, rhs):
    return (lhs - rhs) / (1.0 + np.abs(rhs))


@dataclass(frozen=True)
class _Segment:
    start: int
    length: int
    params: AlgorithmParams


class _Context:
    """Everything the checks need, rebuilt from the trace's own metadata."""

    def __init__(self, trace, constants, comparator):
        meta = trace.metadata
        if "config" not in meta:
            raise ConfigError("trace metadata carries no config", path="meta.config")
        self.trace = trace
        self.config = parse_config(meta["config"])
        self.constants = constants or self.config.constants
        self.variant = meta.get("variant", self.config.variant)
        self.N = len(trace.records)
        self.spec = replace(self.config.spec, horizon=max(self.N, self.config.spec.horizon))
        self.dset = self.config.dset
        self.k = self.spec.k
        self._slots = {}
        self._comparator = comparator
        self.segments = [
            _Segment(int(fr["start"]), int(fr["length"]),
                     AlgorithmParams(V=fr["V"], alpha=fr["alpha"], k=self.k))
            for fr in meta.get("frames", [])
        ]

    def slot(self, t):
        if t not in self._slots:
            self._slots[t] = generate_slot(self.spec, t)
        return self._slots[t]

    def single_params(self, name):
        if self.variant != "dpp" or len(self.segments) != 1:
            raise ConfigError(f"{name} needs a single-frame dpp trace", path="meta.variant")
        return self.segments[0].params

    def comparator(self, drop_constraints=False):
        if self._comparator is not None:
            return np.asarray(self._comparator, dtype=float), None
        spec = replace(self.spec, constraints=()) if drop_constraints else self.spec
        sol = best_fixed_common_subset(spec, self.dset, self.N)
        return (sol.x_star if sol.feasible else None), sol

    def comparator_costs(self, x):
        """``sum_{t<T} f_t(x)`` for every ``T = 1..N``."""
        vals = np.array([float(self.slot(t).objective.value(x)) for t in range(self.N)])
        return np.cumsum(vals)


# -- theorem checks -----------------------------------------------------------


def check_t1(ctx):
    params = ctx.single_params("t1")
    c = ctx.constants
    x, sol = ctx.comparator()
    note = "comparator is the oracle's single best point of the common subset"
    if x is None:
        return CheckResult("t1", "avg f gap <= B/V + VG^2/(2a) + aD^2/(VT)", 0, -math.inf, THEOREM_TOL,
                           note="common subset empty at the oracle tolerance; the bound is vacuous")
    T = np.arange(1, ctx.N + 1)
    gap = (ctx.trace.f_sum - ctx.comparator_costs(x)) / T
    env = bounds.envelope_theorem1(c, params.V, params.alpha, T)
    worst, at = _worst(gap - env, 1)
    if sol is not None and sol.objective_tolerance:
        note += f" (oracle objective tolerance {sol.objective_tolerance:.3g})"
    return CheckResult("t1", "avg f gap <= B/V + VG^2/(2a) + aD^2/(VT)", ctx.N, worst, THEOREM_TOL, at, note=note)


def check_t2(ctx):
    params = ctx.single_params("t2")
    bound = bounds.envelope_theorem2(ctx.constants, params.V, params.alpha)
    q = np.array([np.linalg.norm(r.q) for r in ctx.trace.records])
    q_next = np.array([np.linalg.norm(r.q_next) for r in ctx.trace.records])
    worst, at = _worst(np.maximum(q, q_next) - bound)
    return CheckResult("t2", "||Q(t)|| <= theta V", ctx.N, worst, QUEUE_TOL, at,
                       note=f"theta V = {bound:.17g}")


def check_t3(ctx):
    params = ctx.single_params("t3")
    if params.alpha != float(params.V) ** 2:
        raise ConfigError(f"t3 needs alpha = V^2, got V={params.V}, alpha={params.alpha}", path="solver.alpha")
    if ctx.k == 0:
        return CheckResult("t3", "avg g_i <= envelope_theorem3(T)", 0, -math.inf, THEOREM_TOL, note="no constraints")
    T = np.arange(1, ctx.N + 1)
    env = np.array([bounds.envelope_theorem3(ctx.constants, params.V, int(t)) for t in T])
    avg = ctx.trace.g_sum / T[:, None]
    worst, at = _worst(np.max(avg - env[:, None], axis=1), 1)
    return CheckResult("t3", "avg g_i <= envelope_theorem3(T)", ctx.N, worst, THEOREM_TOL, at)


# -- pathwise lemma checks ----------------------------------------------------


def _point_pool(ctx, size=500):
    pts = [ctx.dset.sample((7919, j)) for j in range(size)]
    return np.vstack([np.array(pts), ctx.dset.extreme_points()])


def check_lemmas(ctx, max_slots=None):
    """Per-slot lemma checks over every frame of a dpp or doubling trace."""
    if ctx.variant not in ("dpp", "dpp-doubling"):
        raise ConfigError(f"lemma checks need a dpp trace, got {ctx.variant!r}", path="meta.variant")
    c = ctx.constants
    B = bounds.constant_B(c)
    delta = bounds.constant_delta(c)
    recs = ctx.trace.records
    pool = _point_pool(ctx)
    rng = np.random.default_rng(np.random.SeedSequence([20240917, ctx.N]))

    drift, dpp, strong, step = [], [], [], []
    betas = {}
    growth = {}
    for seg in ctx.segments:
        p = seg.params
        lo, hi = seg.start, seg.start + seg.length
        for t in range(lo, hi):
            r = recs[t]
            drift.append((_scaled(r.drift, B + float(r.q @ r.lin)), t))
            step.append((float(np.linalg.norm(r.q_next) - np.linalg.norm(r.q)) - delta, t))
            if t == lo or (max_slots is not None and t >= max_slots):
                continue
            prev = ctx.slot(t - 1)
            xp = recs[t - 1].x
            ys = pool[rng.integers(pool.shape[0], size=DPP_POINTS)]
            # drift-plus-penalty
            lhs = r.drift + 0.5 * p.alpha * r.step_sq
            gy = prev.constraint_values(ys) @ r.q if ctx.k else 0.0
            rhs = (B + p.V * prev.objective.value(ys) - p.V * float(prev.objective.value(xp))
                   + p.alpha * np.sum((ys - xp) ** 2, axis=1) - p.alpha * np.sum((ys - r.x) ** 2, axis=1)
                   + gy + p.V**2 * c.G**2 / (2.0 * p.alpha))
            dpp.append((float(np.max(_scaled(lhs, rhs))), t))
            # strong convexity of the per-slot expression
            W = p.V * prev.objective.subgradient(xp)
            if ctx.k:
                W = W + r.q @ prev.constraint_subgradients(xp)
            expr_x = float(r.x @ W + p.alpha * np.sum((r.x - xp) ** 2))
            expr_y = ys @ W + p.alpha * np.sum((ys - xp) ** 2, axis=1) - p.alpha * np.sum((ys - r.x) ** 2, axis=1)
            strong.append((float(np.max(_scaled(expr_x, expr_y))), t))
        # virtual-queue inequality, prefixes T = 1..L-1 of this frame
        L = seg.length
        if ctx.k and L > 1:
            g = np.array([recs[t].g for t in range(lo, hi)])
            sq = np.array([recs[t].step_sq for t in range(lo, hi)])
            q_next = np.array([recs[t].q_next for t in range(lo, hi)])
            T = np.arange(1, L)
            lhs = np.cumsum(g, axis=0)[:-1] / T[:, None]
            move = np.cumsum(sq)[1:]
            for b in GROWTH_BETAS:
                beta = p.V if b == "V" else b
                rhs = q_next[1:] / T[:, None] + c.G**2 / (4.0 * beta) + (beta * move / T)[:, None]
                m = np.max(_scaled(lhs, rhs), axis=1)
                j = int(np.argmax(m))
                best = growth.get(b, (-math.inf, None))
                if m[j] > best[0]:
                    growth[b] = (float(m[j]), lo + j + 1)
                betas[b] = betas.get(b, 0) + (L - 1)

    def result(name, ineq, items, tol):
        if not items:
            return CheckResult(name, ineq, 0, -math.inf, tol)
        j = max(range(len(items)), key=lambda i: items[i][0])
        return CheckResult(name, ineq, len(items), float(items[j][0]), tol, items[j][1])

    out = [
        result("drift", "drift <= B + sum_i Q_i(t) lin_i(t)", drift, LEMMA_TOL),
        result("drift_plus_penalty", "drift + a/2 ||dX||^2 <= dpp bound at 50 random y", dpp, LEMMA_TOL),
        result("strong_convexity", "expr(X_t) <= expr(y) - a||y - X_t||^2", strong, LEMMA_TOL),
        result("queue_step", "||Q(t+1)|| - ||Q(t)|| <= delta", step, STEP_TOL),
    ]
    for b in GROWTH_BETAS:
        name = f"queue_growth_beta_{b}"
        ineq = "avg g_i <= Q_i(T+1)/T + G^2/(4b) + (b/T) sum ||dX||^2"
        if b in growth:
            out.append(CheckResult(name, ineq, betas[b], growth[b][0], LEMMA_TOL, growth[b][1]))
        else:
            out.append(CheckResult(name, ineq, 0, -math.inf, LEMMA_TOL))
    return out


# -- regret-style checks ------------------------------------------------------


def check_doubling(ctx):
    if ctx.variant != "dpp-doubling":
        raise ConfigError("doubling check needs a dpp-doubling trace", path="meta.variant")
    beta = bounds.doubling_beta(ctx.constants)
    x, _ = ctx.comparator()
    if x is None:
        return CheckResult("doubling", "regret(T) <= beta sqrt(T)", 0, -math.inf, LEMMA_TOL,
                           note="common subset empty; bound is vacuous")
    T = np.arange(1, ctx.N + 1)
    regret = ctx.trace.f_sum - ctx.comparator_costs(x)
    rhs = beta * np.sqrt(T)
    worst, at = _worst(_scaled(regret, rhs), 1)
    return CheckResult("doubling", "regret(T) <= beta sqrt(T)", ctx.N, worst, LEMMA_TOL, at,
                       note=f"beta = {beta:.17g}")


def check_zinkevich(ctx):
    if ctx.variant != "zinkevich":
        raise ConfigError("zinkevich check needs a zinkevich trace", path="meta.variant")
    step = float(ctx.trace.metadata["step"])
    cz = bounds.zinkevich_constant(ctx.constants)
    x, _ = ctx.comparator(drop_constraints=True)
    T0 = math.ceil(1.0 / step**2 - 1e-9)
    T = np.arange(1, ctx.N + 1)
    gap = (ctx.trace.f_sum - ctx.comparator_costs(x)) / T
    sel = T >= T0
    worst, at = _worst(gap[sel] - cz * step, T0)
    note = f"c = {cz:.17g}, checked T >= {T0}"
    return CheckResult("zinkevich", "avg f gap <= c * step", int(sel.sum()), worst, THEOREM_TOL, at, note=note)


def parse_selectors(text):
    items = [s.strip() for s in text.split(",") if s.strip()]
    for s in items:
        if s not in SELECTORS + ("all",):
            raise ConfigError(f"unknown selector {s!r}; expected {SELECTORS} or all", path="--theorems")
    return items


def default_selectors(ctx):
    if ctx.variant == "zinkevich":
        return ["zinkevich"]
    if ctx.variant == "dpp-doubling":
        return ["lemmas", "doubling"]
    sel = ["t1", "lemmas"]
    V, alpha = ctx.segments[0].params.V, ctx.segments[0].params.alpha
    if ctx.constants.eta is not None and float(V).is_integer():
        sel.append("t2")
        if alpha == float(V) ** 2:
            sel.append("t3")
    return sel


def verify(trace, constants=None, which=("all",), comparator=None, lemma_slots=None):
    """Run the selected checks and return a :class:`VerificationReport`.

    ``constants`` defaults to the ones in the trace's config; ``comparator``
    overrides the oracle's hindsight point.
    """
    ctx = _Context(trace, constants, comparator)
    which = list(which)
    if "all" in which:
        which = default_selectors(ctx)
    report = VerificationReport()
    dispatch = {"t1": check_t1, "t2": check_t2, "t3": check_t3,
                "doubling": check_doubling, "zinkevich": check_zinkevich}
    for sel in which:
        if sel == "lemmas":
            report.checks.extend(check_lemmas(ctx, lemma_slots))
        elif sel in dispatch:
            report.checks.append(dispatch[sel](ctx))
        else:
            raise ConfigError(f"unknown selector {sel!r}", path="--theorems")
    if "t1" in which:
        report.notes.append("t1 tests one hindsight point, not every point of the common subset")
    return report
