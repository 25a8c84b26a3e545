"""Per-slot objective and constraint functions.

A :class:`ScenarioSpec` describes a stream of slots.  ``generate_slot(spec, t)``
is a pure function of ``(spec, t)``: every random draw for slot ``t`` comes
from a generator seeded by ``(seed, t)``, so any slot can be
regenerated on its own and distinct slots are independent.

Built-in families
-----------------
``time-invariant-constraints``
    ``g_i(x) = a_i^T x - b_i`` fixed for all slots.
``adversarial-common-subset``
    ``a_{t,i} = a_i + a_spread * U[-1,1]^n`` and ``b_{t,i} = b_i + b_spread * U[-1,1]``,
    with ``b_{t,i}`` raised to ``a_{t,i}^T s + eta`` whenever Slater data is
    declared, so the witness ``s`` keeps a margin ``eta`` on every slot.
``model1-iid-constraints``
    Same draws as above without the Slater adjustment; objective centers
    follow a deterministic periodic schedule.
``model2-fully-iid``
    One uniform draw ``u ~ U[0,1]^n`` per slot drives both the objective
    center ``low + (high - low) * u`` and the constraint offsets
    ``b_{t,i} = b_i + b_spread_i * (2 u[i mod n] - 1)``.

Objectives are ``scale * ||x - c||^2`` (``quadratic``), ``scale * ||x - c||_1``
(``abs``) or ``scale * c^T x`` (``linear``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

FAMILIES = (
    "time-invariant-constraints",
    "adversarial-common-subset",
    "model1-iid-constraints",
    "model2-fully-iid",
)
STOCHASTIC_FAMILIES = ("model1-iid-constraints", "model2-fully-iid")
OBJECTIVE_KINDS = ("quadratic", "abs", "linear")



def slot_rng(seed, t):
    """Generator for one slot's draws; a pure function of its arguments."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(t)]))


# -- function objects --------------------------------------------------------
# All accept a single point of shape (n,) or a batch of shape (m, n).


@dataclass(frozen=True, eq=False)
class Affine:
    """``a^T x - b``."""

    a: np.ndarray
    b: float
    kind = "affine"

    def value(self, x):
        return np.asarray(x) @ self.a - self.b

    def subgradient(self, x):
        x = np.asarray(x)
        if x.ndim == 1:
            return self.a
        return np.broadcast_to(self.a, x.shape).copy()

    def params(self):
        return ("affine", tuple(self.a.tolist()), float(self.b))


@dataclass(frozen=True, eq=False)
class Quadratic:
    """``scale * ||x - center||^2``."""

    center: np.ndarray
    scale: float = 1.0
    kind = "quadratic"

    def value(self, x):
        d = np.asarray(x) - self.center
        if d.ndim == 1:
            return self.scale * float(d @ d)
        return self.scale * np.sum(d * d, axis=-1)

    def subgradient(self, x):
        return 2.0 * self.scale * (np.asarray(x) - self.center)

    def params(self):
        return ("quadratic", tuple(self.center.tolist()), float(self.scale))


@dataclass(frozen=True, eq=False)
class AbsSum:
    """``scale * ||x - center||_1``; the subgradient is 0 on tied coordinates."""

    center: np.ndarray
    scale: float = 1.0
    kind = "abs"

    def value(self, x):
        return self.scale * np.sum(np.abs(np.asarray(x) - self.center), axis=-1)

    def subgradient(self, x):
        return self.scale * np.sign(np.asarray(x) - self.center)

    def params(self):
        return ("abs", tuple(self.center.tolist()), float(self.scale))


def make_objective(kind, center, scale):
    if kind == "quadratic":
        return Quadratic(center, scale)
    if kind == "abs":
        return AbsSum(center, scale)
    if kind == "linear":
        return Affine(scale * center, 0.0)
    raise InputError(f"unknown objective kind {kind!r}")


@dataclass(frozen=True, eq=False)
class SlotFunctions:
    """One slot's objective and its affine constraints ``A x - b``."""

    objective: object
    A: np.ndarray  # (k, n)
    b: np.ndarray  # (k,)
    slot_index: int

    @classmethod
    def from_constraints(cls, objective, constraints, slot_index, n):
        A = np.array([g.a for g in constraints], dtype=float).reshape(len(constraints), n)
        b = np.array([g.b for g in constraints], dtype=float)
        return cls(objective, A, b, slot_index)

    @property
    def k(self):
        return self.b.shape[0]

    @property
    def constraints(self):
        return tuple(Affine(self.A[i], float(self.b[i])) for i in range(self.k))

    def constraint_values(self, x):
        """Shape (k,) for one point, (m, k) for a batch."""
        return np.asarray(x, dtype=float) @ self.A.T - self.b

    def constraint_subgradients(self, x):
        """Shape (k, n); constant for affine constraints."""
        return self.A

    def params(self):
        return (self.slot_index, self.objective.params(), tuple(g.params() for g in self.constraints))


# -- scenario description ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    kind: str = "quadratic"
    scale: float = 1.0
    centers: np.ndarray = None  # (p, n) periodic schedule for non-model2 families
    center_spread: float = 0.0
    center_low: np.ndarray = None  # model2 only
    center_high: np.ndarray = None

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise InputError(f"objective kind must be one of {OBJECTIVE_KINDS}")
        for name in ("centers", "center_low", "center_high"):
            val = getattr(self, name)
            if val is not None:
                val = np.array(val, dtype=float)
                val.setflags(write=False)
                object.__setattr__(self, name, val)
        if self.centers is not None and self.centers.ndim == 1:
            object.__setattr__(self, "centers", self.centers.reshape(1, -1))


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    a: np.ndarray
    b: float
    a_spread: float = 0.0
    b_spread: float = 0.0

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        if self.a_spread < 0 or self.b_spread < 0:
            raise InputError("constraint spreads must be nonnegative")


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    family: str
    dimension: int
    objective: ObjectiveSpec
    constraints: tuple = ()
    F: float = None
    G: float = None
    slater_point: np.ndarray = None
    eta: float = None
    horizon: int = 0
    seed: int = 0
    _a_base: np.ndarray = field(init=False, repr=False)
    _b_base: np.ndarray = field(init=False, repr=False)
    _a_spread: np.ndarray = field(init=False, repr=False)
    _b_spread: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"family must be one of {FAMILIES}, got {self.family!r}")
        n = self.dimension
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for i, c in enumerate(self.constraints):
            if c.a.shape != (n,):
                raise InputError(f"constraint {i}: coefficient vector must have length {n}")
        obj = self.objective
        if self.family == "model2-fully-iid":
            if obj.center_low is None or obj.center_high is None:
                raise InputError("model2 family needs objective center_low and center_high")
            if obj.center_low.shape != (n,) or obj.center_high.shape != (n,):
                raise InputError(f"model2 center bounds must have length {n}")
        elif obj.centers is None or obj.centers.shape[1] != n:
            raise InputError(f"objective centers must be a list of length-{n} vectors")
        if (self.slater_point is None) != (self.eta is None):
            raise InputError("Slater data needs both a witness point and a margin eta")
        if self.slater_point is not None:
            s = np.array(self.slater_point, dtype=float)
            s.setflags(write=False)
            object.__setattr__(self, "slater_point", s)
            if not self.eta > 0:
                raise InputError("Slater margin eta must be positive")
        if self.horizon < 0:
            raise InputError("horizon must be nonnegative")
        k = len(self.constraints)
        a = np.array([c.a for c in self.constraints]).reshape(k, n)
        b = np.array([c.b for c in self.constraints], dtype=float)
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "_a_base", a)
        object.__setattr__(self, "_b_base", b)
        object.__setattr__(self, "_a_spread", np.array([c.a_spread for c in self.constraints], dtype=float))
        object.__setattr__(self, "_b_spread", np.array([c.b_spread for c in self.constraints], dtype=float))

    @property
    def k(self):
        return len(self.constraints)

    @property
    def stochastic(self):
        return self.family in STOCHASTIC_FAMILIES

    @property
    def has_slater(self):
        return self.slater_point is not None


def generate_slot(spec, t):
    """Functions for slot ``t``; bit-identical on every call with the same arguments.

    All of a slot's randomness comes from one generator keyed by
    ``(seed, t)``, drawn in a fixed order: objective first, then constraints.
    """
    if not 0 <= t < spec.horizon:
        raise IndexError(f"slot {t} outside horizon [0, {spec.horizon})")
    n, k = spec.dimension, spec.k
    obj = spec.objective
    random_constraints = spec.family != "time-invariant-constraints" and k > 0
    needs_rng = random_constraints or spec.family == "model2-fully-iid" or obj.center_spread > 0
    rng = slot_rng(spec.seed, t) if needs_rng else None

    shared = None
    if spec.family == "model2-fully-iid":
        shared = rng.uniform(size=n)
        center = obj.center_low + (obj.center_high - obj.center_low) * shared
    else:
        center = obj.centers[t % obj.centers.shape[0]]
        if obj.center_spread > 0:
            center = center + obj.center_spread * rng.uniform(-1.0, 1.0, n)
    objective = make_objective(obj.kind, np.array(center, dtype=float), obj.scale)

    A, b = spec._a_base, spec._b_base
    if random_constraints:
        A = A + spec._a_spread[:, None] * rng.uniform(-1.0, 1.0, (k, n))
        if shared is not None:
            b_noise = 2.0 * shared[np.arange(k) % n] - 1.0
        else:
            b_noise = rng.uniform(-1.0, 1.0, k)
        b = b + spec._b_spread * b_noise
        if spec.family == "adversarial-common-subset" and spec.has_slater:
            b = np.maximum(b, A @ spec.slater_point + spec.eta)
    return SlotFunctions(objective, A, b, int(t))


# -- empirical validation of declared constants ------------------------------


@dataclass
class ValidationReport:
    samples: int
    max_value: float = 0.0
    max_subgradient: float = 0.0
    worst_slater: float = None  # max over checked (t, i) of g_{t,i}(s); must be <= -eta
    max_subgradient_gap: float = 0.0  # worst violation of the subgradient inequality
    flags: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.flags

    def to_dict(self):
        return {
            "samples": self.samples,
            "max_value": self.max_value,
            "max_subgradient": self.max_subgradient,
            "worst_slater": self.worst_slater,
            "max_subgradient_gap": self.max_subgradient_gap,
            "flags": list(self.flags),
            "ok": self.ok,
        }


def slot_extremes(slot, points):
    """Max |value| and max subgradient norm of every function over ``points``."""
    pts = np.atleast_2d(points)
    fns = (slot.objective,) + slot.constraints
    max_val = max(float(np.max(np.abs(f.value(pts)))) for f in fns)
    max_sub = max(float(np.max(np.linalg.norm(f.subgradient(pts), axis=-1))) for f in fns)
    return max_val, max_sub


def subgradient_gap(fn, xs, ys):
    """Largest ``f(x) + f'(x)^T (y - x) - f(y)`` over paired points (<= 0 for convex f)."""
    xs, ys = np.atleast_2d(xs), np.atleast_2d(ys)
    lin = fn.value(xs) + np.sum(fn.subgradient(xs) * (ys - xs), axis=-1)
    return float(np.max(lin - fn.value(ys)))


def validate_constants(spec, dset, samples, seed=0):
    """Sample ``(t, x)`` pairs and report exceedances of the declared F, G and Slater data."""
    if samples < 1:
        raise InputError("samples must be >= 1")
    report = ValidationReport(samples=samples)
    if spec.horizon == 0:
        return report
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
    extremes = dset.extreme_points()
    worst_slater = -np.inf
    for j in range(samples):
        t = int(rng.integers(spec.horizon))
        slot = generate_slot(spec, t)
        xs = np.array([dset.sample((seed, j, 0)), dset.sample((seed, j, 1))])
        pts = np.vstack([xs, extremes]) if j < 64 else xs
        val, sub = slot_extremes(slot, pts)
        report.max_value = max(report.max_value, val)
        report.max_subgradient = max(report.max_subgradient, sub)
        for fn in (slot.objective,) + slot.constraints:
            gap = max(subgradient_gap(fn, xs[0], xs[1]), subgradient_gap(fn, xs[1], xs[0]))
            report.max_subgradient_gap = max(report.max_subgradient_gap, gap)
        if spec.has_slater and slot.k:
            worst_slater = max(worst_slater, float(np.max(slot.constraint_values(spec.slater_point))))
    if spec.F is not None and report.max_value > spec.F:
        report.flags.append(f"F: observed |value| {report.max_value:.6g} exceeds declared {spec.F:.6g}")
    if spec.G is not None and report.max_subgradient > spec.G:
        report.flags.append(
            f"G: observed subgradient norm {report.max_subgradient:.6g} exceeds declared {spec.G:.6g}"
        )
    if report.max_subgradient_gap > 1e-9:
        report.flags.append(f"subgradient inequality violated by {report.max_subgradient_gap:.3e}")
    if spec.has_slater:
        if not dset.contains(spec.slater_point, 1e-12):
            report.flags.append("Slater witness is not a member of the decision set")
        if spec.k:
            report.worst_slater = worst_slater
            if worst_slater > -spec.eta + 1e-12:
                report.flags.append(
                    f"Slater: max g(s) = {worst_slater:.6g} exceeds -eta = {-spec.eta:.6g}"
                )
    return report
