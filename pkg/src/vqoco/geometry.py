"""Compact convex decision sets with exact Euclidean projection.

Three kinds are supported: an axis-aligned box, a Euclidean ball, and a box
intersected with finitely many halfspaces ``a^T x <= b``.  Sets are immutable
once built; every method is a pure function of its arguments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError

DYKSTRA_MAX_ITER = 10_000
DYKSTRA_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _rng(seed):
    return np.random.default_rng(np.random.SeedSequence(seed))


class DecisionSet:
    """Common interface; see :class:`Box`, :class:`Ball`, :class:`Polytope`."""

    kind = "abstract"
    dimension: int
    diameter: float

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.dimension:
            raise InputError(
                f"expected a vector of dimension {self.dimension}, got shape {x.shape}"
            )
        return x

    def project(self, y):
        raise NotImplementedError

    def contains(self, x, tol=0.0):
        raise NotImplementedError

    def sample(self, seed):
        raise NotImplementedError

    @property
    def bounding_box(self):
        raise NotImplementedError

    @property
    def witness(self):
        raise NotImplementedError

    def extreme_points(self):
        """A small set of boundary points useful for stress-testing bounds."""
        return np.empty((0, self.dimension))

    def contains_many(self, xs, tol=0.0):
        return np.array([self.contains(x, tol) for x in np.atleast_2d(xs)], dtype=bool)

    def sampled_diameter(self, n_samples=500, seed=0):
        """Largest pairwise distance among sampled members and extreme points."""
        pts = [self.sample((seed, i)) for i in range(n_samples)]
        pts = np.vstack([np.array(pts), self.extreme_points()])
        sq = np.sum(pts**2, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * pts @ pts.T
        return float(math.sqrt(max(float(d2.max()), 0.0)))

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Box(DecisionSet):
    lower: np.ndarray
    upper: np.ndarray
    diameter: float = None
    kind = "box"

    def __post_init__(self):
        lo, hi = _frozen(self.lower), _frozen(self.upper)
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise InputError("box bounds must be equal-length nonempty vectors")
        if np.any(lo > hi):
            raise InputError("box requires lower <= upper coordinatewise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        exact = float(np.linalg.norm(hi - lo))
        if self.diameter is None:
            object.__setattr__(self, "diameter", exact)
        elif self.diameter < exact * (1 - 1e-12):
            raise InputError(f"declared diameter {self.diameter} is below the box diagonal {exact}")

    @property
    def dimension(self):
        return self.lower.shape[0]

    def project(self, y):
        return np.clip(self._check(y), self.lower, self.upper)

    def contains(self, x, tol=0.0):
        x = self._check(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def contains_many(self, xs, tol=0.0):
        xs = np.atleast_2d(xs)
        return np.all((xs >= self.lower - tol) & (xs <= self.upper + tol), axis=1)

    def sample(self, seed):
        return _rng(seed).uniform(self.lower, self.upper)

    @property
    def bounding_box(self):
        return self.lower, self.upper

    @property
    def witness(self):
        return 0.5 * (self.lower + self.upper)

    def extreme_points(self):
        if self.dimension > 10:
            return np.vstack([self.lower, self.upper])
        corners = itertools.product(*zip(self.lower, self.upper))
        return np.array(list(corners), dtype=float)

    def to_dict(self):
        return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "diameter": self.diameter}


@dataclass(frozen=True, eq=False)
class Ball(DecisionSet):
    center: np.ndarray
    radius: float
    diameter: float = None
    kind = "ball"

    def __post_init__(self):
        c = _frozen(self.center)
        if c.ndim != 1 or c.size == 0:
            raise InputError("ball center must be a nonempty vector")
        if not self.radius > 0:
            raise InputError("ball radius must be positive")
        object.__setattr__(self, "center", c)
        if self.diameter is None:
            object.__setattr__(self, "diameter", 2.0 * float(self.radius))
        elif self.diameter < 2.0 * self.radius * (1 - 1e-12):
            raise InputError("declared diameter is below 2 * radius")

    @property
    def dimension(self):
        return self.center.shape[0]

    def project(self, y):
        y = self._check(y)
        d = y - self.center
        r = float(np.linalg.norm(d))
        if r <= self.radius:
            return y.copy()
        return self.center + d * (self.radius / r)

    def contains(self, x, tol=0.0):
        x = self._check(x)
        return bool(np.linalg.norm(x - self.center) <= self.radius + tol)

    def contains_many(self, xs, tol=0.0):
        xs = np.atleast_2d(xs)
        return np.linalg.norm(xs - self.center, axis=1) <= self.radius + tol

    def sample(self, seed):
        rng = _rng(seed)
        n = self.dimension
        direction = rng.standard_normal(n)
        direction /= np.linalg.norm(direction)
        return self.center + direction * self.radius * rng.uniform() ** (1.0 / n)

    @property
    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    @property
    def witness(self):
        return self.center.copy()

    def extreme_points(self):
        eye = np.eye(self.dimension) * self.radius
        return np.vstack([self.center + eye, self.center - eye])

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": float(self.radius),
                "diameter": self.diameter}


@dataclass(frozen=True, eq=False)
class Polytope(DecisionSet):
    """Box ``[lower, upper]`` intersected with ``{x : A x <= b}``.

    Projection uses Dykstra's alternating projections over the box and each
    halfspace.  ``witness`` must be a member; the default diameter is the box
    diagonal, which is always a valid upper bound.
    """

    lower: np.ndarray
    upper: np.ndarray
    A: np.ndarray
    b: np.ndarray
    witness_point: np.ndarray
    diameter: float = None
    max_iter: int = DYKSTRA_MAX_ITER
    tol: float = DYKSTRA_TOL
    kind = "polytope"
    _row_sq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lo, hi = _frozen(self.lower), _frozen(self.upper)
        A = _frozen(np.atleast_2d(self.A))
        b = _frozen(np.atleast_1d(self.b))
        if lo.ndim != 1 or lo.shape != hi.shape or np.any(lo > hi):
            raise InputError("polytope box bounds invalid")
        if A.shape != (b.shape[0], lo.shape[0]):
            raise InputError(f"halfspace matrix has shape {A.shape}, expected ({b.shape[0]}, {lo.shape[0]})")
        row_sq = np.sum(A**2, axis=1)
        if np.any(row_sq == 0):
            raise InputError("halfspace normals must be nonzero")
        for name, val in (("lower", lo), ("upper", hi), ("A", A), ("b", b), ("_row_sq", row_sq)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "witness_point", _frozen(self.witness_point))
        if self.diameter is None:
            object.__setattr__(self, "diameter", float(np.linalg.norm(hi - lo)))
        if not self.contains(self.witness_point, 1e-12):
            raise InputError("witness point is not a member of the polytope")

    @property
    def dimension(self):
        return self.lower.shape[0]

    def residual(self, x):
        """Largest violation of any defining inequality (0 for members)."""
        return float(max(
            np.max(self.lower - x, initial=0.0),
            np.max(x - self.upper, initial=0.0),
            np.max(self.A @ x - self.b, initial=0.0),
        ))

    def contains(self, x, tol=0.0):
        return self.residual(self._check(x)) <= tol

    def contains_many(self, xs, tol=0.0):
        xs = np.atleast_2d(xs)
        ok = np.all((xs >= self.lower - tol) & (xs <= self.upper + tol), axis=1)
        return ok & np.all(xs @ self.A.T <= self.b + tol, axis=1)

    def project(self, y):
        y = self._check(y)
        if self.residual(y) == 0.0:
            return y.copy()
        m = self.b.shape[0]
        x = y.copy()
        incr = np.zeros((m + 1, self.dimension))
        for _ in range(self.max_iter):
            # x alone can repeat across a sweep while the corrections still move
            x_start, incr_start = x, incr.copy()
            z = x + incr[0]
            x = np.clip(z, self.lower, self.upper)
            incr[0] = z - x
            for j in range(m):
                z = x + incr[j + 1]
                excess = self.A[j] @ z - self.b[j]
                x = z - (excess / self._row_sq[j]) * self.A[j] if excess > 0 else z
                incr[j + 1] = z - x
            moved = np.linalg.norm(x - x_start) + np.linalg.norm(incr - incr_start)
            if moved <= self.tol and self.residual(x) <= self.tol:
                return np.clip(x, self.lower, self.upper)
        raise NumericalError(
            f"Dykstra projection did not converge in {self.max_iter} iterations",
            residual=self.residual(x),
        )

    def sample(self, seed):
        rng = _rng(seed)
        for _ in range(1000):
            x = rng.uniform(self.lower, self.upper)
            if self.residual(x) == 0.0:
                return x
        return self.project(rng.uniform(self.lower, self.upper))

    @property
    def bounding_box(self):
        return self.lower, self.upper

    @property
    def witness(self):
        return np.array(self.witness_point)

    def extreme_points(self):
        corners = Box(self.lower, self.upper).extreme_points()
        return corners[self.contains_many(corners)]

    def to_dict(self):
        return {"kind": "polytope", "lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "A": self.A.tolist(), "b": self.b.tolist(),
                "witness": self.witness_point.tolist(), "diameter": self.diameter}


def project(dset, y):
    """Euclidean projection of ``y`` onto ``dset``."""
    return dset.project(y)


def contains(dset, x, tol=0.0):
    return dset.contains(x, tol)


def sample(dset, seed):
    return dset.sample(seed)


def grid_points(dset, spacing):
    """Members of ``dset`` on a regular grid over its bounding box.

    The grid includes both endpoints of every coordinate range and its step
    never exceeds ``spacing``.  Intended for dimensions 1 and 2.
    """
    lo, hi = dset.bounding_box
    axes = [np.linspace(l, h, max(2, int(math.ceil((h - l) / spacing)) + 1)) for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts[dset.contains_many(pts, 1e-12)]
