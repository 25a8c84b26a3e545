"""Declarative run configuration (YAML).

A config has the sections ``set``, ``scenario``, ``constants`` and ``solver``
plus top-level ``horizon`` and ``seed``::

    seed: 7
    horizon: 10000
    set: {kind: box, lower: [0, 0], upper: [1, 1]}
    scenario:
      family: adversarial-common-subset
      objective: {kind: quadratic, scale: 1.0, centers: [[1, 1]], center_spread: 0.1}
      constraints:
        - {a: [1.0, 0.5], b: 0.9, a_spread: 0.3, b_spread: 0.3}
    constants: {F: 2.5, G: 3.2, eta: 0.25, slater: [0, 0]}
    solver: {variant: dpp, V: 10, alpha: 100, x0: [0, 0]}

Every validation failure raises :class:`ConfigError` naming the offending
field path.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from ..bounds import ProblemConstants
from ..errors import ConfigError, InputError
from ..geometry import Ball, Box, Polytope
from ..solver import AlgorithmParams
from ..streams import FAMILIES, ConstraintSpec, ObjectiveSpec, ScenarioSpec

VARIANTS = ("dpp", "zinkevich", "dpp-doubling")


def _get(d, key, path, default=KeyError):
    if not isinstance(d, dict):
        raise ConfigError("expected a mapping", path=path)
    if key not in d:
        if default is KeyError:
            raise ConfigError("missing required field", path=f"{path}.{key}" if path else key)
        return default
    return d[key]


def _number(v, path, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", path=path)
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError("must be finite", path=path)
    if positive and not v > 0:
        raise ConfigError(f"must be positive, got {v}", path=path)
    if nonneg and v < 0:
        raise ConfigError(f"must be nonnegative, got {v}", path=path)
    return v


def _integer(v, path, minimum=0):
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"expected an integer >= {minimum}, got {v!r}", path=path)
    return v


def _vector(v, path, n=None):
    try:
        arr = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a list of numbers, got {v!r}", path=path) from None
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ConfigError("expected a flat list of finite numbers", path=path)
    if n is not None and arr.shape[0] != n:
        raise ConfigError(f"expected length {n}, got {arr.shape[0]}", path=path)
    return arr


def _matrix(v, path, n):
    rows = v if isinstance(v, list) and v and isinstance(v[0], list) else [v]
    return np.array([_vector(r, f"{path}[{i}]", n) for i, r in enumerate(rows)])


def _parse_set(d):
    kind = _get(d, "kind", "set")
    diameter = _get(d, "diameter", "set", None)
    if diameter is not None:
        diameter = _number(diameter, "set.diameter", positive=True)
    try:
        if kind == "box":
            lower = _vector(_get(d, "lower", "set"), "set.lower")
            upper = _vector(_get(d, "upper", "set"), "set.upper", lower.shape[0])
            return Box(lower, upper, diameter)
        if kind == "ball":
            center = _vector(_get(d, "center", "set"), "set.center")
            return Ball(center, _number(_get(d, "radius", "set"), "set.radius", positive=True), diameter)
        if kind == "polytope":
            lower = _vector(_get(d, "lower", "set"), "set.lower")
            n = lower.shape[0]
            upper = _vector(_get(d, "upper", "set"), "set.upper", n)
            A = _matrix(_get(d, "A", "set"), "set.A", n)
            b = _vector(_get(d, "b", "set"), "set.b", A.shape[0])
            witness = _vector(_get(d, "witness", "set"), "set.witness", n)
            return Polytope(lower, upper, A, b, witness, diameter)
    except InputError as exc:
        raise ConfigError(str(exc), path="set") from None
    raise ConfigError(f"unknown set kind {kind!r} (box, ball, polytope)", path="set.kind")


def _parse_scenario(d, n, constants, slater, horizon, seed):
    family = _get(d, "family", "scenario")
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; expected one of {FAMILIES}", path="scenario.family")
    od = _get(d, "objective", "scenario")
    okw = {"kind": _get(od, "kind", "scenario.objective", "quadratic"),
           "scale": _number(_get(od, "scale", "scenario.objective", 1.0), "scenario.objective.scale")}
    if family == "model2-fully-iid":
        okw["center_low"] = _vector(_get(od, "center_low", "scenario.objective"),
                                    "scenario.objective.center_low", n)
        okw["center_high"] = _vector(_get(od, "center_high", "scenario.objective"),
                                     "scenario.objective.center_high", n)
    else:
        okw["centers"] = _matrix(_get(od, "centers", "scenario.objective"), "scenario.objective.centers", n)
        okw["center_spread"] = _number(_get(od, "center_spread", "scenario.objective", 0.0),
                                       "scenario.objective.center_spread", nonneg=True)
    try:
        objective = ObjectiveSpec(**okw)
    except InputError as exc:
        raise ConfigError(str(exc), path="scenario.objective") from None

    raw_cons = _get(d, "constraints", "scenario", [])
    if not isinstance(raw_cons, list):
        raise ConfigError("expected a list", path="scenario.constraints")
    cons = []
    for i, c in enumerate(raw_cons):
        p = f"scenario.constraints[{i}]"
        cons.append(ConstraintSpec(
            a=_vector(_get(c, "a", p), f"{p}.a", n),
            b=_number(_get(c, "b", p), f"{p}.b"),
            a_spread=_number(_get(c, "a_spread", p, 0.0), f"{p}.a_spread", nonneg=True),
            b_spread=_number(_get(c, "b_spread", p, 0.0), f"{p}.b_spread", nonneg=True),
        ))
    try:
        return ScenarioSpec(
            family=family, dimension=n, objective=objective, constraints=tuple(cons),
            F=constants.F, G=constants.G,
            slater_point=slater, eta=constants.eta if slater is not None else None,
            horizon=horizon, seed=seed,
        )
    except InputError as exc:
        raise ConfigError(str(exc), path="scenario") from None


@dataclass(frozen=True, eq=False)
class RunConfig:
    """A validated configuration; ``raw`` is the source mapping it was built from."""

    raw: dict
    dset: object
    spec: ScenarioSpec
    constants: ProblemConstants
    variant: str
    params: AlgorithmParams
    step: float
    x0: np.ndarray
    horizon: int
    seed: int

    def derive(self, **changes):
        """A new config with top-level keys or whole sections replaced.

        ``solver`` and ``constants`` changes are merged into the existing
        section rather than replacing it.
        """
        raw = copy.deepcopy(self.raw)
        for key, val in changes.items():
            if key in ("solver", "constants") and isinstance(val, dict):
                section = dict(raw.get(key) or {})
                for sk, sv in val.items():
                    if sv is None:
                        section.pop(sk, None)
                    else:
                        section[sk] = sv
                raw[key] = section
            else:
                raw[key] = val
        return parse_config(raw)


def _parse_constants(d, dset, k):
    F = _number(_get(d, "F", "constants"), "constants.F", nonneg=True)
    G = _number(_get(d, "G", "constants"), "constants.G", nonneg=True)
    D = _get(d, "D", "constants", None)
    D = dset.diameter if D is None else _number(D, "constants.D", nonneg=True)
    if D < dset.diameter * (1 - 1e-12):
        raise ConfigError(f"declared D={D} is below the set diameter {dset.diameter}", path="constants.D")
    eta = _get(d, "eta", "constants", None)
    slater = _get(d, "slater", "constants", None)
    if eta is not None:
        eta = _number(eta, "constants.eta", positive=True)
    if slater is not None:
        slater = _vector(slater, "constants.slater", dset.dimension)
        if not dset.contains(slater, 1e-12):
            raise ConfigError("Slater point is not a member of the set", path="constants.slater")
        if eta is None:
            raise ConfigError("a Slater point needs a margin eta", path="constants.eta")
    mu = _get(d, "mu", "constants", None)
    if mu is not None:
        mu = _vector(mu, "constants.mu", k)
        if np.any(mu < 0):
            raise ConfigError("multipliers must be nonnegative", path="constants.mu")
        mu = tuple(mu.tolist())
    f_star = _get(d, "f_star", "constants", None)
    if f_star is not None:
        f_star = _number(f_star, "constants.f_star")
    return ProblemConstants(D=D, F=F, G=G, k=k, eta=eta, mu=mu, f_star=f_star), slater


def _parse_solver(d, dset, k):
    variant = _get(d, "variant", "solver", "dpp")
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}", path="solver.variant")
    eps = _get(d, "epsilon", "solver", None)
    V = _get(d, "V", "solver", None)
    alpha = _get(d, "alpha", "solver", None)
    params = None
    if eps is not None:
        eps = _number(eps, "solver.epsilon", positive=True)
    if variant == "dpp":
        if V is not None or alpha is not None:
            if V is None or alpha is None:
                raise ConfigError("give both V and alpha, or epsilon", path="solver")
            params = AlgorithmParams(V=_number(V, "solver.V", positive=True),
                                     alpha=_number(alpha, "solver.alpha", positive=True), k=k, epsilon=eps)
            if params.integer_V:
                params = AlgorithmParams(V=int(params.V), alpha=params.alpha, k=k, epsilon=eps)
        elif eps is not None:
            params = AlgorithmParams.from_epsilon(eps, k)
        else:
            raise ConfigError("dpp needs epsilon or both V and alpha", path="solver")
    step = None
    if variant == "zinkevich":
        step = _get(d, "step", "solver", eps)
        if step is None:
            raise ConfigError("zinkevich needs step (or epsilon)", path="solver.step")
        step = _number(step, "solver.step", positive=True)
    x0 = _get(d, "x0", "solver", None)
    x0 = dset.witness if x0 is None else _vector(x0, "solver.x0", dset.dimension)
    if not dset.contains(x0, 1e-9):
        raise ConfigError(f"x0={x0.tolist()} is not a member of the set", path="solver.x0")
    return variant, params, step, x0


def parse_config(raw):
    """Validate a config mapping and build every runtime object it describes."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping", path="")
    horizon = _integer(_get(raw, "horizon", ""), "horizon")
    seed = _integer(_get(raw, "seed", "", 0), "seed")
    dset = _parse_set(_get(raw, "set", ""))
    scen = _get(raw, "scenario", "")
    k = len(_get(scen, "constraints", "scenario", []) or [])
    constants, slater = _parse_constants(_get(raw, "constants", ""), dset, k)
    spec = _parse_scenario(scen, dset.dimension, constants, slater, horizon, seed)
    variant, params, step, x0 = _parse_solver(_get(raw, "solver", "", {}) or {}, dset, k)
    if variant == "dpp-doubling" and 0 < horizon < 2:
        raise ConfigError("the doubling variant needs horizon >= 2", path="horizon")
    return RunConfig(raw=copy.deepcopy(raw), dset=dset, spec=spec, constants=constants,
                     variant=variant, params=params, step=step, x0=x0, horizon=horizon, seed=seed)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=str(path)) from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}", path=str(path)) from None
    return parse_config(raw)
