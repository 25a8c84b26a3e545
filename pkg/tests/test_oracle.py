import numpy as np
import pytest

from conftest import slater_scenario
from vqoco.errors import InputError
from vqoco.geometry import Box
from vqoco.oracle import (
    AveragedObjective,
    _subgradient_search,
    best_fixed_common_subset,
    best_fixed_expected,
    minimize,
    reduce_halfspaces,
)
from vqoco.streams import AbsSum, ConstraintSpec, ObjectiveSpec, Quadratic, ScenarioSpec, generate_slot

LINE = Box([-1.0], [1.0])


def fixed_spec(centers, constraint=None, horizon=10, **kw):
    cons = () if constraint is None else (constraint,)
    return ScenarioSpec(family="time-invariant-constraints", dimension=len(centers[0]),
                        objective=ObjectiveSpec(centers=centers, **kw), constraints=cons, horizon=horizon)


def model2(seed=5):
    return ScenarioSpec(
        family="model2-fully-iid", dimension=1,
        objective=ObjectiveSpec(center_low=[0.0], center_high=[1.0]),
        constraints=(ConstraintSpec(a=[1.0], b=0.5, b_spread=0.5),), horizon=1000, seed=seed,
    )


def test_constrained_quadratic_clips_to_boundary():
    sol = best_fixed_common_subset(fixed_spec([[0.8]], ConstraintSpec(a=[1.0], b=0.5)), LINE, 10)
    assert sol.feasible and sol.method == "grid"
    assert sol.x_star[0] == pytest.approx(0.5, abs=2e-3)
    assert sol.objective_avg == pytest.approx(0.09, abs=2e-3)


def test_never_binding_constraint():
    sol = best_fixed_common_subset(fixed_spec([[0.3]], ConstraintSpec(a=[0.0], b=1.0)), LINE, 10)
    assert sol.x_star[0] == pytest.approx(0.3, abs=2e-3)


def test_alternating_objectives():
    sol = best_fixed_common_subset(fixed_spec([[1.0], [-1.0]], ConstraintSpec(a=[0.0], b=1.0)), LINE, 10)
    assert sol.x_star[0] == pytest.approx(0.0, abs=2e-3)
    assert sol.objective_avg == pytest.approx(1.0, abs=1e-5)


def test_empty_common_subset_is_reported():
    spec = fixed_spec([[0.0]], ConstraintSpec(a=[1.0], b=-2.0))
    sol = best_fixed_common_subset(spec, LINE, 10)
    assert not sol.feasible and sol.feasibility_residual > 0.5


def test_horizon_range():
    with pytest.raises(InputError):
        best_fixed_common_subset(fixed_spec([[0.0]]), LINE, 11)


def test_model1_expected_constraint_set():
    spec = ScenarioSpec(
        family="model1-iid-constraints", dimension=1, objective=ObjectiveSpec(centers=[[1.0], [0.6]]),
        constraints=(ConstraintSpec(a=[1.0], b=0.5, b_spread=0.5),), horizon=1000, seed=3,
    )
    sol = best_fixed_expected(spec, LINE)
    assert sol.x_star[0] == pytest.approx(0.5, abs=1e-3)
    assert sol.feasibility_residual <= sol.tolerance


def test_model2_closed_form_optimum():
    sol = best_fixed_expected(model2(), LINE)
    assert sol.x_star[0] == pytest.approx(0.5, abs=1e-3)
    assert sol.f_star == pytest.approx(1.0 / 12.0, abs=1e-6)


def test_model2_f_star_brute_force():
    # independent of the package: one million uniform draws of w, cost (0.5 - w)^2
    w = np.random.default_rng(2024).uniform(size=1_000_000)
    cost = (0.5 - w) ** 2
    se = cost.std(ddof=1) / np.sqrt(cost.size)
    assert abs(cost.mean() - 1.0 / 12.0) <= 4 * se
    sol = best_fixed_expected(model2(), LINE)
    assert abs(sol.f_star - cost.mean()) <= 4 * se + 1e-6


def test_model2_monte_carlo_oracle():
    sol = best_fixed_expected(model2(), LINE, mc_slots=20_000)
    assert sol.expectation == "monte-carlo"
    assert sol.x_star[0] == pytest.approx(0.5, abs=1e-2)
    assert sol.f_star == pytest.approx(1.0 / 12.0, abs=5e-3)
    assert sol.tolerance > 1e-9


def test_expected_oracle_rejects_deterministic_family():
    with pytest.raises(InputError):
        best_fixed_expected(fixed_spec([[0.0]]), LINE)


def test_oracle_beats_feasible_samples(unit_square):
    spec = slater_scenario(horizon=300)
    sol = best_fixed_common_subset(spec, unit_square, 300)
    assert sol.feasible
    slots = [generate_slot(spec, t) for t in range(300)]
    A = np.vstack([s.A for s in slots])
    b = np.concatenate([s.b for s in slots])
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 100:
        x = rng.uniform(0.0, 1.0, 2)
        if np.all(A @ x <= b):
            avg = np.mean([s.objective.value(x) for s in slots])
            assert sol.objective_avg <= avg + sol.objective_tolerance
            checked += 1


def test_grid_and_subgradient_agree_in_2d(unit_square):
    obj = AveragedObjective(2)
    obj.add(Quadratic(np.array([1.0, 0.9])))
    obj.add(AbsSum(np.array([0.2, 0.8]), 0.5))
    A = np.array([[1.0, 1.0], [1.0, -0.5]])
    b = np.array([1.1, 0.3])
    interior = np.array([0.1, 0.1])
    grid = minimize(obj, A, b, unit_square, 1e-9, interior)
    x_sub, ok, _, _ = _subgradient_search(obj, A, b, unit_square, 1e-9, interior)
    spacing = 1e-3 * unit_square.diameter
    assert ok and grid.feasible
    assert np.linalg.norm(grid.x_star - x_sub) <= 10 * spacing
    # the grid answer is within its reported Lipschitz tolerance of the refined one
    assert obj.value(x_sub) <= grid.objective_avg + 1e-9
    assert grid.objective_avg - obj.value(x_sub) <= grid.objective_tolerance


def test_higher_dimension_uses_certified_subgradient():
    box = Box(np.zeros(3), np.ones(3))
    obj = AveragedObjective(3)
    obj.add(Quadratic(np.array([1.0, 1.0, 1.0])))
    sol = minimize(obj, np.array([[1.0, 1.0, 1.0]]), np.array([1.5]), box, 1e-9, np.zeros(3))
    assert sol.method != "grid"
    assert np.allclose(sol.x_star, [0.5, 0.5, 0.5], atol=1e-3)
    assert sol.certificate_gap is not None and sol.certificate_gap <= 1e-4


def test_averaged_objective_matches_direct_average():
    fns = [Quadratic(np.array([0.3, -0.2]), 2.0), AbsSum(np.array([0.1, 0.4])), AbsSum(np.array([-0.5, 0.0]), 3.0)]
    obj = AveragedObjective(2)
    for fn in fns:
        obj.add(fn)
    pts = np.random.default_rng(1).uniform(-1, 1, (50, 2))
    direct = np.mean([fn.value(pts) for fn in fns], axis=0)
    assert np.allclose(obj.value(pts), direct, atol=1e-12)


def test_redundant_halfspaces_removed():
    # a square |x|, |y| <= 1 plus many loose cuts that never touch it
    rng = np.random.default_rng(3)
    loose = rng.normal(size=(40, 2))
    loose /= np.linalg.norm(loose, axis=1, keepdims=True)
    A = np.vstack([np.eye(2), -np.eye(2), loose])
    b = np.concatenate([np.ones(4), np.full(40, 2.0)])
    A_red, b_red = reduce_halfspaces(A, b, np.zeros(2))
    assert A_red.shape[0] == 4
    pts = np.random.default_rng(2).uniform(-3, 3, (500, 2))
    assert np.array_equal(np.all(pts @ A.T <= b, axis=1), np.all(pts @ A_red.T <= b_red, axis=1))
