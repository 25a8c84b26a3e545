import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import slater_scenario
from vqoco.errors import InputError
from vqoco.geometry import Box
from vqoco.streams import (
    AbsSum,
    Affine,
    ConstraintSpec,
    ObjectiveSpec,
    Quadratic,
    ScenarioSpec,
    generate_slot,
    subgradient_gap,
    validate_constants,
)


def model2_spec(seed=5, horizon=100_000):
    return ScenarioSpec(
        family="model2-fully-iid", dimension=1,
        objective=ObjectiveSpec(center_low=[0.0], center_high=[1.0]),
        constraints=(ConstraintSpec(a=[1.0], b=0.5, b_spread=0.5),),
        F=4.0, G=4.0, horizon=horizon, seed=seed,
    )


def model1_spec(seed=3, horizon=1000):
    return ScenarioSpec(
        family="model1-iid-constraints", dimension=1,
        objective=ObjectiveSpec(centers=[[1.0], [0.6]]),
        constraints=(ConstraintSpec(a=[1.0], b=0.5, b_spread=0.5),),
        F=4.0, G=4.0, slater_point=[-1.0], eta=1.0, horizon=horizon, seed=seed,
    )


def square_spec(G=2.0, horizon=50):
    return ScenarioSpec(
        family="time-invariant-constraints", dimension=1,
        objective=ObjectiveSpec(centers=[[0.0]]), F=1.0, G=G, horizon=horizon,
    )


def test_time_invariant_constraint_is_constant():
    spec = ScenarioSpec(
        family="time-invariant-constraints", dimension=1,
        objective=ObjectiveSpec(centers=[[0.3], [0.7]]),
        constraints=(ConstraintSpec(a=[1.0], b=0.5),), horizon=20,
    )
    first = generate_slot(spec, 0)
    for t in range(20):
        slot = generate_slot(spec, t)
        assert np.array_equal(slot.A, first.A) and np.array_equal(slot.b, first.b)
        assert slot.constraint_values(np.array([0.9]))[0] == pytest.approx(0.4)


def test_adversarial_family_keeps_slater_margin():
    spec = slater_scenario(horizon=2000)
    s = spec.slater_point
    worst = max(float(np.max(generate_slot(spec, t).constraint_values(s))) for t in range(2000))
    assert worst <= -0.25 + 1e-12


def test_regeneration_is_bit_identical():
    spec = model2_spec()
    for t in (0, 17, 99_999):
        assert generate_slot(spec, t).params() == generate_slot(spec, t).params()
    other = replace(spec, seed=6)
    assert generate_slot(spec, 3).params() != generate_slot(other, 3).params()


def test_slot_outside_horizon():
    with pytest.raises(IndexError):
        generate_slot(model2_spec(horizon=5), 5)
    with pytest.raises(IndexError):
        generate_slot(model2_spec(horizon=5), -1)


def test_model1_objective_follows_schedule():
    spec = model1_spec()
    centers = [float(generate_slot(spec, t).objective.center[0]) for t in range(6)]
    assert centers == [1.0, 0.6, 1.0, 0.6, 1.0, 0.6]
    b = {float(generate_slot(spec, t).b[0]) for t in range(50)}
    assert len(b) == 50 and min(b) >= 0.0 and max(b) <= 1.0


def test_model2_shares_one_draw():
    spec = model2_spec()
    for t in range(20):
        slot = generate_slot(spec, t)
        # center w and offset b are the same uniform draw
        assert slot.objective.center[0] == pytest.approx(slot.b[0], abs=1e-15)


def test_model2_constraint_mean_matches_distribution():
    spec = model2_spec()
    x = np.array([0.2])
    vals = np.array([generate_slot(spec, t).constraint_values(x)[0] for t in range(100_000)])
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(vals.mean() - (0.2 - 0.5)) <= 4 * se


def test_model2_draws_uncorrelated_across_slots():
    spec = model2_spec(horizon=20_000)
    w = np.array([generate_slot(spec, t).b[0] for t in range(20_000)])
    w = w - w.mean()
    lag1 = float(w[1:] @ w[:-1]) / float(w @ w)
    assert abs(lag1) <= 4 / np.sqrt(w.size)


def test_streams_identical_across_processes():
    code = (
        "import sys; sys.path.insert(0, 'tests');"
        "from test_streams import model2_spec;"
        "from vqoco.streams import generate_slot;"
        "print([generate_slot(model2_spec(), t).params() for t in range(0, 1000, 37)])"
    )
    out = [subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
           for _ in range(2)]
    assert out[0] == out[1] and out[0]


def test_validate_constants_examples():
    dset = Box([-1.0], [1.0])
    assert validate_constants(square_spec(G=2.0), dset, 200).ok
    report = validate_constants(square_spec(G=1.0), dset, 200)
    assert not report.ok and any(f.startswith("G:") for f in report.flags)
    assert report.max_subgradient == pytest.approx(2.0)


def test_validate_constants_flags_slater():
    spec = ScenarioSpec(
        family="time-invariant-constraints", dimension=1, objective=ObjectiveSpec(centers=[[0.0]]),
        constraints=(ConstraintSpec(a=[1.0], b=0.1),), F=2.0, G=2.0,
        slater_point=[0.0], eta=0.25, horizon=10,
    )
    report = validate_constants(spec, Box([-1.0], [1.0]), 20)
    assert report.worst_slater == pytest.approx(-0.1)
    assert any(f.startswith("Slater") for f in report.flags)


@pytest.mark.parametrize("spec_fn", [slater_scenario, model1_spec, model2_spec])
def test_built_in_families_pass_their_declared_bounds(spec_fn):
    spec = spec_fn()
    dset = Box([0.0, 0.0], [1.0, 1.0]) if spec.dimension == 2 else Box([-1.0], [1.0])
    report = validate_constants(spec, dset, 300)
    assert report.ok, report.flags


def test_slot_functions_satisfy_their_invariants_at_random_points():
    spec = slater_scenario(horizon=50)
    rng = np.random.default_rng(1)
    for t in range(0, 50, 7):
        slot = generate_slot(spec, t)
        xs = rng.uniform(0.0, 1.0, (200, 2))
        ys = rng.uniform(0.0, 1.0, (200, 2))
        for fn in (slot.objective,) + slot.constraints:
            assert np.max(np.abs(fn.value(xs))) <= spec.F
            assert np.max(np.linalg.norm(fn.subgradient(xs), axis=-1)) <= spec.G
            assert subgradient_gap(fn, xs, ys) <= 1e-9


@given(c=st.floats(-2, 2), x=st.floats(-2, 2), y=st.floats(-2, 2))
def test_abs_subgradient_inequality(c, x, y):
    fn = AbsSum(np.array([c]), 1.5)
    assert subgradient_gap(fn, np.array([x]), np.array([y])) <= 1e-9


def test_abs_subgradient_zero_at_tie():
    fn = AbsSum(np.array([0.5, 0.0]))
    assert np.array_equal(fn.subgradient(np.array([0.5, 1.0])), [0.0, 1.0])


def test_function_batches_match_single_points():
    pts = np.array([[0.1, 0.2], [0.7, -0.3]])
    for fn in (Quadratic(np.array([0.5, 0.5]), 2.0), AbsSum(np.array([0.0, 0.1])), Affine(np.array([1.0, -2.0]), 0.3)):
        batch = fn.value(pts)
        assert np.allclose(batch, [fn.value(p) for p in pts])
        assert np.allclose(fn.subgradient(pts), [fn.subgradient(p) for p in pts])


def test_spec_validation():
    with pytest.raises(InputError):
        ScenarioSpec(family="bogus", dimension=1, objective=ObjectiveSpec(centers=[[0.0]]))
    with pytest.raises(InputError):
        ScenarioSpec(family="model2-fully-iid", dimension=1, objective=ObjectiveSpec(centers=[[0.0]]))
    with pytest.raises(InputError):
        ScenarioSpec(family="time-invariant-constraints", dimension=1,
                     objective=ObjectiveSpec(centers=[[0.0]]), slater_point=[0.0])
    with pytest.raises(InputError):
        ConstraintSpec(a=[1.0], b=0.0, a_spread=-1.0)
