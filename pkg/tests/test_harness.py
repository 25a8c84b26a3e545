import json
import math
from dataclasses import replace

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from test_solver import hand_simulation
from vqoco import cli
from vqoco.errors import ConfigError, InputError, NumericalError
from vqoco.harness import RunTrace, load_config, monte_carlo, parse_config, run, sweep, sweep_table, trial_seed, verify
from vqoco.harness.trace import encode


@pytest.fixture
def golden(configs):
    return load_config(configs / "golden_1d.yaml")


def golden_raw(configs):
    return yaml.safe_load((configs / "golden_1d.yaml").read_text())


def false_slater(golden, horizon=200):
    # on [0, 0.4] the constraint 0.5 - x is never met, yet a Slater margin is declared
    return golden.derive(horizon=horizon, set={"kind": "box", "lower": [0.0], "upper": [0.4]},
                         constants={"slater": [0.4], "eta": 0.5, "D": 0.4})


# -- config --------------------------------------------------------------------


@pytest.mark.parametrize("edit, path", [
    (lambda r: r["solver"].update(variant="sgd"), "solver.variant"),
    (lambda r: r["solver"].update(x0=[2.0]), "solver.x0"),
    (lambda r: r["solver"].pop("alpha"), "solver"),
    (lambda r: r["constants"].update(F=-1.0), "constants.F"),
    (lambda r: r["constants"].pop("G"), "constants.G"),
    (lambda r: r["constants"].update(D=0.5), "constants.D"),
    (lambda r: r["constants"].pop("eta"), "constants.eta"),
    (lambda r: r["set"].update(kind="simplex"), "set.kind"),
    (lambda r: r["scenario"]["constraints"][0].update(a=[1.0, 2.0]), "scenario.constraints[0].a"),
    (lambda r: r["scenario"].update(family="markov"), "scenario.family"),
    (lambda r: r.pop("horizon"), "horizon"),
    (lambda r: r.update(horizon=-3), "horizon"),
])
def test_config_errors_name_the_field(configs, edit, path):
    raw = golden_raw(configs)
    edit(raw)
    with pytest.raises(ConfigError) as err:
        parse_config(raw)
    assert err.value.path == path
    assert str(err.value).startswith(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_derive_merges_solver_section(golden):
    cfg = golden.derive(solver={"V": None, "alpha": None, "epsilon": 0.5})
    assert (cfg.params.V, cfg.params.alpha) == (2, 4.0)
    assert cfg.x0.tolist() == [0.0]
    assert golden.params.V == 1


# -- run and trace -----------------------------------------------------------------


def test_horizon_zero_gives_empty_trace(golden):
    trace = run(golden.derive(horizon=0))
    assert len(trace) == 0
    again = RunTrace.loads(trace.dumps())
    assert len(again) == 0 and again.metadata == trace.metadata


def test_golden_trace_is_byte_identical(golden, data_dir):
    trace = run(golden)
    expected = (data_dir / "golden_1d.trace.jsonl").read_text()
    assert trace.dumps() == expected


def test_golden_file_matches_hand_simulation(data_dir):
    trace = RunTrace.read(data_dir / "golden_1d.trace.jsonl")
    xs, qs = hand_simulation(6)
    assert trace.column("x").ravel().tolist() == xs
    assert trace.column("q_next").ravel().tolist() == qs[1:7]
    assert trace.column("f").tolist() == xs
    assert np.allclose(trace.column("g").ravel(), 0.5 - np.array(xs), atol=0.0)


def test_trace_round_trip_is_byte_identical(configs, tmp_path):
    cfg = load_config(configs / "slater_2d.yaml").derive(horizon=300)
    trace = run(cfg)
    path = tmp_path / "t.jsonl"
    trace.write(path)
    again = RunTrace.read(path)
    assert again.dumps() == path.read_text()
    assert again.digest() == trace.digest()
    assert [r.to_dict() for r in again.records] == [r.to_dict() for r in trace.records]


def test_prefix_sums_match_recomputation(configs):
    trace = run(load_config(configs / "slater_2d.yaml").derive(horizon=500))
    assert len(trace) == 500
    f = trace.column("f")
    g = np.array([r.g for r in trace.records])
    f_acc, g_acc = 0.0, np.zeros(2)
    for j in range(len(trace)):
        f_acc += f[j]
        g_acc = g_acc + g[j]
        assert trace.f_sum[j] == f_acc
        assert np.array_equal(trace.g_sum[j], g_acc)


def test_runs_have_identical_digests(configs):
    cfg = load_config(configs / "model2.yaml").derive(horizon=200)
    assert run(cfg).digest() == run(cfg).digest()
    assert run(cfg).digest() != run(cfg.derive(seed=6)).digest()


@given(v=st.floats(allow_nan=False, allow_infinity=False))
def test_float_encoding_round_trips(v):
    assert json.loads(encode(v)) == v


def test_trace_metadata(golden):
    meta = run(golden).metadata
    assert meta["variant"] == "dpp" and meta["seed"] == 0 and meta["horizon"] == 6
    assert meta["params"]["V"] == 1 and len(meta["spec_digest"]) == 64


# -- verify ----------------------------------------------------------------------


def test_golden_verifies(golden):
    report = verify(run(golden))
    names = {c.name for c in report.checks}
    assert {"t1", "t2", "t3", "drift", "queue_step"} <= names
    assert report.passed
    assert report.get("t1").checked == 6


def test_verify_is_read_only(golden):
    trace = run(golden)
    before = trace.digest()
    verify(trace)
    assert trace.digest() == before


def test_constant_stream_has_zero_queue_margin(configs):
    raw = golden_raw(configs)
    raw["scenario"]["objective"] = {"kind": "linear", "scale": 0.0, "centers": [[1.0]]}
    raw["scenario"]["constraints"] = [{"a": [0.0], "b": 1.0}]
    raw["constants"]["slater"] = [0.0]
    raw["horizon"] = 20
    trace = run(parse_config(raw))
    assert np.all(trace.column("q_next") == 0)
    report = verify(trace)
    assert report.passed
    assert report.get("queue_step").max_violation <= 0.0


def test_overstated_margin_is_a_failure_not_an_error(golden):
    report = verify(run(false_slater(golden)), which=("t2",))
    assert not report.passed
    assert report.get("t2").max_violation > 1.0


def test_verify_selector_needs_data(configs):
    trace = run(load_config(configs / "zinkevich_2d.yaml").derive(horizon=20))
    with pytest.raises(ConfigError):
        verify(trace, which=("t2",))
    square = run(load_config(configs / "slater_2d.yaml").derive(horizon=20, solver={"alpha": 50}))
    with pytest.raises(ConfigError):
        verify(square, which=("t3",))


def test_verify_override_constants(golden):
    trace = run(golden)
    report = verify(trace, replace(golden.constants, eta=50.0), which=("t2",))
    assert report.passed


# -- Monte Carlo -----------------------------------------------------------------


def test_monte_carlo_needs_two_trials(configs):
    with pytest.raises(InputError):
        monte_carlo(load_config(configs / "model1.yaml"), 1)


def test_monte_carlo_rejects_deterministic_family(golden):
    with pytest.raises(ConfigError):
        monte_carlo(golden, 5)


def test_trial_seeds_are_injective():
    seeds = {trial_seed(m, j) for m in range(20) for j in range(200)}
    assert len(seeds) == 20 * 200
    with pytest.raises(InputError):
        trial_seed(0, -1)


def test_zero_variance_family_matches_deterministic_run(configs):
    raw = yaml.safe_load((configs / "model1.yaml").read_text())
    raw["scenario"]["constraints"][0]["b_spread"] = 0.0
    raw["horizon"] = 100
    cfg = parse_config(raw)
    result = monte_carlo(cfg, 3)
    trace = run(cfg)
    for tr in result.trials:
        assert tr["f_avg"] == trace.f_sum[-1] / 100
        assert tr["g_avg"] == pytest.approx((trace.g_sum[-1] / 100).tolist(), rel=1e-12)
    assert all(c.se == 0.0 for c in result.report.checks)
    assert result.report.passed
    # with every slot identical the expected constraint set is the common subset
    assert verify(trace, which=("t1", "t3")).passed
    assert result.oracle.x_star[0] == pytest.approx(0.5, abs=1e-3)


def test_monte_carlo_workers_do_not_change_results(configs):
    cfg = load_config(configs / "model2.yaml").derive(horizon=50)
    serial = monte_carlo(cfg, 4)
    pooled = monte_carlo(cfg, 4, workers=2)
    assert serial.table() == pooled.table()
    assert [c.to_dict() for c in serial.report.checks] == [c.to_dict() for c in pooled.report.checks]


# -- sweep -------------------------------------------------------------------------


def test_sweep_single_row(golden):
    rows = sweep(golden, [0.5])
    assert len(rows) == 1
    assert sweep_table(rows).count("\n") == 2


def test_sweep_rejects_empty_list(golden):
    with pytest.raises(InputError):
        sweep(golden, [])


def test_sweep_golden_regression(golden):
    rows = sweep(golden, [0.2, 0.1])
    assert [(r.V, r.alpha, r.horizon) for r in rows] == [(5, 25.0, 25), (10, 100.0, 100)]
    for r in rows:
        assert r.convergence_slot is not None and r.convergence_slot <= math.ceil(1 / r.epsilon**2)
    # recorded from the first verified run
    assert rows[1].convergence_slot == 1
    assert rows[1].c == pytest.approx(25.90803719008265, rel=1e-12)
    assert rows[1].final_gap == pytest.approx(-0.05966857229642052, rel=1e-9)
    assert rows[1].final_constraint == pytest.approx(0.05966857229642067, rel=1e-9)


# -- CLI ---------------------------------------------------------------------------


def write_config(cfg, path):
    path.write_text(yaml.safe_dump(json.loads(json.dumps(cfg.raw))))
    return str(path)


def test_cli_run_and_verify(configs, tmp_path, data_dir, capsys):
    out = tmp_path / "g.jsonl"
    assert cli.main(["run", str(configs / "golden_1d.yaml"), "-o", str(out)]) == 0
    assert out.read_text() == (data_dir / "golden_1d.trace.jsonl").read_text()
    summary = json.loads(capsys.readouterr().out)
    assert summary["slots"] == 6
    report = tmp_path / "r.json"
    assert cli.main(["verify", str(out), "--theorems", "t1,t2,lemmas", "--report", str(report)]) == 0
    assert json.loads(report.read_text())["passed"] is True


def test_cli_verification_failure_exit_code(golden, tmp_path):
    cfg_path = write_config(false_slater(golden), tmp_path / "bad.yaml")
    trace = tmp_path / "bad.jsonl"
    assert cli.main(["run", cfg_path, "-o", str(trace)]) == 0
    assert cli.main(["verify", str(trace), "--theorems", "t2", "--report", str(tmp_path / "r.json")]) == 1


def test_cli_config_error_exit_code(tmp_path, configs, capsys):
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("horizon: [1, 2]\n")
    assert cli.main(["run", str(bad)]) == 2
    trace = tmp_path / "z.jsonl"
    cli.main(["run", str(configs / "zinkevich_2d.yaml"), "-o", str(trace)])
    assert cli.main(["verify", str(trace), "--theorems", "t2"]) == 2
    assert cli.main(["verify", str(trace), "--constant", "eta"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_cli_numerical_error_exit_code(configs, monkeypatch):
    def boom(config):
        raise NumericalError("projection stalled", residual=1e-3)

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["run", str(configs / "golden_1d.yaml")]) == 3


def test_cli_sweep_and_oracle(configs, tmp_path, capsys):
    table = tmp_path / "s.csv"
    assert cli.main(["sweep", str(configs / "golden_1d.yaml"), "--eps", "0.2", "--csv", str(table)]) == 0
    assert table.read_text().splitlines()[0].startswith("epsilon,V,alpha")
    capsys.readouterr()
    assert cli.main(["oracle", str(configs / "model2.yaml")]) == 0
    sol = json.loads(capsys.readouterr().out)
    assert sol["f_star"] == pytest.approx(1 / 12)


def test_cli_mc(configs, tmp_path):
    cfg = load_config(configs / "model2.yaml").derive(horizon=100)
    path = write_config(cfg, tmp_path / "m2.yaml")
    csv_path = tmp_path / "trials.csv"
    code = cli.main(["mc", path, "--trials", "5", "--csv", str(csv_path), "--report", str(tmp_path / "r.json")])
    assert code == 0
    assert len(csv_path.read_text().splitlines()) == 6
