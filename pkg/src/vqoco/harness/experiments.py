"""Single runs, Monte Carlo ensembles and epsilon sweeps."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import bounds
from ..errors import ConfigError, InputError
from ..oracle import best_fixed_common_subset, best_fixed_expected
from ..solver import AlgorithmParams, advance, doubling_run, init, zinkevich_advance
from ..streams import generate_slot
from .config import parse_config
from .trace import FORMAT, RunTrace, digest_of
from .verify import CheckResult, VerificationReport

SEED_STRIDE = 2**32


def _frame_dict(index, start, length, params):
    return {"index": index, "start": start, "length": length,
            "epsilon": params.epsilon, "V": params.V, "alpha": params.alpha}


def _metadata(config):
    raw = config.raw
    scenario = {key: raw.get(key) for key in ("set", "scenario", "constants", "horizon", "seed")}
    meta = {
        "format": FORMAT,
        "variant": config.variant,
        "dimension": config.dset.dimension,
        "k": config.spec.k,
        "horizon": config.horizon,
        "seed": config.seed,
        "spec_digest": digest_of(scenario),
    }
    if config.params is not None:
        meta["params"] = {"V": config.params.V, "alpha": config.params.alpha, "epsilon": config.params.epsilon}
    if config.step is not None:
        meta["step"] = config.step
    return meta


def _simulate(config, on_slot=None):
    """Records and frame list for ``config``; ``on_slot`` sees every generated slot."""
    spec, dset, N = config.spec, config.dset, config.horizon
    records, frames = [], []
    if config.variant == "dpp-doubling":
        if N == 0:
            return records, frames
        recs, frs = doubling_run(spec, dset, N, config.x0)
        if on_slot is not None:
            for t in range(N):
                on_slot(generate_slot(spec, t))
        return recs, [_frame_dict(f.index, f.start, f.length, f.params) for f in frs]
    if config.variant == "dpp":
        state = init(config.params, dset, config.x0)
        frames.append(_frame_dict(0, 0, N, config.params))
        step = lambda s, slot: advance(s, slot, dset, config.params)  # noqa: E731
    else:
        state = init(AlgorithmParams(V=1.0, alpha=1.0, k=spec.k), dset, config.x0)
        step = lambda s, slot: zinkevich_advance(s, slot, dset, config.step)  # noqa: E731
    for t in range(N):
        slot = generate_slot(spec, t)
        if on_slot is not None:
            on_slot(slot)
        state, rec = step(state, slot)
        records.append(rec)
    return records, frames


def run(config):
    """Execute ``config`` over its horizon and return the full trace."""
    records, frames = _simulate(config)
    meta = _metadata(config)
    meta["frames"] = frames
    meta["config"] = config.raw
    return RunTrace(records, meta)


# -- Monte Carlo ---------------------------------------------------------------


def trial_seed(master, trial):
    """Injective map from (master seed, trial index) to a run seed."""
    if not 0 <= trial < SEED_STRIDE:
        raise InputError("trial index out of range")
    return int(master) * SEED_STRIDE + int(trial)


def _trial(args):
    raw, seed, x_star = args
    config = parse_config(dict(raw, seed=seed))
    comp = [0.0]

    def observe(slot):
        comp[0] += float(slot.objective.value(x_star))

    records, _ = _simulate(config, observe)
    T = len(records)
    f_avg = sum(r.f for r in records) / T
    g_avg = np.sum([r.g for r in records], axis=0) / T if config.spec.k else np.zeros(0)
    return {
        "seed": seed,
        "f_avg": f_avg,
        "comparator_avg": comp[0] / T,
        "g_avg": g_avg.tolist(),
        "q_norm": float(np.linalg.norm(records[-1].q_next)),
    }


@dataclass
class MonteCarloResult:
    report: VerificationReport
    trials: list = field(default_factory=list)
    oracle: object = None

    def table(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        k = len(self.trials[0]["g_avg"]) if self.trials else 0
        w.writerow(["trial", "seed", "f_avg", "comparator_avg", "q_norm"] + [f"g{i}_avg" for i in range(k)])
        for j, tr in enumerate(self.trials):
            w.writerow([j, tr["seed"], repr(tr["f_avg"]), repr(tr["comparator_avg"]), repr(tr["q_norm"])]
                       + [repr(v) for v in tr["g_avg"]])
        return out.getvalue()


def _stat_check(name, ineq, samples, bound, trials):
    samples = np.asarray(samples, dtype=float)
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(trials))
    return CheckResult(name, ineq, trials, mean - (bound + 3.0 * se), 0.0, trials=trials, mean=mean, se=se,
                       note=f"envelope {bound:.17g} + 3 SE")


def monte_carlo(config, trials, workers=1):
    """Independent seeds of a model1/model2 config checked against the expected-value envelopes."""
    if trials < 2:
        raise InputError("monte carlo needs at least 2 trials for a standard error")
    spec = config.spec
    if not spec.stochastic:
        raise ConfigError("monte carlo needs a model1 or model2 family", path="scenario.family")
    if config.variant != "dpp":
        raise ConfigError("monte carlo runs the dpp variant", path="solver.variant")
    T = config.horizon
    if T < 1:
        raise ConfigError("monte carlo needs horizon >= 1", path="horizon")
    oracle = best_fixed_expected(spec, config.dset)
    x_star = np.asarray(oracle.x_star)
    jobs = [(config.raw, trial_seed(config.seed, j), x_star) for j in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_trial, jobs))
    else:
        rows = [_trial(job) for job in jobs]

    c, p = config.constants, config.params
    V, alpha = p.V, p.alpha
    report = VerificationReport()
    f_avg = np.array([r["f_avg"] for r in rows])
    g_avg = np.array([r["g_avg"] for r in rows]).reshape(trials, spec.k)
    env_f = bounds.envelope_model1_objective(c, V, T, alpha)
    if spec.family == "model1-iid-constraints":
        gaps = f_avg - np.array([r["comparator_avg"] for r in rows])
        report.checks.append(_stat_check("iid_objective_gap", "E avg f gap <= C/V + VG^2/(2a) + aD^2/(VT)",
                                         gaps, env_f, trials))
        if c.eta is not None and spec.has_slater and float(V).is_integer() and alpha == float(V) ** 2:
            env_g = bounds.envelope_theorem3(c, V, T)
            for i in range(spec.k):
                report.checks.append(_stat_check(f"iid_constraint_{i}", "E avg g_i <= envelope_theorem3(T)",
                                                 g_avg[:, i], env_g, trials))
    else:
        f_star = c.f_star if c.f_star is not None else oracle.f_star
        report.checks.append(_stat_check("objective_vs_fstar", "E avg f <= f* + envelope_model1_objective",
                                         f_avg, f_star + env_f, trials))
        report.notes.append(f"f* = {f_star:.17g} ({'declared' if c.f_star is not None else 'oracle'})")
        if c.mu is not None:
            q = np.array([r["q_norm"] for r in rows])
            env_q = bounds.envelope_model2_queue(c, V, alpha, T)
            report.checks.append(_stat_check("queue_norm", "E||Q(T+1)|| <= envelope_model2_queue", q, env_q, trials))
            if alpha == float(V) ** 2 and T >= V * V:
                rate = bounds.model2_queue_rate_constant(c) / V
                report.checks.append(_stat_check("queue_rate", "E||Q(T+1)||/T <= c0 / V", q / T, rate, trials))
            env_g = bounds.envelope_model2_constraint(c, V, alpha, T)
            for i in range(spec.k):
                report.checks.append(_stat_check(f"fully_iid_constraint_{i}", "E avg g_i <= envelope_model2_constraint",
                                                 g_avg[:, i], env_g, trials))
        else:
            report.notes.append("no multipliers supplied; queue and constraint envelopes skipped")
    return MonteCarloResult(report, rows, oracle)


# -- epsilon sweep ------------------------------------------------------------


@dataclass
class SweepRow:
    epsilon: float
    V: int
    alpha: float
    horizon: int
    c: float
    convergence_slot: int
    final_gap: float
    final_constraint: float


def _envelope_constant(config, params, T):
    c = config.constants
    env = bounds.envelope_theorem1(c, params.V, params.alpha, T)
    if c.eta is not None and config.spec.k:
        env = max(env, bounds.envelope_theorem3(c, params.V, T))
    return env / params.epsilon


def sweep(config, epsilons):
    """For each epsilon run ``V = ceil(1/eps)``, ``alpha = V^2`` and record when both averages fall below ``c*eps``.

    The convergence slot is the first ``T`` from which the objective gap and
    every constraint average stay at or below ``c * eps`` through the end of
    the horizon (``None`` if the last slot still violates).
    """
    epsilons = list(epsilons)
    if not epsilons:
        raise InputError("sweep needs at least one epsilon")
    rows = []
    for eps in epsilons:
        params = AlgorithmParams.from_epsilon(eps, config.spec.k)
        T_eps = math.ceil(1.0 / eps**2 - 1e-9)
        N = max(config.horizon, T_eps)
        cfg = config.derive(horizon=N, solver={"variant": "dpp", "epsilon": eps, "V": None, "alpha": None})
        trace = run(cfg)
        if cfg.spec.stochastic:
            x = best_fixed_expected(cfg.spec, cfg.dset).x_star
        else:
            x = best_fixed_common_subset(cfg.spec, cfg.dset, N).x_star
        comp = np.cumsum([float(generate_slot(cfg.spec, t).objective.value(x)) for t in range(N)])
        T = np.arange(1, N + 1)
        gap = (trace.f_sum - comp) / T
        worst_g = np.max(trace.g_sum / T[:, None], axis=1) if cfg.spec.k else np.full(N, -np.inf)
        c = _envelope_constant(cfg, params, T_eps)
        bad = np.nonzero((gap > c * eps) | (worst_g > c * eps))[0]
        if bad.size == 0:
            conv = 1
        elif bad[-1] == N - 1:
            conv = None
        else:
            conv = int(bad[-1]) + 2
        rows.append(SweepRow(eps, params.V, params.alpha, N, c, conv, float(gap[-1]), float(worst_g[-1])))
    return rows


def sweep_table(rows):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["epsilon", "V", "alpha", "horizon", "c", "convergence_slot", "final_gap", "final_constraint"])
    for r in rows:
        w.writerow([repr(r.epsilon), r.V, repr(r.alpha), r.horizon, repr(r.c),
                    "" if r.convergence_slot is None else r.convergence_slot,
                    repr(r.final_gap), repr(r.final_constraint)])
    return out.getvalue()
