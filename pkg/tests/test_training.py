import math

import numpy as np
import pytest

from qclattice import anomaly
from qclattice.data import TrainingSet
from qclattice.lattice import enumerate_all
from qclattice.model import MeasurementOperator
from qclattice.optimizers import OptimizerSettings
from qclattice.surrogate import SurrogateOracle, SurrogateSpec, generate_instances
from qclattice.training import (Tolerances, cost, initial_params, metrics, moment_histogram,
                                objectives, replay, rmse, run_training)

FAST = OptimizerSettings(max_iters=3000, adam_after="always")


def clean_set(seed=0, n=4):
    oracle = SurrogateOracle(SurrogateSpec(n, seed=seed, anomaly_rate=0.0))
    return TrainingSet.of(generate_instances(oracle, enumerate_all(n))), oracle


def noisy_set(seed=0, inject=3):
    spec = SurrogateSpec(4, seed=seed, anomaly_rate=0.2)
    data = SurrogateOracle(spec)
    ts = TrainingSet.of(generate_instances(data, enumerate_all(4), inject=inject, seed=seed))
    return ts, SurrogateOracle(spec, id_prefix="t", stream=(seed,))


def test_metric_arithmetic():
    m = metrics([1.0, 2.0, 4.0], [1.0, 3.0, 3.0])
    assert m["rmse"] == pytest.approx(math.sqrt(2 / 3), abs=1e-15)
    assert m["mape"] == pytest.approx(100 * (0 + 1 / 3 + 1 / 3) / 3, abs=1e-12)
    # ss_tot = 8/3, ss_res = 2
    assert m["r2"] == pytest.approx(1 - 2 / (8 / 3), abs=1e-15)
    assert metrics([0.0, 1.0], [0.0, 2.0])["mape"] is None
    assert metrics([2.0, 2.0], [2.0, 2.0])["r2"] == 1.0
    with pytest.raises(ValueError):
        metrics([], [])
    with pytest.raises(ValueError):
        rmse([])


def test_cost_matches_objective_and_residuals():
    ts, _ = noisy_set()
    p = initial_params(ts, np.random.default_rng(3))
    f, fg = objectives(ts, MeasurementOperator.default(4))
    x = p.to_vector()
    assert f(x) == pytest.approx(cost(p, ts), abs=1e-13)
    assert fg(x)[0] == pytest.approx(f(x), abs=1e-13)
    assert cost(p, ts) == pytest.approx(rmse(anomaly.residuals(p, ts)), abs=1e-15)


def test_objective_gradient_matches_finite_differences():
    ts, _ = noisy_set()
    f, fg = objectives(ts, MeasurementOperator.default(4))
    x = initial_params(ts, np.random.default_rng(5)).to_vector()
    _, g = fg(x)
    h = 1e-6
    fd = np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(len(x))])
    np.testing.assert_allclose(g, fd, atol=1e-7)


def test_moment_histogram_bins():
    ts, _ = noisy_set()
    hist = moment_histogram(ts)
    assert sum(hist.values()) == sum(len(i.moments) for i in ts)
    assert set(hist) <= {"0", "1", "3"}


def test_tolerance_validation():
    with pytest.raises(ValueError):
        Tolerances(tol2=0)
    with pytest.raises(ValueError):
        Tolerances(tol3_initial=0.05, tol3_late=0.06)
    with pytest.raises(ValueError):
        Tolerances(max_rounds=0)
    assert Tolerances().trigger == pytest.approx(0.06)


def test_clean_data_converges_without_flags():
    ts, oracle = clean_set()
    res = run_training(ts, oracle, Tolerances(tol2=0.05), FAST, seed=0)
    assert res.converged
    assert res.final_cost <= 0.05
    # nothing is metastable, so treatment can only add neighbours, never replace
    assert all(r.replaced == 0 for r in res.reports)
    assert all(m.kind == "add" for m in res.mutations)
    assert not any(oracle.is_metastable(i) for i in res.training_set)


def test_clean_data_best_start_needs_no_treatment():
    ts, oracle = clean_set()
    res = run_training(ts, oracle, Tolerances(tol2=0.05), FAST, seed=0, n_starts=4)
    assert res.converged and res.rounds == 1
    assert res.mutations == [] and len(res.training_set) == len(ts)


def test_infinite_tol2_gives_single_round():
    ts, oracle = noisy_set()
    res = run_training(ts, oracle, Tolerances(tol2=1e9), FAST, seed=1)
    assert res.converged and res.rounds == 1
    assert res.reports[0].round == 0


def test_round_budget_exhausted():
    ts, oracle = noisy_set()
    res = run_training(ts, oracle, Tolerances(tol2=1e-9, max_rounds=2), FAST, seed=0)
    assert not res.converged
    assert res.rounds == 2
    for r in res.reports[1:]:
        assert r.cost_after <= r.cost_before + 1e-15
        assert r.flagged == len(r.actions)
        assert r.not_replaced == r.flagged - r.replaced
    # input set untouched
    assert [i.energy for i in ts] == [i.energy for i in noisy_set()[0]]


def test_replay_reconstructs_training_set():
    ts, oracle = noisy_set(seed=2)
    res = run_training(ts, oracle, Tolerances(tol2=1e-9, max_rounds=3), FAST, seed=2)
    assert res.mutations
    rebuilt = replay(ts, res.mutations)
    assert [(i.id, i.energy, i.moments) for i in rebuilt] == \
        [(i.id, i.energy, i.moments) for i in res.training_set]
    first = replay(ts, res.mutations, up_to_round=1)
    assert len(first) == res.reports[1].set_size


def test_training_is_deterministic():
    runs = []
    for _ in range(2):
        ts, oracle = noisy_set(seed=4)
        res = run_training(ts, oracle, Tolerances(tol2=1e-9, max_rounds=2), FAST, seed=4)
        runs.append((res.params.to_vector().tobytes(), [r.cost_after for r in res.reports],
                     [(m.instance_id, m.new_energy) for m in res.mutations]))
    assert runs[0] == runs[1]


def test_multi_start_keeps_best():
    ts, oracle = clean_set(seed=1)
    res = run_training(ts, oracle, Tolerances(tol2=1e9), FAST, seed=0, n_starts=3)
    assert len(res.start_costs) == 3
    assert res.reports[1].cost_after == pytest.approx(min(res.start_costs), abs=1e-12)
    with pytest.raises(ValueError):
        run_training(ts, oracle, n_starts=0)
