import numpy as np
import pytest
from scipy.optimize import rosen

from qclattice.optimizers import (
    CONVERGED,
    MAX_ITERS,
    OptimizationError,
    OptimizerSettings,
    adam_minimize,
    cobyla_minimize,
    two_stage_minimize,
)


def quad(x):
    return float((x[0] - 3.0) ** 2)


def quad_grad(x):
    return np.array([2.0 * (x[0] - 3.0)])


def test_cobyla_1d_quadratic():
    tr = cobyla_minimize(quad, np.zeros(1))
    assert abs(tr.x[0] - 3.0) < 1e-3
    assert tr.reason == CONVERGED


def test_cobyla_sphere():
    tr = cobyla_minimize(lambda x: float(x @ x), np.ones(5))
    assert tr.final_cost < 1e-6


def test_cobyla_rosenbrock_within_budget():
    tr = cobyla_minimize(rosen, np.array([-1.2, 1.0]), OptimizerSettings(max_iters=10000))
    assert tr.final_cost < 1e-2
    assert tr.n_evals <= 10000


def test_cobyla_budget_exhaustion():
    tr = cobyla_minimize(rosen, np.array([-1.2, 1.0]), OptimizerSettings(max_iters=30))
    assert tr.reason == MAX_ITERS
    assert tr.n_evals <= 30


def test_incumbent_is_monotone():
    tr = cobyla_minimize(rosen, np.array([-1.2, 1.0]), OptimizerSettings(max_iters=500))
    assert np.all(np.diff(tr.costs) <= 0)
    assert tr.final_cost <= tr.initial_cost


def test_non_finite_objective_aborts():
    with pytest.raises(OptimizationError, match="x ="):
        cobyla_minimize(lambda x: float("nan"), np.zeros(2))
    with pytest.raises(OptimizationError):
        adam_minimize(quad, lambda x: np.array([np.inf]), np.zeros(1))


@pytest.mark.parametrize("stop", ["step", "cost_window"])
def test_adam_quadratic(stop):
    # tol1 = 1e-4 stops while (x - 3)^2 is still ~1e-4, so tighten it here
    tr = adam_minimize(quad, quad_grad, np.zeros(1), OptimizerSettings(adam_lr=0.1, tol1=1e-8, adam_stop=stop))
    assert abs(tr.x[0] - 3.0) < 1e-3
    assert tr.reason == CONVERGED


def test_adam_default_tolerance_stops_near_minimum():
    tr = adam_minimize(quad, quad_grad, np.zeros(1))
    assert tr.reason == CONVERGED
    assert abs(tr.x[0] - 3.0) < 1e-2


def test_adam_zero_gradient_stays_put():
    x0 = np.array([0.4, -1.0])
    tr = adam_minimize(lambda x: 1.0, lambda x: np.zeros(2), x0)
    np.testing.assert_array_equal(tr.x, x0)
    assert tr.reason == CONVERGED
    assert tr.n_evals == 1


def test_adam_first_step_is_lr_sized():
    # with bias correction the first update has magnitude lr in every coordinate
    s = OptimizerSettings(adam_lr=0.05, max_iters=2)
    seen = []

    def vg(x):
        seen.append(x.copy())
        return float(x @ x), np.array([3.0, -0.2])

    adam_minimize(None, None, np.zeros(2), s, value_and_grad=vg)
    np.testing.assert_allclose(seen[1], [-0.05, 0.05], rtol=1e-6)


def test_two_stage_wiring():
    # converged COBYLA skips Adam unless asked
    tr = two_stage_minimize(quad, lambda x: (quad(x), quad_grad(x)), np.zeros(1))
    assert [t.method for t in tr] == ["cobyla"]
    tr = two_stage_minimize(quad, lambda x: (quad(x), quad_grad(x)), np.zeros(1),
                            OptimizerSettings(adam_after="always"))
    assert [t.method for t in tr] == ["cobyla", "adam"]
    tr = two_stage_minimize(rosen, lambda x: (rosen(x), np.zeros(2)), np.array([-1.2, 1.0]),
                            OptimizerSettings(max_iters=20))
    assert [t.method for t in tr] == ["cobyla", "adam"]


def test_deterministic():
    a = cobyla_minimize(rosen, np.array([-1.2, 1.0]), OptimizerSettings(max_iters=300))
    b = cobyla_minimize(rosen, np.array([-1.2, 1.0]), OptimizerSettings(max_iters=300))
    assert a.costs == b.costs


@pytest.mark.parametrize("kw", [{"max_iters": 0}, {"tol1": -1}, {"adam_beta1": 1.0},
                                {"adam_stop": "never"}, {"adam_after": "sometimes"}])
def test_settings_validation(kw):
    with pytest.raises(ValueError):
        OptimizerSettings(**kw)


def test_trace_csv():
    tr = cobyla_minimize(quad, np.zeros(1), OptimizerSettings(max_iters=5))
    lines = tr.to_csv().splitlines()
    assert lines[0] == "iteration,cost"
    assert len(lines) == len(tr.costs) + 1
