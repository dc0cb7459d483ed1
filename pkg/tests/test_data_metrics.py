import math

import numpy as np
import pytest

from qclattice.data import E0_CO, E0_LI, DataInstance, TrainingSet, postprocess, preprocess
from qclattice.lattice import Configuration
from qclattice.model import CircuitParams
from qclattice.training import cost, metrics, rmse


def inst(i, text, energy, moments=None):
    c = Configuration.parse(text)
    n_co = text.count("+")
    return DataInstance(f"i{i}", c, energy, tuple(moments or [0.0] * n_co))


def test_preprocess_reference_points():
    assert preprocess(-11.65, 0.0) == 0.0
    assert preprocess(-10.39, 1.0) == 0.0
    assert preprocess(-11.02, 0.5) == pytest.approx(0.0, abs=1e-15)


def test_preprocess_round_trip(rng):
    e = rng.uniform(-12, -10, 50)
    x = rng.uniform(0, 1, 50)
    np.testing.assert_allclose(postprocess(preprocess(e, x), x), e, atol=1e-14)


def test_preprocess_rejects_bad_fraction():
    with pytest.raises(ValueError):
        preprocess(-11.0, 1.5)


def test_cost_examples():
    assert rmse([0.0, 0.0]) == 0.0
    assert rmse([1.0, 2.0]) == pytest.approx(math.sqrt(2.5), abs=1e-12)
    assert rmse([-0.37]) == pytest.approx(0.37)
    with pytest.raises(ValueError):
        rmse([])


def test_cost_on_training_set_with_zero_model():
    ts = TrainingSet.of([inst(0, "++", -11.65 + 0.2), inst(1, "--", -10.39 - 0.1)])
    p = CircuitParams.zeros(2, scale=1.0)
    assert cost(p, ts) == pytest.approx(math.sqrt((0.04 + 0.01) / 2), abs=1e-12)
    assert cost(p, TrainingSet.of(reversed(list(ts)))) == cost(p, ts)
    with pytest.raises(ValueError):
        cost(p, TrainingSet())


def test_metric_examples():
    m = metrics([1.0, 2.0], [1.0, 2.0])
    assert m == {"rmse": 0.0, "mape": 0.0, "r2": 1.0}
    t = np.array([1.0, 4.0, 2.0])
    assert metrics(np.full(3, t.mean()), t)["r2"] == pytest.approx(0.0, abs=1e-15)
    m = metrics([-10.1, -11.9], [-10.0, -12.0])
    assert m["rmse"] == pytest.approx(0.1, abs=1e-9)
    assert m["mape"] == pytest.approx((0.1 / 10 + 0.1 / 12) / 2 * 100, abs=1e-9)


def test_mape_undefined_for_zero_target():
    m = metrics([0.1, 1.0], [0.0, 1.0])
    assert m["mape"] is None
    assert m["rmse"] == pytest.approx(math.sqrt(0.005))


def test_instance_invariants():
    a = inst(0, "+-+", -11.0, [1.0, 0.0])
    assert a.co_sites() == [0, 2]
    assert a.moment_map() == {0: 1.0, 2: 0.0}
    assert a.energy_centered() == preprocess(-11.0, 1 / 3, E0_LI, E0_CO)
    with pytest.raises(ValueError):
        inst(1, "+-+", -11.0, [1.0])


def test_training_set_operations():
    ts = TrainingSet.of([inst(0, "+-", -11.0), inst(1, "-+", -11.1)])
    with pytest.raises(ValueError):
        ts.add(inst(0, "++", -11.2))
    with pytest.raises(ValueError):
        ts.add(inst(5, "+++", -11.2))
    ts.replace(ts.get("i1").updated(energy=-12.0))
    assert ts.raw_energies().tolist() == [-11.0, -12.0]
    with pytest.raises(KeyError):
        ts.get("missing")
    # duplicate configurations with different energies are allowed
    ts.add(inst(2, "+-", -10.9))
    assert len(ts) == 3
