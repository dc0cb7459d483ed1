import numpy as np
import pytest
from conftest import dense_energy

from qclattice import kernels
from qclattice.model import MeasurementOperator, param_count
from qclattice.statevector import PauliString

BACKENDS = ["python", "cython"]


def inputs(n, batch, rng):
    x = rng.uniform(0, 2 * np.pi, param_count(n))
    x[-1] = rng.uniform(0.5, 2.0)
    sigma = rng.choice([-1.0, 1.0], size=(batch, n))
    return x, sigma


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("ops", ["XY", "ZX", "XYX", "YZIX", "XYXY"])
def test_energies_match_dense(backend, ops, rng):
    mod = kernels.get_backend(backend)
    n = len(ops)
    x, sigma = inputs(n, 6, rng)
    e = mod.energies(x, sigma, *PauliString(ops).masks())
    ref = [dense_energy(x, s, n, ops) for s in sigma]
    np.testing.assert_allclose(e, ref, atol=1e-11)


@pytest.mark.parametrize("backend", BACKENDS)
def test_jacobian_matches_finite_differences(backend, rng):
    mod = kernels.get_backend(backend)
    masks = MeasurementOperator.default(4).pauli.masks()
    x, sigma = inputs(4, 3, rng)
    e, jac = mod.energies_and_jacobian(x, sigma, *masks)
    np.testing.assert_allclose(e, mod.energies(x, sigma, *masks), atol=1e-13)
    h = 1e-5
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        fd = (mod.energies(xp, sigma, *masks) - mod.energies(xm, sigma, *masks)) / (2 * h)
        np.testing.assert_allclose(jac[:, k], fd, atol=1e-7)


@pytest.mark.parametrize("n", [2, 5, 8])
def test_backends_agree(n, rng):
    py, cy = kernels.get_backend("python"), kernels.get_backend("cython")
    masks = PauliString(("XYZ" * n)[:n]).masks()
    x, sigma = inputs(n, 9, rng)
    np.testing.assert_allclose(py.energies(x, sigma, *masks), cy.energies(x, sigma, *masks), atol=1e-12)
    for a, b in zip(py.energies_and_jacobian(x, sigma, *masks), cy.energies_and_jacobian(x, sigma, *masks)):
        np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(py.statevectors(x, sigma, n), cy.statevectors(x, sigma, n), atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_bad_parameter_count(backend, rng):
    mod = kernels.get_backend(backend)
    x, sigma = inputs(4, 2, rng)
    with pytest.raises(ValueError):
        mod.energies(x[:-1], sigma, *MeasurementOperator.default(4).pauli.masks())


def test_backend_selection():
    assert kernels.BACKEND in BACKENDS
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
