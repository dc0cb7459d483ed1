import numpy as np
import pytest
from conftest import H, X, Z, on_qubits, pauli_word
from scipy.linalg import expm

from qclattice import statevector as sv
from qclattice.lattice import CapacityError


def random_state(n, rng):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return sv.StateVector(n, v / np.linalg.norm(v))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_single_qubit_gates_match_dense(n, rng):
    for j in range(n):
        a = rng.uniform(-3, 3)
        s = random_state(n, rng)
        ref = s.amplitudes.copy()
        np.testing.assert_allclose(sv.apply_hadamard(s.copy(), j).amplitudes,
                                   on_qubits(n, {j: H}) @ ref, atol=1e-13)
        np.testing.assert_allclose(sv.apply_exp_z(s.copy(), j, a).amplitudes,
                                   expm(1j * a * on_qubits(n, {j: Z})) @ ref, atol=1e-13)
        np.testing.assert_allclose(sv.apply_exp_x(s.copy(), j, a).amplitudes,
                                   expm(1j * a * on_qubits(n, {j: X})) @ ref, atol=1e-13)


def test_exp_z_phase_convention():
    # exp(+i a Z): bit 0 picks up e^{ia}, bit 1 picks up e^{-ia}
    s = sv.apply_exp_z(sv.apply_hadamard(sv.init_zero(1), 0), 0, 0.3)
    np.testing.assert_allclose(s.amplitudes, np.array([np.exp(0.3j), np.exp(-0.3j)]) / np.sqrt(2))


@pytest.mark.parametrize("j,k", [(0, 1), (1, 2), (0, 2), (2, 0)])
def test_zz_diagonal_and_compiled_match_dense(j, k, rng):
    n, a = 3, rng.uniform(-3, 3)
    s = random_state(n, rng)
    ref = expm(1j * a * on_qubits(n, {j: Z, k: Z})) @ s.amplitudes
    np.testing.assert_allclose(sv.apply_exp_zz(s.copy(), j, k, a).amplitudes, ref, atol=1e-13)
    np.testing.assert_allclose(sv.apply_exp_zz_compiled(s.copy(), j, k, a).amplitudes, ref, atol=1e-13)


def test_zz_same_qubit_rejected():
    with pytest.raises(ValueError):
        sv.apply_exp_zz(sv.init_zero(2), 1, 1, 0.1)


def test_cnot_truth_table():
    for b in range(4):
        s = sv.StateVector(2, np.eye(4, dtype=complex)[b])
        out = np.flatnonzero(np.abs(sv.apply_cnot(s, 0, 1).amplitudes) > 0.5)[0]
        expected = b ^ 2 if b & 1 else b
        assert out == expected


@pytest.mark.parametrize("ops", ["X", "Y", "Z", "XY", "YX", "ZIY", "XYXY", "IYZX"])
def test_pauli_masks_and_expectation(ops, rng):
    p = sv.PauliString(ops)
    np.testing.assert_allclose(p.matrix(), pauli_word(ops))
    s = random_state(len(ops), rng)
    np.testing.assert_allclose(sv.apply_pauli(s, p), pauli_word(ops) @ s.amplitudes, atol=1e-14)
    ref = np.vdot(s.amplitudes, pauli_word(ops) @ s.amplitudes).real
    assert sv.expectation(s, p) == pytest.approx(ref, abs=1e-13)


def test_pauli_rejects_bad_words():
    for bad in ["", "XQ", "AB"]:
        with pytest.raises(ValueError):
            sv.PauliString(bad)


def test_capacity_limit():
    with pytest.raises(CapacityError):
        sv.init_zero(sv.MAX_QUBITS + 1)
    with pytest.raises(IndexError):
        sv.apply_hadamard(sv.init_zero(2), 2)


def test_gates_preserve_norm(rng):
    s = random_state(4, rng)
    for j in range(4):
        sv.apply_exp_x(sv.apply_exp_z(sv.apply_hadamard(s, j), j, 0.7), j, -1.1)
    sv.apply_exp_zz(s, 0, 3, 2.2)
    assert s.norm() == pytest.approx(1.0, abs=1e-13)
