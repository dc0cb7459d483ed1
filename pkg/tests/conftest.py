"""Dense-matrix reference implementations shared by the tests.

These build every operator as a full 2^N x 2^N matrix and exponentiate it
with scipy, independently of the package's statevector engine and kernels.
"""

import numpy as np
import pytest
from scipy.linalg import expm

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def on_qubits(n, ops):
    """Kronecker product with ``ops[j]`` on qubit j (qubit 0 = least significant bit)."""
    out = np.ones((1, 1), dtype=complex)
    for j in reversed(range(n)):
        out = np.kron(out, ops.get(j, I2))
    return out


def pauli_word(ops):
    return on_qubits(len(ops), {j: PAULI[c] for j, c in enumerate(ops)})


def dense_state(x, sigma, n):
    """U2 H U1 H |0> with U = exp(i sum phi X) exp(i sum theta s Z + i sum theta_zz s s ZZ)."""
    x = np.asarray(x, dtype=float)
    L = 3 * n - 1
    hall = on_qubits(n, {j: H for j in range(n)})
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0
    for o in (0, L):
        theta, tzz, phi = x[o:o + n], x[o + n:o + 2 * n - 1], x[o + 2 * n - 1:o + L]
        A = sum(theta[j] * sigma[j] * on_qubits(n, {j: Z}) for j in range(n))
        A = A + sum(tzz[j] * sigma[j] * sigma[j + 1] * on_qubits(n, {j: Z, j + 1: Z}) for j in range(n - 1))
        B = sum(phi[j] * on_qubits(n, {j: X}) for j in range(n))
        psi = expm(1j * B) @ (expm(1j * A) @ (hall @ psi))
    return psi


def dense_energy(x, sigma, n, ops=None):
    ops = ops or "XY" * (n // 2)
    psi = dense_state(x, sigma, n)
    return float(x[-1] * np.real(np.vdot(psi, pauli_word(ops) @ psi)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria record one line each; repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
