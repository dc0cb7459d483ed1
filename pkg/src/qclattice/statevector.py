"""Dense statevector simulation for the small gate set used by the energy model.

Conventions
-----------
* Qubit ``j`` is bit ``j`` of the basis-state index (qubit 0 is the least
  significant bit).
* Parameterised gates are written as ``exp(+i * angle * P)`` for a Pauli
  product ``P``.  The only gate following the usual ``exp(-i * lam * Z / 2)``
  rotation convention is :func:`apply_rz`, which exists for the CNOT-Rz-CNOT
  compilation of the ZZ entangler.

Gates act in place and return the state so calls can be chained.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lattice import CapacityError

MAX_QUBITS = 20
PAULI_LABELS = "IXYZ"

_SQRT1_2 = 1.0 / np.sqrt(2.0)


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2 ** self.n_qubits,):
            raise ValueError(
                f"expected {2 ** self.n_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def _split(self, j: int) -> np.ndarray:
        """View with bit ``j`` on axis 1: shape (high, 2, low)."""
        _check_qubit(self, j)
        return self.amplitudes.reshape(2 ** (self.n_qubits - j - 1), 2, 2 ** j)

    def dump(self, precision: int = 6) -> str:
        width = self.n_qubits
        lines = []
        for idx, a in enumerate(self.amplitudes):
            bits = format(idx, f"0{width}b")
            lines.append(f"{bits}  {a.real:+.{precision}f} {a.imag:+.{precision}f}j")
        return "\n".join(lines)


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis; ``ops[j]`` acts on qubit ``j``."""

    ops: str

    def __post_init__(self):
        ops = self.ops.upper()
        if not ops or any(ch not in PAULI_LABELS for ch in ops):
            raise ValueError(f"Pauli string must be a non-empty word over IXYZ, got {self.ops!r}")
        object.__setattr__(self, "ops", ops)

    def __len__(self) -> int:
        return len(self.ops)

    def masks(self) -> tuple[int, int, int]:
        """Return (flip mask, phase mask, number of Y factors).

        ``P|b> = i**n_y * (-1)**popcount(b & phase_mask) |b ^ flip_mask>``.
        """
        flip = phase = n_y = 0
        for j, op in enumerate(self.ops):
            if op in "XY":
                flip |= 1 << j
            if op in "YZ":
                phase |= 1 << j
            if op == "Y":
                n_y += 1
        return flip, phase, n_y

    def matrix(self) -> np.ndarray:
        """Dense matrix, for checking against small cases only."""
        mats = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        out = np.ones((1, 1), dtype=complex)
        # highest qubit is the leftmost Kronecker factor
        for op in reversed(self.ops):
            out = np.kron(out, mats[op])
        return out


def _check_qubit(s: StateVector, j: int) -> None:
    if not 0 <= j < s.n_qubits:
        raise IndexError(f"qubit {j} out of range for {s.n_qubits} qubits")


def init_zero(n: int, max_qubits: int = MAX_QUBITS) -> StateVector:
    if n < 1:
        raise ValueError("need at least one qubit")
    if n > max_qubits:
        raise CapacityError(f"{n} qubits exceeds the configured maximum of {max_qubits}")
    amps = np.zeros(2 ** n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n, amps)


def apply_hadamard(s: StateVector, j: int) -> StateVector:
    v = s._split(j)
    a0 = v[:, 0, :].copy()
    a1 = v[:, 1, :]
    v[:, 0, :] = (a0 + a1) * _SQRT1_2
    v[:, 1, :] = (a0 - a1) * _SQRT1_2
    return s


def apply_hadamard_all(s: StateVector) -> StateVector:
    for j in range(s.n_qubits):
        apply_hadamard(s, j)
    return s


def apply_exp_z(s: StateVector, j: int, angle: float) -> StateVector:
    """exp(i*angle*Z_j): bit j = 0 gains e^{i angle}, bit j = 1 gains e^{-i angle}."""
    v = s._split(j)
    ph = np.exp(1j * angle)
    v[:, 0, :] *= ph
    v[:, 1, :] *= np.conj(ph)
    return s


def apply_exp_x(s: StateVector, j: int, angle: float) -> StateVector:
    """exp(i*angle*X_j) = cos(angle) I + i sin(angle) X_j."""
    v = s._split(j)
    c, isn = np.cos(angle), 1j * np.sin(angle)
    a0 = v[:, 0, :].copy()
    a1 = v[:, 1, :].copy()
    v[:, 0, :] = c * a0 + isn * a1
    v[:, 1, :] = isn * a0 + c * a1
    return s


def _bits(n: int, j: int) -> np.ndarray:
    return (np.arange(2 ** n) >> j) & 1


def apply_exp_zz(s: StateVector, j: int, k: int, angle: float) -> StateVector:
    """exp(i*angle*Z_j Z_k), applied as a diagonal phase."""
    _check_qubit(s, j)
    _check_qubit(s, k)
    if j == k:
        raise ValueError("ZZ entangler needs two distinct qubits")
    parity = _bits(s.n_qubits, j) ^ _bits(s.n_qubits, k)
    s.amplitudes *= np.where(parity == 0, np.exp(1j * angle), np.exp(-1j * angle))
    return s


def apply_cnot(s: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(s, control)
    _check_qubit(s, target)
    if control == target:
        raise ValueError("control and target must differ")
    idx = np.arange(2 ** s.n_qubits)
    src = np.where((idx >> control) & 1, idx ^ (1 << target), idx)
    s.amplitudes[:] = s.amplitudes[src]
    return s


def apply_rz(s: StateVector, j: int, lam: float) -> StateVector:
    """Standard rotation Rz(lam) = exp(-i*lam*Z_j/2)."""
    return apply_exp_z(s, j, -0.5 * lam)


def apply_exp_zz_compiled(s: StateVector, j: int, k: int, angle: float) -> StateVector:
    """exp(i*angle*Z_j Z_k) as CNOT(j->k) Rz_k(-2*angle) CNOT(j->k)."""
    apply_cnot(s, j, k)
    apply_rz(s, k, -2.0 * angle)
    apply_cnot(s, j, k)
    return s


def apply_pauli(s: StateVector, p: PauliString) -> np.ndarray:
    """Return the amplitudes of ``P|s>`` (the state itself is left untouched)."""
    if len(p) != s.n_qubits:
        raise ValueError(f"Pauli string has {len(p)} factors for {s.n_qubits} qubits")
    flip, phase, n_y = p.masks()
    idx = np.arange(2 ** s.n_qubits)
    sign = 1 - 2 * (_popcount(idx & phase) & 1)
    out = np.empty_like(s.amplitudes)
    out[idx ^ flip] = (1j ** n_y) * sign * s.amplitudes
    return out


def expectation(s: StateVector, p: PauliString, imag_tol: float = 1e-10) -> float:
    value = np.vdot(s.amplitudes, apply_pauli(s, p))
    if abs(value.imag) > imag_tol:
        raise ArithmeticError(f"expectation has imaginary residual {value.imag:.3e}")
    return float(value.real)


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


def pauli_from_ops(ops: Sequence[str] | str) -> PauliString:
    return PauliString("".join(ops))
