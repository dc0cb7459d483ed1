"""Two-layer parameterised circuit energy model.

Each layer is ``exp(i sum_j phi_j X_j) exp(i sum_j theta_j s_j Z_j + i sum_j
theta_zz_j s_j s_j+1 Z_j Z_j+1)`` and the state is

    U(layer 2) H^N U(layer 1) H^N |0...0>

The predicted (centred) energy is ``scale * <psi| P |psi>`` with ``P`` the
alternating ``X Y X Y ...`` string unless another Pauli word is supplied.

Flat parameter order: layer-1 theta[N], theta_zz[N-1], phi[N]; the same for
layer 2; then the scale factor.  That is ``6N - 1`` numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from . import statevector as sv
from .lattice import Configuration, as_matrix

ANGLE_BLOCKS = ("theta", "theta_zz", "phi")


def param_count(n_sites: int) -> int:
    if n_sites < 2:
        raise ValueError("the circuit model needs at least two sites")
    return 6 * n_sites - 1


def param_names(n_sites: int) -> list[str]:
    names = []
    for layer in (1, 2):
        names += [f"theta{layer}[{j}]" for j in range(n_sites)]
        names += [f"theta_zz{layer}[{j},{j + 1}]" for j in range(n_sites - 1)]
        names += [f"phi{layer}[{j}]" for j in range(n_sites)]
    return names + ["s"]


@dataclass
class Layer:
    theta: np.ndarray
    theta_zz: np.ndarray
    phi: np.ndarray


@dataclass
class CircuitParams:
    """Angles of both layers plus the energy scale ``s`` (eV/cation)."""

    n_sites: int
    layers: tuple[Layer, Layer]
    scale: float

    @classmethod
    def from_vector(cls, x: Sequence[float], n_sites: int) -> "CircuitParams":
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (param_count(n_sites),):
            raise ValueError(
                f"expected {param_count(n_sites)} parameters for {n_sites} sites, got {x.shape}"
            )
        n = n_sites
        L = 3 * n - 1
        layers = tuple(
            Layer(
                theta=x[o:o + n].copy(),
                theta_zz=x[o + n:o + 2 * n - 1].copy(),
                phi=x[o + 2 * n - 1:o + L].copy(),
            )
            for o in (0, L)
        )
        return cls(n, layers, float(x[-1]))

    @classmethod
    def zeros(cls, n_sites: int, scale: float = 0.0) -> "CircuitParams":
        x = np.zeros(param_count(n_sites))
        x[-1] = scale
        return cls.from_vector(x, n_sites)

    @classmethod
    def random(cls, n_sites: int, rng: np.random.Generator, scale: float = 1.0) -> "CircuitParams":
        """Angles uniform in [0, 2 pi)."""
        x = np.empty(param_count(n_sites))
        x[:-1] = rng.uniform(0.0, 2.0 * np.pi, size=x.size - 1)
        x[-1] = scale
        return cls.from_vector(x, n_sites)

    def to_vector(self) -> np.ndarray:
        parts = []
        for layer in self.layers:
            parts += [layer.theta, layer.theta_zz, layer.phi]
        return np.concatenate(parts + [np.array([self.scale])])

    def with_scale(self, scale: float) -> "CircuitParams":
        x = self.to_vector()
        x[-1] = scale
        return CircuitParams.from_vector(x, self.n_sites)


@dataclass(frozen=True)
class MeasurementOperator:
    pauli: sv.PauliString = field()

    @classmethod
    def default(cls, n_sites: int) -> "MeasurementOperator":
        """X on sites 0, 2, 4, ... and Y on sites 1, 3, 5, ..."""
        if n_sites < 2 or n_sites % 2:
            raise ValueError(
                f"the default X/Y measurement operator needs an even site count, got {n_sites}"
            )
        return cls(sv.PauliString("XY" * (n_sites // 2)))

    @classmethod
    def parse(cls, text: str) -> "MeasurementOperator":
        return cls(sv.PauliString(text))

    @property
    def ops(self) -> str:
        return self.pauli.ops

    def __len__(self) -> int:
        return len(self.pauli)


def _resolve(p: CircuitParams, n_sites: int, m: MeasurementOperator | None) -> MeasurementOperator:
    if p.n_sites != n_sites:
        raise ValueError(f"parameters are for {p.n_sites} sites, configuration has {n_sites}")
    if m is None:
        m = MeasurementOperator.default(n_sites)
    if len(m) != n_sites:
        raise ValueError(f"measurement operator has {len(m)} factors for {n_sites} sites")
    return m


def build_state(p: CircuitParams, c: Configuration, compiled_zz: bool = False) -> sv.StateVector:
    """Prepare the circuit state gate by gate with the statevector engine.

    With ``compiled_zz`` the entanglers go through CNOT-Rz-CNOT instead of the
    diagonal phase.
    """
    n = c.n_sites
    if p.n_sites != n:
        raise ValueError(f"parameters are for {p.n_sites} sites, configuration has {n}")
    sigma = c.sigma
    zz = sv.apply_exp_zz_compiled if compiled_zz else sv.apply_exp_zz
    state = sv.init_zero(n)
    for layer in p.layers:
        sv.apply_hadamard_all(state)
        for j in range(n):
            sv.apply_exp_z(state, j, layer.theta[j] * sigma[j])
        for j in range(n - 1):
            zz(state, j, j + 1, layer.theta_zz[j] * sigma[j] * sigma[j + 1])
        for j in range(n):
            sv.apply_exp_x(state, j, layer.phi[j])
    return state


def predict_energy(p: CircuitParams, c: Configuration, m: MeasurementOperator | None = None) -> float:
    """Centred energy ``s * <psi|P|psi>`` for one configuration."""
    return float(predict_energies(p, [c], m)[0])


def predict_energies(
    p: CircuitParams | np.ndarray,
    configs: Sequence[Configuration] | np.ndarray,
    m: MeasurementOperator | None = None,
) -> np.ndarray:
    """Batched :func:`predict_energy`; ``configs`` may be an (B, N) sign array."""
    sigma = configs if isinstance(configs, np.ndarray) else as_matrix(configs)
    n = sigma.shape[1]
    if isinstance(p, CircuitParams):
        m = _resolve(p, n, m)
        x = p.to_vector()
    else:
        x = np.asarray(p, dtype=np.float64)
        if x.shape != (param_count(n),):
            raise ValueError(f"expected {param_count(n)} parameters, got {x.shape}")
        m = m if m is not None else MeasurementOperator.default(n)
    flip, phase, n_y = m.pauli.masks()
    return kernels.energies(x, sigma, flip, phase, n_y)


def energies_and_jacobian(x: np.ndarray, sigma: np.ndarray, m: MeasurementOperator):
    flip, phase, n_y = m.pauli.masks()
    return kernels.energies_and_jacobian(x, sigma, flip, phase, n_y)


def gradient(
    p: CircuitParams,
    c: Configuration,
    m: MeasurementOperator | None = None,
    method: str = "adjoint",
) -> np.ndarray:
    """d E/d(parameter) in flat order.

    ``method`` is ``"adjoint"`` (reverse sweep through the circuit),
    ``"shift"`` (parameter-shift rule) or ``"fd"`` (central differences).
    """
    m = _resolve(p, c.n_sites, m)
    x = p.to_vector()
    sigma = as_matrix([c])
    if method == "adjoint":
        return energies_and_jacobian(x, sigma, m)[1][0]
    if method == "shift":
        return parameter_shift_jacobian(x, sigma, m)[0]
    if method == "fd":
        return finite_difference_jacobian(x, sigma, m)[0]
    raise ValueError(f"unknown gradient method {method!r}")


def parameter_shift_jacobian(x: np.ndarray, sigma: np.ndarray, m: MeasurementOperator) -> np.ndarray:
    # Each angle enters one exp(i a c P) gate with c = +-1 and P^2 = I, so
    # dE/da = E(a + pi/4) - E(a - pi/4).
    flip, phase, n_y = m.pauli.masks()
    jac = np.empty((sigma.shape[0], x.size))
    for k in range(x.size - 1):
        xp = x.copy()
        xm = x.copy()
        xp[k] += np.pi / 4
        xm[k] -= np.pi / 4
        jac[:, k] = kernels.energies(xp, sigma, flip, phase, n_y) - kernels.energies(
            xm, sigma, flip, phase, n_y
        )
    unit = x.copy()
    unit[-1] = 1.0
    jac[:, -1] = kernels.energies(unit, sigma, flip, phase, n_y)
    return jac


def finite_difference_jacobian(
    x: np.ndarray, sigma: np.ndarray, m: MeasurementOperator, h: float = 1e-5
) -> np.ndarray:
    flip, phase, n_y = m.pauli.masks()
    jac = np.empty((sigma.shape[0], x.size))
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        jac[:, k] = (
            kernels.energies(xp, sigma, flip, phase, n_y) - kernels.energies(xm, sigma, flip, phase, n_y)
        ) / (2 * h)
    return jac


@dataclass
class SweepResult:
    """Energies from one-at-a-time angle sweeps.

    ``table[k, a, c]`` is E for angle parameter ``k`` set to ``grid[a]`` on
    configuration ``c`` while every other angle is held at 1.0 and s = 1.
    """

    configs: list[Configuration]
    grid: np.ndarray
    table: np.ndarray
    names: list[str]
    const_tol: float = 1e-9

    @property
    def ranges(self) -> np.ndarray:
        """max - min over the grid, shape (n_params, n_configs)."""
        return self.table.max(axis=1) - self.table.min(axis=1)

    @property
    def constant_params(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(np.all(self.ranges < self.const_tol, axis=1))]

    def constant_values(self) -> np.ndarray:
        """(n_constant, n_configs) values of the constant parameters."""
        return self.table[self.constant_params, 0, :]


def sensitivity_sweep(
    configs: Sequence[Configuration],
    grid: int | Sequence[float] = 64,
    m: MeasurementOperator | None = None,
    fixed_value: float = 1.0,
    const_tol: float = 1e-9,
) -> SweepResult:
    configs = list(configs)
    if not configs:
        raise ValueError("no configurations to sweep")
    sigma = as_matrix(configs)
    n = sigma.shape[1]
    if isinstance(grid, (int, np.integer)):
        if grid < 1:
            raise ValueError("grid needs at least one point")
        grid = np.linspace(0.0, 2.0 * np.pi, int(grid))
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty angle grid")
    m = m if m is not None else MeasurementOperator.default(n)
    n_angles = param_count(n) - 1
    base = np.full(n_angles + 1, fixed_value)
    base[-1] = 1.0
    table = np.empty((n_angles, grid.size, len(configs)))
    for k in range(n_angles):
        for a, angle in enumerate(grid):
            x = base.copy()
            x[k] = angle
            table[k, a] = predict_energies(x, sigma, m)
    return SweepResult(configs, grid, table, param_names(n)[:-1], const_tol)


def single_substitution_configs(n_sites: int = 8) -> list[Configuration]:
    """All-Li configuration followed by each single-Co substitution."""
    configs = [Configuration((-1,) * n_sites)]
    for j in range(n_sites):
        sigma = [-1] * n_sites
        sigma[j] = 1
        configs.append(Configuration(tuple(sigma)))
    return configs
