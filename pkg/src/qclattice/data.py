"""Training instances and the composition-dependent energy shift."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .lattice import CO, Configuration, as_matrix, li_fraction

E0_LI = -10.39
E0_CO = -11.65


def preprocess(e_raw, x, e0_li: float = E0_LI, e0_co: float = E0_CO):
    """Subtract the linear composition reference ``x*E0_Li + (1-x)*E0_Co``."""
    x = np.asarray(x, dtype=np.float64) if np.ndim(x) else float(x)
    if np.any(np.asarray(x) < 0) or np.any(np.asarray(x) > 1):
        raise ValueError("Li fraction must lie in [0, 1]")
    return e_raw - (x * e0_li + (1.0 - x) * e0_co)


def postprocess(e_centered, x, e0_li: float = E0_LI, e0_co: float = E0_CO):
    """Inverse of :func:`preprocess`."""
    return e_centered + (x * e0_li + (1.0 - x) * e0_co)


@dataclass(frozen=True)
class DataInstance:
    """One oracle result.

    ``energy`` is the raw value in eV/cation; ``moments`` holds one magnetic
    moment proxy per Co site, in site order.
    """

    id: str
    config: Configuration
    energy: float
    moments: tuple[float, ...] = ()
    converged: bool = True
    source: str = "surrogate"
    provenance: str = ""

    def __post_init__(self):
        n_co = sum(1 for s in self.config.sigma if s == CO)
        if len(self.moments) != n_co:
            raise ValueError(
                f"instance {self.id}: {len(self.moments)} moments for {n_co} Co sites"
            )

    @property
    def li_fraction(self) -> float:
        return li_fraction(self.config)

    def energy_centered(self, e0_li: float = E0_LI, e0_co: float = E0_CO) -> float:
        return float(preprocess(self.energy, self.li_fraction, e0_li, e0_co))

    def co_sites(self) -> list[int]:
        return [j for j, s in enumerate(self.config.sigma) if s == CO]

    def moment_map(self) -> dict[int, float]:
        return dict(zip(self.co_sites(), self.moments))

    def updated(self, **changes) -> "DataInstance":
        return replace(self, **changes)


@dataclass
class TrainingSet:
    instances: list[DataInstance] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def __getitem__(self, i) -> DataInstance:
        return self.instances[i]

    @property
    def n_sites(self) -> int:
        if not self.instances:
            raise ValueError("empty training set")
        return self.instances[0].config.n_sites

    def index_of(self, instance_id: str) -> int:
        for i, inst in enumerate(self.instances):
            if inst.id == instance_id:
                return i
        raise KeyError(instance_id)

    def get(self, instance_id: str) -> DataInstance:
        return self.instances[self.index_of(instance_id)]

    def replace(self, instance: DataInstance) -> None:
        self.instances[self.index_of(instance.id)] = instance

    def add(self, instance: DataInstance) -> None:
        if any(inst.id == instance.id for inst in self.instances):
            raise ValueError(f"duplicate instance id {instance.id}")
        if self.instances and instance.config.n_sites != self.n_sites:
            raise ValueError("instance site count does not match the training set")
        self.instances.append(instance)

    def sigma(self) -> np.ndarray:
        return as_matrix(inst.config for inst in self.instances)

    def raw_energies(self) -> np.ndarray:
        return np.array([inst.energy for inst in self.instances])

    def li_fractions(self) -> np.ndarray:
        return np.array([inst.li_fraction for inst in self.instances])

    def centered_energies(self, e0_li: float = E0_LI, e0_co: float = E0_CO) -> np.ndarray:
        return preprocess(self.raw_energies(), self.li_fractions(), e0_li, e0_co)

    def copy(self) -> "TrainingSet":
        return TrainingSet(list(self.instances))

    @classmethod
    def of(cls, instances: Iterable[DataInstance]) -> "TrainingSet":
        out = cls()
        for inst in instances:
            out.add(inst)
        return out
