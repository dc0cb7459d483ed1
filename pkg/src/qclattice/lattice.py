"""Binary lattice configurations.

A configuration is a tuple of occupation variables, one per cationic site,
with +1 for Co and -1 for Li.  Sites are numbered 0..N-1 in a fixed linear
order; site j is mapped onto qubit j.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

CO = 1
LI = -1

_SPECIES = {"Co": CO, "Li": LI}
_SYMBOLS = {"+": CO, "-": LI, "−": LI}


class ConfigurationError(ValueError):
    """Raised for malformed configurations or configuration text."""


class CapacityError(ValueError):
    """Raised when an enumeration or simulation would exceed a size limit."""


@dataclass(frozen=True)
class Configuration:
    """Immutable vector of occupation variables."""

    sigma: tuple[int, ...]

    def __post_init__(self):
        sigma = tuple(int(s) for s in self.sigma)
        if not sigma:
            raise ConfigurationError("configuration must have at least one site")
        bad = [s for s in sigma if s not in (CO, LI)]
        if bad:
            raise ConfigurationError(f"occupation variables must be +1 or -1, got {bad[0]}")
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_sites(self) -> int:
        return len(self.sigma)

    def __len__(self) -> int:
        return len(self.sigma)

    def __iter__(self):
        return iter(self.sigma)

    def __getitem__(self, j):
        return self.sigma[j]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.sigma, dtype=np.int8)

    def to_signs(self) -> str:
        return "".join("+" if s == CO else "-" for s in self.sigma)

    def to_species(self) -> str:
        return "".join("Co" if s == CO else "Li" for s in self.sigma)

    def __str__(self) -> str:
        return self.to_signs()

    @classmethod
    def parse(cls, text: str) -> "Configuration":
        """Parse ``"+--+"`` or ``"CoLiLiCo"`` style text."""
        text = text.strip()
        if not text:
            raise ConfigurationError("empty configuration text")
        if text[0] in _SYMBOLS:
            try:
                return cls(tuple(_SYMBOLS[ch] for ch in text))
            except KeyError as exc:
                raise ConfigurationError(f"bad sign character {exc.args[0]!r} in {text!r}") from None
        labels = [text[i:i + 2] for i in range(0, len(text), 2)]
        return from_species(labels)


def from_species(labels: Sequence[str]) -> Configuration:
    """Map species tags (``"Co"``/``"Li"``) onto occupation variables."""
    if len(labels) == 0:
        raise ConfigurationError("no species labels given")
    sigma = []
    for label in labels:
        if label not in _SPECIES:
            raise ConfigurationError(f"unknown species tag {label!r}")
        sigma.append(_SPECIES[label])
    return Configuration(tuple(sigma))


def li_fraction(c: Configuration) -> float:
    """Fraction of sites occupied by Li."""
    return sum(1 for s in c.sigma if s == LI) / c.n_sites


def enumerate_all(n_sites: int, limit: int = 1 << 20) -> list[Configuration]:
    """Every configuration on ``n_sites`` sites, lexicographic over (-1, +1)."""
    if n_sites < 1:
        raise ConfigurationError("n_sites must be positive")
    if 2 ** n_sites > limit:
        raise CapacityError(f"2**{n_sites} configurations exceeds limit {limit}")
    return [Configuration(s) for s in itertools.product((LI, CO), repeat=n_sites)]


def hamming_distance(a: Configuration, b: Configuration) -> int:
    if a.n_sites != b.n_sites:
        raise ConfigurationError(f"site counts differ ({a.n_sites} vs {b.n_sites})")
    return sum(1 for x, y in zip(a.sigma, b.sigma) if x != y)


def flip_site(c: Configuration, j: int) -> Configuration:
    """Copy of ``c`` with site ``j`` swapped to the other species."""
    if not 0 <= j < c.n_sites:
        raise IndexError(f"site {j} out of range for {c.n_sites} sites")
    sigma = list(c.sigma)
    sigma[j] = -sigma[j]
    return Configuration(tuple(sigma))


def as_matrix(configs: Iterable[Configuration]) -> np.ndarray:
    """Stack configurations into an ``(n_configs, n_sites)`` float array."""
    rows = [c.sigma for c in configs]
    if not rows:
        raise ConfigurationError("no configurations")
    if len({len(r) for r in rows}) != 1:
        raise ConfigurationError("configurations have different site counts")
    return np.asarray(rows, dtype=np.float64)
