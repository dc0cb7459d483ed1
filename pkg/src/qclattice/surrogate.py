"""Seeded stand-in for the electronic-structure energy oracle.

Ground truth is the linear composition reference plus a pair-interaction
lattice energy, so the centred energies the model trains on are exactly the
pair-interaction part.  Each query may instead land
in a metastable state: the energy sits ``delta`` above the ground state and the
Co moment proxies are wrong on at least one site.  Re-running a configuration
with moment hints close enough to the ground-state moments recovers the ground
state.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Protocol, Sequence

import numpy as np

from .data import E0_CO, E0_LI, DataInstance, postprocess
from .lattice import CO, LI, Configuration, ConfigurationError, as_matrix, enumerate_all

log = logging.getLogger(__name__)

MOMENT_LEVELS = (0.0, 1.0, 3.0)


class OracleError(RuntimeError):
    """The oracle cannot answer a query."""


class EnergyOracle(Protocol):
    def continue_relaxation(self, instance: DataInstance) -> float: ...

    def recompute_with_hints(
        self, config: Configuration, hint_moments: Sequence[float]
    ) -> tuple[float, tuple[float, ...], bool]: ...

    def compute_new(self, config: Configuration, instance_id: str | None = None) -> DataInstance: ...


@dataclass
class SurrogateSpec:
    """Everything needed to regenerate a surrogate oracle exactly."""

    n_sites: int
    seed: int = 0
    interaction_range: int = 3
    anomaly_rate: float = 0.2
    offset_min: float = 0.08
    offset_max: float = 0.4
    # spread (max - min) of the centred energies over all configurations, eV/cation
    target_spread: float = 1.0
    e0_li: float = E0_LI
    e0_co: float = E0_CO
    site_disorder: float = 0.1
    pair_decay: float = 0.5
    moment_range: int = 1
    moment_tolerance: float = 0.5
    artifact_rate: float = 0.0

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        if not 0.0 <= self.anomaly_rate <= 1.0:
            raise ValueError("anomaly_rate must lie in [0, 1]")
        if not 0.0 <= self.artifact_rate <= 1.0:
            raise ValueError("artifact_rate must lie in [0, 1]")
        if not 0.0 < self.offset_min <= self.offset_max:
            raise ValueError("need 0 < offset_min <= offset_max")
        if self.interaction_range < 1 or self.moment_range < 1:
            raise ValueError("ranges must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SurrogateSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown surrogate settings: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Coefficients:
    """Lattice energy ``J0 + sum_j J_j s_j + sum_{j<k} J_jk s_j s_k`` (eV/cation)."""

    j0: float
    point: np.ndarray
    pairs: dict[tuple[int, int], float] = field(default_factory=dict)

    def energies(self, sigma: np.ndarray) -> np.ndarray:
        sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
        e = self.j0 + sigma @ self.point
        for (j, k), v in self.pairs.items():
            e = e + v * sigma[:, j] * sigma[:, k]
        return e

    def scaled(self, factor: float) -> "Coefficients":
        return Coefficients(
            self.j0 * factor,
            self.point * factor,
            {key: v * factor for key, v in self.pairs.items()},
        )


def draw_coefficients(spec: SurrogateSpec) -> Coefficients:
    """Symmetric uniform draws, rescaled so the energy spread hits the target.

    Point terms share one lattice-wide value with small per-site disorder; pair
    terms depend on separation, shrinking by ``pair_decay`` per extra site of
    distance, again with per-pair disorder.  The constant is then chosen so the
    energies straddle zero symmetrically.
    """
    n, R = spec.n_sites, spec.interaction_range
    rng = np.random.default_rng([spec.seed, 0])
    d = spec.site_disorder
    j0 = rng.uniform(-1.0, 1.0)
    a = rng.uniform(-1.0, 1.0)
    point = a * (1.0 + d * rng.uniform(-1.0, 1.0, size=n))
    shell = rng.uniform(-1.0, 1.0, size=R) * spec.pair_decay ** np.arange(R)
    pairs = {}
    for j in range(n):
        for k in range(j + 1, min(n, j + R + 1)):
            pairs[(j, k)] = shell[k - j - 1] * (1.0 + d * rng.uniform(-1.0, 1.0))
    coeffs = Coefficients(j0, point, pairs)
    lo, hi = _range(coeffs, n)
    if hi - lo <= 0:
        raise OracleError("degenerate coefficient draw: all energies equal")
    coeffs = coeffs.scaled(spec.target_spread / (hi - lo))
    coeffs.j0 -= 0.5 * (lo + hi) * spec.target_spread / (hi - lo)
    return coeffs


def _range(coeffs: Coefficients, n: int, exact_limit: int = 16) -> tuple[float, float]:
    if n <= exact_limit:
        sigma = np.array(list(itertools.product((LI, CO), repeat=n)), dtype=np.float64)
    else:
        sigma = np.random.default_rng(0).choice([-1.0, 1.0], size=(1 << exact_limit, n))
    e = coeffs.energies(sigma)
    return float(e.min()), float(e.max())


class SurrogateOracle:
    """Synthetic oracle implementing :class:`EnergyOracle`."""

    source = "surrogate"

    def __init__(self, spec: SurrogateSpec, coefficients: Coefficients | None = None,
                 id_prefix: str = "s", stream: Sequence[int] = ()):
        self.spec = spec
        self.coefficients = coefficients if coefficients is not None else draw_coefficients(spec)
        if self.coefficients.point.shape != (spec.n_sites,):
            raise ValueError("coefficient vector does not match n_sites")
        # query randomness; ``stream`` separates e.g. data generation from training
        self._rng = np.random.default_rng([spec.seed, 1, *stream])
        # moment level each site takes whenever it is a magnetic Co
        table_rng = np.random.default_rng([spec.seed, 2])
        self._moment_levels = table_rng.choice([1.0, 3.0], size=spec.n_sites)
        self.id_prefix = id_prefix
        self._counter = 0

    # ground truth -----------------------------------------------------------

    def _check(self, c: Configuration) -> None:
        if c.n_sites != self.spec.n_sites:
            raise ConfigurationError(f"oracle has {self.spec.n_sites} sites, configuration has {c.n_sites}")

    def true_energy(self, c: Configuration) -> float:
        self._check(c)
        return float(self.true_energies([c])[0])

    def true_energies(self, configs: Sequence[Configuration]) -> np.ndarray:
        sigma = as_matrix(configs)
        x = np.mean(sigma == LI, axis=1)
        return postprocess(self.coefficients.energies(sigma), x, self.spec.e0_li, self.spec.e0_co)

    def ground_moments(self, c: Configuration) -> tuple[float, ...]:
        """0 for Co with no Li within ``moment_range`` sites, else the site's seeded level (1 or 3)."""
        self._check(c)
        r = self.spec.moment_range
        out = []
        for j, s in enumerate(c.sigma):
            if s != CO:
                continue
            lo, hi = max(0, j - r), min(c.n_sites, j + r + 1)
            n_li = sum(1 for k in range(lo, hi) if k != j and c.sigma[k] == LI)
            out.append(0.0 if n_li == 0 else float(self._moment_levels[j]))
        return tuple(out)

    def is_metastable(self, instance: DataInstance) -> bool:
        """Ground-truth flag for test harnesses; never consulted by the trainer."""
        return instance.energy > self.true_energy(instance.config) + 1e-12

    # queries ----------------------------------------------------------------

    def _next_id(self) -> str:
        self._counter += 1
        return f"{self.id_prefix}{self._counter:05d}"

    def _metastable(self, c: Configuration, rng: np.random.Generator) -> tuple[float, tuple[float, ...]]:
        delta = rng.uniform(self.spec.offset_min, self.spec.offset_max)
        ground = list(self.ground_moments(c))
        moments = list(ground)
        if ground:
            wrong = rng.random(len(ground)) < 0.5
            if not wrong.any():
                wrong[rng.integers(len(ground))] = True
            for i in np.flatnonzero(wrong):
                choices = [m for m in MOMENT_LEVELS if m != ground[i]]
                moments[i] = float(choices[rng.integers(len(choices))])
        return self.true_energy(c) + delta, tuple(moments)

    def sample_energy(
        self,
        c: Configuration,
        rng: np.random.Generator | None = None,
        instance_id: str | None = None,
        provenance: str = "",
    ) -> DataInstance:
        rng = rng if rng is not None else self._rng
        if rng.random() < self.spec.anomaly_rate:
            energy, moments = self._metastable(c, rng)
            converged = False
        else:
            energy, moments, converged = self.true_energy(c), self.ground_moments(c), True
        return DataInstance(
            id=instance_id or self._next_id(),
            config=c,
            energy=float(energy),
            moments=moments,
            converged=converged,
            source=self.source,
            provenance=provenance,
        )

    def compute_new(self, config: Configuration, instance_id: str | None = None) -> DataInstance:
        return self.sample_energy(config, instance_id=instance_id, provenance="compute_new")

    def metastable_instance(self, c: Configuration, instance_id: str | None = None,
                            provenance: str = "injected") -> DataInstance:
        """Force a metastable result, for building test sets with known anomalies."""
        energy, moments = self._metastable(c, self._rng)
        return DataInstance(instance_id or self._next_id(), c, float(energy), moments,
                            converged=False, source=self.source, provenance=provenance)

    def recompute_with_hints(self, config: Configuration, hint_moments: Sequence[float]):
        ground = self.ground_moments(config)
        hints = tuple(float(h) for h in hint_moments)
        if len(hints) != len(ground):
            raise ConfigurationError(
                f"{len(hints)} hint moments for {len(ground)} Co sites in {config}"
            )
        if all(abs(h - g) <= self.spec.moment_tolerance for h, g in zip(hints, ground)):
            return self.true_energy(config), ground, True
        energy, moments = self._metastable(config, self._rng)
        return energy, moments, False

    def continue_relaxation(self, instance: DataInstance) -> float:
        if instance.source != self.source:
            raise OracleError(f"instance {instance.id} was not produced by the surrogate")
        self._check(instance.config)
        if self.spec.artifact_rate > 0 and not instance.converged:
            if self._rng.random() < self.spec.artifact_rate:
                return self.true_energy(instance.config)
        return instance.energy


class ReplayOracle:
    """Oracle backed by a fixed list of precomputed records.

    Hinted recomputes and new configurations are answered with the lowest
    recorded energy for the configuration.
    """

    source = "replay"

    def __init__(self, records: Sequence[DataInstance], id_prefix: str = "r"):
        if not records:
            raise OracleError("replay oracle needs at least one record")
        self._best: dict[Configuration, DataInstance] = {}
        for rec in records:
            cur = self._best.get(rec.config)
            if cur is None or rec.energy < cur.energy:
                self._best[rec.config] = rec
        self.n_sites = records[0].config.n_sites
        self.id_prefix = id_prefix
        self._counter = 0

    def _lookup(self, c: Configuration) -> DataInstance:
        try:
            return self._best[c]
        except KeyError:
            raise OracleError(f"no recorded result for configuration {c}") from None

    def continue_relaxation(self, instance: DataInstance) -> float:
        return instance.energy

    def recompute_with_hints(self, config: Configuration, hint_moments: Sequence[float]):
        rec = self._lookup(config)
        return rec.energy, rec.moments, rec.converged

    def compute_new(self, config: Configuration, instance_id: str | None = None) -> DataInstance:
        rec = self._lookup(config)
        self._counter += 1
        return rec.updated(
            id=instance_id or f"{self.id_prefix}{self._counter:05d}",
            source=self.source,
            provenance=f"replay of {rec.id}",
        )


def sample_configurations(
    n_sites: int,
    count: int | str,
    seed: int,
    exclude: Sequence[Configuration] = (),
) -> list[Configuration]:
    """``"all"`` configurations in enumeration order, or ``count`` distinct random ones.

    Random draws are uniform over configurations not in ``exclude`` and are
    returned in draw order.
    """
    if count == "all":
        if exclude:
            raise ValueError("exclude is only meaningful for random sampling")
        return enumerate_all(n_sites)
    count = int(count)
    if count < 0:
        raise ValueError("count must be non-negative")
    pool = [c for c in enumerate_all(n_sites) if c not in set(exclude)]
    if count > len(pool):
        raise ValueError(f"cannot draw {count} distinct configurations from {len(pool)} available")
    rng = np.random.default_rng([seed, 3])
    return [pool[i] for i in rng.choice(len(pool), size=count, replace=False)]


def generate_instances(
    oracle: SurrogateOracle,
    configs: Sequence[Configuration],
    inject: int = 0,
    seed: int = 0,
) -> list[DataInstance]:
    """Query the oracle once per configuration, then append ``inject`` forced
    metastable duplicates of distinct configurations drawn from ``configs``."""
    out = [oracle.sample_energy(c, provenance="generated") for c in configs]
    if inject:
        if inject > len(configs):
            raise ValueError("more injected duplicates than configurations")
        rng = np.random.default_rng([seed, 4])
        for i in rng.choice(len(configs), size=inject, replace=False):
            out.append(oracle.metastable_instance(configs[i]))
    return out
