"""Cost, metrics and the round-based training workflow."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from . import anomaly, kernels
from .data import E0_CO, E0_LI, DataInstance, TrainingSet
from .lattice import Configuration
from .model import CircuitParams, MeasurementOperator
from .optimizers import OptimizationTrace, OptimizerSettings, two_stage_minimize
from .surrogate import EnergyOracle, OracleError

log = logging.getLogger(__name__)

# donors whose moments may be combined into one hint vector; None means all eligible
DEFAULT_MAX_DONORS: int | None = None


def default_optimizer_settings(tol1: float = 1e-4) -> OptimizerSettings:
    """Optimizer settings used by training: Adam refines after every COBYLA stage."""
    return OptimizerSettings(tol1=tol1, adam_after="always")


@dataclass
class Tolerances:
    tol1: float = 1e-4
    tol2: float = 0.03
    tol3_initial: float = 0.1
    tol3_late: float = 0.06
    max_rounds: int = 12
    # tol3 drops to tol3_late once a round ends below trigger_factor * tol2
    trigger_factor: float = 2.0

    def __post_init__(self):
        for name in ("tol1", "tol2", "tol3_initial", "tol3_late", "trigger_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.tol3_late < self.tol3_initial:
            raise ValueError("tol3_late must be smaller than tol3_initial")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")

    @property
    def trigger(self) -> float:
        return self.trigger_factor * self.tol2


@dataclass
class RoundReport:
    """Summary of one round; round 0 describes the starting point."""

    round: int
    cost_before: float
    cost_after: float
    tol3: float | None = None
    flagged: int = 0
    replaced: int = 0
    added: int = 0
    set_size: int = 0
    moment_histogram: dict[str, int] = field(default_factory=dict)
    actions: list[anomaly.AnomalyAction] = field(default_factory=list)

    @property
    def not_replaced(self) -> int:
        return self.flagged - self.replaced


@dataclass
class Mutation:
    """One change to the training set, enough to replay it from the initial set."""

    round: int
    kind: str  # "replace" or "add"
    instance_id: str
    old_energy: float | None
    new_energy: float
    moments: tuple[float, ...]
    converged: bool
    config: str
    provenance: str


@dataclass
class TrainingResult:
    params: CircuitParams
    converged: bool
    reports: list[RoundReport]
    traces: list[list[OptimizationTrace]]
    training_set: TrainingSet
    mutations: list[Mutation]
    start_costs: list[float] = field(default_factory=list)

    @property
    def final_cost(self) -> float:
        return self.reports[-1].cost_after

    @property
    def rounds(self) -> int:
        return len(self.reports) - 1


def rmse(residuals) -> float:
    r = np.asarray(residuals, dtype=np.float64)
    if r.size == 0:
        raise ValueError("cost of an empty set is undefined")
    return float(np.sqrt(np.mean(r * r)))


def cost(p, ts: TrainingSet, m: MeasurementOperator | None = None,
         e0_li: float = E0_LI, e0_co: float = E0_CO) -> float:
    """Root-mean-square error over centred energies."""
    if len(ts) == 0:
        raise ValueError("cost of an empty set is undefined")
    return rmse(anomaly.residuals(p, ts, m, e0_li, e0_co))


def metrics(predictions, targets) -> dict[str, float | None]:
    """rmse, mape (percent) and r2.  mape is ``None`` if any target is zero."""
    pred = np.asarray(predictions, dtype=np.float64)
    tgt = np.asarray(targets, dtype=np.float64)
    if pred.shape != tgt.shape or pred.size == 0:
        raise ValueError("predictions and targets must be non-empty and equally long")
    res = pred - tgt
    mape = None
    if np.all(tgt != 0):
        mape = float(np.mean(np.abs(res) / np.abs(tgt)) * 100.0)
    ss_tot = float(np.sum((tgt - tgt.mean()) ** 2))
    ss_res = float(np.sum(res * res))
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res == 0 else -math.inf
    return {"rmse": rmse(res), "mape": mape, "r2": r2}


def moment_histogram(ts: TrainingSet, resolution: float = 0.5) -> dict[str, int]:
    """Count of Co moments rounded to ``resolution``, keyed by the rounded value."""
    counts = Counter()
    for inst in ts:
        for mu in inst.moments:
            counts[round(mu / resolution) * resolution] += 1
    return {f"{k:g}": counts[k] for k in sorted(counts)}


def initial_params(ts: TrainingSet, rng: np.random.Generator,
                   e0_li: float = E0_LI, e0_co: float = E0_CO) -> CircuitParams:
    """Uniform [0, 2pi) angles; s is half the spread of the centred energies."""
    e = ts.centered_energies(e0_li, e0_co)
    scale = 0.5 * float(e.max() - e.min())
    return CircuitParams.random(ts.n_sites, rng, scale=scale if scale > 0 else 1.0)


def objectives(ts: TrainingSet, m: MeasurementOperator,
               e0_li: float = E0_LI, e0_co: float = E0_CO):
    """Flat-vector cost and (cost, gradient) closures over a frozen copy of ``ts``."""
    sigma = ts.sigma()
    target = ts.centered_energies(e0_li, e0_co)
    flip, phase, n_y = m.pauli.masks()
    n_data = len(target)

    def f(x):
        r = kernels.energies(x, sigma, flip, phase, n_y) - target
        return math.sqrt(float(r @ r) / n_data)

    def fg(x):
        e, jac = kernels.energies_and_jacobian(x, sigma, flip, phase, n_y)
        r = e - target
        c = math.sqrt(float(r @ r) / n_data)
        if c == 0.0:
            return c, np.zeros_like(x)
        return c, jac.T @ r / (n_data * c)

    return f, fg


def run_training(
    ts: TrainingSet,
    oracle: EnergyOracle,
    tolerances: Tolerances | None = None,
    settings: OptimizerSettings | None = None,
    seed: int = 0,
    m: MeasurementOperator | None = None,
    n_starts: int = 1,
    max_donors: int | None = DEFAULT_MAX_DONORS,
    initial: CircuitParams | None = None,
    e0_li: float = E0_LI,
    e0_co: float = E0_CO,
) -> TrainingResult:
    """Alternate optimisation and anomaly treatment until the cost reaches tol2.

    Round 1 optimises from ``n_starts`` seeded random starting points (or from
    ``initial``) and keeps the best; later rounds warm-start from the previous
    round.  ``ts`` itself is never mutated; the evolved set is returned.
    """
    tol = tolerances or Tolerances()
    settings = settings or default_optimizer_settings(tol.tol1)
    if settings.tol1 != tol.tol1:
        settings = OptimizerSettings(**{**asdict(settings), "tol1": tol.tol1})
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    if max_donors is not None and max_donors < 1:
        raise ValueError("max_donors must be at least 1 or None")
    ts = ts.copy()
    n = ts.n_sites
    m = m or MeasurementOperator.default(n)
    init_rng = np.random.default_rng([seed, 0])
    treat_rng = np.random.default_rng([seed, 1])

    if initial is not None:
        starts = [initial]
    else:
        starts = [initial_params(ts, init_rng, e0_li, e0_co) for _ in range(n_starts)]
    c0 = cost(starts[0], ts, m, e0_li, e0_co)
    reports = [RoundReport(0, c0, c0, set_size=len(ts), moment_histogram=moment_histogram(ts))]
    all_traces: list[list[OptimizationTrace]] = []
    mutations: list[Mutation] = []
    start_costs: list[float] = []
    tol3 = tol.tol3_initial
    converged = False
    n_added = 0
    p = starts[0]

    for rnd in range(1, tol.max_rounds + 1):
        f, fg = objectives(ts, m, e0_li, e0_co)
        if rnd == 1:
            best = None
            for k, start in enumerate(starts):
                traces = two_stage_minimize(f, fg, start.to_vector(), settings)
                c = traces[-1].final_cost
                start_costs.append(c)
                log.info("round 1, start %d: cost %.6f", k, c)
                if best is None or c < best[0]:
                    best = (c, traces, start)
            _, traces, p = best
        else:
            traces = two_stage_minimize(f, fg, p.to_vector(), settings)
        x0 = p.to_vector()
        cost_before = f(x0)
        x_best = traces[-1].x
        cost_after = f(x_best)
        if cost_after > cost_before:
            x_best, cost_after = x0, cost_before
        p = CircuitParams.from_vector(x_best, n)
        all_traces.append(traces)
        report = RoundReport(rnd, cost_before, cost_after, set_size=len(ts))
        reports.append(report)
        log.info("round %d: cost %.6f -> %.6f", rnd, cost_before, cost_after)

        if cost_after <= tol.tol2:
            converged = True
            report.moment_histogram = moment_histogram(ts)
            break

        if cost_after < tol.trigger:
            tol3 = tol.tol3_late
        report.tol3 = tol3
        for inst_id in anomaly.detect(p, ts, tol3, m, e0_li, e0_co):
            report.flagged += 1
            old = ts.get(inst_id)
            n_added += 1
            new_id = f"n{rnd:02d}-{n_added:04d}"
            try:
                action = anomaly.treat(inst_id, ts, oracle, treat_rng, p, tol3, m,
                                       new_id=new_id, e0_li=e0_li, e0_co=e0_co,
                                       label=f"round {rnd}:", max_donors=max_donors)
            except OracleError as exc:
                raise OracleError(f"round {rnd}, instance {inst_id}: {exc}") from exc
            report.actions.append(action)
            if action.action == anomaly.REPLACED:
                report.replaced += 1
                new = ts.get(inst_id)
                mutations.append(Mutation(rnd, "replace", inst_id, old.energy, new.energy,
                                          new.moments, new.converged,
                                          new.config.to_signs(), new.provenance))
            elif action.action == anomaly.ADDED:
                report.added += 1
                new = ts.get(action.new_id)
                mutations.append(Mutation(rnd, "add", new.id, None, new.energy, new.moments,
                                          new.converged, new.config.to_signs(),
                                          new.provenance))
        report.set_size = len(ts)
        report.moment_histogram = moment_histogram(ts)

    return TrainingResult(p, converged, reports, all_traces, ts, mutations, start_costs)


def replay(initial: TrainingSet, mutations, up_to_round: int | None = None) -> TrainingSet:
    """Rebuild the training set as it stood after ``up_to_round`` from the mutation log."""
    ts = initial.copy()
    for mu in mutations:
        if up_to_round is not None and mu.round > up_to_round:
            break
        if mu.kind == "replace":
            ts.replace(ts.get(mu.instance_id).updated(
                energy=mu.new_energy, moments=tuple(mu.moments),
                converged=mu.converged, provenance=mu.provenance))
        elif mu.kind == "add":
            ts.add(DataInstance(mu.instance_id, Configuration.parse(mu.config), mu.new_energy,
                                tuple(mu.moments), mu.converged, provenance=mu.provenance))
        else:
            raise ValueError(f"unknown mutation kind {mu.kind!r}")
    return ts
