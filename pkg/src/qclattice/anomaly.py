"""Detection and treatment of anomalous training instances.

An instance is flagged when the model and oracle energies disagree by more than
``tol3``.  Treatment, in order:

1. continue the previous oracle run; a lower energy there replaces the stored
   one (numerical artefact);
2. re-run the configuration with moment hints taken site by site from the most
   similar well-fitted converged instances (or, with no such donor, from the
   neighbour-count heuristic); a lower energy replaces the stored one;
3. otherwise compute a new configuration with one random site flipped and add
   it to the training set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import model
from .data import E0_CO, E0_LI, DataInstance, TrainingSet
from .lattice import LI, Configuration, flip_site, hamming_distance
from .surrogate import EnergyOracle, OracleError

log = logging.getLogger(__name__)

CONFIRMED = "confirmed-stable"
REPLACED = "replaced-lower-energy"
ADDED = "added-neighbor"

ENERGY_CHANGE_TOL = 1e-6
NONMAGNETIC = 0.05
MAGNETIC_HINTS = (1.05, 3.05)


@dataclass
class AnomalyAction:
    instance_id: str
    discrepancy: float
    action: str
    details: str = ""
    old_energy: float | None = None
    new_energy: float | None = None
    new_id: str | None = None
    warning: str = ""


def residuals(params, ts: TrainingSet, m=None, e0_li=E0_LI, e0_co=E0_CO) -> np.ndarray:
    """E_QC - E on the centred scale, in training-set order."""
    pred = model.predict_energies(params, ts.sigma(), m)
    return pred - ts.centered_energies(e0_li, e0_co)


def detect(params, ts: TrainingSet, tol3: float, m=None, e0_li=E0_LI, e0_co=E0_CO) -> list[str]:
    """Ids with |E_QC - E| > tol3, largest discrepancy first."""
    if len(ts) == 0:
        return []
    res = np.abs(residuals(params, ts, m, e0_li, e0_co))
    order = np.argsort(-res, kind="stable")
    return [ts[i].id for i in order if res[i] > tol3]


def li_neighbour_count(config: Configuration, j: int) -> int:
    return sum(1 for k in (j - 1, j + 1) if 0 <= k < config.n_sites and config[k] == LI)


def early_round_hint_policy(
    config: Configuration, current_moments: Sequence[float], min_li_neighbours: int = 1
) -> list[tuple[float, ...]]:
    """Moment hints from the local Li environment of each Co site.

    Co next to at least ``min_li_neighbours`` Li and currently non-magnetic is
    tried at 1.05 and then 3.05; Co with fewer Li neighbours but a non-zero
    moment is reset to 0.05.  Returns the hint vectors in the order to try.
    """
    co_sites = [j for j, s in enumerate(config.sigma) if s != LI]
    if len(current_moments) != len(co_sites):
        raise ValueError(f"{len(current_moments)} moments for {len(co_sites)} Co sites")
    if not co_sites:
        return [()]
    base = list(current_moments)
    magnetic_slots = []
    for i, j in enumerate(co_sites):
        n_li = li_neighbour_count(config, j)
        if n_li >= min_li_neighbours and abs(base[i]) <= NONMAGNETIC:
            magnetic_slots.append(i)
        elif n_li < min_li_neighbours and base[i] > NONMAGNETIC:
            base[i] = NONMAGNETIC
    if not magnetic_slots:
        return [tuple(base)]
    out = []
    for level in MAGNETIC_HINTS:
        hint = list(base)
        for i in magnetic_slots:
            hint[i] = level
        out.append(tuple(hint))
    return out


def donor_hints(target: DataInstance, donors) -> tuple[list[tuple[float, ...]], list[str]]:
    """Hint vectors for the target's Co sites, taken from ranked donors.

    Each target Co site copies the moment of the first donor that also holds
    Co there with the same Li-neighbour status (some Li or none).  Sites no
    donor covers get the neighbour heuristic: 0.05 without a Li neighbour,
    otherwise 1.05 and then 3.05.  ``donors`` is one instance or a ranked
    sequence.  Returns the hint vectors in the order to try and the ids of the
    donors that contributed.
    """
    if isinstance(donors, DataInstance):
        donors = [donors]
    maps = [(d, d.moment_map()) for d in donors]
    base, open_slots, used = [], [], []
    for i, j in enumerate(target.co_sites()):
        has_li = li_neighbour_count(target.config, j) > 0
        for d, moments in maps:
            if j in moments and (li_neighbour_count(d.config, j) > 0) == has_li:
                base.append(moments[j])
                if d.id not in used:
                    used.append(d.id)
                break
        else:
            if has_li:
                base.append(MAGNETIC_HINTS[0])
                open_slots.append(i)
            else:
                base.append(NONMAGNETIC)
    out = [tuple(base)]
    if open_slots:
        for level in MAGNETIC_HINTS[1:]:
            hint = list(base)
            for i in open_slots:
                hint[i] = level
            out.append(tuple(hint))
    return out, used


def rank_donors(target: DataInstance, ts: TrainingSet, abs_res: np.ndarray, tol3: float) -> list[DataInstance]:
    """Converged instances with |residual| <= tol3, by Hamming distance, energy, id."""
    pool = [
        inst for inst, r in zip(ts, abs_res)
        if inst.id != target.id and inst.converged and r <= tol3
    ]
    pool.sort(key=lambda inst: (hamming_distance(inst.config, target.config), inst.energy, inst.id))
    return pool


def select_donor(target: DataInstance, ts: TrainingSet, abs_res: np.ndarray, tol3: float):
    ranked = rank_donors(target, ts, abs_res, tol3)
    return ranked[0] if ranked else None


def treat(
    instance_id: str,
    ts: TrainingSet,
    oracle: EnergyOracle,
    rng: np.random.Generator,
    params,
    tol3: float,
    m=None,
    new_id: str | None = None,
    e0_li: float = E0_LI,
    e0_co: float = E0_CO,
    label: str = "",
    max_donors: int | None = 1,
) -> AnomalyAction:
    """Apply the three-step treatment to one flagged instance, mutating ``ts``.

    Hint moments are combined site by site from up to ``max_donors`` ranked
    donors (all eligible donors when ``None``).
    """
    abs_res = np.abs(residuals(params, ts, m, e0_li, e0_co))
    idx = ts.index_of(instance_id)
    target = ts[idx]
    action = AnomalyAction(instance_id, float(abs_res[idx]), CONFIRMED, old_energy=target.energy)

    # 1. continue the previous run
    e_cont = oracle.continue_relaxation(target)
    if e_cont < target.energy - ENERGY_CHANGE_TOL:
        ts.replace(target.updated(energy=float(e_cont), provenance=f"{label} continued relaxation".strip()))
        action.action = REPLACED
        action.details = "continued relaxation"
        action.new_energy = float(e_cont)
        return action

    # 2. re-run with moment hints
    donors = rank_donors(target, ts, abs_res, tol3)[:max_donors]
    if donors:
        hints, used = donor_hints(target, donors)
        source = f"hints from {', '.join(used)}" if used else "neighbour heuristic"
        attempts = [(h, source) for h in hints]
    else:
        action.warning = "no converged donor within tol3; used neighbour heuristic"
        attempts = [(h, "neighbour heuristic") for h in early_round_hint_policy(target.config, target.moments)]
    for hints, source in attempts:
        energy, moments, converged = oracle.recompute_with_hints(target.config, hints)
        if energy < target.energy:
            ts.replace(
                target.updated(
                    energy=float(energy),
                    moments=tuple(moments),
                    converged=bool(converged),
                    provenance=f"{label} recompute, {source}".strip(),
                )
            )
            action.action = REPLACED
            action.details = source
            action.new_energy = float(energy)
            return action

    # 3. add a neighbouring configuration
    j = int(rng.integers(target.config.n_sites))
    neighbour = flip_site(target.config, j)
    try:
        inst = oracle.compute_new(neighbour, instance_id=new_id)
    except OracleError as exc:
        action.warning = (action.warning + "; " if action.warning else "") + str(exc)
        action.details = f"neighbour at site {j} unavailable"
        return action
    inst = inst.updated(provenance=f"{label} flip site {j} of {target.id}".strip())
    ts.add(inst)
    action.action = ADDED
    action.details = f"flip site {j}"
    action.new_id = inst.id
    action.new_energy = inst.energy
    return action
