"""COBYLA and Adam drivers with a shared trace format."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERS = "max_iters"
STALLED = "stalled"


class OptimizationError(RuntimeError):
    """Objective or gradient produced a non-finite value."""


@dataclass
class OptimizerSettings:
    max_iters: int = 10000
    tol1: float = 1e-4
    cobyla_rho_begin: float = 0.5
    adam_lr: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    adam_window: int = 10
    adam_stop: str = "step"
    # "max_iters": Adam refines only when COBYLA ran out of budget; "always": after every COBYLA run
    adam_after: str = "max_iters"

    def __post_init__(self):
        for name in ("max_iters", "tol1", "cobyla_rho_begin", "adam_lr", "adam_eps", "adam_window"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.adam_stop not in ("step", "cost_window"):
            raise ValueError(f"adam_stop must be 'step' or 'cost_window', got {self.adam_stop!r}")
        if self.adam_after not in ("max_iters", "always"):
            raise ValueError(f"adam_after must be 'max_iters' or 'always', got {self.adam_after!r}")


@dataclass
class OptimizationTrace:
    """Incumbent cost after each iteration plus the final point.

    ``costs[0]`` is the cost at the starting point.
    """

    costs: list[float] = field(default_factory=list)
    reason: str = ""
    x: np.ndarray | None = None
    n_evals: int = 0
    method: str = ""

    @property
    def initial_cost(self) -> float:
        return self.costs[0]

    @property
    def final_cost(self) -> float:
        return self.costs[-1]

    def to_csv(self) -> str:
        lines = ["iteration,cost"]
        lines += [f"{i},{c:.17g}" for i, c in enumerate(self.costs)]
        return "\n".join(lines) + "\n"


def _checked(value: float, x: np.ndarray, what: str = "objective") -> float:
    if not np.isfinite(value):
        raise OptimizationError(f"{what} returned {value!r} at x = {np.array2string(x, precision=17)}")
    return float(value)


def cobyla_minimize(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    settings: OptimizerSettings | None = None,
) -> OptimizationTrace:
    """Unconstrained COBYLA.

    Stops when the trust-region radius falls below ``tol1`` (converged) or after
    ``max_iters`` objective evaluations.
    """
    settings = settings or OptimizerSettings()
    x0 = np.asarray(x0, dtype=np.float64)
    trace = OptimizationTrace(method="cobyla")
    best = {"f": np.inf, "x": x0.copy()}

    def wrapped(x):
        f = _checked(objective(x), x)
        trace.n_evals += 1
        if f < best["f"]:
            best["f"] = f
            best["x"] = np.array(x, copy=True)
        trace.costs.append(best["f"])
        return f

    res = minimize(
        wrapped,
        x0,
        method="COBYLA",
        options={
            "rhobeg": settings.cobyla_rho_begin,
            "tol": settings.tol1,
            "maxiter": settings.max_iters,
        },
    )
    # scipy status 2 = evaluation budget exhausted
    if res.status == 1:
        trace.reason = CONVERGED
    elif res.status == 2 or trace.n_evals >= settings.max_iters:
        trace.reason = MAX_ITERS
    else:
        trace.reason = STALLED
        log.warning("COBYLA stopped with status %s: %s", res.status, res.message)
    trace.x = best["x"]
    return trace


def adam_minimize(
    objective: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    settings: OptimizerSettings | None = None,
    value_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]] | None = None,
) -> OptimizationTrace:
    """Adam with bias correction.

    With ``adam_stop="step"`` the run is converged once the parameter update
    has Euclidean norm below ``tol1``; with ``"cost_window"`` once
    ``adam_window`` successive cost changes are all below ``tol1``.  The
    returned point is the best one seen.
    """
    s = settings or OptimizerSettings()
    if value_and_grad is None:
        def value_and_grad(x):
            return objective(x), grad(x)

    x = np.array(x0, dtype=np.float64)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    trace = OptimizationTrace(method="adam")
    best_f, best_x = np.inf, x.copy()
    prev = None
    quiet = 0
    trace.reason = MAX_ITERS
    for t in range(1, s.max_iters + 1):
        f, g = value_and_grad(x)
        f = _checked(f, x)
        g = np.asarray(g, dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise OptimizationError(f"gradient is not finite at x = {np.array2string(x, precision=17)}")
        trace.n_evals += 1
        if f < best_f:
            best_f, best_x = f, x.copy()
        trace.costs.append(best_f)
        if s.adam_stop == "cost_window" and prev is not None:
            quiet = quiet + 1 if abs(f - prev) < s.tol1 else 0
            if quiet >= s.adam_window:
                trace.reason = CONVERGED
                break
        prev = f
        if not np.any(g):
            trace.reason = CONVERGED
            break
        m = s.adam_beta1 * m + (1.0 - s.adam_beta1) * g
        v = s.adam_beta2 * v + (1.0 - s.adam_beta2) * g * g
        m_hat = m / (1.0 - s.adam_beta1 ** t)
        v_hat = v / (1.0 - s.adam_beta2 ** t)
        step = s.adam_lr * m_hat / (np.sqrt(v_hat) + s.adam_eps)
        x = x - step
        if s.adam_stop == "step" and np.linalg.norm(step) < s.tol1:
            trace.reason = CONVERGED
            break
    trace.x = best_x
    return trace


def two_stage_minimize(objective, value_and_grad, x0, settings=None):
    """COBYLA, then Adam from the COBYLA point.

    Adam runs when COBYLA ran out of budget, or unconditionally with
    ``adam_after="always"``.

    Returns the list of stage traces.
    """
    settings = settings or OptimizerSettings()
    first = cobyla_minimize(objective, x0, settings)
    traces = [first]
    if first.reason != CONVERGED or settings.adam_after == "always":
        traces.append(
            adam_minimize(objective, None, first.x, settings, value_and_grad=value_and_grad)
        )
    return traces
