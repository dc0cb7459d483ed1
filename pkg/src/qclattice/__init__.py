"""Parameterised-circuit energy model for binary lattice configurations,
trained against an energy oracle with anomaly detection and treatment."""

from .data import E0_CO, E0_LI, DataInstance, TrainingSet, postprocess, preprocess
from .kernels import BACKEND
from .lattice import CO, LI, Configuration, enumerate_all, flip_site, hamming_distance, li_fraction
from .model import (
    CircuitParams,
    MeasurementOperator,
    build_state,
    gradient,
    param_count,
    predict_energies,
    predict_energy,
    sensitivity_sweep,
)
from .optimizers import OptimizerSettings, adam_minimize, cobyla_minimize, two_stage_minimize
from .surrogate import OracleError, ReplayOracle, SurrogateOracle, SurrogateSpec
from .training import Tolerances, cost, metrics, run_training

__version__ = "0.1.0"
