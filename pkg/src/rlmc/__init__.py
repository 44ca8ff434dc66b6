"""Regress-later Monte Carlo solvers for finite-horizon stochastic control."""
from .basis import (GramMatrix, CondExpEvaluator, GaussianRadialBasis, LegendreBasis, MonomialBasis,
                    PiecewiseAffineBasis, gram_matrix, make_basis)
from .evaluate import EvaluationReport, control_map_from, evaluate_policy
from .exceptions import (ArgumentError, BasisConditioningError, CapabilityError, ConfigurationError,
                         ConstructionError, DataError, NumericalError, RLMCError)
from .kernels import BACKEND
from .measures import Schedule, TruncatedGaussian, UniformBox, estimate_r_bar, fit_schedule, iterate_measure
from .model import ControlledModel, ControlSet, StateDomain, TimeGrid, pathwise_performance, value_bound
from .optimize import ControlOptimizer, bellman_target
from .projection import CoefficientMatrix, project_exact, project_mc, projection_error
from .solver_perf import PerfSolveConfig, solve_perf
from .solver_value import ValueSolveConfig, solve_value

__version__ = "0.1.0"
