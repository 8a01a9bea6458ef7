"""Minimal sup-curvature curves with prescribed endpoints, tangents and length."""
from .errors import ConvergenceWarning, ElasticaError, InfeasibleError
from .geometry import (Curve, ProblemSpec, Reparametrization, TangentField, WeightFunction,
                       build_reparametrization, chord_residual, integrate_tangent, tangent_from_curve)
from .functionals import PenaltyConfig, eval_Jpmu, eval_Kalpha, eval_Kinf, eval_Kp, grad_Jpmu
from .solver import SolverOptions, continuation_solve, minimize_Jpmu
from .residuals import ElasticaCertificate, original_residual, rescaled_residual, system_residual
from .classifier import StructureReport, classify

__version__ = "0.1.0"
