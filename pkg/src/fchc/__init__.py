"""Spectral toolkit for optimal control of viscous fractional Cahn-Hilliard systems."""

from .cost import CostSpec
from .errors import (
    ConfigError,
    DomainViolation,
    FCHCError,
    IdenticalControls,
    LineSearchFailure,
    NewtonDivergence,
    NoConvergence,
    NonZeroMeanRhs,
    ParseError,
    SchemeMismatch,
    SingularStep,
    SolverError,
    ValidationError,
    ZeroField,
)
from .optimize import (
    AdmissibleSet,
    ControlProblem,
    OptimizeReport,
    optimize,
    project_box,
    project_uad,
    reduced_cost,
    reduced_gradient,
    variational_inequality_residual,
)
from .potentials import GBReport, Logarithmic, PotentialSpec, Regular, SplitPolynomial, check_admissible, eval_potential
from .sensitivity import (
    AdjointTrajectory,
    LinearizedTrajectory,
    adjoint_identity_residual,
    solve_adjoint,
    solve_adjoint_direct,
    solve_linearized,
)
from .spectral import (
    DomainSpec,
    FracOperator,
    SpectralBasis,
    apply_power,
    build_basis,
    inner_product_Ar,
    mean,
    poincare_residual,
    solve_power,
    transform,
)
from .state import StateConfig, StateModel, StateTrajectory, dissipation_report, energy, solve_state, stability_probe
from .timegrid import TimeField, TimeGrid, discrete_gronwall_bound, interp_eval, interp_identity_residuals

__version__ = "0.1.0"
