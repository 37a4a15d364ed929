"""Mean-field ground states, phase diagrams and multicritical points of
driven multi-cavity Dicke models with staggered Zeeman couplings."""

from .critical import CriticalPoint, locate_lp, locate_qcp, locate_qtp, locate_sp_terminus
from .ed import EDConfig, EDResult, ed_ground_state, ed_sweep
from .errors import (
    BadFit,
    ConfigError,
    ConvergenceFailure,
    CutoffNotConverged,
    DegenerateDenominator,
    DickeError,
    DimensionGuard,
    DomainError,
    InsufficientRange,
    NoRoot,
    UnresolvedTransition,
)
from .exponents import ExponentFit, fit_exponent, logspaced_offsets
from .model import (
    DriveParams,
    GroundState,
    ModelParams,
    ZeemanSet,
    bessel_j0,
    eval_e_driven,
    eval_e_gradient,
    eval_F,
    eval_F_derivs,
    eval_nu_stationary,
    nu_stationary_derivs,
    phase_name,
    x_from_xi,
    xi_from_x,
)
from .scan import (
    Boundary,
    BoundaryTrace,
    PhaseMap,
    ScanPlane,
    TransitionProbe,
    classify_transition,
    np_stability_nu,
    scan,
    trace_np_boundary,
)
from .solver import MinimaReport, minimize_driven, minimize_undriven
from .texture import TextureReport, classify_order, texture_at

__version__ = "0.1.0"

__all__ = [
    "BadFit", "Boundary", "BoundaryTrace", "ConfigError", "ConvergenceFailure",
    "CriticalPoint", "CutoffNotConverged", "DegenerateDenominator", "DickeError",
    "DimensionGuard", "DomainError", "DriveParams", "EDConfig", "EDResult",
    "ExponentFit", "GroundState", "InsufficientRange", "MinimaReport",
    "ModelParams", "NoRoot", "PhaseMap", "ScanPlane", "TextureReport",
    "TransitionProbe", "UnresolvedTransition", "ZeemanSet", "bessel_j0",
    "classify_order", "classify_transition", "ed_ground_state", "ed_sweep",
    "eval_F", "eval_F_derivs", "eval_e_driven", "eval_e_gradient",
    "eval_nu_stationary", "fit_exponent", "locate_lp", "locate_qcp",
    "locate_qtp", "locate_sp_terminus", "logspaced_offsets", "minimize_driven",
    "minimize_undriven", "np_stability_nu", "nu_stationary_derivs",
    "phase_name", "scan", "texture_at", "trace_np_boundary", "x_from_xi",
    "xi_from_x",
]
