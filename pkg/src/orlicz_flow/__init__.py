"""Planar Orlicz-Aleksandrov problem solved by a normalized Gauss-curvature flow."""

from .analysis import (
    audit_history,
    gamma_pointwise,
    radial_flow_consistency,
    residual,
    uniqueness_experiment,
)
from .flow import (
    FlowConfig,
    FlowResult,
    FlowState,
    adaptive_dt,
    compute_eta,
    flow_rhs,
    run,
    step,
)
from .geometry import (
    AngularGrid,
    BodyGeometry,
    DensityField,
    SupportField,
    derivative,
    enforce_even,
    integrate_u,
    integrate_x,
    make_grid,
    support_to_geometry,
)
from .orlicz import (
    OrliczCase,
    OrliczFunction,
    classify,
    eval_Phi,
    functional_P,
    hypothesis_check,
    make_power,
    make_power_log,
)

__version__ = "0.1.0"
