"""Normalized Gauss-curvature flow of the support function.

    dh/dt = -f rho^2 kappa eta / phi(1/h) + h,
    eta   = 2 pi / int f / phi(1/h) dx.

The normalization keeps ``int log rho du`` constant.  Time stepping is
classical RK4 with ``eta`` recomputed at each stage, a diffusive step bound
from the linearization in ``h''``, symmetry projection after each accepted
step and dt-halving on positivity or convexity failure.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .errors import (
    FlowBreakdownError,
    HypothesisViolatedError,
    NonConvexError,
    NonPositiveSupportError,
    NotEvenError,
)
from .geometry import (
    CONVEXITY_RTOL,
    SCHEMES,
    BodyGeometry,
    DensityField,
    SupportField,
    enforce_even,
    first_and_second,
    integrate_u,
    integrate_x,
    is_even,
    support_to_geometry,
)
from .orlicz import CASE_I, NEITHER, OrliczCase, OrliczFunction, classify, functional_P, hypothesis_check

log = logging.getLogger(__name__)

DT_MIN = 1e-12
DT_MAX = 0.1
MAX_HALVINGS = 20
MONOTONICITY_TOL = 1e-9
STALL_STEPS = 10_000

# termination reasons
RHS_TOL = "rhs_tol"
GAMMA_CV_TOL = "gamma_cv_tol"
T_MAX = "t_max"
MAX_STEPS = "max_steps"
CONVERGED = (RHS_TOL, GAMMA_CV_TOL)


@dataclass(frozen=True)
class FlowState:
    t: float
    step_index: int
    field: SupportField
    eta: float
    last_dt: float = 0.0


@dataclass(frozen=True)
class FlowConfig:
    phi: OrliczFunction
    f: DensityField
    init: SupportField
    case: Optional[OrliczCase] = None
    dt_safety: float = 0.2
    t_max: float = 50.0
    rhs_tol: float = 1e-8
    gamma_cv_tol: float = 1e-6
    record_every: int = 10
    scheme: str = "spectral"
    max_steps: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.dt_safety <= 1.0:
            raise ValueError(f"dt_safety must lie in (0, 1], got {self.dt_safety!r}")
        for name in ("t_max", "rhs_tol", "gamma_cv_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.f.grid != self.init.grid:
            raise ValueError("density and initial body live on different grids")

    @property
    def grid(self):
        return self.init.grid


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    t: float
    dt: float
    eta: float
    P: float
    L: float
    h_min: float
    h_max: float
    kappa_min: float
    kappa_max: float
    rhs_sup: float
    gamma_mean: float
    gamma_cv: float
    log_volume_rate: float = field(default=0.0, compare=False)

    CSV_FIELDS = (
        "step", "t", "dt", "eta", "P", "L", "h_min", "h_max",
        "kappa_min", "kappa_max", "rhs_sup", "gamma_mean", "gamma_cv",
    )

    def row(self):
        return [getattr(self, k) for k in self.CSV_FIELDS]


@dataclass
class FlowResult:
    state: FlowState
    history: List[DiagnosticsRecord]
    reason: str
    case: OrliczCase
    warnings: List[str] = field(default_factory=list)
    monotonicity_violations: int = 0

    @property
    def converged(self):
        return self.reason in CONVERGED


def compute_eta(field: SupportField, f: DensityField, phi: OrliczFunction) -> float:
    return _eta(field.h, f, phi)


def _eta(h, f, phi):
    return 2.0 * math.pi / integrate_x(f.f / phi(1.0 / h), f.grid)


def _speed(geom: BodyGeometry, f, phi, eta):
    """``f rho^2 kappa eta / phi(1/h)``, the normal speed of the curvature term."""
    return f.f * geom.rho**2 * geom.kappa * eta / phi(1.0 / geom.h)


def flow_rhs(field: SupportField, f: DensityField, phi: OrliczFunction, eta=None, scheme="spectral"):
    geom = support_to_geometry(field, scheme)
    if eta is None:
        eta = _eta(field.h, f, phi)
    return -_speed(geom, f, phi, eta) + geom.h


def _stage_rhs(h, f, phi, scheme):
    """RHS for raw stage samples; raises on loss of positivity or convexity."""
    i = int(np.argmin(h))
    if not h[i] > 0:
        raise NonPositiveSupportError(i, h[i])
    h1, h2 = first_and_second(h, scheme)
    w = h2 + h
    j = int(np.argmin(w))
    threshold = CONVEXITY_RTOL * np.max(w)
    if not w[j] > threshold:
        raise NonConvexError(j, w[j], threshold)
    eta = _eta(h, f, phi)
    return -f.f * (h * h + h1 * h1) * eta / (phi(1.0 / h) * w) + h


def pointwise_gamma(geom: BodyGeometry, f: DensityField, phi: OrliczFunction):
    """``f rho^2 kappa / (h phi(1/h))``; constant exactly at a solution."""
    return f.f * geom.rho**2 * geom.kappa / (geom.h * phi(1.0 / geom.h))


def weighted_mean_cv(values, geom: BodyGeometry):
    """Mean and coefficient of variation in the radial-direction measure."""
    total = integrate_u(np.ones_like(values), geom)
    mean = integrate_u(values, geom) / total
    var = integrate_u((values - mean) ** 2, geom) / total
    return mean, math.sqrt(max(var, 0.0)) / abs(mean)


def adaptive_dt(state: FlowState, f: DensityField, phi: OrliczFunction, config: FlowConfig) -> float:
    """``dt_safety * dtheta^2 / max D`` with ``D = f rho^2 eta / (phi(1/h) w^2)``."""
    geom = support_to_geometry(state.field, config.scheme)
    D = f.f * geom.rho**2 * state.eta / (phi(1.0 / geom.h) * geom.w**2)
    dt = config.dt_safety * state.field.grid.dtheta**2 / float(np.max(D))
    return float(min(max(dt, DT_MIN), DT_MAX))


def _rk4(h, dt, f, phi, scheme):
    k1 = _stage_rhs(h, f, phi, scheme)
    k2 = _stage_rhs(h + 0.5 * dt * k1, f, phi, scheme)
    k3 = _stage_rhs(h + 0.5 * dt * k2, f, phi, scheme)
    k4 = _stage_rhs(h + dt * k3, f, phi, scheme)
    return h + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state: FlowState, f: DensityField, phi: OrliczFunction, config: FlowConfig, dt=None) -> FlowState:
    if dt is None:
        dt = adaptive_dt(state, f, phi, config)
    grid = state.field.grid
    last_error = None
    for _ in range(MAX_HALVINGS + 1):
        try:
            h_new = _rk4(state.field.h, dt, f, phi, config.scheme)
            field = enforce_even(SupportField(grid, h_new))
            # guards, positivity first
            support_to_geometry(field, config.scheme)
        except (NonPositiveSupportError, NonConvexError) as exc:
            last_error = exc
            log.debug("step %d rejected at dt=%.3g: %s", state.step_index, dt, exc)
            dt *= 0.5
            continue
        return FlowState(
            t=state.t + dt,
            step_index=state.step_index + 1,
            field=field,
            eta=_eta(field.h, f, phi),
            last_dt=dt,
        )
    raise FlowBreakdownError(
        f"step {state.step_index} rejected {MAX_HALVINGS} times (last: {last_error})", state=state
    )


def initial_state(config: FlowConfig) -> FlowState:
    """Validate the configured body and wrap it as the state at t = 0."""
    field = config.init
    if not is_even(field.h):
        raise NotEvenError("initial body is not origin symmetric")
    support_to_geometry(field, config.scheme)
    return FlowState(t=0.0, step_index=0, field=field, eta=compute_eta(field, config.f, config.phi))


def make_record(state: FlowState, f: DensityField, phi: OrliczFunction, case: OrliczCase, scheme="spectral"):
    geom = support_to_geometry(state.field, scheme)
    rhs = -_speed(geom, f, phi, state.eta) + geom.h
    gamma = pointwise_gamma(geom, f, phi)
    gmean, gcv = weighted_mean_cv(gamma, geom)
    return DiagnosticsRecord(
        step=state.step_index,
        t=state.t,
        dt=state.last_dt,
        eta=state.eta,
        P=functional_P(state.field, f, case),
        L=integrate_u(np.log(geom.rho), geom),
        h_min=float(np.min(geom.h)),
        h_max=float(np.max(geom.h)),
        kappa_min=float(np.min(geom.kappa)),
        kappa_max=float(np.max(geom.kappa)),
        rhs_sup=float(np.max(np.abs(rhs))),
        gamma_mean=gmean,
        gamma_cv=gcv,
        log_volume_rate=integrate_u(rhs / geom.h, geom),
    )


def resolve_case(config: FlowConfig) -> OrliczCase:
    case = config.case if config.case is not None else classify(config.phi)
    if case.tag == NEITHER:
        raise HypothesisViolatedError("phi satisfies neither existence hypothesis")
    return case


def run(
    config: FlowConfig,
    check_hypothesis: bool = True,
    sink: Optional[Callable] = None,
    start: Optional[FlowState] = None,
) -> FlowResult:
    """Evolve until a stopping criterion fires.

    ``sink(record, state)`` is called for every diagnostics record.  ``start``
    resumes from a saved state instead of the configured initial body.
    """
    f, phi = config.f, config.phi
    case = resolve_case(config)
    state = initial_state(config) if start is None else start
    if start is None and check_hypothesis:
        report = hypothesis_check(f, case, state.field)
        if not report.satisfied:
            raise HypothesisViolatedError(
                f"P(0) = {report.P0:.6g} does not exceed C_hat = {report.C_hat:.6g}; "
                f"suggested scale {report.suggested_scale}"
            )

    history: List[DiagnosticsRecord] = []
    warnings: List[str] = []
    violations = 0
    best_rhs, best_step, stall_flagged = math.inf, state.step_index, False

    def record(s):
        nonlocal violations, best_rhs, best_step, stall_flagged
        rec = make_record(s, f, phi, case, config.scheme)
        if history:
            dP = rec.P - history[-1].P
            bad = -dP if case.tag == CASE_I else dP
            if bad > MONOTONICITY_TOL:
                violations += 1
                msg = f"P monotonicity violated by {bad:.3g} at step {rec.step}"
                log.warning(msg)
                warnings.append(msg)
        if rec.rhs_sup < best_rhs:
            best_rhs, best_step = rec.rhs_sup, rec.step
        elif not stall_flagged and rec.step - best_step >= STALL_STEPS:
            stall_flagged = True
            msg = f"rhs_sup has not decreased for {rec.step - best_step} steps"
            log.warning(msg)
            warnings.append(msg)
        history.append(rec)
        if sink is not None:
            sink(rec, s)
        return rec

    def stop_reason(rec):
        if rec.rhs_sup < config.rhs_tol:
            return RHS_TOL
        if rec.gamma_cv < config.gamma_cv_tol:
            return GAMMA_CV_TOL
        return None

    reason = stop_reason(record(state))
    while reason is None:
        if state.t >= config.t_max:
            reason = T_MAX
            break
        if config.max_steps is not None and state.step_index >= config.max_steps:
            reason = MAX_STEPS
            break
        dt = min(adaptive_dt(state, f, phi, config), config.t_max - state.t)
        try:
            state = step(state, f, phi, config, dt)
        except FlowBreakdownError as exc:
            exc.history = history
            raise
        at_end = state.t >= config.t_max or (
            config.max_steps is not None and state.step_index >= config.max_steps
        )
        if state.step_index % config.record_every == 0 or at_end:
            reason = stop_reason(record(state))
    return FlowResult(
        state=state,
        history=history,
        reason=reason,
        case=case,
        warnings=warnings,
        monotonicity_violations=violations,
    )
