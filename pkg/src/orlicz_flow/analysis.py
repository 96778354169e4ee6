"""Post-hoc checks on flow output: stationary residual, gamma, audits, uniqueness."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ExperimentInconclusiveError, OrliczFlowError
from .flow import (
    DiagnosticsRecord,
    FlowConfig,
    FlowResult,
    FlowState,
    _speed,
    pointwise_gamma,
    run,
    weighted_mean_cv,
)
from .geometry import DensityField, SupportField, integrate_x, support_to_geometry
from .orlicz import CASE_I, OrliczCase, OrliczFunction, make_power


@dataclass(frozen=True)
class ResidualReport:
    gamma: float
    residual_sup: float
    residual_l2: float
    gamma_pointwise: np.ndarray
    gamma_cv: float
    residual: np.ndarray


def gamma_pointwise(field: SupportField, f: DensityField, phi: OrliczFunction, scheme="spectral"):
    return pointwise_gamma(support_to_geometry(field, scheme), f, phi)


def operator_without_gamma(field, phi, scheme="spectral"):
    """``phi(1/h) h rho^-2 w``; the stationary equation reads ``gamma * this = f``."""
    g = support_to_geometry(field, scheme)
    return phi(1.0 / g.h) * g.h * g.w / g.rho**2


def residual(field: SupportField, f: DensityField, phi: OrliczFunction, gamma=None, scheme="spectral"):
    """Node-wise ``gamma phi(1/h) h rho^-2 w - f`` and its norms.

    Without ``gamma`` the u-measure mean of the pointwise gamma is used.
    """
    geom = support_to_geometry(field, scheme)
    gp = pointwise_gamma(geom, f, phi)
    gmean, gcv = weighted_mean_cv(gp, geom)
    if gamma is None:
        gamma = gmean
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    op = phi(1.0 / geom.h) * geom.h * geom.w / geom.rho**2
    r = gamma * op - f.f
    return ResidualReport(
        gamma=float(gamma),
        residual_sup=float(np.max(np.abs(r))),
        residual_l2=math.sqrt(integrate_x(r * r, field.grid)),
        gamma_pointwise=gp,
        gamma_cv=gcv,
        residual=r,
    )


@dataclass(frozen=True)
class AuditReport:
    L0: float
    L_drift: float
    L_drift_rel: float
    direction: str
    violations: int
    max_violation: float
    h_band: tuple
    kappa_band: tuple
    max_log_volume_rate: float


def audit_history(history: Sequence[DiagnosticsRecord], case, tol=1e-9) -> AuditReport:
    """Conservation and monotonicity audit of a diagnostics history.

    ``case`` is an :class:`OrliczCase` or its tag.
    """
    if not history:
        raise ValueError("audit_history needs a non-empty history")
    tag = case.tag if isinstance(case, OrliczCase) else case
    L = np.array([r.L for r in history])
    P = np.array([r.P for r in history])
    dP = np.diff(P)
    bad = -dP if tag == CASE_I else dP
    bad = bad[bad > tol] if bad.size else bad
    drift = float(np.max(np.abs(L - L[0])))
    return AuditReport(
        L0=float(L[0]),
        L_drift=drift,
        L_drift_rel=drift / abs(float(L[0]) + 1.0),
        direction="non-decreasing" if tag == CASE_I else "non-increasing",
        violations=int(bad.size),
        max_violation=float(bad.max()) if bad.size else 0.0,
        h_band=(min(r.h_min for r in history), max(r.h_max for r in history)),
        kappa_band=(min(r.kappa_min for r in history), max(r.kappa_max for r in history)),
        max_log_volume_rate=max(abs(r.log_volume_rate) for r in history),
    )


def radial_flow_consistency(state: FlowState, f: DensityField, phi: OrliczFunction, scheme="spectral") -> float:
    """Max gap between ``(rho/h) dh/dt`` and the radial form of the flow."""
    g = support_to_geometry(state.field, scheme)
    dh = -_speed(g, f, phi, state.eta) + g.h
    lhs = g.rho / g.h * dh
    rhs = -f.f * g.rho**3 * g.kappa * state.eta / (phi(1.0 / g.h) * g.h) + g.rho
    return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class RunSummary:
    reason: str
    steps: int
    t: float
    gamma: float
    eta: float
    gamma_cv: float
    history: tuple = dataclasses.field(default=(), repr=False, compare=False)


@dataclass(frozen=True)
class UniquenessReport:
    runs: tuple
    rescaled: tuple
    rescaled_sup_distance: float
    tol: float
    passed: bool


def rescale_to_unit_gamma(field: SupportField, gamma, p):
    """``gamma^{-1/p} h``: the stationary operator is homogeneous of degree ``-p``."""
    return field.scaled(gamma ** (-1.0 / p))


def uniqueness_experiment(
    f: DensityField,
    p: float,
    init1: SupportField,
    init2: SupportField,
    config: Optional[FlowConfig] = None,
    tol: float = 1e-4,
) -> UniquenessReport:
    """Run the flow from two bodies and compare the unit-gamma solutions."""
    if not p > 0:
        raise ValueError(
            f"uniqueness needs phi(s) = s^p increasing, i.e. p > 0 (got p = {p!r})"
        )
    phi = make_power(p)
    results = []
    for init in (init1, init2):
        cfg = (
            FlowConfig(phi=phi, f=f, init=init)
            if config is None
            else dataclasses.replace(config, phi=phi, f=f, init=init, case=None)
        )
        try:
            res = run(cfg, check_hypothesis=False)
        except OrliczFlowError as exc:
            raise ExperimentInconclusiveError(f"flow failed: {exc}", partial=results) from exc
        if not res.converged:
            raise ExperimentInconclusiveError(
                f"run did not converge (reason {res.reason})", partial=results + [res]
            )
        results.append(res)

    summaries, rescaled = [], []
    for res in results:
        rep = residual(res.state.field, f, phi)
        summaries.append(
            RunSummary(
                reason=res.reason,
                steps=res.state.step_index,
                t=res.state.t,
                gamma=rep.gamma,
                eta=res.state.eta,
                gamma_cv=rep.gamma_cv,
                history=tuple(res.history),
            )
        )
        rescaled.append(rescale_to_unit_gamma(res.state.field, rep.gamma, p))
    dist = float(np.max(np.abs(rescaled[0].h - rescaled[1].h)))
    return UniquenessReport(
        runs=tuple(summaries),
        rescaled=tuple(rescaled),
        rescaled_sup_distance=dist,
        tol=tol,
        passed=dist < tol,
    )
