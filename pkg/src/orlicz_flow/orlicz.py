"""Orlicz functions ``phi``, the antiderivative ``Phi`` and the existence hypotheses.

``Phi`` is the antiderivative of ``1 / (t phi(t))``, anchored at whichever
endpoint makes it finite:

* case-i:  ``Phi(s) = int_0^s dt / (t phi(t))``, increasing from 0 to infinity;
* case-ii: ``Phi(s) = int_s^inf dt / (t phi(t))``, decreasing from infinity to 0.

In both cases ``Phi'(s) s phi(s) = +1`` (case-i) or ``-1`` (case-ii).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import (
    DegenerateFamilyError,
    HypothesisViolatedError,
    IndeterminateClassError,
    QuadratureError,
)
from .geometry import DensityField, SupportField, fourier_coefficients, integrate_x

log = logging.getLogger(__name__)

CASE_I = "case-i"
CASE_II = "case-ii"
NEITHER = "neither"

PHI_ABS_TOL = 1e-10
PHI_REL_TOL = 1e-12
FD_REL_STEP = 1e-6

# Divergence detection: an endpoint integral is divergent when three
# successive halvings of the cutoff each move the partial integral by >1%.
_DIVERGENCE_RATIO = 0.01
_HALVINGS = 3
_ORIGIN_CUTOFF = 1e-8
_TAIL_CUTOFF = 1e8


@dataclass(frozen=True)
class OrliczFunction:
    """A smooth positive function ``phi`` on ``(0, inf)``.

    ``func`` must accept numpy arrays.  ``dfunc`` is optional; without it the
    derivative falls back to a centered difference with relative step 1e-6.
    """

    func: Callable
    dfunc: Optional[Callable] = None
    family: str = "custom"
    params: dict = field(default_factory=dict)
    closed_form_Phi: Optional[Callable] = None
    closed_form_case: Optional[str] = None

    def __call__(self, s):
        return self.func(s)

    def deriv(self, s):
        if self.dfunc is not None:
            return self.dfunc(s)
        s = np.asarray(s, dtype=np.float64)
        step = FD_REL_STEP * s
        return (self.func(s + step) - self.func(s - step)) / (2.0 * step)

    @property
    def p(self):
        return self.params.get("p")

    def describe(self):
        if self.family == "custom":
            return "custom"
        return f"{self.family}(p={self.p!r})"


def make_power(p) -> OrliczFunction:
    """``phi(s) = s**p``."""
    p = float(p)
    if p == 0.0:
        raise DegenerateFamilyError(
            "p = 0 gives phi = 1: the integral of 1/t diverges at both ends"
        )
    if p < 0:
        Phi = lambda s: np.asarray(s, dtype=np.float64) ** (-p) / (-p)
        case = CASE_I
    else:
        Phi = lambda s: np.asarray(s, dtype=np.float64) ** (-p) / p
        case = CASE_II
    return OrliczFunction(
        func=lambda s: np.asarray(s, dtype=np.float64) ** p,
        dfunc=lambda s: p * np.asarray(s, dtype=np.float64) ** (p - 1.0),
        family="power",
        params={"p": p},
        closed_form_Phi=Phi,
        closed_form_case=case,
    )


def make_power_log(p) -> OrliczFunction:
    """``phi(s) = s**p * log(e + s)``; ``Phi`` has no closed form."""
    p = float(p)

    def func(s):
        s = np.asarray(s, dtype=np.float64)
        return s**p * np.log(np.e + s)

    def dfunc(s):
        s = np.asarray(s, dtype=np.float64)
        return p * s ** (p - 1.0) * np.log(np.e + s) + s**p / (np.e + s)

    return OrliczFunction(func=func, dfunc=dfunc, family="power-log", params={"p": p})


def make_custom(func, dfunc=None, Phi=None, case=None) -> OrliczFunction:
    return OrliczFunction(
        func=func, dfunc=dfunc, family="custom", closed_form_Phi=Phi, closed_form_case=case
    )


def is_increasing(phi: OrliczFunction, lo=1e-4, hi=1e4, samples=401) -> bool:
    """Sampled check that ``phi`` is increasing on ``[lo, hi]``."""
    s = np.geomspace(lo, hi, samples)
    return bool(np.all(np.diff(phi(s)) > 0))


@dataclass(frozen=True)
class OrliczCase:
    tag: str
    phi: OrliczFunction
    use_closed_form: bool = True
    diagnostics: dict = field(default_factory=dict, compare=False)

    def Phi(self, s):
        return eval_Phi(self, s)

    @property
    def increasing(self):
        """Direction of ``Phi``, which fixes the monotonicity of the flow functional."""
        return self.tag == CASE_I


def _quad(func, a, b, what, epsabs=PHI_ABS_TOL, epsrel=PHI_REL_TOL, limit=200):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *rest = integrate.quad(
            func, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1
        )
    # quad appends a message only when QUADPACK flags a problem; a divergence
    # flag is fatal whatever the error estimate says
    if not rest:
        return val, err, 0
    return val, err, 2 if "divergent" in str(rest[0]) else 1


def _endpoint_behaviour(integrand, start, step, what):
    """Classify ``int_0^inf integrand(v) dv`` using cutoffs ``start + k*step``.

    Returns ``(convergent, diagnostics)``.
    """
    partial, err, ier = _quad(integrand, 0.0, start, what, epsabs=0.0, epsrel=1e-10)
    diag = {"partial": partial, "partial_err": err, "increments": []}
    if np.isnan(partial):
        raise IndeterminateClassError(f"phi produced NaN on the {what} partial integral", diag)
    if not np.isfinite(partial):
        return False, diag
    if ier not in (0,) and err > 1e-6 * abs(partial):
        raise IndeterminateClassError(
            f"quadrature did not converge on the {what} partial integral", diag
        )
    changes = []
    lo = start
    for _ in range(_HALVINGS):
        inc, e, ier = _quad(integrand, lo, lo + step, what, epsabs=0.0, epsrel=1e-10)
        if np.isnan(inc):
            raise IndeterminateClassError(f"phi produced NaN beyond the {what} cutoff", diag)
        if not np.isfinite(inc):
            return False, diag
        if ier != 0 and e > 1e-6 * abs(inc) + 1e-300:
            raise IndeterminateClassError(
                f"quadrature did not converge on a {what} cutoff increment", diag
            )
        changes.append(abs(inc) / max(abs(partial), np.finfo(float).tiny))
        diag["increments"].append(inc)
        partial += inc
        lo += step
    diag["relative_changes"] = changes
    return not all(c > _DIVERGENCE_RATIO for c in changes), diag


def classify(phi: OrliczFunction) -> OrliczCase:
    """Decide which of the two hypotheses ``phi`` can satisfy.

    With ``t = exp(-v)`` the origin integral ``int_0^1 dt/(t phi)`` becomes
    ``int_0^inf dv / phi(exp(-v))``; with ``t = exp(v)`` the tail integral
    becomes ``int_0^inf dv / phi(exp(v))``.  A cutoff halving is a step of
    ``log 2`` in ``v``.
    """

    def origin(v):
        with np.errstate(over="ignore", divide="ignore"):
            return 1.0 / float(phi(math.exp(-v)))

    def tail(v):
        with np.errstate(over="ignore", divide="ignore"):
            return 1.0 / float(phi(math.exp(v)))

    ln2 = math.log(2.0)
    origin_ok, odiag = _endpoint_behaviour(origin, math.log(1.0 / _ORIGIN_CUTOFF), ln2, "origin")
    tail_ok, tdiag = _endpoint_behaviour(tail, math.log(_TAIL_CUTOFF), ln2, "tail")
    diag = {"origin": odiag, "tail": tdiag}

    if origin_ok and not tail_ok:
        tag = CASE_I
    elif tail_ok and not origin_ok:
        tag = CASE_II
    else:
        tag = NEITHER
    if phi.closed_form_case is not None and tag != NEITHER and tag != phi.closed_form_case:
        raise IndeterminateClassError(
            f"numerical class {tag} contradicts the closed form ({phi.closed_form_case})", diag
        )
    log.debug("classified %s as %s", phi.describe(), tag)
    return OrliczCase(tag=tag, phi=phi, diagnostics=diag)


def _Phi_quadrature(case: OrliczCase, s: float) -> float:
    phi = case.phi
    if case.tag == CASE_I:
        # t = s exp(-v), v in (0, inf)
        integrand = lambda v: 1.0 / float(phi(s * math.exp(-v)))
        a, b = 0.0, np.inf
    else:
        # t = s / u, u in (0, 1]
        integrand = lambda u: 1.0 / (u * float(phi(s / u))) if u > 0 else 0.0
        a, b = 0.0, 1.0
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        val, err, ier = _quad(integrand, a, b, "Phi")
    # the integrand is positive, so a non-positive value is a failure too
    if (
        not np.isfinite(val)
        or val <= 0
        or ier == 2
        or (ier != 0 and err > max(PHI_ABS_TOL, PHI_REL_TOL * abs(val)))
    ):
        raise QuadratureError(f"Phi({s!r}) did not reach tolerance", err)
    return val


def eval_Phi(case: OrliczCase, s):
    """``Phi(s)`` for scalar or array ``s > 0``."""
    if case.tag == NEITHER:
        raise ValueError("Phi is undefined when phi satisfies neither hypothesis")
    s_arr = np.asarray(s, dtype=np.float64)
    if np.any(s_arr <= 0):
        raise ValueError("Phi is only defined for s > 0")
    if case.use_closed_form and case.phi.closed_form_Phi is not None:
        out = case.phi.closed_form_Phi(s_arr)
    else:
        uniq, inverse = np.unique(s_arr, return_inverse=True)
        vals = np.array([_Phi_quadrature(case, float(x)) for x in uniq])
        out = vals[inverse].reshape(s_arr.shape)
    return float(out) if np.ndim(out) == 0 else out


def functional_P(field: SupportField, f: DensityField, case: OrliczCase) -> float:
    """``int Phi(1/h) f dx`` over the normal circle."""
    h = field.h
    if not np.all(h > 0):
        raise ValueError("support function must be positive")
    return integrate_x(eval_Phi(case, 1.0 / h) * f.f, field.grid)


@dataclass(frozen=True)
class HypothesisReport:
    case_tag: str
    P0: float
    satisfied: bool
    C_hat: Optional[float] = None
    suggested_scale: Optional[float] = None
    C_hat_direction: Optional[float] = None


def _Phi_of_secant(case):
    def g(y):
        c = math.cos(y)
        if c <= 0.0:
            return 0.0
        return float(eval_Phi(case, 1.0 / c))

    return g


def _secant_moment(case, k):
    """``int_0^{2 pi} Phi(1/|cos y|) cos(k y) dy`` for even ``k``.

    The weight has period pi and is symmetric about pi/2, so the full
    integral is four times the quarter period, singular only at pi/2.
    """
    g = _Phi_of_secant(case)
    val, err, ier = _quad(
        lambda y: g(y) * math.cos(k * y), 0.0, 0.5 * math.pi, "C_hat",
        epsabs=1e-13, epsrel=1e-12, limit=500,
    )
    if not np.isfinite(val) or (ier != 0 and err > 1e-9 * max(1.0, abs(val))):
        raise HypothesisViolatedError(
            f"integral of Phi(1/|x.theta|) cos({k} x) failed to converge (estimate {err:.3g})"
        )
    return 4.0 * val


def _secant_integral_diverges(case):
    g = _Phi_of_secant(case)
    # cutoff delta from the singular point pi/2, halved three times
    delta = 1e-8
    partial, _, _ = _quad(g, 0.0, 0.5 * math.pi - delta, "C_hat", epsabs=0.0, epsrel=1e-10, limit=500)
    if not np.isfinite(partial):
        return True
    changes = []
    for _ in range(_HALVINGS):
        inc, _, _ = _quad(g, 0.5 * math.pi - delta, 0.5 * math.pi - delta / 2, "C_hat", epsabs=0.0, epsrel=1e-10)
        if not np.isfinite(inc):
            return True
        changes.append(abs(inc) / max(abs(partial), np.finfo(float).tiny))
        partial += inc
        delta /= 2
    return all(c > _DIVERGENCE_RATIO for c in changes)


def compute_C_hat(f: DensityField, case: OrliczCase):
    """``max_theta int f(x) Phi(1/|x.theta|) dx`` over grid directions.

    Returns ``(C_hat, argmax direction)``.  The direction dependence is a
    Fourier multiplier on ``f``: each mode ``k`` of ``f`` is scaled by the
    ``k``-th cosine moment of ``Phi(1/|cos|)``.
    """
    if case.tag != CASE_I:
        raise ValueError("C_hat is only defined for case-i")
    if _secant_integral_diverges(case):
        raise HypothesisViolatedError(
            "int f(x) Phi(1/|x.theta|) dx diverges: condition (i) cannot hold for this phi"
        )
    k, a, b = fourier_coefficients(f.f)
    scale = np.abs(a) + np.abs(b)
    keep = (scale > 1e-14 * scale.max()) & (k % 2 == 0)
    grid = f.grid
    theta = grid.theta[: grid.N // 2]
    values = np.zeros_like(theta)
    for kk, ak, bk in zip(k[keep], a[keep], b[keep]):
        m = _secant_moment(case, int(kk))
        values += (ak * np.cos(kk * theta) + bk * np.sin(kk * theta)) * m
    j = int(np.argmax(values))
    return float(values[j]), float(theta[j])


def hypothesis_check(f: DensityField, case: OrliczCase, h0: SupportField) -> HypothesisReport:
    if case.tag == NEITHER:
        raise ValueError("phi satisfies neither hypothesis")
    P0 = functional_P(h0, f, case)
    if case.tag == CASE_II:
        return HypothesisReport(case_tag=CASE_II, P0=P0, satisfied=True)

    C_hat, direction = compute_C_hat(f, case)
    satisfied = P0 > C_hat
    scale = None if satisfied else suggest_scale(f, case, h0, C_hat)
    return HypothesisReport(
        case_tag=CASE_I,
        P0=P0,
        satisfied=satisfied,
        C_hat=C_hat,
        suggested_scale=scale,
        C_hat_direction=direction,
    )


def suggest_scale(f, case, h0, C_hat, max_halvings=200, rtol=1e-12):
    """Largest ``lam`` in (0, 1] (to ``rtol``) with ``P(lam h0) > C_hat``.

    Phi increasing makes ``P(lam h0)`` decreasing in ``lam``.
    """
    P = lambda lam: functional_P(h0.scaled(lam), f, case)
    hi, lo = 1.0, 0.5
    for _ in range(max_halvings):
        if P(lo) > C_hat:
            break
        hi, lo = lo, lo / 2
    else:
        return None
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if P(mid) > C_hat:
            lo = mid
        else:
            hi = mid
    return lo
