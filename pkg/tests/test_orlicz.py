import math

import mpmath
import numpy as np
import pytest
from scipy.special import beta

from orlicz_flow.errors import (
    DegenerateFamilyError,
    HypothesisViolatedError,
    IndeterminateClassError,
    QuadratureError,
)
from orlicz_flow.geometry import DensityField, SupportField, make_grid
from orlicz_flow.orlicz import (
    CASE_I,
    CASE_II,
    NEITHER,
    OrliczCase,
    classify,
    compute_C_hat,
    eval_Phi,
    functional_P,
    hypothesis_check,
    is_increasing,
    make_custom,
    make_power,
    make_power_log,
)

A, B = 1.2, 5.0 / 6.0
# int_0^{2 pi} 2 |cos t|^(-1/2) dt = 4 B(1/4, 1/2)
C_HAT_P_MINUS_HALF = 4 * beta(0.25, 0.5)


def quadrature_case(case):
    return OrliczCase(case.tag, case.phi, use_closed_form=False)


def test_power_closed_forms():
    assert eval_Phi(classify(make_power(-0.5)), 4.0) == pytest.approx(4.0, abs=1e-15)
    assert eval_Phi(classify(make_power(-0.5)), 9.0) == pytest.approx(6.0, abs=1e-15)
    c2 = classify(make_power(2))
    assert eval_Phi(c2, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert eval_Phi(c2, 2.0) == pytest.approx(0.125, abs=1e-15)
    s = np.geomspace(0.01, 100, 50)
    assert np.all(np.diff(eval_Phi(c2, s)) < 0)
    assert is_increasing(make_power(1))
    assert not is_increasing(make_power(-0.5))


def test_power_zero_is_degenerate():
    with pytest.raises(DegenerateFamilyError):
        make_power(0)


@pytest.mark.parametrize("p", [-2, -1, -0.5, -0.25, 0.25, 0.5, 1, 2])
def test_classify_power(p):
    tag = classify(make_power(p)).tag
    assert tag == (CASE_I if p < 0 else CASE_II)


def test_classify_constant_is_neither():
    assert classify(make_custom(lambda s: np.ones_like(np.asarray(s, dtype=float)))).tag == NEITHER


def test_classify_power_log():
    assert classify(make_power_log(-0.5)).tag == CASE_I
    assert classify(make_power_log(1.0)).tag == CASE_II


def test_classify_nan_is_indeterminate():
    phi = make_custom(lambda s: np.where(np.asarray(s) > 1e3, np.nan, np.asarray(s, dtype=float) ** 2))
    with pytest.raises(IndeterminateClassError):
        classify(phi)


@pytest.mark.parametrize("p", [-2, -0.5, -0.25, 0.25, 0.5, 2])
def test_quadrature_matches_closed_form(p):
    case = classify(make_power(p))
    q = quadrature_case(case)
    for s in (0.1, 1.0, 10.0):
        assert eval_Phi(q, s) == pytest.approx(eval_Phi(case, s), abs=1e-10, rel=1e-12)


def test_quadrature_custom_against_riemann_oracle():
    phi = make_custom(lambda s: np.asarray(s, dtype=float) ** 2 * (1 + np.asarray(s, dtype=float)))
    case = classify(phi)
    assert case.tag == CASE_II
    for s in (0.5, 2.0):
        # midpoint rule in t = s e^v on 1e6 nodes, a path independent of t = s/u
        V = 40.0
        v = (np.arange(1_000_000) + 0.5) * (V / 1_000_000)
        riemann = np.sum(1.0 / phi(s * np.exp(v))) * (V / 1_000_000)
        closed = 1 / (2 * s * s) - 1 / s + math.log((1 + s) / s)
        assert riemann == pytest.approx(closed, abs=1e-9)
        assert eval_Phi(case, s) == pytest.approx(riemann, abs=1e-8)


def test_quadrature_failure_raises():
    flat = make_custom(lambda s: np.ones_like(np.asarray(s, dtype=float)))
    forced = OrliczCase(CASE_I, flat, use_closed_form=False)
    with pytest.raises(QuadratureError):
        eval_Phi(forced, 1.0)


def test_eval_Phi_preconditions():
    with pytest.raises(ValueError):
        eval_Phi(classify(make_power(2)), 0.0)
    neither = OrliczCase(NEITHER, make_power(2))
    with pytest.raises(ValueError):
        eval_Phi(neither, 1.0)


@pytest.mark.parametrize(
    "phi",
    [make_power(-0.5), make_power(2), make_power_log(-0.5), make_power_log(1.5)],
    ids=["pow-0.5", "pow2", "plog-0.5", "plog1.5"],
)
def test_Phi_derivative_identity(phi):
    case = classify(phi)
    sign = 1.0 if case.tag == CASE_I else -1.0
    for s in np.geomspace(0.05, 20, 7):
        d = 1e-4 * s
        dPhi = (eval_Phi(case, s + d) - eval_Phi(case, s - d)) / (2 * d)
        assert dPhi * s * phi(s) == pytest.approx(sign, abs=1e-6)


@pytest.mark.parametrize("phi", [make_power(-0.5), make_power(2.5), make_power_log(0.7)])
def test_deriv_matches_finite_difference(phi):
    fd = make_custom(phi.func)
    s = np.geomspace(1e-3, 1e3, 25)
    assert np.allclose(fd.deriv(s), phi.deriv(s), rtol=1e-4)


def test_functional_P_constants():
    g = make_grid(64)
    one = DensityField.constant(g)
    P = functional_P(SupportField.circle(g, 1), one, classify(make_power(2)))
    assert P == pytest.approx(math.pi, abs=1e-13)
    P = functional_P(SupportField.circle(g, 2), one, classify(make_power(-0.5)))
    assert P == pytest.approx(2 * math.pi * math.sqrt(2), abs=1e-13)
    assert P == pytest.approx(8.8858, abs=1e-4)


def test_functional_P_ellipse_against_riemann():
    g = make_grid(256)
    case = classify(make_power(2))
    P = functional_P(SupportField.ellipse(g, A, B), DensityField.constant(g), case)
    t = np.arange(1_000_000) * (2 * math.pi / 1_000_000)
    h = np.sqrt((A * np.cos(t)) ** 2 + (B * np.sin(t)) ** 2)
    oracle = np.sum(h**2 / 2) * (2 * math.pi / 1_000_000)
    assert P == pytest.approx(oracle, abs=1e-8)


def test_C_hat_against_oracles():
    g = make_grid(256)
    case = classify(make_power(-0.5))
    C_hat, _ = compute_C_hat(DensityField.constant(g), case)
    mp = float(mpmath.quad(lambda t: 2 / mpmath.sqrt(abs(mpmath.cos(t))),
                           [0, mpmath.pi / 2, mpmath.pi, 3 * mpmath.pi / 2, 2 * mpmath.pi]))
    assert C_hat == pytest.approx(C_HAT_P_MINUS_HALF, abs=1e-9)
    assert C_hat == pytest.approx(mp, abs=1e-6)
    q, _ = compute_C_hat(DensityField.constant(g), quadrature_case(case))
    assert q == pytest.approx(C_hat, abs=1e-8)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_C_hat_nonconstant_density_is_max_over_directions():
    from scipy import integrate

    g = make_grid(64)
    f = DensityField.cosine_series(g, [1.0, 0.3])
    case = classify(make_power(-0.5))
    C_hat, direction = compute_C_hat(f, case)

    def direct(theta):
        total = 0.0
        for lo in np.arange(4) * math.pi / 2 + theta + math.pi / 2:
            total += integrate.quad(
                lambda x: (1 + 0.3 * math.cos(2 * x)) * 2 / math.sqrt(abs(math.cos(x - theta))),
                lo, lo + math.pi / 2, epsabs=1e-12, epsrel=1e-12, limit=200,
            )[0]
        return total

    values = [direct(t) for t in g.theta[:32]]
    assert C_hat == pytest.approx(max(values), abs=1e-7)
    assert direction == pytest.approx(g.theta[int(np.argmax(values))])


def test_C_hat_divergent():
    g = make_grid(32)
    with pytest.raises(HypothesisViolatedError):
        compute_C_hat(DensityField.constant(g), classify(make_power(-1)))


def test_hypothesis_case_ii_automatic():
    g = make_grid(32)
    rep = hypothesis_check(DensityField.cosine_series(g, [1, 0.2]), classify(make_power(2)), SupportField.circle(g, 5))
    assert rep.satisfied and rep.C_hat is None


def test_hypothesis_case_i_unit_circle_and_scale():
    g = make_grid(64)
    case = classify(make_power(-0.5))
    one = DensityField.constant(g)
    rep = hypothesis_check(one, case, SupportField.circle(g, 1))
    assert rep.P0 == pytest.approx(4 * math.pi, abs=1e-12)
    assert rep.C_hat == pytest.approx(C_HAT_P_MINUS_HALF, abs=1e-9)
    assert not rep.satisfied
    # P(lam) = 4 pi lam^(-1/2) crosses C_hat at lam = (4 pi / C_hat)^2
    assert rep.suggested_scale == pytest.approx((4 * math.pi / C_HAT_P_MINUS_HALF) ** 2, rel=1e-9)
    shrunk = hypothesis_check(one, case, SupportField.circle(g, rep.suggested_scale))
    assert shrunk.satisfied

    big = hypothesis_check(one, case, SupportField.circle(g, 10))
    assert not big.satisfied and 0 < big.suggested_scale < 1


def test_hypothesis_monotone_in_scale():
    g = make_grid(64)
    case = classify(make_power(-0.5))
    one = DensityField.constant(g)
    body = SupportField.ellipse(g, A, B)
    verdicts = [hypothesis_check(one, case, body.scaled(lam)).satisfied for lam in np.linspace(0.05, 1.0, 20)]
    assert verdicts[0] and not verdicts[-1]
    first_fail = verdicts.index(False)
    assert not any(verdicts[first_fail:])
