"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL line to ``ACCEPTANCE_LINES``; the lines are
printed in a terminal-summary section at the end of the session.
"""

import filecmp
import itertools
import math
import time

import mpmath
import numpy as np
import pytest
from scipy.special import beta

from conftest import ACCEPTANCE_LINES, random_even_convex
from orlicz_flow import cli
from orlicz_flow.analysis import audit_history, radial_flow_consistency, residual, uniqueness_experiment
from orlicz_flow.flow import FlowConfig, flow_rhs, initial_state, run, step
from orlicz_flow.geometry import DensityField, SupportField, derivative, make_grid
from orlicz_flow.orlicz import classify, compute_C_hat, hypothesis_check, make_power

pytestmark = pytest.mark.slow

N = 256
A, B = 1.2, 5.0 / 6.0
HARMONIC = 2 * A * B / (A + B)
# the ellipse runs stop on rhs_tol; the looser default gamma_cv_tol would stop
# them with a residual near 1e-6
ELLIPSE_GAMMA_CV_TOL = 1e-9


def report(n, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def grid():
    return make_grid(N)


@pytest.fixture(scope="module")
def ellipse_run(grid):
    cfg = FlowConfig(
        phi=make_power(2),
        f=DensityField.constant(grid),
        init=SupportField.ellipse(grid, A, B),
        gamma_cv_tol=ELLIPSE_GAMMA_CV_TOL,
    )
    return timed(run, cfg)


@pytest.fixture(scope="module")
def case_i_runs(grid):
    phi = make_power(-0.5)
    one = DensityField.constant(grid)
    case = classify(phi)
    out = {}
    for name, body in (("circle", SupportField.circle(grid, 1.0)), ("ellipse", SupportField.ellipse(grid, A, B))):
        rep = hypothesis_check(one, case, body)
        shrunk = body if rep.satisfied else body.scaled(rep.suggested_scale)
        assert hypothesis_check(one, case, shrunk).satisfied
        out[name] = run(FlowConfig(phi=phi, f=one, init=shrunk, case=case))
    return out


@pytest.fixture(scope="module")
def cosine_run(grid):
    f = DensityField.cosine_series(grid, [1.0, 0.3])
    return run(FlowConfig(phi=make_power(2), f=f, init=SupportField.circle(grid, 1.0)))


@pytest.fixture(scope="module")
def uniqueness_reports(grid):
    f = DensityField.cosine_series(grid, [1.0, 0.3])
    t0 = time.perf_counter()
    reps = {
        p: uniqueness_experiment(f, p, SupportField.circle(grid, 1.0), SupportField.ellipse(grid, A, B))
        for p in (1.0, 2.0)
    }
    return reps, time.perf_counter() - t0


def test_1_sphere_fixed_point(grid):
    worst_rhs = worst_drift = worst_time = 0.0
    for r, c, p in itertools.product((0.5, 1.0, 2.0), (0.5, 1.0, 2.0), (-0.5, 1.0, 2.0)):
        t0 = time.perf_counter()
        cfg = FlowConfig(phi=make_power(p), f=DensityField.constant(grid, c), init=SupportField.circle(grid, r))
        worst_rhs = max(worst_rhs, float(np.max(np.abs(flow_rhs(cfg.init, cfg.f, cfg.phi)))))
        s = initial_state(cfg)
        for _ in range(1000):
            s = step(s, cfg.f, cfg.phi, cfg)
        worst_drift = max(worst_drift, float(np.max(np.abs(s.field.h - r))))
        worst_time = max(worst_time, time.perf_counter() - t0)
    ok = worst_rhs < 1e-12 and worst_drift < 1e-10 and worst_time < 5.0
    report(
        1, "sphere fixed point", ok,
        f"27 cases, max |rhs| {worst_rhs:.2e} (<1e-12), max drift after 1000 steps "
        f"{worst_drift:.2e} (<1e-10), slowest {worst_time:.2f}s (<5s)",
    )


def test_2_conservation(ellipse_run):
    res, seconds = ellipse_run
    audit = audit_history(res.history, res.case)
    ok = res.converged and audit.L_drift_rel < 1e-6 and seconds < 60
    report(
        2, "conservation of L", ok,
        f"{res.reason} after {res.state.step_index} steps, relative L drift {audit.L_drift_rel:.2e} (<1e-6), "
        f"runtime {seconds:.1f}s (<60s)",
    )


def test_3_monotonicity(ellipse_run, case_i_runs):
    res, _ = ellipse_run
    runs = [("p=2 ellipse", res)] + [(f"p=-0.5 shrunk {k}", v) for k, v in case_i_runs.items()]
    parts, ok = [], True
    for name, r in runs:
        a = audit_history(r.history, r.case)
        h0 = r.history[0].h_min
        bands = a.h_band[0] > 0.1 * h0 and a.kappa_band[1] < 1e3
        good = a.violations == 0 and r.converged and bands
        ok &= good
        parts.append(f"{name}: {a.direction}, {a.violations} violations (max {a.max_violation:.1e}), {r.reason}")
    report(3, "P monotonicity", ok, "; ".join(parts))


def test_4_harmonic_mean_circle(ellipse_run):
    res, _ = ellipse_run
    dist = float(np.max(np.abs(res.state.field.h - HARMONIC)))
    rep = residual(res.state.field, DensityField.constant(res.state.field.grid),
                   make_power(2), gamma=1.0 / res.state.eta)
    ok = dist < 1e-4 and rep.residual_sup < 1e-6
    report(
        4, "convergence to harmonic-mean circle", ok,
        f"|h - {HARMONIC:.5f}|_inf {dist:.2e} (<1e-4), residual_sup(gamma=1/eta) {rep.residual_sup:.2e} (<1e-6)",
    )


def test_5_nonconstant_density(cosine_run):
    res = cosine_run
    f = DensityField.cosine_series(res.state.field.grid, [1.0, 0.3])
    rep = residual(res.state.field, f, make_power(2))
    balance = abs(rep.gamma * res.state.eta - 1.0)
    ok = res.converged and rep.gamma_cv < 1e-6 and rep.residual_sup < 1e-5 and balance < 1e-6
    report(
        5, "stationary residual, f = 1 + 0.3 cos 2theta", ok,
        f"{res.reason}, gamma_cv {rep.gamma_cv:.2e} (<1e-6), residual_sup {rep.residual_sup:.2e} (<1e-5), "
        f"|gamma*eta - 1| {balance:.1e} (<1e-6)",
    )


def test_6_uniqueness(uniqueness_reports):
    reps, seconds = uniqueness_reports
    dists = {p: r.rescaled_sup_distance for p, r in reps.items()}
    ok = all(d < 1e-4 for d in dists.values()) and seconds < 180
    report(
        6, "uniqueness after rescaling", ok,
        ", ".join(f"p={p:g}: {d:.2e}" for p, d in dists.items()) + f" (<1e-4), runtime {seconds:.0f}s (<180s)",
    )


def test_7_hypothesis_checker(grid):
    one = DensityField.constant(grid)
    case = classify(make_power(-0.5))
    C_hat, _ = compute_C_hat(one, case)
    # two independent oracles: the Beta-function closed form and mpmath tanh-sinh
    closed = 4 * beta(0.25, 0.5)
    mp = float(
        mpmath.quad(lambda t: 2 / mpmath.sqrt(abs(mpmath.cos(t))),
                    [0, mpmath.pi / 2, mpmath.pi, 3 * mpmath.pi / 2, 2 * mpmath.pi])
    )
    err = max(abs(C_hat - closed), abs(C_hat - mp))
    verdict_runs = []
    for body in (SupportField.circle(grid, 1.0), SupportField.ellipse(grid, A, B), SupportField.circle(grid, 10.0)):
        v = [hypothesis_check(one, case, body.scaled(lam)).satisfied for lam in np.geomspace(0.01, 100, 41)]
        flips = sum(a != b for a, b in zip(v, v[1:]))
        verdict_runs.append(v[0] and not v[-1] and flips == 1)
    ok = err < 1e-6 and all(verdict_runs)
    report(
        7, "hypothesis checker", ok,
        f"C_hat {C_hat:.12f} vs oracles {closed:.12f} / {mp:.9f}, max gap {err:.1e} (<1e-6); "
        f"single satisfied->unsatisfied flip under scaling for {sum(verdict_runs)}/3 bodies",
    )


def test_8_algebraic_identities(grid, ellipse_run, case_i_runs, cosine_run, uniqueness_reports):
    rng = np.random.default_rng(20240611)
    f = DensityField.cosine_series(grid, [1.0, 0.3])
    worst_radial = 0.0
    for i in range(100):
        body = random_even_convex(grid, rng)
        cfg = FlowConfig(phi=make_power((-0.5, 1.0, 2.0)[i % 3]), f=f, init=body)
        worst_radial = max(worst_radial, radial_flow_consistency(initial_state(cfg), f, cfg.phi))

    histories = [ellipse_run[0].history, cosine_run.history]
    histories += [r.history for r in case_i_runs.values()]
    histories += [s.history for rep in uniqueness_reports[0].values() for s in rep.runs]
    n_records = sum(len(h) for h in histories)
    worst_rate = max(abs(r.log_volume_rate) for h in histories for r in h)

    errs = []
    for n in (128, 256):
        g = make_grid(n)
        s = np.exp(np.sin(g.theta))
        exact = np.cos(g.theta) * s
        errs.append(np.max(np.abs(derivative(s, 1, "central") - exact)))
    ratio = errs[0] / errs[1]
    ok = worst_radial < 1e-10 and worst_rate < 1e-8 and abs(ratio - 4) <= 0.5
    report(
        8, "algebraic identities", ok,
        f"radial consistency {worst_radial:.1e} on 100 bodies (<1e-10), log-volume rate {worst_rate:.1e} "
        f"over {n_records} records of {len(histories)} runs (<1e-8), Richardson ratio {ratio:.3f} (4 +- 0.5)",
    )


def test_9_determinism(tmp_path_factory):
    paths = []
    for k in range(2):
        d = tmp_path_factory.mktemp(f"det{k}")
        cfg = d / "ellipse.toml"
        cfg.write_text(
            "grid.N = 256\nphi.family = \"power\"\nphi.p = 2\nf.kind = \"constant\"\n"
            "init.kind = \"ellipse\"\ninit.a = 1.2\ninit.b = 0.8333333333333334\n"
            f"stop.gamma_cv_tol = {ELLIPSE_GAMMA_CV_TOL!r}\noutput.dir = \"{d / 'out'}\"\n"
        )
        assert cli.main(["run", "--config", str(cfg)]) == cli.EXIT_OK
        paths.append(d / "out" / "diagnostics.csv")
    same = filecmp.cmp(paths[0], paths[1], shallow=False)
    rows = len(paths[0].read_text().splitlines()) - 1
    report(9, "determinism", same, f"two CLI runs, diagnostics.csv ({rows} rows) bit-identical: {same}")
