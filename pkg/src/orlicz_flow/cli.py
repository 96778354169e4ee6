"""Command-line front end.

Exit codes: 0 success/converged, 1 usage or IO error, 2 hypothesis or
uniqueness failure, 3 classification failure, 4 timeout, 5 breakdown.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys

import numpy as np

from .analysis import audit_history, residual, uniqueness_experiment
from .config import RunConfig, parse_config
from .errors import (
    ConfigError,
    ExperimentInconclusiveError,
    FlowBreakdownError,
    HypothesisViolatedError,
    OrliczFlowError,
    SnapshotError,
)
from .flow import CONVERGED, DiagnosticsRecord, pointwise_gamma, run
from .geometry import SupportField, is_even, make_grid, support_to_geometry
from .orlicz import CASE_II, NEITHER, classify, hypothesis_check
from .snapshot import load_snapshot, save_snapshot

log = logging.getLogger("orlicz_flow")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAIL = 2
EXIT_CLASS = 3
EXIT_TIMEOUT = 4
EXIT_BREAKDOWN = 5

SHAPE_FIELDS = ("theta", "h", "rho", "kappa", "gamma")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def write_summary(path, items):
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k}={_fmt(v)}\n")


def print_items(items, out=None):
    out = out or sys.stdout
    for k, v in items.items():
        print(f"{k}={_fmt(v)}", file=out)


class DiagnosticsWriter:
    """Streams records to ``diagnostics.csv`` and writes periodic snapshots."""

    def __init__(self, out_dir, config: RunConfig, resume_state=None, resume_path=None, flush_every=50):
        self.out_dir = out_dir
        self.config = config
        self.path = os.path.join(out_dir, "diagnostics.csv")
        self.snapshot_every = config.values["output.snapshot_every"]
        self.flush_every = flush_every
        self._pending = 0
        append = resume_state is not None and os.path.exists(self.path)
        self._fh = open(self.path, "a" if append else "w", newline="")
        self._csv = csv.writer(self._fh, lineterminator="\n")
        if not append:
            self._csv.writerow(DiagnosticsRecord.CSV_FIELDS)
        if resume_state is not None:
            st = resume_state
            self._fh.write(f"# resume step={st.step_index} t={st.t!r} snapshot={resume_path}\n")

    def __call__(self, record, state):
        self._csv.writerow(record.row())
        self._pending += 1
        if self._pending >= self.flush_every:
            self._fh.flush()
            self._pending = 0
        if self.snapshot_every and state.step_index % self.snapshot_every == 0:
            save_snapshot(
                state,
                os.path.join(self.out_dir, f"snapshot_{state.step_index:08d}.txt"),
                self.config.echo(),
            )

    def close(self):
        self._fh.close()


def write_shape(path, field, f, phi, scheme):
    geom = support_to_geometry(field, scheme)
    gamma = pointwise_gamma(geom, f, phi)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SHAPE_FIELDS)
        for row in zip(field.grid.theta, geom.h, geom.rho, geom.kappa, gamma):
            w.writerow([float(x) for x in row])


def read_shape(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "h" not in rows[0]:
        raise ValueError(f"{path}: expected a CSV with an 'h' column")
    return np.array([float(r["h"]) for r in rows])


def cmd_check(cfg: RunConfig, out=None):
    out = out or sys.stdout
    grid = cfg.grid()
    phi = cfg.phi()
    case = classify(phi)
    items = {"phi": phi.describe(), "case": case.tag}
    if case.tag == NEITHER:
        items["verdict"] = "unclassifiable"
        print_items(items, out)
        print(
            "phi satisfies neither hypothesis: int dt/(t phi) diverges (or converges) at both 0 and infinity",
            file=out,
        )
        return EXIT_CLASS, None
    f, h0 = cfg.density(grid), cfg.body("init", grid)
    try:
        report = hypothesis_check(f, case, h0)
    except HypothesisViolatedError as exc:
        items["verdict"] = "violated"
        print_items(items, out)
        print(str(exc), file=out)
        return EXIT_FAIL, None
    if case.tag == CASE_II:
        print("case-ii: hypothesis automatic", file=out)
    else:
        items["C_hat"] = report.C_hat
    items["P0"] = report.P0
    items["verdict"] = "satisfied" if report.satisfied else "unsatisfied"
    if report.suggested_scale is not None:
        items["suggested_scale"] = report.suggested_scale
    print_items(items, out)
    return (EXIT_OK if report.satisfied else EXIT_FAIL), report


def _summary_items(cfg, result_state, history, reason, case, f, phi, warnings=()):
    items = {
        "status": "converged" if reason in CONVERGED else reason,
        "reason": reason,
        "phi": phi.describe(),
        "case": case.tag,
        "steps": result_state.step_index,
        "t": float(result_state.t),
        "eta": float(result_state.eta),
    }
    rep = residual(result_state.field, f, phi, scheme=cfg.scheme)
    h = result_state.field.h
    items.update(
        gamma=rep.gamma,
        gamma_cv=rep.gamma_cv,
        gamma_eta_minus_1=rep.gamma * float(result_state.eta) - 1.0,
        residual_sup=rep.residual_sup,
        residual_l2=rep.residual_l2,
        residual_sup_inv_eta=residual(result_state.field, f, phi, gamma=1.0 / result_state.eta, scheme=cfg.scheme).residual_sup,
        h_min=float(h.min()),
        h_max=float(h.max()),
        final_radius=float(h.mean()),
    )
    if history:
        a = audit_history(history, case)
        items.update(
            L0=a.L0,
            L_drift=a.L_drift,
            L_drift_rel=a.L_drift_rel,
            P_direction=a.direction,
            P_violations=a.violations,
            P_max_violation=a.max_violation,
            h_band=a.h_band,
            kappa_band=a.kappa_band,
            max_log_volume_rate=a.max_log_volume_rate,
        )
    items["warnings"] = len(warnings)
    return items


def cmd_run(cfg: RunConfig, resume=None, skip_hypothesis_check=False, out=None):
    out = out or sys.stdout
    flow_cfg = cfg.flow_config()
    case = classify(flow_cfg.phi)
    if case.tag == NEITHER:
        print("case=neither: phi satisfies neither existence hypothesis", file=out)
        return EXIT_CLASS
    flow_cfg = dataclasses.replace(flow_cfg, case=case)
    skip = skip_hypothesis_check or cfg.skip_hypothesis_check

    start = None
    snap = None
    if resume is not None:
        snap = load_snapshot(resume)
        if snap.N != cfg.N:
            raise SnapshotError(f"snapshot grid N={snap.N} does not match config grid.N={cfg.N}")
        start = snap.state
    elif not skip:
        code, _ = cmd_check(cfg, out)
        if code != EXIT_OK:
            print("hypothesis not satisfied; use --skip-hypothesis-check to override", file=out)
            return code

    os.makedirs(cfg.output_dir, exist_ok=True)
    writer = DiagnosticsWriter(cfg.output_dir, cfg, resume_state=start, resume_path=resume)
    f, phi = flow_cfg.f, flow_cfg.phi
    try:
        try:
            result = run(flow_cfg, check_hypothesis=False, sink=writer, start=start)
        finally:
            writer.close()
    except FlowBreakdownError as exc:
        state = exc.state
        save_snapshot(state, os.path.join(cfg.output_dir, "snapshot_final.txt"), cfg.echo())
        items = {"status": "breakdown", "reason": "breakdown", "error": str(exc),
                 "steps": state.step_index, "t": float(state.t)}
        write_summary(os.path.join(cfg.output_dir, "summary"), items)
        print_items(items, out)
        return EXIT_BREAKDOWN

    write_shape(os.path.join(cfg.output_dir, "shape_final.csv"), result.state.field, f, phi, cfg.scheme)
    save_snapshot(result.state, os.path.join(cfg.output_dir, "snapshot_final.txt"), cfg.echo())
    items = _summary_items(cfg, result.state, result.history, result.reason, case, f, phi, result.warnings)
    write_summary(os.path.join(cfg.output_dir, "summary"), items)
    print_items(items, out)
    return EXIT_OK if result.converged else EXIT_TIMEOUT


def cmd_residual(cfg: RunConfig, shape_path, gamma=None, out=None):
    out = out or sys.stdout
    h = read_shape(shape_path)
    if not is_even(h, rtol=1e-10):
        raise ValueError(f"{shape_path}: shape is not origin symmetric")
    grid = make_grid(h.shape[0])
    field = SupportField(grid, h)
    rep = residual(field, cfg.density(grid), cfg.phi(), gamma=gamma, scheme=cfg.scheme)
    print_items(
        {
            "N": grid.N,
            "gamma": rep.gamma,
            "gamma_cv": rep.gamma_cv,
            "residual_sup": rep.residual_sup,
            "residual_l2": rep.residual_l2,
        },
        out,
    )
    return EXIT_OK


def cmd_uniqueness(cfg: RunConfig, out=None):
    out = out or sys.stdout
    p = cfg.values["phi.p"]
    if cfg.values["phi.family"] != "power" or not p > 0:
        print(
            "uniqueness requires phi(s) = s^p with p > 0: the uniqueness theorem assumes phi increasing",
            file=sys.stderr,
        )
        return EXIT_USAGE
    if cfg.values["init2.kind"] is None:
        print("uniqueness requires a second initial body (init2.*)", file=sys.stderr)
        return EXIT_USAGE
    flow_cfg = cfg.flow_config()
    init2 = cfg.body("init2")
    try:
        rep = uniqueness_experiment(flow_cfg.f, p, flow_cfg.init, init2, config=flow_cfg)
    except ExperimentInconclusiveError as exc:
        print(f"inconclusive: {exc}", file=out)
        return EXIT_BREAKDOWN if isinstance(exc.__cause__, FlowBreakdownError) else EXIT_TIMEOUT
    items = {}
    for i, s in enumerate(rep.runs, 1):
        items.update({f"run{i}_reason": s.reason, f"run{i}_steps": s.steps,
                      f"run{i}_gamma": s.gamma, f"run{i}_eta": s.eta})
    items["rescaled_sup_distance"] = rep.rescaled_sup_distance
    items["tol"] = rep.tol
    items["result"] = "pass" if rep.passed else "fail"
    print_items(items, out)
    return EXIT_OK if rep.passed else EXIT_FAIL


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; here 2 means a hypothesis failure."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(
        prog="orlicz-flow",
        description="Normalized Gauss-curvature flow solver for the planar Orlicz-Aleksandrov problem.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="classify phi and check the existence hypothesis")
    p.add_argument("--config", required=True)

    p = sub.add_parser("run", help="evolve the configured body to convergence")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", metavar="SNAPSHOT")
    p.add_argument("--skip-hypothesis-check", action="store_true")

    p = sub.add_parser("residual", help="stationary-equation residual of a shape CSV")
    p.add_argument("--shape", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--gamma", type=float)

    p = sub.add_parser("uniqueness", help="compare two runs rescaled to gamma = 1")
    p.add_argument("--config", required=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = parse_config(args.config)
        if args.command == "check":
            return cmd_check(cfg)[0]
        if args.command == "run":
            return cmd_run(cfg, resume=args.resume, skip_hypothesis_check=args.skip_hypothesis_check)
        if args.command == "residual":
            return cmd_residual(cfg, args.shape, gamma=args.gamma)
        return cmd_uniqueness(cfg)
    except (ConfigError, SnapshotError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OrliczFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
