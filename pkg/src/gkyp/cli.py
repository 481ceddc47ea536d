"""Command line front end.

Exit codes: 0 property holds / suite clean, 1 property fails / falsified,
2 input error, 3 numerical failure. Errors are also reported as JSON on
stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .errors import (
    AllFrequenciesSingular,
    GkypError,
    HorizonExhausted,
    NumericalFailure,
    StepTooLarge,
)
from .schemas import SCHEMA_VERSION

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("gkyp")


class InputError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _emit(report, args):
    report = _jsonable({"schema_version": SCHEMA_VERSION, **report})
    text = json.dumps(report, indent=2, allow_nan=False)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return report


def _read(path, loader, what):
    from .model import read_json

    try:
        obj = read_json(path)
    except FileNotFoundError as exc:
        raise InputError(f"{what} file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {what} file {path}: {exc}") from exc
    try:
        return loader(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid {what} file {path}: {exc}") from exc


def _load_problem(args):
    from .model import band_from_json, pi_from_json, system_from_json

    sys_ = _read(args.sys, system_from_json, "system")
    Pi = _read(args.pi, pi_from_json, "supply rate")
    band = _read(args.band, band_from_json, "band")
    n, m = sys_.n, sys_.m
    if Pi.shape != (n + m, n + m):
        raise InputError(f"Pi must be {n + m}x{n + m} for n={n}, m={m}; got {Pi.shape}")
    return sys_, Pi, band


def _fdi_options(args):
    from .freq import FdiOptions

    return FdiOptions(coarse_points=args.coarse_points, refine_depth=args.refine_depth,
                      tol=args.fdi_tol, include_modal_frequencies=not args.no_modal)


# --- subcommands -------------------------------------------------------------

def cmd_fdi_check(args):
    from .freq import fdi_check, write_samples_csv

    sys_, Pi, band = _load_problem(args)
    rep = fdi_check(sys_, Pi, band, _fdi_options(args))
    if args.csv:
        write_samples_csv(rep, args.csv)
    _emit(rep.to_json(), args)
    log.info("FDI %s: worst eigenvalue %.3e at w=%.6g",
             "holds" if rep.holds else "fails", rep.worst_eig, rep.worst_omega)
    return EXIT_OK if rep.holds else EXIT_FAIL


def cmd_lmi_check(args):
    from .lmi import LmiOptions, build_gkyp, gkyp_feasible
    from .model import matrix_to_json
    from .sdp import Status, dump_realified

    sys_, Pi, band = _load_problem(args)
    opts = LmiOptions(max_iter=args.max_iter, tol=args.gap_tol, strict_margin=args.strict_margin,
                      radius=args.radius, verify_tol=args.verify_tol)
    if args.debug_dump:
        with open(args.debug_dump, "w") as fh:
            json.dump(dump_realified(build_gkyp(sys_, Pi, band)), fh)
    out, cert = gkyp_feasible(sys_, Pi, band, opts)
    report = {"feasible": out.status.feasible, "solver": out.to_json(), "certificate": None}
    if cert is not None:
        report["certificate"] = {"P": matrix_to_json(cert.P), "Q": matrix_to_json(cert.Q),
                                 "lmi_margin": cert.lmi_margin, "q_margin": cert.q_margin}
    _emit(report, args)
    log.info("LMI %s (t_star=%.3e)", out.status.value, out.t_star)
    if out.status is Status.NUMERICAL_FAILURE:
        return EXIT_NUMERIC
    return EXIT_OK if out.status.feasible else EXIT_FAIL


def read_signal_csv(path, m):
    """Uniformly sampled input from CSV rows ``t, re(u1), im(u1), ...``.

    A header row is skipped when its first field is not a number.
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except FileNotFoundError as exc:
        raise InputError(f"signal file not found: {path}") from exc
    try:
        float(rows[0][0])
    except (ValueError, IndexError):
        rows = rows[1:]
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise InputError(f"signal file {path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != 1 + 2 * m:
        raise InputError(f"signal file {path}: need >= 2 rows of 1 + 2*{m} columns")
    t = data[:, 0]
    dt = t[1] - t[0]
    if dt <= 0 or np.abs(np.diff(t) - dt).max() > 1e-9 * max(abs(t[-1]), 1.0):
        raise InputError(f"signal file {path}: time grid must be uniform and increasing")
    if abs(t[0]) > 1e-12:
        raise InputError(f"signal file {path}: time must start at 0")
    u = data[:, 1::2] + 1j * data[:, 2::2]
    return dt, u


def _write_traj_csv(res, Pi, path):
    traj = res.trajectory
    z = np.hstack([traj.x, traj.u])
    q = np.real(np.einsum("ia,ab,ib->i", z.conj(), Pi, z))
    # running trapezoid value of j_pi
    run = np.concatenate([[0.0], np.cumsum(0.5 * traj.dt * (q[1:] + q[:-1]))])
    with open(path, "w") as fh:
        fh.write("t,norm_x,norm_u,running_j_pi\n")
        for t, xn, un, j in zip(traj.times, np.linalg.norm(traj.x, axis=1),
                                np.linalg.norm(traj.u, axis=1), run):
            fh.write(f"{t!r},{xn!r},{un!r},{j!r}\n")


def _tdi_report(res):
    return {**res.to_json(), "violates_tdi": res.violates_tdi}


def cmd_tdi_check(args):
    from .tdomain import evaluate, simulate

    sys_, Pi, band = _load_problem(args)
    dt, u = read_signal_csv(args.input, sys_.m)
    try:
        traj = simulate(sys_, u, dt)
    except StepTooLarge as exc:
        raise InputError(str(exc)) from exc
    res = evaluate(traj, Pi, band, tol=args.iqc_tol)
    if args.csv:
        _write_traj_csv(res, Pi, args.csv)
    _emit(_tdi_report(res), args)
    return EXIT_FAIL if res.violates_tdi else EXIT_OK


def cmd_tdi_falsify(args):
    from .freq import fdi_check
    from .tdomain import HorizonOptions, falsify_tdi

    sys_, Pi, band = _load_problem(args)
    rep = fdi_check(sys_, Pi, band, _fdi_options(args))
    if rep.worst_eig <= 1e-4:
        _emit({"falsified": False, "reason": "no FDI violation above 1e-4", "fdi": rep.to_json(),
               "result": None}, args)
        return EXIT_OK
    opts = HorizonOptions(T0=args.T0, T_cap=args.T_cap, decay=args.decay, tail_tol=args.tail_tol,
                          steps_per_unit=args.steps_per_unit, max_decay=args.max_decay)
    res = falsify_tdi(sys_, Pi, band, rep, opts)
    if args.csv:
        _write_traj_csv(res, Pi, args.csv)
    _emit({"falsified": True, "fdi": rep.to_json(), "result": _tdi_report(res)}, args)
    return EXIT_FAIL


def _kernel_from_json(obj, field, name):
    from .model import matrix_from_json
    from .sproc import QuadraticMap

    if isinstance(obj, dict):
        return QuadraticMap(matrix_from_json(obj, name)[None, None], field)
    grid = [[matrix_from_json(e, f"{name}[{p}][{q}]") for q, e in enumerate(row)]
            for p, row in enumerate(obj)]
    d = len(grid)
    if d == 0 or any(len(row) != d for row in grid):
        raise ValueError(f"{name}: kernel grid must be square and non-empty")
    return QuadraticMap(np.array(grid), field)


def load_sproc_problem(obj):
    field = obj.get("field", "complex")
    F = _kernel_from_json(obj["F"], field, "F")
    cons = [_kernel_from_json(c, field, f"constraints[{j}]") for j, c in enumerate(obj["constraints"])]
    return F, cons, bool(obj.get("regular", True))


def cmd_s_proc(args):
    from .sproc import falsify_statement_A, find_certificate

    F, cons, regular = _read(args.problem, load_sproc_problem, "s-procedure problem")
    cert = find_certificate(F, cons, regular=regular, strict_margin=args.strict_margin)
    witness = None
    if cert is None or cert.tau0 <= args.tol:
        witness = falsify_statement_A(F, cons, budget=args.budget, tol=args.tol,
                                      restarts=args.restarts, seed=args.seed)
    _emit({"regular": regular,
           "certificate": None if cert is None else cert.to_json(),
           "witness": None if witness is None else witness.to_json()}, args)
    return EXIT_OK if cert is not None and cert.tau0 > args.tol else EXIT_FAIL


def cmd_equiv_test(args):
    from .harness import SuiteConfig, default_workers, run_equivalence_suite

    cfg = SuiteConfig(count=args.count, seed=args.seed, n_max=args.n_max, m_max=args.m_max,
                      data_field=args.field, stability=args.stability,
                      sufficiency_trials=args.trials, timeout=args.timeout,
                      workers=args.workers or default_workers())
    card = run_equivalence_suite(template=cfg)
    report = card.to_json(include_records=True)
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(_jsonable({**report, "schema_version": SCHEMA_VERSION}), fh, indent=2,
                      allow_nan=False)
    summary = {k: v for k, v in report.items() if k != "records"}
    _emit(summary, args)
    return EXIT_OK if card.counts["anomalies"] == 0 else EXIT_FAIL


# --- parser ------------------------------------------------------------------

def _problem_args(p):
    p.add_argument("--sys", required=True, help="system JSON {A, B}")
    p.add_argument("--pi", required=True, help="supply rate JSON {Pi}")
    p.add_argument("--band", required=True, help="band JSON {w1, w2}")


def _fdi_args(p):
    g = p.add_argument_group("frequency sweep")
    g.add_argument("--coarse-points", type=int, default=129, help="Chebyshev grid size (default 129)")
    g.add_argument("--refine-depth", type=int, default=30, help="bracket halvings (default 30)")
    g.add_argument("--fdi-tol", type=float, default=1e-9,
                   help="FDI holds when worst eigenvalue <= this (default 1e-9)")
    g.add_argument("--no-modal", action="store_true", help="do not add Im(eig(A)) to the grid")


def build_parser():
    parser = argparse.ArgumentParser(prog="gkyp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        return p

    p = add("fdi-check", cmd_fdi_check, "sample the frequency-domain inequality over the band")
    _problem_args(p)
    _fdi_args(p)
    p.add_argument("--csv", help="write (omega, lambda_max) samples")

    p = add("lmi-check", cmd_lmi_check, "decide the band LMI and report a certificate")
    _problem_args(p)
    p.add_argument("--max-iter", type=int, default=400, help="Newton step cap (default 400)")
    p.add_argument("--gap-tol", type=float, default=1e-9, help="barrier gap target (default 1e-9)")
    p.add_argument("--strict-margin", type=float, default=1e-7,
                   help="t_star below -margin is strict, within +-margin marginal (default 1e-7)")
    p.add_argument("--radius", type=float, default=1e6, help="trust radius on (P, Q) (default 1e6)")
    p.add_argument("--verify-tol", type=float, default=1e-6,
                   help="certificate acceptance tolerance (default 1e-6)")
    p.add_argument("--debug-dump", help="write the realified problem as JSON")

    p = add("tdi-check", cmd_tdi_check, "evaluate the dissipation and IQC integrals for an input")
    _problem_args(p)
    p.add_argument("--input", required=True, help="CSV rows t, re(u1), im(u1), ...")
    p.add_argument("--iqc-tol", type=float, default=0.0,
                   help="constraint holds when lambda_max(IQC) <= this (default 0)")
    p.add_argument("--csv", help="write (t, |x|, |u|, running j_pi)")

    p = add("tdi-falsify", cmd_tdi_falsify, "construct a constrained input violating the TDI")
    _problem_args(p)
    _fdi_args(p)
    p.add_argument("--T0", type=float, default=20.0, help="first window length (default 20)")
    p.add_argument("--T-cap", type=float, default=2560.0, help="largest window (default 2560)")
    p.add_argument("--decay", type=float, default=0.5,
                   help="closed-loop decay rate required without feedback (default 0.5)")
    p.add_argument("--tail-tol", type=float, default=1e-4, help="free-decay tail tolerance (default 1e-4)")
    p.add_argument("--steps-per-unit", type=float, default=10.0,
                   help="samples per unit of the fastest rate (default 10)")
    p.add_argument("--max-decay", type=float, default=0.1,
                   help="largest accepted terminal decay ratio (default 0.1)")
    p.add_argument("--csv", help="write (t, |x|, |u|, running j_pi)")

    p = add("s-proc", cmd_s_proc, "search S-procedure multipliers or a counterexample")
    p.add_argument("--problem", required=True, help="JSON {F, constraints, regular, field}")
    p.add_argument("--budget", type=int, default=10_000, help="falsifier evaluations (default 1e4)")
    p.add_argument("--restarts", type=int, default=64, help="falsifier restarts (default 64)")
    p.add_argument("--tol", type=float, default=1e-9, help="witness tolerance (default 1e-9)")
    p.add_argument("--strict-margin", type=float, default=1e-7, help="solver margin (default 1e-7)")
    p.add_argument("--seed", type=int, default=0)

    p = add("equiv-test", cmd_equiv_test, "cross-check all routes on random instances")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-max", type=int, default=4)
    p.add_argument("--m-max", type=int, default=3)
    p.add_argument("--field", choices=["real", "complex", "any"], default="any")
    p.add_argument("--stability", choices=["hurwitz", "mixed", "any"], default="any")
    p.add_argument("--trials", type=int, default=20, help="sufficiency trajectories per instance")
    p.add_argument("--timeout", type=float, default=10.0, help="per-instance budget in seconds")
    p.add_argument("--workers", type=int, default=0, help="worker processes (default GKYP_THREADS or 1)")
    p.add_argument("--report", help="full scorecard JSON with per-instance records")
    return parser


def _fail(code, exc):
    err = {"schema_version": SCHEMA_VERSION, "error": type(exc).__name__,
           "message": str(exc), "exit_code": code}
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_INPUT
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, StepTooLarge) as exc:
        return _fail(EXIT_INPUT, exc)
    except (NumericalFailure, HorizonExhausted, AllFrequenciesSingular) as exc:
        return _fail(EXIT_NUMERIC, exc)
    except (GkypError, ValueError, KeyError) as exc:
        return _fail(EXIT_INPUT, exc)
    except np.linalg.LinAlgError as exc:
        return _fail(EXIT_NUMERIC, exc)


if __name__ == "__main__":
    sys.exit(main())
