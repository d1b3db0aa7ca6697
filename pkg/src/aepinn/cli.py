"""Command-line front end.

    aepinn train        train one method on one problem, write run artifacts
    aepinn compare      train several methods, emit the comparison table
    aepinn dump-points  write the training collocation points as CSV
    aepinn error-field  per-point absolute errors of a checkpoint
    aepinn gradcheck    finite-difference check of the full loss gradient
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .harness import ConfigError, default_run_dir, resolve_config, run_training
from .metrics import error_field_csv, error_table, rows_to_csv
from .networks import load_checkpoint
from .presets import METHODS, PRESET_MODES, PresetError, baseline_methods, gradcheck_config, preset
from .problems import PROBLEM_IDS, UnknownProblemError, builtin
from .sampling import Rng, dump_points_csv
from .tape import NonFiniteError
from .training import TrainingDiverged, build_model, gradcheck, sample_training_points


def _fail(message, code=2):
    print(f"error: {message}", file=sys.stderr)
    raise SystemExit(code)


def _check_problem(problem):
    try:
        return builtin(problem)
    except UnknownProblemError as err:
        _fail(err)


def _add_common(p, with_method=True):
    p.add_argument("--problem", default="ex1", help="problem id, e.g. ex1 or ex2:k=3")
    if with_method:
        p.add_argument("--method", default="ae", choices=METHODS)
    p.add_argument("--preset", default="paper", choices=PRESET_MODES)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--out", default=None, help="output directory")


def cmd_train(args):
    _check_problem(args.problem)
    try:
        cfg = resolve_config(
            args.problem, args.method, args.preset, args.seed, args.iterations, args.config
        )
    except (PresetError, ConfigError, UnknownProblemError) as err:
        _fail(err)
    out_dir = args.out or default_run_dir(cfg, args.preset)
    try:
        model, history, row = run_training(cfg, out_dir, mode=args.preset)
    except TrainingDiverged as err:
        _fail(f"training diverged at iteration {err.iteration}: {err}", code=1)
    except NonFiniteError as err:
        _fail(err, code=1)
    report = row.report
    rel = "undefined" if report.e_l2rel is None else f"{report.e_l2rel:.3e}"
    print(f"run directory: {out_dir}")
    print(f"final loss:    {history.records[-1].total:.6e}")
    print(f"errors:        E_M={report.e_max:.3e}  E_R={report.e_rms:.3e}  E_L={rel}")
    return 0


def cmd_compare(args):
    _check_problem(args.problem)
    methods = args.methods.split(",") if args.methods else None
    if methods is None:
        methods = list(baseline_methods(args.problem)) + ["ae"]
    for m in methods:
        if m not in METHODS:
            _fail(f"unknown method {m!r}; valid: {', '.join(METHODS)}")
    kappas = [int(k) for k in args.kappa.split(",")] if args.kappa else [None]
    out_dir = args.out or os.path.join(
        "runs", f"compare-{args.problem.replace(':', '_').replace('=', '')}-{args.preset}"
    )
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for kappa in kappas:
        problem = f"ex2:k={kappa}" if kappa is not None else args.problem
        for method in methods:
            try:
                cfg = preset(problem, method, mode=args.preset, seed=args.seed,
                             iterations=args.iterations)
            except PresetError as err:
                _fail(err)
            sub = os.path.join(out_dir, f"{method}" + (f"-k{kappa}" if kappa else ""))
            print(f"training {method} on {problem} ({cfg.iterations} iterations)...")
            _, _, row = run_training(cfg, sub, mode=args.preset)
            rows.append(row)
    table = error_table(rows)
    aebest = {r.kappa: r.report.e_l2rel for r in rows if r.method == "ae"}
    lines = [table]
    for r in rows:
        if r.method != "ae" and r.report.e_l2rel and aebest.get(r.kappa):
            gain = r.report.e_l2rel / aebest[r.kappa]
            lines.append(f"E_L improvement of ae over {r.method}"
                         + (f" (kappa={r.kappa})" if r.kappa is not None else "")
                         + f": {gain:.1f}x")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    with open(os.path.join(out_dir, "comparison.txt"), "w") as fh:
        fh.write(text)
    with open(os.path.join(out_dir, "comparison.csv"), "w") as fh:
        fh.write(rows_to_csv(rows))
    print(f"comparison artifacts in {out_dir}")
    return 0


def cmd_dump_points(args):
    spec = _check_problem(args.problem)
    try:
        cfg = preset(args.problem, args.method, mode=args.preset, seed=args.seed)
    except PresetError as err:
        _fail(err)
    out_dir = args.out or default_run_dir(cfg, f"{args.preset}-points")
    os.makedirs(out_dir, exist_ok=True)
    rng = Rng(cfg.seed)
    build_model(cfg, spec).init(rng)  # keep the stream aligned with train()
    points = sample_training_points(cfg, spec, rng)
    path = os.path.join(out_dir, "points.csv")
    dump_points_csv(points, path)
    counts = {ps.kind: 0 for ps in points}
    for ps in points:
        counts[ps.kind] += len(ps)
    print(f"wrote {path} ({sum(counts.values())} points: {counts})")
    return 0


def cmd_error_field(args):
    spec = _check_problem(args.problem)
    try:
        model, payload = load_checkpoint(args.checkpoint, spec.domain)
    except (ValueError, OSError) as err:
        _fail(err)
    if model.dim != spec.dim or model.n_subdomains != spec.n_subdomains:
        _fail(
            f"checkpoint architecture (d={model.dim}, {model.n_subdomains} subdomains) "
            f"does not match problem {args.problem}"
        )
    grid = spec.test_grid(args.grid) if args.grid else spec.test_grid()
    out_dir = args.out or "runs/error-field"
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "error_field.csv")
    report = error_field_csv(model, spec, path, grid)
    rel = "undefined" if report.e_l2rel is None else f"{report.e_l2rel:.3e}"
    print(f"wrote {path} ({report.n_test} points)  E_M={report.e_max:.3e}  E_L={rel}")
    return 0


def cmd_gradcheck(args):
    problems = args.problems.split(",") if args.problems else list(PROBLEM_IDS)
    worst = 0.0
    failed = False
    for pid in problems:
        _check_problem(pid)
        methods = args.methods.split(",") if args.methods else list(
            baseline_methods(pid)
        ) + ["ae"]
        for method in methods:
            spec = builtin(pid)
            cfg = gradcheck_config(pid, method, seed=args.seed)
            rng = Rng(cfg.seed)
            model = build_model(cfg, spec).init(rng)
            pts = sample_training_points(cfg, spec, rng)
            disc = gradcheck(model, spec, pts, step=args.step)
            worst = max(worst, disc)
            status = "ok" if disc < args.tol else "FAIL"
            if disc >= args.tol:
                failed = True
            print(f"{pid:8s} {method:6s} max-rel-discrepancy {disc:.3e}  {status}")
    print(f"worst: {worst:.3e} (tolerance {args.tol:.1e})")
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="aepinn",
        description="Attention-enhanced PINN solvers for elliptic interface problems",
    )
    parser.add_argument("--version", action="version", version=f"aepinn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one method on one problem")
    _add_common(p)
    p.add_argument("--iterations", type=int, default=None, help="override the preset budget")
    p.add_argument("--config", default=None, help="INI config or manifest.json to replay")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("compare", help="train several methods and tabulate errors")
    _add_common(p, with_method=False)
    p.add_argument("--methods", default=None, help="comma list, default: table methods")
    p.add_argument("--kappa", default=None, help="ex2 parameter sweep, e.g. 2,3,4")
    p.add_argument("--iterations", type=int, default=None)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("dump-points", help="write training points as CSV")
    _add_common(p)
    p.set_defaults(fn=cmd_dump_points)

    p = sub.add_parser("error-field", help="per-point absolute error CSV")
    _add_common(p, with_method=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--grid", type=int, default=None, help="test points per axis")
    p.set_defaults(fn=cmd_error_field)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument("--problems", default=None, help="comma list, default: all")
    p.add_argument("--methods", default=None, help="comma list, default: table methods")
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=1234)
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
