"""Command-line interface: fit, test, simulate, estimate-omega, predict."""

import argparse
import csv
import json
import sys

import numpy as np

from . import panel as panel_mod
from .constraints import HypothesisSpec
from .errors import PoismerError
from .inference import score_test, wald_test
from .model import Dataset
from .penalty import PenaltySpec
from .simulation import SimDesign, naive_comparison, run_experiment
from .solver import (SolverConfig, admm_fit, default_lambda_grid, select_lambda)

USAGE_ERROR = 1
NUMERIC_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(USAGE_ERROR)


def _read_data_csv(path):
    """Header CSV with a `y` count column; remaining numeric columns form W
    in file order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    if "y" not in header:
        raise ValueError(f"{path}: no 'y' column in header")
    yi = header.index("y")
    values = np.asarray(rows, dtype=float)
    Y = values[:, yi]
    W = np.delete(values, yi, axis=1)
    names = [h for i, h in enumerate(header) if i != yi]
    return W, Y, names


def _read_matrix_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _read_omega(arg, p):
    """Omega argument: a headerless p x p CSV path, `zero`, or
    `scaled:<c>:<path>`."""
    if arg == "zero":
        return np.zeros((p, p))
    if arg.startswith("scaled:"):
        _, c, path = arg.split(":", 2)
        return float(c) * _read_matrix_csv(path)
    return _read_matrix_csv(arg)


def _ratio_to_reference(W, names, ref):
    """Divide every covariate column by the named reference column and
    drop the reference from the design."""
    if ref not in names:
        raise ValueError(f"reference column {ref!r} not found")
    j = names.index(ref)
    denom = W[:, j]
    if np.any(denom == 0):
        raise ValueError(f"reference column {ref!r} contains zeros")
    W = W / denom[:, None]
    return np.delete(W, j, axis=1), [n for n in names if n != ref]


def _standardize(W, center, scale):
    if center:
        W = W - W.mean(axis=0)
    if scale:
        sd = W.std(axis=0, ddof=1)
        sd[sd == 0] = 1.0
        W = W / sd
    return W


def _solver_config(args):
    kwargs = {}
    if args.config:
        text = open(args.config, "rb").read()
        if args.config.endswith(".toml"):
            import tomllib

            kwargs.update(tomllib.loads(text.decode()))
        else:
            kwargs.update(json.loads(text))
    for key, attr in [
        ("rho_admm", "rho"), ("t_max", "tmax"), ("tol", "tol"),
        ("r1", "r1"), ("r2", "r2"),
    ]:
        val = getattr(args, attr, None)
        if val is not None:
            kwargs[key] = val
    return SolverConfig(**kwargs)


def _lambda_grid(args):
    if getattr(args, "lambda_grid", None):
        return np.asarray([float(x) for x in args.lambda_grid.split(",")])
    return default_lambda_grid()


def _add_solver_flags(sp):
    sp.add_argument("--config", help="JSON or TOML solver config file")
    sp.add_argument("--rho", type=float, help="ADMM penalty parameter")
    sp.add_argument("--tmax", type=int, help="max outer iterations")
    sp.add_argument("--tol", type=float, help="stopping tolerance")
    sp.add_argument("--r1", type=float, help="L1-ball radius override")
    sp.add_argument("--r2", type=float, help="L2-ball radius override")
    sp.add_argument("--lambda-grid", help="comma-separated lambda values")
    sp.add_argument("--family", default="scad", choices=["scad", "mcp"])
    sp.add_argument("--center", action="store_true",
                    help="center covariate columns")
    sp.add_argument("--scale", action="store_true",
                    help="scale covariate columns by their SD")
    sp.add_argument("--ratio-ref", metavar="COLUMN",
                    help="divide covariates by this reference column and "
                         "drop it from the design")


def _fit_to_json(fit):
    return json.dumps(
        {
            "beta": fit.beta.tolist(),
            "support": fit.support.tolist(),
            "lambda": fit.lam,
            "converged": fit.converged,
            "iterations": fit.iterations,
            "constraint_residual": fit.constraint_residual,
            "objective": fit.objective,
        }
    )


def _cmd_fit(args):
    W, Y, names = _read_data_csv(args.data)
    if args.ratio_ref:
        W, names = _ratio_to_reference(W, names, args.ratio_ref)
    W = _standardize(W, args.center, args.scale)
    omega = _read_omega(args.omega, W.shape[1])
    data = Dataset(W=W, Y=Y, omega=omega)
    config = _solver_config(args)
    if args.lam is not None:
        fit = admm_fit(data, PenaltySpec(args.family, args.lam), config=config)
    else:
        fit = select_lambda(data, args.family, _lambda_grid(args), config=config)
    print(_fit_to_json(fit))
    return 0


def _cmd_test(args):
    W, Y, names = _read_data_csv(args.data)
    if args.ratio_ref:
        W, names = _ratio_to_reference(W, names, args.ratio_ref)
    W = _standardize(W, args.center, args.scale)
    omega = _read_omega(args.omega, W.shape[1])
    data = Dataset(W=W, Y=Y, omega=omega)
    spec = HypothesisSpec.from_json(open(args.hyp).read())
    config = _solver_config(args)
    grid = _lambda_grid(args)
    runner = wald_test if args.kind == "wald" else score_test
    result = runner(data, spec, penalty_family=args.family, grid=grid,
                    config=config)
    print(result.to_json())
    return 0


def _cmd_simulate(args):
    design = SimDesign(
        n=args.n,
        p=args.p,
        x_dist=args.x_dist,
        sigma_kind=args.sigma,
        h=args.h,
        hypothesis_id=args.design.upper(),
        reps=args.reps,
        seed=args.seed,
    )
    config = _solver_config(args)
    writer = csv.writer(sys.stdout, delimiter="\t")
    writer.writerow(["hypothesis", "h", "T_W_rate", "T_S_rate", "reps",
                     "failures"])

    def emit(row, tag=""):
        writer.writerow([
            row.hypothesis + tag, f"{row.h:.6g}", f"{row.wald_rate:.6g}",
            f"{row.score_rate:.6g}", row.reps, row.failures,
        ])

    if args.naive:
        corrected, naive = naive_comparison(design, config)
        emit(corrected, tag="/corrected")
        emit(naive, tag="/naive")
        if args.json_out:
            print(json.dumps({"corrected": corrected.__dict__,
                              "naive": naive.__dict__}), file=sys.stderr)
    else:
        row = run_experiment(design, config)
        emit(row)
        if args.json_out:
            print(json.dumps(row.__dict__), file=sys.stderr)
    return 0


def _cmd_estimate_omega(args):
    with open(args.panel, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    for col in ("subject_id", "visit", "age"):
        if col not in header:
            raise ValueError(f"{args.panel}: missing '{col}' column")
    sid = [row[header.index("subject_id")] for row in rows]
    visit = [int(row[header.index("visit")]) for row in rows]
    age = [float(row[header.index("age")]) for row in rows]
    feat_idx = [i for i, h in enumerate(header)
                if h not in ("subject_id", "visit", "age")]
    features = np.asarray(
        [[float(row[i]) for i in feat_idx] for row in rows]
    )
    panel = panel_mod.LongitudinalPanel(
        subject_id=np.asarray(sid),
        visit_index=np.asarray(visit),
        features=features,
        age=np.asarray(age),
    )
    omega = panel_mod.estimate_omega(panel)
    if args.error_free:
        idx = [int(x) - 1 for x in args.error_free.split(",")]
        omega = panel_mod.embed_omega(omega, omega.shape[0] + len(idx), idx)
    np.savetxt(args.out or sys.stdout, omega, delimiter=",", fmt="%.17g")
    return 0


def _cmd_predict(args):
    beta = np.asarray(json.load(open(args.beta))["beta"], dtype=float)
    W = _read_matrix_csv(args.data)
    omega = _read_omega(args.omega, len(beta))
    y_hat = panel_mod.predict(beta, W, omega, half=not args.no_half)
    for val in y_hat:
        print(f"{val:.17g}")
    return 0


def build_parser():
    parser = _Parser(prog="poismer",
                     description="Measurement-error-corrected penalized "
                                 "Poisson regression and testing")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("fit", parents=[], help="penalized fit from CSV")
    sp.add_argument("--data", required=True, help="CSV with y column and W")
    sp.add_argument("--omega", required=True,
                    help="p x p CSV, 'zero', or 'scaled:<c>:<path>'")
    sp.add_argument("--lam", type=float, help="fixed lambda (skips BIC)")
    _add_solver_flags(sp)
    sp.set_defaults(func=_cmd_fit)

    sp = sub.add_parser("test", help="Wald or score test")
    sp.add_argument("--data", required=True)
    sp.add_argument("--omega", required=True)
    sp.add_argument("--hyp", required=True, help="hypothesis JSON file")
    sp.add_argument("--kind", default="wald", choices=["wald", "score"])
    _add_solver_flags(sp)
    sp.set_defaults(func=_cmd_test)

    sp = sub.add_parser("simulate", help="size/power Monte Carlo")
    sp.add_argument("--design", required=True,
                    help="hypothesis id, e.g. h02")
    sp.add_argument("--n", type=int, default=300)
    sp.add_argument("--p", type=int, default=50)
    sp.add_argument("--reps", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--h", type=float, default=0.0)
    sp.add_argument("--x-dist", default="normal",
                    choices=["normal", "uniform"])
    sp.add_argument("--sigma", default="identity",
                    choices=["identity", "ar1"])
    sp.add_argument("--naive", action="store_true",
                    help="corrected-vs-naive comparison design")
    sp.add_argument("--json-out", action="store_true",
                    help="also emit machine-readable JSON on stderr")
    _add_solver_flags(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("estimate-omega",
                        help="noise covariance from a repeated-measures panel")
    sp.add_argument("--panel", required=True,
                    help="CSV with subject_id, visit, age and feature columns")
    sp.add_argument("--out", help="output CSV path (default stdout)")
    sp.add_argument("--error-free",
                    help="comma-separated 1-based positions of error-free "
                         "covariates to embed as zero rows/columns")
    sp.set_defaults(func=_cmd_estimate_omega)

    sp = sub.add_parser("predict", help="predicted means for new rows")
    sp.add_argument("--beta", required=True,
                    help="fit JSON (output of the fit subcommand)")
    sp.add_argument("--data", required=True, help="headerless W CSV")
    sp.add_argument("--omega", required=True)
    sp.add_argument("--no-half", action="store_true",
                    help="drop the 1/2 factor in the prediction exponent")
    sp.set_defaults(func=_cmd_predict)
    return parser


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except PoismerError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


def main():
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
