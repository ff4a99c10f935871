"""Command-line entry point: ``lassoridge <command> [options]``.

Commands: fit, refit, cv, simulate, semi-synthetic, real-data,
check-invariants. Options may also come from a ``--config`` file of
``key = value`` lines (keys are option names without the leading dashes);
flags given on the command line win.

Exit codes: 0 success, 1 invariant failure, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .core import Rng, normalize_with_scale
from .invariants import run_invariant_suite
from .lasso import fit_lasso
from .refit import default_lambda_r, refit_closed_form
from .simulate import (
    DEFAULT_SEED,
    IN_SAMPLE,
    OUT_OF_SAMPLE,
    ScenarioConfig,
    SemiSyntheticSpec,
    load_csv,
    run_real_data,
    run_scenario,
    run_semi_synthetic,
    standin_design,
)
from .tuning import cross_validate_pair, make_grid

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

COMMANDS = ("fit", "refit", "cv", "simulate", "semi-synthetic", "real-data", "check-invariants")

METRIC_COLUMNS = [
    "mean_pred_mse_lasso", "mean_pred_mse_new", "sd_pred_mse_lasso", "sd_pred_mse_new",
    "pred_improvement_pct",
    "mean_est_mse_lasso", "mean_est_mse_new", "sd_est_mse_lasso", "sd_est_mse_new",
    "est_improvement_pct",
    "replications_ok", "failures",
]
SIM_LABELS = ["n", "p", "s", "rho", "sigma", "reps", "seed", "prediction"]


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    options: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "csv"
    seed: int = DEFAULT_SEED
    threads: int = 1
    verbosity: int = 0

    def scenario_configs(self):
        o = self.options
        return [
            ScenarioConfig(n=n, p=p, s_true=s, rho=rho, sigma=sigma, replications=o["reps"],
                           folds=o["folds"], seed=self.seed, prediction=o["prediction"])
            for s in o["s"] for sigma in o["sigma"] for rho in o["rho"]
            for n in o["n"] for p in o["p"]
        ]


def _probability(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return v


def _rho(text):
    v = float(text)
    if not -1 < v < 1:
        raise argparse.ArgumentTypeError(f"|rho| must be below 1, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="file of 'key = value' default options")
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "text"), default="csv")
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
    common.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                        help="worker threads (default: available cores)")
    common.add_argument("--verbose", "-v", action="count", default=0)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", help="CSV holding the design and the response")
    data.add_argument("--response", default="-1", help="response column name or 0-based index")
    data.add_argument("--header", action=argparse.BooleanOptionalAction, default=True)

    parser = argparse.ArgumentParser(prog="lassoridge", description="Lasso-Ridge refitting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common, data], help="fit the Lasso at one penalty")
    p.add_argument("--lambda-l", type=float)

    p = sub.add_parser("refit", parents=[common, data], help="Lasso followed by the ridge refit")
    p.add_argument("--lambda-l", type=float)
    p.add_argument("--lambda-r", type=float, help="default: smallest safe value")

    p = sub.add_parser("cv", parents=[common, data], help="cross-validate both estimators")
    p.add_argument("--folds", type=_positive_int, default=5)

    p = sub.add_parser("simulate", parents=[common], help="synthetic AR(1) benchmark")
    p.add_argument("--n", type=_positive_int, nargs="+", default=[100])
    p.add_argument("--p", type=_positive_int, nargs="+", default=[200])
    p.add_argument("--s", type=int, nargs="+", default=[5])
    p.add_argument("--rho", type=_rho, nargs="+", default=[0.0])
    p.add_argument("--sigma", type=_nonneg_float, nargs="+", default=[0.5])
    p.add_argument("--reps", type=_positive_int, default=20)
    p.add_argument("--folds", type=_positive_int, default=5)
    p.add_argument("--prediction", choices=(IN_SAMPLE, OUT_OF_SAMPLE), default=IN_SAMPLE)

    p = sub.add_parser("semi-synthetic", parents=[common], help="fixed design, synthetic response")
    p.add_argument("--design", help="CSV design matrix (rows = samples)")
    p.add_argument("--standin", action="store_true",
                   help="use a generated AR(1) stand-in design instead of a file")
    p.add_argument("--standin-shape", type=_positive_int, nargs=2, default=[38, 3051])
    p.add_argument("--header", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--case", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--rounds", type=_positive_int, default=100)
    p.add_argument("--train-fraction", type=_probability, default=0.7)
    p.add_argument("--noise-sd", type=_nonneg_float, default=1.0)
    p.add_argument("--folds", type=_positive_int, default=5)

    p = sub.add_parser("real-data", parents=[common, data], help="repeated train/test splits")
    p.add_argument("--rounds", type=_positive_int, default=100)
    p.add_argument("--train-fraction", type=_probability, default=0.7)
    p.add_argument("--folds", type=_positive_int, default=5)

    p = sub.add_parser("check-invariants", parents=[common], help="randomized invariant checks")
    p.add_argument("--count", type=_positive_int, default=500)
    return parser


def _read_config(path):
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (t.strip() for t in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _apply_config(parser, sub, ns, argv):
    try:
        cfg = _read_config(ns.config)
    except OSError as exc:
        raise UsageError(f"cannot read config {ns.config}: {exc}") from exc
    actions = {a.dest: a for a in sub._actions}
    argv_cfg = []
    for key, value in cfg.items():
        if key not in actions or key in ("config", "help"):
            raise UsageError(f"unknown option in config: {key}")
        act = actions[key]
        flag = act.option_strings[0]
        if act.nargs == 0 or isinstance(act, argparse.BooleanOptionalAction):
            truthy = value.lower() in ("1", "true", "yes", "on")
            if isinstance(act, argparse.BooleanOptionalAction):
                argv_cfg.append(flag if truthy else "--no-" + flag[2:])
            elif truthy:
                argv_cfg.append(flag)
        else:
            argv_cfg += [flag] + value.split()
    # command-line flags come last so they override the file
    return parser.parse_args([ns.command] + argv_cfg + argv[1:])


def parse_args(argv) -> RunConfig:
    """Parse and validate; raises ``SystemExit(2)`` on usage errors."""
    parser = build_parser()
    argv = list(argv)
    ns = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[ns.command]
    if ns.config:
        try:
            ns = _apply_config(parser, sub, ns, argv)
        except UsageError as exc:
            sub.error(str(exc))

    opts = {k: v for k, v in vars(ns).items()
            if k not in ("command", "config", "output", "format", "seed", "threads", "verbose")}
    if ns.command in ("fit", "refit", "cv", "real-data") and not ns.input:
        sub.error("--input is required")
    if ns.command in ("fit", "refit") and ns.lambda_l is None:
        sub.error("--lambda-l is required")
    if ns.command in ("fit", "refit") and not ns.lambda_l > 0:
        sub.error("--lambda-l must be positive")
    if ns.command == "refit" and ns.lambda_r is not None and not ns.lambda_r > 0:
        sub.error("--lambda-r must be positive")
    if ns.command == "semi-synthetic" and bool(ns.design) == bool(ns.standin):
        sub.error("give exactly one of --design and --standin")
    if ns.command == "simulate":
        for n in ns.n:
            if n < ns.folds:
                sub.error(f"--n {n} is smaller than --folds {ns.folds}")
        for s in ns.s:
            if s < 0 or any(s > p for p in ns.p):
                sub.error(f"--s {s} must lie in [0, p]")
    return RunConfig(command=ns.command, options=opts, output=ns.output, format=ns.format,
                     seed=ns.seed, threads=ns.threads, verbosity=ns.verbose)


# -- output ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "NA" if not math.isfinite(v) else repr(float(v))
    return str(v)


def report_rows(reports, label_columns=None):
    """Header and rows for a list of :class:`ImprovementReport`.

    Degenerate improvement percentages (zero or undefined denominator) are
    written as ``NA``.
    """
    if label_columns is None:
        label_columns = list(reports[0].label) if reports else list(SIM_LABELS)
    header = ["kind"] + label_columns + METRIC_COLUMNS
    rows = []
    for rep in reports:
        vals = dict(
            replications_ok=len(rep.records) - rep.failures,
            failures=rep.failures,
        )
        for col in METRIC_COLUMNS:
            if col not in vals:
                vals[col] = getattr(rep, col)
        if rep.pred_degenerate:
            vals["pred_improvement_pct"] = math.nan
        if rep.est_degenerate:
            vals["est_improvement_pct"] = math.nan
        rows.append([rep.kind] + [_fmt(rep.label.get(c, "")) for c in label_columns]
                    + [_fmt(vals[c]) for c in METRIC_COLUMNS])
    return header, rows


def _aligned(header, rows):
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    lines = ["  ".join(str(h).rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(str(x).rjust(w) for x, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def improvement_tables(reports, metric="pred_improvement_pct"):
    """Text tables with rows n and columns p, one block per (s, sigma, rho)."""
    groups = {}
    for rep in reports:
        lab = rep.label
        key = (lab.get("s"), lab.get("sigma"), lab.get("rho"))
        groups.setdefault(key, {})[(lab.get("n"), lab.get("p"))] = getattr(rep, metric)
    out = []
    for (s, sigma, rho), cells in groups.items():
        ns = sorted({k[0] for k in cells})
        ps = sorted({k[1] for k in cells})
        out.append(f"{metric}  s = {s}, sigma = {sigma}, rho = {rho}")
        header = ["n \\ p"] + [str(p) for p in ps]
        rows = [[str(n)] + [("NA" if not np.isfinite(cells.get((n, p), math.nan))
                             else f"{cells[(n, p)]:.0f}") for p in ps] for n in ns]
        out.append(_aligned(header, rows))
    return "\n".join(out)


def render_report(reports, fmt):
    header, rows = report_rows(reports)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    text = _aligned(header, rows)
    if reports and all({"n", "p", "s"} <= set(r.label) for r in reports):
        text += "\n" + improvement_tables(reports) + "\n" + improvement_tables(reports, "est_improvement_pct")
    return text


def _write(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def emit_report(reports, fmt, path):
    """Write reports as CSV or aligned text; the same input gives the same bytes."""
    _write(render_report(list(reports), fmt), path)


def _render_table(header, rows, fmt):
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows([[_fmt(x) for x in r] for r in rows])
        return buf.getvalue()
    return _aligned(header, [[_fmt(x) for x in r] for r in rows])


# -- commands ----------------------------------------------------------------

def _load_xy(cfg):
    o = cfg.options
    X, y, names = load_csv(o["input"], o["response"], o["header"])
    Xn, scale = normalize_with_scale(X)
    return Xn, scale, y, names


def _cmd_fit(cfg):
    Xn, scale, y, names = _load_xy(cfg)
    fit = fit_lasso(Xn, y, cfg.options["lambda_l"])
    E = set(fit.active_set.tolist())
    sign = dict(zip(fit.active_set.tolist(), fit.signs.tolist()))
    rows = [[j, names[j], fit.beta[j], fit.beta[j] * scale[j], j in E, int(sign.get(j, 0))]
            for j in range(Xn.p)]
    text = _render_table(["index", "name", "beta", "beta_raw", "in_E", "sign"], rows, cfg.format)
    _write(text, cfg.output)
    if not fit.converged:
        logging.warning("Lasso did not converge (KKT slack %.3g)", fit.kkt_slack)
    return EXIT_OK


def _cmd_refit(cfg):
    Xn, scale, y, names = _load_xy(cfg)
    fit = fit_lasso(Xn, y, cfg.options["lambda_l"])
    lam_r = cfg.options["lambda_r"]
    rf = refit_closed_form(Xn, fit, lam_r if lam_r is not None else default_lambda_r(Xn, fit.active_set))
    rows = [[j, names[j], fit.beta[j], rf.delta[j], rf.beta_r[j], rf.beta_r[j] * scale[j]]
            for j in range(Xn.p)]
    text = _render_table(["index", "name", "beta_lasso", "delta", "beta_refit", "beta_refit_raw"],
                         rows, cfg.format)
    _write(text, cfg.output)
    logging.info("lambda_r = %r, minimum safe = %r, safe = %s", rf.lambda_r, rf.min_safe_lambda_r, rf.safe)
    return EXIT_OK


def _cmd_cv(cfg):
    Xn, scale, y, _ = _load_xy(cfg)
    grid = make_grid(Xn, y)
    las, lr = cross_validate_pair(Xn, y, grid, cfg.options["folds"], Rng(cfg.seed))
    rows = [
        ["lasso", las.best_lambda_l, math.nan, float(las.cv_error_surface[las.best_index])],
        ["lasso_ridge", lr.best_lambda_l, lr.best_lambda_r, float(lr.cv_error_surface[lr.best_index])],
    ]
    _write(_render_table(["estimator", "lambda_l", "lambda_r", "cv_mse"], rows, cfg.format), cfg.output)
    return EXIT_OK


def _cmd_simulate(cfg):
    reports = [run_scenario(c, threads=cfg.threads) for c in cfg.scenario_configs()]
    emit_report(reports, cfg.format, cfg.output)
    return EXIT_OK


def _cmd_semi(cfg):
    o = cfg.options
    if o["standin"]:
        n, p = o["standin_shape"]
        design = standin_design(Rng(cfg.seed, 2**32 - 2), n, p)
        label = f"standin_ar1_{n}x{p}"
    else:
        design, label = o["design"], o["design"]
    spec = SemiSyntheticSpec(design=design, beta_case=o["case"], noise_sd=o["noise_sd"],
                             train_fraction=o["train_fraction"], rounds=o["rounds"], seed=cfg.seed,
                             folds=o["folds"], header=o["header"], label=label)
    emit_report([run_semi_synthetic(spec, threads=cfg.threads)], cfg.format, cfg.output)
    return EXIT_OK


def _cmd_real(cfg):
    o = cfg.options
    rep = run_real_data(o["input"], o["response"], o["train_fraction"], o["rounds"], cfg.seed,
                        o["header"], o["folds"], threads=cfg.threads)
    emit_report([rep], cfg.format, cfg.output)
    return EXIT_OK


def check_invariants(count=500, seed=DEFAULT_SEED, out=None) -> int:
    """Run the randomized invariant suite; returns 0 if every check passes, else 1.

    Violations are printed with the serialized instance (JSON) for replay.
    Sign flips at unsafe ridge penalties are informational only.
    """
    out = out or sys.stdout
    rep = run_invariant_suite(count, seed)
    for inst, msgs in rep.violations:
        out.write("FAIL " + "; ".join(msgs) + "\n")
        out.write(json.dumps(inst) + "\n")
    flips = sum(1 for _, m in rep.info if m.startswith("unsafe"))
    mism = sum(1 for _, m in rep.info if m.startswith("numeric support"))
    out.write(f"checked {rep.checked} instances: {len(rep.violations)} violations; "
              f"informational: {flips} sign flips at unsafe lambda_r, "
              f"{mism} support/E disagreements\n")
    return EXIT_OK if rep.ok else EXIT_FAIL


def _cmd_check(cfg):
    buf = io.StringIO()
    code = check_invariants(cfg.options["count"], cfg.seed, buf)
    _write(buf.getvalue(), cfg.output)
    return code


HANDLERS = {
    "fit": _cmd_fit,
    "refit": _cmd_refit,
    "cv": _cmd_cv,
    "simulate": _cmd_simulate,
    "semi-synthetic": _cmd_semi,
    "real-data": _cmd_real,
    "check-invariants": _cmd_check,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(cfg.verbosity, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if cfg.output:
        parent = os.path.dirname(os.path.abspath(cfg.output))
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            sys.stderr.write(f"lassoridge: cannot write to {cfg.output}\n")
            return EXIT_IO
    try:
        return HANDLERS[cfg.command](cfg)
    except OSError as exc:
        sys.stderr.write(f"lassoridge: {exc}\n")
        return EXIT_IO
    except ValueError as exc:
        if cfg.command in ("fit", "refit", "cv", "real-data", "semi-synthetic"):
            sys.stderr.write(f"lassoridge: bad input: {exc}\n")
            return EXIT_IO
        raise


if __name__ == "__main__":
    sys.exit(main())
