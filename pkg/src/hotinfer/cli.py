"""Command-line front end.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage, config or
input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
from threadpoolctl import threadpool_limits

from .data import load_csv, standardize
from .exceptions import (
    ConfigError,
    DegenerateColumn,
    DimensionMismatch,
    HotInferError,
    InvalidAlpha,
    NonFiniteInput,
)
from .inference import InferenceConfig, infer_all, normal_quantile
from .parallel import ENV_THREADS, resolve_n_jobs
from .screening import screen as run_screen
from .selftest import run_selftest
from .simulation import ApproxSparse, SimConfig, SparseUniform, run_replications

log = logging.getLogger("hotinfer")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
SCHEMA_HINT = "see docs/config_schema.json"

PRESETS = {
    "sparse-p500": dict(n=100, p=500, rho=0.9, sigma=1.0, pattern=SparseUniform(15, 0.0, 2.0)),
    "decay-p1000": dict(n=200, p=1000, rho=0.5, sigma=1.0, pattern=ApproxSparse()),
    "sparse-p300": dict(n=200, p=300, rho=0.8, sigma=1.0, pattern=SparseUniform(20, 0.0, 2.0)),
}

INPUT_ERRORS = (DimensionMismatch, NonFiniteInput, DegenerateColumn, InvalidAlpha, ConfigError)


class UsageError(Exception):
    """Bad flags or unreadable inputs; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _schema() -> dict:
    return json.loads(resources.files("hotinfer").joinpath("config_schema.json").read_text())


def _threads(args) -> int:
    try:
        return resolve_n_jobs(args.threads)
    except ValueError as err:
        raise UsageError(str(err)) from None


# ---------------------------------------------------------------- simulate

def _load_config(args) -> SimConfig:
    base = {}
    if args.preset:
        base.update(PRESETS[args.preset])
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot parse config {path}: {err}") from None
        try:
            jsonschema.validate(doc, _schema())
        except jsonschema.ValidationError as err:
            where = "/".join(str(p) for p in err.absolute_path) or "(root)"
            raise UsageError(f"{path}: invalid config at {where}: {err.message} ({SCHEMA_HINT})") from None
        base.update(doc)
    for key in ("n", "p", "rho", "sigma", "reps", "seed", "alpha", "d_max", "lambda_c"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    if args.lambda0 is not None:
        base["lambda0"] = _number_or_name(args.lambda0)
    if args.methods:
        base["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.screening:
        base["screening"] = args.screening.upper()
    if args.screening_mode:
        base["screening_mode"] = args.screening_mode
    if args.sigma_mode:
        base["sigma_mode"] = _sigma_mode(args.sigma_mode)
    if args.pattern or args.s is not None:
        kind = args.pattern or (base.get("pattern") and _pattern_kind(base["pattern"])) or "sparse-uniform"
        if kind == "approx-sparse":
            if args.s is not None:
                raise UsageError("--s applies to the sparse-uniform pattern only")
            base["pattern"] = {"type": "approx-sparse"}
        else:
            pat = {"type": "sparse-uniform"}
            if args.s is not None:
                pat["s"] = args.s
            base["pattern"] = pat
    try:
        return SimConfig.from_dict(base)
    except HotInferError as err:
        raise UsageError(f"invalid configuration: {err} ({SCHEMA_HINT})") from None


def _pattern_kind(pat) -> str:
    if isinstance(pat, (SparseUniform, ApproxSparse)):
        return pat.kind
    if isinstance(pat, str):
        return pat
    return pat.get("type", "sparse-uniform")


def _number_or_name(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def _sigma_mode(text: str):
    text = text.strip()
    if text in ("scaled_lasso", "scaled-lasso"):
        return "scaled_lasso"
    if text.startswith("fixed:"):
        text = text[len("fixed:"):]
    try:
        return {"fixed": float(text)}
    except ValueError:
        raise UsageError(f"--sigma-mode must be 'scaled-lasso' or 'fixed:VALUE', got {text!r}") from None


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    n_jobs = _threads(args)
    report = run_replications(cfg, n_jobs=n_jobs, keep_records=bool(args.records_csv),
                              parallel=args.parallel)
    _emit(report.to_json() + "\n", args.out)
    if args.records_csv:
        write_atomic(args.records_csv, report.records_csv())
    for label, summary in report.methods.items():
        log.info("%s: cp_all=%.4f cp_max=%.4f length=%.4f", label, summary.cp_all,
                 summary.cp_max, summary.mean_length)
    return EXIT_OK


# ---------------------------------------------------------------- infer / screen

def _read_data(args):
    try:
        X, y, names = load_csv(args.x_csv, args.y_csv, header=args.header, response=args.response)
    except FileNotFoundError as err:
        raise UsageError(f"cannot read {err.filename}: file not found") from None
    except (OSError, ValueError) as err:
        raise UsageError(f"cannot load data: {err}") from None
    try:
        return standardize(X, y, scale_response=args.scale_response, feature_names=names,
                           center_response=True)
    except INPUT_ERRORS as err:
        raise UsageError(f"invalid data: {err}") from None


def _screen_spec(text: str, data):
    low = text.lower()
    if low in ("sis", "holp"):
        return low.upper()
    if low.startswith("user:"):
        items = [s.strip() for s in text[5:].split(",") if s.strip()]
        out = []
        for item in items:
            if item.lstrip("-").isdigit():
                out.append(int(item))
            elif data.feature_names is not None and item in data.feature_names:
                out.append(data.feature_names.index(item))
            else:
                raise UsageError(f"unknown screened column {item!r}")
        return out
    raise UsageError(f"--screen must be sis, holp or user:i,j,..., got {text!r}")


def _sigma_flag(text: Optional[str]):
    if text is None or text in ("scaled-lasso", "scaled_lasso"):
        return None
    mode = _sigma_mode(text)
    return mode["fixed"]


def cmd_infer(args) -> int:
    data = _read_data(args)
    method = {"hot": "HOT", "ldpe": "LDPE", "hot-a": "HOT-A"}[args.method]
    cfg = InferenceConfig(
        method=method, screening=_screen_spec(args.screen, data), alpha=args.alpha,
        sigma=_sigma_flag(args.sigma), route=args.route, split=args.split, d_max=args.d_max,
        lambda0=None if args.lambda0 is None else _number_or_name(args.lambda0),
        n_jobs=_threads(args),
    )
    try:
        cfg.validate()
    except (ValueError, InvalidAlpha) as err:
        raise UsageError(str(err)) from None
    try:
        report = infer_all(data, cfg)
    except INPUT_ERRORS as err:
        raise UsageError(str(err)) from None
    _emit(report.to_json() + "\n", args.out)
    if args.csv:
        write_atomic(args.csv, report.to_csv())
    log.info("%d of %d coefficients significant at alpha=%g", len(report.significant), data.p,
             args.alpha)
    return EXIT_OK


def cmd_screen(args) -> int:
    data = _read_data(args)
    s = run_screen(data, args.method, args.d_max, ridge_eps=args.ridge_eps)
    doc = {
        "method": s.method,
        "d": s.d,
        "indices": list(s.indices),
        "ranking": list(s.ranking),
        "bic": None if s.bic is None else [None if b != b else b for b in s.bic],
        "warnings": list(s.warnings),
    }
    if data.feature_names is not None:
        doc["names"] = [data.feature_names[i] for i in s.indices]
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------- selftest

def _corrupted_quantile(prob: float) -> float:
    return normal_quantile(prob) * 1.01


def cmd_selftest(args) -> int:
    quantile = _corrupted_quantile if args.corrupt_quantile else normal_quantile
    with threadpool_limits(limits=1):
        results = run_selftest(quantile)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    ok = all(r.passed for r in results)
    print("selftest passed" if ok else "selftest FAILED")
    return EXIT_OK if ok else EXIT_RUNTIME


# ---------------------------------------------------------------- parser

def _add_data_args(p):
    p.add_argument("x_csv", help="design matrix CSV (rows are observations)")
    p.add_argument("y_csv", nargs="?", help="single-column response CSV")
    p.add_argument("--response", help="response column (name or index) inside x_csv")
    p.add_argument("--header", action="store_true", help="first row holds column names")
    p.add_argument("--scale-response", action="store_true",
                   help="also scale the response to norm sqrt(n)")
    p.add_argument("--d-max", type=int, help="largest screened set tried by BIC")
    p.add_argument("--out", help="output JSON path (default: stdout)")


def _alpha(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hotinfer", description="Confidence intervals for high-dimensional "
                     "linear regression via hybrid orthogonalization.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int,
                        help=f"worker count (default: ${ENV_THREADS} or all cores)")

    sp = sub.add_parser("simulate", parents=[common], help="run a simulation campaign")
    sp.add_argument("--config", help=f"SimConfig JSON ({SCHEMA_HINT})")
    sp.add_argument("--preset", choices=sorted(PRESETS))
    sp.add_argument("--reps", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=int)
    sp.add_argument("--rho", type=float)
    sp.add_argument("--sigma", type=float, help="true noise level")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--pattern", choices=("sparse-uniform", "approx-sparse"))
    sp.add_argument("--s", type=int, help="number of nonzero coefficients (sparse-uniform)")
    sp.add_argument("--methods", help="comma-separated labels, e.g. HOT-SIS,HOT-HOLP(I),LDPE")
    sp.add_argument("--screening", choices=("sis", "holp", "SIS", "HOLP"))
    sp.add_argument("--screening-mode", choices=("reuse", "split"))
    sp.add_argument("--sigma-mode", help="scaled-lasso or fixed:VALUE")
    sp.add_argument("--lambda0", help="scaled-lasso penalty: number, quantile or universal")
    sp.add_argument("--lambda-c", type=float, help="fixed direction penalty multiplier (default GIC)")
    sp.add_argument("--d-max", type=int)
    sp.add_argument("--parallel", choices=("reps", "coordinates"), default="reps")
    sp.add_argument("--out", help="report JSON path (default: stdout)")
    sp.add_argument("--records-csv", help="per-coefficient records CSV path")
    sp.set_defaults(func=cmd_simulate)

    ip = sub.add_parser("infer", parents=[common], help="intervals and p-values for CSV data")
    _add_data_args(ip)
    ip.add_argument("--method", choices=("hot", "ldpe", "hot-a"), default="hot")
    ip.add_argument("--screen", default="sis", help="sis, holp or user:i,j,... (0-based or names)")
    ip.add_argument("--alpha", type=_alpha, default=0.05)
    ip.add_argument("--sigma", help="scaled-lasso (default) or fixed:VALUE")
    ip.add_argument("--split", action="store_true", help="screen on the first half of the rows")
    ip.add_argument("--route", choices=("two-step", "partial"), default="two-step")
    ip.add_argument("--lambda0", help="scaled-lasso penalty: number, quantile or universal")
    ip.add_argument("--csv", help="also write a per-coefficient CSV here")
    ip.set_defaults(func=cmd_infer)

    sc = sub.add_parser("screen", parents=[common], help="screen columns and choose the size by BIC")
    _add_data_args(sc)
    sc.add_argument("--method", choices=("sis", "holp"), default="sis")
    sc.add_argument("--ridge-eps", type=float, default=0.0)
    sc.set_defaults(func=cmd_screen)

    st = sub.add_parser("selftest", help="run the built-in smoke checks")
    st.add_argument("--corrupt-quantile", action="store_true", help=argparse.SUPPRESS)
    st.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"hotinfer: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:
        # --help
        return EXIT_OK if not err.code else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"hotinfer: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except HotInferError as err:
        print(f"hotinfer: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError) as err:
        print(f"hotinfer: error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
