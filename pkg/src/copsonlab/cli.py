"""Command-line interface: one JSON document (or CSV table) per invocation."""
from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .aux_weights import (SCHEMES, bg_master_input, c2_master_input, verify_certificate,
                          verify_master)
from .errors import ConvergenceError, DataError, SpecError
from .evaluator import FAMILIES, STANDARD_XS, eval_inequality, run_battery
from .params import Params
from .scalar_core import CONDITIONS, DegenerateExponentWarning, check_condition, cond_26, solve_c0
from .sequences import materialize, parse_spec, spec_to_text, weights_from_spec
from .sharpness import (NORM_FAMILIES, SCAN_FAMILIES, SEARCH_FAMILIES, counterexample_search,
                        norm_estimate, ratio_scan, region_map)

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2
EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 64, 65, 70

_EXIT_BY_VERDICT = {
    "HOLDS": EXIT_OK, "PASS": EXIT_OK, "SUFFICIENT": EXIT_OK, "CERT_PASS": EXIT_OK,
    "NO_COUNTEREXAMPLE": EXIT_OK,
    "FAILS": EXIT_FAIL, "FAIL": EXIT_FAIL, "CERT_FAIL": EXIT_FAIL, "COUNTEREXAMPLE": EXIT_FAIL,
    "INCONCLUSIVE": EXIT_INCONCLUSIVE, "UNCONFIRMED": EXIT_INCONCLUSIVE,
}

SCALAR_TOL = 1e-12
SERIES_TOL = 1e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _real(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def _real_list(text: str):
    return [_real(t) for t in text.split(",") if t.strip()]


def _range(text: str):
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(f"range must be LO:HI or LO:HI:STEP, got {text!r}")
    return tuple(_real(t) for t in parts)


def _upper(text: str) -> str:
    return text.upper().replace("-", "_")


# --- parser ---------------------------------------------------------------

def _common(sp, *names):
    add = {
        "p": lambda: sp.add_argument("--p", type=_real, required=True, help="exponent p"),
        "c": lambda: sp.add_argument("--c", type=_real, default=None, help="weight exponent c"),
        "alpha": lambda: sp.add_argument("--alpha", type=_real, default=None, help="exponent alpha"),
        "reverse": lambda: sp.add_argument("--reverse", action="store_true",
                                           help="check the reversed inequality"),
        "lambda": lambda: sp.add_argument("--lambda", dest="lam", default="const:1",
                                          help="weight sequence SPEC"),
        "N": lambda: sp.add_argument("--N", type=int, default=100000, help="truncation length"),
        "jobs": lambda: sp.add_argument("--jobs", type=int, default=1, help="worker processes"),
        "direction": lambda: sp.add_argument("--direction", choices=("tail", "forward"),
                                             default="tail", help="I34 orientation"),
        "family": lambda: sp.add_argument("--family", type=_upper, choices=FAMILIES, required=True,
                                          help="inequality family"),
    }
    for n in names:
        add[n]()
    sp.add_argument("--format", choices=("json", "csv"), default="json", help="output format")
    sp.add_argument("--out", default=None, help="write output here instead of stdout")
    sp.add_argument("--timestamps", action="store_true", help="add a UTC timestamp to JSON output")
    sp.add_argument("--config", default=None,
                    help="file of key=value lines mirroring flags; the command line wins")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="copsonlab", formatter_class=fmt,
                     description="Numerical checks of Copson, Leindler and Bennett-Grosse-Erdmann "
                                 "type series inequalities.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("verify", formatter_class=fmt,
                        help="evaluate an inequality at truncation N")
    _common(sp, "family", "p", "c", "alpha", "reverse", "lambda", "N", "direction")
    sp.add_argument("--x", default=None,
                    help="test sequence SPEC; omitted means the standard battery")

    sp = sub.add_parser("c0", formatter_class=fmt, help="critical exponent c0(p)")
    _common(sp, "p")
    sp.add_argument("--tol", type=_real, default=SCALAR_TOL, help="bisection tolerance")

    sp = sub.add_parser("lemma", formatter_class=fmt, help="grid check of a scalar condition")
    _common(sp, "p", "c", "alpha", "reverse")
    sp.add_argument("--cond", type=_upper, choices=CONDITIONS, required=True, help="condition id")
    sp.add_argument("--grid", type=int, default=4096, help="grid points on [0, 1]")
    sp.add_argument("--tol", type=_real, default=SCALAR_TOL, help="failure tolerance")

    sp = sub.add_parser("weights", formatter_class=fmt,
                        help="build auxiliary weights and verify their certificate")
    _common(sp, "p", "c", "alpha", "reverse", "lambda", "N")
    sp.add_argument("--scheme", type=_upper, choices=SCHEMES, required=True, help="weight scheme")
    sp.add_argument("--tol", type=_real, default=SERIES_TOL, help="relative residual tolerance")
    sp.add_argument("--residuals", action="store_true", help="emit every residual")
    sp.add_argument("--exclude-fraction", type=_real, default=None,
                    help="trailing fraction of indices left out of the verdict "
                         "(tail-sum schemes default to 0.1)")

    sp = sub.add_parser("master", formatter_class=fmt,
                        help="check a master inequality on scheme-derived inputs")
    _common(sp, "p", "c", "alpha", "lambda", "N")
    sp.add_argument("--form", type=_upper, choices=("M22", "M27"), required=True,
                    help="M22: tail form with COPSON_TAIL weights; M27: forward form with BG weights")
    sp.add_argument("--x", default="pow:-1", help="test sequence SPEC")
    sp.add_argument("--tol", type=_real, default=1e-10, help="relative tolerance")

    sp = sub.add_parser("ratio-scan", formatter_class=fmt,
                        help="lhs/rhs_sum along extremal sequences")
    sp.add_argument("--family", type=_upper, choices=SCAN_FAMILIES, required=True,
                    help="inequality family")
    _common(sp, "p", "c", "alpha", "N", "jobs")
    sp.add_argument("--eps", type=_real_list, required=True, help="decreasing comma-separated eps")
    sp.add_argument("--lambda", dest="lam", default=None,
                    help="weight SPEC (const:V for C1/C2, pow:-A for BGA); default const:1 / pow:-2")
    sp.add_argument("--x", default=None, help="replace the extremal sequence by this SPEC")

    sp = sub.add_parser("norm", formatter_class=fmt, help="lp norm of a recast kernel")
    sp.add_argument("--family", type=_upper, choices=NORM_FAMILIES, required=True,
                    help="kernel family")
    _common(sp, "p", "c", "alpha", "lambda", "N")
    sp.add_argument("--tol", type=_real, default=SCALAR_TOL, help="relative change to stop at")
    sp.add_argument("--max-iter", type=int, default=10000, help="iteration cap")

    sp = sub.add_parser("region", formatter_class=fmt, help="classify a (p, c) or (p, alpha) grid")
    _common(sp, "N", "jobs")
    sp.add_argument("--mode", choices=("pc", "pa"), required=True, help="second axis: c or alpha")
    sp.add_argument("--p-range", type=_range, required=True, help="LO:HI[:STEP]")
    sp.add_argument("--second-range", type=_range, required=True, help="LO:HI[:STEP]")
    sp.add_argument("--resolution", type=int, default=None,
                    help="points per axis for ranges given without STEP")
    sp.add_argument("--family", type=_upper, default=None,
                    help="C2 or L1 (pc, default C2); BG, BGA or I34 (pa, default BG)")
    sp.add_argument("--overlay-out", default=None,
                    help="overlay JSON path (default: OUT.overlays.json when --out is given)")

    sp = sub.add_parser("search", formatter_class=fmt, help="seeded counterexample search")
    sp.add_argument("--family", type=_upper, choices=SEARCH_FAMILIES, required=True,
                    help="inequality family")
    _common(sp, "p", "c", "alpha", "reverse", "jobs", "direction")
    sp.add_argument("--lambda", dest="lam", default=None,
                    help="weight SPEC (default const:1, or pow:-2 for tail families)")
    sp.add_argument("--N", type=int, default=1000, help="support window [1, N]")
    sp.add_argument("--budget", type=int, default=10000, help="objective evaluations")
    sp.add_argument("--seed", type=int, default=0, help="RNG seed")
    return parser


# --- config files ---------------------------------------------------------

_FLAG_KEYS = {"reverse", "residuals", "timestamps"}


def read_config(path: str):
    """Flat key=value lines (# comments) turned into argv tokens."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc.strerror}") from exc
    argv = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("_", "-")
        if key in _FLAG_KEYS:
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no", "off"):
                raise DataError(f"{path}:{lineno}: {key} takes true or false")
        else:
            argv += [f"--{key}", value]
    return argv


_VALUE_FLAGS = ("--p", "--c", "--alpha", "--eps", "--p-range", "--second-range", "--tol")


def _glue_negatives(argv):
    """Join ``--flag -0.3:...`` into ``--flag=-0.3:...`` so argparse does not see an option."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok in _VALUE_FLAGS and nxt is not None and nxt[:1] == "-" and (nxt[1:2].isdigit() or nxt[1:2] == "."):
            out.append(f"{tok}={nxt}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def _with_config(argv):
    """Insert config-file tokens right after the command so explicit flags override them."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None or not argv:
        return argv
    return argv[:1] + read_config(path) + argv[1:]


# --- output ---------------------------------------------------------------

def _clean(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps(doc) -> str:
    # repr floats are the shortest strings that round-trip binary64 exactly
    return json.dumps(_clean(doc), separators=(",", ":"), allow_nan=False)


def _emit(args, text: str):
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise DataError(f"cannot write {args.out}: {exc.strerror}") from exc
    else:
        sys.stdout.write(text)


def _emit_json(args, doc):
    if args.timestamps:
        doc = dict(doc)
        doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    _emit(args, dumps(doc))


def _csv(header, rows):
    return "\n".join([",".join(header)] + [",".join("" if v is None else repr(v) if isinstance(v, float)
                                                    else str(v) for v in r) for r in rows]) + "\n"


def _params(args) -> Params:
    return Params(args.p, c=args.c, alpha=args.alpha, reverse=getattr(args, "reverse", False))


def _spec(text, args=None):
    if args is None:
        return parse_spec(text)
    return parse_spec(text, p=args.p, c=args.c, alpha=args.alpha)


def _require_csv_ok(args, allowed):
    if args.format == "csv" and args.command not in allowed:
        raise UsageError(f"{args.command}: csv output is not available, use --format json")


# --- commands ---------------------------------------------------------------

def cmd_verify(args):
    params = _params(args)
    lam_spec = _spec(args.lam)
    if args.x is not None:
        lam = weights_from_spec(lam_spec, args.N)
        x = materialize(_spec(args.x, args), args.N)
        rep = eval_inequality(args.family, params, lam, x, direction=args.direction)
        doc = rep.to_dict()
        doc["lambda"] = spec_to_text(lam_spec)
        doc["x"] = args.x
        if args.format == "csv":
            keys = list(doc)
            _emit(args, _csv(keys, [[doc[k] for k in keys]]))
            return rep.verdict
        _emit_json(args, doc)
        return rep.verdict
    rows = run_battery(args.family, params, args.N, [args.lam], STANDARD_XS, args.direction)
    if not rows:
        raise SpecError("no battery entry applies to these weights")
    verdicts = [r.verdict for _, _, r in rows]
    verdict = "FAILS" if "FAILS" in verdicts else "INCONCLUSIVE" if "INCONCLUSIVE" in verdicts else "HOLDS"
    if args.format == "csv":
        header = ["lambda", "x", "N", "lhs", "rhs", "margin", "error_budget", "verdict"]
        _emit(args, _csv(header, [[lt, xt, r.N, r.lhs, r.rhs, r.margin, r.error_budget, r.verdict]
                                  for lt, xt, r in rows]))
        return verdict
    doc = {"family": args.family, "p": params.p, "c": params.c, "alpha": params.alpha,
           "reverse": params.reverse, "lambda": args.lam,
           "results": [dict(r.to_dict(), **{"lambda": lt, "x": xt}) for lt, xt, r in rows],
           "verdict": verdict}
    _emit_json(args, doc)
    return verdict


def cmd_c0(args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateExponentWarning)
        c0 = solve_c0(args.p, args.tol)
    doc = {"p": args.p, "c0": c0, "t": (1.0 - c0) / args.p, "residual": cond_26(args.p, c0),
           "tol": args.tol, "degenerate": bool(caught)}
    for w in caught:
        print(f"copsonlab: warning: {w.message}", file=sys.stderr)
    _emit_json(args, doc)
    return "PASS"


def cmd_lemma(args):
    res = check_condition(args.cond, _params(args), args.grid, args.tol)
    _emit_json(args, res.to_dict())
    return res.verdict


def cmd_weights(args):
    params = _params(args)
    lam = weights_from_spec(_spec(args.lam), args.N)
    cert = verify_certificate(args.scheme, params, lam, tolerance=args.tol,
                              exclude_fraction=args.exclude_fraction)
    doc = cert.to_dict(residuals=args.residuals)
    doc["lambda"] = args.lam
    _emit_json(args, doc)
    return cert.verdict


def cmd_master(args):
    params = _params(args)
    lam = weights_from_spec(_spec(args.lam), args.N)
    x = materialize(_spec(args.x, args), args.N)
    if args.form == "M22":
        if params.c is None:
            raise SpecError("M22 uses the COPSON_TAIL weights and needs --c")
        inp = c2_master_input(params, lam, x)
    else:
        if params.alpha is None:
            raise SpecError("M27 uses the BG weights and needs --alpha")
        inp = bg_master_input(params, lam, x)
    rep = verify_master(args.form, inp, args.tol)
    doc = rep.to_dict()
    doc.update({"p": params.p, "c": params.c, "alpha": params.alpha, "lambda": args.lam,
                "x": args.x, "N": lam.N})
    _emit_json(args, doc)
    return rep.verdict


def cmd_ratio_scan(args):
    params = Params(args.p, c=args.c, alpha=args.alpha)
    lam_spec = _spec(args.lam) if args.lam else None
    x_override = _spec(args.x, args) if args.x else None
    scan = ratio_scan(args.family, params, args.eps, args.N, lam_spec, x_override, args.jobs)
    if args.format == "csv":
        header = ["eps", "N", "ratio", "truncated_ratio", "tail_budget", "normalized", "status"]
        _emit(args, _csv(header, [[e.to_dict()[k] for k in header] for e in scan.entries]))
    else:
        _emit_json(args, scan.to_dict())
    return scan.verdict


def cmd_norm(args):
    params = Params(args.p, c=args.c, alpha=args.alpha)
    lam = weights_from_spec(_spec(args.lam), args.N)
    est = norm_estimate(args.family, params, lam, tol=args.tol, max_iter=args.max_iter)
    doc = est.to_dict()
    doc["lambda"] = args.lam
    _emit_json(args, doc)
    return doc["verdict"]


def cmd_region(args):
    rmap = region_map(args.mode, args.p_range, args.second_range, args.resolution,
                      N=args.N, family=args.family, jobs=args.jobs)
    overlay_path = args.overlay_out or (f"{args.out}.overlays.json" if args.out else None)
    if args.format == "csv":
        _emit(args, rmap.to_csv())
    else:
        _emit_json(args, rmap.to_dict())
    if overlay_path:
        try:
            Path(overlay_path).write_text(dumps(rmap.overlays) + "\n")
        except OSError as exc:
            raise DataError(f"cannot write {overlay_path}: {exc.strerror}") from exc
    return rmap.verdict


def cmd_search(args):
    params = _params(args)
    lam_spec = _spec(args.lam) if args.lam else None
    res = counterexample_search(args.family, params, lam_spec, args.N, args.budget, args.seed,
                                args.jobs, args.direction)
    _emit_json(args, res.to_dict())
    return res.verdict


def load_schema(name: str) -> dict:
    """JSON schema shipped for a command's output (``overlays`` for the region sidecar)."""
    path = Path(__file__).with_name("schemas") / f"{name}.schema.json"
    return json.loads(path.read_text())


COMMANDS = {
    "verify": cmd_verify, "c0": cmd_c0, "lemma": cmd_lemma, "weights": cmd_weights,
    "master": cmd_master, "ratio-scan": cmd_ratio_scan, "norm": cmd_norm, "region": cmd_region,
    "search": cmd_search,
}


def run(argv=None) -> int:
    """Parse ``argv``, run the command and return the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_glue_negatives(_with_config(argv)))
        _require_csv_ok(args, ("verify", "ratio-scan", "region"))
        for name in ("N", "jobs", "budget", "grid", "max_iter", "resolution"):
            val = getattr(args, name, None)
            if val is not None and val < 1:
                raise UsageError(f"--{name.replace('_', '-')} must be at least 1")
        verdict = COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"copsonlab: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SpecError as exc:
        print(f"copsonlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"copsonlab: no convergence: {exc} (estimate {exc.estimate!r}, gap {exc.gap!r})",
              file=sys.stderr)
        return EXIT_INTERNAL
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"copsonlab: numeric failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return _EXIT_BY_VERDICT.get(verdict, EXIT_OK)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
