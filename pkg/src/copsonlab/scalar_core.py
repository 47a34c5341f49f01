"""Scalar functions behind the weight certificates, grid checks of their
sign conditions, and the critical exponent c0(p)."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SpecError

FUNCTIONS = (
    "F_LEMMA", "F_LEMMA_D1", "F_LEMMA_D2", "G_AUX",
    "LHS32", "RHS32", "F_ALPHA", "HADAMARD_LHS", "HADAMARD_RHS",
)
CONDITIONS = ("LEMMA21", "COND26", "COND32", "FALPHA_NONNEG", "HADAMARD")

DEFAULT_TOL = 1e-12
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DegenerateExponentWarning(RuntimeWarning):
    pass


def _one_minus_pow(x, e):
    """(1 - x)**e with the x = 1 limit: 0 for e > 0, 1 for e = 0, inf for e < 0."""
    base = 1.0 - x
    if base == 0.0:
        if e > 0:
            return 0.0
        return 1.0 if e == 0 else math.inf
    return base**e


def _scaled(coef, value):
    # 0 * inf is taken as 0: the term is absent, not undefined
    return 0.0 if coef == 0.0 else coef * value


def _need(params, *names):
    for name in names:
        if getattr(params, name, None) is None:
            raise SpecError(f"parameter {name} is required")


def scalar_eval(fn: str, params, x: float) -> float:
    """Closed-form value of scalar function ``fn`` at x in [0, 1]."""
    if fn not in FUNCTIONS:
        raise SpecError(f"unknown scalar function {fn!r}")
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise SpecError(f"x = {x} outside [0, 1]")
    p = params.p
    if fn in ("F_LEMMA", "F_LEMMA_D1", "F_LEMMA_D2", "G_AUX"):
        _need(params, "c")
        c = params.c
        t = (1.0 - c) / p
        if fn == "F_LEMMA":
            return (1.0 + t * x) ** (1.0 - p) - _one_minus_pow(x, 1.0 - c) - t * x
        if fn == "F_LEMMA_D1":
            if x == 1.0 and c > 0:
                raise SpecError("(1 - x)**(-c) is undefined at x = 1 for c > 0")
            return ((1.0 - c) * (1.0 - p) / p * (1.0 + t * x) ** (-p)
                    + _scaled(1.0 - c, _one_minus_pow(x, -c)) - (1.0 - c) / p)
        if fn == "F_LEMMA_D2":
            tail = _scaled((1.0 - c) * c, _one_minus_pow(x, -c - 1.0))
            return (1.0 - c) ** 2 * (p - 1.0) / p * (1.0 + t * x) ** (-p - 1.0) + tail
        k = -p * c / ((p - 1.0) * (1.0 - c))
        if not k > 0:
            raise SpecError("G_AUX needs -p c / ((p - 1)(1 - c)) > 0")
        return k ** (-1.0 / (p + 1.0)) * _one_minus_pow(x, (1.0 + c) / (p + 1.0)) - 1.0 - t * x
    if fn in ("LHS32", "HADAMARD_LHS", "HADAMARD_RHS"):
        if p == 1.0:
            raise SpecError("p = 1 is excluded")
        if fn == "LHS32":
            return p / (p - 1.0) * ((1.0 - x / p) ** (1.0 - p) - 1.0)
        if x == 0.0:
            raise SpecError("Hadamard bound is evaluated on (0, 1] only")
        if fn == "HADAMARD_LHS":
            return (p / x) / (p - 1.0) * ((1.0 - x / p) ** (1.0 - p) - 1.0)
        return (1.0 - x / (2.0 * p)) ** (-p)
    _need(params, "alpha")
    a = params.alpha
    if fn == "RHS32":
        if x == 0.0:
            return 0.0
        return x * ((1.0 - _one_minus_pow(x, a)) / (a * x)) ** p
    # F_ALPHA
    return a * x - (1.0 - x / (2.0 * p)) * (1.0 - _one_minus_pow(x, a))


def cond_26(p: float, c: float) -> float:
    """(1 + t)**(1 - p) - t with t = (1 - c)/p; nonnegative exactly when c >= c0(p) (p > 1)."""
    t = (1.0 - c) / p
    return (1.0 + t) ** (1.0 - p) - t


@dataclass
class ScalarCheck:
    condition: str
    params: object
    grid_size: int
    min_value: float
    argmin: float
    verdict: str
    orientation: str
    witness: Optional[dict] = None

    def to_dict(self):
        pr = self.params
        return {
            "condition": self.condition,
            "p": pr.p,
            "c": pr.c,
            "alpha": pr.alpha,
            "reverse": bool(pr.reverse),
            "grid": self.grid_size,
            "min_value": self.min_value,
            "argmin": self.argmin,
            "verdict": self.verdict,
            "witness": self.witness,
        }


def _condition_fn(cond, params):
    """Oriented margin function (>= 0 means the condition holds) and its domain start."""
    if cond == "LEMMA21":
        _need(params, "c")
        sign = -1.0 if params.reverse else 1.0
        return (lambda x: sign * scalar_eval("F_LEMMA", params, x)), 0.0
    if cond == "COND32":
        _need(params, "alpha")
        return (lambda x: scalar_eval("LHS32", params, x) - scalar_eval("RHS32", params, x)), 0.0
    if cond == "FALPHA_NONNEG":
        _need(params, "alpha")
        return (lambda x: scalar_eval("F_ALPHA", params, x)), 0.0
    if cond == "HADAMARD":
        return (lambda x: scalar_eval("HADAMARD_LHS", params, x)
                - scalar_eval("HADAMARD_RHS", params, x)), None
    raise SpecError(f"unknown condition {cond!r}")


def _golden_min(f, a, b, max_iter=200):
    """Golden-section search for a local minimum of f on [a, b]."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= 1e-15 * max(1.0, abs(a)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def check_condition(cond: str, params, grid_size: int = 4096, tolerance: float = DEFAULT_TOL) -> ScalarCheck:
    """Minimum of the oriented margin of ``cond`` over [0, 1] (grid then golden refinement)."""
    if cond not in CONDITIONS:
        raise SpecError(f"unknown condition {cond!r}")
    if grid_size < 64:
        raise SpecError("grid_size must be at least 64")
    if not tolerance > 0:
        raise SpecError("tolerance must be positive")
    orientation = "<=" if (cond == "LEMMA21" and params.reverse) else ">="
    if cond == "COND26":
        _need(params, "c")
        sign = -1.0 if params.reverse else 1.0
        v = sign * cond_26(params.p, params.c)
        xs = np.array([1.0])
        vals = np.array([v])
    else:
        f, start = _condition_fn(cond, params)
        xs = np.linspace(0.0, 1.0, grid_size)
        if start is None:
            xs = xs[1:]
        vals = np.array([f(x) for x in xs])
    if np.any(np.isnan(vals)):
        raise SpecError(f"{cond} is undefined somewhere on the grid for these parameters")
    i = int(np.argmin(vals))  # first occurrence, i.e. smallest x among ties
    best_x, best_v = float(xs[i]), float(vals[i])
    if cond != "COND26":
        lo = xs[max(i - 1, 0)]
        hi = xs[min(i + 1, len(xs) - 1)]
        if hi > lo:
            rx, rv = _golden_min(f, float(lo), float(hi))
            if rv < best_v:
                best_x, best_v = float(rx), float(rv)
    verdict = "FAIL" if best_v < -tolerance else "PASS"
    witness = {"x": best_x, "value": best_v} if verdict == "FAIL" else None
    return ScalarCheck(cond, params, len(xs), best_v, best_x, verdict, orientation, witness)


def solve_c0(p: float, tol: float = DEFAULT_TOL) -> float:
    """Unique c0 with (1 + (1 - c0)/p)**(1 - p) = (1 - c0)/p, by bisection in t = (1 - c0)/p."""
    if not p > 0:
        raise SpecError("p must be positive")
    if not tol > 0:
        raise SpecError("tol must be positive")
    if p == 1.0:
        warnings.warn("p = 1: the c0 equation degenerates to t = 1; returning c0 = 0",
                      DegenerateExponentWarning, stacklevel=2)
        return 0.0

    def h(t):
        return (1.0 + t) ** (1.0 - p) - t

    lo, hi = 0.0, 1.0
    while h(hi) > 0:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
    t = lo if abs(h(lo)) <= abs(h(hi)) else hi
    if abs(h(t)) >= tol:
        raise SpecError(f"c0 bisection stalled with residual {h(t):.3e} (p={p})")
    return 1.0 - p * t
