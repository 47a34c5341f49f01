"""Both sides of each inequality family at truncation N, with an error budget.

The test sequence is taken to vanish beyond N. The inequality is then an
exact statement about that truncated sequence, and every remaining
uncertainty goes into ``error_budget``: outer sums running past N, the
interval for the weight tail beyond N, and floating-point rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import kernels
from .errors import SpecError
from .params import Params
from .sequences import SequenceSpec, Weights, materialize, parse_spec, weights_from_spec

FAMILIES = ("C1", "C2", "L1", "L2", "BG", "BGA", "I34")
TAIL_FAMILIES = ("L1", "L2", "BGA", "I34")
ALPHA_FAMILIES = ("BG", "BGA", "I34")

STANDARD_LAMBDAS = ("const:1", "geom:1/2", "pow:-2")
STANDARD_XS = ("unit:1", "unit:3", "pow:-2", "geom:1/3")

_EPS = np.finfo(float).eps


def powv(t, e):
    """t**e computed as exp(e log t), with t = 0 mapped to 0."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(e * np.log(t))
    return np.where(t > 0, out, 0.0)


def pow_drop(top, step, e):
    """top**e - (top - step)**e for 0 < step <= top, accurate when step << top."""
    top = np.asarray(top, dtype=np.float64)
    r = np.minimum(np.asarray(step, dtype=np.float64) / top, 1.0)
    with np.errstate(divide="ignore"):
        return powv(top, e) * -np.expm1(e * np.log1p(-r))


def star_tail_weight(e: float, T: float) -> float:
    """Upper bound for sum_{n>N} lam_n (Lambda*_n)**e given Lambda*_{N+1} <= T."""
    if T == 0.0:
        return 0.0
    if e >= 0:
        return T ** (1.0 + e)
    if e > -1.0:
        return T ** (1.0 + e) / (1.0 + e)
    return math.inf


def _prefix_tail_weight(lam: Weights, e: float) -> float:
    """Upper bound for sum_{n>N} lam_n (Lambda_n)**e."""
    L = float(lam.prefix[-1])
    bounds = []
    if e < -1.0:
        bounds.append(L ** (1.0 + e) / (-(1.0 + e)))
    if lam.summable:
        T = lam.tail_beyond[1]
        bounds.append((L + T) ** e * T if e >= 0 else L**e * T)
    return min(bounds) if bounds else math.inf


def family_constant(family: str, params: Params) -> float:
    p, c, a = params.p, params.c, params.alpha
    if family in ("C1", "L2"):
        return (p / (c - 1.0)) ** p
    if family in ("C2", "L1"):
        return (p / (1.0 - c)) ** p
    if family in ("BG", "BGA"):
        return (a * p + 1.0) ** p
    return (a * p) ** p


def validate(family: str, params: Params, lam: Weights, x=None):
    if family not in FAMILIES:
        raise SpecError(f"unknown family {family!r}")
    if family in ("C1", "C2", "L1", "L2"):
        if params.c is None:
            raise SpecError(f"{family} needs c")
        if params.c == 1.0:
            raise SpecError("c = 1 is excluded")
        if family in ("C1", "L2") and params.c < 1.0:
            raise SpecError(f"{family} has constant (p/(c-1))**p and needs c > 1")
        if family in ("C2", "L1") and params.c > 1.0:
            raise SpecError(f"{family} has constant (p/(1-c))**p and needs c < 1")
    if family in ALPHA_FAMILIES:
        if params.alpha is None:
            raise SpecError(f"{family} needs alpha")
        if family == "I34" and not params.alpha > 0:
            raise SpecError("I34 needs alpha > 0")
    if family in TAIL_FAMILIES and not lam.summable:
        raise SpecError(f"{family} uses tail sums and needs summable weights")
    if x is not None:
        if x.shape != lam.values.shape:
            raise SpecError(f"length mismatch: {x.shape[0]} test values vs {lam.N} weights")
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            raise SpecError("test sequence must be finite and nonnegative")


class Sides(NamedTuple):
    lhs: float
    rhs_sum: float
    lhs_tail: float  # upper bound of the outer lhs sum past N
    rhs_tail: float  # upper bound of the outer rhs_sum past N


def _total(a):
    return kernels.total_sum(a)


def sides(family: str, params: Params, lam: Weights, x: np.ndarray, direction: str = "tail") -> Sides:
    """Truncated lhs and rhs_sum plus bounds on the parts beyond N."""
    p, c, a = params.p, params.c, params.alpha
    v = lam.values
    if family in ("C1", "C2"):
        L = lam.prefix
        lx = v * x
        inner = kernels.prefix_sum(lx) if family == "C1" else kernels.suffix_sum(lx)
        lhs = _total(v * powv(L, -c) * powv(inner, p))
        rhs = _total(v * powv(L, p - c) * powv(x, p))
        lhs_tail = 0.0
        if family == "C1" and inner[-1] > 0:
            lhs_tail = float(inner[-1]) ** p * _prefix_tail_weight(lam, -c)
        return Sides(lhs, rhs, lhs_tail, 0.0)
    if family in ("L1", "L2"):
        S = lam.tail
        lx = v * x
        inner = kernels.prefix_sum(lx) if family == "L1" else kernels.suffix_sum(lx)
        lhs = _total(v * powv(S, -c) * powv(inner, p))
        rhs = _total(v * powv(S, p - c) * powv(x, p))
        lhs_tail = 0.0
        if family == "L1" and inner[-1] > 0:
            lhs_tail = float(inner[-1]) ** p * star_tail_weight(-c, lam.tail_beyond[1])
        return Sides(lhs, rhs, lhs_tail, 0.0)
    if family == "BG":
        L = lam.prefix
        inner = kernels.suffix_sum(powv(L, a) * x)
        lhs = _total(v * powv(inner, p))
        rhs = _total(v * powv(L, a * p) * powv(kernels.suffix_sum(x), p))
        return Sides(lhs, rhs, 0.0, 0.0)
    if family == "BGA":
        S = lam.tail
        inner = kernels.prefix_sum(powv(S, a) * x)
        Y = kernels.prefix_sum(x)
        lhs = _total(v * powv(inner, p))
        rhs = _total(v * powv(S, a * p) * powv(Y, p))
        T = lam.tail_beyond[1]
        lhs_tail = float(inner[-1]) ** p * T if inner[-1] > 0 else 0.0
        rhs_tail = float(Y[-1]) ** p * star_tail_weight(a * p, T) if Y[-1] > 0 else 0.0
        return Sides(lhs, rhs, lhs_tail, rhs_tail)
    # I34; x plays the role of y
    if direction == "tail":
        S = lam.tail
        D = pow_drop(S, v, a)
        inner = kernels.prefix_sum(D * x)
        lhs = _total(v * powv(inner, p))
        rhs = _total(v * powv(S, a * p) * powv(x, p))
        lhs_tail = float(inner[-1]) ** p * lam.tail_beyond[1] if inner[-1] > 0 else 0.0
        return Sides(lhs, rhs, lhs_tail, 0.0)
    if direction == "forward":
        L = lam.prefix
        D = pow_drop(L, v, a)
        inner = kernels.suffix_sum(D * x)
        lhs = _total(v * powv(inner, p))
        rhs = _total(v * powv(L, a * p) * powv(x, p))
        return Sides(lhs, rhs, 0.0, 0.0)
    raise SpecError(f"unknown I34 direction {direction!r}")


@dataclass
class TruncationReport:
    family: str
    params: Params
    N: int
    lhs: float
    rhs_sum: float
    constant: float
    error_budget: float
    direction: Optional[str] = None

    @property
    def rhs(self) -> float:
        return self.constant * self.rhs_sum

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else math.inf

    @property
    def margin(self) -> float:
        m = self.rhs - self.lhs
        return -m if self.params.reverse else m

    @property
    def verdict(self) -> str:
        if self.margin > self.error_budget:
            return "HOLDS"
        if self.margin < -self.error_budget:
            return "FAILS"
        return "INCONCLUSIVE"

    def to_dict(self) -> dict:
        d = {
            "family": self.family,
            "p": self.params.p,
            "c": self.params.c,
            "alpha": self.params.alpha,
            "reverse": bool(self.params.reverse),
            "N": self.N,
            "lhs": self.lhs,
            "rhs_sum": self.rhs_sum,
            "constant": self.constant,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "margin": self.margin,
            "error_budget": self.error_budget,
            "verdict": self.verdict,
        }
        if self.direction is not None:
            d["direction"] = self.direction
        return d


def eval_inequality(family: str, params: Params, lam: Weights, x, N: Optional[int] = None,
                    direction: str = "tail") -> TruncationReport:
    """Evaluate ``family`` at truncation N for weights ``lam`` and test sequence ``x``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if N is not None and (N != lam.N or N != x.shape[0]):
        raise SpecError(f"length mismatch: N={N}, weights {lam.N}, test sequence {x.shape[0]}")
    validate(family, params, lam, x)
    const = family_constant(family, params)
    s = sides(family, params, lam, x, direction)
    budget = const * s.rhs_tail + s.lhs_tail
    if family in TAIL_FAMILIES and lam.tail_halfwidth > 0:
        base = const * s.rhs_sum - s.lhs
        dev = 0.0
        for t in lam.tail_beyond:
            alt = sides(family, params, lam.with_tail(t), x, direction)
            dev = max(dev, abs(const * alt.rhs_sum - alt.lhs - base))
        budget += 2.0 * dev
    budget += 32.0 * _EPS * max(1.0, params.p) * (abs(s.lhs) + abs(const * s.rhs_sum))
    return TruncationReport(family, params, lam.N, s.lhs, s.rhs_sum, const, float(budget),
                            direction if family == "I34" else None)


# --- change of variables and decompositions ---------------------------------

def c2_substitute(params: Params, lam: Weights, x) -> np.ndarray:
    """z_n = lam_n**(1/p) Lambda_n**((p-c)/p) x_n, so that sum z**p is the C2 rhs_sum."""
    p, c = params.p, params.c
    return powv(lam.values, 1.0 / p) * powv(lam.prefix, (p - c) / p) * np.asarray(x, float)


def c2_kernel_factors(params: Params, lam: Weights):
    """Row and column factors f, g of the recast C2 kernel M(n, k) = f_n g_k, k >= n."""
    p, c = params.p, params.c
    f = powv(lam.values, 1.0 / p) * powv(lam.prefix, -c / p)
    g = powv(lam.values, 1.0 - 1.0 / p) * powv(lam.prefix, -(1.0 - c / p))
    return f, g


def eval_c2_recast(params: Params, lam: Weights, z) -> tuple:
    """(lhs, rhs_sum) of the recast C2 form sum_n (f_n sum_{k>=n} g_k z_k)**p <= K sum z**p."""
    f, g = c2_kernel_factors(params, lam)
    z = np.asarray(z, dtype=np.float64)
    inner = kernels.suffix_sum(g * z)
    return _total(powv(f * inner, params.p)), _total(powv(z, params.p))


def minkowski_split(params: Params, lam: Weights, x) -> dict:
    """Pieces of the triangle-inequality split of the BGA left side.

    With y = prefix sums of x, the BGA inner sum equals
    sum_{k<n} (S_k**a - S_{k+1}**a) y_k + S_n**a y_n, so
    lhs**(1/p) <= shifted**(1/p) + diagonal**(1/p) must hold.
    """
    p, a = params.p, params.alpha
    x = np.asarray(x, dtype=np.float64)
    validate("BGA", params, lam, x)
    S = lam.tail
    v = lam.values
    y = kernels.prefix_sum(x)
    D = pow_drop(S, v, a)
    shifted_inner = np.concatenate(([0.0], kernels.prefix_sum(D * y)[:-1]))
    s = sides("BGA", params, lam, x)
    shifted = _total(v * powv(shifted_inner, p))
    diagonal = _total(v * powv(powv(S, a) * y, p))
    return {
        "lhs": s.lhs,
        "shifted": shifted,
        "diagonal": diagonal,
        "gap": shifted ** (1.0 / p) + diagonal ** (1.0 / p) - s.lhs ** (1.0 / p),
    }


# --- standard battery -----------------------------------------------------

def battery_length(spec: SequenceSpec, N: int) -> int:
    """Cap N for geometric weights so every term stays a normal float."""
    if spec.kind == "GEOM":
        r, v = spec.args
        cap = 1 + int(math.floor((150.0 * math.log(10.0) + math.log(v)) / -math.log(r)))
        return max(1, min(N, cap))
    return N


def run_battery(family: str, params: Params, N: int, lambdas=STANDARD_LAMBDAS, xs=STANDARD_XS,
                direction: str = "tail"):
    """Evaluate ``family`` on every (lambda, x) pair; tail families skip non-summable lambdas.

    Returns a list of (lambda_text, x_text, report).
    """
    out = []
    for lt in lambdas:
        lspec = parse_spec(lt) if isinstance(lt, str) else lt
        if family in TAIL_FAMILIES and not lspec.is_summable():
            continue
        n = battery_length(lspec, N)
        lam = weights_from_spec(lspec, n)
        for xt in xs:
            xspec = parse_spec(xt) if isinstance(xt, str) else xt
            if xspec.kind == "UNIT" and xspec.args[0] > n:
                continue
            x = materialize(xspec, n)
            out.append((str(lt), str(xt), eval_inequality(family, params, lam, x, direction=direction)))
    return out
