"""Sharpness probes: ratio scans along extremal sequences, lp norms of the
recast kernels, validity-region maps and a counterexample search."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate, special

from . import kernels
from .aux_weights import verify_certificate
from .errors import ConvergenceError, SpecError
from .evaluator import (STANDARD_LAMBDAS, STANDARD_XS, TAIL_FAMILIES, battery_length,
                        c2_kernel_factors, eval_inequality, family_constant, pow_drop, powv,
                        run_battery, sides, validate)
from .params import Params
from .scalar_core import DegenerateExponentWarning, solve_c0
from .sequences import (SequenceSpec, Weights, cumulate, materialize, parse_spec, spec_to_text,
                        weights_from_spec)

_EPS = np.finfo(float).eps
SCAN_FAMILIES = ("C1", "C2", "BGA")
NORM_FAMILIES = ("C1", "C2_DUAL", "BGA_DUAL")
SCAN_TAIL_LIMIT = 0.01


def _map(fn, items, jobs: int):
    """Ordered map, in-process for jobs <= 1."""
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))


# --- continuation of power-law sums past N ---------------------------------

def _log_exprel(x: float) -> float:
    """log((e**x - 1)/x) without overflow."""
    if x > 50.0:
        return x - math.log(x) + math.log1p(-math.exp(-x))
    if x < -50.0:
        return math.log(-math.expm1(x)) - math.log(-x)
    return math.log(special.exprel(x))


def _log_power_integral(e: float, la: float, lb: float) -> float:
    """log of int_a^b u**e du given la = log a < lb = log b (e = -1 included)."""
    L = lb - la
    if L <= 0:
        return -math.inf
    return (e + 1.0) * la + math.log(L) + _log_exprel((e + 1.0) * L)


def _log_hurwitz(q: float, lt: float) -> float:
    """log zeta(q, t) = log sum_{k>=0} (k + t)**(-q), for q > 1, t = exp(lt) >= 1."""
    if lt < math.log(1e4):
        return math.log(special.zeta(q, math.exp(lt)))
    inv = math.exp(-lt)
    # Euler-Maclaurin: t**(1-q)/(q-1) * (1 + (q-1)/(2t) + q(q-1)/(12t**2) + ...)
    return (1.0 - q) * lt - math.log(q - 1.0) + math.log1p((q - 1.0) * inv / 2.0
                                                          + q * (q - 1.0) * inv * inv / 12.0)


def _log_shift_half(lt: float) -> float:
    """log(t + 1/2) from log t."""
    return lt + math.log1p(0.5 * math.exp(-lt))


def _logadd(a: float, b: float) -> float:
    return float(np.logaddexp(a, b))


def _tail_integral(log_g, lt0: float, rate: float):
    """int_{t0}^inf g(t) dt where log_g(log t) = log g(t) and g(t) ~ t**(-1-rate).

    The substitution v = (t/t0)**(-rate) maps the range onto (0, 1] with a
    bounded integrand. Returns (value, abserr).
    """
    base = log_g(lt0) + lt0

    def integrand(v):
        if v <= 0.0:
            v = 1e-300
        lt = lt0 - math.log(v) / rate
        return math.exp(log_g(lt) + lt - base) / (rate * v)

    val, err = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-11, limit=400)
    scale = math.exp(base)
    return val * scale, err * scale


def _midpoint_error(log_g, lt0: float) -> float:
    """|g'(t0)| / 24, the leading error of sum_{n>N} g(n) ~ int_{N+1/2} g."""
    h = 1e-4
    d = (log_g(lt0 + h) - log_g(lt0 - h)) / (2.0 * h)  # d log g / d log t
    return math.exp(log_g(lt0)) * abs(d) / (24.0 * math.exp(lt0))


@dataclass
class _Tail:
    value: float
    error: float


def _copson_tails(family, params, v, beta, eps, N, partial_inner):
    """Sums past N of both sides of C1/C2 for lam = v, x_n = n**beta."""
    p, c = params.p, params.c
    lt0 = math.log(N + 0.5)
    lv = math.log(v)
    if family == "C1":
        la = math.log(N + 0.5)
        lP_N = lv + math.log(partial_inner / v)

        def log_inner(lt):
            return _logadd(lP_N, lv + _log_power_integral(beta, la, _log_shift_half(lt)))

        # midpoint error of the continued inner prefix sum, relative to P_N
        rel_inner = abs(beta) * (N + 0.5) ** (beta - 1.0) / 24.0 / (partial_inner / v)
    else:
        q = -beta

        def log_inner(lt):
            return lv + _log_hurwitz(q, lt)

        rel_inner = 0.0

    def log_g(lt):
        return lv - c * (lv + lt) + p * log_inner(lt)

    lhs, qerr = _tail_integral(log_g, lt0, eps)
    lhs_err = qerr + _midpoint_error(log_g, lt0) + p * rel_inner * lhs
    # rhs terms are v**(1+p-c) n**(-1-eps) exactly
    rhs = v ** (1.0 + p - c) * float(special.zeta(1.0 + eps, N + 1.0))
    return _Tail(lhs, lhs_err), _Tail(rhs, 16.0 * _EPS * rhs)


def _bga_tails(params, a, b, eps, N, I_N, Y_N):
    """Sums past N of both sides of BGA for lam_n = n**(-a), x_n = n**b."""
    p, al = params.p, params.alpha
    lt0 = math.log(N + 0.5)
    # S(s)**alpha s**b = (a-1)**(-alpha) s**g (1 + r1/s + r2/s**2 + ...)
    g = b + al * (1.0 - a)
    r1 = al * (a - 1.0) / 2.0
    r2 = al * a * (a - 1.0) / 12.0 + al * (al - 1.0) / 2.0 * ((a - 1.0) / 2.0) ** 2
    lk = -al * math.log(a - 1.0)
    lI_N = math.log(I_N)
    lY_N = math.log(Y_N)

    def log_inner(lt):
        lb = _log_shift_half(lt)
        main = _log_power_integral(g, lt0, lb)
        corr = _log_power_integral(g - 1.0, lt0, lb)
        if r1 >= 0:
            s = _logadd(main, math.log(r1) + corr) if r1 > 0 else main
        else:
            s = main + math.log1p(-math.exp(math.log(-r1) + corr - main))
        return _logadd(lI_N, lk + s)

    def log_y(lt):
        return _logadd(lY_N, _log_power_integral(b, lt0, _log_shift_half(lt)))

    def log_lhs_g(lt):
        return -a * lt + p * log_inner(lt)

    def log_rhs_g(lt):
        return -a * lt + al * p * _log_hurwitz(a, lt) + p * log_y(lt)

    lhs, lq = _tail_integral(log_lhs_g, lt0, eps)
    rhs, rq = _tail_integral(log_rhs_g, lt0, eps)
    # dropped second-order term of the inner continuation plus its midpoint error
    t0 = N + 0.5
    f0 = (a - 1.0) ** (-al) * t0**g
    rel_inner = (abs(r2) * f0 * t0 ** -1.0 + abs(g) * f0 / t0 / 24.0) / I_N
    rel_y = abs(b) * t0 ** (b - 1.0) / 24.0 / Y_N
    lhs_err = lq + _midpoint_error(log_lhs_g, lt0) + p * rel_inner * lhs
    rhs_err = rq + _midpoint_error(log_rhs_g, lt0) + p * rel_y * rhs
    return _Tail(lhs, lhs_err), _Tail(rhs, rhs_err)


# --- ratio scans ------------------------------------------------------------

@dataclass
class ScanEntry:
    eps: float
    N: int
    ratio: float  # tail-corrected lhs / rhs_sum
    truncated_ratio: float
    tail_budget: float  # uncertainty of ``ratio``
    normalized: float  # ratio / target
    status: str  # OK or INCONCLUSIVE

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "N": self.N,
            "ratio": self.ratio,
            "truncated_ratio": self.truncated_ratio,
            "tail_budget": self.tail_budget,
            "normalized": self.normalized,
            "status": self.status,
        }


@dataclass
class RatioScan:
    family: str
    params: Params
    lam: str
    target: float
    entries: List[ScanEntry]

    @property
    def monotone(self) -> bool:
        r = [e.ratio for e in self.entries]
        return all(b > a for a, b in zip(r, r[1:]))

    @property
    def below_target(self) -> bool:
        return all(e.ratio < self.target + e.tail_budget for e in self.entries)

    @property
    def verdict(self) -> str:
        if any(e.ratio - e.tail_budget > self.target for e in self.entries):
            return "FAILS"
        if any(e.status != "OK" for e in self.entries) or not self.monotone:
            return "INCONCLUSIVE"
        return "HOLDS"

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "p": self.params.p,
            "c": self.params.c,
            "alpha": self.params.alpha,
            "lambda": self.lam,
            "target": self.target,
            "entries": [e.to_dict() for e in self.entries],
            "monotone": self.monotone,
            "below_target": self.below_target,
            "verdict": self.verdict,
        }


def _default_scan_lambda(family) -> SequenceSpec:
    return SequenceSpec.pow(-2.0) if family == "BGA" else SequenceSpec.const(1.0)


def _scan_point(task) -> ScanEntry:
    family, params, lam_spec, eps, N, x_override, target = task
    p = params.p
    if family == "BGA":
        a = -lam_spec.args[0]
        lam = cumulate(materialize(lam_spec, N), (special.zeta(a, N + 1.0),) * 2)
        xspec = SequenceSpec.extremal_bga(a, params.alpha, p, eps)
    else:
        lam = weights_from_spec(lam_spec, N)
        xspec = SequenceSpec.extremal_copson(p, params.c, eps)
    if x_override is not None:
        xspec = x_override
    x = materialize(xspec, N)
    validate(family, params, lam, x)
    if x_override is not None:
        rep = eval_inequality(family, params, lam, x)
        budget = rep.error_budget / rep.constant
        ratio = rep.lhs / rep.rhs_sum
        status = "OK" if budget <= SCAN_TAIL_LIMIT * ratio else "INCONCLUSIVE"
        return ScanEntry(eps, N, ratio, ratio, budget, ratio / target, status)
    s = sides(family, params, lam, x)
    if family == "BGA":
        a = -lam_spec.args[0]
        b = xspec.power_exponent()
        I_N = float(kernels.total_sum(powv(lam.tail, params.alpha) * x))
        Y_N = float(kernels.total_sum(x))
        lt, rt = _bga_tails(params, a, b, eps, N, I_N, Y_N)
    else:
        v = lam_spec.args[0]
        beta = xspec.power_exponent()
        inner_N = float(kernels.total_sum(lam.values * x))
        lt, rt = _copson_tails(family, params, v, beta, eps, N, inner_N)
        if family == "C2":
            # the suffix sums at n <= N also miss lam x beyond N, exactly v zeta(-beta, N+1)
            R = v * float(special.zeta(-beta, N + 1.0))
            inner = kernels.suffix_sum(lam.values * x) + R
            head = kernels.total_sum(lam.values * powv(lam.prefix, -params.c) * powv(inner, p))
            s = s._replace(lhs=head)
    rounding = 32.0 * _EPS * max(1.0, p)
    lhs = s.lhs + lt.value
    rhs = s.rhs_sum + rt.value
    ratio = lhs / rhs
    rel = (lt.error / lhs + rounding) + (rt.error / rhs + rounding)
    budget = ratio * rel
    status = "OK" if budget <= SCAN_TAIL_LIMIT * ratio else "INCONCLUSIVE"
    trunc = sides(family, params, lam, x)
    return ScanEntry(eps, N, ratio, trunc.lhs / trunc.rhs_sum, float(budget), ratio / target, status)


def ratio_scan(family: str, params: Params, eps_list: Sequence[float], N: int,
               lam_spec: Optional[SequenceSpec] = None, x_override: Optional[SequenceSpec] = None,
               jobs: int = 1) -> RatioScan:
    """lhs / rhs_sum along the extremal sequences, one entry per eps.

    The extremal sequence is summed exactly to N and continued past N by
    its integral (midpoint rule), so ``ratio`` estimates the infinite-sum
    ratio and ``tail_budget`` is the estimated error of that continuation.
    ``truncated_ratio`` is the plain ratio at N. With ``x_override`` the
    entry is a single truncated evaluation and the budget is the evaluator's.
    """
    if family not in SCAN_FAMILIES:
        raise SpecError(f"ratio scans support {SCAN_FAMILIES}, not {family!r}")
    eps = [float(e) for e in eps_list]
    if not eps:
        raise SpecError("eps list is empty")
    if any(e <= 0 for e in eps):
        raise SpecError("eps values must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise SpecError("eps values must be strictly decreasing")
    if N < 1:
        raise SpecError("N must be at least 1")
    lam_spec = _default_scan_lambda(family) if lam_spec is None else lam_spec
    if family == "BGA":
        if params.alpha is None:
            raise SpecError("BGA needs alpha")
        if not (lam_spec.kind == "POW" and lam_spec.args[0] < -1.0):
            raise SpecError("BGA scans use weights pow:-A with A > 1")
    else:
        if params.c is None:
            raise SpecError(f"{family} needs c")
        if lam_spec.kind != "CONST":
            raise SpecError(f"{family} scans use constant weights")
    target = family_constant(family, params)
    tasks = [(family, params, lam_spec, e, int(N), x_override, target) for e in eps]
    entries = _map(_scan_point, tasks, jobs)
    return RatioScan(family, params, spec_to_text(lam_spec), target, entries)


# --- lp norms of the recast kernels ------------------------------------------

@dataclass
class NormEstimate:
    family: str
    params: Params
    N: int
    value: float
    bound: float
    iterations: int
    converged: bool
    gap: float

    @property
    def within_bound(self) -> bool:
        return self.value <= self.bound * (1.0 + 1e-9)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "p": self.params.p,
            "c": self.params.c,
            "alpha": self.params.alpha,
            "N": self.N,
            "estimate": self.value,
            "bound": self.bound,
            "iterations": self.iterations,
            "converged": self.converged,
            "gap": self.gap,
            "within_bound": self.within_bound,
            "verdict": "HOLDS" if self.within_bound else "FAILS",
        }


def kernel_factors(family: str, params: Params, lam: Weights):
    """(f, g, lower, bound): M(n, k) = f_n g_k on k <= n (lower) or k >= n.

    C2_DUAL is the recast tail form with constant p/(1-c); C1 is the same
    recast of the prefix form, constant p/(c-1); BGA_DUAL is the recast of
    the alpha-weighted tail form, constant alpha p/(p-1).
    """
    p, c, a = params.p, params.c, params.alpha
    if family in ("C1", "C2_DUAL"):
        if c is None:
            raise SpecError(f"{family} needs c")
        f, g = c2_kernel_factors(params, lam)
        if family == "C1":
            if not c > 1.0:
                raise SpecError("C1 needs c > 1")
            # x_k = z_k lam_k**(-1/p) Lambda_k**(-(p-c)/p) turns C1 into sum (f_n sum_{k<=n} g_k z_k)**p
            g = powv(lam.values, 1.0 - 1.0 / p) * powv(lam.prefix, c / p - 1.0)
            return f, g, True, p / (c - 1.0)
        if not c < 1.0:
            raise SpecError("C2_DUAL needs c < 1")
        return f, g, False, p / (1.0 - c)
    if family == "BGA_DUAL":
        if a is None or not a > 0:
            raise SpecError("BGA_DUAL needs alpha > 0")
        if not lam.summable:
            raise SpecError("BGA_DUAL needs summable weights")
        S = lam.tail
        D = pow_drop(S, lam.values, a)
        g = powv(lam.values, 1.0 - 1.0 / p)
        return D / (g * powv(S, a)), g, False, a * p / (p - 1.0)
    raise SpecError(f"norm estimates support {NORM_FAMILIES}, not {family!r}")


def _apply(f, g, lower, x):
    return f * (kernels.prefix_sum(g * x) if lower else kernels.suffix_sum(g * x))


def _apply_t(f, g, lower, y):
    return g * (kernels.suffix_sum(f * y) if lower else kernels.prefix_sum(f * y))


def lp_norm_power(f, g, lower: bool, p: float, tol: float = 1e-12, max_iter: int = 10000):
    """Nonlinear power iteration for the lp -> lp norm of M(n, k) = f_n g_k (triangular).

    Returns (estimate, iterations, converged, gap), where gap is the change
    of the estimate over the last step.
    """
    N = f.shape[0]
    x = np.full(N, N ** (-1.0 / p))
    est = 0.0
    gap = math.inf
    for it in range(1, max_iter + 1):
        y = _apply(f, g, lower, x)
        new = float(np.linalg.norm(y, p))
        gap = abs(new - est)
        est = new
        if gap <= tol * max(est, 1e-300):
            return est, it, True, gap
        z = _apply_t(f, g, lower, powv(y, p - 1.0))
        x = powv(z, 1.0 / (p - 1.0))
        nx = float(np.linalg.norm(x, p))
        if not nx > 0:
            break
        x /= nx
    return est, max_iter, False, gap


def norm_estimate(family: str, params: Params, lam: Weights, N: Optional[int] = None,
                  tol: float = 1e-12, max_iter: int = 10000, strict: bool = True) -> NormEstimate:
    """lp operator norm of the N x N recast kernel of ``family``.

    Raises ConvergenceError when the estimate still moves by more than tol
    after max_iter steps, unless ``strict`` is False.
    """
    p = params.p
    if not p > 1.0:
        raise SpecError("norm estimates need p > 1")
    if N is not None and N != lam.N:
        raise SpecError(f"N={N} does not match {lam.N} weights")
    if lam.N < 1:
        raise SpecError("N must be at least 1")
    f, g, lower, bound = kernel_factors(family, params, lam)
    est, its, ok, gap = lp_norm_power(f, g, lower, p, tol, max_iter)
    if not ok and strict:
        raise ConvergenceError(f"power iteration did not settle in {max_iter} steps", est, gap)
    return NormEstimate(family, params, lam.N, est, bound, its, ok, gap)


def dense_kernel(family: str, params: Params, lam: Weights) -> np.ndarray:
    """The kernel as a dense matrix, for small N."""
    f, g, lower, _ = kernel_factors(family, params, lam)
    M = np.outer(f, g)
    return np.tril(M) if lower else np.triu(M)


# --- region maps ----------------------------------------------------------

REGION_CLASSES = ("SUFFICIENT", "HOLDS-ON-BATTERY", "CERT_FAIL-NO-COUNTEREXAMPLE", "FAILS",
                  "INCONCLUSIVE")
REGION_HEADER = "mode,p,second,cert_verdict,battery_verdict,min_margin"


def axis_values(rng, resolution: Optional[int] = None) -> List[float]:
    """Grid points from (lo, hi, step) or from (lo, hi) with ``resolution`` points."""
    rng = tuple(float(r) for r in rng)
    if len(rng) == 3:
        lo, hi, step = rng
        if not step > 0 or hi < lo:
            raise SpecError(f"empty range {lo}:{hi}:{step}")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        # round away the drift of lo + k*step so 2:3:0.1 prints as 2.1, not 2.1000000000000001
        return [round(lo + k * step, 12) for k in range(count)]
    if len(rng) != 2:
        raise SpecError("a range is (lo, hi) or (lo, hi, step)")
    lo, hi = rng
    if hi < lo:
        raise SpecError(f"empty range {lo}:{hi}")
    if resolution is None or resolution < 2:
        raise SpecError("resolution must be at least 2")
    return [float(v) for v in np.linspace(lo, hi, resolution)]


@dataclass
class RegionCell:
    mode: str
    p: float
    second: float
    cert_verdict: str  # CERT_PASS, CERT_FAIL or NA
    battery_verdict: str  # HOLDS, FAILS or INCONCLUSIVE
    min_margin: float  # smallest margin / rhs over the battery
    cls: str
    witness: Optional[dict] = None

    def csv_row(self) -> str:
        return ",".join([self.mode.upper(), repr(self.p), repr(self.second), self.cert_verdict,
                         self.battery_verdict, repr(self.min_margin)])

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.upper(),
            "p": self.p,
            "second": self.second,
            "cert_verdict": self.cert_verdict,
            "battery_verdict": self.battery_verdict,
            "min_margin": self.min_margin,
            "class": self.cls,
            "witness": self.witness,
        }


@dataclass
class RegionMap:
    mode: str
    family: str
    N: int
    cells: List[RegionCell]
    overlays: dict

    def to_csv(self) -> str:
        return "\n".join([REGION_HEADER] + [c.csv_row() for c in self.cells]) + "\n"

    @property
    def verdict(self) -> str:
        classes = {c.cls for c in self.cells}
        if "FAILS" in classes:
            return "FAILS"
        if "INCONCLUSIVE" in classes:
            return "INCONCLUSIVE"
        return "SUFFICIENT" if classes <= {"SUFFICIENT"} else "HOLDS"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.upper(),
            "family": self.family,
            "N": self.N,
            "cells": [c.to_dict() for c in self.cells],
            "overlays": self.overlays,
            "verdict": self.verdict,
        }


REGION_SCHEMES = {"C2": "COPSON_TAIL", "L1": "LEINDLER", "BG": "BG", "BGA": "BGA"}


def _cell_params(mode, p, second):
    if mode == "pc":
        return Params(p, c=second, reverse=p < 1.0)
    return Params(p, alpha=second)


def _battery_summary(family, params, N, lambdas, xs):
    rows = run_battery(family, params, N, lambdas, xs)
    margins = [r.margin / max(r.rhs, r.lhs, np.finfo(float).tiny) for _, _, r in rows]
    verdicts = [r.verdict for _, _, r in rows]
    if "FAILS" in verdicts:
        v = "FAILS"
    elif "INCONCLUSIVE" in verdicts:
        v = "INCONCLUSIVE"
    else:
        v = "HOLDS"
    failing = [(lt, xt) for (lt, xt, r) in rows if r.verdict == "FAILS"]
    return v, (min(margins) if margins else math.nan), failing


def _region_cell(task) -> RegionCell:
    mode, family, p, second, N, lambdas, xs = task
    params = _cell_params(mode, p, second)
    scheme = REGION_SCHEMES.get(family)
    cert = "NA"
    if scheme is not None:
        verdicts = []
        for lt in lambdas:
            spec = parse_spec(lt)
            if scheme in ("LEINDLER", "BGA") and not spec.is_summable():
                continue
            lam = weights_from_spec(spec, battery_length(spec, N))
            try:
                verdicts.append(verify_certificate(scheme, params, lam).verdict)
            except SpecError:
                verdicts = []
                break
        if verdicts:
            cert = "CERT_PASS" if all(v == "CERT_PASS" for v in verdicts) else "CERT_FAIL"
    battery, margin, failing = _battery_summary(family, params, N, lambdas, xs)
    witness = None
    if battery == "FAILS":
        # a failure counts only if it survives a second pass at 2N
        again = []
        for lt, xt in failing:
            v, _, f2 = _battery_summary(family, params, 2 * N, [lt], [xt])
            if v == "FAILS":
                again.append({"lambda": lt, "x": xt})
        if again:
            witness = {"pairs": again, "reverified_N": 2 * N}
            cls = "FAILS"
        else:
            battery = "INCONCLUSIVE"
            cls = "INCONCLUSIVE"
    elif battery == "INCONCLUSIVE":
        cls = "INCONCLUSIVE"
    elif cert == "CERT_PASS":
        cls = "SUFFICIENT"
    elif cert == "CERT_FAIL":
        cls = "CERT_FAIL-NO-COUNTEREXAMPLE"
    else:
        cls = "HOLDS-ON-BATTERY"
    return RegionCell(mode, p, second, cert, battery, float(margin), cls, witness)


def region_overlays(mode: str, ps: Sequence[float]) -> dict:
    out = {"mode": mode.upper(), "p": list(ps)}
    if mode == "pc":
        c0 = []
        for p in ps:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateExponentWarning)
                c0.append(solve_c0(p))
        out["c0"] = c0
    else:
        out["alpha_min"] = [1.0 - 1.0 / (2.0 * p) for p in ps]
    return out


def region_map(mode: str, p_range, second_range, resolution: Optional[int] = None,
               lambdas=STANDARD_LAMBDAS, xs=STANDARD_XS, N: int = 100000,
               family: Optional[str] = None, jobs: int = 1) -> RegionMap:
    """Classify every (p, c) or (p, alpha) cell by certificate and battery.

    PC cells use C2 by default and switch to the reversed inequality when
    p < 1; PA cells use BG by default (BGA on request). A cell is FAILS only
    when a battery failure is confirmed again at 2N.
    """
    mode = mode.lower()
    if mode not in ("pc", "pa"):
        raise SpecError(f"mode must be pc or pa, not {mode!r}")
    family = family or ("C2" if mode == "pc" else "BG")
    allowed = ("C2", "L1") if mode == "pc" else ("BG", "BGA", "I34")
    if family not in allowed:
        raise SpecError(f"{mode.upper()} maps support {allowed}, not {family!r}")
    ps = axis_values(p_range, resolution)
    seconds = axis_values(second_range, resolution)
    for p in ps:
        if not p > 0 or p == 1.0:
            raise SpecError(f"p = {p} is outside the mapped range")
        if mode == "pa" and not p > 1.0:
            raise SpecError("PA maps need p > 1")
    for s in seconds:
        if mode == "pc" and not s < 1.0:
            raise SpecError("PC maps need c < 1")
        if mode == "pa" and not s > 0.0:
            raise SpecError("PA maps need alpha > 0")
    if N < 1:
        raise SpecError("N must be at least 1")
    tasks = [(mode, family, p, s, int(N), tuple(lambdas), tuple(xs)) for p in ps for s in seconds]
    cells = _map(_region_cell, tasks, jobs)
    return RegionMap(mode, family, int(N), cells, region_overlays(mode, ps))


# --- counterexample search --------------------------------------------------

SEARCH_FAMILIES = ("C1", "C2", "L1", "L2", "BG", "BGA", "I34")
MAX_SUPPORT = 32


@dataclass
class SparseModel:
    """Both sides of a family for finitely supported x in O(support) time.

    The inner sum runs over coef_in[k] x_k, as a prefix (inner_prefix) or a
    suffix, and is constant between support points, so the outer sum only
    needs cumulative sums Wl of its weights: suffix sums (Wl[k] = sum_{n>=k},
    Wl[N] = 0) when segments run forward to N, prefix sums (Wl[0] = 0)
    otherwise, so that single segments do not cancel. The right side is either
    pointwise (rc[k] x_k**p) or of the same segment form with weights Wr and
    an inner sum of plain x.
    """

    family: str
    params: Params
    N: int
    coef_in: np.ndarray
    inner_prefix: bool
    Wl: np.ndarray  # length N + 1
    rc: Optional[np.ndarray]
    Wr: Optional[np.ndarray]
    rhs_prefix: bool
    constant: float

    @property
    def reverse(self) -> bool:
        return bool(self.params.reverse)

    def _segment(self, W, prefix, inner, pos):
        if prefix:
            ends = np.append(pos[1:], self.N)
            return float(np.sum(powv(inner, self.params.p) * (W[pos] - W[ends])))
        starts = np.concatenate(([0], pos[:-1] + 1))
        return float(np.sum(powv(inner, self.params.p) * (W[pos + 1] - W[starts])))

    @staticmethod
    def _inner(terms, prefix):
        return np.cumsum(terms) if prefix else np.cumsum(terms[::-1])[::-1]

    def sides(self, pos: np.ndarray, vals: np.ndarray):
        """(lhs, rhs_sum) for x supported on 0-based sorted ``pos``."""
        p = self.params.p
        lhs = self._segment(self.Wl, self.inner_prefix,
                            self._inner(self.coef_in[pos] * vals, self.inner_prefix), pos)
        if self.rc is not None:
            rhs = float(np.sum(self.rc[pos] * powv(vals, p)))
        else:
            rhs = self._segment(self.Wr, self.rhs_prefix, self._inner(vals, self.rhs_prefix), pos)
        return lhs, rhs

    def ratio(self, pos, vals) -> float:
        lhs, rhs = self.sides(pos, vals)
        r = self.constant * rhs
        if self.reverse:
            return r / lhs if lhs > 0 else math.inf
        return lhs / r if r > 0 else math.inf

    def single_support(self) -> np.ndarray:
        """Ratio for x = e_m at every m, vectorized."""
        p = self.params.p
        N = self.N
        m = np.arange(N)
        cp = powv(self.coef_in, p)
        lhs = cp * (self.Wl[m] if self.inner_prefix else self.Wl[m + 1])
        if self.rc is not None:
            rhs = self.rc.copy()
        else:
            rhs = self.Wr[m] if self.rhs_prefix else self.Wr[m + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.reverse:
                return self.constant * rhs / lhs
            return lhs / (self.constant * rhs)


def _cum(a, forward: bool):
    """Suffix sums with a trailing 0 (forward) or prefix sums with a leading 0."""
    if forward:
        return np.append(kernels.suffix_sum(a), 0.0)
    return np.concatenate(([0.0], kernels.prefix_sum(a)))


def sparse_model(family: str, params: Params, lam: Weights, direction: str = "tail") -> SparseModel:
    if family not in SEARCH_FAMILIES:
        raise SpecError(f"unknown family {family!r}")
    validate(family, params, lam)
    p, c, a = params.p, params.c, params.alpha
    v = lam.values
    K = family_constant(family, params)
    if family in ("C1", "C2"):
        L = lam.prefix
        return SparseModel(family, params, lam.N, v, family == "C1", _cum(v * powv(L, -c), family == "C1"),
                           v * powv(L, p - c), None, False, K)
    if family in ("L1", "L2"):
        S = lam.tail
        return SparseModel(family, params, lam.N, v, family == "L1", _cum(v * powv(S, -c), family == "L1"),
                           v * powv(S, p - c), None, False, K)
    if family == "BG":
        L = lam.prefix
        return SparseModel(family, params, lam.N, powv(L, a), False, _cum(v, False),
                           None, _cum(v * powv(L, a * p), False), False, K)
    if family == "BGA":
        S = lam.tail
        return SparseModel(family, params, lam.N, powv(S, a), True, _cum(v, True),
                           None, _cum(v * powv(S, a * p), True), True, K)
    if direction == "tail":
        S = lam.tail
        return SparseModel(family, params, lam.N, pow_drop(S, v, a), True, _cum(v, True),
                           v * powv(S, a * p), None, False, K)
    if direction != "forward":
        raise SpecError(f"unknown I34 direction {direction!r}")
    L = lam.prefix
    return SparseModel(family, params, lam.N, pow_drop(L, v, a), False, _cum(v, False),
                       v * powv(L, a * p), None, False, K)


def _dense(pos, vals, N):
    x = np.zeros(N)
    x[pos] = vals
    return x


def _restart(task):
    """One seeded restart: random support, then multiplicative coordinate ascent."""
    model, seq, evals_allowed = task
    rng = np.random.default_rng(seq)
    N = model.N
    size = int(rng.integers(1, min(MAX_SUPPORT, N) + 1))
    raw = np.floor(np.exp(rng.uniform(0.0, math.log(N + 1.0), size=4 * size))).astype(np.int64)
    pos = np.unique(np.clip(raw, 1, N) - 1)[:size]
    vals = rng.lognormal(0.0, 1.0, size=pos.shape[0])
    best = model.ratio(pos, vals)
    used = 1
    delta = 1.0
    while used < evals_allowed and delta > 1e-4:
        improved = False
        for i in range(pos.shape[0]):
            for step in (delta, -delta):
                if used >= evals_allowed:
                    break
                trial = vals.copy()
                trial[i] *= math.exp(step)
                r = model.ratio(pos, trial)
                used += 1
                if r > best:
                    best, vals, improved = r, trial, True
        if not improved:
            delta *= 0.5
    return best, pos, vals, used


@dataclass
class SearchResult:
    family: str
    params: Params
    lam: str
    N: int
    seed: int
    budget: int
    budget_consumed: int
    best_ratio: float
    positions: List[int]  # 1-based
    values: List[float]
    source: str
    single_support: dict
    claimed: bool
    reverification: Optional[dict]
    direction: Optional[str] = None

    @property
    def verdict(self) -> str:
        if not self.claimed:
            return "NO_COUNTEREXAMPLE"
        return "COUNTEREXAMPLE" if self.reverification["confirmed"] else "UNCONFIRMED"

    def to_dict(self) -> dict:
        d = {
            "family": self.family,
            "p": self.params.p,
            "c": self.params.c,
            "alpha": self.params.alpha,
            "reverse": bool(self.params.reverse),
            "lambda": self.lam,
            "N": self.N,
            "seed": self.seed,
            "budget": self.budget,
            "budget_consumed": self.budget_consumed,
            "best_ratio": self.best_ratio,
            "witness": {"positions": self.positions, "values": self.values},
            "source": self.source,
            "single_support": self.single_support,
            "claimed": self.claimed,
            "reverification": self.reverification,
            "verdict": self.verdict,
        }
        if self.direction is not None:
            d["direction"] = self.direction
        return d


def _reverify(family, params, lam_spec, pos, vals, N, direction):
    """Dense evaluator passes at N and 2N for the witness (x vanishes past N)."""
    out = {}
    confirmed = True
    for n in (N, 2 * N):
        spec = lam_spec
        lam = weights_from_spec(spec, battery_length(spec, n))
        if lam.N < N:
            lam = weights_from_spec(spec, N)
        x = _dense(pos, vals, lam.N)
        rep = eval_inequality(family, params, lam, x, direction=direction)
        out[f"ratio_{'N' if n == N else '2N'}"] = rep.ratio
        out[f"verdict_{'N' if n == N else '2N'}"] = rep.verdict
        confirmed = confirmed and rep.verdict == "FAILS"
    out["confirmed"] = confirmed
    return out


def counterexample_search(family: str, params: Params, lam_spec: Optional[SequenceSpec] = None,
                          N: int = 1000, budget: int = 10000, seed: int = 0, jobs: int = 1,
                          direction: str = "tail", check_points: int = 16) -> SearchResult:
    """Maximize lhs/(K rhs_sum) (the inverse under ``reverse``) over finite supports.

    Phase one scans every single-support x = e_m in closed form and
    cross-checks a few of them against the dense evaluator. Phase two spends
    ``budget`` objective evaluations on SeedSequence-spawned restarts. A
    ratio above 1 + 10 * (relative error budget) is claimed, then confirmed
    only if the dense evaluator reports FAILS at N and at 2N.
    """
    if budget < 1:
        raise SpecError("budget must be at least 1")
    if N < 1:
        raise SpecError("N must be at least 1")
    if lam_spec is None:
        lam_spec = SequenceSpec.pow(-2.0) if family in TAIL_FAMILIES else SequenceSpec.const(1.0)
    n_eff = battery_length(lam_spec, N)
    lam = weights_from_spec(lam_spec, n_eff)
    model = sparse_model(family, params, lam, direction)

    single = model.single_support()
    m = int(np.argmax(np.where(np.isnan(single), -np.inf, single)))
    # the closed forms must agree with the evaluator
    for k in sorted({0, m, *np.linspace(0, n_eff - 1, check_points).astype(int).tolist()}):
        x = _dense(np.array([k]), np.array([1.0]), n_eff)
        s = sides(family, params, lam, x, direction)
        lhs, rhs = model.sides(np.array([k]), np.array([1.0]))
        for got, want in ((lhs, s.lhs), (rhs, s.rhs_sum)):
            if not math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-300):
                raise RuntimeError(f"single-support closed form disagrees at m={k + 1}: "
                                   f"{got!r} vs {want!r}")

    n_restarts = max(1, min(64, budget // 256))
    share = [budget // n_restarts + (1 if r < budget % n_restarts else 0) for r in range(n_restarts)]
    seqs = np.random.SeedSequence(seed).spawn(n_restarts)
    results = _map(_restart, [(model, s, b) for s, b in zip(seqs, share)], jobs)

    best, pos, vals = float(single[m]), np.array([m]), np.array([1.0])
    source = "single-support"
    for r, (ratio, rpos, rvals, _) in enumerate(results):
        if ratio > best:
            best, pos, vals, source = float(ratio), rpos, rvals, f"restart {r}"
    used = sum(u for *_, u in results)

    x = _dense(pos, vals, n_eff)
    rep = eval_inequality(family, params, lam, x, direction=direction)
    rel_budget = rep.error_budget / max(rep.rhs, rep.lhs, np.finfo(float).tiny)
    claimed = best > 1.0 + 10.0 * rel_budget
    reverification = _reverify(family, params, lam_spec, pos, vals, n_eff, direction) if claimed else None
    return SearchResult(family, params, spec_to_text(lam_spec), n_eff, int(seed), int(budget), int(used),
                        best, [int(k) + 1 for k in pos], [float(v) for v in vals], source,
                        {"m": m + 1, "ratio": float(single[m])}, claimed, reverification,
                        direction if family == "I34" else None)
