"""Auxiliary weight sequences and per-index certificates of the sufficient
conditions that imply the target inequalities.

A failed certificate only means the sufficient condition failed at some
index. It says nothing about whether the inequality itself is false.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import SpecError
from .evaluator import pow_drop, powv
from .params import Params
from .sequences import Weights

SCHEMES = ("COPSON_TAIL", "LEINDLER", "BG", "BGA")
TAIL_SUM_SCHEMES = ("COPSON_TAIL", "BGA")
SCHEME_FAMILY = {"COPSON_TAIL": "C2", "LEINDLER": "L1", "BG": "BG", "BGA": "BGA"}

DEFAULT_TOL = 1e-9
_EPS = np.finfo(float).eps


def _check(scheme, params, lam):
    if scheme not in SCHEMES:
        raise SpecError(f"unknown scheme {scheme!r}")
    p = params.p
    if scheme in ("COPSON_TAIL", "LEINDLER"):
        if params.c is None or not params.c < 1.0:
            raise SpecError(f"{scheme} needs c < 1")
    else:
        if not p > 1.0:
            raise SpecError(f"{scheme} needs p > 1")
        if scheme == "BG" and params.alpha is None:
            raise SpecError("BG certificate needs alpha")
        if scheme == "BGA" and params.alpha is None:
            raise SpecError("BGA certificate needs alpha")
    if scheme in ("LEINDLER", "BGA") and not lam.summable:
        raise SpecError(f"{scheme} needs summable weights")


def _weights_ext(scheme, params, lam: Weights) -> np.ndarray:
    """w_1 .. w_{N+1} (LEINDLER, BG) or w_1 .. w_N (tail-sum schemes)."""
    p = params.p
    v = lam.values
    if scheme == "COPSON_TAIL":
        t = (1.0 - params.c) / p
        L = lam.prefix
        x = v[1:] / L[1:]
        factor = (L[:-1] / L[1:]) / (1.0 + t * x)
        return np.concatenate(([1.0], np.cumprod(factor)))
    if scheme == "LEINDLER":
        t = (1.0 - params.c) / p
        return kernels.leindler_recurrence(v, lam.tail_extended()[1:], t)
    if scheme == "BG":
        factor = 1.0 - (v / lam.prefix) / p
        return np.concatenate(([1.0], np.cumprod(factor)))
    # BGA
    factor = 1.0 / (1.0 - (v[1:] / lam.tail[1:]) / p)
    return np.concatenate(([1.0], np.cumprod(factor)))


def build_weights(scheme: str, params: Params, lam: Weights, N: Optional[int] = None) -> np.ndarray:
    """The auxiliary sequence w_1 .. w_N defined by the scheme's recurrence (w_1 = 1)."""
    if N is not None and N != lam.N:
        raise SpecError(f"N={N} does not match {lam.N} weights")
    _check(scheme, params, lam)
    w = _weights_ext(scheme, params, lam)[: lam.N]
    if not np.all(w > 0) or not np.all(np.isfinite(w)):
        raise SpecError(f"{scheme} recurrence left the positive reals for these parameters")
    return w


@dataclass
class WeightCertificate:
    scheme: str
    params: Params
    w: np.ndarray
    residuals: np.ndarray
    normalized: np.ndarray
    scale: np.ndarray
    allowance: np.ndarray
    tolerance: float
    excluded: int = 0
    truncation_allowance: float = 0.0
    note: str = "CERT_FAIL means the sufficient condition failed, not that the inequality is false"

    @property
    def N(self) -> int:
        return int(self.residuals.shape[0])

    @property
    def judged(self) -> np.ndarray:
        """Indices (0-based) that count toward the verdict."""
        return np.arange(self.N - self.excluded)

    @property
    def relative_residuals(self) -> np.ndarray:
        """Residuals divided by w_n**(p-1) and by the larger side, plus the rounding
        allowance; the verdict is read off these."""
        return (self.normalized + self.allowance) / self.scale

    @property
    def min_residual(self) -> float:
        return float(self.residuals[self.judged].min())

    @property
    def resolvable(self) -> np.ndarray:
        """Mask of indices whose residual sign exceeds the rounding allowance."""
        return np.abs(self.normalized) > self.allowance

    @property
    def argmin_index(self) -> int:
        """1-based index attaining the smallest relative residual among judged indices."""
        rel = self.relative_residuals[self.judged]
        return int(np.argmin(rel)) + 1

    @property
    def min_relative_residual(self) -> float:
        return float(self.relative_residuals[self.judged].min())

    @property
    def verdict(self) -> str:
        return "CERT_PASS" if self.min_relative_residual >= -self.tolerance else "CERT_FAIL"

    def to_dict(self, residuals: bool = False) -> dict:
        d = {
            "scheme": self.scheme,
            "p": self.params.p,
            "c": self.params.c,
            "alpha": self.params.alpha,
            "reverse": bool(self.params.reverse),
            "N": self.N,
            "min_residual": self.min_residual,
            "min_relative_residual": self.min_relative_residual,
            "argmin_index": self.argmin_index,
            "verdict": self.verdict,
            "excluded_tail_indices": list(range(self.N - self.excluded + 1, self.N + 1)),
            "truncation_allowance": self.truncation_allowance,
            "note": self.note,
        }
        if residuals:
            d["residuals"] = [float(r) for r in self.residuals]
        return d


def _log_ratio(num, den):
    with np.errstate(divide="ignore"):
        return np.log(num / den)


def _rows(scheme, params, lam: Weights, w_ext: np.ndarray, tail_bound_hi: bool = True,
          own: bool = False):
    """Per-index pieces of the sufficient condition, divided by w_n**(p-1).

    Returns (lhs, one_minus, mult, wq): the condition reads
    wq * lhs <= wq * mult * one_minus, where one_minus is 1 - B_n/A_n for the
    two right-side terms A_n = w_n**(p-1) and B_n, evaluated via expm1.
    With ``own`` the weight ratios come from the recurrence in closed form
    rather than from the stored weights, which keeps rows accurate where
    lam_n / Lambda_n falls below the rounding unit.
    """
    p, c, a = params.p, params.c, params.alpha
    N = lam.N
    v = lam.values
    w = w_ext[:N]
    q = p - 1.0
    with np.errstate(over="ignore"):
        wq = powv(w, q)  # may overflow; only the displayed residuals use it
    if scheme == "COPSON_TAIL":
        K = (p / (1.0 - c)) ** p
        L = lam.prefix
        t = (1.0 - c) / p
        # sum_{k>N} lam_k w_k = (Lambda_N w_N - lim Lambda_M w_M)/t lies in [0, Lambda_N w_N / t]
        extra = L[-1] * w[-1] / t if tail_bound_hi else 0.0
        T = kernels.suffix_sum(v * w) + extra
        lhs = powv(T / (L * w), q)
        x = v[1:] / L[1:]
        # log(w_{n-1}/w_n) = log(1 + t x) - log(1 - x)
        lw = np.log1p(t * x) - np.log1p(-x) if own else _log_ratio(w[:-1], w[1:])
        expo = q * lw + (p - c) * np.log1p(-x)
        one_minus = np.concatenate(([1.0], -np.expm1(expo)))
        mult = K * L / v
        mult[0] = K
        return lhs, one_minus, mult, wq
    if scheme == "LEINDLER":
        K = (p / (1.0 - c)) ** p
        S = lam.tail
        t = (1.0 - c) / p
        y = np.minimum(v / S, 1.0)
        P = kernels.prefix_sum(v * w)
        lhs = powv(P / (S * w), q)
        with np.errstate(divide="ignore"):
            if own:
                # w_{n+1}/w_n = (1 + t y)/(1 - y) for n >= 2 and t y/(1 - y) at n = 1
                lw = np.log1p(t * y) - np.log1p(-y)
                lw[0] = np.log(t * y[0]) - np.log1p(-y[0])
            else:
                lw = _log_ratio(w_ext[1:], w)
            one_minus = -np.expm1(q * lw + (p - c) * np.log1p(-y))
        return lhs, one_minus, K * S / v, wq
    K = (p / (p - 1.0)) ** p
    if scheme == "BG":
        L = lam.prefix
        P = kernels.prefix_sum(v * w)
        lhs = powv(P / (L * w), q)
        D = pow_drop(L, v, a)
        bracket = a * v * powv(L, a - 1.0) / D
        lw = np.log1p(-(v / L) / p) if own else _log_ratio(w_ext[1:], w)
        one_minus = -np.expm1(q * lw)
        return lhs, one_minus, K * powv(bracket, p) * L / v, wq
    # BGA
    S = lam.tail
    S_next = lam.tail_beyond[1] if tail_bound_hi else lam.tail_next
    # sum_{k>N} lam_k w_k = p/(p-1) (S_{N+1} w_N - lim S_{M+1} w_M) <= p/(p-1) S_{N+1} w_N
    extra = p / (p - 1.0) * S_next * w[-1] if tail_bound_hi else 0.0
    T = kernels.suffix_sum(v * w) + extra
    lhs = powv(T / (S * w), q)
    D = pow_drop(S, v, a)
    bracket = a * v * powv(S, a - 1.0) / D
    lw = np.log1p(-(v[1:] / S[1:]) / p) if own else _log_ratio(w[:-1], w[1:])
    one_minus = np.concatenate(([1.0], -np.expm1(q * lw)))
    return lhs, one_minus, K * powv(bracket, p) * S / v, wq


def verify_certificate(scheme: str, params: Params, lam: Weights, w=None, N: Optional[int] = None,
                       tolerance: float = DEFAULT_TOL, exclude_fraction: Optional[float] = None
                       ) -> WeightCertificate:
    """Residuals r_n = rhs - lhs of the scheme's sufficient condition at every index.

    ``w`` defaults to the scheme's own recurrence. For LEINDLER and BG a
    supplied ``w`` needs N + 1 entries, since row n involves w_{n+1}. Tail-sum
    schemes use the largest admissible value of the sums beyond N, which can
    only lower the residuals. The last ceil(N/10) indices of those schemes
    are reported but left out of the verdict unless ``exclude_fraction`` says
    otherwise. Under ``params.reverse`` the inequality direction flips.
    """
    _check(scheme, params, lam)
    if N is not None and N != lam.N:
        raise SpecError(f"N={N} does not match {lam.N} weights")
    need = lam.N if scheme in TAIL_SUM_SCHEMES else lam.N + 1
    own = w is None
    if own:
        w_ext = _weights_ext(scheme, params, lam)
    else:
        w_ext = np.asarray(w, dtype=np.float64)
        if w_ext.shape[0] != need:
            raise SpecError(f"{scheme} needs {need} weights, got {w_ext.shape[0]}")
    if not np.all(w_ext > 0) or not np.all(np.isfinite(w_ext)):
        raise SpecError("auxiliary weights must be positive and finite")
    lhs, one_minus, mult, wq = _rows(scheme, params, lam, w_ext, own=own)
    rhs = mult * one_minus
    sign = -1.0 if params.reverse else 1.0
    normalized = sign * (rhs - lhs)
    with np.errstate(over="ignore", invalid="ignore"):
        residuals = wq * normalized
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), np.finfo(float).tiny)
    allowance = 16.0 * _EPS * max(1.0, params.p) * (mult + lhs)
    trunc = 0.0
    if scheme in TAIL_SUM_SCHEMES:
        lo_lhs = _rows(scheme, params, lam, w_ext, tail_bound_hi=False, own=own)[0]
        trunc = float(np.max(np.abs(lhs - lo_lhs) / scale))
        frac = 0.1 if exclude_fraction is None else exclude_fraction
    else:
        frac = 0.0 if exclude_fraction is None else exclude_fraction
    excluded = min(int(math.ceil(frac * lam.N)), lam.N - 1)
    return WeightCertificate(scheme, params, w_ext[: lam.N], residuals, normalized, scale,
                             allowance, tolerance, excluded, trunc)


def scheme_weights_for_master(scheme: str, params: Params, lam: Weights) -> np.ndarray:
    """Undo the change of variables w_n -> lam_n w_n used to state the conditions."""
    return lam.values * _weights_ext(scheme, params, lam)[: lam.N]


# --- the imported master inequalities -------------------------------------

@dataclass
class MasterCheckInput:
    """Sequences entering the two master inequalities.

    ``a``, ``b`` and ``w`` may carry one extra entry (index N + 1) for the
    forward form, whose row n involves w_{n+1} and b_{n+1}.
    """

    a: np.ndarray
    b: np.ndarray
    w: np.ndarray
    x: np.ndarray
    p: float
    U: Optional[float] = None

    def __post_init__(self):
        for name in ("a", "b", "w", "x"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        for name in ("a", "b", "w"):
            arr = getattr(self, name)
            if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
                raise SpecError(f"{name} must be positive")
        if np.any(self.x < 0):
            raise SpecError("x must be nonnegative")

    @property
    def N(self) -> int:
        return int(self.x.shape[0])

    @property
    def S(self) -> np.ndarray:
        N = self.N
        return kernels.suffix_sum(self.b[:N] * self.x)

    @property
    def A(self) -> np.ndarray:
        return self.S / self.a[: self.N]


@dataclass
class MasterReport:
    form: str
    residual: float
    verdict: str
    row_residuals: Optional[np.ndarray] = None
    implied_residual: Optional[float] = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"form": self.form, "residual": self.residual, "verdict": self.verdict}
        if self.row_residuals is not None:
            d["min_row_residual"] = float(np.min(self.row_residuals))
            d["argmin_row"] = int(np.argmin(self.row_residuals)) + 1
            d["implied_residual"] = self.implied_residual
        d.update(self.details)
        return d


def master_m22_sides(inp: MasterCheckInput):
    """(lhs, sum x**p) of the tail-form master inequality, sums truncated at N."""
    N, p = inp.N, inp.p
    a, b, w = inp.a[:N], inp.b[:N], inp.w[:N]
    W = kernels.suffix_sum(w)
    coef = powv(w, p - 1.0) / powv(b, p)
    diff = np.concatenate(([coef[0]], coef[1:] - coef[:-1]))
    terms = powv(W, 1.0 - p) * diff * powv(a * inp.A, p)
    return kernels.total_sum(terms), kernels.total_sum(powv(inp.x, p))


def verify_master(form: str, inp: MasterCheckInput, tolerance: float = 1e-10) -> MasterReport:
    """Check one of the master inequalities on concrete inputs.

    In both forms a_n is the reciprocal of the kernel's row factor: the
    operators are (1/a_n) sum_{k>=n} b_k x_k and (1/a_n) sum_{k<=n} b_k x_k.
    M22 returns sum x**p - lhs. M27 checks every row
    (sum_{k<=n} w_k)**(p-1) <= U a_n**p (w_n**(p-1)/b_n**p - w_{n+1}**(p-1)/b_{n+1}**p)
    (the subtracted term is dropped at n = N unless an (N+1)-th entry is given)
    and also evaluates the implied inequality sum ((1/a_n) sum_{k<=n} b_k x_k)**p <= U sum x**p.
    """
    p = inp.p
    if form == "M22":
        lhs, rhs = master_m22_sides(inp)
        res = rhs - lhs
        verdict = "PASS" if res >= -tolerance * max(1.0, rhs) else "FAIL"
        return MasterReport("M22", float(res), verdict, details={"lhs": lhs, "sum_xp": rhs})
    if form != "M27":
        raise SpecError(f"unknown master form {form!r}")
    if not p > 1.0:
        raise SpecError("M27 needs p > 1")
    if inp.U is None or not inp.U > 0:
        raise SpecError("M27 needs U_p > 0")
    N = inp.N
    a, b, w = inp.a, inp.b, inp.w
    coef = powv(w, p - 1.0) / powv(b, p)
    nxt = coef[1 : N + 1] if coef.shape[0] > N else np.append(coef[1:N], 0.0)
    rows_lhs = powv(kernels.prefix_sum(w[:N]), p - 1.0)
    rows_rhs = inp.U * powv(a[:N], p) * (coef[:N] - nxt)
    row_res = rows_rhs - rows_lhs
    scale = np.maximum(np.abs(rows_lhs), np.abs(rows_rhs))
    rows_ok = bool(np.all(row_res >= -tolerance * scale))
    inner = kernels.prefix_sum(b[:N] * inp.x)
    implied_lhs = kernels.total_sum(powv(inner / a[:N], p))
    sum_xp = kernels.total_sum(powv(inp.x, p))
    implied = inp.U * sum_xp - implied_lhs
    implied_ok = implied >= -tolerance * max(1.0, inp.U * sum_xp)
    verdict = "PASS" if rows_ok and implied_ok else "FAIL"
    return MasterReport("M27", float(implied), verdict, row_res, float(implied),
                        details={"rows_pass": rows_ok, "implied_lhs": implied_lhs,
                                 "implied_rhs": inp.U * sum_xp})


def bg_master_input(params: Params, lam: Weights, x) -> MasterCheckInput:
    """Forward-form inputs for the BG reduction: a_n, b_n and w from the BG scheme."""
    p, a = params.p, params.alpha
    N = lam.N
    w_ext = _weights_ext("BG", params, lam)
    # one extra weight term for b_{N+1}, w_{N+1}: lam_{N+1} is unknown, so use the
    # conservative choice of dropping the subtracted term at row N
    L = lam.prefix
    D = pow_drop(L, lam.values, a)
    an = powv(lam.values, 1.0 - 1.0 / p) * powv(L, a) / D
    bn = powv(lam.values, 1.0 - 1.0 / p)
    w = lam.values * w_ext[:N]
    U = (a * p / (p - 1.0)) ** p
    return MasterCheckInput(an, bn, w, np.asarray(x, dtype=np.float64), p, U)


def c2_master_input(params: Params, lam: Weights, x) -> MasterCheckInput:
    """Tail-form inputs for the C2 reduction with the COPSON_TAIL weights."""
    p, c = params.p, params.c
    an = powv(lam.values, -1.0 / p) * powv(lam.prefix, c / p)
    bn = powv(lam.values, 1.0 - 1.0 / p) * powv(lam.prefix, -(1.0 - c / p))
    w = scheme_weights_for_master("COPSON_TAIL", params, lam)
    return MasterCheckInput(an, bn, w, np.asarray(x, dtype=np.float64), p, (p / (1.0 - c)) ** p)
