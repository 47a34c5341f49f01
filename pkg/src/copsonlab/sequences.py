"""Positive test and weight sequences, their partial and tail sums, and tail bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from . import kernels
from .errors import DataError, NotSummableError, SpecError

KINDS = ("CONST", "POW", "GEOM", "UNIT", "EXPLICIT", "EXTREMAL_COPSON", "EXTREMAL_BGA")


@dataclass(frozen=True)
class SequenceSpec:
    """Closed-form description of a sequence indexed from n = 1.

    ``args`` holds the kind-specific parameters:

    ========================  ===========================  ==========================
    kind                      args                         term n
    ========================  ===========================  ==========================
    CONST                     (v,)                         v
    POW                       (a,)                         n**a
    GEOM                      (r, v)                       v * r**(n-1)
    UNIT                      (m,)                         1 if n == m else 0
    EXPLICIT                  tuple of values              values[n-1]
    EXTREMAL_COPSON           (p, c, eps)                  n**((c-p-1-eps)/p)
    EXTREMAL_BGA              (a, alpha, p, eps)           n**b (see ``bga_exponent``)
    ========================  ===========================  ==========================
    """

    kind: str
    args: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown sequence kind {self.kind!r}")
        a = self.args
        if self.kind == "CONST" and not a[0] > 0:
            raise SpecError("CONST needs v > 0")
        if self.kind == "GEOM" and not (0 < a[0] < 1 and a[1] > 0):
            raise SpecError("GEOM needs 0 < r < 1 and v > 0")
        if self.kind == "UNIT" and not (int(a[0]) == a[0] and a[0] >= 1):
            raise SpecError("UNIT needs an integer position m >= 1")
        if self.kind == "EXPLICIT":
            if len(a) == 0 or any(not (math.isfinite(v) and v >= 0) for v in a):
                raise SpecError("EXPLICIT entries must be finite and nonnegative")
        if self.kind == "EXTREMAL_COPSON":
            p, _, eps = a
            if not (p > 0 and eps > 0):
                raise SpecError("EXTREMAL_COPSON needs p > 0 and eps > 0")
        if self.kind == "EXTREMAL_BGA":
            aa, alpha, p, eps = a
            if not (aa > 1 and p > 0 and eps > 0):
                raise SpecError("EXTREMAL_BGA needs a > 1, p > 0 and eps > 0")
            del alpha

    # constructors -------------------------------------------------------
    @classmethod
    def const(cls, v=1.0):
        return cls("CONST", (float(v),))

    @classmethod
    def pow(cls, a):
        return cls("POW", (float(a),))

    @classmethod
    def geom(cls, r, v=1.0):
        return cls("GEOM", (float(r), float(v)))

    @classmethod
    def unit(cls, m):
        return cls("UNIT", (int(m),))

    @classmethod
    def explicit(cls, values):
        return cls("EXPLICIT", tuple(float(v) for v in values))

    @classmethod
    def extremal_copson(cls, p, c, eps):
        return cls("EXTREMAL_COPSON", (float(p), float(c), float(eps)))

    @classmethod
    def extremal_bga(cls, a, alpha, p, eps):
        return cls("EXTREMAL_BGA", (float(a), float(alpha), float(p), float(eps)))

    # closed forms -------------------------------------------------------
    def power_exponent(self) -> Optional[float]:
        """Exponent e when the term is n**e (times a constant), else None."""
        if self.kind == "CONST":
            return 0.0
        if self.kind == "POW":
            return self.args[0]
        if self.kind == "EXTREMAL_COPSON":
            p, c, eps = self.args
            return (c - p - 1.0 - eps) / p
        if self.kind == "EXTREMAL_BGA":
            return bga_exponent(*self.args)
        return None

    def coefficient(self) -> float:
        return self.args[0] if self.kind == "CONST" else 1.0

    def term(self, n):
        """Term value at (possibly real, possibly array) index n >= 1."""
        e = self.power_exponent()
        if e is not None:
            return self.coefficient() * np.power(np.asarray(n, dtype=np.float64), e)
        if self.kind == "GEOM":
            r, v = self.args
            return v * np.power(r, np.asarray(n, dtype=np.float64) - 1.0)
        raise SpecError(f"{self.kind} has no closed form at real arguments")

    def lambda_companion(self) -> "SequenceSpec":
        """The weight sequence n**(-a) that pairs with an EXTREMAL_BGA test sequence."""
        if self.kind != "EXTREMAL_BGA":
            raise SpecError("only EXTREMAL_BGA carries a paired weight sequence")
        return SequenceSpec.pow(-self.args[0])

    def is_summable(self) -> bool:
        e = self.power_exponent()
        if e is not None:
            return self.kind != "CONST" and e < -1.0
        return self.kind in ("GEOM", "UNIT", "EXPLICIT")


def bga_exponent(a, alpha, p, eps):
    """Exponent b of the test sequence n**b paired with weights n**(-a)."""
    return ((a - 1.0) * (alpha * p + 1.0) - eps) / p - 1.0


def materialize(spec: SequenceSpec, N: int) -> np.ndarray:
    """First N terms of ``spec`` as a float64 array."""
    if int(N) != N or N < 1:
        raise SpecError("N must be a positive integer")
    N = int(N)
    if spec.kind == "UNIT":
        m = spec.args[0]
        if m > N:
            raise SpecError(f"UNIT position {m} lies beyond N={N}")
        out = np.zeros(N)
        out[m - 1] = 1.0
        return out
    if spec.kind == "EXPLICIT":
        if len(spec.args) < N:
            raise SpecError(f"EXPLICIT sequence has {len(spec.args)} < N={N} entries")
        return np.array(spec.args[:N], dtype=np.float64)
    if spec.kind == "CONST":
        return np.full(N, spec.args[0])
    return spec.term(np.arange(1, N + 1, dtype=np.float64))


def tail_bound(spec: SequenceSpec, N: int) -> Tuple[float, float]:
    """Interval [lo, hi] containing sum_{n > N} term(n)."""
    N = int(N)
    if spec.kind == "GEOM":
        r, v = spec.args
        t = v * r**N / (1.0 - r)
        return (t, t)
    if spec.kind == "UNIT":
        t = 0.0 if spec.args[0] <= N else 1.0
        return (t, t)
    if spec.kind == "EXPLICIT":
        t = math.fsum(spec.args[N:])
        return (t, t)
    e = spec.power_exponent()
    if spec.kind == "CONST" or e is None or e >= -1.0:
        raise NotSummableError(f"{spec_to_text(spec)} is not summable")
    k = -(e + 1.0)
    # integral test: int_{N+1}^inf <= tail <= int_N^inf
    return ((N + 1.0) ** (e + 1.0) / k, float(N) ** (e + 1.0) / k)


@dataclass(frozen=True, eq=False)
class Weights:
    """Materialized weights with prefix sums and (when summable) tail sums.

    ``tail[i]`` is the tail sum starting at index n = i + 1 and includes the
    midpoint of ``tail_beyond``; ``tail_halfwidth`` is the matching error.
    """

    values: np.ndarray
    prefix: np.ndarray
    tail: Optional[np.ndarray]
    tail_beyond: Optional[Tuple[float, float]]

    @property
    def N(self) -> int:
        return int(self.values.shape[0])

    @property
    def summable(self) -> bool:
        return self.tail is not None

    @property
    def tail_halfwidth(self) -> float:
        if self.tail_beyond is None:
            return 0.0
        return 0.5 * (self.tail_beyond[1] - self.tail_beyond[0])

    @property
    def tail_next(self) -> float:
        """Midpoint estimate of the tail sum starting at N + 1."""
        if self.tail_beyond is None:
            raise NotSummableError("weights carry no tail information")
        return 0.5 * (self.tail_beyond[0] + self.tail_beyond[1])

    def tail_extended(self) -> np.ndarray:
        """Tail sums for n = 1 .. N + 1."""
        return np.append(self.tail, self.tail_next)

    def with_tail(self, value: float) -> "Weights":
        """Same weights with the beyond-N tail pinned to ``value`` exactly."""
        return cumulate(self.values, (value, value))


def cumulate(values, tail_beyond_N=None) -> Weights:
    """Prefix sums and, given an interval for the remainder, tail sums."""
    vals = np.ascontiguousarray(values, dtype=np.float64)
    if vals.ndim != 1 or vals.size == 0:
        raise SpecError("weights must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0) or np.any(vals < np.finfo(float).tiny):
        raise SpecError("weights must be positive normal floats")
    prefix = kernels.prefix_sum(vals)
    tail = None
    interval = None
    if tail_beyond_N is not None:
        lo, hi = (float(tail_beyond_N[0]), float(tail_beyond_N[1]))
        if hi < lo or lo < 0:
            raise SpecError(f"bad tail interval [{lo}, {hi}]")
        interval = (lo, hi)
        vals_ext = np.append(vals, 0.5 * (lo + hi))
        tail = kernels.suffix_sum(vals_ext)[:-1]
    return Weights(vals, prefix, tail, interval)


def weights_from_spec(spec: SequenceSpec, N: int) -> Weights:
    """Materialize and cumulate, attaching a tail bound when the spec is summable."""
    values = materialize(spec, N)
    tail = tail_bound(spec, N) if spec.is_summable() else None
    return cumulate(values, tail)


# --- mini-language -------------------------------------------------------

def _num(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise SpecError(f"not a number: {text!r}") from exc


def parse_spec(text: str, p=None, c=None, alpha=None) -> SequenceSpec:
    """Parse ``const:V``, ``pow:A``, ``geom:R[:V]``, ``unit:M``, ``file:PATH``,
    ``extremal-copson:EPS`` or ``extremal-bga:A,EPS``.

    The extremal kinds take p, c and alpha from the keyword arguments.
    """
    kind, sep, rest = text.strip().partition(":")
    kind = kind.lower()
    if not sep:
        raise SpecError(f"sequence spec {text!r} lacks ':'")
    if kind == "const":
        return SequenceSpec.const(_num(rest))
    if kind == "pow":
        return SequenceSpec.pow(_num(rest))
    if kind == "geom":
        parts = rest.split(":")
        v = _num(parts[1]) if len(parts) > 1 else 1.0
        return SequenceSpec.geom(_num(parts[0]), v)
    if kind == "unit":
        m = _num(rest)
        if m != int(m):
            raise SpecError("unit position must be an integer")
        return SequenceSpec.unit(int(m))
    if kind == "file":
        return SequenceSpec.explicit(read_values(rest))
    if kind == "extremal-copson":
        if p is None or c is None:
            raise SpecError("extremal-copson needs p and c")
        return SequenceSpec.extremal_copson(p, c, _num(rest))
    if kind == "extremal-bga":
        if p is None or alpha is None:
            raise SpecError("extremal-bga needs p and alpha")
        parts = rest.split(",")
        if len(parts) != 2:
            raise SpecError("extremal-bga takes A,EPS")
        return SequenceSpec.extremal_bga(_num(parts[0]), alpha, p, _num(parts[1]))
    raise SpecError(f"unknown sequence kind {kind!r}")


def read_values(path) -> list:
    """One nonnegative decimal per line; blank lines are skipped."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    out = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            v = float(line.strip())
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: not a decimal number") from exc
        if not math.isfinite(v) or v < 0:
            raise DataError(f"{path}:{lineno}: value must be finite and nonnegative")
        out.append(v)
    if not out:
        raise DataError(f"{path}: no values")
    return out


def spec_to_text(spec: SequenceSpec) -> str:
    k, a = spec.kind, spec.args
    if k == "CONST":
        return f"const:{a[0]!r}"
    if k == "POW":
        return f"pow:{a[0]!r}"
    if k == "GEOM":
        return f"geom:{a[0]!r}:{a[1]!r}"
    if k == "UNIT":
        return f"unit:{a[0]}"
    if k == "EXTREMAL_COPSON":
        return f"extremal-copson:{a[2]!r}"
    if k == "EXTREMAL_BGA":
        return f"extremal-bga:{a[0]!r},{a[3]!r}"
    return f"explicit[{len(a)}]"
