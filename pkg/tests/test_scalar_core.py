import math

import numpy as np
import pytest

from copsonlab import SpecError
from copsonlab.params import Params
from copsonlab.scalar_core import (DegenerateExponentWarning, check_condition, cond_26, scalar_eval,
                                   solve_c0)


def test_scalar_examples():
    assert scalar_eval("F_LEMMA", Params(2, c=0), 0.0) == 0.0
    assert scalar_eval("F_LEMMA", Params(2, c=0), 1.0) == pytest.approx(1 / 6, rel=1e-15)
    assert scalar_eval("F_ALPHA", Params(2, alpha=1), 1.0) == pytest.approx(0.25, rel=1e-15)
    pr = Params(2, alpha=1)
    assert scalar_eval("LHS32", pr, 1.0) - scalar_eval("RHS32", pr, 1.0) == pytest.approx(1.0)


def test_scalar_domain_errors():
    with pytest.raises(SpecError):
        scalar_eval("F_LEMMA", Params(2, c=0), 1.5)
    with pytest.raises(SpecError):
        scalar_eval("F_LEMMA_D1", Params(2, c=0.5), 1.0)
    with pytest.raises(SpecError):
        scalar_eval("F_ALPHA", Params(2), 0.5)
    with pytest.raises(SpecError):
        scalar_eval("NOPE", Params(2), 0.5)


def test_check_condition_examples():
    r = check_condition("LEMMA21", Params(2, c=-0.1), 4096)
    assert r.verdict == "PASS" and r.min_value >= -1e-15  # f(0) = 0, rounding only
    assert cond_26(2, -0.1) == pytest.approx(0.0951612903, rel=1e-8)
    r = check_condition("LEMMA21", Params(2, c=-0.5), 4096)
    assert r.verdict == "FAIL"
    assert r.witness["x"] == 1.0
    assert r.witness["value"] == pytest.approx(1 / 1.75 - 0.75, rel=1e-12)
    r = check_condition("FALPHA_NONNEG", Params(2, alpha=0.5), 4096)
    assert r.verdict == "FAIL"
    assert r.witness["x"] == 1.0 and r.witness["value"] == pytest.approx(-0.25, rel=1e-12)


def test_check_condition_errors():
    with pytest.raises(SpecError):
        check_condition("COND32", Params(2), 4096)
    with pytest.raises(SpecError):
        check_condition("LEMMA21", Params(2, c=0), 10)
    with pytest.raises(SpecError):
        check_condition("LEMMA21", Params(2, c=0), 4096, tolerance=0)


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(11)
    for _ in range(20):
        pr = Params(1.0 + 5.0 * rng.random(), c=-3.0 + 3.9 * rng.random())
        for x in rng.uniform(0.05, 0.95, 100):
            h = 1e-5
            for f, df in (("F_LEMMA", "F_LEMMA_D1"), ("F_LEMMA_D1", "F_LEMMA_D2")):
                fd = (scalar_eval(f, pr, x + h) - scalar_eval(f, pr, x - h)) / (2 * h)
                exact = scalar_eval(df, pr, x)
                assert fd == pytest.approx(exact, rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 7.0])
def test_cond26_verdict_switches_at_c0(p):
    def passes(c):
        return check_condition("COND26", Params(p, c=c)).verdict == "PASS"

    lo, hi = -10.0, 0.99
    assert passes(hi) and not passes(lo)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if passes(mid) else (mid, hi)
    assert hi == pytest.approx(solve_c0(p), abs=1e-9)


def test_rhs32_nonincreasing_in_alpha():
    xs = np.linspace(0.01, 1.0, 200)
    alphas = np.linspace(0.05, 3.0, 40)
    for p in (1.5, 2.0, 4.0):
        for a1, a2 in zip(alphas, alphas[1:]):
            for x in xs:
                assert (scalar_eval("RHS32", Params(p, alpha=a2), x)
                        <= scalar_eval("RHS32", Params(p, alpha=a1), x) + 1e-12)


@pytest.mark.parametrize("p", [1.1, 1.5, 2.0, 5.0, 20.0])
def test_hadamard_bound(p):
    assert check_condition("HADAMARD", Params(p), 4096).verdict == "PASS"


@pytest.mark.parametrize("p", [1.1, 1.5, 2, 3, 5, 10, 100])
def test_c0_range(p):
    c0 = solve_c0(p)
    assert 1 - p < c0 < 0


def test_c0_closed_forms_and_degenerate():
    assert solve_c0(2) == pytest.approx(2 - math.sqrt(5), abs=1e-12)
    assert solve_c0(0.5) == pytest.approx((3 - math.sqrt(5)) / 4, abs=1e-12)
    with pytest.warns(DegenerateExponentWarning):
        assert solve_c0(1.0) == 0.0
    with pytest.raises(SpecError):
        solve_c0(0.0)


def test_reverse_flips_lemma_orientation():
    r = check_condition("LEMMA21", Params(0.5, c=0.1, reverse=True))
    assert r.orientation == "<="
    assert r.verdict == "PASS"
