import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from copsonlab import DataError, NotSummableError, SpecError
from copsonlab.sequences import (SequenceSpec, cumulate, materialize, parse_spec, spec_to_text,
                                 tail_bound, weights_from_spec)


def test_materialize_examples():
    np.testing.assert_array_equal(materialize(SequenceSpec.const(1), 5), np.ones(5))
    np.testing.assert_allclose(materialize(SequenceSpec.pow(-2), 3), [1, 0.25, 1 / 9], rtol=1e-15)
    np.testing.assert_allclose(materialize(SequenceSpec.extremal_copson(2, 2, 1), 3), [1, 0.5, 1 / 3],
                               rtol=1e-15)
    np.testing.assert_array_equal(materialize(SequenceSpec.unit(2), 3), [0, 1, 0])


def test_materialize_errors():
    with pytest.raises(SpecError):
        materialize(SequenceSpec.unit(5), 3)
    with pytest.raises(SpecError):
        materialize(SequenceSpec.explicit([1, 2]), 3)
    with pytest.raises(SpecError):
        SequenceSpec.const(0)
    with pytest.raises(SpecError):
        SequenceSpec.geom(1.5)


def test_cumulate_examples():
    w = cumulate([1, 1, 1])
    np.testing.assert_array_equal(w.prefix, [1, 2, 3])
    assert w.tail is None and not w.summable
    g = cumulate([0.5, 0.25, 0.125], (0.125, 0.125))
    np.testing.assert_array_equal(g.tail, [1.0, 0.5, 0.25])
    with pytest.raises(SpecError):
        cumulate([1.0, -1.0])
    with pytest.raises(SpecError):
        cumulate([1.0], (0.2, 0.1))


def test_pow_tail_interval_brackets_first_tail():
    w = weights_from_spec(SequenceSpec.pow(-2), 10)
    head = math.fsum(n ** -2.0 for n in range(1, 11))
    assert head + 1 / 11 - 1e-15 <= w.tail[0] <= head + 1 / 10 + 1e-15
    assert w.tail_halfwidth == pytest.approx(0.5 * (1 / 10 - 1 / 11))


def test_tail_bound_examples():
    assert tail_bound(SequenceSpec.pow(-2), 10) == pytest.approx((1 / 11, 1 / 10))
    assert tail_bound(SequenceSpec.geom(0.5, 1), 10) == (0.001953125, 0.001953125)
    assert tail_bound(SequenceSpec.unit(1), 10) == (0.0, 0.0)
    with pytest.raises(NotSummableError):
        tail_bound(SequenceSpec.const(1), 10)
    with pytest.raises(NotSummableError):
        tail_bound(SequenceSpec.pow(-1), 10)


@settings(max_examples=50, deadline=None)
@given(st.floats(-4.0, -1.05), st.integers(1, 400))
def test_tail_window_inside_bounds(a, N):
    spec = SequenceSpec.pow(a)
    window = math.fsum(materialize(spec, 2 * N)[N:])
    lo1, hi1 = tail_bound(spec, N)
    lo2, hi2 = tail_bound(spec, 2 * N)
    slack = (hi1 - lo1) + (hi2 - lo2)
    assert lo1 - hi2 - slack <= window <= hi1 - lo2 + slack


def test_tail_width_decreases():
    bounds = [tail_bound(SequenceSpec.pow(-1.5), N) for N in (10, 100, 1000, 10**4)]
    widths = [hi - lo for lo, hi in bounds]
    assert all(b < a for a, b in zip(widths, widths[1:]))


@pytest.mark.parametrize("text", ["const:1", "pow:-2", "geom:1/2", "geom:1/3:2"])
def test_prefix_and_tail_identities(text):
    spec = parse_spec(text)
    N = 2000 if spec.kind != "GEOM" else 400
    w = weights_from_spec(spec, N)
    v = w.values
    d = np.diff(np.concatenate(([0.0], w.prefix)))
    assert np.all(np.abs(d - v) <= 4 * np.spacing(w.prefix))
    if w.summable:
        total = w.tail + np.concatenate(([0.0], w.prefix[:-1]))
        np.testing.assert_allclose(total, total[0], rtol=1e-13)


def test_parse_and_print_roundtrip(tmp_path):
    for text in ("const:2", "pow:-1.5", "geom:0.5:3", "unit:4"):
        spec = parse_spec(text)
        assert parse_spec(spec_to_text(spec)) == spec
    f = tmp_path / "x.txt"
    f.write_text("1\n\n0.5\n")
    assert parse_spec(f"file:{f}").args == (1.0, 0.5)
    assert parse_spec("extremal-copson:0.5", p=2, c=2).power_exponent() == pytest.approx(-0.75)


def test_parse_errors(tmp_path):
    with pytest.raises(SpecError):
        parse_spec("pow")
    with pytest.raises(SpecError):
        parse_spec("weird:1")
    with pytest.raises(SpecError):
        parse_spec("extremal-copson:1")
    bad = tmp_path / "bad.txt"
    bad.write_text("1\nabc\n")
    with pytest.raises(DataError):
        parse_spec(f"file:{bad}")
    with pytest.raises(DataError):
        parse_spec(f"file:{tmp_path / 'missing.txt'}")
