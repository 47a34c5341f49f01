import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from copsonlab import kernels

BACKENDS = kernels.available_backends()
finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


@pytest.fixture(params=sorted(BACKENDS))
def impl(request):
    return BACKENDS[request.param]


def test_cython_backend_built():
    assert "cython" in BACKENDS
    assert kernels.BACKEND == "cython"


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 200), elements=finite))
def test_prefix_matches_fsum(a):
    for mod in BACKENDS.values():
        out = mod.prefix_sum(np.ascontiguousarray(a))
        for i in (0, len(a) // 2, len(a) - 1):
            assert out[i] == pytest.approx(math.fsum(a[: i + 1]), rel=1e-12, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 200), elements=finite))
def test_suffix_and_total_match_fsum(a):
    for mod in BACKENDS.values():
        a = np.ascontiguousarray(a)
        assert mod.suffix_sum(a)[0] == pytest.approx(math.fsum(a), rel=1e-12, abs=1e-9)
        assert mod.total_sum(a) == pytest.approx(math.fsum(a), rel=1e-12, abs=1e-9)


def test_compensation_beats_naive(impl):
    # 1 followed by many tiny terms that a plain running sum drops
    a = np.concatenate(([1.0], np.full(10**5, 1e-17)))
    assert impl.total_sum(a) == pytest.approx(1.0 + 1e-12, rel=1e-15)
    assert impl.prefix_sum(a)[-1] == pytest.approx(1.0 + 1e-12, rel=1e-15)


def test_backends_agree_bitwise():
    rng = np.random.default_rng(3)
    a = rng.lognormal(size=5000)
    lam = np.arange(1, 5001, dtype=float) ** -2.0
    tail_next = np.append(lam[::-1].cumsum()[::-1][1:], 0.0) + 1.0 / 5000
    outs = [(m.prefix_sum(a), m.suffix_sum(a), m.total_sum(a), m.leindler_recurrence(lam, tail_next, 0.5))
            for m in BACKENDS.values()]
    for other in outs[1:]:
        for x, y in zip(outs[0], other):
            np.testing.assert_array_equal(x, y)


def test_leindler_recurrence_direct(impl):
    lam = np.array([0.5, 0.25, 0.125])
    tail_next = np.array([0.5, 0.25, 0.125])
    w = impl.leindler_recurrence(lam, tail_next, 0.5)
    np.testing.assert_allclose(w[:3], [1.0, 0.5, 1.25])


def test_pure_python_switch():
    env = dict(os.environ, COPSONLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import copsonlab; print(copsonlab.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
