"""Hot loops, backed by the compiled extension when it is importable.

Set ``COPSONLAB_PURE_PYTHON=1`` to force the pure-Python fallback.
"""
import os

import numpy as np

from . import _pykernels

_impl = _pykernels
BACKEND = "python"
if not os.environ.get("COPSONLAB_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def _as_array(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def prefix_sum(a):
    """Compensated running sums ``out[i] = a[0] + ... + a[i]``."""
    return _impl.prefix_sum(_as_array(a))


def suffix_sum(a):
    """Compensated reverse running sums ``out[i] = a[i] + ... + a[-1]``."""
    return _impl.suffix_sum(_as_array(a))


def total_sum(a):
    return float(_impl.total_sum(_as_array(a)))


def leindler_recurrence(lam, tail_next, t):
    return _impl.leindler_recurrence(_as_array(lam), _as_array(tail_next), float(t))


def available_backends():
    """Map backend name to kernel module for every backend importable here."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
