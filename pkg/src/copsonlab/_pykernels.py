"""Pure-Python reference kernels (Neumaier-compensated accumulation).

These define the semantics; ``_ckernels`` must agree with them to the last bit.
"""
import numpy as np


def _scan(values):
    s = 0.0
    comp = 0.0
    for v in values:
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        yield s + comp


def prefix_sum(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    return np.fromiter(_scan(a.tolist()), dtype=np.float64, count=a.shape[0])


def suffix_sum(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    out = np.fromiter(_scan(a[::-1].tolist()), dtype=np.float64, count=a.shape[0])
    return out[::-1].copy()


def total_sum(a):
    s = 0.0
    for s in _scan(np.asarray(a, dtype=np.float64).tolist()):
        pass
    return s


def leindler_recurrence(lam, tail_next, t):
    """w[0] = 1 and w[i+1] = t * sum_{k<=i} lam[k] w[k] / tail_next[i]."""
    lam = np.asarray(lam, dtype=np.float64).tolist()
    tail_next = np.asarray(tail_next, dtype=np.float64).tolist()
    w = [1.0]
    s = 0.0
    comp = 0.0
    for i, lam_i in enumerate(lam):
        v = lam_i * w[i]
        u = s + v
        if abs(s) >= abs(v):
            comp += (s - u) + v
        else:
            comp += (v - u) + s
        s = u
        w.append(t * (s + comp) / tail_next[i])
    return np.array(w, dtype=np.float64)
