"""Central finite-difference oracle used across the test-suite.

Works on raw numpy arrays only, so it never shares code with the tape it checks.
"""

import numpy as np


def numeric_grad(f, arrays, index, eps=1e-5):
    """d f(*arrays) / d arrays[index] by central differences (f returns a float)."""
    base = arrays[index]
    out = np.zeros_like(base, dtype=np.float64)
    it = np.nditer(base, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = base[i]
        base[i] = orig + eps
        fp = f(*arrays)
        base[i] = orig - eps
        fm = f(*arrays)
        base[i] = orig
        out[i] = (fp - fm) / (2 * eps)
    return out


def rel_error(analytic, numeric):
    """Max absolute deviation scaled by the largest numeric gradient entry."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(numeric).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)
