"""Sup-norm (Chebyshev) linear fitting: primal LP via scipy's HiGHS backend,
with Lawson's iteratively reweighted least squares as a fallback when no LP
solve is available or it fails."""

from __future__ import annotations

import numpy as np

try:
    from scipy.optimize import linprog
    _HAVE_LINPROG = True
except ImportError:  # pragma: no cover
    _HAVE_LINPROG = False


def sup_fit(basis, values, method="lp", lawson_iters=8):
    """min over coefficients of max_i |values_i - (basis @ coeffs)_i|.

    basis: (m, p) design matrix.  Returns (coeffs, sup_error).
    """
    basis = np.asarray(basis, dtype=float)
    values = np.asarray(values, dtype=float)
    m, p = basis.shape
    if method == "lp" and _HAVE_LINPROG:
        c = np.zeros(p + 1)
        c[-1] = 1.0
        A = np.zeros((2 * m, p + 1))
        A[:m, :p] = basis
        A[:m, -1] = -1.0
        A[m:, :p] = -basis
        A[m:, -1] = -1.0
        b = np.concatenate([values, -values])
        res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * (p + 1),
                      method="highs")
        if res.success:
            coeffs = res.x[:p]
            return coeffs, float(np.max(np.abs(values - basis @ coeffs)))
    return _lawson(basis, values, lawson_iters)


def _lawson(basis, values, iters):
    """Lawson's algorithm: weighted LS with weights multiplicatively updated by
    the residual magnitudes converges to the Chebyshev fit."""
    m = basis.shape[0]
    w = np.full(m, 1.0 / m)
    coeffs = None
    for _ in range(max(1, iters)):
        sw = np.sqrt(w)
        coeffs, *_ = np.linalg.lstsq(basis * sw[:, None], values * sw, rcond=None)
        r = np.abs(values - basis @ coeffs)
        w = w * r
        tot = w.sum()
        if tot <= 0:
            break
        w /= tot
    return coeffs, float(np.max(np.abs(values - basis @ coeffs)))
