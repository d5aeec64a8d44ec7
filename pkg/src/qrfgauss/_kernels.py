"""Grid kernels for the wavefunction oracle.

Each kernel has a numba implementation and a pure-numpy one with identical
semantics.  The numba path is used when numba imports and the environment
variable ``QRF_DISABLE_NUMBA`` is unset or "0".
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("QRF_DISABLE_NUMBA", "0") in ("", "0")


# -- 4-point Lagrange interpolation along the last axis ----------------------


def _np_interp_rows(values, start, step, query):
    """Interpolate ``values[r, :]`` (uniform grid start + k*step) at ``query[r, :]``.

    Points whose 4-point stencil leaves the grid are set to zero; the second
    return value counts them.
    """
    n = values.shape[1]
    u = (query - start) / step
    i = np.floor(u).astype(np.int64)
    s = u - i
    inside = (i >= 1) & (i <= n - 3)
    ic = np.clip(i, 1, n - 3)
    w = (
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    )
    out = np.zeros(query.shape, dtype=values.dtype)
    for k in range(4):
        out += w[k] * np.take_along_axis(values, ic + (k - 1), axis=1)
    out[~inside] = 0.0
    return out, int(np.count_nonzero(~inside))


def _nb_interp_rows_impl(values, start, step, query):
    rows, nq = query.shape
    n = values.shape[1]
    out = np.zeros((rows, nq), dtype=values.dtype)
    outside = 0
    for r in range(rows):
        for q in range(nq):
            u = (query[r, q] - start) / step
            i = int(np.floor(u))
            if i < 1 or i > n - 3:
                outside += 1
                continue
            s = u - i
            w0 = -s * (s - 1.0) * (s - 2.0) / 6.0
            w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0
            w2 = -(s + 1.0) * s * (s - 2.0) / 2.0
            w3 = (s + 1.0) * s * (s - 1.0) / 6.0
            out[r, q] = (
                w0 * values[r, i - 1] + w1 * values[r, i] + w2 * values[r, i + 1] + w3 * values[r, i + 2]
            )
    return out, outside


# -- 4th-order central first derivative along the last axis -----------------


def _np_diff_rows(values, step, spacing):
    """d/dp along the last axis using points +-spacing, +-2*spacing; zero outside."""
    k = spacing
    pad = np.zeros(values.shape[:-1] + (values.shape[-1] + 4 * k,), dtype=values.dtype)
    pad[..., 2 * k : -2 * k] = values
    n = values.shape[-1]

    def sh(o):
        return pad[..., 2 * k + o : 2 * k + o + n]

    return (sh(-2 * k) - 8.0 * sh(-k) + 8.0 * sh(k) - sh(2 * k)) / (12.0 * k * step)


def _nb_diff_rows_impl(values, step, spacing):
    rows, n = values.shape
    k = spacing
    out = np.zeros((rows, n), dtype=values.dtype)
    h = 12.0 * k * step
    for r in range(rows):
        for i in range(n):
            acc = 0.0 * values[r, i]
            if i - 2 * k >= 0:
                acc += values[r, i - 2 * k]
            if i - k >= 0:
                acc -= 8.0 * values[r, i - k]
            if i + k < n:
                acc += 8.0 * values[r, i + k]
            if i + 2 * k < n:
                acc -= values[r, i + 2 * k]
            out[r, i] = acc / h
    return out


if numba is not None:
    _nb_interp_rows = numba.njit(cache=True)(_nb_interp_rows_impl)
    _nb_diff_rows = numba.njit(cache=True)(_nb_diff_rows_impl)
else:  # pragma: no cover
    _nb_interp_rows = _nb_interp_rows_impl
    _nb_diff_rows = _nb_diff_rows_impl


def interp_rows(values, start, step, query, use_numba=None):
    values = np.ascontiguousarray(values, dtype=np.complex128)
    query = np.ascontiguousarray(query, dtype=np.float64)
    if USE_NUMBA if use_numba is None else use_numba:
        return _nb_interp_rows(values, float(start), float(step), query)
    return _np_interp_rows(values, float(start), float(step), query)


def diff_axis(values, step, axis, spacing=1, use_numba=None):
    """First derivative of a 1D or 2D grid along ``axis``."""
    values = np.asarray(values, dtype=np.complex128)
    moved = np.moveaxis(values, axis, -1)
    flat = np.ascontiguousarray(moved.reshape(-1, moved.shape[-1]))
    if USE_NUMBA if use_numba is None else use_numba:
        d = _nb_diff_rows(flat, float(step), int(spacing))
    else:
        d = _np_diff_rows(flat, float(step), int(spacing))
    return np.moveaxis(d.reshape(moved.shape), -1, axis)
