"""numpy/scipy implementations of the decode kernels.

Mirrors bcilink._core; bcilink.kernels picks whichever is available.
Inputs are assumed validated (see bcilink.fbcca / bcilink.dsp wrappers).
"""
from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def row_space_basis(a: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (rows) of the row space of the centered matrix a.

    Rank-revealing: directions with singular values below rcond x the
    largest are dropped. Returns an (r, n_samples) array; r may be 0 for
    an all-constant input.
    """
    a = np.asarray(a, dtype=np.float64)
    ac = a - a.mean(axis=1, keepdims=True)
    _, s, vt = np.linalg.svd(ac, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        return vt[:0]
    r = int(np.sum(s >= rcond * s[0]))
    return vt[:r]


def max_corr_from_bases(ux: np.ndarray, uy: np.ndarray) -> float:
    """Largest singular value of the basis cross-product, clamped to [0, 1]."""
    m = ux @ uy.T
    if m.size == 0:
        return 0.0
    s = np.linalg.svd(m, compute_uv=False)
    return float(min(max(float(s[0]), 0.0), 1.0))


def max_canon_corr(x: np.ndarray, y: np.ndarray, rcond: float = 1e-10) -> float:
    """Largest canonical correlation between the row spaces of x and y."""
    return max_corr_from_bases(row_space_basis(x, rcond), row_space_basis(y, rcond))


def _sos_steady_state(sos: np.ndarray) -> np.ndarray:
    """Per-section DF2T state for a unit-step input (scaled by upstream DC gain)."""
    n_sections = sos.shape[0]
    zi = np.zeros((n_sections, 2))
    gain_in = 1.0
    for k in range(n_sections):
        b0, b1, b2, _, a1, a2 = sos[k]
        h0 = (b0 + b1 + b2) / (1.0 + a1 + a2)
        zi[k, 0] = gain_in * (h0 - b0)
        zi[k, 1] = gain_in * (b2 - a2 * h0)
        gain_in *= h0
    return zi


def sosfiltfilt_even(sos: np.ndarray, x: np.ndarray, padlen: int) -> np.ndarray:
    """Forward-backward SOS filtering with even-reflection edge padding.

    Matches scipy.signal.sosfiltfilt(padtype='even', padlen=padlen): the
    initial filter state is the steady-state response to the first padded
    sample, in both directions.
    """
    from scipy.signal import sosfilt

    sos = np.array(sos, dtype=np.float64)  # scipy needs a writable buffer
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    n = x.shape[-1]
    if padlen >= n:
        raise ValueError(f"padlen {padlen} must be < signal length {n}")
    if padlen > 0:
        ext = np.concatenate(
            [x[:, padlen:0:-1], x, x[:, -2:-(padlen + 2):-1]], axis=-1
        )
    else:
        ext = x
    zi = _sos_steady_state(sos)
    y = np.empty_like(ext)
    for i in range(ext.shape[0]):
        yi, _ = sosfilt(sos, ext[i], zi=zi * ext[i, 0])
        yrev = yi[::-1]
        yb, _ = sosfilt(sos, yrev, zi=zi * yrev[0])
        y[i] = yb[::-1]
    out = y[:, padlen:n + padlen] if padlen > 0 else y
    return out[0] if squeeze else out
