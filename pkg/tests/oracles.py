"""Independent oracles used to derive expected values before testing.

Each function here is deliberately written against the definition, not the
implementation under test: direct polynomial evaluation for filter
responses, angle-grid search for canonical correlation, a bitwise CRC-32,
a plain rectangular-window periodogram for band power, breadth-first
reachability for coverage, and arbitrary-precision ITR.
"""
from __future__ import annotations

import math
from collections import deque

import numpy as np


def sos_magnitude_db(sections, freq_hz: float, fs_hz: float) -> float:
    """|H| in dB of an SOS cascade, evaluated directly on the unit circle."""
    w = 2.0 * math.pi * freq_hz / fs_hz
    z1 = complex(math.cos(-w), math.sin(-w))  # z^-1
    z2 = z1 * z1
    h = 1.0 + 0.0j
    for b0, b1, b2, a0, a1, a2 in np.asarray(sections):
        h *= (b0 + b1 * z1 + b2 * z2) / (a0 + a1 * z1 + a2 * z2)
    return 20.0 * math.log10(max(abs(h), 1e-300))


def grid_search_cca(x: np.ndarray, y: np.ndarray, n_angles: int = 3600) -> float:
    """Brute-force largest correlation of (w'x, v'y) over unit-vector angles.

    Only for 2-row matrices. Directions cover [0, pi); the correlation sign
    is absorbed by taking absolute values.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    assert x.shape[0] == 2 and y.shape[0] == 2
    angles = np.arange(n_angles) * (math.pi / n_angles)
    wx = np.stack([np.cos(angles), np.sin(angles)], axis=1)  # (n_angles, 2)

    def normalized_projections(m):
        proj = wx @ m
        proj = proj - proj.mean(axis=1, keepdims=True)
        norm = np.linalg.norm(proj, axis=1, keepdims=True)
        norm[norm == 0] = 1.0
        return proj / norm

    a = normalized_projections(x)
    b = normalized_projections(y)
    return float(np.abs(a @ b.T).max())


def crc32_ref(data: bytes) -> int:
    """Bitwise reflected CRC-32 (poly 0x04C11DB7, init/final 0xFFFFFFFF)."""
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            if crc & 1:
                crc = (crc >> 1) ^ 0xEDB88320  # reflected 0x04C11DB7
            else:
                crc >>= 1
    return crc ^ 0xFFFFFFFF


def periodogram_band_snr_db(
    x: np.ndarray, fs_hz: float, target_hz: float, n_harmonics: int
) -> float:
    """Narrowband SNR via a plain rectangular-window periodogram.

    Same band rule as the implementation (harmonic bands +-0.5 Hz, flanks
    out to 1.0 Hz, density-mean comparison) but a different estimator.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    psd = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(n, d=1.0 / fs_hz)
    harm = np.zeros(freqs.shape, dtype=bool)
    flank = np.zeros(freqs.shape, dtype=bool)
    for m in range(1, n_harmonics + 1):
        off = np.abs(freqs - m * target_hz)
        harm |= off <= 0.5
        flank |= (off > 0.5) & (off <= 1.0)
    flank &= ~harm
    num = psd[harm].mean()
    den = max(psd[flank].mean(), 1e-300)
    return 10.0 * math.log10(max(num, 1e-300) / den)


def demod_phase_deg(x: np.ndarray, fs_hz: float, freq_hz: float) -> float:
    """Phase of the freq_hz component via complex demodulation, in degrees."""
    n = len(x)
    t = np.arange(n) / fs_hz
    z = np.sum(x * np.exp(-2j * math.pi * freq_hz * t))
    return math.degrees(math.atan2(z.imag, z.real))


def bfs_reachable(free_mask: np.ndarray, start: tuple[int, int]) -> set[tuple[int, int]]:
    """4-connected reachable free cells from start; free_mask is (h, w) bool."""
    h, w = free_mask.shape
    sx, sy = start
    assert free_mask[sy, sx]
    seen = {start}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0)):
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and free_mask[ny, nx] and (nx, ny) not in seen:
                seen.add((nx, ny))
                queue.append((nx, ny))
    return seen


def itr_highprec(n_targets: int, accuracy, selection_time_s) -> float:
    """ITR in bits/min with 50-digit arithmetic (mpmath)."""
    import mpmath as mp

    mp.mp.dps = 50
    n = mp.mpf(n_targets)
    p = mp.mpf(accuracy)
    t = mp.mpf(selection_time_s)
    bits = mp.log(n, 2)
    if p > 0:
        bits += p * mp.log(p, 2)
    if p < 1:
        bits += (1 - p) * mp.log((1 - p) / (n - 1), 2)
    out = (60 / t) * bits
    return float(max(out, mp.mpf(0)))
