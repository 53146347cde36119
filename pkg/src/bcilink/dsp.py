"""Preprocessing chain: band-pass / notch design, zero-phase filtering,
and amplitude-based artifact gating on the frontal channels.

Filters are maximally-flat (Butterworth) designs realized as second-order
sections; application is forward-backward for zero phase distortion, with
even-reflection padding of 3 x 2 x (section count) samples per edge.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import FilterDesignError, InvalidArgumentError
from .synth import ChannelModel, EegEpoch, is_frontal

ALLOWED_BANDPASS_ORDERS = (2, 4, 6, 8)


@dataclass(frozen=True)
class FilterCoeffs:
    """Cascade of second-order sections [b0, b1, b2, 1, a1, a2] per row."""

    sections: np.ndarray
    gain: float = 1.0

    def __post_init__(self):
        sec = np.asarray(self.sections, dtype=np.float64)
        sec.flags.writeable = False
        object.__setattr__(self, "sections", sec)
        if sec.ndim != 2 or sec.shape[1] != 6:
            raise FilterDesignError("sections must be an (n, 6) SOS array")

    @property
    def n_sections(self) -> int:
        return self.sections.shape[0]

    def poles(self) -> np.ndarray:
        roots = [np.roots([1.0, a1, a2]) for _, _, _, _, a1, a2 in self.sections]
        return np.concatenate(roots) if roots else np.empty(0, dtype=complex)

    def response_at(self, freq_hz: float, fs_hz: float) -> complex:
        """Transfer function on the unit circle at freq_hz (direct evaluation)."""
        z = np.exp(2j * np.pi * freq_hz / fs_hz)
        zinv = 1.0 / z
        h = complex(self.gain)
        for b0, b1, b2, _, a1, a2 in self.sections:
            h *= (b0 + b1 * zinv + b2 * zinv**2) / (1.0 + a1 * zinv + a2 * zinv**2)
        return h

    def magnitude_db(self, freq_hz: float, fs_hz: float) -> float:
        mag = abs(self.response_at(freq_hz, fs_hz))
        return 20.0 * np.log10(max(mag, 1e-300))


@lru_cache(maxsize=64)
def design_bandpass(order: int, lo_hz: float, hi_hz: float, fs_hz: float) -> FilterCoeffs:
    """Butterworth band-pass: -3 dB at both edges, flat at the band center.

    order is the overall filter order (prototype order x 2), one of 2/4/6/8.
    """
    if order not in ALLOWED_BANDPASS_ORDERS:
        raise FilterDesignError(f"order must be one of {ALLOWED_BANDPASS_ORDERS}")
    if not (0.0 < lo_hz < hi_hz < fs_hz / 2.0):
        raise FilterDesignError(
            f"band edges ({lo_hz}, {hi_hz}) invalid for fs {fs_hz}"
        )
    from scipy.signal import butter

    sos = butter(order // 2, [lo_hz, hi_hz], btype="bandpass", fs=fs_hz, output="sos")
    return FilterCoeffs(sos)


@lru_cache(maxsize=16)
def design_notch(center_hz: float, q: float, fs_hz: float) -> FilterCoeffs:
    """Second-order IIR notch: deep null at center, unity elsewhere."""
    if not (0.0 < center_hz < fs_hz / 2.0):
        raise FilterDesignError(f"notch center {center_hz} invalid for fs {fs_hz}")
    if q <= 0:
        raise FilterDesignError("quality factor must be positive")
    from scipy.signal import iirnotch

    b, a = iirnotch(center_hz, q, fs=fs_hz)
    return FilterCoeffs(np.hstack([b, a])[None, :])


def apply_zero_phase(coeffs: FilterCoeffs, epoch: EegEpoch) -> EegEpoch:
    """Filter each channel forward then backward (squared magnitude, zero phase)."""
    if epoch.n_samples < 1:
        raise InvalidArgumentError("empty epoch")
    padlen = 3 * 2 * coeffs.n_sections
    if padlen >= epoch.n_samples:
        raise InvalidArgumentError(
            f"epoch of {epoch.n_samples} samples too short for padlen {padlen}"
        )
    filtered = kernels.sosfiltfilt_even(coeffs.sections, epoch.samples, padlen)
    if coeffs.gain != 1.0:
        filtered = filtered * (coeffs.gain ** 2)
    return EegEpoch(
        filtered, epoch.fs_hz, epoch.channel_names, epoch.attended_index, epoch.seed
    )


@dataclass(frozen=True)
class GateResult:
    clean: bool
    offending_channels: tuple[str, ...] = ()


def gate_artifacts(epoch: EegEpoch, threshold_uv: float) -> GateResult:
    """Reject epochs whose frontal channels swing beyond threshold peak-to-peak.

    Decoding (non-frontal) channels never trigger the gate; contaminated
    epochs are routed to the not-recognized feedback path upstream.
    """
    if threshold_uv <= 0:
        raise InvalidArgumentError("threshold_uv must be positive")
    offending = []
    for i, name in enumerate(epoch.channel_names):
        if not is_frontal(name):
            continue
        row = epoch.samples[i]
        if float(row.max() - row.min()) > threshold_uv:
            offending.append(name)
    return GateResult(clean=not offending, offending_channels=tuple(offending))
