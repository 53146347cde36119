"""Deterministic synthetic EEG with a steady-state visual evoked component.

Epochs are the ground truth for every downstream accuracy claim: the evoked
response is a sum of the first four stimulus harmonics with geometrically
decaying amplitudes, scaled per channel by the montage's pickup gain, on top
of a pink/white noise mix and a background alpha-band rhythm. The evoked
power is calibrated narrowband: snr_db is the ratio of evoked power to the
noise power occupying the same ±0.5 Hz harmonic bands on the highest-gain
channel, so negative targets remain meaningful.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AliasingConfigError, InvalidArgumentError
from .stimulus import StimulusConfig

N_EVOKED_HARMONICS = 4
BLINK_DURATION_S = 0.3
HARMONIC_BAND_HZ = 0.5   # evoked/noise band half-width used for calibration

DEFAULT_FS_HZ = 250.0


def is_frontal(name: str) -> bool:
    """Frontal montage positions by 10-20 prefix (F, Fp, AF...)."""
    return name.startswith(("F", "AF"))


@dataclass(frozen=True)
class ChannelModel:
    """Montage with per-channel pickup gains.

    Occipital/parietal channels carry the evoked response; frontal channels
    carry blink artifacts. CPz is the reference, AFz the ground.
    """

    channel_names: tuple[str, ...]
    ssvep_gain: tuple[float, ...]
    blink_gain: tuple[float, ...]
    reference_name: str = "CPz"
    ground_name: str = "AFz"

    def __post_init__(self):
        n = len(self.channel_names)
        if len(self.ssvep_gain) != n or len(self.blink_gain) != n:
            raise InvalidArgumentError("gain lists must match channel count")
        for g in (*self.ssvep_gain, *self.blink_gain):
            if not (0.0 <= g <= 1.0):
                raise InvalidArgumentError(f"gain {g} outside [0, 1]")
        if self.reference_name != "CPz":
            raise InvalidArgumentError("reference electrode must be CPz")
        if self.ground_name != "AFz":
            raise InvalidArgumentError("ground electrode must be AFz")
        front = [i for i, c in enumerate(self.channel_names) if is_frontal(c)]
        occ = [i for i in range(n) if i not in front]
        if front and occ:
            if min(self.ssvep_gain[i] for i in occ) < max(self.ssvep_gain[i] for i in front):
                raise InvalidArgumentError(
                    "occipital ssvep_gain must dominate frontal ssvep_gain"
                )
            if min(self.blink_gain[i] for i in front) < max(self.blink_gain[i] for i in occ):
                raise InvalidArgumentError(
                    "frontal blink_gain must dominate occipital blink_gain"
                )

    @property
    def frontal_indices(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.channel_names) if is_frontal(c))

    @property
    def decode_indices(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.channel_names) if not is_frontal(c))

    @property
    def best_channel_index(self) -> int:
        """First channel with the largest evoked pickup (SNR reference)."""
        gains = self.ssvep_gain
        return int(max(range(len(gains)), key=lambda i: (gains[i], -i)))


def default_montage() -> ChannelModel:
    """9-channel set: parieto-occipital pickup plus Fp1/Fp2 for blinks."""
    return ChannelModel(
        channel_names=("Pz", "PO3", "POz", "PO4", "O1", "Oz", "O2", "Fp1", "Fp2"),
        ssvep_gain=(0.85, 0.95, 0.95, 0.95, 1.00, 1.00, 1.00, 0.05, 0.05),
        blink_gain=(0.15, 0.10, 0.10, 0.10, 0.05, 0.05, 0.05, 1.00, 1.00),
    )


@dataclass(frozen=True)
class NoiseModel:
    """Background activity mix.

    snr_db calibrates evoked power against the noise inside the harmonic
    measurement bands (see module docstring). noise_rms_uv sets the broadband
    scale; alpha_amp_uv the RMS of an 8-12 Hz rhythm added on top.
    """

    snr_db: float = 10.0
    pink_fraction: float = 0.5
    alpha_amp_uv: float = 2.0
    harmonic_decay: float = 0.5
    noise_rms_uv: float = 10.0

    def __post_init__(self):
        if not (0.0 <= self.pink_fraction <= 1.0):
            raise InvalidArgumentError("pink_fraction outside [0, 1]")
        if not (0.0 < self.harmonic_decay <= 1.0):
            raise InvalidArgumentError("harmonic_decay outside (0, 1]")
        if self.noise_rms_uv <= 0:
            raise InvalidArgumentError("noise_rms_uv must be positive")
        if self.alpha_amp_uv < 0:
            raise InvalidArgumentError("alpha_amp_uv must be non-negative")


@dataclass
class EegEpoch:
    """channels x samples block of scalp potentials in microvolts."""

    samples: np.ndarray
    fs_hz: float
    channel_names: tuple[str, ...]
    attended_index: int | None = None
    seed: int | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise InvalidArgumentError("samples must be channels x time")
        if self.samples.shape[0] != len(self.channel_names):
            raise InvalidArgumentError("row count must equal channel count")
        if self.samples.shape[1] < 1:
            raise InvalidArgumentError("epoch must contain at least one sample")
        if not np.isfinite(self.samples).all():
            raise InvalidArgumentError("epoch contains non-finite samples")
        if self.fs_hz <= 0:
            raise InvalidArgumentError("fs_hz must be positive")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fs_hz

    def copy(self) -> "EegEpoch":
        return EegEpoch(
            self.samples.copy(), self.fs_hz, self.channel_names,
            self.attended_index, self.seed,
        )


def required_fs_hz(stimulus: StimulusConfig) -> float:
    """Minimum rate representing the 4th harmonic of the highest stimulus."""
    return 2.0 * N_EVOKED_HARMONICS * stimulus.max_hz


def _pink_filter_sos(fs_hz: float) -> np.ndarray:
    # Three first-order shelf sections approximating a -10 dB/decade slope.
    # Matched-z pole/zero pairs; absolute gain is irrelevant (renormalized).
    poles_hz = (0.7, 5.0, 35.0)
    ratio = 10.0 ** (22.0 / 60.0)  # ~2.33, tuned for the 0.7-110 Hz span
    sos = []
    for fp in poles_hz:
        fz = fp * ratio
        p = math.exp(-2.0 * math.pi * fp / fs_hz)
        z = math.exp(-2.0 * math.pi * fz / fs_hz)
        sos.append([1.0, -z, 0.0, 1.0, -p, 0.0])
    return np.asarray(sos)


def _unit_rms_rows(x: np.ndarray) -> np.ndarray:
    rms = np.sqrt(np.mean(x * x, axis=1, keepdims=True))
    rms[rms == 0] = 1.0
    return x / rms


# Effective width one ±0.5 Hz band occupies on the reference 0.5 Hz
# analysis grid (bins at -0.5, 0, +0.5); keeps calibration independent of
# epoch length.
CAL_BAND_WIDTH_HZ = 1.5


def _harmonic_masks(
    freqs: np.ndarray, df: float, target_hz: float, n_harmonics: int
) -> tuple[np.ndarray, np.ndarray]:
    """Bin masks for the harmonic bands and their flanks.

    The half-width widens to one bin when the grid is coarser than 0.5 Hz,
    so every band keeps at least one bin at any epoch length; flanks cover
    an annulus of the same total width just outside.
    """
    half = max(HARMONIC_BAND_HZ, 1.001 * df)
    harm = np.zeros(freqs.shape, dtype=bool)
    flank = np.zeros(freqs.shape, dtype=bool)
    for m in range(1, n_harmonics + 1):
        off = np.abs(freqs - m * target_hz)
        harm |= off <= half
        flank |= (off > half) & (off <= 2.0 * half)
    flank &= ~harm
    return harm, flank


def _periodogram(x: np.ndarray, fs_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """One-sided rectangular periodogram; bin sum equals mean(x^2)."""
    n = x.shape[-1]
    spec = np.abs(np.fft.rfft(x)) ** 2 / (n * n)
    if n % 2 == 0:
        spec[1:-1] *= 2.0
    else:
        spec[1:] *= 2.0
    return np.fft.rfftfreq(n, d=1.0 / fs_hz), spec


def harmonic_band_power(
    x: np.ndarray, fs_hz: float, target_hz: float, n_harmonics: int
) -> tuple[float, float]:
    """Power sums in the harmonic bands and their width-matched flanks."""
    freqs, spec = _periodogram(x, fs_hz)
    df = fs_hz / x.shape[-1]
    harm, flank = _harmonic_masks(freqs, df, target_hz, n_harmonics)
    n_h, n_f = int(harm.sum()), int(flank.sum())
    if n_h == 0 or n_f == 0:
        raise InvalidArgumentError("harmonic bands unresolvable at this length")
    return float(spec[harm].sum()), float(spec[flank].sum()) * (n_h / n_f)


def _calibration_band_noise(
    x: np.ndarray, fs_hz: float, target_hz: float, n_harmonics: int
) -> float:
    """Noise power of CAL_BAND_WIDTH_HZ per harmonic at the local density.

    Duration-independent: estimates the per-Hz density over a ±2 Hz
    neighborhood of each harmonic (wide enough to tame chi-square scatter
    of single-realization bin estimates) and scales it to the fixed
    reference width.
    """
    freqs, spec = _periodogram(x, fs_hz)
    df = fs_hz / x.shape[-1]
    half = max(4.0 * HARMONIC_BAND_HZ, 1.001 * df)
    nb = np.zeros(freqs.shape, dtype=bool)
    for m in range(1, n_harmonics + 1):
        nb |= np.abs(freqs - m * target_hz) <= half
    n_bins = int(nb.sum())
    if n_bins == 0:
        raise InvalidArgumentError("harmonic bands unresolvable at this length")
    density = float(spec[nb].sum()) / (n_bins * df)
    return density * CAL_BAND_WIDTH_HZ * n_harmonics


def generate_epoch(
    stimulus: StimulusConfig,
    attended_index: int,
    channels: ChannelModel,
    noise: NoiseModel,
    duration_s: float,
    fs_hz: float = DEFAULT_FS_HZ,
    seed: int = 0,
) -> EegEpoch:
    """Simulate one epoch with the attended target's evoked response.

    Deterministic: identical arguments (including seed) give bit-identical
    samples. Draw order is fixed (white core, pink core, alpha core).
    """
    if not (0 <= attended_index < stimulus.count):
        raise InvalidArgumentError(
            f"attended_index {attended_index} outside [0, {stimulus.count})"
        )
    if duration_s <= 0:
        raise InvalidArgumentError("duration_s must be positive")
    if fs_hz < required_fs_hz(stimulus):
        raise AliasingConfigError(
            f"fs {fs_hz} Hz cannot represent the 4th harmonic of "
            f"{stimulus.max_hz} Hz (needs >= {required_fs_hz(stimulus)} Hz)"
        )

    n = int(round(duration_s * fs_hz))
    if n < 1:
        raise InvalidArgumentError("duration too short for one sample")
    n_ch = len(channels.channel_names)
    rng = np.random.default_rng(seed)
    t = np.arange(n) / fs_hz

    white = rng.standard_normal((n_ch, n))
    pink_src = rng.standard_normal((n_ch, n))
    alpha_src = rng.standard_normal((n_ch, n))

    from scipy.signal import sosfilt

    pink = sosfilt(_pink_filter_sos(fs_hz), pink_src, axis=-1)
    core = (
        math.sqrt(noise.pink_fraction) * _unit_rms_rows(pink)
        + math.sqrt(1.0 - noise.pink_fraction) * _unit_rms_rows(white)
    )
    background = _unit_rms_rows(core) * noise.noise_rms_uv
    if noise.alpha_amp_uv > 0:
        from scipy.signal import butter

        alpha_sos = butter(2, [8.0, 12.0], btype="bandpass", fs=fs_hz, output="sos")
        alpha = sosfilt(alpha_sos, alpha_src, axis=-1)
        background = background + _unit_rms_rows(alpha) * noise.alpha_amp_uv

    f0 = stimulus.frequencies_hz[attended_index]
    phi = stimulus.phases_rad[attended_index]
    evoked = np.zeros(n)
    for m in range(1, N_EVOKED_HARMONICS + 1):
        amp = noise.harmonic_decay ** (m - 1)
        evoked += amp * np.sin(2.0 * math.pi * m * f0 * t + m * phi)

    ref = channels.best_channel_index
    band_noise = _calibration_band_noise(
        background[ref], fs_hz, f0, N_EVOKED_HARMONICS
    )
    gains = np.asarray(channels.ssvep_gain)
    evoked_ref_power = float(np.mean((gains[ref] * evoked) ** 2))
    target_power = 10.0 ** (noise.snr_db / 10.0) * band_noise
    scale = math.sqrt(target_power / evoked_ref_power) if evoked_ref_power > 0 else 0.0

    samples = background + scale * gains[:, None] * evoked[None, :]
    return EegEpoch(samples, fs_hz, channels.channel_names, attended_index, seed)


def measure_snr(epoch: EegEpoch, target_hz: float, n_harmonics: int,
                channel: int | str | None = None) -> float:
    """Narrowband SNR in dB: harmonic-band power over flanking-band power.

    Averaged Hann-windowed periodograms (Welch, 2 s segments, 50% overlap);
    band powers are compared as per-bin densities so the harmonic and flank
    estimates cover equal effective widths. With no channel given, the
    channel with the strongest harmonic-band content is used.
    """
    if n_harmonics < 1:
        raise InvalidArgumentError("n_harmonics must be >= 1")
    if n_harmonics * target_hz >= epoch.fs_hz / 2.0:
        raise InvalidArgumentError(
            f"harmonic {n_harmonics * target_hz} Hz at or above Nyquist"
        )
    if epoch.duration_s < 1.0:
        raise InvalidArgumentError("epoch must be at least 1 s for SNR estimation")

    from scipy.signal import welch

    nperseg = min(epoch.n_samples, int(round(2.0 * epoch.fs_hz)))
    freqs, psd = welch(
        epoch.samples, fs=epoch.fs_hz, window="hann",
        nperseg=nperseg, noverlap=nperseg // 2, axis=-1,
    )
    harm, flank = _harmonic_masks(
        freqs, epoch.fs_hz / nperseg, target_hz, n_harmonics
    )
    if not harm.any() or not flank.any():
        raise InvalidArgumentError("bands unresolvable at this epoch length")

    harm_mean = psd[:, harm].mean(axis=-1)
    flank_mean = psd[:, flank].mean(axis=-1)
    if isinstance(channel, str):
        channel = epoch.channel_names.index(channel)
    if channel is None:
        channel = int(np.argmax(harm_mean))
    num = float(harm_mean[channel])
    den = float(flank_mean[channel])
    if den <= 0.0:
        den = np.finfo(float).tiny
    if num <= 0.0:
        num = np.finfo(float).tiny
    return 10.0 * math.log10(num / den)


def inject_blink(
    epoch: EegEpoch,
    channels: ChannelModel,
    onset_s: float,
    amplitude_uv: float,
) -> EegEpoch:
    """Add a 300 ms half-sinusoid blink transient, scaled by blink_gain.

    Pure: returns a new epoch, the input is untouched. The pulse peaks at
    onset + 150 ms with exactly amplitude_uv on a unit-gain channel.
    """
    if amplitude_uv <= 0:
        raise InvalidArgumentError("amplitude_uv must be positive")
    if not (0.0 <= onset_s < epoch.duration_s):
        raise InvalidArgumentError(
            f"onset {onset_s} s outside epoch of {epoch.duration_s} s"
        )
    if epoch.channel_names != channels.channel_names:
        raise InvalidArgumentError("epoch montage does not match channel model")

    out = epoch.copy()
    fs = epoch.fs_hz
    i0 = int(round(onset_s * fs))
    i1 = min(epoch.n_samples, i0 + int(round(BLINK_DURATION_S * fs)) + 1)
    tau = (np.arange(i0, i1) / fs) - onset_s
    pulse = amplitude_uv * np.sin(math.pi * tau / BLINK_DURATION_S)
    pulse[tau > BLINK_DURATION_S] = 0.0
    gains = np.asarray(channels.blink_gain)
    out.samples[:, i0:i1] += gains[:, None] * pulse[None, :]
    return out


# --- CSV export/import ------------------------------------------------------

_META_RE = re.compile(r"^#meta\s+attended_index=(\S+)\s+seed=(\S+)\s*$")


def epoch_to_csv(epoch: EegEpoch, path: str | Path) -> None:
    """Write an epoch: '#meta' sidecar line, header, one row per sample.

    Values carry 6 significant digits; the leading fs_hz column repeats the
    sampling rate so each file is self-describing.
    """
    path = Path(path)
    att = "none" if epoch.attended_index is None else str(epoch.attended_index)
    seed = "none" if epoch.seed is None else str(epoch.seed)
    lines = [f"#meta attended_index={att} seed={seed}"]
    lines.append(",".join(["fs_hz", *epoch.channel_names]))
    fs_txt = f"{epoch.fs_hz:g}"
    for col in epoch.samples.T:
        lines.append(",".join([fs_txt, *(f"{v:.6g}" for v in col)]))
    path.write_text("\n".join(lines) + "\n")


def epoch_from_csv(path: str | Path) -> EegEpoch:
    """Inverse of epoch_to_csv (up to 6-significant-digit quantization)."""
    lines = Path(path).read_text().splitlines()
    if len(lines) < 3:
        raise InvalidArgumentError(f"{path}: not an epoch CSV")
    m = _META_RE.match(lines[0])
    if not m:
        raise InvalidArgumentError(f"{path}: missing #meta sidecar line")
    att = None if m.group(1) == "none" else int(m.group(1))
    seed = None if m.group(2) == "none" else int(m.group(2))
    header = lines[1].split(",")
    if header[0] != "fs_hz":
        raise InvalidArgumentError(f"{path}: header must start with fs_hz")
    names = tuple(header[1:])
    rows = [line.split(",") for line in lines[2:] if line]
    fs = float(rows[0][0])
    data = np.array([[float(v) for v in r[1:]] for r in rows]).T
    return EegEpoch(data, fs, names, att, seed)
