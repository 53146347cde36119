"""Filter-bank canonical correlation decoder.

Each candidate target gets a harmonic sin/cos reference set. The epoch is
standardized per channel, split into sub-bands whose low cutoffs sit at the
harmonic starting frequencies and whose common high cutoff is the 4th
harmonic of the highest stimulus, and every (sub-band, target) pair yields
the largest canonical correlation between the filtered channels and the
reference set. Fused score per target: sum over sub-bands of
w(n) * rho^2 with w(n) = n^(-weight_a) + weight_b. The winner is the
argmax; recognition requires the best-vs-runner-up margin to clear the
configured threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import dsp, kernels
from .errors import DegenerateInputError, InvalidArgumentError
from .stimulus import StimulusConfig
from .synth import EegEpoch, is_frontal

DEFAULT_N_HARMONICS = 4
DEFAULT_N_SUBBANDS = 4
DEFAULT_WEIGHT_A = 1.25
DEFAULT_WEIGHT_B = 0.25
DEFAULT_DECISION_MARGIN = 0.05
HARMONIC_CEILING = 4  # common high cutoff sits at the 4th harmonic


@dataclass(frozen=True)
class ReferenceSet:
    """sin/cos rows at the target frequency and its harmonics."""

    target_hz: float
    n_harmonics: int
    signals: np.ndarray  # (2 * n_harmonics, n_samples)

    def __post_init__(self):
        sig = np.asarray(self.signals, dtype=np.float64)
        sig.flags.writeable = False
        object.__setattr__(self, "signals", sig)
        if sig.shape[0] != 2 * self.n_harmonics:
            raise InvalidArgumentError("reference set must hold a sin/cos pair per harmonic")


@dataclass(frozen=True)
class FilterBank:
    """Sub-band edges: lo = n x min stimulus, common hi = 4 x max stimulus."""

    subbands: tuple[tuple[float, float], ...]

    @property
    def n_subbands(self) -> int:
        return len(self.subbands)


@dataclass(frozen=True)
class FbccaConfig:
    stimulus: StimulusConfig
    n_harmonics: int = DEFAULT_N_HARMONICS
    n_subbands: int = DEFAULT_N_SUBBANDS
    weight_a: float = DEFAULT_WEIGHT_A
    weight_b: float = DEFAULT_WEIGHT_B
    decision_margin: float = DEFAULT_DECISION_MARGIN
    fs_hz: float = 250.0
    subband_order: int = 8

    def __post_init__(self):
        if self.n_harmonics < 1:
            raise InvalidArgumentError("n_harmonics must be >= 1")
        if self.n_subbands < 1:
            raise InvalidArgumentError("n_subbands must be >= 1")
        if self.decision_margin < 0:
            raise InvalidArgumentError("decision_margin must be >= 0")
        if self.n_subbands * self.stimulus.min_hz >= HARMONIC_CEILING * self.stimulus.max_hz:
            raise InvalidArgumentError(
                f"{self.n_subbands} sub-bands exceed the "
                f"{HARMONIC_CEILING} x {self.stimulus.max_hz} Hz ceiling"
            )

    def subband_weights(self) -> np.ndarray:
        n = np.arange(1, self.n_subbands + 1, dtype=np.float64)
        return n ** (-self.weight_a) + self.weight_b


@dataclass(frozen=True)
class Decision:
    """Decoder output: winning index, per-target fused scores, margin."""

    predicted_index: int
    scores: tuple[float, ...]
    margin: float
    recognized: bool


def build_references(
    target_hz: float, n_harmonics: int, fs_hz: float, n_samples: int
) -> ReferenceSet:
    """Reference rows sin(2 pi m f t), cos(2 pi m f t) for m = 1..n_harmonics."""
    if n_harmonics < 1 or n_samples < 1:
        raise InvalidArgumentError("n_harmonics and n_samples must be >= 1")
    if n_harmonics * target_hz >= fs_hz / 2.0:
        raise InvalidArgumentError(
            f"harmonic {n_harmonics * target_hz} Hz at or above Nyquist {fs_hz / 2}"
        )
    t = np.arange(n_samples) / fs_hz
    rows = []
    for m in range(1, n_harmonics + 1):
        w = 2.0 * np.pi * m * target_hz * t
        rows.append(np.sin(w))
        rows.append(np.cos(w))
    return ReferenceSet(target_hz, n_harmonics, np.vstack(rows))


def build_filter_bank(stimulus: StimulusConfig, n_subbands: int) -> FilterBank:
    """Sub-band n spans [n x min stimulus, 4 x max stimulus] Hz."""
    if n_subbands < 1:
        raise InvalidArgumentError("n_subbands must be >= 1")
    hi = HARMONIC_CEILING * stimulus.max_hz
    if n_subbands * stimulus.min_hz >= hi:
        raise InvalidArgumentError(
            f"{n_subbands} x {stimulus.min_hz} Hz >= ceiling {hi} Hz"
        )
    bands = tuple((n * stimulus.min_hz, hi) for n in range(1, n_subbands + 1))
    return FilterBank(bands)


def cca_max_corr(x: np.ndarray, y: np.ndarray, rcond: float = 1e-10) -> float:
    """Largest canonical correlation between row sets x and y.

    Rows are centered; rank-deficient directions below rcond x the largest
    singular value are truncated before correlating the row-space bases.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2:
        raise InvalidArgumentError("inputs must be 2-D (rows x samples)")
    if x.shape[1] != y.shape[1]:
        raise InvalidArgumentError(
            f"sample counts differ: {x.shape[1]} vs {y.shape[1]}"
        )
    n = x.shape[1]
    if n < max(x.shape[0], y.shape[0]) + 2:
        raise InvalidArgumentError(
            f"{n} samples too few for {max(x.shape[0], y.shape[0])} rows"
        )
    for name, a in (("x", x), ("y", y)):
        if not np.isfinite(a).all():
            raise InvalidArgumentError(f"{name} contains non-finite values")
        if np.ptp(a, axis=1).max() == 0.0:
            raise DegenerateInputError(f"all rows of {name} are constant")
    return kernels.max_canon_corr(x, y, rcond)


@lru_cache(maxsize=256)
def _cached_reference_basis(
    target_hz: float, n_harmonics: int, fs_hz: float, n_samples: int
) -> np.ndarray:
    refs = build_references(target_hz, n_harmonics, fs_hz, n_samples)
    basis = kernels.row_space_basis(refs.signals)
    basis.flags.writeable = False
    return basis


def _standardize(samples: np.ndarray) -> np.ndarray:
    mean = samples.mean(axis=1, keepdims=True)
    std = samples.std(axis=1, keepdims=True)
    if float(std.max()) == 0.0:
        raise DegenerateInputError("all decode channels are flat")
    std[std == 0.0] = 1.0  # flat channels carry nothing; keep them at zero
    return (samples - mean) / std


def classify(epoch: EegEpoch, config: FbccaConfig, bank: FilterBank) -> Decision:
    """Run the full decode: standardize, sub-band filter, correlate, fuse.

    Scores are fused in fixed target order so results are bit-identical
    regardless of any internal evaluation parallelism.
    """
    expected = build_filter_bank(config.stimulus, config.n_subbands)
    if bank.subbands != expected.subbands:
        raise InvalidArgumentError("filter bank does not match the decoder config")
    if abs(epoch.fs_hz - config.fs_hz) > 1e-9:
        raise InvalidArgumentError(
            f"epoch fs {epoch.fs_hz} differs from config fs {config.fs_hz}"
        )
    decode_rows = [i for i, c in enumerate(epoch.channel_names) if not is_frontal(c)]
    if not decode_rows:
        raise InvalidArgumentError("epoch has no decode (non-frontal) channels")
    data = _standardize(epoch.samples[decode_rows])

    n = data.shape[1]
    if n < 2 * config.n_harmonics + 2 or n < len(decode_rows) + 2:
        raise InvalidArgumentError("epoch too short to correlate against references")
    ref_bases = [
        _cached_reference_basis(f, config.n_harmonics, config.fs_hz, n)
        for f in config.stimulus.frequencies_hz
    ]

    weights = config.subband_weights()
    scores = np.zeros(config.stimulus.count)
    for bi, (lo, hi) in enumerate(bank.subbands):
        coeffs = dsp.design_bandpass(config.subband_order, lo, hi, config.fs_hz)
        padlen = 3 * 2 * coeffs.n_sections
        if padlen >= n:
            raise InvalidArgumentError("epoch too short for sub-band filtering")
        sub = kernels.sosfiltfilt_even(coeffs.sections, data, padlen)
        ux = kernels.row_space_basis(sub)
        if ux.shape[0] == 0:
            raise DegenerateInputError("sub-band epoch has no variance")
        for k, uy in enumerate(ref_bases):
            rho = kernels.max_corr_from_bases(ux, uy)
            scores[k] += weights[bi] * rho * rho

    predicted = int(np.argmax(scores))
    if len(scores) > 1:
        runner_up = float(np.max(np.delete(scores, predicted)))
        margin = float(scores[predicted]) - runner_up
    else:
        margin = float(scores[0])
    return Decision(
        predicted_index=predicted,
        scores=tuple(float(s) for s in scores),
        margin=margin,
        recognized=margin >= config.decision_margin,
    )
