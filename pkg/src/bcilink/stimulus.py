"""Flicker stimulus configuration: the frequency-coded target set."""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidArgumentError

MIN_STIMULUS_HZ = 6.0
MAX_STIMULUS_HZ = 15.0
MIN_SPACING_HZ = 0.2

DEFAULT_FREQUENCIES_HZ = (8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 15.0)


@dataclass(frozen=True)
class StimulusConfig:
    """Ordered flicker frequencies (Hz) with per-target initial phases (rad).

    Frequencies must lie in [6, 15] Hz, strictly increasing with at least
    0.2 Hz spacing. An empty phases tuple means all-zero phases.
    """

    frequencies_hz: tuple[float, ...] = DEFAULT_FREQUENCIES_HZ
    phases_rad: tuple[float, ...] = ()

    def __post_init__(self):
        freqs = tuple(float(f) for f in self.frequencies_hz)
        if not freqs:
            raise InvalidArgumentError("stimulus needs at least one frequency")
        phases = tuple(float(p) for p in self.phases_rad)
        if not phases:
            phases = (0.0,) * len(freqs)
        object.__setattr__(self, "frequencies_hz", freqs)
        object.__setattr__(self, "phases_rad", phases)
        for f in freqs:
            if not (MIN_STIMULUS_HZ <= f <= MAX_STIMULUS_HZ):
                raise InvalidArgumentError(
                    f"stimulus frequency {f} Hz outside [{MIN_STIMULUS_HZ}, {MAX_STIMULUS_HZ}]"
                )
        for lo, hi in zip(freqs, freqs[1:]):
            if hi - lo < MIN_SPACING_HZ:
                raise InvalidArgumentError(
                    f"stimulus frequencies {lo} and {hi} closer than {MIN_SPACING_HZ} Hz"
                )
        if len(phases) != len(freqs):
            raise InvalidArgumentError(
                f"{len(phases)} phases for {len(freqs)} frequencies"
            )

    @property
    def count(self) -> int:
        return len(self.frequencies_hz)

    @property
    def min_hz(self) -> float:
        return self.frequencies_hz[0]

    @property
    def max_hz(self) -> float:
        return self.frequencies_hz[-1]
