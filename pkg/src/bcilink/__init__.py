"""Closed-loop SSVEP brain-computer-interface simulator.

Pipeline: synthetic multi-channel EEG with a frequency-tagged evoked
response -> zero-phase preprocessing and artifact gating -> filter-bank
canonical-correlation decoding -> command mapping -> lossy framed link with
retransmission -> grid-world reconnaissance agent -> red/yellow/green
operator feedback. Batch CLI (`bcilink`) and a live gateway for the
browser console.
"""

from .codec import (
    Color,
    Command,
    CommandId,
    CommandTable,
    FeedbackFrame,
    FeedbackStatus,
    encode_feedback,
    feedback_color,
    map_decision,
)
from .dsp import FilterCoeffs, apply_zero_phase, design_bandpass, design_notch, gate_artifacts
from .fbcca import (
    Decision,
    FbccaConfig,
    FilterBank,
    ReferenceSet,
    build_filter_bank,
    build_references,
    cca_max_corr,
    classify,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .session import compute_itr, confusion_matrix, mix_seed, run_session, run_trial
from .stimulus import StimulusConfig
from .synth import (
    ChannelModel,
    EegEpoch,
    NoiseModel,
    default_montage,
    epoch_from_csv,
    epoch_to_csv,
    generate_epoch,
    inject_blink,
    measure_snr,
)

__version__ = "0.1.0"
