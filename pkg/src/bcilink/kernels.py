"""Hot decode kernels with backend selection at import.

The compiled extension (bcilink._core, Cython) is preferred; the
numpy/scipy fallback is used when the extension is not built or when
BCILINK_FORCE_FALLBACK=1 (the benchmark uses this to compare both).
Both backends implement the same contracts and agree to float precision.
"""
from __future__ import annotations

import os

from . import _kernels_np

_impl = _kernels_np
if os.environ.get("BCILINK_FORCE_FALLBACK", "") != "1":
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        pass

BACKEND = _impl.BACKEND_NAME

row_space_basis = _impl.row_space_basis
max_corr_from_bases = _impl.max_corr_from_bases
max_canon_corr = _impl.max_canon_corr
sosfiltfilt_even = _impl.sosfiltfilt_even
