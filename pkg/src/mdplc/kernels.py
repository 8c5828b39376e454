"""Backend selection for the compute kernels.

The compiled extension is optional: when `mdplc._native` cannot be
imported (not built, wrong platform) or MDPLC_PURE is set to a non-empty
value other than 0, the pure Python twin is used.  Both implement the
same contract bit-for-bit, so selection never changes results, only
speed.
"""

from __future__ import annotations

import os

from . import _pykernels

_native = None
if os.environ.get("MDPLC_PURE", "") in ("", "0"):
    try:
        from . import _native as _native_mod

        _native = _native_mod
    except ImportError:
        _native = None

_impl = _native if _native is not None else _pykernels


def backend_name() -> str:
    return "native" if _impl is not _pykernels else "pure"


def value_sweeps(*args, **kwargs):
    return _impl.value_sweeps(*args, **kwargs)


def run_trials(*args, **kwargs):
    return _impl.run_trials(*args, **kwargs)
