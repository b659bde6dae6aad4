"""Kernel backend selection: compiled extension if present, numpy otherwise.

Set CROWDLEDGER_PURE_PYTHON=1 to force the numpy kernels even when the
compiled module is installed (used by the parity tests and the benchmark).
"""

from __future__ import annotations

import os

from crowdledger.neural import kernels_numpy

_FORCE_PY = os.environ.get("CROWDLEDGER_PURE_PYTHON", "") not in ("", "0")

if not _FORCE_PY:
    try:
        from crowdledger import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = kernels_numpy
        BACKEND = "numpy"
else:
    _impl = kernels_numpy
    BACKEND = "numpy"

conv1d_forward = _impl.conv1d_forward
conv1d_backward = _impl.conv1d_backward
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward


def get_kernels(name: str):
    """Return the kernel module for an explicit backend name."""
    if name == "numpy":
        return kernels_numpy
    if name == "cython":
        from crowdledger import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
