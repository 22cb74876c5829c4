"""Backend dispatcher for the hot kernels.

The compiled extension is preferred; set ``SUBKERNEL_BACKEND=python`` to force
the numpy fallback. ``BACKEND`` names the active implementation.
"""

import os

from . import _pykernels

_NAMES = ("truncated_convolve", "renewal_sequence", "power_accumulate", "sample_paths")

try:
    if os.environ.get("SUBKERNEL_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced")
    from . import _ckernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

truncated_convolve = _impl.truncated_convolve
renewal_sequence = _impl.renewal_sequence
power_accumulate = _impl.power_accumulate
sample_paths = _impl.sample_paths


def get_backend(name):
    """Return the kernel namespace for ``'cython'`` or ``'python'``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
