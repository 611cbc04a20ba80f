"""Kernel backend selection: the compiled module when importable, else numpy.

Set ``TWISTKAM_BACKEND=python`` to force the fallback.
"""

import os

from twistkam import _kernels as python_kernels

try:
    from twistkam import _ckernels as compiled_kernels
except ImportError:  # pragma: no cover - depends on the build
    compiled_kernels = None

if os.environ.get("TWISTKAM_BACKEND", "").lower() == "python" or compiled_kernels is None:
    kernels = python_kernels
    NAME = "python"
else:
    kernels = compiled_kernels
    NAME = "cython"
