"""Simulation kernel selection: compiled extension when built, pure Python otherwise.

CONTACTGEN_KERNEL=python forces the fallback; CONTACTGEN_KERNEL=cython makes a
missing extension a hard error. Both kernels produce bit-identical output.
"""

from __future__ import annotations

import os
import warnings

_requested = os.environ.get("CONTACTGEN_KERNEL", "auto").strip().lower()

if _requested in ("auto", "", "cython", "c"):
    try:
        from . import _kernel as _impl

        KERNEL_BACKEND = "cython"
    except ImportError:
        if _requested in ("cython", "c"):
            raise
        from . import _kernel_py as _impl

        KERNEL_BACKEND = "python"
        warnings.warn(
            "compiled simulation kernel unavailable; using the pure-Python fallback "
            "(correct but much slower)",
            RuntimeWarning,
            stacklevel=2,
        )
elif _requested in ("python", "py"):
    from . import _kernel_py as _impl

    KERNEL_BACKEND = "python"
else:
    raise RuntimeError(f"CONTACTGEN_KERNEL must be auto/cython/python, got {_requested!r}")

step_raw = _impl.step
rollout_raw = _impl.rollout


def get_kernel(name: str):
    """Fetch a specific kernel module by name (used by the benchmark and tests)."""
    if name == "python":
        from . import _kernel_py

        return _kernel_py
    if name == "cython":
        from . import _kernel

        return _kernel
    raise KeyError(f"unknown kernel {name!r}")
