"""Backend dispatch for the numeric kernels.

Two interchangeable implementations exist: a numba-compiled one
(numba_impl) and a pure-numpy one (numpy_impl). Selection happens once at
import from the SHAPECAST_BACKEND environment variable:

    auto   use numba when importable, else numpy (default)
    numba  require numba, fail loudly if unavailable
    numpy  force the pure-numpy path

set_backend() switches at runtime; it exists for tests and for the
benchmark script. Training is only bit-reproducible while the backend
stays fixed (the two backends agree to ~1e-15 relative, not bitwise).
"""

import os

from . import numpy_impl

try:
    from . import numba_impl
    HAS_NUMBA = True
except ImportError:
    numba_impl = None
    HAS_NUMBA = False

_KERNEL_NAMES = (
    "dl_forward", "tied_forward", "mlp_forward",
    "step_losses", "dl_loss_grad", "tied_loss_grad", "mlp_loss_grad",
)

_impl = None
_name = ""


def set_backend(name):
    """Select the kernel implementation: 'auto', 'numba' or 'numpy'."""
    global _impl, _name
    name = (name or "auto").strip().lower()
    if name == "auto":
        name = "numba" if HAS_NUMBA else "numpy"
    if name == "numpy":
        _impl = numpy_impl
    elif name == "numba":
        if not HAS_NUMBA:
            raise ImportError(
                "SHAPECAST_BACKEND=numba but numba is not importable")
        _impl = numba_impl
    else:
        raise ValueError(
            f"unknown backend {name!r}: expected auto, numba or numpy")
    _name = name
    return _name


def backend_name():
    return _name


def __getattr__(attr):
    if attr in _KERNEL_NAMES:
        return getattr(_impl, attr)
    raise AttributeError(f"module {__name__!r} has no attribute {attr!r}")


set_backend(os.environ.get("SHAPECAST_BACKEND", "auto"))
