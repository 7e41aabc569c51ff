"""Backend selection for the element kernels.

The compiled extension is preferred. Set ``TRN_BACKEND=python`` to force
the numpy fallback (useful for benchmarking and debugging).
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("TRN_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython' or 'python'), default the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def snh_energies(x, tets, dm_inv, volume, mu, lam):
    return _impl.snh_energies(x, tets, dm_inv, volume, mu, lam)


def snh_quadratics(x, tets, dm_inv, volume, mu, lam):
    return _impl.snh_quadratics(x, tets, dm_inv, volume, mu, lam)


def scatter_add(slots, values, size):
    return _impl.scatter_add(slots, values, size)
