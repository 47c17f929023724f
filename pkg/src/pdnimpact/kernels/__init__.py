"""Element-kernel backend selection.

The compiled OpenMP core is used when it imports; otherwise, or when the
environment variable ``PDNIMPACT_BACKEND=numpy`` is set, the numpy fallback
is used. Both expose the same functions.
"""

import os

from . import _numpy

_threads = 1


def _load(name):
    if name == "numpy":
        return _numpy, "numpy"
    try:
        from . import _core
    except ImportError:
        if name == "cython":
            raise
        return _numpy, "numpy"
    return _core, "cython"


_impl, BACKEND = _load(os.environ.get("PDNIMPACT_BACKEND", "auto").lower())


def use_backend(name: str) -> str:
    """Switch backend at runtime (``"cython"``, ``"numpy"`` or ``"auto"``)."""
    global _impl, BACKEND
    _impl, BACKEND = _load(name.lower())
    return BACKEND


def available_backends():
    out = ["numpy"]
    try:
        from . import _core  # noqa: F401
        out.insert(0, "cython")
    except ImportError:
        pass
    return out


def set_num_threads(n: int) -> None:
    global _threads
    _threads = max(1, int(n))


def get_num_threads() -> int:
    return _threads


def deformation_gradient(dNdX, conn, u):
    return _impl.deformation_gradient(dNdX, conn, u, nthreads=_threads)


def pk1_forces(dNdX, wdetJ, P):
    return _impl.pk1_forces(dNdX, wdetJ, P, nthreads=_threads)


def gather(fe, ptr, idx, nnodes):
    return _impl.gather(fe, ptr, idx, nnodes, nthreads=_threads)


def elastic_forces(dNdX, wdetJ, conn, u, C, small_strain=False):
    return _impl.elastic_forces(dNdX, wdetJ, conn, u, C, small_strain, nthreads=_threads)


def neohookean_forces(dNdX, wdetJ, conn, u, mu, kappa):
    return _impl.neohookean_forces(dNdX, wdetJ, conn, u, mu, kappa, nthreads=_threads)
