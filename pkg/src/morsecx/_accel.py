"""Optional numba acceleration.

Set ``MORSECX_NO_NUMBA=1`` to run every kernel through its pure numpy
implementation. This is useful for debugging and for checking that both
code paths agree.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and os.environ.get("MORSECX_NO_NUMBA", "0") in ("", "0")


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def is_jitted(func) -> bool:
    return USE_NUMBA and isinstance(func, numba.core.registry.CPUDispatcher)


if USE_NUMBA:
    from numba import types as _t

    #: signature of a compiled vector field ``R^n -> R^n``
    VEC_SIG = _t.float64[::1](_t.float64[::1])
    #: signature of a compiled Jacobian ``R^n -> R^(n x n)``
    MAT_SIG = _t.float64[:, ::1](_t.float64[::1])
    VEC_FN = _t.FunctionType(VEC_SIG)
    MAT_FN = _t.FunctionType(MAT_SIG)
else:
    VEC_SIG = MAT_SIG = VEC_FN = MAT_FN = None
