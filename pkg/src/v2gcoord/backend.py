"""Kernel backend selection.

The allocation and advantage kernels exist twice: jit-compiled in
``_kernels_numba`` and in plain numpy in ``_kernels_numpy``. Which one
runs is chosen once at import from the ``V2GCOORD_BACKEND`` environment
variable:

    auto    use numba when importable, else numpy (default)
    numba   require numba, raise if missing
    numpy   force the pure-numpy path

``set_backend`` re-dispatches at runtime; benchmarks and the
backend-equivalence tests use it to exercise both paths in one process.
"""

import os

from .errors import ConfigurationError

from . import _kernels_numpy

try:
    from . import _kernels_numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - mirror without numba installed
    _kernels_numba = None
    HAS_NUMBA = False

_VALID = ("auto", "numba", "numpy")

_active = _kernels_numpy


def _resolve(choice):
    if choice not in _VALID:
        raise ConfigurationError(
            f"V2GCOORD_BACKEND must be one of {_VALID}, got {choice!r}"
        )
    if choice == "numpy":
        return _kernels_numpy
    if choice == "numba":
        if not HAS_NUMBA:
            raise ConfigurationError("V2GCOORD_BACKEND=numba but numba is not importable")
        return _kernels_numba
    return _kernels_numba if HAS_NUMBA else _kernels_numpy


def set_backend(choice):
    """Switch the active kernel set; returns the resulting backend name."""
    global _active
    _active = _resolve(choice)
    return _active.BACKEND_NAME


def active_backend():
    """Name of the kernel set currently in use, 'numba' or 'numpy'."""
    return _active.BACKEND_NAME


def ev_power_bounds(soc, cap_kwh, p_ch_max, p_dis_max, soc_min_eff, soc_max_eff, dt_h):
    return _active.ev_power_bounds(
        soc, cap_kwh, p_ch_max, p_dis_max, soc_min_eff, soc_max_eff, dt_h
    )


def waterfill(target_kw, floor_kw, ceil_kw, head_kwh, depth_kwh, dt_h):
    return _active.waterfill(target_kw, floor_kw, ceil_kw, head_kwh, depth_kwh, dt_h)


def gae_scan(rewards, values, bootstrap_value, nonterminal, gamma, lam):
    return _active.gae_scan(rewards, values, bootstrap_value, nonterminal, gamma, lam)


set_backend(os.environ.get("V2GCOORD_BACKEND", "auto"))
