"""Bloch-equation spin dynamics: rotating-frame kernels, spoiled steady-state
oracles and scenario drivers backed by the C++ core."""

try:
    from ._blochdg import (  # noqa: F401
        PROTON_FREQ_HZ_PER_T,
        __version__,
        blackman_sinc_calibration,
        bloch_rhs,
        exact_relaxation_rotation,
        run,
        set_thread_limit,
        spoiled_steady_state,
        spoiled_transient,
    )
except ImportError:  # extension built outside the package (build tree)
    from _blochdg import (  # noqa: F401
        PROTON_FREQ_HZ_PER_T,
        __version__,
        blackman_sinc_calibration,
        bloch_rhs,
        exact_relaxation_rotation,
        run,
        set_thread_limit,
        spoiled_steady_state,
        spoiled_transient,
    )

__all__ = [
    "PROTON_FREQ_HZ_PER_T",
    "blackman_sinc_calibration",
    "bloch_rhs",
    "exact_relaxation_rotation",
    "run",
    "set_thread_limit",
    "spoiled_steady_state",
    "spoiled_transient",
]
