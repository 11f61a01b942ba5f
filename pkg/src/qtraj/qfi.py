"""Quantum Fisher information of a closed, pure-state qubit evolution.

This is the reference curve the measured-record Fisher information is
compared against.
"""

from __future__ import annotations

import numpy as np

from .qubit import ModelParams, propagator

MIN_DELTA = 1e-8
NORM_ATOL = 1e-12


def _check_state(psi):
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (2,):
        raise ValueError(f"pure state must have two amplitudes, got shape {psi.shape}")
    if abs(np.vdot(psi, psi).real - 1.0) > NORM_ATOL:
        raise ValueError("pure state must have unit norm")
    return psi


def evolve_pure(params: ModelParams, psi0, t: float) -> np.ndarray:
    """``exp(-i H t) psi0``; the measurement strength plays no role here."""
    return propagator(params, t) @ _check_state(psi0)


def qfi(
    params: ModelParams,
    psi0,
    t: float,
    delta_theta: float = 1e-5,
    parameter: str = "omega",
) -> float:
    """``4 (<d psi|d psi> - |<psi|d psi>|^2)`` with ``d psi`` the derivative of
    the evolved state with respect to ``parameter``.

    The derivative is a central difference of step ``delta_theta``. The two
    displaced states are first rotated onto the phase of the undisplaced one,
    which removes the spurious global-phase contribution to the difference.
    """
    if not delta_theta >= MIN_DELTA:
        raise ValueError(f"delta_theta must be >= {MIN_DELTA}, got {delta_theta}")
    if parameter not in ("delta", "omega"):
        raise ValueError(f"closed evolution depends on delta and omega only, not {parameter!r}")
    theta = getattr(params, parameter)
    psi = evolve_pure(params, psi0, t)
    plus = evolve_pure(params.with_value(parameter, theta + delta_theta), psi0, t)
    minus = evolve_pure(params.with_value(parameter, theta - delta_theta), psi0, t)
    for phi in (plus, minus):
        overlap = np.vdot(psi, phi)
        if abs(overlap) > 0:
            phi *= np.conj(overlap) / abs(overlap)
    d = (plus - minus) / (2 * delta_theta)
    value = 4.0 * (np.vdot(d, d).real - abs(np.vdot(psi, d)) ** 2)
    if not np.isfinite(value):
        raise FloatingPointError("quantum Fisher information is not finite")
    return max(float(value), 0.0)


def qfi_curve(params: ModelParams, psi0, times, delta_theta: float = 1e-5, parameter: str = "omega"):
    return np.array([qfi(params, psi0, t, delta_theta, parameter) for t in times])


def bloch_to_pure(bloch) -> np.ndarray:
    """Pure state with the given (unit) Bloch vector, phase fixed so the first
    amplitude is real and non-negative."""
    x, y, z = bloch
    r = np.sqrt(x * x + y * y + z * z)
    if abs(r - 1.0) > 1e-9:
        raise ValueError("Bloch vector of a pure state must have unit length")
    polar = np.arctan2(np.hypot(x, y), z)
    azimuth = np.arctan2(y, x)
    return np.array([np.cos(polar / 2), np.exp(1j * azimuth) * np.sin(polar / 2)])
