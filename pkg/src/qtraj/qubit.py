"""Two-level system algebra: Pauli matrices, the qubit Hamiltonian and the
superoperators that appear in the dispersive-measurement master equation.

All functions accept a single 2x2 complex matrix or a stack of them with
shape ``(..., 2, 2)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_BASIS = np.stack([IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z])

OPERATORS = {"sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z}

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-9
WEAK_MEASUREMENT_LIMIT = 0.1


class TraceError(ValueError):
    """Raised when an operation that presumes a normalized state gets one
    whose trace is not 1."""


class BlochVector(NamedTuple):
    x: float
    y: float
    z: float

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.x**2 + self.y**2 + self.z**2))


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def trace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


def is_hermitian(a: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    return bool(np.allclose(a, dagger(a), rtol=0.0, atol=atol))


def operator(name: str) -> np.ndarray:
    """Look up a measurement operator by selector name (``sigma_x`` etc.)."""
    try:
        return OPERATORS[name].copy()
    except KeyError:
        raise ValueError(
            f"unknown operator {name!r}; expected one of {sorted(OPERATORS)}"
        ) from None


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Physical parameters of the monitored qubit.

    Parameters
    ----------
    delta : float
        Coefficient of sigma_x / 2 in the Hamiltonian (electrostatic energy).
    omega : float
        Coefficient of sigma_z / 2 in the Hamiltonian (Josephson energy).
    eta : float
        Measurement strength. Must be non-negative; values at or above
        ``WEAK_MEASUREMENT_LIMIT`` leave the weak-measurement regime and
        trigger a warning.
    F : ndarray, shape (2, 2)
        Measurement operator.
    """

    delta: float = 1.73
    omega: float = 1.0
    eta: float = 0.01
    F: np.ndarray = field(default_factory=lambda: SIGMA_Y.copy())

    def __post_init__(self):
        F = np.asarray(self.F, dtype=complex)
        if F.shape != (2, 2):
            raise ValueError(f"measurement operator must be 2x2, got {F.shape}")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)
        for name in ("delta", "omega", "eta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.eta >= WEAK_MEASUREMENT_LIMIT:
            warnings.warn(
                f"eta={self.eta} is outside the weak-measurement regime (eta << 1)",
                stacklevel=3,
            )

    def with_value(self, name: str, value: float) -> "ModelParams":
        """Copy with one scalar parameter (``delta``, ``omega`` or ``eta``) replaced."""
        if name not in ("delta", "omega", "eta"):
            raise ValueError(f"cannot vary parameter {name!r}")
        return replace(self, **{name: float(value)})

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (
            (self.delta, self.omega, self.eta) == (other.delta, other.omega, other.eta)
            and np.array_equal(self.F, other.F)
        )

    __hash__ = None


def hamiltonian(params: ModelParams) -> np.ndarray:
    return 0.5 * params.delta * SIGMA_X + 0.5 * params.omega * SIGMA_Z


def dissipator(A: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Lindblad dissipator ``A rho A^+ - (A^+ A rho + rho A^+ A) / 2``."""
    Ad = dagger(A)
    AdA = Ad @ A
    return A @ rho @ Ad - 0.5 * (AdA @ rho + rho @ AdA)


def measurement_superop(A: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``A rho + rho A^+``; its trace is the (scaled) mean measurement signal."""
    return A @ rho + rho @ dagger(A)


def innovation_superop(F: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Nonlinear innovation term ``M(rho) - rho Tr M(rho)`` for a normalized state."""
    tr = trace(rho)
    if not np.all(np.abs(tr - 1.0) <= TRACE_ATOL):
        raise TraceError("innovation superoperator requires a unit-trace state")
    m = measurement_superop(F, rho)
    return m - rho * trace(m)[..., None, None]


def bloch_decompose(rho: np.ndarray) -> BlochVector:
    rho = np.asarray(rho, dtype=complex)
    if abs(np.trace(rho) - 1.0) > TRACE_ATOL:
        raise TraceError(f"trace {np.trace(rho)} is not 1")
    x, y, z = (float(np.real(np.trace(s @ rho))) for s in (SIGMA_X, SIGMA_Y, SIGMA_Z))
    return BlochVector(x, y, z)


def bloch_compose(b) -> np.ndarray:
    x, y, z = b
    return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]], dtype=complex)


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


# Pauli-vector (transfer matrix) representation. A Hermitian 2x2 matrix rho maps
# to the real 4-vector v_k = Tr(sigma_k rho), sigma_0 = I, so that
# rho = sum_k v_k sigma_k / 2 and v_0 is the trace. A Hermiticity-preserving
# linear superoperator S becomes the real matrix T_jk = Tr(sigma_j S(sigma_k)) / 2.


def to_pauli(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return np.real(np.einsum("kij,...ji->...k", PAULI_BASIS, rho))


def from_pauli(v: np.ndarray) -> np.ndarray:
    return 0.5 * np.einsum("...k,kij->...ij", np.asarray(v, dtype=complex), PAULI_BASIS)


def transfer_matrix(superop) -> np.ndarray:
    """Real 4x4 matrix of a Hermiticity-preserving linear map on 2x2 matrices."""
    images = np.stack([superop(s) for s in PAULI_BASIS])  # S(sigma_k)
    T = 0.5 * np.einsum("jab,kba->jk", PAULI_BASIS, images)
    if np.max(np.abs(T.imag)) > 1e-12:
        raise ValueError("superoperator does not preserve Hermiticity")
    return np.ascontiguousarray(T.real)


def unitary_transfer(U: np.ndarray) -> np.ndarray:
    T = transfer_matrix(lambda s: U @ s @ dagger(U))
    # trace-preserving and unital: pin the first row and column exactly
    T[0, :] = T[:, 0] = 0.0
    T[0, 0] = 1.0
    return T


def propagator(params: ModelParams, t: float) -> np.ndarray:
    """Closed-form ``exp(-i H t)`` for the traceless qubit Hamiltonian.

    Uses ``exp(-i H t) = cos(w t / 2) I - i t sinc(w t / 2) H`` with
    ``w = sqrt(delta^2 + omega^2)``, which stays regular at ``w = 0``.
    """
    w = np.hypot(params.delta, params.omega)
    half = 0.5 * w * t
    return np.cos(half) * IDENTITY - 1j * t * np.sinc(half / np.pi) * hamiltonian(params)


def rotation_transfer(params: ModelParams, t: float) -> np.ndarray:
    """Transfer matrix of ``exp(-i H t)`` written as a Bloch-vector rotation.

    The state precesses about ``(delta, 0, omega)`` at angular frequency
    ``w = sqrt(delta^2 + omega^2)``; Rodrigues' formula keeps the rotation
    axis exactly invariant, which the generic matrix product does not.
    """
    w = np.hypot(params.delta, params.omega)
    T = np.eye(4)
    if w == 0.0:
        return T
    n = np.array([params.delta, 0.0, params.omega]) / w
    c, s = np.cos(w * t), np.sin(w * t)
    cross = np.array([[0.0, -n[2], n[1]], [n[2], 0.0, -n[0]], [-n[1], n[0], 0.0]])
    T[1:, 1:] = c * np.eye(3) + s * cross + (1.0 - c) * np.outer(n, n)
    return T
