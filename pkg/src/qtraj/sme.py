"""Discretized stochastic master equation for the dispersively measured qubit.

The true system is propagated with the normalized equation and emits the
measurement record ``dY = sqrt(eta) Tr M(rho) dt + dW``. Candidate models are
filtered against that same record, each accumulating a log-likelihood.

Internally states are real Pauli vectors ``(Tr rho, x, y, z)`` (see
:func:`qtraj.qubit.to_pauli`) and every superoperator is a 4x4 transfer
matrix, which lets a whole bank of candidates over many trajectories advance
with a handful of array operations per time step.

One step is a Lie split: the measurement back-action is integrated with an
Euler-Maruyama (or Milstein) increment, then the Hamiltonian part is applied
with its exact propagator ``exp(-i H dt)``, a rigid rotation of the Bloch
vector.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import noise
from .fisher import ParameterGrid
from .qubit import (
    BlochVector,
    ModelParams,
    TraceError,
    TRACE_ATOL,
    dissipator,
    from_pauli,
    measurement_superop,
    rotation_transfer,
    to_pauli,
    transfer_matrix,
)


class NormalizationMode(str, enum.Enum):
    """How a candidate filter tracks its likelihood.

    ``RENORMALIZE`` integrates the normalized equation driven by the
    innovation and adds ``sqrt(eta) Tr M(rho) dY`` to the log-likelihood.
    ``UNNORMALIZED`` integrates the linear (unnormalized) equation driven by
    ``dY``; the likelihood is the trace it acquires, after which the state is
    rescaled to unit trace.
    """

    RENORMALIZE = "renormalize"
    UNNORMALIZED = "unnormalized"


class Scheme(str, enum.Enum):
    EULER = "euler"
    MILSTEIN = "milstein"


# Largest tolerated Bloch-vector length above 1 before a step counts as failed.
# Euler increments overshoot the sphere by O(sqrt(eta) dW^2) per step, Milstein
# increments by O(dt^1.5).
BLOCH_TOLERANCE = {Scheme.EULER: 5e-2, Scheme.MILSTEIN: 1e-3}


class StepSizeError(ArithmeticError):
    """A step left the physical state space (or produced a non-positive
    likelihood); usually ``dt`` is too large."""

    def __init__(self, message, step=None, candidate=None):
        where = []
        if candidate is not None:
            where.append(f"candidate {candidate}")
        if step is not None:
            where.append(f"step {step}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.step = step
        self.candidate = candidate


def n_steps(t_max: float, dt: float) -> int:
    return int(np.floor(t_max / dt * (1 + 1e-12)))


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_max: float = 10.0
    params_true: ModelParams = field(default_factory=ModelParams)
    initial_bloch: BlochVector = BlochVector(0.0, 0.0, 1.0)
    seed: int = 0
    normalization_mode: NormalizationMode = NormalizationMode.UNNORMALIZED
    scheme: Scheme = Scheme.MILSTEIN

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_max >= self.dt:
            raise ValueError(f"t_max={self.t_max} must be at least dt={self.dt}")
        b = BlochVector(*map(float, self.initial_bloch))
        if b.norm > 1 + 1e-9:
            raise ValueError(f"initial Bloch vector {tuple(b)} lies outside the Bloch ball")
        object.__setattr__(self, "initial_bloch", b)
        object.__setattr__(self, "normalization_mode", NormalizationMode(self.normalization_mode))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.params_true.eta * self.dt > 0.01:
            warnings.warn(f"eta*dt = {self.params_true.eta * self.dt} is not small", stacklevel=3)

    @property
    def n_steps(self) -> int:
        return n_steps(self.t_max, self.dt)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def initial_pauli(self) -> np.ndarray:
        return np.array([1.0, *self.initial_bloch])


@dataclass
class TrajectoryRecord:
    """One realization. Row ``k`` holds the state at ``times[k]`` and the
    increments over ``(times[k-1], times[k]]``; row 0 carries zero increments."""

    times: np.ndarray
    bloch: np.ndarray  # (n, 3)
    dW: np.ndarray
    dY: np.ndarray
    Y: np.ndarray

    def __len__(self):
        return len(self.times)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass
class LogLikSurface:
    grid: ParameterGrid
    times: np.ndarray
    l: np.ndarray  # (candidates, len(times))
    L: np.ndarray | None = None

    @property
    def d_theta(self) -> float:
        return self.grid.d_theta


class Kernel:
    """Transfer matrices for a bank of models sharing one measurement operator.

    Parameters vary across the bank only through the Hamiltonian and ``eta``.
    """

    def __init__(self, models: Sequence[ModelParams], dt: float, scheme=Scheme.MILSTEIN):
        models = list(models)
        F = models[0].F
        if any(not np.array_equal(m.F, F) for m in models):
            raise ValueError("all models in a bank must share the measurement operator")
        self.dt = dt
        self.scheme = Scheme(scheme)
        self.milstein = self.scheme is Scheme.MILSTEIN
        self.tolerance = BLOCH_TOLERANCE[self.scheme]
        self.M = transfer_matrix(lambda s: measurement_superop(F, s))
        self.D = transfer_matrix(lambda s: dissipator(F, s))
        U = np.stack([rotation_transfer(m, dt) for m in models])
        self.U = U[0] if len(models) == 1 else U
        self.eta = np.array([m.eta for m in models])
        self.sqrt_eta = np.sqrt(self.eta)
        self.measured = bool(np.any(self.eta > 0))

    def __len__(self):
        return len(self.eta)


def _apply(T, v):
    if T.ndim == 2:
        return v @ T.T
    return np.matmul(T, v[..., None])[..., 0]


def normalized_update(kern: Kernel, v, dW):
    """One step of the normalized equation driven by the increment ``dW``.

    Returns the renormalized next state, the trace before renormalization and
    ``Tr M(rho)`` at the pre-step state.
    """
    dt = kern.dt
    mv = _apply(kern.M, v)
    trm = mv[..., 0]
    w = v
    if kern.measured:
        g = mv - v * trm[..., None]
        w = (
            v
            + _apply(kern.D, v) * (kern.eta * dt)[..., None]
            + g * (kern.sqrt_eta * dW)[..., None]
        )
        if kern.milstein:
            mg = _apply(kern.M, g)
            dg = mg - g * trm[..., None] - v * mg[..., 0:1]
            w = w + dg * (0.5 * kern.eta * (dW * dW - dt))[..., None]
    w = _apply(kern.U, w)
    tr = w[..., 0]
    return w / tr[..., None], tr, trm


def unnormalized_update(kern: Kernel, v, dY):
    """One step of the linear equation driven by the record ``dY``.

    Returns the rescaled next state, the trace it acquired (the likelihood
    ratio of the step) and ``Tr M(rho)`` at the pre-step state.
    """
    dt = kern.dt
    mv = _apply(kern.M, v)
    w = v
    if kern.measured:
        w = (
            v
            + _apply(kern.D, v) * (kern.eta * dt)[..., None]
            + mv * (kern.sqrt_eta * dY)[..., None]
        )
        if kern.milstein:
            w = w + _apply(kern.M, mv) * (0.5 * kern.eta * (dY * dY - dt))[..., None]
    w = _apply(kern.U, w)
    tr = w[..., 0]
    return w / tr[..., None], tr, mv[..., 0]


def _check_states(v, step, tol):
    r2 = v[..., 1] ** 2 + v[..., 2] ** 2 + v[..., 3] ** 2
    bad = ~(r2 <= (1 + tol) ** 2)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        candidate = int(idx[-1]) if v.ndim > 1 and bad.shape[-1] > 1 else None
        r = float(np.sqrt(r2[tuple(idx)]))
        raise StepSizeError(f"state left the Bloch ball (|r| = {r:.6g})", step, candidate)


def _as_pauli(rho):
    rho = np.asarray(rho, dtype=complex)
    if not np.all(np.isfinite(rho)):
        raise ValueError("state has non-finite entries")
    if abs(np.trace(rho) - 1.0) > TRACE_ATOL:
        raise TraceError(f"state trace {np.trace(rho).real} is not 1")
    return to_pauli(rho)[None, :]


def step_true(rho, params: ModelParams, dt: float, dW: float, scheme=Scheme.MILSTEIN):
    """Advance the true (normalized) state by one step and emit the record increment.

    Parameters
    ----------
    rho : ndarray, shape (2, 2)
        Unit-trace density matrix.
    params : ModelParams
    dt, dW : float
        Time step and Wiener increment over it.

    Returns
    -------
    rho_next : ndarray, shape (2, 2)
    dY : float
        ``sqrt(eta) Tr M(rho) dt + dW`` evaluated at the pre-step state.
    """
    if not (np.isfinite(dt) and np.isfinite(dW)):
        raise ValueError("dt and dW must be finite")
    kern = Kernel([params], dt, scheme)
    v, _, trm = normalized_update(kern, _as_pauli(rho), np.array([dW]))
    _check_states(v, None, kern.tolerance)
    dY = float(kern.sqrt_eta[0] * trm[0] * dt + dW)
    return from_pauli(v[0]), dY


def step_filter(
    rho,
    l: float,
    params_candidate: ModelParams,
    dt: float,
    dY: float,
    mode=NormalizationMode.UNNORMALIZED,
    scheme=Scheme.MILSTEIN,
):
    """Advance a candidate filter by one record increment; returns ``(rho_next, l_next)``."""
    if not (np.isfinite(dt) and np.isfinite(dY) and np.isfinite(l)):
        raise ValueError("dt, dY and l must be finite")
    kern = Kernel([params_candidate], dt, scheme)
    v = _as_pauli(rho)
    dY_arr = np.array([dY])
    if NormalizationMode(mode) is NormalizationMode.RENORMALIZE:
        trm = _apply(kern.M, v)[..., 0]
        innovation = dY_arr - kern.sqrt_eta * trm * dt
        v_next, _, _ = normalized_update(kern, v, innovation)
        l_next = l + float(kern.sqrt_eta[0] * trm[0] * dY)
    else:
        v_next, tr, _ = unnormalized_update(kern, v, dY_arr)
        if not tr[0] > 0:
            raise StepSizeError("non-positive likelihood")
        l_next = l + float(np.log(tr[0]))
    _check_states(v_next, None, kern.tolerance)
    return from_pauli(v_next[0]), l_next


def _record_from_states(times, v, dW, dY):
    pad = np.zeros(1)
    dW = np.concatenate([pad, dW])
    dY = np.concatenate([pad, dY])
    return TrajectoryRecord(times=times, bloch=v[:, 1:].copy(), dW=dW, dY=dY, Y=np.cumsum(dY))


def simulate_trajectory(cfg: SimConfig, trajectory: int = 0, dW=None) -> TrajectoryRecord:
    """Integrate the true system for one noise realization.

    The increments come from the stream keyed by ``(cfg.seed, trajectory)``
    unless ``dW`` (length ``cfg.n_steps``) is supplied explicitly.
    """
    n = cfg.n_steps
    if dW is None:
        dW = noise.wiener_increments(cfg.seed, trajectory, n, cfg.dt)
    dW = np.asarray(dW, dtype=float)
    if dW.shape != (n,):
        raise ValueError(f"expected {n} increments, got shape {dW.shape}")
    kern = Kernel([cfg.params_true], cfg.dt, cfg.scheme)
    v = np.empty((n + 1, 4))
    v[0] = cfg.initial_pauli
    dY = np.empty(n)
    state = v[0:1]
    drift = kern.sqrt_eta[0] * cfg.dt
    for k in range(n):
        state, _, trm = normalized_update(kern, state, dW[k : k + 1])
        v[k + 1] = state[0]
        dY[k] = drift * trm[0] + dW[k]
    r2 = np.einsum("ij,ij->i", v[:, 1:], v[:, 1:])
    bad = np.flatnonzero(~(r2 <= (1 + kern.tolerance) ** 2))
    if bad.size:
        k = int(bad[0])
        raise StepSizeError(f"state left the Bloch ball (|r| = {np.sqrt(r2[k]):.6g})", k)
    return _record_from_states(cfg.times, v, dW, dY)


def candidate_models(grid: ParameterGrid, base: ModelParams, parameter: str = "omega"):
    return [base.with_value(parameter, theta) for theta in grid.values]


def filter_bank_batch(
    kern: Kernel,
    v0,
    dY,
    mode=NormalizationMode.UNNORMALIZED,
    stride: int = 1,
    keep_likelihood: bool = False,
):
    """Run every candidate of ``kern`` over a batch of records.

    Parameters
    ----------
    kern : Kernel
        Candidate bank, ``C`` models.
    v0 : array_like, shape (4,)
        Initial Pauli vector shared by all filters.
    dY : ndarray, shape (B, n)
        Record increments for ``B`` trajectories.
    stride : int
        Keep every ``stride``-th time point (always including t = 0).

    Returns
    -------
    ndarray, shape (B, C, n // stride + 1)
        Log-likelihoods at the kept time points.
    """
    dY = np.atleast_2d(np.asarray(dY, dtype=float))
    B, n = dY.shape
    C = len(kern)
    mode = NormalizationMode(mode)
    n_out = n // stride + 1
    v = np.broadcast_to(np.asarray(v0, dtype=float), (B, C, 4)).copy()
    l = np.zeros((B, C))
    out = np.zeros((B, C, n_out))
    for k in range(n):
        dy = dY[:, k : k + 1]
        if mode is NormalizationMode.RENORMALIZE:
            trm = _apply(kern.M, v)[..., 0]
            innovation = dy - kern.sqrt_eta * trm * kern.dt
            l = l + kern.sqrt_eta * trm * dy
            v, _, _ = normalized_update(kern, v, innovation)
        else:
            v, tr, _ = unnormalized_update(kern, v, dy)
            if not np.all(tr > 0):
                b, c = np.argwhere(~(tr > 0))[0]
                raise StepSizeError("non-positive likelihood", k + 1, int(c))
            l = l + np.log(tr)
        _check_states(v, k + 1, kern.tolerance)
        if (k + 1) % stride == 0:
            out[:, :, (k + 1) // stride] = l
    if keep_likelihood:
        return out, np.exp(out)
    return out


def run_filter_bank(
    record: TrajectoryRecord,
    grid: ParameterGrid,
    base: ModelParams,
    mode=NormalizationMode.UNNORMALIZED,
    *,
    parameter: str = "omega",
    initial_bloch=(0.0, 0.0, 1.0),
    scheme=Scheme.MILSTEIN,
    stride: int = 1,
) -> LogLikSurface:
    """Filter every grid candidate over one shared record.

    Candidate ``i`` is ``base`` with ``parameter`` set to ``grid.values[i]``.
    """
    if len(record) < 2:
        raise ValueError("record must contain at least one step")
    dt = record.dt
    kern = Kernel(candidate_models(grid, base, parameter), dt, scheme)
    v0 = np.array([1.0, *initial_bloch])
    l = filter_bank_batch(kern, v0, record.dY[1:][None, :], mode, stride)[0]
    times = record.times[::stride][: l.shape[1]]
    return LogLikSurface(grid=grid, times=times, l=l, L=np.exp(l))


def ensemble_loglik(
    cfg: SimConfig,
    grid: ParameterGrid,
    trajectories: Sequence[int],
    *,
    parameter: str = "omega",
    stride: int = 1,
):
    """Simulate the listed trajectories and filter the whole grid over each.

    Returns the log-likelihood array ``(len(trajectories), C, n_out)``. Each
    trajectory's noise comes from its own keyed stream, so the result for a
    given index is independent of which other indices share the batch.
    """
    n = cfg.n_steps
    dW = np.stack([noise.wiener_increments(cfg.seed, j, n, cfg.dt) for j in trajectories])
    true_kern = Kernel([cfg.params_true], cfg.dt, cfg.scheme)
    v = np.broadcast_to(cfg.initial_pauli, (len(trajectories), 1, 4)).copy()
    dY = np.empty_like(dW)
    for k in range(n):
        v, _, trm = normalized_update(true_kern, v, dW[:, k : k + 1])
        _check_states(v, k + 1, true_kern.tolerance)
        dY[:, k] = true_kern.sqrt_eta[0] * trm[:, 0] * cfg.dt + dW[:, k]
    kern = Kernel(candidate_models(grid, cfg.params_true, parameter), cfg.dt, cfg.scheme)
    return filter_bank_batch(kern, cfg.initial_pauli, dY, cfg.normalization_mode, stride)
