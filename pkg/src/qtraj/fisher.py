"""Fisher information from log-likelihood surfaces.

A grid of candidate parameter values is filtered against a record, the
log-likelihood is differentiated across the grid, candidate values are drawn
with a random-walk Metropolis-Hastings chain and snapped to the grid, and the
squared derivatives are averaged over those draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class ParameterGrid:
    theta_0: float
    d_theta: float
    n_p: int

    def __post_init__(self):
        if not (np.isfinite(self.d_theta) and self.d_theta > 0):
            raise ValueError(f"grid spacing must be positive, got {self.d_theta}")
        if int(self.n_p) != self.n_p or self.n_p < 1:
            raise ValueError(f"N_P must be a positive integer, got {self.n_p}")
        object.__setattr__(self, "n_p", int(self.n_p))

    @property
    def values(self) -> np.ndarray:
        return self.theta_0 + np.arange(self.n_p + 1) * self.d_theta

    def __len__(self):
        return self.n_p + 1

    @classmethod
    def centered(cls, center: float, d_theta: float, n_p: int) -> "ParameterGrid":
        """Grid whose midpoint (or the point just left of it) is ``center``."""
        return cls(center - (n_p // 2) * d_theta, d_theta, n_p)


def build_grid(theta_0: float, d_theta: float, n_p: int) -> ParameterGrid:
    return ParameterGrid(theta_0, d_theta, n_p)


def loglik_derivative(surface, d_theta: float | None = None, central: bool = False) -> np.ndarray:
    """Derivative of the log-likelihood across the candidate grid.

    Parameters
    ----------
    surface : LogLikSurface or ndarray, shape (N_P + 1, n_t)
        Log-likelihoods, one row per grid point. A bare array needs ``d_theta``.
    central : bool
        Use central differences on interior rows instead of the backward
        quotient (the last row always falls back to backward).

    Returns
    -------
    ndarray, shape (N_P, n_t)
        Row ``i - 1`` is the derivative at grid point ``i``, for i = 1..N_P.
    """
    if hasattr(surface, "l"):
        l = np.asarray(surface.l, dtype=float)
        d_theta = surface.grid.d_theta if d_theta is None else d_theta
    else:
        l = np.asarray(surface, dtype=float)
    if d_theta is None or not d_theta > 0:
        raise ValueError("a positive grid spacing is required")
    if l.shape[0] < 2:
        raise ValueError("need at least two candidates to difference")
    deriv = (l[1:] - l[:-1]) / d_theta
    if central and l.shape[0] > 2:
        deriv[:-1] = (l[2:] - l[:-2]) / (2 * d_theta)
    return deriv


@dataclass
class MHChain:
    samples: np.ndarray
    accepted: np.ndarray
    burn_in: int
    n_keep: int

    @property
    def retained(self) -> np.ndarray:
        """The last ``n_keep`` post-burn-in samples."""
        post = self.samples[self.burn_in :]
        return post[len(post) - self.n_keep :]

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted[1:].mean()) if len(self.accepted) > 1 else 0.0


def mh_sample(
    target_logdensity: Callable[[float], float],
    proposal_sigma: float,
    x0: float,
    n_total: int,
    burn_in: int,
    n_keep: int,
    rng: np.random.Generator | int | None = None,
) -> MHChain:
    """Random-walk Metropolis-Hastings with a symmetric normal proposal.

    Because the proposal is symmetric the proposal densities cancel from the
    acceptance ratio and only ``log pi(Y) - log pi(X)`` is evaluated. A
    rejected proposal repeats the current state.

    Parameters
    ----------
    target_logdensity : callable
        Log of the (unnormalized) stationary density.
    proposal_sigma : float
        Standard deviation of the proposal step.
    x0 : float
        Initial state, stored as ``samples[0]``.
    n_total : int
        Chain length N_A, including the initial state.
    burn_in : int
        Leading samples discarded before retention.
    n_keep : int
        Monte Carlo number N_M; the last ``n_keep`` samples are retained.
    rng : Generator or int, optional
    """
    if not proposal_sigma > 0:
        raise ValueError("proposal_sigma must be positive")
    if burn_in < 0 or n_keep < 1 or n_keep > n_total - burn_in:
        raise ValueError(
            f"need 1 <= N_M <= N_A - burn_in (N_A={n_total}, burn_in={burn_in}, N_M={n_keep})"
        )
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    x = float(x0)
    logp = float(target_logdensity(x))
    if not math.isfinite(logp):
        raise ValueError(f"target density is not positive and finite at x0={x0}")

    steps = rng.normal(0.0, proposal_sigma, size=n_total - 1)
    log_u = np.log(rng.random(size=n_total - 1))
    samples = np.empty(n_total)
    accepted = np.zeros(n_total, dtype=bool)
    samples[0] = x
    for k in range(1, n_total):
        y = x + steps[k - 1]
        logp_y = float(target_logdensity(y))
        log_alpha = logp_y - logp
        if log_alpha >= 0 or log_u[k - 1] < log_alpha:
            x, logp = y, logp_y
            accepted[k] = True
        samples[k] = x
    return MHChain(samples=samples, accepted=accepted, burn_in=burn_in, n_keep=n_keep)


def standard_normal_logdensity(x: float) -> float:
    return -0.5 * x * x


def mc_integrate(f: Callable, samples, n_batches: int | None = None):
    """Monte Carlo estimate of E[f(X)] from (possibly correlated) samples.

    Returns ``(mean, stderr)``. The standard error uses non-overlapping batch
    means (``sqrt(n)`` batches by default), which stays honest for
    autocorrelated Markov chain output.
    """
    values = np.asarray(f(np.asarray(samples, dtype=float)), dtype=float)
    n = len(values)
    if n == 0:
        raise ValueError("no samples")
    mean = float(values.mean())
    if n < 4:
        return mean, float("nan")
    n_batches = n_batches or max(2, int(math.isqrt(n)))
    size = n // n_batches
    batch_means = values[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return mean, float(batch_means.std(ddof=1) / math.sqrt(n_batches))


def nearest_grid_index(theta_hat, grid: ParameterGrid):
    """Index of the grid value closest to ``theta_hat``.

    Ties go to the larger index and the result is clamped to ``[1, N_P]``
    since row 0 has no backward difference. Accepts scalars or arrays.
    """
    if len(grid) == 0:
        raise ValueError("empty grid")
    r = (np.asarray(theta_hat, dtype=float) - grid.theta_0) / grid.d_theta
    lo = np.floor(r)
    idx = np.where(r - lo >= 0.5 - 1e-9, lo + 1, lo)
    idx = np.clip(idx, 1, grid.n_p).astype(int)
    return int(idx) if idx.ndim == 0 else idx


@dataclass
class FisherSeries:
    times: np.ndarray
    information: np.ndarray
    n_ensemble: int = 1
    stderr: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.information = np.asarray(self.information, dtype=float)
        if self.times.shape != self.information.shape:
            raise ValueError("times and information must have equal length")

    def __len__(self):
        return len(self.times)


def index_weights(indices, n_rows: int) -> np.ndarray:
    """Fraction of the Monte Carlo draws that landed on each derivative row."""
    indices = np.asarray(indices, dtype=int)
    if indices.size == 0:
        raise ValueError("empty index set")
    if indices.min() < 0 or indices.max() >= n_rows:
        raise IndexError("index outside the derivative rows")
    return np.bincount(indices, minlength=n_rows) / indices.size


def fisher_series(derivs, indices, times) -> FisherSeries:
    """Average of the squared derivative rows selected by ``indices``.

    ``I[k] = mean_j derivs[indices[j], k] ** 2``; ``indices`` are row numbers
    of ``derivs`` (grid index minus one).
    """
    derivs = np.atleast_2d(np.asarray(derivs, dtype=float))
    w = index_weights(indices, derivs.shape[0])
    info = w @ (derivs * derivs)
    return FisherSeries(times=times, information=info)


def ensemble_average(series_list: Sequence[FisherSeries]) -> FisherSeries:
    """Pointwise mean over independent records with its standard error.

    A single series comes back unchanged with a zero standard error.
    """
    if len(series_list) == 0:
        raise ValueError("empty ensemble")
    times = series_list[0].times
    for s in series_list[1:]:
        if s.times.shape != times.shape or not np.array_equal(s.times, times):
            raise ValueError("series have mismatched time axes")
    stack = np.stack([s.information for s in series_list])
    n = len(series_list)
    stderr = stack.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(len(times))
    return FisherSeries(times=times, information=stack.mean(axis=0), n_ensemble=n, stderr=stderr)


def cramer_rao_bound(information: float, n: int) -> float:
    """Lower bound ``1 / (N I)`` on the variance of an unbiased estimator."""
    if n < 1:
        raise ValueError(f"number of measurements must be >= 1, got {n}")
    if not information > 0:
        return math.inf
    return 1.0 / (n * information)


def sample_parameters(
    center: float,
    scale: float,
    proposal_sigma: float,
    n_total: int,
    burn_in: int,
    n_keep: int,
    rng=None,
    x0: float = 0.0,
):
    """Draw candidate parameter values ``center + scale * delta``, with delta
    from an MH chain targeting the standard normal."""
    chain = mh_sample(standard_normal_logdensity, proposal_sigma, x0, n_total, burn_in, n_keep, rng)
    return center + scale * chain.retained, chain
