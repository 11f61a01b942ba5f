"""Experiment orchestration: trajectory demo, Fisher-information ensembles,
measurement-operator sweeps and the QFI reference curve."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io, noise
from .config import ConfigError, ExperimentConfig
from .fisher import (
    FisherSeries,
    MHChain,
    cramer_rao_bound,
    ensemble_average,
    fisher_series,
    index_weights,
    loglik_derivative,
    nearest_grid_index,
    sample_parameters,
)
from .qfi import bloch_to_pure, qfi_curve
from .sme import Kernel, ensemble_loglik, filter_bank_batch, simulate_trajectory

log = logging.getLogger(__name__)

OPERATOR_NAMES = ("sigma_x", "sigma_y", "sigma_z")


def draw_parameter_rows(cfg: ExperimentConfig):
    """MH draws of the unknown parameter, snapped to derivative rows.

    The chain targets N(0, 1); draws are mapped to
    ``theta_true + prior_scale * delta`` before snapping to the grid.
    """
    theta_hat, chain = sample_parameters(
        center=cfg.theta_true,
        scale=cfg.mh_prior_scale,
        proposal_sigma=cfg.mh_proposal_sigma,
        n_total=cfg.n_a,
        burn_in=cfg.mh_burn_in,
        n_keep=cfg.n_m,
        rng=noise.mh_stream(cfg.seed),
        x0=cfg.mh_x0,
    )
    rows = nearest_grid_index(theta_hat, cfg.grid()) - 1
    return rows, chain


@dataclass
class _ChunkResult:
    indices: list
    information: np.ndarray  # (B, n_out) per-trajectory Fisher series
    deriv_sum: np.ndarray | None  # (N_P, n_out), only for pre-squaring averaging


def _chunk(cfg: ExperimentConfig, operator_name: str, indices: list, rows: np.ndarray):
    sim = cfg.sim_config(operator_name)
    times = output_times(cfg)
    l = ensemble_loglik(sim, cfg.grid(), indices, parameter=cfg.parameter, stride=cfg.record_every)
    derivs = np.stack([loglik_derivative(lj, cfg.d_theta, cfg.central_difference) for lj in l])
    information = np.stack([fisher_series(d, rows, times).information for d in derivs])
    deriv_sum = derivs.sum(axis=0) if cfg.average == "pre" else None
    return _ChunkResult(list(indices), information, deriv_sum)


def _chunk_star(args):
    return _chunk(*args)


def output_times(cfg: ExperimentConfig) -> np.ndarray:
    return cfg.sim_config().times[:: cfg.record_every]


@dataclass
class FisherRun:
    single: FisherSeries
    ensemble: FisherSeries
    chain: MHChain


def fisher_ensemble(cfg: ExperimentConfig, operator_name: str | None = None) -> FisherRun:
    """Fisher information of ``cfg.n_traj`` independent records.

    Trajectories are processed in fixed-size chunks (``cfg.chunk_size``)
    which may run in parallel; results are assembled by trajectory index, so
    outputs do not depend on the worker count.
    """
    operator_name = operator_name or cfg.operator
    rows, chain = draw_parameter_rows(cfg)
    times = output_times(cfg)
    all_idx = list(range(cfg.n_traj))
    chunks = [all_idx[i : i + cfg.chunk_size] for i in range(0, cfg.n_traj, cfg.chunk_size)]
    jobs = [(cfg, operator_name, c, rows) for c in chunks]
    log.info("running %d trajectories (%s) in %d chunks", cfg.n_traj, operator_name, len(chunks))
    if cfg.workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_chunk_star, jobs))
    else:
        results = []
        for i, job in enumerate(jobs):
            results.append(_chunk_star(job))
            log.debug("chunk %d/%d done", i + 1, len(jobs))

    information = np.concatenate([r.information for r in results])
    per_traj = [FisherSeries(times, info) for info in information]
    if cfg.average == "pre":
        mean_deriv = sum(r.deriv_sum for r in results) / cfg.n_traj
        ensemble = FisherSeries(
            times,
            index_weights(rows, cfg.n_p) @ (mean_deriv * mean_deriv),
            n_ensemble=cfg.n_traj,
            stderr=np.full(len(times), np.nan),
        )
    else:
        ensemble = ensemble_average(per_traj)
    single = FisherSeries(times, information[0], n_ensemble=1, stderr=np.zeros(len(times)))
    return FisherRun(single=single, ensemble=ensemble, chain=chain)


def qfi_reference(cfg: ExperimentConfig, times=None) -> tuple[np.ndarray, np.ndarray]:
    times = output_times(cfg) if times is None else times
    try:
        psi0 = bloch_to_pure(cfg.initial_bloch)
    except ValueError as exc:
        raise ConfigError(f"QFI needs a pure initial state: {exc}") from exc
    return times, qfi_curve(cfg.model_params(), psi0, times, cfg.qfi_delta, cfg.parameter)


def _out_dir(out) -> Path:
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    return path


def run_trajectory_demo(cfg: ExperimentConfig, out=None) -> dict:
    """One trajectory with its record and the log-likelihood at the true parameter."""
    out = _out_dir(out or cfg.out)
    sim = cfg.sim_config()
    record = simulate_trajectory(sim, trajectory=0)
    kern = Kernel([sim.params_true], sim.dt, sim.scheme)
    l = filter_bank_batch(kern, sim.initial_pauli, record.dY[None, 1:], sim.normalization_mode)
    path = io.write_trajectory(out / "trajectory.csv", record, loglik=l[0, 0])
    return {"trajectory": path}


def _finite_or_none(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _summary(cfg, ensemble: FisherSeries, qfi_values):
    # Non-finite values (an undefined bound, a missing stderr) are written as null.
    final = float(ensemble.information[-1])
    stderr = ensemble.stderr[-1] if ensemble.stderr is not None else np.nan
    return {
        "config": cfg.to_dict(),
        "final_time": float(ensemble.times[-1]),
        "final_fisher_information": final,
        "final_stderr": _finite_or_none(stderr),
        "final_qfi": float(qfi_values[-1]),
        "cramer_rao_bound_per_record": _finite_or_none(cramer_rao_bound(final, 1)),
        "cramer_rao_bound_ensemble": _finite_or_none(cramer_rao_bound(final, cfg.n_traj)),
    }


def run_fisher_experiment(cfg: ExperimentConfig, out=None) -> dict:
    out = _out_dir(out or cfg.out)
    run = fisher_ensemble(cfg)
    times, q = qfi_reference(cfg, run.ensemble.times)
    paths = {
        "fisher_single": io.write_fisher(out / "fisher_single.csv", run.single),
        "fisher_ensemble": io.write_fisher(out / "fisher_ensemble.csv", run.ensemble),
        "qfi": io.write_qfi(out / "qfi.csv", times, q),
        "mh_chain": io.write_chain(out / "mh_chain.csv", run.chain),
    }
    summary = _summary(cfg, run.ensemble, q)
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    paths["summary"] = path
    return paths


def run_operator_sweep(cfg: ExperimentConfig, out=None, operators=OPERATOR_NAMES) -> dict:
    out = _out_dir(out or cfg.out)
    paths = {}
    for name in operators:
        run = fisher_ensemble(cfg, name)
        paths[name] = io.write_fisher(out / f"sweep_{name}.csv", run.ensemble)
    times, q = qfi_reference(cfg)
    paths["qfi"] = io.write_qfi(out / "qfi.csv", times, q)
    return paths


def run_qfi(cfg: ExperimentConfig, out=None) -> dict:
    out = _out_dir(out or cfg.out)
    times, q = qfi_reference(cfg)
    return {"qfi": io.write_qfi(out / "qfi.csv", times, q)}
