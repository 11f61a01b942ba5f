"""Run configuration for the experiment driver.

Files are flat ``key = value`` text with ``#`` comments, or a JSON object
with the same keys.
"""

from __future__ import annotations

import json
import math
import typing
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .fisher import ParameterGrid
from .qubit import OPERATORS, ModelParams, operator
from .sme import NormalizationMode, Scheme, SimConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    # dynamics
    dt: float = 1e-3
    t_max: float = 10.0
    delta: float = 1.73
    omega: float = 1.0
    eta: float = 0.01
    operator: str = "sigma_y"
    initial_bloch: tuple = (0.0, 0.0, 1.0)
    normalization_mode: str = "unnormalized"
    scheme: str = "milstein"
    # estimation
    parameter: str = "omega"
    theta_0: typing.Optional[float] = None  # default: grid centred on the true value
    d_theta: float = 0.01
    n_p: int = 100
    central_difference: bool = False
    average: str = "post"
    # Metropolis-Hastings
    n_a: int = 5000
    n_m: int = 1000
    burn_in: typing.Optional[int] = None  # default: 20% of n_a
    proposal_sigma: float = 0.5
    dt_proposal: bool = False  # proposal variance dt instead of proposal_sigma
    prior_scale: typing.Optional[float] = None  # default: d_theta * n_p / 6
    mh_x0: float = 0.0
    # ensemble and output
    n_traj: int = 500
    record_every: int = 10
    chunk_size: int = 25
    qfi_delta: float = 1e-5
    seed: int = 0
    workers: int = 1
    out: str = "out"

    def __post_init__(self):
        try:
            self._validate()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def _validate(self):
        if self.operator not in OPERATORS:
            raise ConfigError(f"operator must be one of {sorted(OPERATORS)}, got {self.operator!r}")
        if self.parameter not in ("omega", "delta"):
            raise ConfigError(f"parameter must be 'omega' or 'delta', got {self.parameter!r}")
        if self.average not in ("post", "pre"):
            raise ConfigError(f"average must be 'post' or 'pre', got {self.average!r}")
        NormalizationMode(self.normalization_mode)
        Scheme(self.scheme)
        for name in ("n_traj", "n_a", "n_m", "record_every", "chunk_size", "workers", "n_p"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.n_m > self.n_a - self.mh_burn_in:
            raise ConfigError(
                f"n_m={self.n_m} exceeds the post-burn-in chain length {self.n_a - self.mh_burn_in}"
            )
        if len(self.initial_bloch) != 3:
            raise ConfigError("initial_bloch needs three components")
        self.sim_config()
        self.grid()

    @property
    def mh_burn_in(self) -> int:
        return self.n_a // 5 if self.burn_in is None else self.burn_in

    @property
    def mh_proposal_sigma(self) -> float:
        return math.sqrt(self.dt) if self.dt_proposal else self.proposal_sigma

    @property
    def mh_prior_scale(self) -> float:
        return self.d_theta * self.n_p / 6 if self.prior_scale is None else self.prior_scale

    @property
    def theta_true(self) -> float:
        return getattr(self, self.parameter)

    def model_params(self, operator_name: str | None = None) -> ModelParams:
        return ModelParams(
            delta=self.delta,
            omega=self.omega,
            eta=self.eta,
            F=operator(operator_name or self.operator),
        )

    def sim_config(self, operator_name: str | None = None) -> SimConfig:
        return SimConfig(
            dt=self.dt,
            t_max=self.t_max,
            params_true=self.model_params(operator_name),
            initial_bloch=tuple(self.initial_bloch),
            seed=self.seed,
            normalization_mode=self.normalization_mode,
            scheme=self.scheme,
        )

    def grid(self) -> ParameterGrid:
        if self.theta_0 is None:
            return ParameterGrid.centered(self.theta_true, self.d_theta, self.n_p)
        return ParameterGrid(self.theta_0, self.d_theta, self.n_p)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["initial_bloch"] = list(self.initial_bloch)
        return d


_HINTS = typing.get_type_hints(ExperimentConfig)
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(name: str, raw):
    hint = _HINTS[name]
    optional = typing.get_origin(hint) is typing.Union
    if optional:
        hint = next(a for a in typing.get_args(hint) if a is not type(None))
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none", "null")):
        if optional:
            return None
        raise ConfigError(f"{name} cannot be empty")
    try:
        if hint is bool:
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in _TRUE:
                return True
            if text in _FALSE:
                return False
            raise ValueError(raw)
        if hint is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if hint is float:
            return float(raw)
        if hint is tuple:
            parts = raw if isinstance(raw, (list, tuple)) else str(raw).replace(",", " ").split()
            return tuple(float(p) for p in parts)
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {name}: {raw!r}") from None


def parse_key_values(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def from_mapping(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    converted = {k: _convert(k, v) for k, v in values.items()}
    return replace(base or ExperimentConfig(), **converted)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError("JSON config must be an object")
    else:
        values = parse_key_values(text)
    return from_mapping(values)
