"""Run configuration: a versioned YAML file with every default written out."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .data import DEFAULT_TRAIN_END
from .dynamics import QATAR_INIT, QATAR_SCHEDULE, InterventionSchedule, StateVector
from .model import PriorSpec
from .sampler import SamplerConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


@dataclass(frozen=True)
class RunConfig:
    data_path: str = "cases.csv"
    train_end: dt.date = DEFAULT_TRAIN_END
    schedule: InterventionSchedule = QATAR_SCHEDULE
    init: StateVector = QATAR_INIT
    priors: PriorSpec = field(default_factory=PriorSpec)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    horizon: int = 200
    output_dir: str = "run"
    step: float = 0.05

    def with_overrides(self, seed=None, output_dir=None, train_end=None) -> "RunConfig":
        out = self
        if seed is not None:
            out = replace(out, sampler=replace(out.sampler, seed=int(seed)))
        if output_dir is not None:
            out = replace(out, output_dir=str(output_dir))
        if train_end is not None:
            out = replace(out, train_end=_date(train_end))
        return out

    def to_dict(self) -> dict:
        s = self.sampler
        return {
            "schema_version": SCHEMA_VERSION,
            "data_path": self.data_path,
            "train_end": self.train_end.isoformat(),
            "schedule": {
                "change_days": list(self.schedule.change_days),
                "impulse_day": self.schedule.impulse_day,
            },
            "init": dict(zip("SEIRD", (float(v) for v in self.init.to_array()))),
            "priors": {f.name: getattr(self.priors, f.name) for f in fields(PriorSpec)},
            "sampler": {
                "n_samples": s.n_samples,
                "n_burnin": s.n_burnin,
                "n_tune_rounds": s.n_tune_rounds,
                "tune_round_len": s.tune_round_len,
                "thin": s.thin,
                "proposal_scales": None if s.proposal_scales is None else list(s.proposal_scales),
                "target_accept_range": list(s.target_accept_range),
                "seed": int(s.seed),
                "proposal": s.proposal,
                "mode_search": s.mode_search,
            },
            "horizon": self.horizon,
            "output_dir": self.output_dir,
            "step": self.step,
        }


def _date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError as exc:
        raise ConfigError(f"bad date {value!r}") from exc


_SAMPLER_KEYS = {
    "n_samples", "n_burnin", "n_tune_rounds", "tune_round_len", "thin", "proposal_scales",
    "target_accept_range", "seed", "proposal", "mode_search",
}


def _section(raw: dict, key: str, allowed: set) -> dict:
    value = raw.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"'{key}' must be a mapping")
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{key}': {sorted(unknown)}")
    return value


def from_dict(raw: dict, base_dir: Path | None = None) -> RunConfig:
    """Build and validate a :class:`RunConfig`; relative data paths resolve against ``base_dir``."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    top = {"schema_version", "data_path", "train_end", "schedule", "init", "priors", "sampler",
           "horizon", "output_dir", "step"}
    unknown = set(raw) - top
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    default = RunConfig()
    try:
        sched = _section(raw, "schedule", {"change_days", "impulse_day"})
        schedule = InterventionSchedule(
            tuple(sched.get("change_days", default.schedule.change_days)),
            sched.get("impulse_day", default.schedule.impulse_day),
        )
        init_raw = _section(raw, "init", set("SEIRD"))
        init = StateVector(*(float(init_raw.get(k, getattr(default.init, k))) for k in "SEIRD"))
        priors = PriorSpec(**_section(raw, "priors", {f.name for f in fields(PriorSpec)}))
        samp = dict(_section(raw, "sampler", _SAMPLER_KEYS))
        if "target_accept_range" in samp:
            samp["target_accept_range"] = tuple(samp["target_accept_range"])
        sampler = SamplerConfig(**samp)
        if sampler.proposal_scales is not None and len(sampler.proposal_scales) != schedule.n_interventions + 5:
            raise ConfigError("proposal_scales must have one entry per parameter")
        horizon = raw.get("horizon", default.horizon)
        if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 1:
            raise ConfigError("horizon must be a positive integer")
        step = float(raw.get("step", default.step))
        if not 0 < step <= 1:
            raise ConfigError("step must lie in (0, 1]")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    data_path = str(raw.get("data_path", default.data_path))
    if base_dir is not None and not Path(data_path).is_absolute():
        data_path = str((base_dir / data_path).resolve())
    return RunConfig(
        data_path=data_path,
        train_end=_date(raw.get("train_end", default.train_end)),
        schedule=schedule,
        init=init,
        priors=priors,
        sampler=sampler,
        horizon=horizon,
        output_dir=str(raw.get("output_dir", default.output_dir)),
        step=step,
    )


def load(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(raw, base_dir=path.parent)


def dump(config: RunConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
