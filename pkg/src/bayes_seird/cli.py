"""Command-line entry point: ``bayes-seird {init,fit,analyze,predict,simulate}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric or
sampler failure. Failures also write ``error.json`` to the output directory
(when it can be created) and print the same JSON on stderr.
"""
from __future__ import annotations

import hashlib
import io
import json
import os
import platform
import sys
import tempfile
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import __version__, analysis
from . import config as cfgmod
from .config import SCHEMA_VERSION, ConfigError, RunConfig
from .data import DataError, load_series
from .dynamics import COMPARTMENTS, IntegrationError, ParameterVector, in_support, integrate
from .estimator import fit_posterior
from .sampler import PosteriorSamples, SamplerError, diagnostics, summary_json

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


# -- file helpers -------------------------------------------------------------------


def atomic_write(path: Path, data: str | bytes) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _frame_csv(frame: pd.DataFrame, index=True) -> str:
    buf = io.StringIO()
    frame.to_csv(buf, index=index, lineterminator="\n", float_format="%.17g")
    return buf.getvalue()


def _table_json(frame: pd.DataFrame) -> dict:
    return {"schema_version": SCHEMA_VERSION, "rows": {str(k): {c: float(v) for c, v in row.items()}
                                                       for k, row in frame.iterrows()}}


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class _Run:
    """Collects written artifacts for the manifest."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.files: list[Path] = []

    def write(self, name: str, data: str | bytes) -> Path:
        p = self.out / name
        atomic_write(p, data)
        self.files.append(p)
        return p

    def manifest(self, command: str, config: RunConfig, extra: dict | None = None) -> None:
        body = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "package_version": __version__,
            "numpy_version": np.__version__,
            "python_version": platform.python_version(),
            "seed": int(config.sampler.seed),
            "config": config.to_dict(),
            "artifacts": {p.name: _sha256(p) for p in self.files},
        }
        if extra:
            body.update(extra)
        atomic_write(self.out / f"manifest_{command}.json", _json_text(body))


# -- error handling -----------------------------------------------------------------


def _fail(ctx: click.Context, code: int, kind: str, exc: BaseException) -> None:
    payload = {"schema_version": SCHEMA_VERSION, "error": kind, "message": str(exc), "exit_code": code}
    text = _json_text(payload)
    out = (ctx.obj or {}).get("output_dir")
    if out is not None:
        try:
            atomic_write(Path(out) / "error.json", text)
        except OSError:
            pass
    click.echo(text, err=True, nl=False)
    ctx.exit(code)


def _guarded(fn):
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(ctx, EXIT_CONFIG, "config", exc)
        except (DataError, FileNotFoundError) as exc:
            _fail(ctx, EXIT_DATA, "data", exc)
        except (SamplerError, IntegrationError, FloatingPointError) as exc:
            _fail(ctx, EXIT_NUMERIC, "numeric", exc)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _load_config(ctx: click.Context, train_end=None) -> RunConfig:
    obj = ctx.obj
    path = obj["config_path"]
    if path is None:
        raise ConfigError("--config is required for this command")
    conf = cfgmod.load(path).with_overrides(obj["seed"], obj["output_dir_flag"], train_end)
    obj["output_dir"] = conf.output_dir
    return conf


def _load_samples(path) -> PosteriorSamples:
    path = Path(path)
    if not path.exists():
        raise DataError(f"samples file not found: {path}")
    try:
        samples = PosteriorSamples.from_csv(path)
    except (ValueError, IndexError) as exc:
        raise DataError(f"malformed samples file {path}: {exc}") from exc
    if len(samples) == 0:
        raise DataError(f"samples file {path} has no draws")
    return samples


# -- commands -----------------------------------------------------------------------


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="YAML run config.")
@click.option("--seed", type=int, default=None, help="Override the sampler seed.")
@click.option("--workers", type=int, default=1, show_default=True, help="Threads for predictive fan-out.")
@click.option("--output-dir", type=click.Path(file_okay=False), default=None, help="Override output_dir.")
@click.version_option(__version__)
@click.pass_context
def main(ctx, config_path, seed, workers, output_dir):
    """Bayesian SEIRD fitting with piecewise transmission rates."""
    ctx.ensure_object(dict)
    ctx.obj.update(
        config_path=config_path, seed=seed, workers=max(1, workers),
        output_dir_flag=output_dir, output_dir=output_dir,
    )


@main.command()
@click.argument("path", type=click.Path(dir_okay=False), default="config.yaml")
@click.option("--data", "data_path", default="cases.csv", show_default=True)
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
@click.pass_context
@_guarded
def init(ctx, path, data_path, force):
    """Write a config file with every default spelled out."""
    path = Path(path)
    if path.exists() and not force:
        raise ConfigError(f"{path} exists; use --force to overwrite")
    conf = RunConfig(data_path=data_path)
    conf = conf.with_overrides(ctx.obj["seed"], ctx.obj["output_dir_flag"])
    atomic_write(path, cfgmod.dump(conf))
    click.echo(str(path))


@main.command()
@click.option("--train-end", default=None, help="Last training date (YYYY-MM-DD).")
@click.pass_context
@_guarded
def fit(ctx, train_end):
    """Tune and run the sampler; write samples.csv, diagnostics.json and a manifest."""
    conf = _load_config(ctx, train_end)
    obs = load_series(conf.data_path, conf.train_end)
    samples = fit_posterior(obs, conf.schedule, conf.init, conf.priors, conf.sampler, step=conf.step)
    run = _Run(conf.output_dir)
    run.write("samples.csv", samples.to_csv_text())
    if len(samples) >= 100:
        report = diagnostics(samples)
    else:
        report = {"acceptance_rate": samples.accept_rate, "n_samples": len(samples), "parameters": {},
                  "flagged": [], "trace": {}}
    report["schema_version"] = SCHEMA_VERSION
    report["tuning_accept"] = samples.metadata.get("tuning_accept")
    report["n_evaluations"] = samples.metadata.get("n_evaluations")
    report["n_integration_failures"] = samples.metadata.get("n_integration_failures")
    run.write("diagnostics.json", summary_json(report))
    run.manifest("fit", conf, {"train_len": obs.train_len, "test_len": obs.test_len})
    click.echo(f"{len(samples)} draws, acceptance {samples.accept_rate:.3f} -> {conf.output_dir}")


@main.command()
@click.option("--samples", "samples_path", default=None, help="Samples CSV (default: <output_dir>/samples.csv).")
@click.pass_context
@_guarded
def analyze(ctx, samples_path):
    """Write parameter summaries, sequential contrasts and interval transmission rates."""
    conf = _load_config(ctx)
    samples = _load_samples(samples_path or Path(conf.output_dir) / "samples.csv")
    if len(samples) < 2:
        raise DataError("need at least two draws to summarize")
    if samples.draws.shape[1] != conf.schedule.n_interventions + 5:
        raise DataError("samples do not match the configured schedule")
    tables = {
        "summary": analysis.summarize(samples),
        "contrasts": analysis.contrasts(samples),
        "interval_rates": analysis.interval_rates(samples, conf.schedule),
    }
    run = _Run(conf.output_dir)
    for name, frame in tables.items():
        run.write(f"{name}.csv", _frame_csv(frame))
        run.write(f"{name}.json", _json_text(_table_json(frame)))
    run.manifest("analyze", conf)
    click.echo(f"tables -> {conf.output_dir}")


@main.command()
@click.option("--samples", "samples_path", default=None, help="Samples CSV (default: <output_dir>/samples.csv).")
@click.option("--horizon", type=int, default=None, help="Last forecast day (default from config).")
@click.option("--train-end", default=None, help="Last training date (YYYY-MM-DD).")
@click.pass_context
@_guarded
def predict(ctx, samples_path, horizon, train_end):
    """Posterior-predictive bands, new infections, peak interval and R^2 values."""
    conf = _load_config(ctx, train_end)
    horizon = conf.horizon if horizon is None else horizon
    obs = load_series(conf.data_path, conf.train_end)
    if horizon < obs.train_len:
        raise ConfigError(f"horizon {horizon} is shorter than the training range ({obs.train_len} days)")
    samples = _load_samples(samples_path or Path(conf.output_dir) / "samples.csv")
    bad = [i for i, row in enumerate(samples.draws) if not in_support(row)]
    if bad:
        raise DataError(f"{len(bad)} draws lie outside the parameter support")
    last = max(horizon, len(obs) - 1)
    pp = analysis.posterior_predictive(
        samples, conf.schedule, conf.init, last, seed=int(conf.sampler.seed), workers=ctx.obj["workers"]
    )
    bands = pp.bands
    train_days = np.arange(obs.train_len)
    test_days = np.arange(obs.train_len, len(obs))
    run = _Run(conf.output_dir)
    run.write("bands_fit.csv", _frame_csv(bands.restrict(train_days).to_frame(), index=False))
    if test_days.size:
        run.write("bands_test.csv", _frame_csv(bands.restrict(test_days).to_frame(), index=False))
    run.write("bands.csv", _frame_csv(bands.restrict(np.arange(horizon + 1)).to_frame(), index=False))
    new = analysis.new_infections(pp.counts[:, : horizon + 1])
    run.write("new_infections.csv", _frame_csv(new.to_frame(), index=False))
    peak = analysis.peak_interval(pp.trajectories[:, : horizon + 1, 2])
    run.write("peak_days.csv", _frame_csv(pd.DataFrame({"peak_day": peak.peak_days}), index=False))
    inside = bands.restrict(np.arange(1, obs.train_len)).contains(obs.as_array()[1 : obs.train_len])
    metrics = {
        "schema_version": SCHEMA_VERSION,
        "horizon": horizon,
        "pseudo_r2": analysis.pseudo_r2(bands, obs, np.arange(1, obs.train_len)),
        "predictive_r2": analysis.predictive_r2(bands, obs) if obs.test_len else None,
        "train_coverage": float(inside.mean()),
        "peak_interval": [int(round(peak.lower)), int(round(peak.upper))],
        "peak_horizon_limited": peak.horizon_limited,
        "peak_draws_at_boundary": peak.n_at_boundary,
    }
    run.write("peak_interval.csv", f"lower,upper\n{metrics['peak_interval'][0]},{metrics['peak_interval'][1]}\n")
    run.write("metrics.json", _json_text(metrics))
    run.manifest("predict", conf, {"horizon": horizon})
    click.echo(_json_text({k: metrics[k] for k in ("pseudo_r2", "predictive_r2", "peak_interval")}), nl=False)


def _parse_params(text: str) -> np.ndarray:
    p = Path(text)
    if p.exists():
        text = p.read_text()
    try:
        values = [float(v) for v in text.replace("\n", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse parameters: {exc}") from exc
    return np.array(values)


@main.command()
@click.option("--params", "params_text", required=True,
              help="Comma-separated alpha0..alphaK,betaA,beta,gamma,eta or a file holding them.")
@click.option("--horizon", type=int, default=None, help="Last day (default from config).")
@click.pass_context
@_guarded
def simulate(ctx, params_text, horizon):
    """Integrate the mean system once at the given parameters; write trajectory.csv."""
    conf = _load_config(ctx)
    horizon = conf.horizon if horizon is None else horizon
    if horizon < 1:
        raise ConfigError("horizon must be at least 1")
    theta = _parse_params(params_text)
    if theta.size != conf.schedule.n_interventions + 5:
        raise ConfigError(f"expected {conf.schedule.n_interventions + 5} parameters, got {theta.size}")
    if not in_support(theta):
        raise ConfigError("parameters lie outside the support (check partial sums of alpha and the rate signs)")
    traj = integrate(ParameterVector.from_array(theta), conf.schedule, conf.init, horizon, step=conf.step)
    frame = pd.DataFrame(traj.states, columns=list(COMPARTMENTS))
    frame.insert(0, "day", traj.days)
    run = _Run(conf.output_dir)
    run.write("trajectory.csv", _frame_csv(frame, index=False))
    run.manifest("simulate", conf, {"params": theta.tolist(), "horizon": horizon})
    click.echo(f"trajectory -> {Path(conf.output_dir) / 'trajectory.csv'}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
