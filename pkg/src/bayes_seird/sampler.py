"""Random-walk Metropolis-Hastings with a tuning phase and seeded, reproducible output.

Random numbers come from numpy's ``PCG64`` bit generator seeded with the
configured integer, and every iteration consumes a fixed number of variates,
so a run is a pure function of (seed, config, target).

Two proposal schemes are offered:

``"adaptive"`` (default)
    One joint Gaussian step per iteration. Its shape is the correlation
    structure learned from the tuning draws and its per-parameter widths are
    the tuned scales.
``"componentwise"``
    One single-coordinate Gaussian step per parameter per iteration, each
    with its own scale and its own acceptance count.

Both reject any proposal whose log density is ``-inf``.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

RNG_ALGORITHM = "numpy.random.PCG64"
PROPOSALS = ("adaptive", "componentwise")

LogDensity = Callable[[np.ndarray], float]


class SamplerError(RuntimeError):
    """Raised when no usable starting point exists or a run cannot proceed."""


@dataclass(frozen=True)
class SamplerConfig:
    """Run lengths, proposal settings and seed.

    Every retained draw and every tuning-round draw is ``thin`` raw
    iterations apart, so ``n_samples * thin`` iterations are run after a
    burn-in of ``n_burnin * thin`` iterations.

    Parameters
    ----------
    proposal_scales
        Per-parameter random-walk standard deviations. ``None`` lets
        :func:`tune` start from :func:`local_scales` at the starting point.
    proposal_corr
        Correlation matrix of the joint step (adaptive scheme). ``None`` means
        the identity; :func:`tune` fills it in.
    start
        Starting point. ``None`` means the caller supplies one.
    """

    n_samples: int = 5000
    n_burnin: int = 2000
    n_tune_rounds: int = 10
    tune_round_len: int = 200
    thin: int = 100
    proposal_scales: tuple | None = None
    proposal_corr: tuple | None = None
    target_accept_range: tuple = (0.2, 0.4)
    seed: int = 0
    proposal: str = "adaptive"
    mode_search: bool = True
    max_init_retries: int = 100
    start: tuple | None = None

    def __post_init__(self):
        for name in ("n_samples", "n_burnin", "n_tune_rounds", "tune_round_len", "thin", "max_init_retries"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        lo, hi = self.target_accept_range
        if not 0.0 < lo < hi < 1.0:
            raise ValueError(f"target_accept_range must satisfy 0 < lo < hi < 1, got {self.target_accept_range}")
        if self.proposal not in PROPOSALS:
            raise ValueError(f"proposal must be one of {PROPOSALS}, got {self.proposal!r}")
        if self.proposal_scales is not None:
            s = np.asarray(self.proposal_scales, dtype=float)
            if s.ndim != 1 or not np.all(np.isfinite(s)) or np.any(s <= 0):
                raise ValueError("proposal_scales must be finite and positive")
            object.__setattr__(self, "proposal_scales", tuple(float(v) for v in s))
        if self.proposal_corr is not None:
            c = np.asarray(self.proposal_corr, dtype=float)
            if c.ndim != 2 or c.shape[0] != c.shape[1] or not np.allclose(c, c.T):
                raise ValueError("proposal_corr must be a symmetric square matrix")
            object.__setattr__(self, "proposal_corr", tuple(tuple(float(v) for v in row) for row in c))
        if self.start is not None:
            object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_burnin": self.n_burnin,
            "n_tune_rounds": self.n_tune_rounds,
            "tune_round_len": self.tune_round_len,
            "thin": self.thin,
            "proposal_scales": None if self.proposal_scales is None else list(self.proposal_scales),
            "target_accept_range": list(self.target_accept_range),
            "seed": int(self.seed),
            "proposal": self.proposal,
            "mode_search": self.mode_search,
            "rng": RNG_ALGORITHM,
        }


@dataclass
class PosteriorSamples:
    """Retained draws with their log densities and run metadata."""

    draws: np.ndarray
    log_post: np.ndarray
    accept_rate: float
    seed: int
    column_names: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float)
        self.log_post = np.asarray(self.log_post, dtype=float)
        if self.draws.ndim != 2 or self.draws.shape[0] != self.log_post.shape[0]:
            raise ValueError("draws must be (n, d) with one log density per row")
        if len(self.column_names) != self.draws.shape[1]:
            raise ValueError("one column name per parameter is required")
        if not 0.0 <= self.accept_rate <= 1.0:
            raise ValueError("accept_rate must lie in [0, 1]")
        self.column_names = tuple(self.column_names)

    def __len__(self):
        return self.draws.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.column_names.index(name)]

    def to_csv_text(self) -> str:
        """Header plus one row per draw; values are printed round-trip exact."""
        lines = [",".join(self.column_names + ("log_post",))]
        for row, lp in zip(self.draws, self.log_post):
            lines.append(",".join(repr(float(v)) for v in row) + "," + repr(float(lp)))
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv_text())

    @classmethod
    def from_csv(cls, path, seed: int = 0, accept_rate: float = float("nan")) -> "PosteriorSamples":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if not header or header[-1] != "log_post":
            raise ValueError(f"{path}: last column must be log_post")
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        rate = accept_rate if math.isfinite(accept_rate) else 0.0
        return cls(table[:, :-1], table[:, -1], rate, seed, tuple(header[:-1]))


@dataclass
class TuningRound:
    scales: np.ndarray
    accept: np.ndarray


def default_column_names(dim: int) -> tuple:
    """``alpha0 .. alpha{K}`` followed by the four rate parameters; ``x0 ..`` for toy targets."""
    if dim < 5:
        return tuple(f"x{j}" for j in range(dim))
    return tuple(f"alpha{k}" for k in range(dim - 4)) + ("betaA", "beta", "gamma", "eta")


def initial_point(n_interventions: int = 5) -> np.ndarray:
    """Order-of-magnitude starting point inside the admissible region.

    The first transmission rate is 2e-7 and each intervention lowers it by
    1e-8, which keeps every partial sum positive.
    """
    alpha = [2e-7] + [-1e-8] * n_interventions
    return np.array(alpha + [0.5, 0.01, 0.01, 0.01])


# -- unconstrained coordinates for the mode search ---------------------------------


def to_unconstrained(theta: np.ndarray) -> np.ndarray:
    """Log interval rates, logit impulse fraction and log rates."""
    theta = np.asarray(theta, dtype=float)
    rates = np.cumsum(theta[:-4])
    bA = min(max(theta[-4], 1e-12), 1 - 1e-12)
    return np.concatenate([np.log(rates), [math.log(bA / (1 - bA))], np.log(theta[-3:])])


def from_unconstrained(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    rates = np.exp(u[:-4])
    alpha = np.diff(np.concatenate([[0.0], rates]))
    bA = 1.0 / (1.0 + math.exp(-u[-4]))
    return np.concatenate([alpha, [bA], np.exp(u[-3:])])


def find_start(
    log_post: LogDensity,
    x0,
    rng: np.random.Generator,
    max_retries: int = 100,
    mode_search: bool = False,
    max_evals: int = 20000,
) -> np.ndarray:
    """Return a point with finite log density, optionally moved to the mode.

    If ``x0`` is not admissible it is jittered multiplicatively up to
    ``max_retries`` times. The mode search runs Nelder-Mead in unconstrained
    coordinates (see :func:`to_unconstrained`) and only applies to the SEIRD
    parameter layout.
    """
    x = np.asarray(x0, dtype=float).copy()
    lp = log_post(x)
    tries = 0
    while not math.isfinite(lp):
        if tries >= max_retries:
            raise SamplerError(f"no finite log-posterior start found after {max_retries} retries")
        x = np.asarray(x0, dtype=float) * np.exp(0.5 * rng.standard_normal(x.size))
        lp = log_post(x)
        tries += 1
    if not mode_search:
        return x

    def objective(u):
        v = log_post(from_unconstrained(u))
        return -v if math.isfinite(v) else 1e300

    u = to_unconstrained(x)
    best = x
    for _ in range(3):
        res = minimize(objective, u, method="Nelder-Mead",
                       options={"maxfev": max_evals, "xatol": 1e-10, "fatol": 1e-6, "adaptive": True})
        u = res.x
        cand = from_unconstrained(u)
        if math.isfinite(log_post(cand)) and log_post(cand) >= log_post(best):
            best = cand
    return best


def local_scales(log_post: LogDensity, x: np.ndarray, drop: float = 0.5, max_halvings: int = 80) -> np.ndarray:
    """Per-coordinate step at which the log density falls by about ``drop``.

    Both directions are searched by bisection on a log scale and the wider
    side is kept, so a point on the edge of the support still gets a usable
    width from the admissible side.
    """
    x = np.asarray(x, dtype=float)
    lp0 = log_post(x)
    out = np.empty(x.size)
    for j in range(x.size):
        best = 0.0
        for sign in (1.0, -1.0):
            lo, hi = 0.0, max(abs(x[j]), 1e-12)
            for _ in range(max_halvings):
                y = x.copy()
                y[j] += sign * hi
                if lp0 - log_post(y) <= drop:
                    lo = hi
                    hi *= 2.0
                else:
                    break
            for _ in range(max_halvings):
                if hi - lo <= 0.05 * hi:
                    break
                mid = 0.5 * (lo + hi)
                y = x.copy()
                y[j] += sign * mid
                if lp0 - log_post(y) <= drop:
                    lo = mid
                else:
                    hi = mid
            best = max(best, lo)
        out[j] = best if best > 0 else 1e-6 * max(abs(x[j]), 1e-12)
    return out


# -- the chain -------------------------------------------------------------------


def _proposal_factor(scales: np.ndarray, corr: np.ndarray | None) -> np.ndarray:
    """Matrix ``L`` such that a joint step is ``L @ z`` with ``z`` standard normal."""
    d = scales.size
    if corr is None:
        return np.diag(scales)
    c = np.asarray(corr, dtype=float)
    try:
        chol = np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        chol = np.linalg.cholesky(c + 1e-8 * np.eye(d))
    return scales[:, None] * chol


class _Chain:
    """Mutable chain state; each ``advance`` call runs ``n`` raw iterations."""

    def __init__(self, log_post: LogDensity, x0: np.ndarray, rng: np.random.Generator):
        self.f = log_post
        self.x = np.array(x0, dtype=float)
        self.lp = float(log_post(self.x))
        if not math.isfinite(self.lp):
            raise SamplerError("starting point has non-finite log density")
        self.rng = rng

    def joint(self, L: np.ndarray, n: int) -> int:
        accepted = 0
        d = self.x.size
        for _ in range(n):
            z = self.rng.standard_normal(d)
            log_u = math.log(self.rng.random())
            prop = self.x + L @ z
            lp = self.f(prop)
            if lp != -math.inf and log_u < lp - self.lp:
                self.x, self.lp = prop, lp
                accepted += 1
        return accepted

    def componentwise(self, scales: np.ndarray, n: int) -> np.ndarray:
        d = self.x.size
        accepted = np.zeros(d, dtype=int)
        for _ in range(n):
            z = self.rng.standard_normal(d)
            log_u = np.log(self.rng.random(d))
            for j in range(d):
                prop = self.x.copy()
                prop[j] += scales[j] * z[j]
                lp = self.f(prop)
                if lp != -math.inf and log_u[j] < lp - self.lp:
                    self.x, self.lp = prop, lp
                    accepted[j] += 1
        return accepted

    def step(self, scheme: str, scales: np.ndarray, L: np.ndarray | None, n: int) -> np.ndarray:
        """Run ``n`` iterations and return per-parameter accepted counts."""
        if scheme == "componentwise":
            return self.componentwise(scales, n)
        return np.full(self.x.size, self.joint(L, n))


def adjust_scales(scales: np.ndarray, accept: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Halve where acceptance is below range, grow by half where above."""
    factor = np.where(accept < lo, 0.5, np.where(accept > hi, 1.5, 1.0))
    return scales * factor


def _resolve(config: SamplerConfig, x0) -> tuple[np.ndarray, np.ndarray | None]:
    if x0 is None:
        if config.start is None:
            raise SamplerError("no starting point given")
        x0 = config.start
    x0 = np.asarray(x0, dtype=float)
    if config.proposal_scales is None:
        scales = None
    else:
        scales = np.asarray(config.proposal_scales, dtype=float)
        if scales.size != x0.size:
            raise ValueError(f"{scales.size} proposal scales for {x0.size} parameters")
    return x0, scales


def tune(
    config: SamplerConfig,
    log_post: LogDensity,
    x0=None,
    history: list | None = None,
) -> SamplerConfig:
    """Run the tuning rounds and return a config ready for :func:`sample`.

    After each round of ``tune_round_len * thin`` iterations the scale of
    every parameter is halved if its acceptance fell below the target
    range, multiplied by 1.5 if above, and left alone inside it. With the
    adaptive scheme the proposal correlation is re-estimated from the draws
    of the rounds so far (later half), and the per-parameter widths are reset
    to ``2.38 / sqrt(d)`` times the draw standard deviation before the
    acceptance rule is applied on top. Tuning draws are discarded; the
    returned config carries the final state as ``start``.
    """
    rng = np.random.Generator(np.random.PCG64([int(config.seed), 1]))
    x0, scales = _resolve(config, x0)
    x0 = find_start(log_post, x0, rng, config.max_init_retries, config.mode_search)
    if scales is None:
        scales = local_scales(log_post, x0)
    chain = _Chain(log_post, x0, rng)
    d = x0.size
    lo, hi = config.target_accept_range
    corr = None if config.proposal_corr is None else np.asarray(config.proposal_corr)
    width = 1.0
    kept: list[np.ndarray] = []
    for _ in range(config.n_tune_rounds):
        L = None if config.proposal == "componentwise" else _proposal_factor(scales * width, corr)
        accepted = np.zeros(d)
        for _ in range(config.tune_round_len):
            accepted += chain.step(config.proposal, scales * width, L, config.thin)
            kept.append(chain.x.copy())
        rate = accepted / (config.tune_round_len * config.thin)
        if history is not None:
            history.append(TuningRound(scales * width, rate))
        if config.proposal == "componentwise":
            scales = adjust_scales(scales, rate, lo, hi)
            continue
        width = float(adjust_scales(np.array([width]), rate[:1], lo, hi)[0])
        recent = np.array(kept[len(kept) // 2:])
        sd = recent.std(axis=0)
        if len(recent) > 2 * d and np.all(sd > 0):
            corr = np.corrcoef(recent, rowvar=False)
            scales = 2.38 / math.sqrt(d) * sd
    final_scales = scales * width
    return replace(
        config,
        proposal_scales=tuple(final_scales),
        proposal_corr=None if corr is None else tuple(map(tuple, corr)),
        start=tuple(chain.x),
        mode_search=False,
    )


def sample(
    config: SamplerConfig,
    log_post: LogDensity,
    x0=None,
    column_names: Sequence[str] | None = None,
) -> PosteriorSamples:
    """Burn in with a fixed proposal, then keep every ``thin``-th state.

    The proposal is not adapted here, so the retained chain is a plain
    Metropolis-Hastings chain.
    """
    rng = np.random.Generator(np.random.PCG64([int(config.seed), 2]))
    x0, scales = _resolve(config, x0)
    if scales is None:
        raise SamplerError("sample needs proposal scales; run tune first")
    chain = _Chain(log_post, x0, rng)
    d = x0.size
    corr = None if config.proposal_corr is None else np.asarray(config.proposal_corr)
    L = None if config.proposal == "componentwise" else _proposal_factor(scales, corr)
    t0 = time.perf_counter()
    for _ in range(config.n_burnin):
        chain.step(config.proposal, scales, L, config.thin)
    draws = np.empty((config.n_samples, d))
    lps = np.empty(config.n_samples)
    accepted = np.zeros(d)
    for i in range(config.n_samples):
        accepted += chain.step(config.proposal, scales, L, config.thin)
        draws[i] = chain.x
        lps[i] = chain.lp
    per_param = accepted / (config.n_samples * config.thin)
    names = default_column_names(d) if column_names is None else tuple(column_names)
    return PosteriorSamples(
        draws,
        lps,
        float(per_param.mean()),
        int(config.seed),
        names,
        metadata={
            "per_parameter_accept": per_param.tolist(),
            "iterations": (config.n_burnin + config.n_samples) * config.thin,
            "seconds": time.perf_counter() - t0,
            "config": config.to_dict(),
        },
    )


def run(config: SamplerConfig, log_post: LogDensity, x0=None, column_names=None) -> PosteriorSamples:
    """Tune then sample; the tuning history is attached to the metadata."""
    history: list[TuningRound] = []
    tuned = tune(config, log_post, x0, history)
    out = sample(tuned, log_post, column_names=column_names)
    out.metadata["tuning_accept"] = [float(r.accept.mean()) for r in history]
    out.metadata["tuned_scales"] = list(tuned.proposal_scales)
    return out


# -- diagnostics ------------------------------------------------------------------


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Sample autocorrelation at all lags; all NaN for a constant series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    var = np.dot(xc, xc) / n
    if var == 0.0:
        return np.full(n, np.nan)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov / var


def effective_sample_size(x: np.ndarray) -> float:
    """Geyer initial-monotone-sequence ESS; NaN for a constant series."""
    rho = autocorrelation(x)
    n = rho.size
    if np.isnan(rho[0]):
        return float("nan")
    total = 0.0
    prev = math.inf
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        # initial monotone sequence: pairs may not increase
        pair = min(pair, prev)
        total += pair
        prev = pair
    tau = max(2.0 * total - 1.0, 1.0 / n)
    return float(n / tau)


def diagnostics(samples: PosteriorSamples) -> dict:
    """Acceptance, per-parameter moments, lag-1 autocorrelation, ESS and traces.

    Degenerate (constant) columns get ``None`` for autocorrelation and ESS
    and are listed under ``flagged``.
    """
    if len(samples) < 100:
        raise ValueError("diagnostics need at least 100 draws")
    params = {}
    flagged = []
    for j, name in enumerate(samples.column_names):
        col = samples.draws[:, j]
        rho = autocorrelation(col)
        ess = effective_sample_size(col)
        if np.isnan(ess):
            flagged.append(name)
        params[name] = {
            "mean": float(col.mean()),
            "sd": float(col.std(ddof=1)),
            "q025": float(np.quantile(col, 0.025)),
            "q500": float(np.quantile(col, 0.5)),
            "q975": float(np.quantile(col, 0.975)),
            "lag1_autocorr": None if np.isnan(rho[1]) else float(rho[1]),
            "ess": None if np.isnan(ess) else ess,
        }
    return {
        "acceptance_rate": samples.accept_rate,
        "n_samples": len(samples),
        "parameters": params,
        "flagged": flagged,
        "trace": {name: samples.draws[:, j].tolist() for j, name in enumerate(samples.column_names)}
        | {"log_post": samples.log_post.tolist()},
    }


def summary_json(report: dict) -> str:
    """Summary without the trace series (those go to the samples CSV)."""
    slim = {k: v for k, v in report.items() if k != "trace"}
    return json.dumps(slim, indent=2, sort_keys=True) + "\n"


def write_summary_json(path, report: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(summary_json(report))
