"""Monte-Carlo comparison of the regularized estimator against plain RLS.

Each run draws a fresh white Gaussian input and noise sequence, feeds the
record sample by sample to every estimator, and scores the current model
after each sample:

* impulse-response MSE against the true system's first ``mse_horizon`` taps;
* fit on the whole record, predicting with the current FIR estimate.

Run ``seed`` draws its input from ``default_rng([seed, 0])`` and its noise
from ``default_rng([seed, 1])``.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import lti_sim, metrics, prior, reg_recursive, rls_baseline
from .hyper_update import ProjectionContext

logger = logging.getLogger(__name__)

REGULARIZED = "regularized"
MAX_FAILED_FRACTION = 0.2
#: noise variance handed to the regularized estimator when noise_std == 0
SIGMA2_FLOOR = 1e-10


@dataclass
class ExperimentConfig:
    n: int = 50
    samples: int = 250
    input_std: float = 0.5
    noise_std: float = 0.05
    rls_f0_list: list[float] = field(default_factory=lambda: [0.1, 1.0, 10.0, 100.0])
    gamma: float = 1.0
    eta1_init: float = math.log(0.001)
    ratio_init: float = math.log(0.9)
    runs: int = 10
    base_seed: int = 0
    seeds: list[int] | None = None
    fresh_input: bool = True
    correction_order: int = 1
    max_updates: int | None = None
    epsilon: float = 1e-4
    mse_horizon: int | None = None
    true_fir: list[float] | None = None
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("n", "samples", "runs", "correction_order", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("input_std", "epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_std < 0 or self.gamma < 0:
            raise ValueError("noise_std and gamma must be nonnegative")
        if not self.ratio_init < 0:
            raise ValueError("ratio_init must be negative (decaying prior variances)")
        if any(not f > 0 for f in self.rls_f0_list):
            raise ValueError("every RLS initial gain must be positive")
        if self.seeds is not None and len(self.seeds) != self.runs:
            raise ValueError(f"{len(self.seeds)} seeds given for {self.runs} runs")
        if self.mse_horizon is not None and not 1 <= self.mse_horizon <= self.n:
            raise ValueError("mse_horizon must be in [1, n]")
        if self.max_updates is not None and self.max_updates < 1:
            raise ValueError("max_updates must be >= 1")

    @property
    def horizon(self) -> int:
        return self.n if self.mse_horizon is None else self.mse_horizon

    def run_seeds(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.base_seed + i for i in range(self.runs)]

    def true_system(self) -> lti_sim.TransferFunction:
        if self.true_fir is None:
            return lti_sim.nominal_system()
        return lti_sim.TransferFunction(tuple(self.true_fir))

    @property
    def sigma2(self) -> float:
        """Noise variance assumed by the regularized estimator."""
        return max(self.noise_std**2, SIGMA2_FLOOR)

    def eta0(self) -> prior.HyperVector:
        return prior.HyperVector.affine(self.eta1_init, -self.ratio_init, self.n)

    def estimator_names(self) -> list[str]:
        return [rls_name(f) for f in self.rls_f0_list] + [REGULARIZED]

    # -- flat ``key = value`` text format --------------------------------

    def dumps(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> ExperimentConfig:
        return cls(**parse_config_text(text))


_FIELD_TYPES = {
    "n": int, "samples": int, "runs": int, "base_seed": int, "correction_order": int,
    "workers": int, "input_std": float, "noise_std": float, "gamma": float,
    "eta1_init": float, "ratio_init": float, "epsilon": float,
}


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def parse_value(name: str, raw: str):
    """Convert the text of one config entry to the field's type."""
    raw = raw.strip()
    if name in _FIELD_TYPES:
        return _FIELD_TYPES[name](raw)
    if name == "fresh_input":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"fresh_input: expected a boolean, got {raw!r}")
    if name in ("seeds", "max_updates", "mse_horizon", "true_fir") and raw.lower() in ("none", ""):
        return None
    if name in ("rls_f0_list", "true_fir"):
        return [float(v) for v in raw.replace(",", " ").split()]
    if name == "seeds":
        return [int(v) for v in raw.replace(",", " ").split()]
    if name in ("max_updates", "mse_horizon"):
        return int(raw)
    raise KeyError(f"unknown config key {name!r}")


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = parse_value(key, raw)
    return values


def rls_name(f0: float) -> str:
    return f"rls_f0_{f0:g}"


# -- one run -------------------------------------------------------------


@dataclass
class RunResult:
    seed: int
    snr_db: float
    series: dict[str, metrics.MetricsSeries]


def make_record(cfg: ExperimentConfig, seed: int, tf: lti_sim.TransferFunction) -> lti_sim.DataRecord:
    input_seed = seed if cfg.fresh_input else cfg.run_seeds()[0]
    u = cfg.input_std * np.random.default_rng([input_seed, 0]).standard_normal(cfg.samples)
    record = lti_sim.simulate(tf, u, cfg.noise_std, seed=[seed, 1])
    return dataclasses.replace(record, seed=seed)


def run_single(cfg: ExperimentConfig, seed: int, tf: lti_sim.TransferFunction | None = None) -> RunResult:
    """Simulate one record and score every estimator after each sample."""
    tf = cfg.true_system() if tf is None else tf
    record = make_record(cfg, seed, tf)
    g_true = lti_sim.impulse_response(tf, cfg.horizon)
    Phi = lti_sim.regressor_matrix(record.u, cfg.n)
    y = record.y

    rls_states = {rls_name(f): rls_baseline.rls_init(cfg.n, f) for f in cfg.rls_f0_list}
    reg_state = reg_recursive.reg_init(
        cfg.n, cfg.eta0(), cfg.sigma2, correction_order=cfg.correction_order, max_updates=cfg.max_updates
    )
    ctx = ProjectionContext(cfg.n, epsilon=cfg.epsilon, gamma=cfg.gamma)

    series = {name: metrics.MetricsSeries() for name in rls_states}
    series[REGULARIZED] = metrics.MetricsSeries(eta=[])

    def score(name, theta, eps, t, eta=None):
        mse = metrics.impulse_mse(theta, g_true, cfg.horizon)
        fit = metrics.fit_percent(y, Phi @ theta)
        series[name].append(t, mse, fit, eps, eta)

    for t in range(cfg.samples):
        phi, y_t = Phi[t], y[t]
        for name, state in rls_states.items():
            state, eps = rls_baseline.rls_step(state, phi, y_t)
            rls_states[name] = state
            score(name, state.theta_hat, eps, t + 1)
        reg_state, diag = reg_recursive.step(reg_state, phi, y_t, ctx)
        score(REGULARIZED, reg_state.theta_hat, diag.epsilon_o, t + 1, reg_state.eta.eta)

    snr = metrics.snr_db(record.y_clean, cfg.noise_std) if cfg.noise_std > 0 else math.inf
    return RunResult(seed=seed, snr_db=snr, series=series)


def _run_guarded(args):
    cfg, seed = args
    try:
        return run_single(cfg, seed)
    except Exception as exc:  # a failed run is reported, not fatal
        logger.warning("run with seed %d failed: %s", seed, exc)
        return exc


# -- the study -----------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[RunResult]
    failed: dict[int, str]
    mean: dict[str, metrics.MetricsSeries]

    @property
    def mean_snr_db(self) -> float:
        return float(np.mean([r.snr_db for r in self.runs])) if self.runs else math.nan

    @property
    def failed_fraction(self) -> float:
        return len(self.failed) / (len(self.failed) + len(self.runs))

    @property
    def ok(self) -> bool:
        return bool(self.runs) and self.failed_fraction <= MAX_FAILED_FRACTION


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every seed, drop failed runs, and average the rest pointwise."""
    seeds = cfg.run_seeds()
    jobs = [(cfg, s) for s in seeds]
    if cfg.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_guarded, jobs))
    else:
        outcomes = [_run_guarded(job) for job in jobs]

    runs, failed = [], {}
    for seed, outcome in zip(seeds, outcomes):
        if isinstance(outcome, Exception):
            failed[seed] = f"{type(outcome).__name__}: {outcome}"
        else:
            runs.append(outcome)
    mean = {}
    if runs:
        for name in cfg.estimator_names():
            mean[name] = metrics.MetricsSeries.mean_of([r.series[name] for r in runs])
    return ExperimentResult(config=cfg, runs=runs, failed=failed, mean=mean)


def summary_rows(result: ExperimentResult) -> list[dict]:
    rows = []
    for name, s in result.mean.items():
        rows.append(
            {
                "estimator": name,
                "final_mse_impulse": s.mse_impulse[-1],
                "final_fit_percent": s.fit_percent[-1],
                "mean_mse_impulse": float(np.mean(s.mse_impulse)),
            }
        )
    return rows


# -- CSV -----------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def emit_csv(series: metrics.MetricsSeries, path, ts: float | None = None) -> Path:
    """Write ``t,mse_impulse,fit_percent[,eta_1..eta_n]`` rows.

    Floats carry 17 significant digits so reading the file back recovers
    every value bit for bit.  With ``ts`` the time column is in seconds.
    """
    path = Path(path)
    header = ["t", "mse_impulse", "fit_percent"]
    n_eta = 0
    if series.eta is not None:
        n_eta = len(series.eta[0]) if series.eta else 0
        header += [f"eta_{k}" for k in range(1, n_eta + 1)]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for i, t in enumerate(series.t):
                row = [str(t) if ts is None else _fmt(t * ts), _fmt(series.mse_impulse[i]), _fmt(series.fit_percent[i])]
                if n_eta:
                    row += [_fmt(v) for v in series.eta[i]]
                writer.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Parse a file written by :func:`emit_csv` (or a dataset file) into columns."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        values = [r[j] for r in body]
        if name == "t" and all(v.lstrip("-").isdigit() for v in values):
            cols[name] = np.array([int(v) for v in values], dtype=int)
        else:
            cols[name] = np.array([float(v) for v in values], dtype=float)
    return cols


def write_dataset(record: lti_sim.DataRecord, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "u", "y"])
        for t, (u, y) in enumerate(zip(record.u, record.y)):
            writer.writerow([t, _fmt(u), _fmt(y)])
    return path


def read_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    cols = read_csv(path)
    missing = {"t", "u", "y"} - cols.keys()
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    return cols["u"], cols["y"]


def write_results(result: ExperimentResult, outdir, ts: float | None = None) -> list[Path]:
    """Mean curves under ``outdir/mean``, raw runs under ``outdir/runs/seed_<s>``."""
    outdir = Path(outdir)
    written = []
    for name, s in result.mean.items():
        written.append(emit_csv(s, outdir / "mean" / f"{name}.csv", ts=ts))
    for run in result.runs:
        for name, s in run.series.items():
            written.append(emit_csv(s, outdir / "runs" / f"seed_{run.seed}" / f"{name}.csv", ts=ts))
    summary = outdir / "summary.csv"
    with open(summary, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["estimator", "final_mse_impulse", "final_fit_percent", "mean_mse_impulse"])
        for row in summary_rows(result):
            writer.writerow([row["estimator"]] + [_fmt(row[k]) for k in list(row)[1:]])
        writer.writerow(["mean_snr_db", _fmt(result.mean_snr_db), "", ""])
    written.append(summary)
    return written
