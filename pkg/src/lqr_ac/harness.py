"""File formats, training CSVs, and multi-T sweeps with slope regression."""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import model as lqr
from .errors import InvalidModel, ModelParseError
from .sampler import SampleConfig, make_env
from .trainer import TrainConfig, train

CSV_COLUMNS = (
    "t", "critic_err_sq", "critic_err", "actor_gap", "lyapunov", "rho_closed_loop",
    "norm_AmBK", "norm_E", "norm_K", "norm_theta_F", "alpha_eff", "beta_eff",
)
MONITORED = ("rho_closed_loop", "norm_AmBK", "norm_E", "norm_K", "norm_theta_F")


def fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


# --- loading -------------------------------------------------------------------

def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelParseError(f"cannot read {path}: {exc}") from exc


def parse_model(data):
    if isinstance(data, str) and data in lqr.EXAMPLES:
        return lqr.EXAMPLES[data]()
    if not isinstance(data, dict):
        raise ModelParseError("model must be a JSON object")
    try:
        return lqr.LqrModel.from_dict(data)
    except (InvalidModel, ValueError, TypeError) as exc:
        raise ModelParseError(f"invalid model: {exc}") from exc


def load_model(path):
    """Model JSON file, or the name of a built-in example ("example1", "example2")."""
    if str(path) in lqr.EXAMPLES and not os.path.exists(path):
        return lqr.EXAMPLES[str(path)]()
    return parse_model(_read_json(path))


def _positive_int(data, key, default=None, minimum=1):
    value = data.get(key, default)
    if value is None or isinstance(value, bool) or int(value) != value or value < minimum:
        raise ModelParseError(f"{key} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def _positive_float(data, key, default=None):
    value = data.get(key, default)
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ModelParseError(f"{key} must be a number, got {value!r}") from None
    if not value > 0 or not math.isfinite(value):
        raise ModelParseError(f"{key} must be positive, got {value}")
    return value


def _sample_config(data):
    try:
        return SampleConfig(
            N=_positive_int(data, "N", 100),
            N0=_positive_int(data, "N0", 100, minimum=0),
            N1=_positive_int(data, "N1", 100, minimum=2),
        )
    except ValueError as exc:
        raise ModelParseError(str(exc)) from exc


def parse_train_config(data, seed=None):
    """Training config JSON: T plus either alpha/beta or stepsize_product (alpha = beta = product / T)."""
    T = _positive_int(data, "T", minimum=0)
    if "alpha" in data or "beta" in data:
        alpha = _positive_float(data, "alpha")
        beta = _positive_float(data, "beta")
    else:
        product = _positive_float(data, "stepsize_product", 4.0)
        alpha = beta = product / max(T, 1)
    try:
        return TrainConfig(
            T=T,
            alpha=alpha,
            beta=beta,
            sample=_sample_config(data),
            seed=int(data.get("seed", 0) if seed is None else seed),
            run=int(data.get("run", 0)),
            warmup_factor=float(data.get("warmup_factor", 3.0)),
            warmup_fraction=float(data.get("warmup_fraction", 0.5)),
            guard_rho=float(data.get("guard_rho", 0.999)),
        )
    except ValueError as exc:
        raise ModelParseError(str(exc)) from exc


def load_train_config(path, seed=None):
    return parse_train_config(_read_json(path), seed)


@dataclass
class ExperimentSpec:
    model: lqr.LqrModel
    t_list: List[int]
    runs_per_t: int = 10
    base_stepsize_product: float = 4.0
    sample: SampleConfig = field(default_factory=SampleConfig)
    seed: int = 0
    warmup_factor: float = 3.0
    warmup_fraction: float = 0.5

    def __post_init__(self):
        if not self.t_list or any(b <= a for a, b in zip(self.t_list, self.t_list[1:])):
            raise ModelParseError(f"t_list must be non-empty and strictly increasing, got {self.t_list}")
        if any(T < 1 for T in self.t_list):
            raise ModelParseError("every T must be positive")
        if self.runs_per_t < 1:
            raise ModelParseError("runs_per_t must be at least 1")

    def train_config(self, T, run):
        step = self.base_stepsize_product / T
        return TrainConfig(T=T, alpha=step, beta=step, sample=self.sample, seed=self.seed,
                           run=run, stream=(T,), warmup_factor=self.warmup_factor,
                           warmup_fraction=self.warmup_fraction)


def parse_experiment(data, base_dir=".", seed=None):
    if "model" not in data:
        raise ModelParseError("experiment needs a 'model' entry (path or inline object)")
    spec_model = data["model"]
    if isinstance(spec_model, str) and spec_model not in lqr.EXAMPLES:
        spec_model = load_model(Path(base_dir) / spec_model)
    else:
        spec_model = parse_model(spec_model)
    t_list = data.get("t_list")
    if not isinstance(t_list, list) or not t_list:
        raise ModelParseError("t_list must be a non-empty list")
    return ExperimentSpec(
        model=spec_model,
        t_list=[_positive_int({"T": T}, "T") for T in t_list],
        runs_per_t=_positive_int(data, "runs_per_t", 10),
        base_stepsize_product=_positive_float(data, "stepsize_product", 4.0),
        sample=_sample_config(data),
        seed=int(data.get("seed", 0) if seed is None else seed),
        warmup_factor=float(data.get("warmup_factor", 3.0)),
        warmup_fraction=float(data.get("warmup_fraction", 0.5)),
    )


def load_experiment(path, seed=None):
    return parse_experiment(_read_json(path), Path(path).parent, seed)


# --- training CSV --------------------------------------------------------------------

def log_rows(log):
    for r in log:
        yield (r.t, r.critic_err_sq, r.critic_err, r.actor_gap, r.lyapunov, r.rho_closed_loop,
               r.norm_AmBK, r.norm_E, r.norm_K, r.norm_theta_F, r.alpha_eff, r.beta_eff)


def write_log_csv(path, result):
    """One row per iteration; a trailing '# status:' line records an abort."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in log_rows(result.log):
            writer.writerow([fmt(v) for v in row])
        if result.error is not None:
            fh.write(f"# status: {type(result.error).__name__}: {result.error}\n")


def read_log_csv(path):
    """Parse a training CSV into a dict of column arrays plus the status (or None)."""
    status = None
    rows = []
    with open(path) as fh:
        header = next(csv.reader([fh.readline()]))
        for line in fh:
            if line.startswith("# status:"):
                status = line[len("# status:"):].strip()
                continue
            rows.append([float(v) for v in line.strip().split(",")])
    cols = {name: np.array([r[i] for r in rows]) for i, name in enumerate(header)}
    return cols, status


# --- sweep ---------------------------------------------------------------------------

@dataclass
class RunOutcome:
    T: int
    run: int
    final_critic_err_sq: Optional[float]
    final_actor_gap: Optional[float]
    maxima: Dict[str, float]
    error: Optional[str] = None
    csv_path: Optional[str] = None


@dataclass
class SweepResult:
    runs: List[RunOutcome]
    t_list: List[int]
    mean_critic: Dict[int, float]
    std_critic: Dict[int, float]
    mean_actor: Dict[int, float]
    std_actor: Dict[int, float]
    completed: Dict[int, int]
    failed: Dict[int, int]
    slope_critic: Optional[float]
    slope_actor: Optional[float]

    def maxima(self, T=None):
        """Max of each monitored norm over all completed runs (optionally one T)."""
        out = {}
        for name in MONITORED:
            vals = [r.maxima[name] for r in self.runs if r.maxima and (T is None or r.T == T)]
            out[name] = max(vals) if vals else float("nan")
        return out

    def to_dict(self):
        return {
            "t_list": self.t_list,
            "per_T": [
                {"T": T, "completed": self.completed[T], "failed": self.failed[T],
                 "mean_critic_err_sq": self.mean_critic.get(T), "std_critic_err_sq": self.std_critic.get(T),
                 "mean_actor_gap": self.mean_actor.get(T), "std_actor_gap": self.std_actor.get(T)}
                for T in self.t_list
            ],
            "slope_critic": self.slope_critic,
            "slope_actor": self.slope_actor,
            "slope_available": self.slope_critic is not None,
            "monitor_maxima": self.maxima(),
            "runs": [
                {"T": r.T, "run": r.run, "final_critic_err_sq": r.final_critic_err_sq,
                 "final_actor_gap": r.final_actor_gap, "maxima": r.maxima, "error": r.error,
                 "csv": None if r.csv_path is None else Path(r.csv_path).name}
                for r in self.runs
            ],
        }


def fit_slope(ts, values):
    """OLS slope of log2(values) against log2(ts); None with fewer than two points."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.size < 2:
        return None
    x, y = np.log2(ts), np.log2(values)
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def run_single(model, cfg, csv_path=None, K_star=None):
    result = train(make_env(model), model, cfg, K_star=K_star)
    if csv_path is not None:
        write_log_csv(csv_path, result)
    return result


def _sweep_job(args):
    model_dict, cfg, csv_path, K_star = args
    model = lqr.LqrModel.from_dict(model_dict)
    result = run_single(model, cfg, csv_path, K_star)
    maxima = {name: max(getattr(r, name) for r in result.log) for name in MONITORED} if result.log else {}
    if result.ok and result.log:
        last = result.log[-1]
        return RunOutcome(cfg.stream[0], cfg.run, last.critic_err_sq, last.actor_gap, maxima,
                          None, csv_path)
    err = f"{type(result.error).__name__}: {result.error}" if result.error else "empty log"
    return RunOutcome(cfg.stream[0], cfg.run, None, None, maxima, err, csv_path)


def aggregate(runs, t_list):
    """Per-T means/stds over completed runs and the two log-log slopes."""
    mean_c, std_c, mean_a, std_a, completed, failed = {}, {}, {}, {}, {}, {}
    for T in t_list:
        ok = [r for r in runs if r.T == T and r.error is None]
        completed[T] = len(ok)
        failed[T] = sum(1 for r in runs if r.T == T and r.error is not None)
        if ok:
            c = np.array([r.final_critic_err_sq for r in ok])
            a = np.array([r.final_actor_gap for r in ok])
            mean_c[T], std_c[T] = float(c.mean()), float(c.std())
            mean_a[T], std_a[T] = float(a.mean()), float(a.std())
    ts = [T for T in t_list if T in mean_c]
    slope_c = fit_slope(ts, [mean_c[T] for T in ts])
    ts_a = [T for T in ts if mean_a[T] > 0]
    slope_a = fit_slope(ts_a, [mean_a[T] for T in ts_a])
    return SweepResult(runs, list(t_list), mean_c, std_c, mean_a, std_a, completed, failed, slope_c, slope_a)


def run_sweep(spec, out_dir=None, threads=1):
    """Train runs_per_t runs for every T, in parallel processes if threads > 1."""
    _, K_star = lqr.solve_riccati(spec.model)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    jobs = []
    for T in spec.t_list:
        for run in range(spec.runs_per_t):
            path = None if out_dir is None else str(Path(out_dir) / f"T{T}_run{run}.csv")
            jobs.append((spec.model.to_dict(), spec.train_config(T, run), path, K_star))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(_sweep_job, jobs))
    else:
        runs = [_sweep_job(job) for job in jobs]
    result = aggregate(runs, spec.t_list)
    if out_dir is not None:
        with open(Path(out_dir) / "summary.json", "w") as fh:
            json.dump(result.to_dict(), fh, indent=2)
    return result


def summary_from_csvs(summary_path):
    """Rebuild the aggregate from the per-run CSVs referenced by a summary file."""
    with open(summary_path) as fh:
        summary = json.load(fh)
    base = Path(summary_path).parent
    runs = []
    for r in summary["runs"]:
        cols, status = read_log_csv(base / r["csv"])
        if status is None and len(cols["t"]):
            runs.append(RunOutcome(r["T"], r["run"], float(cols["critic_err_sq"][-1]),
                                   float(cols["actor_gap"][-1]), {}))
        else:
            runs.append(RunOutcome(r["T"], r["run"], None, None, {}, status or "empty log"))
    return aggregate(runs, summary["t_list"])

