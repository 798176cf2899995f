"""Seeded wedge-versus-uniform trial sweeps and their flat-file outputs.

Every trial draws its own model and samples from streams keyed by
``(master seed, experiment, cell, trial)``, so results do not depend on the
order in which a worker pool schedules trials.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io as _io
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as rngmod
from .completion import SpectralCompletionConfig, estimate_subspace, spectral_complete_symmetric
from .delta_norm import delta_norm_estimate, loglog_slope, spectral_norm_estimate
from .gd import CPErrorEvaluator, DivergenceError, RetrievalError, default_step_size, gd_complete
from .sampling import sample_uniform
from .subspace import procrustes_align
from .tensor_core import cp_incoherence_check, cp_to_dense, random_cp_model, unfolding_svd

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultRow",
    "CSV_HEADER",
    "TRACE_HEADER",
    "budget_rates",
    "run_subspace_sweep",
    "run_spectral_sweep",
    "run_gd_sweep",
    "run_delta_probe",
    "run_experiment",
    "median_table",
    "rows_to_csv",
    "emit_outputs",
    "replay",
]

CSV_HEADER = ["experiment", "n", "r", "s", "scheme", "trial", "seed", "samples", "metric", "value", "wall_ms", "failure_code"]
TRACE_HEADER = ["n", "r", "s", "scheme", "trial", "iteration", "F", "rel_err_F", "rel_err_inf"]
KINDS = ("subspace", "spectral", "gd", "delta_probe")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """One sweep over a grid of ``(n, r, s)`` cells.

    Wedge sampling runs at ``p = c log n / n^(s+1)`` and the uniform baseline
    at ``c log n / n^s``, which spends the same expected number of entry
    observations on an ``n x n^2`` unfolding. For ``gd`` and ``spectral`` the
    uniform completion sample uses rate ``q_const log n / n^q_exp``, or the
    uniform baseline rate when ``q_exp`` is unset. For ``delta_probe`` the
    entries of ``s`` are rate exponents: ``q = n^(-s)``.
    """

    experiment: str = "subspace"
    n: list = field(default_factory=lambda: [100])
    r: list = field(default_factory=lambda: [2])
    s: list = field(default_factory=lambda: [1.75])
    trials: int = 20
    seed: int = 0
    c: float = 8.0
    schemes: list = field(default_factory=lambda: ["wedge", "uniform"])
    eval_size: int | None = None
    q_const: float | None = None
    q_exp: float | None = None
    p_override: float | None = None
    t_max: int = 500
    step: str = "estimated"
    restarts: int = 5
    iters: int = 100
    out_dir: str = "out"
    plots: bool = False
    timing: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment not in KINDS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {KINDS}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        for name in ("n", "r", "s", "schemes"):
            if not isinstance(getattr(self, name), list):
                raise ConfigError(f"{name} must be a list")
        if any(int(v) != v or v < 1 for v in self.n + self.r):
            raise ConfigError("n and r must be positive integers")
        if any(r > n for n in self.n for r in self.r):
            raise ConfigError("every rank must be at most every n")
        if not set(self.schemes) <= {"wedge", "uniform"}:
            raise ConfigError(f"schemes must be wedge and/or uniform, got {self.schemes}")
        if self.c <= 0:
            raise ConfigError("c must be positive")
        if self.step not in ("estimated", "oracle"):
            raise ConfigError("step must be 'estimated' or 'oracle'")
        if self.p_override is not None and not 0 < self.p_override <= 1:
            raise ConfigError("p_override must lie in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        """Digest of every field that influences results (paths and plot flags excluded)."""
        d = self.to_dict()
        for k in ("out_dir", "plots"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def cells(self):
        return [(n, r, si, s) for n in self.n for r in self.r for si, s in enumerate(self.s)]


@dataclass
class ResultRow:
    experiment: str
    n: int
    r: int
    s: float
    scheme: str
    trial: int
    seed: int
    samples: int
    metric: str
    value: float
    wall_ms: float | None = None
    failure_code: str = ""

    def as_csv(self):
        return [
            self.experiment, self.n, self.r, _fmt(self.s), self.scheme, self.trial, self.seed,
            self.samples, self.metric, _fmt(self.value),
            "" if self.wall_ms is None else f"{self.wall_ms:.3f}", self.failure_code,
        ]


def _fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def budget_rates(n: int, s: float, c: float, m: int | None = None):
    """``(p_wedge, p_unif)`` for budget exponent ``s`` on an ``n x m`` unfolding."""
    m = n * n if m is None else m
    p_w = min(1.0, c * math.log(n) / n ** (s + 1))
    p_u = min(1.0, c * math.log(n) / n**s * (n * n / m))
    return p_w, p_u


def trial_seed(cfg: ExperimentConfig, n, r, si, trial) -> int:
    return rngmod.derive_seed(cfg.seed, rngmod.tag(cfg.experiment), n, r, si, trial)


def _subspace_rate(cfg, n, s, scheme):
    if cfg.p_override is not None:
        return cfg.p_override if scheme == "wedge" else min(1.0, cfg.p_override * n)
    p_w, p_u = budget_rates(n, s, cfg.c)
    return p_w if scheme == "wedge" else p_u


def _completion_rate(cfg, n, s):
    if cfg.q_exp is None:
        return _subspace_rate(cfg, n, s, "uniform")
    return min(1.0, (cfg.q_const or cfg.c) * math.log(n) / n**cfg.q_exp)


def _stream_tag(scheme):
    return rngmod.WEDGE if scheme == "wedge" else rngmod.INIT_UNIFORM


def _subspace_trial(cfg, n, r, si, s, trial):
    seed = trial_seed(cfg, n, r, si, trial)
    model = random_cp_model(n, r, rng=rngmod.stream(seed, rngmod.MODEL))
    U = unfolding_svd(model, 0, right=False)[0][:, :r]
    rows = []
    for scheme in cfg.schemes:
        t0 = time.perf_counter()
        rate = _subspace_rate(cfg, n, s, scheme)
        base = dict(experiment="subspace", n=n, r=r, s=s, scheme=scheme, trial=trial, seed=seed)
        try:
            est, used = estimate_subspace(model, 0, r, rate, rngmod.derive_seed(seed, _stream_tag(scheme), 0), scheme)
            a = procrustes_align(est.U, U)
            metrics = dict(
                rel_err=float(np.linalg.norm(est.U @ a.R - U) / np.linalg.norm(U)),
                op_err=a.op_err,
                two_inf_err=a.two_inf_err,
            )
            code = ""
        except (ValueError, MemoryError, OverflowError) as exc:
            used, code = 0, type(exc).__name__
            metrics = dict(rel_err=math.nan, op_err=math.nan, two_inf_err=math.nan)
        wall = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
        rows += [ResultRow(**base, samples=used, metric=k, value=v, wall_ms=wall, failure_code=code) for k, v in metrics.items()]
    return rows, []


def _spectral_trial(cfg, n, r, si, s, trial):
    seed = trial_seed(cfg, n, r, si, trial)
    model = random_cp_model(n, r, rng=rngmod.stream(seed, rngmod.MODEL))
    q = _completion_rate(cfg, n, s)
    rows = []
    for scheme in cfg.schemes:
        t0 = time.perf_counter()
        base = dict(experiment="spectral", n=n, r=r, s=s, scheme=scheme, trial=trial, seed=seed)
        try:
            res = spectral_complete_symmetric(
                model,
                SpectralCompletionConfig(rank=r, p=_subspace_rate(cfg, n, s, scheme), q=q, seed=seed,
                                         init=scheme, eval_size=cfg.eval_size),
            )
            metrics = dict(rel_err=res.rel_error, rel_err_exact=res.rel_error_exact)
            used, code = res.samples["total"], ""
        except (ValueError, MemoryError, OverflowError) as exc:
            metrics = dict(rel_err=math.nan, rel_err_exact=math.nan)
            used, code = 0, type(exc).__name__
        wall = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
        rows += [ResultRow(**base, samples=used, metric=k, value=v, wall_ms=wall, failure_code=code) for k, v in metrics.items()]
    return rows, []


def _gd_trial(cfg, n, r, si, s, trial):
    seed = trial_seed(cfg, n, r, si, trial)
    model = random_cp_model(n, r, rng=rngmod.stream(seed, rngmod.MODEL))
    q = _completion_rate(cfg, n, s)
    evaluator = CPErrorEvaluator(model, subset_size=cfg.eval_size, seed=seed)
    eta = default_step_size(float(model.cp_weights().max())) if cfg.step == "oracle" else None
    rows, traces = [], []
    for scheme in cfg.schemes:
        t0 = time.perf_counter()
        base = dict(experiment="gd", n=n, r=r, s=s, scheme=scheme, trial=trial, seed=seed)
        code, state, used = "", None, 0
        try:
            res = gd_complete(model, _subspace_rate(cfg, n, s, scheme), q, seed=seed, init=scheme, eta=eta,
                              t_max=cfg.t_max, evaluator=evaluator)
            state, used = res.state, res.samples["total"]
        except RetrievalError:
            code = "retrieval_failure"
        except DivergenceError as exc:
            code, state = "divergence", exc.state
        trace = state.trace if state is not None else []
        last = trace[-1] if trace else {}
        metrics = dict(
            init_rel_err_F=trace[0]["rel_err_F"] if trace else math.nan,
            final_rel_err_F=last.get("rel_err_F", math.nan),
            final_rel_err_inf=last.get("rel_err_inf", math.nan),
            iterations=float(state.t) if state is not None else math.nan,
        )
        wall = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
        rows += [ResultRow(**base, samples=used, metric=k, value=v, wall_ms=wall, failure_code=code) for k, v in metrics.items()]
        traces += [[n, r, _fmt(s), scheme, trial, t["iteration"], _fmt(t["F"]), _fmt(t["rel_err_F"]), _fmt(t["rel_err_inf"])]
                   for t in trace]
    return rows, traces


def _delta_trial(cfg, n, r, si, s, trial):
    # one model per (n, r); the trial index only changes the sampling pattern
    mseed = trial_seed(cfg, n, r, 0, 0)
    model = random_cp_model(n, r, rng=rngmod.stream(mseed, rngmod.MODEL))
    T = cp_to_dense(model)
    delta = min(1.0, math.sqrt(cp_incoherence_check(model) / n))
    seed = trial_seed(cfg, n, r, si, trial)
    q = min(1.0, n ** (-s))
    t0 = time.perf_counter()
    obs = sample_uniform(T.shape, q, rngmod.derive_seed(seed, rngmod.UNIFORM))
    D = -T
    flat = D.reshape(-1)
    flat[obs.flat] += T.reshape(-1)[obs.flat] / q
    est_seed = rngmod.derive_seed(seed, rngmod.PROBE)
    dn = delta_norm_estimate(D, delta, restarts=cfg.restarts, iters=cfg.iters, seed=est_seed).value
    op = spectral_norm_estimate(D, restarts=cfg.restarts, iters=cfg.iters, seed=est_seed)
    wall = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
    base = dict(experiment="delta_probe", n=n, r=r, s=s, trial=trial, seed=seed, samples=len(obs), wall_ms=wall)
    return [ResultRow(**base, scheme="delta", metric="delta_norm", value=dn),
            ResultRow(**base, scheme="operator", metric="op_norm", value=op)], []


_TRIALS = dict(subspace=_subspace_trial, spectral=_spectral_trial, gd=_gd_trial, delta_probe=_delta_trial)


def _run_task(args):
    cfg, (n, r, si, s), trial = args
    return _TRIALS[cfg.experiment](cfg, n, r, si, s, trial)


def resolve_threads(threads: int | None) -> int:
    env = os.environ.get("WEDGE_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError as exc:
            raise ConfigError(f"WEDGE_THREADS must be an integer, got {env!r}") from exc
    threads = 1 if threads is None else threads
    if threads < 1:
        raise ConfigError("thread count must be positive")
    return threads


def run_experiment(cfg: ExperimentConfig, threads: int | None = 1):
    """All trials of ``cfg``; returns ``(rows, trace_rows)`` in canonical order."""
    cfg.validate()
    tasks = [(cfg, cell, t) for cell in cfg.cells() for t in range(cfg.trials)]
    threads = resolve_threads(threads)
    if threads == 1 or len(tasks) <= 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_task, tasks))
    rows = [row for res, _ in results for row in res]
    traces = [tr for _, trs in results for tr in trs]
    return rows, traces


def run_subspace_sweep(cfg: ExperimentConfig, threads=1):
    return run_experiment(dataclasses.replace(cfg, experiment="subspace"), threads)[0]


def run_spectral_sweep(cfg: ExperimentConfig, threads=1):
    return run_experiment(dataclasses.replace(cfg, experiment="spectral"), threads)[0]


def run_gd_sweep(cfg: ExperimentConfig, threads=1):
    """GD rows and per-iteration traces: ``(rows, traces)``."""
    return run_experiment(dataclasses.replace(cfg, experiment="gd"), threads)


def run_delta_probe(cfg: ExperimentConfig, threads=1):
    return run_experiment(dataclasses.replace(cfg, experiment="delta_probe"), threads)[0]


def median_table(rows) -> dict:
    """Median per ``(experiment, n, r, s, scheme, metric)``.

    Failed trials (NaN values) count as infinitely bad, so a cell where more
    than half the trials failed has median ``inf``.
    """
    groups = {}
    for row in rows:
        key = (row.experiment, row.n, row.r, row.s, row.scheme, row.metric)
        groups.setdefault(key, []).append(math.inf if math.isnan(row.value) else row.value)
    return {k: float(np.median(v)) for k, v in groups.items()}


def probe_summary(rows) -> list:
    """Per ``(n, q)`` medians of the delta-probe rows plus the log-log slope in q."""
    out = []
    med = median_table(rows)
    for n, r in sorted({(row.n, row.r) for row in rows if row.experiment == "delta_probe"}):
        ss = sorted({row.s for row in rows if row.n == n and row.r == r}, reverse=True)
        qs = [n ** (-s) for s in ss]
        dn = [med[("delta_probe", n, r, s, "delta", "delta_norm")] for s in ss]
        op = [med[("delta_probe", n, r, s, "operator", "op_norm")] for s in ss]
        slope = loglog_slope(qs, dn) if len(qs) > 1 and min(dn) > 0 else math.nan
        out += [dict(n=n, r=r, q=q, median_delta_norm=d, median_op_norm=o, slope=slope) for q, d, o in zip(qs, dn, op)]
    return out


def rows_to_csv(rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(row.as_csv() for row in rows)
    return buf.getvalue()


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def _versions():
    import scipy

    return dict(python=platform.python_version(), numpy=np.__version__, scipy=scipy.__version__, wedgetc=__version__)


def emit_outputs(rows, cfg: ExperimentConfig, traces=None, out_dir=None) -> dict:
    """Write ``results.csv``, optional ``traces.csv`` / ``probe.csv``, SVG plots
    when ``cfg.plots`` is set, and ``manifest.json``. Returns name -> path."""
    out = Path(out_dir or cfg.out_dir)
    paths = {}
    text = rows_to_csv(rows)
    paths["results"] = out / "results.csv"
    _write(paths["results"], text)
    digests = {"results.csv": hashlib.sha256(text.encode()).hexdigest()}
    if cfg.experiment == "gd":
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        w.writerows(traces or [])
        paths["traces"] = out / "traces.csv"
        _write(paths["traces"], buf.getvalue())
        digests["traces.csv"] = hashlib.sha256(buf.getvalue().encode()).hexdigest()
    if cfg.experiment == "delta_probe":
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "r", "q", "median_delta_norm", "median_op_norm", "slope"])
        for d in probe_summary(rows):
            w.writerow([d["n"], d["r"], _fmt(d["q"]), _fmt(d["median_delta_norm"]), _fmt(d["median_op_norm"]), _fmt(d["slope"])])
        paths["probe"] = out / "probe.csv"
        _write(paths["probe"], buf.getvalue())
        digests["probe.csv"] = hashlib.sha256(buf.getvalue().encode()).hexdigest()
    if cfg.plots:
        from .plots import write_plots

        paths.update(write_plots(rows, cfg, out))
    manifest = dict(config=cfg.to_dict(), config_hash=cfg.hash(), seed=cfg.seed, versions=_versions(), sha256=digests)
    paths["manifest"] = out / "manifest.json"
    _write(paths["manifest"], json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths


def replay(manifest_path, out_dir=None, threads=1):
    """Rerun the configuration stored in a manifest.

    Returns ``(identical, paths)`` where ``identical`` says whether every
    recorded CSV digest was reproduced.
    """
    try:
        manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
        cfg = ExperimentConfig.from_dict(manifest["config"])
        recorded = manifest["sha256"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"{manifest_path}: malformed manifest ({exc})") from exc
    if out_dir is not None:
        cfg.out_dir = str(out_dir)
    rows, traces = run_experiment(cfg, threads)
    paths = emit_outputs(rows, cfg, traces)
    fresh = json.loads(Path(paths["manifest"]).read_text(encoding="utf-8"))["sha256"]
    return fresh == recorded, paths
