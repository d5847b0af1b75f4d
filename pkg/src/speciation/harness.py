"""Experiment configuration, orchestration and CSV/SVG output.

A config is one JSON object::

    {
      "name": "fig4",
      "model": "moran",
      "kernels": {"L": 14, "capacity": {...}, "cooperation": {...}},
      "params": {"sigma": 0.5, "mu": 6e-5, "N": 50625},
      "horizon": 8000,
      "snapshots": {"interval": 10},
      "replicas": 1,
      "seed": 2750,
      "criterion": {},
      "options": {}
    }

Every CSV starts with ``#`` comment lines carrying the config hash, the
speciation criterion version, the schema name and the package version.
Floats are written with 17 significant digits so files round-trip exactly.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .core import ConfigError, ModelParams, PhenotypeSpace, build_kernels
from .modes import CRITERION_VERSION, SpeciationCriterion
from . import svg

MODELS = ("dd_original", "conditioned_dd", "moran", "ode", "landscape", "mcmc", "bifurcation",
          "speciation_sweep")
OUTPUT_ENV = "SPECIATION_OUTPUT_ROOT"
EXIT_OK, EXIT_ASSERTION, EXIT_CONFIG = 0, 1, 2


@dataclass
class ExperimentConfig:
    model: str
    kernels: dict
    params: dict = field(default_factory=dict)
    name: str = ""
    horizon: float | None = None
    snapshots: dict = field(default_factory=dict)
    replicas: int = 1
    seed: int = 0
    criterion: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    output_dir: str | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError("model", f"unknown model {self.model!r}; expected one of {MODELS}")
        if not isinstance(self.kernels, dict) or "L" not in self.kernels:
            raise ConfigError("kernels", "must be an object with at least the half-width L")
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise ConfigError("replicas", "must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        if self.horizon is not None and not self.horizon >= 0:
            raise ConfigError("horizon", "must be nonnegative")
        if self.model in ("moran", "dd_original", "ode", "speciation_sweep") and self.horizon is None:
            raise ConfigError("horizon", f"required for model {self.model}")
        unknown = set(self.snapshots) - {"interval", "times"}
        if unknown:
            raise ConfigError("snapshots", f"unknown keys {sorted(unknown)}")
        SpeciationCriterion(**self.criterion_kwargs())
        self.name = self.name or self.model

    def criterion_kwargs(self):
        bad = set(self.criterion) - set(SpeciationCriterion.__dataclass_fields__) - {"version"}
        if bad:
            raise ConfigError("criterion", f"unknown keys {sorted(bad)}")
        return {k: v for k, v in self.criterion.items() if k != "version"}

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown config field")
        if "model" not in d:
            raise ConfigError("model", "missing")
        if "kernels" not in d:
            raise ConfigError("kernels", "missing")
        return cls(**copy.deepcopy(d))

    def canonical_json(self) -> str:
        d = self.to_dict()
        d.pop("output_dir", None)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError("file", f"{path}: {e}") from None
    return ExperimentConfig.from_dict(d)


def recipe_names() -> list:
    pkg = resources.files("speciation") / "recipes"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def load_recipe(name: str) -> ExperimentConfig:
    pkg = resources.files("speciation") / "recipes" / f"{name}.json"
    if not pkg.is_file():
        raise ConfigError("recipe", f"unknown recipe {name!r}; available: {recipe_names()}")
    return ExperimentConfig.from_dict(json.loads(pkg.read_text()))


def resolve_config(ref) -> ExperimentConfig:
    """Accept a config object, a path to a JSON file, or a recipe name."""
    if isinstance(ref, ExperimentConfig):
        return ref
    if isinstance(ref, dict):
        return ExperimentConfig.from_dict(ref)
    p = Path(ref)
    if p.suffix == ".json" or p.exists():
        return load_config(p)
    return load_recipe(str(ref))


# CSV output


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def write_csv(path, columns, rows, cfg: ExperimentConfig, schema: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# schema={schema}\n")
        fh.write(f"# config_hash={cfg.hash}\n")
        fh.write(f"# criterion_version={cfg.criterion.get('version', CRITERION_VERSION)}\n")
        fh.write(f"# software_version={__version__}\n")
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(fmt(v) for v in r) + "\n")
    return path


def read_csv(path):
    """Return (meta, columns, rows as lists of strings)."""
    meta, cols, rows = {}, None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k] = v
            elif cols is None:
                cols = line.split(",")
            elif line:
                rows.append(line.split(","))
    return meta, cols, rows


@dataclass
class ExperimentResult:
    status: int
    files: list
    summary: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)


# helpers


def _kernels(cfg):
    return build_kernels(cfg.kernels)


def _model_params(cfg) -> ModelParams:
    p = cfg.params
    try:
        return ModelParams(p.get("sigma", 0.5), p["mu"], p["N"])
    except KeyError as e:
        raise ConfigError(f"params.{e.args[0]}", "missing") from None


def _mu_tilde(cfg):
    p = cfg.params
    if "mu_tilde" in p:
        return float(p["mu_tilde"])
    return _model_params(cfg).mu_tilde


def _snapshot_times(cfg, horizon):
    s = cfg.snapshots
    if "times" in s:
        return np.asarray(s["times"], float)
    if "interval" in s:
        iv = float(s["interval"])
        if not iv > 0:
            raise ConfigError("snapshots.interval", "must be positive")
        return np.arange(0.0, horizon + 0.5 * iv, iv)
    return np.array([horizon])


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def _safe(fn, task):
    try:
        return fn(task), None
    except Exception as e:  # recorded per replica, the sweep goes on
        return None, f"{type(e).__name__}: {e}"


# replica workers (top level so they pickle)


def _moran_task(task):
    from .moran import run_moran

    cfg_d, replica, mu = task
    cfg = ExperimentConfig.from_dict(cfg_d)
    k = _kernels(cfg)
    p = cfg.params
    mp = ModelParams(p.get("sigma", 0.5), mu if mu is not None else p["mu"], p["N"])
    return run_moran(k, mp, horizon=cfg.horizon, snapshot_times=_snapshot_times(cfg, cfg.horizon),
                     seed=cfg.seed, replica=replica, initial=cfg.options.get("initial"),
                     stop_on_speciation=bool(cfg.options.get("stop_on_speciation", False)),
                     criterion=SpeciationCriterion(**cfg.criterion_kwargs()))


def _moran_safe(task):
    return _safe(_moran_task, task)


def _dd_task(task):
    from .dd_original import DDParams, run_dd

    cfg_d, replica = task
    cfg = ExperimentConfig.from_dict(cfg_d)
    p = dict(cfg.params)
    for key in ("sigma_C", "sigma_K"):
        if p.get(key) in (None, "inf"):
            p[key] = math.inf
    try:
        dp = DDParams(PhenotypeSpace(cfg.kernels["L"]), **p)
    except TypeError as e:
        raise ConfigError("params", str(e)) from None
    return run_dd(dp, cfg.horizon, _snapshot_times(cfg, cfg.horizon), seed=cfg.seed,
                  replica=replica, initial=cfg.options.get("initial"),
                  initial_size=cfg.options.get("initial_size"))


def _dd_safe(task):
    return _safe(_dd_task, task)


# runners


def _run_moran(cfg, out, timestamp, workers):
    d = cfg.to_dict()
    results = _map(_moran_safe, [(d, r, None) for r in range(cfg.replicas)], workers)
    sites = build_kernels(cfg.kernels).space.sites
    traj, spec, failures = [], [], []
    first = None
    for r, (rec, err) in enumerate(results):
        if err:
            failures.append((r, err))
            spec.append((r, cfg.seed, None, cfg_version(cfg), "failed"))
            continue
        first = first or rec
        f = rec.frequencies()
        for t, row in zip(rec.times, f):
            for x, v in zip(sites, row):
                traj.append((r, t, x, v))
        spec.append((r, cfg.seed, rec.speciation_time, cfg_version(cfg), "ok"))
    files = [
        write_csv(out / f"{cfg.name}_trajectory.csv", ["replica", "t", "x", "frequency"], traj,
                  cfg, "trajectory-v1"),
        write_csv(out / f"{cfg.name}_speciation.csv",
                  ["replica", "seed", "speciation_time", "criterion_version", "status"], spec, cfg,
                  "speciation-v1"),
    ]
    if first is not None:
        files.append(_write_svg(out / f"{cfg.name}_heatmap.svg", svg.heatmap(
            first.frequencies(), first.times, sites, title=f"{cfg.name}: frequency (replica 0)",
            timestamp=timestamp)))
    times = [float(s[2]) for s in spec if s[2] is not None]
    return files, {"speciation_times": times}, failures


def cfg_version(cfg):
    return cfg.criterion.get("version", CRITERION_VERSION)


def _run_sweep(cfg, out, timestamp, workers):
    grid = cfg.options.get("mu_grid")
    if not grid:
        raise ConfigError("options.mu_grid", "speciation sweep needs a mutation-rate grid")
    d = cfg.to_dict()
    tasks = [(d, r, float(mu)) for mu in grid for r in range(cfg.replicas)]
    results = _map(_moran_safe, tasks, workers)
    rows, failures, means = [], [], []
    for (_, r, mu), (rec, err) in zip(tasks, results):
        if err:
            failures.append((mu, r, err))
        t = None if rec is None else rec.speciation_time
        rows.append((mu, r, cfg.seed, t, cfg_version(cfg), "failed" if err else "ok"))
    for mu in grid:
        ts = [row[3] for row in rows if row[0] == mu and row[3] is not None]
        n_rep = sum(1 for row in rows if row[0] == mu)
        means.append((float(mu), float(np.mean(ts)) if ts else math.nan, len(ts), n_rep))
    files = [
        write_csv(out / f"{cfg.name}_speciation.csv",
                  ["mu", "replica", "seed", "speciation_time", "criterion_version", "status"], rows,
                  cfg, "speciation-sweep-v1"),
        write_csv(out / f"{cfg.name}_means.csv", ["mu", "mean_speciation_time", "n_speciated",
                                                  "n_replicas"], means, cfg, "speciation-means-v1"),
    ]
    xs = [row[0] for row in rows if row[3] is not None]
    ys = [row[3] for row in rows if row[3] is not None]
    if xs:
        files.append(_write_svg(out / f"{cfg.name}_scatter.svg", svg.scatter_plot(
            xs, ys, [(m[0], m[1]) for m in means], title=f"{cfg.name}: speciation time",
            xlabel="mu", ylabel="speciation time", timestamp=timestamp)))
    return files, {"means": means}, failures


def _run_dd(cfg, out, timestamp, workers):
    d = cfg.to_dict()
    results = _map(_dd_safe, [(d, r) for r in range(cfg.replicas)], workers)
    rows, failures, first = [], [], None
    for r, (rec, err) in enumerate(results):
        if err:
            failures.append((r, err))
            continue
        first = first or rec
        f = rec.frequencies()
        for t, c_row, f_row in zip(rec.times, rec.snapshots, f):
            for x, c, v in zip(rec.sites, c_row, f_row):
                rows.append((r, t, x, c, v))
    files = [write_csv(out / f"{cfg.name}_trajectory.csv",
                       ["replica", "t", "x", "count", "frequency"], rows, cfg, "dd-trajectory-v1")]
    summary = {}
    if first is not None:
        files.append(_write_svg(out / f"{cfg.name}_heatmap.svg", svg.heatmap(
            first.frequencies(), first.times, first.sites, title=f"{cfg.name}: frequency",
            timestamp=timestamp)))
        summary["extinction_time"] = first.extinction_time
    return files, summary, failures


def _run_conditioned(cfg, out, timestamp, workers):
    from .conditioned import (conditioned_kernels, fitness_w, gaussian_start,
                              iterate_to_fixed_point, near_delta_start, tridiagonal_mutation)

    p, o = cfg.params, cfg.options
    k = conditioned_kernels(cfg.kernels["L"], p["sigma_K"], p["sigma_C"])
    kind = p.get("kind", "W2")
    start = o.get("start", "near_delta")
    if start == "gaussian":
        p0 = gaussian_start(k, o.get("start_sd", 3.0))
    elif start == "near_delta":
        p0 = near_delta_start(k.n, o.get("start_eps", 1e-3))
    else:
        raise ConfigError("options.start", f"unknown start {start!r}")
    A = None
    if "mutation_rate" in o:
        A = tridiagonal_mutation(k.n, o["mutation_rate"])
    crit = SpeciationCriterion(**{"min_separation": 10, "mass_radius": 5,
                                  **cfg.criterion_kwargs()})
    res = iterate_to_fixed_point(p0, k, kind, A, tol=o.get("tol", 1e-12),
                                 max_iter=int(o.get("max_iter", 1_000_000)),
                                 snapshot_every=int(o.get("snapshot_every", 1000)), criterion=crit)
    sites = k.space.sites
    traj = [(t, x, v) for t, row in zip(res.times, res.snapshots) for x, v in zip(sites, row)]
    W = fitness_w(res.pi_hat, k, kind)
    fixed = [(x, v, w, res.condition_residual) for x, v, w in zip(sites, res.pi_hat, W)]
    files = [
        write_csv(out / f"{cfg.name}_trajectory.csv", ["t", "x", "pi"], traj, cfg,
                  "conditioned-trajectory-v1"),
        write_csv(out / f"{cfg.name}_fixed_point.csv", ["x", "pi_hat", "W", "residual"], fixed,
                  cfg, "conditioned-fixed-point-v1"),
    ]
    pick = np.unique(np.linspace(0, len(res.times) - 1, 6).astype(int))
    files.append(_write_svg(out / f"{cfg.name}_lines.svg", svg.line_plot(
        sites, res.snapshots[pick], [f"t={res.times[i]}" for i in pick],
        title=f"{cfg.name}: {kind} iterates", xlabel="phenotype", ylabel="frequency",
        timestamp=timestamp)))
    x = sites.astype(float)
    var = float(res.pi_hat @ x**2 - (res.pi_hat @ x) ** 2)
    return files, {"converged": res.converged, "iterations": res.iterations, "variance": var,
                   "transient_bimodality": res.transient_bimodality}, []


def _run_ode(cfg, out, timestamp, workers):
    from .dynamics import integrate_ode

    k = _kernels(cfg)
    variant = cfg.options.get("variant", "eq7")
    init = cfg.options.get("initial", 0)
    p0 = k.space.delta(int(init)) if np.isscalar(init) else np.asarray(init, float)
    if variant == "eq9":
        mix = cfg.options.get("start_mix", 1e-3)
        p0 = (1 - mix) * p0 + mix / k.n
        res = integrate_ode(p0, k, cfg.horizon, "eq9", mu_tilde=_mu_tilde(cfg),
                            t_eval=_snapshot_times(cfg, cfg.horizon))
    else:
        res = integrate_ode(p0, k, cfg.horizon, variant, _model_params(cfg),
                            t_eval=_snapshot_times(cfg, cfg.horizon))
    sites = k.space.sites
    rows = [(t, x, v) for t, row in zip(res.t, res.states) for x, v in zip(sites, row)]
    files = [write_csv(out / f"{cfg.name}_trajectory.csv", ["t", "x", "pi"], rows, cfg,
                       "ode-trajectory-v1")]
    if len(res.t):
        files.append(_write_svg(out / f"{cfg.name}_heatmap.svg", svg.heatmap(
            res.states, res.t, sites, title=f"{cfg.name}: {variant}", timestamp=timestamp)))
    return files, {"status": res.status, "max_v_decrease": res.max_v_decrease}, []


def _run_landscape(cfg, out, timestamp, workers, assertions_only=False):
    from .landscape import (bound_audit, find_stationary_points, is_informational,
                            verify_stationarity)

    k = _kernels(cfg)
    mt = _mu_tilde(cfg)
    o = cfg.options
    search = find_stationary_points(k, mt, n_starts=int(o.get("n_starts", 16)),
                                    tol=o.get("tol", 1e-10), seed=cfg.seed,
                                    include_faces=o.get("include_faces", True))
    pts_rows, audit_rows, checks = [], [], []
    violated = False
    rng = np.random.default_rng(cfg.seed)
    for pt in search:
        diag = verify_stationarity(pt.pi_hat, k, mt, rng)
        checks.append(diag["constancy_residual"] < 1e-8 and diag["subset_max_deviation"] < 1e-8
                      and diag["order_equivalence"] and diag["sign_equivalence"])
        for x, v, m in zip(k.space.sites, pt.pi_hat, pt.fitness):
            pts_rows.append((pt.basin_tag, x, v, m, pt.constancy_residual, pt.classification))
        entries = bound_audit(pt.pi_hat, k, mt, raise_on_violation=False)
        for e in entries:
            if e.conclusion_ok is False and not is_informational(e):
                violated = True
            audit_rows.append((pt.basin_tag, e.theorem, e.hypothesis_ok, e.conclusion_ok, e.margin))
    files = [
        write_csv(out / f"{cfg.name}_stationary_points.csv",
                  ["cluster", "x", "pi_hat", "m", "residual", "classification"], pts_rows, cfg,
                  "stationary-points-v1"),
        write_csv(out / f"{cfg.name}_bound_audit.csv",
                  ["cluster", "theorem", "hypothesis_ok", "conclusion_ok", "margin"], audit_rows,
                  cfg, "bound-audit-v1"),
    ]
    if search.points and not assertions_only:
        files.append(_write_svg(out / f"{cfg.name}_points.svg", svg.line_plot(
            k.space.sites, [p.pi_hat for p in search.points],
            [f"{p.basin_tag}: {p.classification}" for p in search.points],
            title=f"{cfg.name}: stationary points", xlabel="phenotype", ylabel="mass",
            timestamp=timestamp)))
    summary = {"n_points": len(search), "n_local_max": len(search.local_maxima()),
               "unresolved": len(search.unresolved), "diagnostics_ok": all(checks),
               "violation": violated}
    failures = [] if (all(checks) and not violated) else [("assertion", summary)]
    return files, summary, failures


def _run_mcmc(cfg, out, timestamp, workers):
    from .stationary import StationaryDensity, mcmc_sample_stationary

    k = _kernels(cfg)
    o = cfg.options
    dens = StationaryDensity(k, _model_params(cfg), allow_boundary=o.get("allow_boundary", False))
    init = o.get("initial")
    res = mcmc_sample_stationary(dens, int(o.get("n_samples", 20000)), o.get("kappa", 100.0),
                                 seed=cfg.seed, thin=int(o.get("thin", 1)),
                                 init=None if init is None else np.asarray(init, float))
    sites = k.space.sites
    rows = [(i, x, v, ld) for i, (row, ld) in enumerate(zip(res.samples, res.log_density))
            for x, v in zip(sites, row)]
    files = [write_csv(out / f"{cfg.name}_samples.csv", ["sample_index", "x", "pi_x",
                                                         "log_density"], rows, cfg, "mcmc-v1")]
    files.append(_write_svg(out / f"{cfg.name}_mean.svg", svg.line_plot(
        sites, [res.mean()], ["posterior mean"], title=f"{cfg.name}: stationary mean",
        xlabel="phenotype", ylabel="mass", timestamp=timestamp)))
    summary = {"acceptance_rate": res.acceptance_rate, "kappa": res.kappa,
               "rhat_max": float(np.max(res.rhat))}
    if "near_site" in o:
        d = np.abs(res.samples - k.space.delta(int(o["near_site"]))).max(axis=1)
        summary["fraction_near"] = float(np.mean(d < o.get("near_radius", 0.1)))
    return files, summary, []


def _run_bifurcation(cfg, out, timestamp, workers):
    from .landscape import bifurcation_scan

    k = _kernels(cfg)
    o = cfg.options
    p = cfg.params
    res = bifurcation_scan(k, o["mu_grid"], N=p.get("N"), sigma=p.get("sigma", 0.5),
                           limit=o.get("limit", "potential"), rel_width=o.get("rel_width", 1e-3),
                           radius=o.get("radius"))
    rows = [(mu, f) for mu, f in zip(res.grid, res.flags)]
    lo, hi = res.bracket if res.found else (None, None)
    files = [
        write_csv(out / f"{cfg.name}_grid.csv", ["mu", "local_max_near_delta0"], rows, cfg,
                  "bifurcation-grid-v1"),
        write_csv(out / f"{cfg.name}_bracket.csv", ["limit", "found", "mu_low", "mu_high",
                                                    "estimate"],
                  [(res.limit, res.found, lo, hi, res.estimate)], cfg, "bifurcation-v1"),
    ]
    bracket = None if res.bracket is None else tuple(float(v) for v in res.bracket)
    return files, {"found": res.found, "bracket": bracket, "estimate": float(res.estimate)}, []


RUNNERS = {
    "moran": _run_moran,
    "speciation_sweep": _run_sweep,
    "dd_original": _run_dd,
    "conditioned_dd": _run_conditioned,
    "ode": _run_ode,
    "landscape": _run_landscape,
    "mcmc": _run_mcmc,
    "bifurcation": _run_bifurcation,
}


def _write_svg(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "runs"))


def run_experiment(config, out=None, timestamp: bool = True, workers: int | None = None,
                   seed: int | None = None, replicas: int | None = None) -> ExperimentResult:
    """Run one experiment and write its CSV/SVG artifacts.

    Status is nonzero only when a hard assertion (a violated bound or failed
    stationarity diagnostics) fires; per-replica failures are recorded in the
    outputs and listed in ``failures``.
    """
    cfg = resolve_config(config)
    if seed is not None or replicas is not None:
        d = cfg.to_dict()
        if seed is not None:
            d["seed"] = int(seed)
        if replicas is not None:
            d["replicas"] = int(replicas)
        cfg = ExperimentConfig.from_dict(d)
    out = Path(out or cfg.output_dir or output_root() / cfg.name)
    out.mkdir(parents=True, exist_ok=True)
    if workers is None:
        workers = min(os.cpu_count() or 1, cfg.replicas)
    (out / f"{cfg.name}_config.json").write_text(
        json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n")
    files, summary, failures = RUNNERS[cfg.model](cfg, out, timestamp, workers)
    status = EXIT_OK
    if any(f[0] == "assertion" for f in failures):
        status = EXIT_ASSERTION
    return ExperimentResult(status, [out / f"{cfg.name}_config.json"] + list(files), summary,
                            failures)


def verify_experiment(config, out=None) -> ExperimentResult:
    """Run only the assertion suites appropriate to the config's model."""
    from .dynamics import integrate_ode

    cfg = resolve_config(config)
    out = Path(out or cfg.output_dir or output_root() / f"{cfg.name}_verify")
    if cfg.model in ("landscape", "bifurcation", "mcmc") and (
            "mu_tilde" in cfg.params or ("mu" in cfg.params and "N" in cfg.params)):
        mt = _mu_tilde(cfg) if cfg.model != "mcmc" else cfg.options.get(
            "landscape_mu_tilde", _mu_tilde(cfg))
        if mt > 0:
            d = cfg.to_dict()
            d["model"] = "landscape"
            d["params"] = {"mu_tilde": mt}
            d["options"] = {k: v for k, v in cfg.options.items() if k in ("n_starts", "tol")}
            files, summary, failures = _run_landscape(ExperimentConfig.from_dict(d), out, False, 1,
                                                      assertions_only=True)
            return ExperimentResult(EXIT_ASSERTION if failures else EXIT_OK, files, summary,
                                    failures)
    k = _kernels(cfg)
    checks = {}
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(20):
        p0 = rng.dirichlet(np.ones(k.n))
        r = integrate_ode(p0, k, 200.0, "eq9", mu_tilde=1e-3, t_eval=[])
        worst = max(worst, r.max_v_decrease)
    checks["lyapunov_max_decrease"] = worst
    checks["kernels_symmetric"] = bool(np.allclose(k.B, k.B[::-1]) and np.allclose(k.C, k.C[::-1]))
    ok = worst <= 1e-8 and checks["kernels_symmetric"]
    return ExperimentResult(EXIT_OK if ok else EXIT_ASSERTION, [], checks,
                            [] if ok else [("assertion", checks)])
