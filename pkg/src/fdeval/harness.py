"""Experiment runner: seeded sweeps over (method, n, rep) cells.

Datasets are derived from (master_seed, rep, n) only, so every method in a
sweep sees identical data for a given cell and adding a method never shifts
another method's randomness.  Failures become NaN rows, not crashes.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import __version__
from .bellman import Policy, bellman_backup, compact_atoms, solve_return_fixed_point
from .distributions import mixture
from .divergences import DivergenceSpec, KernelSpec
from .envs import (
    LQREnv,
    estimate_dpi_lqr,
    estimate_dpi_tabular,
    lqr_collect,
    lqr_true_params,
    tabular_collect,
    tabular_make_random,
)
from .errors import FdevalError, InvalidInput, OptimizationFailure
from .evaluation import InaccuracyReport, lqr_inaccuracy, tabular_inaccuracy
from .fde import (
    FDEConfig,
    OptimizerSettings,
    TSelectionParams,
    choose_t,
    fde_run,
    fle_run,
    split_dataset,
)

LQR_METHODS = ("cramer", "energy", "rbf", "laplace", "pdf_l2", "kl", "fle")
ALL_METHODS = LQR_METHODS + ("tvd_mc",)

CSV_HEADER = ["method", "n", "rep", "seed", "T", "inaccuracy", "runtime_ms", "failed"]

# purpose tags of the seed-derivation scheme
_TAG_DATA = 0
_TAG_DPI = 1
_TAG_METHOD = 2
_TAG_INSTANCE = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """Full sweep description; flag and file values funnel into this."""

    experiment: str = "lqr"
    methods: tuple = ("cramer", "energy", "rbf", "laplace", "pdf_l2", "kl", "fle")
    n_list: tuple = (300, 1000)
    reps: int = 50
    master_seed: int = 0
    sigma_rbf: float = 1.0
    sigma_lap: float = 1.0
    variance_floor: float = 0.0
    b_samples: int = 1
    t_params: TSelectionParams = field(default_factory=TSelectionParams)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    workers: int = 1
    output_path: str = "results.csv"
    dpi_points: int = 1000
    tabular_states: int = 4
    tabular_actions: int = 2
    tabular_gamma: float = 0.9

    def __post_init__(self):
        if self.experiment not in ("lqr", "tabular"):
            raise InvalidInput(f"unknown experiment {self.experiment!r}")
        if self.reps < 1 or not self.n_list or self.workers < 1:
            raise InvalidInput("reps and workers must be >= 1 and n_list nonempty")
        unknown = set(self.methods) - set(ALL_METHODS)
        if not self.methods or unknown:
            raise InvalidInput(f"unknown methods: {sorted(unknown)}")
        if self.experiment == "lqr" and "tvd_mc" in self.methods:
            raise InvalidInput("tvd_mc has no closed-form objective; not runnable on lqr")


def divergence_for_method(method: str, config: ExperimentConfig) -> DivergenceSpec:
    vf = config.variance_floor
    if method == "cramer":
        return DivergenceSpec("cramer", variance_floor=vf)
    if method == "energy":
        return DivergenceSpec("mmd", kernel=KernelSpec("energy", beta=1.0), variance_floor=vf)
    if method == "rbf":
        return DivergenceSpec("mmd", kernel=KernelSpec("rbf", sigma=config.sigma_rbf), variance_floor=vf)
    if method == "laplace":
        return DivergenceSpec("mmd", kernel=KernelSpec("laplace", sigma=config.sigma_lap), variance_floor=vf)
    if method == "pdf_l2":
        return DivergenceSpec("pdf_l2", variance_floor=vf)
    if method in ("kl", "fle"):
        return DivergenceSpec("kl", variance_floor=vf)
    if method == "tvd_mc":
        return DivergenceSpec("tvd_mc", variance_floor=vf)
    raise InvalidInput(f"unknown method {method!r}")


def _cell_seed(config: ExperimentConfig, rep: int, n: int, *tags) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(config.master_seed, rep, n) + tags)


def _data_seed_int(config: ExperimentConfig, rep: int, n: int) -> int:
    return int(_cell_seed(config, rep, n, _TAG_DATA).generate_state(1)[0])


def _run_lqr_cell(config: ExperimentConfig, method: str, n: int, rep: int) -> InaccuracyReport:
    env = LQREnv.default()
    data = lqr_collect(env, n, np.random.default_rng(_cell_seed(config, rep, n, _TAG_DATA)))
    dpi_states, dpi_actions = estimate_dpi_lqr(
        env, config.dpi_points, np.random.default_rng(_cell_seed(config, rep, n, _TAG_DPI))
    )
    theta_star = lqr_true_params(env)
    fde_config = FDEConfig(
        divergence=divergence_for_method(method, config),
        t_params=config.t_params,
        optimizer=config.optimizer,
    )
    seed_int = _data_seed_int(config, rep, n)
    start = time.perf_counter()
    try:
        if method == "fle":
            method_rng = np.random.default_rng(
                _cell_seed(config, rep, n, _TAG_METHOD, LQR_METHODS.index(method))
            )
            theta, trace = fle_run(data, env, fde_config, method_rng, mc_samples=config.b_samples)
        else:
            theta, trace = fde_run(data, env, fde_config)
        inaccuracy = lqr_inaccuracy(theta, theta_star, dpi_states, dpi_actions, p=1.0)
        t_used = trace.t_used
        failed = False
    except OptimizationFailure:
        inaccuracy = math.nan
        t_used = choose_t(n, env.gamma, config.t_params)
        failed = True
    runtime_ms = 1000.0 * (time.perf_counter() - start)
    return InaccuracyReport(method, n, rep, seed_int, t_used, inaccuracy, runtime_ms, failed)


def _tabular_fde(data, mdp, pi, t_count, grid=1e-3):
    """Nonparametric fold fits: each covered pair becomes the empirical
    mixture of its sample backups; uncovered pairs carry over."""
    from .bellman import zero_table

    folds = split_dataset(data, t_count)
    table = zero_table(mdp)
    for fold in folds:
        fitted = dict(table)
        by_pair = {}
        for s, a, r, sp in zip(fold.states, fold.actions, fold.rewards, fold.next_states):
            by_pair.setdefault((int(s), int(a)), []).append((float(r), int(sp)))
        for sa, obs in by_pair.items():
            w = 1.0 / len(obs)
            parts = [(w, bellman_backup(r, sp, table, pi, mdp.gamma)) for r, sp in obs]
            fitted[sa] = compact_atoms(mixture(parts), grid=grid)
        table = fitted
    return table


def _run_tabular_cell(config: ExperimentConfig, method: str, n: int, rep: int) -> InaccuracyReport:
    inst_rng = np.random.default_rng(_cell_seed(config, rep, n, _TAG_INSTANCE))
    mdp = tabular_make_random(
        config.tabular_states, config.tabular_actions, 2, inst_rng, gamma=config.tabular_gamma
    )
    behavior = Policy.uniform(mdp.n_states, mdp.n_actions)
    pi = Policy.uniform(mdp.n_states, mdp.n_actions)
    data = tabular_collect(mdp, behavior, n, np.random.default_rng(_cell_seed(config, rep, n, _TAG_DATA)))
    t_count = choose_t(n, mdp.gamma, config.t_params)
    seed_int = _data_seed_int(config, rep, n)
    start = time.perf_counter()
    table = _tabular_fde(data, mdp, pi, t_count)
    truth = solve_return_fixed_point(mdp, pi)
    dpi = estimate_dpi_tabular(
        mdp, behavior, pi, config.dpi_points,
        np.random.default_rng(_cell_seed(config, rep, n, _TAG_DPI)),
    )
    weights = {sa: 0.0 for sa in mdp.pairs()}
    for sa in dpi:
        weights[sa] += 1.0 / len(dpi)
    inaccuracy = tabular_inaccuracy(table, truth, weights, p=1.0, q=1.0)
    runtime_ms = 1000.0 * (time.perf_counter() - start)
    return InaccuracyReport(method, n, rep, seed_int, t_count, inaccuracy, runtime_ms, False)


def _run_cell(args):
    config, method, n, rep = args
    if config.experiment == "lqr":
        return _run_lqr_cell(config, method, n, rep)
    return _run_tabular_cell(config, method, n, rep)


def run_experiment(config: ExperimentConfig) -> list:
    """Execute the sweep; reports come back in canonical sorted order."""
    cells = [
        (config, method, n, rep)
        for method in config.methods
        for n in config.n_list
        for rep in range(config.reps)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            reports = list(pool.map(_run_cell, cells, chunksize=1))
    else:
        reports = [_run_cell(cell) for cell in cells]
    reports.sort(key=lambda r: (r.method, r.n, r.rep))
    return reports


def write_reports(reports, config: ExperimentConfig, path: Optional[str] = None) -> str:
    """Write the CSV plus a JSON metadata sidecar; returns the CSV path."""
    path = path or config.output_path
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in reports:
            writer.writerow(
                [r.method, r.n, r.rep, r.seed, r.t_used,
                 "nan" if r.failed else repr(r.inaccuracy),
                 f"{r.runtime_ms:.3f}", int(r.failed)]
            )
    meta = {
        "version": __version__,
        "config": _config_dict(config),
        "optimizer": asdict(config.optimizer),
        "t_selection": asdict(config.t_params),
        "dpi_scheme": "geometric-horizon occupancy sample, refreshed per replication",
    }
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return path


def _config_dict(config: ExperimentConfig) -> dict:
    out = asdict(config)
    out["methods"] = list(config.methods)
    out["n_list"] = list(config.n_list)
    return out


def load_config_file(path: str) -> dict:
    """Read a key = value config file into override kwargs for ExperimentConfig."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise InvalidInput(f"cannot read config file {path!r}")
    out = {}
    if parser.has_section("experiment"):
        sec = parser["experiment"]
        if "kind" in sec:
            out["experiment"] = sec["kind"]
        if "methods" in sec:
            out["methods"] = tuple(m.strip() for m in sec["methods"].split(",") if m.strip())
        if "n" in sec:
            out["n_list"] = tuple(int(v) for v in sec["n"].split(","))
        for key, cast in (("reps", int), ("seed", int), ("workers", int), ("dpi_points", int)):
            if key in sec:
                out["master_seed" if key == "seed" else key] = cast(sec[key])
        if "out" in sec:
            out["output_path"] = sec["out"]
    if parser.has_section("divergence"):
        sec = parser["divergence"]
        for key, target in (
            ("sigma_rbf", "sigma_rbf"), ("sigma_lap", "sigma_lap"),
            ("variance_floor", "variance_floor"),
        ):
            if key in sec:
                out[target] = float(sec[key])
        if "b" in sec:
            out["b_samples"] = int(sec["b"])
    if parser.has_section("t_selection"):
        sec = parser["t_selection"]
        kwargs = {
            key: float(sec[key])
            for key in ("l", "delta", "c", "q", "alpha", "c_divide")
            if key in sec
        }
        out["t_params"] = TSelectionParams(**kwargs)
    if parser.has_section("optimizer"):
        sec = parser["optimizer"]
        kwargs = {}
        if "max_evals" in sec:
            kwargs["max_evals"] = int(sec["max_evals"])
        if "gradient_mode" in sec:
            kwargs["gradient_mode"] = sec["gradient_mode"]
        if "fd_step" in sec:
            kwargs["fd_step"] = float(sec["fd_step"])
        if "tolerance" in sec:
            kwargs["tolerance"] = float(sec["tolerance"])
        out["optimizer"] = OptimizerSettings(**kwargs)
    return out


def build_config(file_path: Optional[str] = None, **flag_overrides) -> ExperimentConfig:
    """Defaults, then config file, then command-line flags (flags win)."""
    kwargs = {}
    if file_path is not None:
        kwargs.update(load_config_file(file_path))
    kwargs.update({k: v for k, v in flag_overrides.items() if v is not None})
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise InvalidInput(str(exc)) from exc
