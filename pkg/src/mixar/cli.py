"""Command line entry points: simulate | fit | select | forecast | replicate.

Every subcommand takes an optional key=value config file plus repeatable
--set key=value overrides, writes its data files into output_dir, and
finishes with a manifest recording the config echo, seed, package versions,
wall clock and diagnostics.  Re-running a command with the manifest's
config and seed reproduces the data outputs bit for bit.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig, build_config, config_dict, require_input
from .datasets import BUILTIN_LENGTHS, BUILTIN_SPECS, apply_transform, prepare_recipe
from .evidence import EvidenceConfig, select_g
from .forecast import ForecastRequest, posterior_averaged_forecast
from .io import (
    evidence_payload,
    read_draws_csv,
    read_series_csv,
    summaries_payload,
    write_draws_csv,
    write_grid_csv,
    write_json,
    write_manifest,
    write_series_csv,
)
from .model import MARSpec, TimeSeries, simulate_path
from .relabel import RelabelConfig, relabel_chain
from .rjmcmc import OrderMoveConfig
from .sampler import ChainOutput, Hyperparams, default_hyperparams, run_chain
from .stability import is_stable
from .summary import average_density, density_grid, summarize

WORKERS_ENV = "MIXAR_WORKERS"


def _resolve_workers(config: RunConfig) -> int:
    if config.workers is not None:
        return config.workers
    env = os.environ.get(WORKERS_ENV, "").strip()
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be positive, got {env!r}")
        return n
    return os.cpu_count() or 1


def _load_spec_file(path: str) -> MARSpec:
    raw = json.loads(Path(path).read_text())
    try:
        return MARSpec(
            weights=np.asarray(raw["weights"], dtype=float),
            shifts=np.asarray(raw["shifts"], dtype=float),
            ar_coeffs=tuple(np.asarray(c, dtype=float) for c in raw["ar_coeffs"]),
            scales=np.asarray(raw["scales"], dtype=float),
        )
    except KeyError as exc:
        raise ValueError(f"spec file {path} is missing key {exc}") from None


def _load_series(config: RunConfig) -> tuple[TimeSeries, dict]:
    """Read, optionally transform, and describe the input series."""
    path = require_input(config)
    raw = read_series_csv(path)
    echo: dict = {"input": str(path), "raw_length": int(raw.size)}
    if config.recipe is not None:
        values, recipe = prepare_recipe(config.recipe, raw)
        echo["recipe"] = recipe.name
        echo["transform"] = recipe.transform
    else:
        transform = "none"
        if config.difference:
            transform = "difference"
        elif config.log_transform:
            transform = "log"
        values = apply_transform(raw, transform)
        echo["transform"] = transform
    echo["length"] = int(values.size)
    return TimeSeries(values), echo


def _model_shape(config: RunConfig) -> tuple[int, tuple[int, ...] | None, bool]:
    """(g, orders, fixed_shift), letting a named recipe set the model shape."""
    if config.recipe is not None:
        from .datasets import RECIPES

        recipe = RECIPES[config.recipe]
        return recipe.g, recipe.orders, recipe.fixed_shift
    return config.g, config.orders, config.fixed_shift


def _hyper(config: RunConfig, series: TimeSeries, g: int, fixed_shift: bool) -> Hyperparams:
    overrides = dict(
        a=config.a,
        c=config.c,
        fixed_shift=fixed_shift,
        p_max=config.p_max,
        burn_in=config.burn_in,
        n_iter=config.n_iter,
        pilot_iters=config.pilot_iters,
    )
    if config.gamma is not None:
        overrides["gamma"] = np.full(g, config.gamma)
    return default_hyperparams(series, **overrides)


def _relabel_config(config: RunConfig) -> RelabelConfig:
    return RelabelConfig(m=config.relabel_warm_start, subset=config.relabel_subset)


def _order_config(config: RunConfig) -> OrderMoveConfig:
    return OrderMoveConfig(
        p_max=config.p_max,
        birth_half_width=config.birth_half_width,
        literal_death_density=config.literal_death_density,
    )


def _fit_summaries(output: ChainOutput):
    names = []
    for k in range(1, output.g + 1):
        names.append((f"pi_{k}", output.weights[:, k - 1]))
        if not output.fixed_shift:
            names.append((f"shift_{k}", output.shifts[:, k - 1]))
            names.append((f"mean_{k}", output.means[:, k - 1]))
        names.append((f"sigma_{k}", output.scales[:, k - 1]))
        p_k = int(output.orders[:, k - 1].max())
        for i in range(1, p_k + 1):
            names.append((f"ar_{k}_{i}", output.ar[:, k - 1, i - 1]))
    names.append(("lambda", output.lam))
    return [summarize(draws, name) for name, draws in names]


def cmd_simulate(config: RunConfig, out: Path) -> tuple[list[str], dict]:
    if config.spec_file is not None:
        spec = _load_spec_file(config.spec_file)
    else:
        spec = BUILTIN_SPECS[config.spec]()
    report = is_stable(spec)
    if not report.stable:
        raise ValueError(
            f"refusing to simulate: specification is unstable "
            f"(spectral radius {report.spectral_radius:.12g} >= 1)"
        )
    n = config.n if config.n is not None else BUILTIN_LENGTHS.get(config.spec, 300)
    series = simulate_path(spec, n, seed=config.seed)
    path = out / "series.csv"
    write_series_csv(path, series.values)
    diag = {
        "spec": config.spec_file or config.spec,
        "n": n,
        "spectral_radius": report.spectral_radius,
    }
    return [str(path)], diag


def cmd_fit(config: RunConfig, out: Path) -> tuple[list[str], dict]:
    series, echo = _load_series(config)
    g, orders, fixed_shift = _model_shape(config)
    if orders is None:
        raise ValueError("fit needs orders=<comma separated list, one per component>")
    hyper = _hyper(config, series, g, fixed_shift)
    output = run_chain(series, g, orders, hyper, config.seed)
    output = relabel_chain(output, _relabel_config(config))
    summaries = _fit_summaries(output)
    draws_path = out / "draws.csv"
    summaries_path = out / "summaries.json"
    write_draws_csv(draws_path, output)
    write_json(summaries_path, summaries_payload(summaries))
    diag = dict(echo)
    diag.update(
        {
            "g": g,
            "orders": list(orders),
            "fixed_shift": fixed_shift,
            "acceptance_rates": output.acceptance,
            "stability_rejections": output.stability_rejections,
            "proposal_precisions": output.gamma,
        }
    )
    return [str(draws_path), str(summaries_path)], diag


def cmd_select(config: RunConfig, out: Path) -> tuple[list[str], dict]:
    series, echo = _load_series(config)
    hyper = _hyper(config, series, max(config.g_range), config.fixed_shift)
    pinned = None
    if config.orders is not None and len(config.g_range) == 1:
        pinned = config.orders if len(config.orders) == config.g_range[0] else None
    ev_config = EvidenceConfig(
        order_config=_order_config(config),
        n_j=config.n_j,
        n_i=config.n_i,
        reduced_burn_in=config.reduced_burn_in,
        orders=pinned,
        relabel=_relabel_config(config),
    )
    workers = _resolve_workers(config)
    best_g, results = select_g(series, config.g_range, hyper, ev_config, config.seed, workers)
    report_path = out / "evidence.json"
    write_json(report_path, evidence_payload(results, best_g))
    diag = dict(echo)
    diag.update({"best_g": best_g, "workers": workers})
    return [str(report_path)], diag


def cmd_forecast(config: RunConfig, out: Path) -> tuple[list[str], dict]:
    series, echo = _load_series(config)
    if config.draws is None:
        raise ValueError("forecast needs draws=<draws CSV from a fit run>")
    draws_path = Path(config.draws)
    if not draws_path.exists():
        raise ValueError(f"draws path {draws_path} does not exist")
    output = read_draws_csv(draws_path)
    request = ForecastRequest(
        horizon=config.horizon,
        origin=config.origin,
        mode=config.mode,
        mc_paths=config.mc_paths,
        thin=config.thin,
        seed=config.seed,
    )
    result = posterior_averaged_forecast(output, series, request)
    grid_path = out / "forecast.csv"
    write_grid_csv(
        grid_path,
        result.grid,
        {"mean": result.mean_density, "lo90": result.lower_90, "hi90": result.upper_90},
    )
    integral = float(np.trapezoid(result.mean_density, result.grid))
    first = float(np.trapezoid(result.grid * result.mean_density, result.grid))
    second = float(np.trapezoid(result.grid**2 * result.mean_density, result.grid))
    sd = float(np.sqrt(max(second - first**2, 0.0)))
    diag = dict(echo)
    diag.update(
        {
            "horizon": config.horizon,
            "origin": config.origin,
            "mode": config.mode,
            "integral": integral,
            "integral_ok": bool(abs(integral - 1.0) <= 1e-3),
            "predictive_sd": sd,
        }
    )
    return [str(grid_path)], diag


def _align_to_truth(output: ChainOutput, truth: MARSpec) -> tuple[int, ...]:
    """Permutation matching fitted components to the true ones.

    Components are matched on posterior means of (weight, scale, first AR
    coefficient); the permutation minimizing the summed squared distance to
    the true values wins.
    """
    g = truth.g
    feats = np.column_stack(
        [output.weights.mean(axis=0), output.scales.mean(axis=0), output.ar[:, :, 0].mean(axis=0)]
    )
    target = np.column_stack(
        [truth.weights, truth.scales, [c[0] for c in truth.ar_coeffs]]
    )
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(g)):
        cost = float(np.sum((feats[list(perm)] - target) ** 2))
        if cost < best_cost:
            best, best_cost = perm, cost
    return best


def _replica_param_draws(output: ChainOutput, truth: MARSpec) -> dict[str, np.ndarray]:
    perm = _align_to_truth(output, truth)
    draws: dict[str, np.ndarray] = {}
    for j in range(truth.g):
        src = perm[j]
        k = j + 1
        draws[f"pi_{k}"] = output.weights[:, src].copy()
        draws[f"shift_{k}"] = output.shifts[:, src].copy()
        draws[f"sigma_{k}"] = output.scales[:, src].copy()
        for i in range(1, truth.ar_coeffs[j].size + 1):
            draws[f"ar_{k}_{i}"] = output.ar[:, src, i - 1].copy()
    return draws


def _replicate_worker(job) -> dict[str, np.ndarray]:
    truth, n, sim_seed, fit_seed, overrides, m, subset = job
    series = simulate_path(truth, n, seed=sim_seed)
    hyper = default_hyperparams(series, **overrides)
    output = run_chain(series, truth.g, truth.orders, hyper, fit_seed)
    output = relabel_chain(output, RelabelConfig(m=m, subset=subset))
    return _replica_param_draws(output, truth)


def cmd_replicate(config: RunConfig, out: Path) -> tuple[list[str], dict]:
    truth = BUILTIN_SPECS[config.spec]()
    n = config.replica_length
    overrides = dict(
        a=config.a,
        c=config.c,
        p_max=config.p_max,
        burn_in=config.burn_in,
        n_iter=config.n_iter,
        pilot_iters=config.pilot_iters,
    )
    children = np.random.SeedSequence(config.seed).spawn(config.replicas)
    jobs = []
    for child in children:
        sim_seed, fit_seed = (int(s.generate_state(1)[0]) for s in child.spawn(2))
        jobs.append(
            (truth, n, sim_seed, fit_seed, overrides, config.relabel_warm_start,
             config.relabel_subset)
        )
    workers = _resolve_workers(config)
    if workers > 1 and config.replicas > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            replica_draws = list(pool.map(_replicate_worker, jobs))
    else:
        replica_draws = [_replicate_worker(job) for job in jobs]

    params = list(replica_draws[0])
    outputs: list[str] = []
    modes: dict[str, float] = {}
    for name in params:
        columns = [d[name] for d in replica_draws]
        lo = min(float(c.min()) for c in columns)
        hi = max(float(c.max()) for c in columns)
        grids = [density_grid(c, lo, hi) for c in columns]
        avg = average_density(grids)
        path = out / f"replicate_{name}.csv"
        write_grid_csv(path, avg.x, {"density": avg.density})
        outputs.append(str(path))
        modes[name] = avg.mode()
    diag = {
        "spec": config.spec,
        "replicas": config.replicas,
        "replica_length": n,
        "workers": workers,
        "density_modes": modes,
    }
    return outputs, diag


_HANDLERS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "select": cmd_select,
    "forecast": cmd_forecast,
    "replicate": cmd_replicate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixar",
        description="Bayesian mixture autoregressive modelling toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "simulate a series from a built-in or user specification",
        "fit": "fit a fixed-order model and write draws and summaries",
        "select": "estimate evidence over a range of component counts",
        "forecast": "posterior-averaged predictive density from stored draws",
        "replicate": "repeated simulate-and-fit study with averaged densities",
    }
    for name in _HANDLERS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", default=None, help="key=value configuration file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            dest="overrides",
            help="override one configuration key (repeatable)",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = build_config(args.config, args.overrides)
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        started = time.perf_counter()
        outputs, diag = _HANDLERS[args.command](config, out)
        elapsed = time.perf_counter() - started
        manifest_path = out / "manifest.json"
        write_manifest(
            manifest_path,
            args.command,
            config_dict(config),
            config.seed,
            elapsed,
            outputs,
            diag,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in outputs + [str(manifest_path)]:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
