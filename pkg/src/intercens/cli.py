"""Command-line surface tying the workflow together.

Subcommands: sim (scenario grid runner), fit em|aft|bayes, loo,
intervalize, report.  Every run is reproducible from (config, seed): all
RNG streams derive from explicit seeds, outputs carry a config hash, and
writes are atomic.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from .aft import fit_aft_mle, predict_survival, time_ratios
from .bayes import (
    PriorSpec,
    band_coverage_vs_em,
    chain_diagnostics,
    posterior_predictive_check,
    posterior_survival_band,
    sample_posterior,
)
from .dataio import (
    atomic_write,
    config_hash,
    format_number,
    intervalize_right_censored,
    load_ovarian,
    ovarian_path,
    read_dataset,
    read_raw_records,
    write_csv,
    write_dataset,
)
from .loo import compare_models, loo_elpd, pointwise_loglik
from .metrics import MetricReport, ibs, ise, km_pseudo_right
from .model import FamilyKind
from .simulate import generate_dataset, scenario_grid, true_marginal_survival
from .turnbull import bootstrap_bands, fit_npmle
from ._parallel import pmap

#: IBS evaluation horizon for simulation reports: long enough that the
#: generating survival curve has essentially fully transitioned.
IBS_HORIZON = 70.0


def _load_input(path: str, covariates: list[str] | None):
    if path == "ovarian":
        data = load_ovarian()
        if covariates is not None and tuple(covariates) != data.covariate_names:
            data = read_dataset(ovarian_path(), covariates=covariates)
        return data
    return read_dataset(path, covariates=covariates)


def _covariate_list(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [c for c in (part.strip() for part in text.split(",")) if c]


def _write_manifest(outdir: str, command: str, config: dict, outputs: list[str]) -> None:
    manifest = {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "versions": {
            "python": ".".join(map(str, sys.version_info[:3])),
            "numpy": np.__version__,
            "intercens": __version__,
        },
        "outputs": sorted(outputs),
    }
    atomic_write(os.path.join(outdir, "manifest.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_curve(path: str, curve) -> None:
    write_csv(
        path,
        ["time", "survival"],
        [[format_number(t), format_number(v)] for t, v in zip(curve.knots, curve.values)],
    )


def _cmd_fit_em(args) -> int:
    data = _load_input(args.input, _covariate_list(args.covariates))
    fit = fit_npmle(data)
    outputs = ["em_curve.csv", "em_masses.csv"]
    _write_curve(os.path.join(args.output, "em_curve.csv"), fit.curve)
    write_csv(
        os.path.join(args.output, "em_masses.csv"),
        ["a_lo", "a_hi", "p"],
        [
            [format_number(lo), format_number(hi), format_number(p)]
            for (lo, hi), p in zip(fit.support.intervals, fit.masses)
        ],
    )
    if args.bootstrap:
        band = bootstrap_bands(
            data, n_boot=args.bootstrap, level=args.level, seed=args.seed, workers=args.workers
        )
        write_csv(
            os.path.join(args.output, "em_band.csv"),
            ["time", "lower", "upper"],
            [
                [format_number(t), format_number(lo), format_number(hi)]
                for t, lo, hi in zip(band.grid, band.lower, band.upper)
            ],
        )
        outputs.append("em_band.csv")
    config = {
        "command": "fit em",
        "input": args.input,
        "bootstrap": args.bootstrap,
        "level": args.level,
        "seed": args.seed,
    }
    _write_manifest(args.output, "fit em", config, outputs)
    print(f"em: m={fit.support.m} iterations={fit.iterations} converged={fit.converged}")
    return 0


def _cmd_fit_aft(args) -> int:
    data = _load_input(args.input, _covariate_list(args.covariates))
    family = FamilyKind(args.family)
    fit = fit_aft_mle(data, family)
    table = time_ratios(fit, args.level)
    rows = []
    for j, term in enumerate(table.terms):
        rows.append(
            [
                term,
                format_number(fit.params.beta[j]),
                format_number(table.se_log[j]),
                format_number(table.estimate[j]),
                format_number(table.lower[j]),
                format_number(table.upper[j]),
            ]
        )
    write_csv(os.path.join(args.output, "aft_coefficients.csv"), ["term", "estimate", "se", "tr", "lo", "hi"], rows)
    grid = np.linspace(0.0, args.horizon, args.grid_points)
    xbar = data.covariate_matrix().mean(axis=0)
    curve = predict_survival(fit, xbar, grid)
    write_csv(
        os.path.join(args.output, "aft_survival.csv"),
        ["time", "survival"],
        [[format_number(t), format_number(v)] for t, v in zip(grid, curve)],
    )
    config = {
        "command": "fit aft",
        "input": args.input,
        "family": family.value,
        "level": args.level,
        "covariates": list(data.covariate_names),
    }
    _write_manifest(args.output, "fit aft", config, ["aft_coefficients.csv", "aft_survival.csv"])
    print(f"aft[{family.value}]: loglik={fit.loglik:.6f} converged={fit.converged}")
    return 0


def _summary_rows(draws, diag):
    flat = draws.flat()
    rows = []
    for k, name in enumerate(draws.parameters):
        column = flat[:, k]
        rows.append(
            [
                name,
                format_number(float(np.median(column))),
                format_number(float(column.std(ddof=1))),
                format_number(float(np.quantile(column, 0.025))),
                format_number(float(np.quantile(column, 0.975))),
                format_number(float(diag.rhat[k])),
                format_number(float(diag.ess_bulk[k])),
                format_number(float(diag.ess_tail[k])),
            ]
        )
    return rows


def _cmd_fit_bayes(args) -> int:
    data = _load_input(args.input, _covariate_list(args.covariates))
    family = FamilyKind(args.family)
    priors = PriorSpec(args.sigma_mu, args.sigma_beta, args.a_shape, args.b_shape)
    draws = sample_posterior(
        data,
        priors=priors,
        family=family,
        chains=args.chains,
        warmup=args.warmup,
        iters=args.iters,
        seed=args.seed,
        workers=args.workers,
    )
    outputs = ["bayes_draws.csv", "bayes_summary.csv", "bayes_band.csv", "overlay.csv", "ppc.csv"]
    header = ["chain", "iter", *draws.parameters]
    rows = []
    for c in range(draws.n_chains):
        for i in range(draws.n_iterations):
            rows.append([str(c), str(i), *(format_number(v) for v in draws.draws[c, i])])
    write_csv(os.path.join(args.output, "bayes_draws.csv"), header, rows)
    diag = chain_diagnostics(draws)
    write_csv(
        os.path.join(args.output, "bayes_summary.csv"),
        ["parameter", "median", "est_error", "q2.5", "q97.5", "rhat", "ess_bulk", "ess_tail"],
        _summary_rows(draws, diag),
    )
    em = fit_npmle(data)
    horizon = max(args.horizon, float(em.curve.knots[-1]) if em.curve.knots.size else args.horizon)
    grid = np.linspace(0.0, horizon, args.grid_points)
    xbar = data.covariate_matrix().mean(axis=0)
    band = posterior_survival_band(draws, xbar, grid, args.level)
    write_csv(
        os.path.join(args.output, "bayes_band.csv"),
        ["time", "lower", "median", "upper"],
        [
            [format_number(t), format_number(lo), format_number(md), format_number(hi)]
            for t, lo, md, hi in zip(band.grid, band.lower, band.median, band.upper)
        ],
    )
    em_values = em.curve.evaluate(grid)
    write_csv(
        os.path.join(args.output, "overlay.csv"),
        ["time", "em_survival", "band_lower", "band_median", "band_upper"],
        [
            [format_number(t), format_number(e), format_number(lo), format_number(md), format_number(hi)]
            for t, e, lo, md, hi in zip(grid, em_values, band.lower, band.median, band.upper)
        ],
    )
    coverage = band_coverage_vs_em(band, em)
    ppc = posterior_predictive_check(draws, data, n_replicates=args.ppc_replicates, seed=args.seed)
    write_csv(
        os.path.join(args.output, "ppc.csv"),
        ["observation", "capture_rate", "model_prob"],
        [
            [str(i), format_number(c), format_number(m)]
            for i, (c, m) in enumerate(zip(ppc.capture_rate, ppc.model_prob))
        ],
    )
    stats = {
        "band_coverage_vs_em": coverage,
        "ppc_mean_capture": ppc.mean_capture,
        "ppc_mean_model_prob": ppc.mean_model_prob,
        "ppc_flagged": ppc.flagged,
        "divergences": draws.meta["divergences"],
        "divergence_warning": draws.meta["divergence_warning"],
    }
    atomic_write(os.path.join(args.output, "bayes_stats.json"), json.dumps(stats, indent=2, sort_keys=True) + "\n")
    outputs.append("bayes_stats.json")
    config = {
        "command": "fit bayes",
        "input": args.input,
        "family": family.value,
        "chains": args.chains,
        "warmup": args.warmup,
        "iters": args.iters,
        "seed": args.seed,
        "level": args.level,
        "priors": [priors.sigma_mu, priors.sigma_beta, priors.a_shape, priors.b_shape],
    }
    _write_manifest(args.output, "fit bayes", config, outputs)
    print(
        f"bayes[{family.value}]: max rhat={diag.rhat.max():.4f} "
        f"min ess_bulk={diag.ess_bulk.min():.0f} overlay coverage={coverage:.3f}"
    )
    return 0


def _cmd_loo(args) -> int:
    data = _load_input(args.input, _covariate_list(args.covariates))
    results = {}
    for family in (FamilyKind.WEIBULL, FamilyKind.LOGNORMAL):
        draws = sample_posterior(
            data,
            family=family,
            chains=args.chains,
            warmup=args.warmup,
            iters=args.iters,
            seed=args.seed,
            workers=args.workers,
        )
        results[family.value] = loo_elpd(pointwise_loglik(draws, data))
    wb = results["weibull"]
    ln = results["lognormal"]
    diff, se_diff = compare_models(wb, ln)
    write_csv(
        os.path.join(args.output, "loo_comparison.csv"),
        ["model", "elpd_diff", "se_diff"],
        [
            ["weibull", format_number(0.0), format_number(0.0)],
            ["lognormal", format_number(diff), format_number(se_diff)],
        ],
    )
    write_csv(
        os.path.join(args.output, "loo_elpd.csv"),
        ["model", "elpd", "se"],
        [
            ["weibull", format_number(wb.elpd), format_number(wb.se)],
            ["lognormal", format_number(ln.elpd), format_number(ln.se)],
        ],
    )
    config = {
        "command": "loo",
        "input": args.input,
        "chains": args.chains,
        "warmup": args.warmup,
        "iters": args.iters,
        "seed": args.seed,
    }
    _write_manifest(args.output, "loo", config, ["loo_comparison.csv", "loo_elpd.csv"])
    print(f"loo: weibull elpd={wb.elpd:.3f} lognormal elpd={ln.elpd:.3f} diff={diff:.3f} (se {se_diff:.3f})")
    return 0


def _cmd_intervalize(args) -> int:
    source = ovarian_path() if args.input == "ovarian" else args.input
    records, names = read_raw_records(
        source,
        time_col=args.time_col,
        status_col=args.status_col,
        covariates=_covariate_list(args.covariates),
    )
    data = intervalize_right_censored(records, args.window, names)
    write_dataset(data, os.path.join(args.output, "intervalized.csv"))
    config = {
        "command": "intervalize",
        "input": args.input,
        "window": args.window,
        "covariates": list(names),
    }
    _write_manifest(args.output, "intervalize", config, ["intervalized.csv"])
    print(f"intervalized {data.n} records (window {args.window} months)")
    return 0


def _sim_one_cell(task):
    config, replicates, do_bayes, bayes_iters, outdir = task
    from .model import FamilyKind as FK

    marginal = true_marginal_survival(config)
    cell_dir = os.path.join(outdir, config.scenario_id)
    aft_variants = [
        (f"aft_{family.value}{suffix}", family, with_cov)
        for family in (FK.WEIBULL, FK.LOGNORMAL)
        for suffix, with_cov in (("", True), ("_nocov", False))
    ]
    ise_values, ibs_km = [], []
    ibs_aft = {name: [] for name, _, _ in aft_variants}
    for rep in range(replicates):
        rng = np.random.default_rng([config.seed, rep])
        sim = generate_dataset(config, rng)
        write_dataset(sim.dataset, os.path.join(cell_dir, f"rep{rep:03d}_data.csv"))
        write_csv(
            os.path.join(cell_dir, f"rep{rep:03d}_truths.csv"),
            ["i", "T_true"],
            [[str(i), format_number(t)] for i, t in enumerate(sim.true_times)],
        )
        em = fit_npmle(sim.dataset)
        _write_curve(os.path.join(cell_dir, f"rep{rep:03d}_em_curve.csv"), em.curve)
        ise_values.append(ise(em.curve, marginal, config.tau).raw)
        X = sim.dataset.covariate_matrix()
        for name, family, with_cov in aft_variants:
            data = sim.dataset if with_cov else sim.dataset.drop_covariates()
            try:
                fit = fit_aft_mle(data, family)
            except ValueError:
                continue

            def pred_aft(grid, fit=fit, with_cov=with_cov):
                if with_cov:
                    return np.stack([predict_survival(fit, x, grid) for x in X])
                return np.tile(predict_survival(fit, (), grid), (sim.dataset.n, 1))

            ibs_aft[name].append(ibs(pred_aft, sim.true_times, IBS_HORIZON))
        km = km_pseudo_right(sim.dataset)

        def pred_km(grid):
            return np.tile(km.evaluate(grid), (sim.dataset.n, 1))

        ibs_km.append(ibs(pred_km, sim.true_times, IBS_HORIZON))
        if do_bayes:
            draws = sample_posterior(
                sim.dataset, family=config.family, chains=2, warmup=500, iters=bayes_iters, seed=rep
            )
            diag = chain_diagnostics(draws)
            write_csv(
                os.path.join(cell_dir, f"rep{rep:03d}_bayes_summary.csv"),
                ["parameter", "median", "est_error", "q2.5", "q97.5", "rhat", "ess_bulk", "ess_tail"],
                _summary_rows(draws, diag),
            )
    reports = [
        MetricReport(config.scenario_id, "em", replicates, ise=float(np.mean(ise_values))),
        MetricReport(config.scenario_id, "km_pseudo", replicates, ibs=float(np.mean(ibs_km))),
    ]
    for name, _, _ in aft_variants:
        if ibs_aft[name]:
            reports.append(
                MetricReport(
                    config.scenario_id, name, len(ibs_aft[name]), ibs=float(np.mean(ibs_aft[name]))
                )
            )
    return reports


def _scenario_dict(config) -> dict:
    from .simulate import FixedVisits

    schedule = (
        {"kind": "fixed", "width": config.schedule.width}
        if isinstance(config.schedule, FixedVisits)
        else {"kind": "poisson", "rate": config.schedule.rate}
    )
    return {
        "id": config.scenario_id,
        "n": config.n,
        "family": config.family.value,
        "shape": config.shape,
        "mu": config.mu,
        "beta": list(config.beta),
        "sigma": config.sigma,
        "schedule": schedule,
        "tau": config.tau,
        "seed": config.seed,
    }


def _report_rows(reports):
    rows = []
    for r in reports:
        rows.append(
            [
                r.scenario_id,
                r.estimator,
                str(r.replicates),
                "" if r.ise is None else format_number(r.ise),
                "" if r.ibs is None else format_number(r.ibs),
                "" if r.coverage_pointwise is None else format_number(r.coverage_pointwise),
                "" if r.coverage_simultaneous is None else format_number(r.coverage_simultaneous),
            ]
        )
    return rows


def _cmd_sim(args) -> int:
    configs = scenario_grid(args.seed)
    if args.cells != "all":
        wanted = {c.strip() for c in args.cells.split(",")}
        by_id = {c.scenario_id: c for c in configs}
        missing = wanted - set(by_id)
        if missing:
            raise SystemExit(f"unknown scenario cells: {sorted(missing)}")
        configs = [by_id[c] for c in sorted(wanted)]
    tasks = [(c, args.replicates, args.bayes, args.iters, args.output) for c in configs]
    all_reports = [r for cell in pmap(_sim_one_cell, tasks, workers=args.workers) for r in cell]
    write_csv(
        os.path.join(args.output, "metrics.csv"),
        ["scenario", "estimator", "replicates", "ise", "ibs", "coverage_pointwise", "coverage_simultaneous"],
        _report_rows(all_reports),
    )
    atomic_write(
        os.path.join(args.output, "scenarios.json"),
        json.dumps([_scenario_dict(c) for c in configs], indent=2, sort_keys=True) + "\n",
    )
    config = {
        "command": "sim",
        "cells": args.cells,
        "replicates": args.replicates,
        "seed": args.seed,
        "bayes": args.bayes,
        "ibs_horizon": IBS_HORIZON,
    }
    _write_manifest(args.output, "sim", config, ["metrics.csv"])
    print(f"sim: {len(configs)} cells x {args.replicates} replicates -> {args.output}")
    return 0


def _cmd_report(args) -> int:
    indir = args.input
    lines = [f"intercens {__version__} run report", ""]
    manifest_path = os.path.join(indir, "manifest.json")
    if os.path.exists(manifest_path):
        with open(manifest_path) as handle:
            manifest = json.load(handle)
        lines.append(f"command: {manifest.get('command')}")
        lines.append(f"config hash: {manifest.get('config_hash')}")
        lines.append("")
    sections = {
        "em": ["em_curve.csv", "em_masses.csv"],
        "aft": ["aft_coefficients.csv"],
        "bayes": ["bayes_summary.csv", "overlay.csv"],
        "loo": ["loo_comparison.csv"],
        "sim": ["metrics.csv"],
    }
    for section, files in sections.items():
        present = [f for f in files if os.path.exists(os.path.join(indir, f))]
        if present:
            lines.append(f"{section}: {', '.join(present)}")
            for name in present:
                with open(os.path.join(indir, name), newline="") as handle:
                    n_rows = sum(1 for _ in handle) - 1
                lines.append(f"  {name}: {n_rows} rows")
        else:
            lines.append(f"{section}: not run")
    stats_path = os.path.join(indir, "bayes_stats.json")
    if os.path.exists(stats_path):
        with open(stats_path) as handle:
            stats = json.load(handle)
        lines.append("")
        lines.append(f"overlay coverage vs EM: {stats['band_coverage_vs_em']:.3f}")
        lines.append(f"ppc mean capture: {stats['ppc_mean_capture']:.3f}")
    text = "\n".join(lines) + "\n"
    atomic_write(os.path.join(args.output, "summary.txt"), text)
    files = sorted(
        name for name in os.listdir(indir) if os.path.isfile(os.path.join(indir, name))
    )
    _write_manifest(args.output, "report", {"command": "report", "input_files": files}, ["summary.txt"])
    print(text, end="")
    return 0


def _add_shared(parser, seed_default: int = 0):
    parser.add_argument("--output", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=seed_default)
    parser.add_argument("--config", default=None, help="JSON config file; flags override")
    parser.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intercens",
        description="Interval-censored survival: Turnbull EM, AFT likelihoods, Bayesian AFT, PSIS-LOO",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("sim", help="run scenario-grid simulations")
    _add_shared(p_sim, seed_default=1000)
    p_sim.add_argument("--cells", default="all", help="comma-separated scenario ids, or 'all'")
    p_sim.add_argument("--replicates", type=int, default=5)
    p_sim.add_argument("--bayes", action="store_true", help="also fit Bayesian AFT per replicate")
    p_sim.add_argument("--iters", type=int, default=500)
    p_sim.set_defaults(func=_cmd_sim)

    p_fit = sub.add_parser("fit", help="fit one estimator to one dataset")
    fit_sub = p_fit.add_subparsers(dest="estimator", required=True)

    p_em = fit_sub.add_parser("em", help="Turnbull NPMLE via EM")
    _add_shared(p_em)
    p_em.add_argument("--input", required=True, help="dataset CSV ('ovarian' for the fixture)")
    p_em.add_argument("--covariates", default=None)
    p_em.add_argument("--bootstrap", type=int, default=0, help="bootstrap replicates (0 = none)")
    p_em.add_argument("--level", type=float, default=0.95)
    p_em.set_defaults(func=_cmd_fit_em)

    p_aft = fit_sub.add_parser("aft", help="parametric AFT maximum likelihood")
    _add_shared(p_aft)
    p_aft.add_argument("--input", required=True)
    p_aft.add_argument("--covariates", default=None)
    p_aft.add_argument("--family", choices=["weibull", "lognormal"], default="weibull")
    p_aft.add_argument("--level", type=float, default=0.95)
    p_aft.add_argument("--horizon", type=float, default=40.0)
    p_aft.add_argument("--grid-points", type=int, default=201, dest="grid_points")
    p_aft.set_defaults(func=_cmd_fit_aft)

    p_bayes = fit_sub.add_parser("bayes", help="Bayesian AFT via HMC")
    _add_shared(p_bayes)
    p_bayes.add_argument("--input", required=True)
    p_bayes.add_argument("--covariates", default=None)
    p_bayes.add_argument("--family", choices=["weibull", "lognormal"], default="weibull")
    p_bayes.add_argument("--chains", type=int, default=4)
    p_bayes.add_argument("--warmup", type=int, default=1000)
    p_bayes.add_argument("--iters", type=int, default=1000)
    p_bayes.add_argument("--level", type=float, default=0.95)
    p_bayes.add_argument("--horizon", type=float, default=24.0)
    p_bayes.add_argument("--grid-points", type=int, default=97, dest="grid_points")
    p_bayes.add_argument("--ppc-replicates", type=int, default=200, dest="ppc_replicates")
    p_bayes.add_argument("--sigma-mu", type=float, default=10.0, dest="sigma_mu")
    p_bayes.add_argument("--sigma-beta", type=float, default=5.0, dest="sigma_beta")
    p_bayes.add_argument("--a-shape", type=float, default=2.0, dest="a_shape")
    p_bayes.add_argument("--b-shape", type=float, default=1.0, dest="b_shape")
    p_bayes.set_defaults(func=_cmd_fit_bayes)

    p_loo = sub.add_parser("loo", help="PSIS-LOO comparison of the two AFT families")
    _add_shared(p_loo)
    p_loo.add_argument("--input", required=True)
    p_loo.add_argument("--covariates", default=None)
    p_loo.add_argument("--chains", type=int, default=4)
    p_loo.add_argument("--warmup", type=int, default=1000)
    p_loo.add_argument("--iters", type=int, default=1000)
    p_loo.set_defaults(func=_cmd_loo)

    p_int = sub.add_parser("intervalize", help="convert right-censored raw data to windows")
    _add_shared(p_int)
    p_int.add_argument("--input", required=True)
    p_int.add_argument("--window", type=float, default=3.0, help="assessment window in months")
    p_int.add_argument("--covariates", default=None)
    p_int.add_argument("--time-col", default="time_days", dest="time_col")
    p_int.add_argument("--status-col", default="status", dest="status_col")
    p_int.set_defaults(func=_cmd_intervalize)

    p_rep = sub.add_parser("report", help="summarize a run directory")
    _add_shared(p_rep)
    p_rep.add_argument("--input", required=True, help="run directory to summarize")
    p_rep.set_defaults(func=_cmd_report)

    return parser


def _apply_config_file(args: argparse.Namespace, argv: list[str]) -> None:
    if getattr(args, "config", None) is None:
        return
    with open(args.config) as handle:
        overrides = json.load(handle)
    given = {token.split("=")[0].lstrip("-").replace("-", "_") for token in argv if token.startswith("--")}
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and attr not in given:
            setattr(args, attr, value)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_config_file(args, argv)
    if hasattr(args, "output"):
        os.makedirs(args.output, exist_ok=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
