"""Command-line interface.

Verbs: simulate, fit, experiment <name>, triggering, bench. Global flags
--config/--seed/--out/--threads; every run writes a manifest recording the
effective configuration so outputs are reproducible from the bundle
alone. Exit codes: 0 success, 2 configuration error, 3 fit failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .backend import backend_name
from .catalog import load_catalog, save_catalog
from .config import ConfigError, RunConfig, load_config
from .experiments import (bench_scaling, experiment_history_conditioning,
                          experiment_incompleteness,
                          experiment_representative_sample,
                          experiment_stochastic, experiment_vary_init,
                          fit_catalog, simulate_from_config, summarize,
                          triggering_curves, write_triggering_curves)
from .inference import NonConvergenceError
from .model import PARAM_NAMES
from .priors import forward, sample_prior
from .simulate import IncompletenessModel, apply_incompleteness

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FIT = 3

EXPERIMENTS = {
    "vary-init": experiment_vary_init,
    "stochastic": experiment_stochastic,
    "representative-sample": experiment_representative_sample,
    "history-conditioning": experiment_history_conditioning,
    "incompleteness": experiment_incompleteness,
}


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig().validate()
    if args.seed is not None:
        cfg.rng_seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.threads is not None:
        cfg.num_threads = args.threads
    return cfg.validate()


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, cfg: RunConfig, extra: dict) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "backend": backend_name(),
        "seed": cfg.rng_seed,
        "config": cfg.to_text(),
        "wall_clock_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))


def _write_rows_csv(path: Path, rows: list) -> None:
    keys = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)


def cmd_simulate(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(cfg)
    if args.seed_event:
        pairs = []
        for tok in args.seed_event:
            t, m = tok.split(":")
            pairs.append((float(t), float(m)))
        cfg.seed_events = tuple(pairs)
        cfg.validate()
    sim = simulate_from_config(cfg)
    save_catalog(sim.catalog, out / "catalog.csv")
    (out / "genealogy.json").write_text(json.dumps(sim.genealogy_rows()))
    extra = {"n_events": len(sim.catalog), "outputs": ["catalog.csv", "genealogy.json"]}
    if args.incomplete:
        kv = dict(tok.split("=") for tok in args.incomplete.split(","))
        model = IncompletenessModel(float(kv.get("G", cfg.incomplete_g)),
                                    float(kv.get("H", cfg.incomplete_h)))
        refs = [sim.catalog[i] for i in range(len(sim.catalog))
                if sim.catalog[i].id in sim.seed_ids]
        degraded = apply_incompleteness(sim.catalog, model, cfg.m0,
                                        references=refs)
        save_catalog(degraded, out / "catalog_incomplete.csv")
        extra["n_events_incomplete"] = len(degraded)
        extra["outputs"].append("catalog_incomplete.csv")
    _write_manifest(out, "simulate", cfg, extra)
    print(f"simulated {len(sim.catalog)} events -> {out}")
    return EXIT_OK


def _write_fit_outputs(out: Path, res, cfg: RunConfig) -> None:
    res.save_json(out / "posterior.json")
    for name in PARAM_NAMES:
        x, dens = res.marginals[name]
        with open(out / f"marginal_{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([name, "density"])
            for a, b in zip(x, dens):
                w.writerow([repr(float(a)), repr(float(b))])
    _write_rows_csv(out / "trace.csv", [
        {"iteration": r.iteration, "step_fraction": r.step_fraction,
         "objective": r.objective, "stalled": r.stalled,
         **{f"{n}": v for n, v in zip(PARAM_NAMES, r.params)}}
        for r in res.history
    ])


def cmd_fit(args) -> int:
    cfg = _load_run_config(args)
    if args.catalog:
        cfg.catalogue = args.catalog
    if not cfg.catalogue:
        raise ConfigError("fit needs a catalogue (config key or --catalog)")
    cat = load_catalog(cfg.catalogue)
    out = _out_dir(cfg)
    t1 = args.t1 if args.t1 is not None else cfg.t12[0]
    t2 = args.t2 if args.t2 is not None else cfg.t12[1]
    res = fit_catalog(cat, cfg, t1=t1, t2=t2,
                      history_conditioning=args.history_conditioning != "off")
    _write_fit_outputs(out, res, cfg)
    summary = summarize(res, cfg.true_params())
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    _write_manifest(out, "fit", cfg, {
        "catalogue": str(cfg.catalogue),
        "t1": t1, "t2": t2,
        "history_conditioning": args.history_conditioning != "off",
        "n_events": res.n_events,
        "iterations": res.iterations,
        "converged": res.converged,
        "elapsed_seconds": res.elapsed_seconds,
    })
    print(f"fit of {res.n_events} events converged={res.converged} "
          f"in {res.iterations} iterations ({res.elapsed_seconds:.2f}s) -> {out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(cfg)
    runner = EXPERIMENTS[args.name]
    result = runner(cfg)
    rows = result.get("rows")
    if rows is None:  # history-conditioning returns two row groups
        rows = [dict(r, group=g) for g in ("cropped", "conditioned")
                for r in result[g]]
    _write_rows_csv(out / "summary.csv", rows)
    (out / "experiment.json").write_text(json.dumps(result, default=str, indent=2))
    _write_manifest(out, f"experiment {args.name}", cfg,
                    {"n_runs": len(rows)})
    print(f"experiment {args.name}: {len(rows)} fits -> {out}")
    return EXIT_OK


def cmd_triggering(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(cfg)
    rng = np.random.default_rng(cfg.rng_seed)
    if args.from_prior:
        samples = sample_prior(cfg.priors(), args.samples, rng)
        source = "prior"
    else:
        if not args.posterior:
            raise ConfigError("triggering needs --posterior FILE or --from-prior")
        post = json.loads(Path(args.posterior).read_text())
        mode = np.asarray(post["mode_internal"])
        cov = np.asarray(post["covariance"])
        chol = np.linalg.cholesky(cov)
        z = mode[None, :] + rng.standard_normal((args.samples, 5)) @ chol.T
        links = cfg.priors()
        samples = np.column_stack(
            [forward(z[:, k], t) for k, t in enumerate(links.targets)])
        source = str(args.posterior)
    mags = [float(m) for m in args.mags.split(",")] if args.mags else [4.0, 6.7]
    curves = triggering_curves(samples, cfg.m0, mags, args.horizon)
    files = write_triggering_curves(curves, out)
    _write_manifest(out, "triggering", cfg, {
        "samples": args.samples, "source": source,
        "parent_magnitudes": mags, "horizon_days": args.horizon,
        "outputs": [f.name for f in files],
    })
    print(f"wrote {len(files)} triggering curve files -> {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load_run_config(args)
    out = _out_dir(cfg)
    sizes = [int(s) for s in args.sizes.split(",")]
    result = bench_scaling(cfg, sizes)
    _write_rows_csv(out / "bench.csv", result["rows"])
    _write_manifest(out, "bench", cfg, {
        "sizes": sizes, "loglog_slope": result["loglog_slope"],
    })
    print(f"bench slope={result['loglog_slope']:.3f} -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etasbayes",
        description="Temporal ETAS simulation and Bayesian inversion",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file")
    common.add_argument("--seed", type=int, help="override rng.seed")
    common.add_argument("--out", help="override output directory")
    common.add_argument("--threads", type=int, help="override num.threads")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="generate a synthetic catalogue")
    p.add_argument("--seed-event", action="append", metavar="DAY:MAG",
                   help="impose a mainshock (repeatable)")
    p.add_argument("--incomplete", metavar="G=3.8,H=1.0",
                   help="also write a rate-dependent incomplete copy")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="invert one catalogue")
    p.add_argument("--catalog", help="catalogue CSV (overrides config)")
    p.add_argument("--t1", type=float, help="window start override")
    p.add_argument("--t2", type=float, help="window end override")
    p.add_argument("--history-conditioning", choices=("on", "off"),
                   default="on", help="use pre-window events as history")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("experiment", parents=[common],
                       help="run a multi-fit study")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("triggering", parents=[common],
                       help="triggering-function ensembles from samples")
    p.add_argument("--posterior", help="posterior.json from a fit")
    p.add_argument("--from-prior", action="store_true",
                   help="sample the priors instead of a posterior")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--mags", default="4.0,6.7",
                   help="comma-separated parent magnitudes")
    p.add_argument("--horizon", type=float, default=1.0, help="days")
    p.set_defaults(func=cmd_triggering)

    p = sub.add_parser("bench", parents=[common],
                       help="fit time vs catalogue size")
    p.add_argument("--sizes", default="250,500,1000,2000,4000")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError,) as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
