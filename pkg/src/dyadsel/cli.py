"""Command-line entry point: ``dyadsel {simulate,fit,replicate,sensitivity,check}``.

Exit codes: 0 success, 1 failed check, 2 bad input or configuration,
3 sampler abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .diagnostics import SensitivityGrid, conjugate_checks, getting_it_right, ig_prior_sensitivity, sensitivity_sweep
from .gibbs import SamplerError, run_chain
from .harness import METHODS, replicate_seeds, run_replicates
from .io import ConfigError, PanelFileError, RunConfig, load_config, parse_panel, write_panel
from .model import ModelError
from .simulate import SimDesign, dropout_summary, generate_dataset

log = logging.getLogger("dyadsel")


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args):
    design = SimDesign.for_variant(args.variant, n_dyads=args.n_dyads, seed=args.seed or 0)
    out = _out_dir(args)
    summaries = {}
    for r in range(args.R):
        data_seed, _ = replicate_seeds(design.seed, r)
        panel = generate_dataset(design, data_seed).panel
        name = f"panel_{r + 1:04d}.csv"
        write_panel(panel, out / name)
        summaries[name] = {str(t): v for t, v in dropout_summary(panel).items()}
    _write_json(out / "simulate.json", {"variant": design.variant, "seed": design.seed, "dropout": summaries})
    return 0


def cmd_fit(args):
    cfg = _run_config(args)
    panel = parse_panel(args.panel)
    chain = run_chain(panel, cfg.sampler, cfg.spec, likelihood=cfg.likelihood)
    out = _out_dir(args)
    with open(out / "draws.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(chain.names)
        for row in chain.draws:
            w.writerow(["%.17g" % v for v in row])
    s = cfg.sampler
    _write_json(
        out / "summary.json",
        {
            "likelihood": cfg.likelihood,
            "seed": s.seed,
            "n_iter": s.n_iter,
            "burn_in": s.burn_in,
            "thin": s.thin,
            "n_dyads": panel.n_dyads,
            "n_times": panel.n_times,
            "parameters": chain.summaries(),
            "acceptance": chain.acceptance,
        },
    )
    return 0


def cmd_replicate(args):
    cfg = _run_config(args)
    design = SimDesign.for_variant(args.variant, n_replicates=args.R, seed=cfg.sampler.seed)
    methods = [m for m in args.methods.split(",") if m] if args.methods is not None else None
    if methods is None:
        methods = ["complete-case", "available-case", "proposed"]
    bad = set(methods) - set(METHODS)
    if bad:
        raise ConfigError(f"unknown methods {sorted(bad)}; choose from {', '.join(METHODS)}")
    report = run_replicates(design, methods, cfg.sampler, workers=args.workers)
    out = _out_dir(args)
    report.write_csv(out / "report.csv")
    report.write_json(out / "report.json")
    return 0


def cmd_sensitivity(args):
    cfg = _run_config(args)
    panel = parse_panel(args.panel)
    out = _out_dir(args)
    grid = SensitivityGrid() if args.phi_means is None else SensitivityGrid(
        phi_means=tuple(float(v) for v in args.phi_means.split(","))
    )
    if args.kind in ("phi", "both"):
        tab = sensitivity_sweep(panel, grid, cfg.sampler, cfg.spec, workers=args.workers)
        tab.write_csv(out / "phi_sweep.csv")
        tab.write_long_csv(out / "phi_sweep_long.csv")
    if args.kind in ("ig", "both"):
        tab = ig_prior_sensitivity(panel, grid.ig_settings, cfg.sampler, cfg.spec, workers=args.workers)
        tab.write_csv(out / "ig_prior.csv")
        tab.write_long_csv(out / "ig_prior_long.csv")
    return 0


def cmd_check(args):
    seed = args.seed or 0
    ok = True
    report = {"oracles": {}, "getting_it_right": {}}
    for c in conjugate_checks(args.oracle_draws, seed):
        report["oracles"][c.name] = {"ks": c.ks, "mean_error": c.mean_error, "sd_error": c.sd_error, "passed": bool(c.passed)}
        print(f"{'PASS' if c.passed else 'FAIL'}  oracle {c.name:22s} KS={c.ks:.4f}")
        ok &= c.passed
    gir = getting_it_right(n_samples=args.samples, seed=seed)
    report["getting_it_right"] = {"max_abs_z": gir.max_abs_z, "z": gir.table(), "passed": bool(gir.passed())}
    print(f"{'PASS' if gir.passed() else 'FAIL'}  joint-distribution test max|z|={gir.max_abs_z:.2f}")
    ok &= gir.passed()
    if args.out_dir:
        _write_json(_out_dir(args) / "check.json", report)
    return 0 if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="dyadsel", description="Selection models for dyadic panels with dropout.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="master seed (overrides the configuration)")
        sp.add_argument("--out-dir", default=".", help="output directory")

    sp = sub.add_parser("simulate", help="write simulated panel files")
    common(sp, config=False)
    sp.add_argument("--variant", default="A", choices=["A", "B", "a", "b"])
    sp.add_argument("--R", type=int, default=1, help="number of panels")
    sp.add_argument("--n-dyads", type=int, default=200)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit a panel file")
    sp.add_argument("panel")
    common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("replicate", help="run a replicated simulation study")
    common(sp)
    sp.add_argument("--variant", default="A", choices=["A", "B", "a", "b"])
    sp.add_argument("--R", type=int, default=100)
    sp.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_replicate)

    sp = sub.add_parser("sensitivity", help="prior sensitivity analyses on a panel file")
    sp.add_argument("panel")
    common(sp)
    sp.add_argument("--kind", choices=["phi", "ig", "both"], default="both")
    sp.add_argument("--phi-means", help="comma-separated prior means for phi")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sensitivity)

    sp = sub.add_parser("check", help="sampler correctness suite")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out-dir")
    sp.add_argument("--samples", type=int, default=10_000, help="joint-distribution test sample size")
    sp.add_argument("--oracle-draws", type=int, default=100_000)
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, PanelFileError, ModelError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except SamplerError as err:
        print(f"sampler aborted: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
