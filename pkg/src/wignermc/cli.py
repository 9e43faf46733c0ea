"""Command-line experiment runner.

Subcommands: ``run`` (dispatch on the manifest's experiment kind),
``validate`` (static report, never fails the process), ``scan`` (kappa
sweep regardless of kind) and ``compare`` (difference columns between two
series CSVs).  Exit codes: 0 success, 2 manifest/schema errors, 3 runtime
failures.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .estimators import kappa_scan_fit
from .manifest import (
    ManifestError,
    lattice_config_from_manifest,
    model_from_manifest,
    parse_manifest,
    settings_from_manifest,
    state_from_manifest,
    validate_manifest,
)
from .model import LATTICE_CHAIN
from .oracle import QuadratureError, uq_saddle, uq_wigner


def _load(args):
    manifest = parse_manifest(args.manifest)
    if args.seed is not None:
        manifest["sampling"]["seed"] = args.seed
    if args.workers is not None:
        manifest["sampling"]["workers"] = args.workers
    if args.out is not None:
        manifest["output"]["directory"] = args.out
    return manifest


def _outdir(manifest) -> Path:
    out = Path(manifest["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(manifest, out: Path, series_by_name: dict, extra_meta=None) -> None:
    for name, series in series_by_name.items():
        experiments.write_series_csv(out / f"{name}.csv", [series])
    experiments.write_metadata(out / "metadata.json", manifest, extra_meta)


def cmd_run(args) -> int:
    manifest = _load(args)
    kind = manifest["experiment"]["kind"]
    out = _outdir(manifest)
    model = model_from_manifest(manifest)
    settings = settings_from_manifest(manifest, long_run=args.long_run)

    if kind == "schrodinger-oracle":
        o = manifest["oracle"]
        series = experiments.oracle_series_1d(
            model,
            manifest["state"]["sigma_x"],
            settings.record_times(),
            dt=o["dt"],
            half_width=o["half_width"],
            n_points=o["n_points"],
        )
        _write(manifest, out, {"oracle": series})
        return 0

    if kind == "uq-analysis":
        return _run_uq(manifest, out)

    if kind == "quench":
        config = lattice_config_from_manifest(manifest)
        o = manifest["oracle"]
        result = experiments.run_quench(
            config,
            settings,
            with_oracle=bool(o["enabled"]) or config.n_sites == 2,
            oracle_kwargs={
                "dt": o["dt"],
                "half_width": o["half_width"],
                "n_points": o["n_points"],
            },
        )
        meta = {"noise_law": experiments.law_metadata(settings.noise_law(model))}
        _write(manifest, out, result, meta)
        return 0

    state = state_from_manifest(manifest)
    law_meta = {"noise_law": experiments.law_metadata(settings.noise_law(model))}

    if kind == "classical":
        from dataclasses import replace

        sums = experiments.run_signed(model, state, replace(settings, kappa=0.0))
        series = experiments.series_from_sums(sums, settings.n_blocks)
        _write(manifest, out, {"classical": series}, law_meta)
        return 0

    if kind == "signed-run":
        sums = experiments.run_signed(model, state, settings)
        series = experiments.series_from_sums(sums, settings.n_blocks)
        _write(manifest, out, {"run": series}, law_meta)
        return 0

    if kind == "lqc":
        cl, kap, lqc = experiments.run_paired_lqc(model, state, settings)
        series = {"classical": cl, "kappa": kap, "lqc": lqc}
        if manifest["oracle"]["enabled"]:
            o = manifest["oracle"]
            series["oracle"] = experiments.oracle_series_1d(
                model,
                manifest["state"]["sigma_x"],
                settings.record_times(),
                dt=o["dt"],
                half_width=o["half_width"],
                n_points=o["n_points"],
            )
        _write(manifest, out, series, law_meta)
        return 0

    if kind == "kappa-scan":
        return _run_scan(manifest, out, model, state, settings)

    raise ManifestError(f"unhandled experiment kind {kind!r}")


def _run_scan(manifest, out, model, state, settings) -> int:
    from dataclasses import replace

    kappas = list(manifest["evolution"]["kappa_list"])
    if not kappas:
        raise ManifestError("[evolution] kappa_list required for a kappa scan")
    if 0.0 not in kappas:
        kappas = [0.0] + kappas
    kappas = sorted(set(kappas))
    all_series = {}
    for kappa in kappas:
        sums = experiments.run_signed(model, state, replace(settings, kappa=kappa))
        series = experiments.series_from_sums(sums, settings.n_blocks)
        tag = f"kappa_{kappa:g}"
        all_series[tag] = series
        experiments.write_series_csv(out / f"{tag}.csv", [series])

    degree = manifest["evolution"]["fit_degree"]
    rows = []
    anchor = all_series["kappa_0"]
    for i, t in enumerate(anchor.times):
        ks, vals, errs = [], [], []
        for kappa in kappas:
            series = all_series[f"kappa_{kappa:g}"]
            if i < len(series.times):
                ks.append(kappa)
                vals.append(series.values[i])
                errs.append(series.errors[i])
        if len(ks) < degree + 1 or 0.0 not in ks:
            continue
        fit = kappa_scan_fit(ks, vals, errs, degree=degree)
        rows.append(
            (
                repr(float(t)),
                repr(fit.anchor),
                repr(fit.extrapolation),
                repr(fit.extrapolation_error),
                repr(fit.chi2),
                fit.dof,
                " ".join(repr(float(c)) for c in fit.coefficients),
            )
        )
    with open(out / "fit_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("time", "anchor", "extrapolation", "extrapolation_error",
             "chi2", "dof", "coefficients")
        )
        writer.writerows(rows)
    experiments.write_metadata(
        out / "metadata.json",
        manifest,
        {"noise_law": experiments.law_metadata(settings.noise_law(model))},
    )
    return 0


def _run_uq(manifest, out) -> int:
    u = manifest["uq"]
    model = model_from_manifest(manifest)
    lam, hbar = model.quartic_coupling, model.hbar
    p_grid = np.linspace(u["p_min"], u["p_max"], int(u["n_p"]))
    with open(out / "uq.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("x", "p", "t", "w_airy", "w_quad", "w_saddle"))
        for p in p_grid:
            w_airy = uq_wigner(u["x"], p, u["t"], u["sigma_x"], u["sigma_p"], lam, hbar)
            try:
                w_quad = uq_wigner(
                    u["x"], p, u["t"], u["sigma_x"], u["sigma_p"], lam, hbar,
                    method="quad",
                )
            except QuadratureError:
                w_quad = float("nan")
            try:
                w_sad = uq_saddle(u["x"], p, u["t"], u["sigma_x"], u["sigma_p"], lam, hbar)
            except (ValueError, ZeroDivisionError):
                w_sad = float("nan")
            writer.writerow(
                (repr(float(u["x"])), repr(float(p)), repr(float(u["t"])),
                 repr(w_airy), repr(w_quad), repr(w_sad))
            )
    experiments.write_metadata(out / "metadata.json", manifest)
    return 0


def cmd_validate(args) -> int:
    manifest = _load(args)
    findings = validate_manifest(manifest)
    for finding in findings:
        print(f"{finding.level}: {finding.message}")
    return 0


def cmd_scan(args) -> int:
    manifest = _load(args)
    if not manifest["evolution"]["kappa_list"]:
        print("error: manifest has no [evolution] kappa_list", file=sys.stderr)
        return 2
    out = _outdir(manifest)
    model = model_from_manifest(manifest)
    state = state_from_manifest(manifest)
    settings = settings_from_manifest(manifest, long_run=args.long_run)
    return _run_scan(manifest, out, model, state, settings)


def cmd_compare(args) -> int:
    def read(path):
        rows = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                rows[(row["time"], row["observable"])] = row
        return rows

    ref, cand = read(args.reference), read(args.candidate)
    keys = [k for k in ref if k in cand]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("time", "observable", "reference", "candidate",
             "difference", "error", "sigma_distance")
        )
        for key in keys:
            r, c = ref[key], cand[key]
            diff = float(c["value"]) - float(r["value"])
            err = float(np.hypot(float(c["error"]), float(r["error"])))
            sigma = abs(diff) / err if err > 0 else float("inf")
            writer.writerow(
                (key[0], key[1], r["value"], c["value"],
                 repr(diff), repr(err), repr(sigma))
            )
    print(f"wrote {args.out} ({len(keys)} aligned rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wignermc",
        description="signed-walker phase-space dynamics experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--manifest", required=True, help="path to a TOML manifest")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--workers", type=int, default=None, help="process count")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument(
            "--long-run", action="store_true",
            help="use the paper-scale sample size (sampling.n_walkers_long)",
        )

    p_run = sub.add_parser("run", help="execute the manifest's experiment")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="static manifest checks")
    common(p_val)
    p_val.set_defaults(func=cmd_validate)

    p_scan = sub.add_parser("scan", help="kappa-scan sweep with fit summary")
    common(p_scan)
    p_scan.set_defaults(func=cmd_scan)

    p_cmp = sub.add_parser("compare", help="difference columns between two CSVs")
    p_cmp.add_argument("--reference", required=True)
    p_cmp.add_argument("--candidate", required=True)
    p_cmp.add_argument("--out", required=True)
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ManifestError as err:
        print(f"manifest error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # runtime failures keep their module provenance
        print(f"{type(err).__module__}.{type(err).__name__}: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
