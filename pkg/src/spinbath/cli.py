"""Command-line pipeline: bath generation, sweeps, decay curves, fits, reports.

Every command honors --seed, --workers and --out, reads defaults from an
INI-style config file (flags override), and writes a manifest recording
the exact inputs plus checksums of the outputs.  Exit codes: 0 success,
2 usage error, 3 data or I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import datetime
import hashlib
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from .analysis import (fit_scaling, fit_stretched_exp, normalize_basis,
                       read_sample_csv)
from .bath_dynamics import DEFAULT_EXCLUSION_FRACTION, HYPERFINE_PARALLEL, \
    HYPERFINE_PERP, write_summary_csv
from .decoherence import DecayCurve, OuNoiseModel, PulseSequence, \
    single_nv_signal
from .dipolar import CONVENTIONS, DEFAULT_CONVENTION
from .ensemble import (EnsembleDecayParams, ensemble_echo, ensemble_fid,
                       fit_distributions, read_sweep_csv, sweep_concentration,
                       write_sweep_csv)
from .errors import (DataFormatError, DegenerateConfigurationError,
                     EnvelopeFailureError, FitFailureError,
                     IntegrationFailureError)
from .lattice import box_half_width_for_target, generate_bath
from .report import build_report, compute_stretch_exponents, render_markdown

CONCENTRATION_WARN_RANGE = (0.01, 1000.0)

# INI key -> (argparse attribute, parser)
_CONFIG_KEYS = {
    "concentrations": ("ppm", str),
    "n_realizations": ("n", int),
    "master_seed": ("seed", int),
    "target_spins": ("target_spins", int),
    "box_half_width_nm": ("half_width_nm", float),
    "exclusion_fraction": ("exclusion_fraction", float),
    "a_parallel_rad_s": ("a_parallel", float),
    "a_perp_rad_s": ("a_perp", float),
    "convention": ("convention", str),
    "mode": ("mode", str),
    "workers": ("workers", int),
    "out_dir": ("out", str),
}


def _apply_config(args: argparse.Namespace) -> None:
    path = getattr(args, "config", None)
    if not path:
        return
    if not os.path.exists(path):
        raise DataFormatError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    if "run" not in parser:
        raise DataFormatError(f"config file {path} has no [run] section")
    section = parser["run"]
    for key, (attr, cast) in _CONFIG_KEYS.items():
        if key in section and getattr(args, attr, None) is None:
            try:
                setattr(args, attr, cast(section[key]))
            except ValueError as exc:
                raise DataFormatError(
                    f"bad config value for {key}: {exc}") from exc


def _parse_ppm_list(text: str) -> list:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ValueError(f"bad concentration list {text!r}") from exc
    if not values:
        raise ValueError("empty concentration list")
    for value in values:
        if not CONCENTRATION_WARN_RANGE[0] <= value \
                <= CONCENTRATION_WARN_RANGE[1]:
            warnings.warn(f"concentration {value} ppm is outside the "
                          f"studied range {CONCENTRATION_WARN_RANGE}")
    return values


def _workers(args: argparse.Namespace) -> int:
    if getattr(args, "workers", None) is not None:
        return max(1, args.workers)
    env = os.environ.get("SPINBATH_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            warnings.warn(f"ignoring malformed SPINBATH_WORKERS={env!r}")
    return 1


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir: str, command: str, config: dict,
                    files: list) -> None:
    manifest = {
        "command": command,
        "config": config,
        "version": __version__,
        "created_utc": datetime.datetime.now(
            datetime.timezone.utc).isoformat(),
        "files": {os.path.basename(f): _sha256(f) for f in files},
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)


def _ensure_out(args: argparse.Namespace) -> str:
    out = args.out or "runs/out"
    os.makedirs(out, exist_ok=True)
    return out


def cmd_gen_bath(args: argparse.Namespace) -> int:
    _apply_config(args)
    out = _ensure_out(args)
    ppm = float(args.ppm)
    _parse_ppm_list(str(ppm))
    n = args.n if args.n is not None else 100
    seed = args.seed if args.seed is not None else 0
    mode = args.mode or "lattice"
    half_width = args.half_width_nm
    if half_width is None:
        half_width = box_half_width_for_target(
            ppm, args.target_spins if args.target_spins is not None else 500)
    children = np.random.SeedSequence(seed).spawn(n)
    files = []
    for index, child in enumerate(children):
        child_seed = int(child.generate_state(1, np.uint64)[0])
        config = generate_bath(ppm, half_width, child_seed, mode=mode)
        path = os.path.join(out, f"bath_{index:04d}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(config.to_json(indent=2))
            fh.write("\n")
        files.append(path)
    _write_manifest(out, "gen-bath",
                    {"ppm": ppm, "n": n, "seed": seed, "mode": mode,
                     "box_half_width_nm": half_width}, files)
    print(f"wrote {len(files)} bath configurations to {out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    _apply_config(args)
    out = _ensure_out(args)
    concentrations = _parse_ppm_list(args.ppm if args.ppm is not None
                                     else "1,10,100")
    n = args.n if args.n is not None else 1000
    seed = args.seed if args.seed is not None else 0
    workers = _workers(args)
    exclusion = args.exclusion_fraction \
        if args.exclusion_fraction is not None else DEFAULT_EXCLUSION_FRACTION
    convention = args.convention or DEFAULT_CONVENTION
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    results = sweep_concentration(
        concentrations, n, master_seed=seed,
        target_spins=args.target_spins if args.target_spins is not None
        else 500,
        box_half_width_nm=args.half_width_nm,
        exclusion_fraction=exclusion, mode=args.mode or "lattice",
        workers=workers,
        delta_method=args.delta_fit or "mle",
        tau_method=args.tau_fit or "median",
        a_parallel=args.a_parallel if args.a_parallel is not None
        else HYPERFINE_PARALLEL,
        a_perp=args.a_perp if args.a_perp is not None else HYPERFINE_PERP,
        convention=convention)
    files = []
    for result in results:
        path = os.path.join(
            out, f"realizations_{result.concentration_ppm:g}ppm.csv")
        write_summary_csv(path, result.summaries)
        files.append(path)
    csv_path = os.path.join(out, "sweep.csv")
    write_sweep_csv(csv_path, results)
    files.append(csv_path)
    config = {"concentrations_ppm": concentrations, "n_realizations": n,
              "seed": seed, "exclusion_fraction": exclusion,
              "target_spins": args.target_spins
              if args.target_spins is not None else 500,
              "box_half_width_nm": args.half_width_nm,
              "mode": args.mode or "lattice", "convention": convention,
              "delta_fit": args.delta_fit or "mle",
              "tau_fit": args.tau_fit or "median"}
    json_path = os.path.join(out, "sweep.json")
    _write_json(json_path, {"config": config, "version": __version__,
                            "rows": [r.manifest_row() for r in results]})
    files.append(json_path)
    _write_manifest(out, "sweep", config, files)
    for result in results:
        print(f"{result.concentration_ppm:g} ppm: "
              f"T2* = {result.t2_star_s:.4g} s, T2 = {result.t2_s:.4g} s "
              f"({result.statistics.n_infinite_tau} weakly connected)")
    return 0


def _decay_params(args: argparse.Namespace):
    if args.stats:
        if not os.path.exists(args.stats):
            raise DataFormatError(f"stats file not found: {args.stats}")
        with open(args.stats, encoding="utf-8") as fh:
            payload = json.load(fh)
        rows = payload.get("rows", [])
        if not rows:
            raise DataFormatError(f"no sweep rows in {args.stats}")
        if args.ppm is not None:
            target = float(args.ppm)
            row = min(rows, key=lambda r: abs(r["concentration_ppm"]
                                              - target))
        else:
            row = rows[len(rows) // 2]
        return (row["delta_ens_rad_s"], row["tau_c_ens_s"],
                row.get("lambda_s", row["tau_c_ens_s"]))
    if args.delta is None or args.tau_c is None:
        raise DataFormatError("either --stats or both --delta and --tau-c "
                              "are required")
    lam = args.lambda_shape if args.lambda_shape is not None else args.tau_c
    return float(args.delta), float(args.tau_c), float(lam)


def cmd_decay(args: argparse.Namespace) -> int:
    _apply_config(args)
    out = _ensure_out(args)
    delta, tau_c, lam = _decay_params(args)
    sequence = PulseSequence.from_name(args.sequence or "ramsey")
    n_points = args.points if args.points is not None else 60

    if args.single:
        model = OuNoiseModel(delta=delta, tau_c=tau_c)
        t_char = model.t2_star if sequence is PulseSequence.RAMSEY \
            else model.t2
        t_max = args.t_max if args.t_max is not None else 2.5 * t_char
        times = np.linspace(0.0, t_max, n_points)
        curve = single_nv_signal(sequence, times, model)
        stem = "decay_single_"
    else:
        params = EnsembleDecayParams(delta_ens=delta, tau_c_ens=tau_c,
                                     lambda_shape=lam, sequence=sequence)
        t_char = params.t2_star if sequence is PulseSequence.RAMSEY \
            else params.t2
        t_max = args.t_max if args.t_max is not None else 2.5 * t_char
        times = np.linspace(0.0, t_max, n_points)
        if sequence is PulseSequence.RAMSEY:
            curve = ensemble_fid(times, params)
        else:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                curve = ensemble_echo(times, params)
            for warning in caught:
                curve.metadata.setdefault("warnings", []).append(
                    str(warning.message))
        stem = "decay_"
    name = stem + ("fid" if sequence is PulseSequence.RAMSEY else "echo")
    path = os.path.join(out, name + ".csv")
    curve.to_csv(path)
    _write_manifest(out, "decay",
                    {"delta_rad_s": delta, "tau_c_s": tau_c, "lambda_s": lam,
                     "sequence": sequence.value, "single": bool(args.single),
                     "t_max_s": float(t_max), "points": n_points},
                    [path, path + ".json"])
    print(f"wrote {path}")
    return 0


def _looks_like_samples(path: str) -> bool:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
    return "concentration_ppm" in header


def _fit_samples(path: str, include_offset_echo: bool) -> dict:
    points = read_sample_csv(path)
    corrected = 0
    normalized = []
    for point in points:
        fixed = normalize_basis(point)
        corrected += fixed is not point
        normalized.append(fixed)
    report: dict = {"input": path, "n_points": len(points),
                    "basis_corrected": corrected}
    for measurement, include_offset in (("t2star", False),
                                        ("t2", include_offset_echo)):
        group = [p for p in normalized if p.measurement == measurement]
        if len(group) < 3:
            continue
        fit = fit_scaling(group, include_offset=include_offset)
        entry = {"rate_per_ppm_per_s": fit.rate_per_ppm,
                 "rate_err": fit.rate_err,
                 "inverse_rate_us_ppm": 1e6 / fit.rate_per_ppm,
                 "method": fit.method, "n_points": len(group)}
        if fit.t_other is not None:
            entry["t_other_s"] = fit.t_other
            entry["t_other_err_s"] = fit.t_other_err
        report[measurement] = entry
    if len(report) <= 3:
        raise DataFormatError(
            "no measurement group has the 3 distinct points a scaling fit "
            "needs")
    return report


def cmd_fit(args: argparse.Namespace) -> int:
    _apply_config(args)
    out = _ensure_out(args)
    path = args.input
    if not path or not os.path.exists(path):
        raise DataFormatError(f"input file not found: {path}")
    kind = args.kind or "auto"
    if kind == "auto":
        kind = "samples" if _looks_like_samples(path) else "curve"

    if kind == "samples":
        result = _fit_samples(path, include_offset_echo=not args.no_offset)
    else:
        curve = DecayCurve.from_csv(path)
        try:
            fit = fit_stretched_exp(curve)
        except ValueError as exc:
            raise DataFormatError(f"curve does not satisfy the fit "
                                  f"preconditions: {exc}") from exc
        result = {"input": path, "kind": "stretched_exponential",
                  "c0": fit.c0, "c0_err": fit.c0_err,
                  "t_char_s": fit.t_char, "t_char_err_s": fit.t_char_err,
                  "p": fit.p, "p_err": fit.p_err,
                  "residual_norm": fit.residual_norm,
                  "converged": fit.converged}
    report_path = os.path.join(out, "fit.json")
    _write_json(report_path, result)
    for key, value in sorted(result.items()):
        print(f"{key}: {value}")
    _write_manifest(out, "fit", {"input": os.path.abspath(path),
                                 "kind": kind,
                                 "no_offset": bool(args.no_offset)},
                    [report_path])
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = args.run
    if not run_dir or not os.path.isdir(run_dir):
        raise DataFormatError(f"run directory not found: {run_dir}")
    sweep_json = os.path.join(run_dir, "sweep.json")
    sweep_csv = os.path.join(run_dir, "sweep.csv")
    if os.path.exists(sweep_json):
        with open(sweep_json, encoding="utf-8") as fh:
            rows = json.load(fh)["rows"]
    elif os.path.exists(sweep_csv):
        rows = read_sweep_csv(sweep_csv)
    else:
        raise DataFormatError(
            f"missing inputs in {run_dir}: sweep.json or sweep.csv "
            "(run the sweep command first)")
    if not rows:
        raise DataFormatError(f"no sweep rows found in {run_dir}")

    log_c = np.log([row["concentration_ppm"] for row in rows])
    representative = rows[int(np.argmin(np.abs(log_c - np.median(log_c))))]
    exponents = compute_stretch_exponents(representative["delta_ens_rad_s"],
                                          representative["tau_c_ens_s"])
    report = build_report(rows, exponents)
    report["representative_ppm"] = representative["concentration_ppm"]

    out_format = args.format or "both"
    files = []
    if out_format in ("json", "both"):
        path = os.path.join(run_dir, "report.json")
        _write_json(path, report)
        files.append(path)
    if out_format in ("md", "both"):
        path = os.path.join(run_dir, "report.md")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render_markdown(report))
        files.append(path)

    if not args.no_figures:
        from . import plotting

        fits = {}
        if "scaling_fits" in report:
            c_grid = np.geomspace(min(r["concentration_ppm"] for r in rows),
                                  max(r["concentration_ppm"] for r in rows),
                                  32)
            for key, label in (("t2_star", "T2* fit"), ("t2", "T2 fit")):
                rate = report["scaling_fits"][key]["rate_per_ppm_per_s"]
                fits[key] = {"label": label, "x_ppm": c_grid.tolist(),
                             "y_s": (1.0 / (rate * c_grid)).tolist()}
        recipe = plotting.scaling_recipe(rows, fits)
        recipe_path = os.path.join(run_dir, "scaling_recipe.json")
        plotting.write_recipe(recipe_path, recipe)
        fig_path = os.path.join(run_dir, "scaling.png")
        plotting.render_scaling_figure(recipe, fig_path)
        files += [recipe_path, fig_path]

        summaries_csv = os.path.join(
            run_dir,
            f"realizations_{representative['concentration_ppm']:g}ppm.csv")
        if os.path.exists(summaries_csv):
            from .bath_dynamics import read_summary_csv

            summaries = read_summary_csv(summaries_csv)
            if len(summaries) >= 100:
                stats = fit_distributions(summaries, tau_method="median")
                dist_recipe = plotting.distribution_recipe(stats)
                dist_recipe_path = os.path.join(run_dir,
                                                "distributions_recipe.json")
                plotting.write_recipe(dist_recipe_path, dist_recipe)
                dist_fig = os.path.join(run_dir, "distributions.png")
                plotting.render_distribution_figure(dist_recipe, dist_fig)
                files += [dist_recipe_path, dist_fig]

    _write_manifest(run_dir, "report",
                    {"run": os.path.abspath(run_dir), "format": out_format},
                    files)
    print(f"report written to {run_dir} "
          f"(overall: {'pass' if report['overall_pass'] else 'FAIL'})")
    return 0


def cmd_exclusion_scan(args: argparse.Namespace) -> int:
    _apply_config(args)
    out = _ensure_out(args)
    ppm = float(args.ppm if args.ppm is not None else 100.0)
    n = args.n if args.n is not None else 200
    seed = args.seed if args.seed is not None else 0
    workers = _workers(args)
    fractions = [float(tok) for tok in
                 (args.fractions or "0,0.01,0.1,0.3,1,2").split(",")]
    rows = []
    for fraction in fractions:
        result = sweep_concentration(
            [ppm], n, master_seed=seed, workers=workers,
            exclusion_fraction=fraction,
            target_spins=args.target_spins
            if args.target_spins is not None else 500)[0]
        rows.append({"exclusion_fraction": fraction,
                     "delta_ens_rad_s": result.statistics.delta_ens,
                     "tau_c_ens_s": result.statistics.tau_c_ens,
                     "lambda_s": result.statistics.lambda_shape,
                     "t2_star_s": result.t2_star_s, "t2_s": result.t2_s,
                     "n_infinite_tau": result.statistics.n_infinite_tau})
        print(f"fraction {fraction:g}: T2 = {result.t2_s:.4g} s, "
              f"tau_c = {result.statistics.tau_c_ens:.4g} s")
    import csv

    path = os.path.join(out, "exclusion_scan.csv")
    fieldnames = list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    _write_manifest(out, "exclusion-scan",
                    {"ppm": ppm, "n": n, "seed": seed,
                     "fractions": fractions}, [path])
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--workers", type=int,
                        help="worker processes (default: SPINBATH_WORKERS "
                             "or 1)")
    parser.add_argument("--config", help="INI config file with a [run] "
                                         "section; flags override")


def _add_box_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--target-spins", type=int,
                        help="size the box for this expected spin count "
                             "(default 500)")
    parser.add_argument("--half-width-nm", type=float,
                        help="fixed box half-width in nm (overrides "
                             "--target-spins)")
    parser.add_argument("--mode", choices=("lattice", "continuum"),
                        help="spin placement mode (default lattice)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinbath",
        description="Dipolar spin-bath decoherence pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-bath", help="generate bath configurations")
    p.add_argument("--ppm", type=float, required=True)
    p.add_argument("--n", type=int, help="number of realizations")
    _add_box_flags(p)
    _add_common(p)
    p.set_defaults(handler=cmd_gen_bath)

    p = sub.add_parser("sweep", help="run the concentration sweep")
    p.add_argument("--ppm", help="comma-separated concentrations in ppm")
    p.add_argument("--n", type=int, help="realizations per concentration")
    p.add_argument("--exclusion-fraction", type=float)
    p.add_argument("--convention", choices=CONVENTIONS)
    p.add_argument("--a-parallel", type=float,
                   help="axial hyperfine constant in rad/s")
    p.add_argument("--a-perp", type=float,
                   help="transverse hyperfine constant in rad/s")
    p.add_argument("--delta-fit", choices=("mle", "median"))
    p.add_argument("--tau-fit", choices=("median", "histogram", "mle"))
    _add_box_flags(p)
    _add_common(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("decay", help="evaluate decay curves")
    p.add_argument("--stats", help="sweep.json to take parameters from")
    p.add_argument("--ppm", type=float,
                   help="concentration row to use from --stats")
    p.add_argument("--delta", type=float, help="coupling scale in rad/s")
    p.add_argument("--tau-c", type=float, help="correlation time in s")
    p.add_argument("--lambda", dest="lambda_shape", type=float,
                   help="shape parameter in s (default: tau_c)")
    p.add_argument("--sequence", choices=("fid", "ramsey", "echo"))
    p.add_argument("--single", action="store_true",
                   help="single-realization curve instead of the ensemble "
                        "average")
    p.add_argument("--t-max", type=float, help="grid end in seconds")
    p.add_argument("--points", type=int, help="grid size")
    _add_common(p)
    p.set_defaults(handler=cmd_decay)

    p = sub.add_parser("fit", help="fit curves or sample tables")
    p.add_argument("--input", required=True, help="curve CSV or sample CSV")
    p.add_argument("--kind", choices=("auto", "curve", "samples"))
    p.add_argument("--no-offset", action="store_true",
                   help="force through-origin scaling fits")
    _add_common(p)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("report", help="consolidated report for a run dir")
    p.add_argument("--run", required=True, help="directory with sweep "
                                                "outputs")
    p.add_argument("--format", choices=("json", "md", "both"))
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure recipes and rendered images")
    _add_common(p)
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("exclusion-scan",
                       help="sensitivity of the sweep to the pair-exclusion "
                            "threshold")
    p.add_argument("--ppm", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--fractions", help="comma-separated threshold list")
    _add_box_flags(p)
    _add_common(p)
    p.set_defaults(handler=cmd_exclusion_scan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except (FitFailureError, IntegrationFailureError, EnvelopeFailureError,
            DegenerateConfigurationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
