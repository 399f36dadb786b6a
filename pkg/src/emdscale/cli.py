"""Command-line front end: ``emdscale decompose | scaling | baseline | simulate | rank``.

Every command writes its results plus a ``manifest.json`` (parameters, seed,
library versions, warnings) into ``--output-dir``. Outputs contain no clock
times, so identical inputs, flags and seed give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .emd import Decomposition, SiftConfig, decompose, trend
from .exceptions import (
    EmdScaleError,
    EnsembleFailureError,
    IngestionError,
    InsufficientComponentsError,
    NotSiftableError,
    SingularFitError,
    UndefinedPeriodError,
)
from .io import TABLE_FORMATS, IngestionConfig, ingest, write_json, write_matrix, write_table
from .scaling import (
    RankingRow,
    baseline_compare,
    fit_variance_scaling,
    monte_carlo_h,
    rank,
    rank_positions,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4

UNIT_SECONDS = (("minutes", 60.0), ("hours", 3600.0), ("days", 86400.0))

log = logging.getLogger("emdscale")


class _Collector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages: List[str] = []

    def emit(self, record):
        self.messages.append(record.getMessage())


# argument parsing ---------------------------------------------------------------


def _column(text: str):
    return int(text) if text.lstrip("-").isdigit() else text


def _add_common(p: argparse.ArgumentParser, ensemble: bool):
    g = p.add_argument_group("run")
    g.add_argument("-o", "--output-dir", default=".", help="directory for output files (created if missing)")
    g.add_argument("--output-format", choices=TABLE_FORMATS, default="delimited")
    g.add_argument("--config", help="JSON file whose keys mirror the long flag names")
    g.add_argument("--workers", type=int, default=1, help="processes for replicate ensembles")
    g.add_argument("-v", "--verbose", action="store_true")
    if ensemble:
        g.add_argument("--seed", type=int, default=None, help="ensemble seed (required)")
    s = p.add_argument_group("sifting")
    d = SiftConfig()
    s.add_argument("--sd-threshold", type=float, default=d.sd_threshold)
    s.add_argument("--max-sift-iterations", type=int, default=d.max_sift_iterations)
    s.add_argument("--max-imfs", type=int, default=d.max_imfs)
    s.add_argument("--envelope-boundary", type=int, default=d.envelope_boundary)
    s.add_argument("--io-normalization", choices=("energy", "pointwise"), default="energy")


def _add_input(p: argparse.ArgumentParser, many: bool):
    if many:
        p.add_argument("inputs", nargs="+", help="delimited price files")
        p.add_argument("--labels", nargs="+", help="series labels (default: file stems)")
    else:
        p.add_argument("input", help="delimited price file")
    g = p.add_argument_group("ingestion")
    g.add_argument("--price-column", type=_column, default=None, help="name or 0-based index (default: last)")
    g.add_argument("--timestamp-column", type=_column, default=None, help="name or 0-based index")
    g.add_argument("--delimiter", default=",")
    g.add_argument("--no-log", dest="apply_log", action="store_false", help="analyse prices, not log-prices")
    g.add_argument("--drop-nonpositive", action="store_true", help="drop rows with price <= 0 instead of failing")
    g.add_argument("--header", choices=("auto", "yes", "no"), default="auto")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emdscale", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"emdscale {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="EMD of one series: IMF matrix, per-IMF periods, IO")
    _add_input(p, many=False)
    _add_common(p, ensemble=False)
    p.add_argument("--binary", action="store_true", help="write the component matrix as float64 .npy")
    p.add_argument("--trend-imfs", type=int, default=1, help="slow IMFs added to the residue for the trend")

    p = sub.add_parser("scaling", help="log-variance vs log-period fit and H*")
    _add_input(p, many=False)
    _add_common(p, ensemble=False)

    p = sub.add_parser("baseline", help="score a series against rescaled Brownian-motion replicates")
    _add_input(p, many=False)
    _add_common(p, ensemble=True)
    p.add_argument("--baseline-reps", type=int, default=100)

    p = sub.add_parser("simulate", help="Monte-Carlo H* recovery on fractional Brownian motion")
    _add_common(p, ensemble=True)
    p.add_argument("--hurst", type=float, nargs="+", required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--generalized", action="store_true", help="also report the generalized Hurst estimate")
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--max-lag", type=int, default=19)
    p.add_argument("--paths", action="store_true", help="also write the first simulated path for each H")

    p = sub.add_parser("rank", help="full pipeline over several series, ranked by <R2_Bm> and R2")
    _add_input(p, many=True)
    _add_common(p, ensemble=True)
    p.add_argument("--baseline-reps", type=int, default=100)
    parser.subcommands = sub.choices
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestionError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise IngestionError("config file must hold a JSON object")
    known = vars(args)
    defaults = {}
    for key, value in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest == "no_log":
            dest, value = "apply_log", not value
        if dest not in known or dest in ("command", "config"):
            raise IngestionError(f"unknown config key {key!r} for command {args.command}")
        defaults[dest] = value
    # explicit flags win over the config file: re-parse with the file as defaults
    parser.subcommands[args.command].set_defaults(**defaults)
    return parser.parse_args(argv)


def _sift_config(args) -> SiftConfig:
    return SiftConfig(args.sd_threshold, args.max_sift_iterations, args.max_imfs, args.envelope_boundary)


def _ingestion(args, path) -> IngestionConfig:
    header = {"auto": None, "yes": True, "no": False}[args.header]
    return IngestionConfig(path, args.price_column, args.timestamp_column, args.delimiter,
                           args.apply_log, args.drop_nonpositive, header)


def _parameters(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose", "config", "output_dir")}


def _require_seed(args):
    if args.seed is None:
        raise IngestionError(f"--seed is required for '{args.command}'")
    if args.seed < 0:
        raise IngestionError("--seed must be non-negative")


# table builders -------------------------------------------------------------------


def period_rows(d: Decomposition, interval: Optional[float]) -> tuple[list[str], list[list]]:
    header = ["imf", "zero_crossings", "extrema", "period_samples"]
    header += [f"period_{u}" for u, _ in UNIT_SECONDS] + ["variance", "sift_iterations"]
    rows = []
    for imf in d.imfs:
        p = imf.period_samples if imf.has_period else float("nan")
        wall = [p * interval / sec if interval else float("nan") for _, sec in UNIT_SECONDS]
        rows.append([imf.index_k, imf.zero_crossings, imf.extrema_count, p] + wall
                    + [imf.variance, imf.sift_iterations])
    return header, rows


def _points_rows(fit) -> list[list]:
    return [[lp, lv] for lp, lv in fit.points]


# commands -------------------------------------------------------------------------


def cmd_decompose(args, out: Path, manifest: dict) -> int:
    signal, report = ingest(_ingestion(args, args.input))
    d = decompose(signal, _sift_config(args), args.io_normalization)
    files = [write_matrix(out / "components", d.labels(), d.components(), args.binary)]
    header, rows = period_rows(d, signal.sample_interval_seconds)
    files.append(write_table(out / "imf_summary", header, rows, args.output_format))
    m = min(args.trend_imfs, d.n_imfs)
    tr = trend(d, m).values
    files.append(write_table(out / "trend", ["t", "x", "trend"],
                             [[i, a, b] for i, (a, b) in enumerate(zip(signal.values, tr))], "delimited"))
    manifest["results"] = {"n_imfs": d.n_imfs, "io": d.io, "length": d.length,
                           "sample_interval_seconds": signal.sample_interval_seconds,
                           "trend_imfs": m, "ingestion": vars(report)}
    manifest["outputs"] = [f.name for f in files]
    return EXIT_OK


def cmd_scaling(args, out: Path, manifest: dict) -> int:
    signal, report = ingest(_ingestion(args, args.input))
    d = decompose(signal, _sift_config(args), args.io_normalization)
    fit = fit_variance_scaling(d)
    files = [
        write_table(out / "scaling_points", ["log_period", "log_variance"], _points_rows(fit), "delimited"),
        write_table(out / "scaling_fit", ["n_imfs_used", "h_star", "slope", "log_intercept", "r_squared"],
                    [[fit.n_imfs_used, fit.h_star, fit.slope, fit.log_intercept, fit.r_squared]],
                    args.output_format),
    ]
    manifest["results"] = {"h_star": fit.h_star, "r_squared": fit.r_squared, "log_intercept": fit.log_intercept,
                           "n_imfs": d.n_imfs, "n_imfs_used": fit.n_imfs_used, "io": d.io,
                           "ingestion": vars(report)}
    manifest["outputs"] = [f.name for f in files]
    return EXIT_OK


def _baseline_files(out: Path, fit, ens, fmt: str) -> list[Path]:
    reps = [[r.replicate_index, r.seed, r.n_imfs, r.c_i, r.c0_i, float(np.log(r.c_i * r.c0_i)), r.r2_bm_i]
            for r in ens.replicates]
    return [
        write_table(out / "baseline_replicates",
                    ["replicate", "seed", "n_imfs", "c_i", "c0_i", "log_line_intercept", "r2_bm"], reps, "delimited"),
        write_table(out / "scaling_points", ["log_period", "log_variance"], _points_rows(fit), "delimited"),
        write_table(out / "baseline_summary", ["n_replicates", "n_failed", "mean_r2_bm", "p05", "p95"],
                    [[len(ens.replicates), len(ens.failures), ens.mean_r2_bm, ens.p05, ens.p95]], fmt),
    ]


def cmd_baseline(args, out: Path, manifest: dict) -> int:
    _require_seed(args)
    signal, report = ingest(_ingestion(args, args.input))
    d = decompose(signal, _sift_config(args), args.io_normalization)
    fit = fit_variance_scaling(d)
    ens = baseline_compare(d, args.baseline_reps, args.seed, _sift_config(args), args.workers)
    files = _baseline_files(out, fit, ens, args.output_format)
    manifest["results"] = {"mean_r2_bm": ens.mean_r2_bm, "p05": ens.p05, "p95": ens.p95,
                           "failed_replicates": ens.failures, "h_star": fit.h_star,
                           "r_squared": fit.r_squared, "ingestion": vars(report)}
    manifest["outputs"] = [f.name for f in files]
    return EXIT_PARTIAL if ens.failures else EXIT_OK


def cmd_simulate(args, out: Path, manifest: dict) -> int:
    _require_seed(args)
    from .synth import FbmSpec, derive_seed, generate_fbm

    header = ["hurst", "length", "reps", "mean_h_star", "rmse_h_star"]
    if args.generalized:
        header += ["mean_h_g", "rmse_h_g"]
    rows, per_rep, failed, files = [], [], {}, []
    for j, h in enumerate(args.hurst):
        seed = derive_seed(args.seed, j)
        s = monte_carlo_h(h, args.length, args.reps, seed, _sift_config(args),
                          args.generalized, args.q, args.max_lag, args.workers)
        row = [h, args.length, args.reps, s.mean_h_star, s.rmse]
        if args.generalized:
            row += [s.mean_h_generalized, s.rmse_generalized]
        rows.append(row)
        if s.failures:
            failed[str(h)] = s.failures
        ok = [i for i in range(args.reps) if i not in s.failures]
        for k, i in enumerate(ok):
            per_rep.append([h, i, s.n_imfs[i], s.h_stars[k]] + ([s.h_generalized[k]] if args.generalized else []))
        if args.paths:
            path = generate_fbm(FbmSpec(h, args.length, derive_seed(seed, 0))).values
            files.append(write_table(out / ("path_h%s" % f"{h:g}".replace(".", "p")), ["t", "x"], [[i, v] for i, v in enumerate(path)],
                                     "delimited"))
    files.insert(0, write_table(out / "simulation", header, rows, args.output_format))
    files.insert(1, write_table(out / "simulation_replicates",
                                ["hurst", "replicate", "n_imfs", "h_star"] + (["h_g"] if args.generalized else []),
                                per_rep, "delimited"))
    manifest["results"] = {"table": [dict(zip(header, r)) for r in rows], "failed_replicates": failed}
    manifest["outputs"] = [f.name for f in files]
    return EXIT_PARTIAL if failed else EXIT_OK


def _rank_one(task):
    label, icfg, cfg, io_norm, reps, seed = task
    try:
        signal, _ = ingest(icfg)
        d = decompose(signal, cfg, io_norm)
        fit = fit_variance_scaling(d)
        ens = baseline_compare(d, reps, seed, cfg)
    except EmdScaleError as exc:
        return label, None, f"{type(exc).__name__}: {exc}"
    row = RankingRow(label, d.n_imfs, d.io, fit.r_squared, fit.h_star, ens.mean_r2_bm, ens.p05, ens.p95)
    return label, row, (f"{len(ens.failures)} failed replicates" if ens.failures else None)


def cmd_rank(args, out: Path, manifest: dict) -> int:
    _require_seed(args)
    labels = args.labels or [Path(p).stem for p in args.inputs]
    if len(labels) != len(args.inputs):
        raise IngestionError("--labels must match the number of inputs")
    if len(set(labels)) != len(labels):
        raise IngestionError("series labels must be unique")
    cfg = _sift_config(args)
    # every series uses the same baseline seed, matching a single-series 'baseline' run
    tasks = [(lab, _ingestion(args, p), cfg, args.io_normalization, args.baseline_reps, args.seed)
             for lab, p in zip(labels, args.inputs)]
    if args.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_rank_one, tasks))
    else:
        results = [_rank_one(t) for t in tasks]

    rows = [row for _, row, _ in results if row is not None]
    problems = {lab: msg for lab, _, msg in results if msg}
    for lab, msg in problems.items():
        log.warning("%s: %s", lab, msg)
    if not rows:
        if all(msg.startswith("IngestionError") for msg in problems.values()):
            raise IngestionError("no input series could be read")
        raise EnsembleFailureError("no series could be ranked", [])
    by_r2bm = rank_positions(rows, "mean_r2_bm")
    by_r2 = rank_positions(rows, "r_squared")
    ordered = rank(rows, "mean_r2_bm")
    pos = {id(r): i for i, r in enumerate(rows)}
    header = ["label", "n_imfs", "io", "r_squared", "h_star", "mean_r2_bm", "p05", "p95",
              "rank_mean_r2_bm", "rank_r_squared"]
    table = [[r.label, r.n_imfs, r.io, r.r_squared, r.h_star, r.mean_r2_bm, r.p05, r.p95,
              by_r2bm[pos[id(r)]], by_r2[pos[id(r)]]] for r in ordered]
    files = [write_table(out / "ranking", header, table, args.output_format)]
    manifest["results"] = {"ranked": [r[0] for r in table], "problems": problems}
    manifest["outputs"] = [f.name for f in files]
    return EXIT_PARTIAL if problems else EXIT_OK


COMMANDS = {"decompose": cmd_decompose, "scaling": cmd_scaling, "baseline": cmd_baseline,
            "simulate": cmd_simulate, "rank": cmd_rank}


def _versions() -> dict:
    return {"emdscale": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    collector = _Collector()
    log.addHandler(collector)
    try:
        try:
            args = _apply_config(parser, argv)
        except SystemExit as exc:
            return EXIT_INPUT if exc.code else EXIT_OK
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest = {"command": args.command, "parameters": _parameters(args),
                    "seed": getattr(args, "seed", None), "versions": _versions(), "log_base": "natural"}
        code = COMMANDS[args.command](args, out, manifest)
        manifest["warnings"] = collector.messages
        manifest["exit_code"] = code
        write_json(out / "manifest.json", manifest)
        return code
    except (IngestionError, UndefinedPeriodError) as exc:
        print(f"emdscale: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SingularFitError, InsufficientComponentsError, NotSiftableError, EnsembleFailureError) as exc:
        print(f"emdscale: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (EmdScaleError, ValueError, OSError) as exc:
        print(f"emdscale: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        log.removeHandler(collector)


if __name__ == "__main__":
    sys.exit(main())
