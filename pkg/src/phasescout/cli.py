"""Command-line entry point.

Subcommands::

    sweep        fill the ground-state cache for the configured grid
    train        train a detector on the origin block, save a checkpoint
    scan         score the grid with a saved checkpoint (one labeling pass)
    discover     full iterative phase discovery
    observables  order parameters and entropies of every cached cell
    fidelity     ground-state overlap matrix along a parameter cut
    report       rebuild the text report from labels.csv and the cache

Exit codes: 0 success; 1 any other package error; 2 sweep finished but
some cells did not converge; 3 the cache lacks cells the command needs
(they are listed on stderr); 64 bad usage, unreadable or invalid
configuration. Progress goes to stdout, diagnostics to stderr. The
``PHASESCOUT_CACHE`` environment variable overrides ``cache_dir``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .ae import load_model, save_model
from .config import RunConfig, parse_config
from .errors import (
    ConfigError,
    IncompleteCacheError,
    PhasescoutError,
    RecordError,
)
from .pipeline.discover import (
    UNASSIGNED,
    anomaly_threshold,
    discover_phases,
    evaluate_loss_map,
    load_cache,
    origin_block,
    supersolid_probe,
    train_region,
)
from .pipeline.inputs import INPUT_KINDS
from .pipeline.reports import (
    build_label_report,
    build_report,
    write_fidelity_csv,
    write_labels_csv,
    write_loss_map_csv,
    write_observables_csv,
    write_pgm,
)
from .pipeline.sweep import sweep_groundstates
from .scans import fidelity_cut

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FLAGGED = 2
EXIT_INCOMPLETE = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to the command-line exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _say(msg: str) -> None:
    print(msg, flush=True)


def _effective_config(args) -> RunConfig:
    cfg = parse_config(args.config)
    env_cache = os.environ.get("PHASESCOUT_CACHE")
    if env_cache:
        cfg = replace(cfg, cache_dir=env_cache)
    if getattr(args, "input_kind", None):
        cfg = replace(cfg, input_kind=args.input_kind)
    if getattr(args, "seed", None) is not None:
        cfg = replace(
            cfg,
            seed=args.seed,
            grid=replace(cfg.grid, dmrg=replace(cfg.grid.dmrg, seed=args.seed)),
            train=replace(cfg.train, seed=args.seed),
        )
    return cfg


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _checkpoint_path(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir) / f"model_{cfg.input_kind}.bin"


def cmd_sweep(args) -> int:
    cfg = _effective_config(args)
    entries = sweep_groundstates(cfg.grid, cfg.cache_dir, jobs=args.jobs, log=_say)
    flagged = [e for e in entries if not e.converged]
    if flagged:
        for e in flagged:
            print(f"not converged: cell ({e.iu},{e.iv}) U={e.U:g} V={e.V:g}", file=sys.stderr)
        return EXIT_FLAGGED
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _effective_config(args)
    cache = load_cache(cfg.cache_dir, cfg.grid)
    region = origin_block(cfg.grid)
    model, result = train_region(
        cache, region, cfg.input_kind, cfg.grid.dmrg.chi_max, cfg.train
    )
    path = _outdir(cfg) / _checkpoint_path(cfg).name
    save_model(path, model)
    _say(
        f"trained on {len(region)} cells ({cfg.input_kind}), "
        f"best loss {result.best_loss:.6e} at epoch {result.best_epoch}, wrote {path}"
    )
    return EXIT_OK


def _first_pass_labels(grid, loss_map, region):
    """Labels after a single pass, the same rule discover applies first."""
    threshold = anomaly_threshold(loss_map.train_losses)
    labels = np.full((grid.nu, grid.nv), UNASSIGNED, dtype=np.int64)
    in_region = set(region)
    for iu in range(grid.nu):
        for iv in range(grid.nv):
            if loss_map.losses[iu, iv] <= threshold or (iu, iv) in in_region:
                labels[iu, iv] = 0
    return labels, threshold


def cmd_scan(args) -> int:
    cfg = _effective_config(args)
    cache = load_cache(cfg.cache_dir, cfg.grid)
    path = _checkpoint_path(cfg)
    if not path.exists():
        raise RecordError(f"no checkpoint at {path}; run the train subcommand first")
    model = load_model(path)
    region = origin_block(cfg.grid)
    lm = evaluate_loss_map(model, cache, cfg.input_kind, cfg.grid, train_cells=region)
    labels, threshold = _first_pass_labels(cfg.grid, lm, region)
    out = _outdir(cfg)
    write_loss_map_csv(out / "lossmap_1.csv", cfg.grid, lm, labels, labels)
    write_pgm(out / "lossmap_1.pgm", lm.losses)
    anomalous = int(np.sum(labels == UNASSIGNED))
    _say(
        f"scored {cfg.grid.nu * cfg.grid.nv} cells, threshold {threshold:.6e}, "
        f"{anomalous} anomalous"
    )
    return EXIT_OK


def cmd_discover(args) -> int:
    cfg = _effective_config(args)
    cache = load_cache(cfg.cache_dir, cfg.grid)
    result = discover_phases(
        cache,
        cfg.grid,
        cfg.input_kind,
        cfg.train,
        max_iterations=args.max_iter,
        log=_say,
    )
    out = _outdir(cfg)
    for k, lm in enumerate(result.loss_maps, start=1):
        # labels as they stood after iteration k-1 assigned its cells
        upto = (result.iteration_of >= 0) & (result.iteration_of <= k - 1)
        labels_k = np.where(upto, result.labels, UNASSIGNED)
        iters_k = np.where(upto, result.iteration_of, UNASSIGNED)
        write_loss_map_csv(out / f"lossmap_{k}.csv", cfg.grid, lm, labels_k, iters_k)
        write_pgm(out / f"lossmap_{k}.pgm", lm.losses)
    write_labels_csv(out / "labels.csv", cfg.grid, result.labels, result.iteration_of)
    probe = supersolid_probe(cache, cfg.grid.cells()) if args.probe_ss else None
    (out / "report.txt").write_text(build_report(cfg.grid, result, cache, probe))
    _say(
        f"{len(result.loss_maps)} iterations, "
        f"{int(np.sum(result.labels == UNASSIGNED))} cells left unassigned, "
        f"wrote {out / 'labels.csv'}"
    )
    return EXIT_OK


def cmd_observables(args) -> int:
    cfg = _effective_config(args)
    cache = load_cache(cfg.cache_dir, cfg.grid)
    out = _outdir(cfg)
    write_observables_csv(out / "observables.csv", cfg.grid, cache)
    _say(f"wrote {out / 'observables.csv'} ({cfg.grid.nu * cfg.grid.nv} rows)")
    return EXIT_OK


def cmd_fidelity(args) -> int:
    cfg = _effective_config(args)
    if args.points < 2:
        raise ConfigError("--points must be at least 2")
    grid = cfg.grid
    if args.axis == "U":
        values = np.linspace(grid.u_min, grid.u_max, args.points)
        params = replace(grid.model, V=args.fixed)
    else:
        values = np.linspace(grid.v_min, grid.v_max, args.points)
        params = replace(grid.model, U=args.fixed)
    scan = fidelity_cut(params, args.axis, values, config=grid.dmrg)
    out = _outdir(cfg)
    write_fidelity_csv(out / "fidelity.csv", scan.fidelity)
    adjacent = scan.adjacent()
    _say(
        f"{args.points}-point {args.axis} cut at fixed {args.fixed:g}: "
        f"min adjacent fidelity {float(np.min(adjacent)):.6f}, "
        f"wrote {out / 'fidelity.csv'}"
    )
    if not scan.all_converged:
        print("warning: some cut points did not converge", file=sys.stderr)
    return EXIT_OK


def _read_labels_csv(path: Path, grid) -> tuple[np.ndarray, np.ndarray]:
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "U,V,label,iteration":
        raise ConfigError(f"{path} is not a labels file")
    labels = np.full((grid.nu, grid.nv), UNASSIGNED, dtype=np.int64)
    iters = np.full((grid.nu, grid.nv), UNASSIGNED, dtype=np.int64)
    rows = lines[1:]
    if len(rows) != grid.nu * grid.nv:
        raise ConfigError(f"{path} has {len(rows)} rows, grid needs {grid.nu * grid.nv}")
    for k, row in enumerate(rows):
        _, _, label, it = row.split(",")
        labels[k // grid.nv, k % grid.nv] = int(label)
        iters[k // grid.nv, k % grid.nv] = int(it)
    return labels, iters


def cmd_report(args) -> int:
    cfg = _effective_config(args)
    cache = load_cache(cfg.cache_dir, cfg.grid)
    out = _outdir(cfg)
    labels_path = out / "labels.csv"
    if not labels_path.exists():
        raise ConfigError(f"no {labels_path}; run the discover subcommand first")
    labels, _ = _read_labels_csv(labels_path, cfg.grid)
    probe = supersolid_probe(cache, cfg.grid.cells()) if args.probe_ss else None
    text = build_label_report(cfg.grid, labels, cache, probe)
    (out / "report.txt").write_text(text)
    _say(f"wrote {out / 'report.txt'}")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="phasescout", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", required=True, help="run configuration file")
    common.add_argument("--jobs", type=int, default=1, help="worker process cap")
    common.add_argument("--seed", type=int, default=None, help="override every seed")
    common.add_argument(
        "--input-kind",
        dest="input_kind",
        choices=INPUT_KINDS,
        default=None,
        help="detector input: entanglement spectrum, site tensor, or correlations",
    )
    sub = parser.add_subparsers(dest="command")

    sub.add_parser("sweep", parents=[common]).set_defaults(func=cmd_sweep)
    sub.add_parser("train", parents=[common]).set_defaults(func=cmd_train)
    sub.add_parser("scan", parents=[common]).set_defaults(func=cmd_scan)

    p = sub.add_parser("discover", parents=[common])
    p.add_argument("--max-iter", type=int, default=10, dest="max_iter")
    p.add_argument("--probe-ss", action="store_true", dest="probe_ss")
    p.set_defaults(func=cmd_discover)

    sub.add_parser("observables", parents=[common]).set_defaults(func=cmd_observables)

    p = sub.add_parser("fidelity", parents=[common])
    p.add_argument("--axis", required=True, type=lambda s: s.upper(), choices=("U", "V"))
    p.add_argument("--fixed", required=True, type=float, help="value of the other axis")
    p.add_argument("--points", type=int, default=25)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("report", parents=[common])
    p.add_argument("--probe-ss", action="store_true", dest="probe_ss")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IncompleteCacheError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except PhasescoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
