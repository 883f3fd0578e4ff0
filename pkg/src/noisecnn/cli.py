"""Command line entry point.

    noisecnn synth          write a synthetic dataset and its manifest
    noisecnn preview-noise  CSV (and PNG) of one record under each noise setting
    noisecnn train          run a single grid cell
    noisecnn grid           run the full sweep and write the report
    noisecnn report         re-render report files from a run.json

Exit codes: 0 success, 1 a cell failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from noisecnn import augment, data, noise
from noisecnn.experiment.config import CLASSIFIERS, ConfigError, GridConfig, load_config
from noisecnn.experiment.report import read_run, write_report
from noisecnn.experiment.runner import Cell, CellError, grid_cells, load_records, run_cell, run_grid

log = logging.getLogger("noisecnn")

EXIT_OK, EXIT_CELL_FAILED, EXIT_CONFIG = 0, 1, 2


def _config(args) -> GridConfig:
    config = load_config(args.config) if args.config else GridConfig()
    changes = {}
    if args.seed is not None:
        changes["global_seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = str(args.out)
    if getattr(args, "manifest", None):
        changes["dataset"] = {"manifest": str(args.manifest)}
    return dataclasses.replace(config, **changes) if changes else config


def cmd_synth(args) -> int:
    records = data.synth_dataset(args.classes, args.records_per_class, args.length,
                                 args.seed if args.seed is not None else 1)
    manifest = data.write_dataset(records, args.out or "synth_data")
    print(f"wrote {len(records)} records to {manifest}")
    return EXIT_OK


def _parse_specs(texts) -> list[noise.NoiseSpec]:
    specs = []
    for text in texts:
        kind, _, value = text.partition(":")
        try:
            specs.append(noise.NoiseSpec(kind.upper(), float(value or 0)))
        except ValueError as exc:
            raise ConfigError(f"bad noise spec {text!r}: {exc}") from None
    return specs


def cmd_preview(args) -> int:
    config = _config(args)
    records = load_records(config)
    record = records[0]
    if args.record:
        matches = [r for r in records if r.id == args.record]
        if not matches:
            raise ConfigError(f"no record with id {args.record!r}")
        record = matches[0]
    if args.noise:
        specs = _parse_specs(args.noise)
    else:
        specs = [noise.NoiseSpec(kind, s) for kind in (noise.LINEAR, noise.AWGN)
                 for s in config.noise.get(kind, []) if s != 0]
    out = args.out or Path("preview")
    csv_path = noise.preview(record, specs, out / "preview.csv", x_scale=config.linear_noise_x_scale)
    print(f"wrote {csv_path}")
    if not args.no_figures:
        from noisecnn import plotting

        print(f"wrote {plotting.plot_preview(record, specs, out / 'preview.png', config.linear_noise_x_scale)}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _config(args)
    cell = Cell(args.classifier.upper(), args.augmentation.upper(), args.noise_kind.upper(), args.strength)
    if cell.classifier not in CLASSIFIERS:
        raise ConfigError(f"unknown classifier {cell.classifier!r}")
    if cell.augmentation not in augment.AUGMENT_KINDS:
        raise ConfigError(f"unknown augmentation {cell.augmentation!r}")
    noise.NoiseSpec(cell.noise_kind, cell.strength)
    try:
        result = run_cell(config, cell)
    except CellError as exc:
        log.error("%s", exc)
        return EXIT_CELL_FAILED
    doc = result.to_dict()
    if not args.history:
        doc.pop("history")
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_grid(args) -> int:
    config = _config(args)
    total = len(grid_cells(config))

    def progress(res):
        status = f"F1={res.macro_f1:.2f}" if res.ok else f"FAILED: {res.error}"
        log.info("%s/%s %s %g: %s (%d epochs, %.1fs)", res.classifier, res.augmentation, res.noise_kind,
                 res.strength, status, res.epochs_run, res.wall_seconds)

    log.info("running %d cells with %d job(s) into %s", total, args.jobs, config.output_dir)
    results = run_grid(config, jobs=args.jobs, progress=progress)
    paths = write_report(results, config, figures=not args.no_figures)
    for p in paths.values():
        print(f"wrote {p}")
    return EXIT_CELL_FAILED if any(not r.ok for r in results) else EXIT_OK


def cmd_report(args) -> int:
    config, results, labels = read_run(args.run)
    out = args.out if args.out is not None else Path(args.run).parent
    paths = write_report(results, config, out, labels=labels, figures=not args.no_figures)
    for p in paths.values():
        print(f"wrote {p}")
    return EXIT_CELL_FAILED if any(not r.ok for r in results) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisecnn", description="Train 1D CNNs on noise-corrupted data and score them on clean data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", type=Path, help="YAML/JSON grid config (a run.json also works)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("synth", help="write a synthetic dataset + manifest")
    common(p, config=False)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--records-per-class", type=int, default=50)
    p.add_argument("--length", type=int, default=1024)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preview-noise", help="noisy versions of one record as CSV/PNG")
    common(p)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--record", help="record id (default: first record)")
    p.add_argument("--noise", nargs="*", help="specs like linear:0.2 awgn:40 none")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("train", help="run one cell")
    common(p)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--classifier", default="CNN")
    p.add_argument("--augmentation", default="NONE")
    p.add_argument("--noise-kind", default="NONE")
    p.add_argument("--strength", type=float, default=0.0)
    p.add_argument("--history", action="store_true", help="include per-epoch history in the output")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="run the full sweep")
    common(p)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="re-render report files from run.json")
    common(p, config=False)
    p.add_argument("--run", type=Path, required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, data.DatasetError, FileNotFoundError, KeyError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
