"""Grid outputs: ``table.csv``, ``curves.csv``, ``run.json`` and the F1-vs-strength figure."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from noisecnn import noise
from noisecnn.experiment.config import GridConfig
from noisecnn.experiment.runner import Cell, CellResult, load_records, sort_key
from noisecnn.data import label_map

PROTOCOL = {
    "noise_split": "training windows only; validation and test windows stay clean",
    "order": "window -> corrupt -> augment -> standardize -> train",
    "noise_before_standardize": True,
    "corrupt_once": "training windows are corrupted once per run, not re-noised per epoch",
    "augment_after_noise": True,
    "strength_zero": "computed once per (classifier, augmentation) and shown under every noise kind",
    "linear_noise_x": "0-based sample index times linear_noise_x_scale",
}


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.2f}"


def column_name(kind: str, strength: float) -> str:
    return f"{kind}_{strength:g}"


def _lookup(results) -> dict[str, CellResult]:
    return {r.cell.identity: r for r in results}


def table_rows(results, config: GridConfig) -> tuple[list[str], list[list[str]]]:
    """One row per (classifier, augmentation); one column per (noise kind, strength)."""
    found = _lookup(results)
    columns = [(kind, s) for kind in config.noise for s in sorted(config.noise[kind])]
    header = ["classifier", "augmentation", *(column_name(k, s) for k, s in columns)]
    rows = []
    for clf in config.classifiers:
        for aug in config.augmentations:
            row = [clf, aug]
            for kind, s in columns:
                r = found.get(Cell(clf, aug, kind, float(s)).identity)
                row.append(_fmt(r.macro_f1 if r else None))
            rows.append(row)
    return header, rows


def curve_rows(results, config: GridConfig) -> list[list[str]]:
    found = _lookup(results)
    rows = []
    for clf in config.classifiers:
        for aug in config.augmentations:
            for kind in config.noise:
                for s in sorted(config.noise[kind]):
                    r = found.get(Cell(clf, aug, kind, float(s)).identity)
                    rows.append([clf, aug, kind, f"{s:g}", _fmt(r.macro_f1 if r else None)])
    return rows


def trend_summary(results, config: GridConfig) -> dict:
    """Descriptive comparisons for inspection; nothing here is asserted."""
    found = _lookup(results)
    out = {}
    for clf in config.classifiers:
        for aug in config.augmentations:
            base = found.get(Cell(clf, aug, noise.NONE, 0.0).identity)
            entry = {"clean_f1": base.macro_f1 if base else None}
            for kind in config.noise:
                vals = [found.get(Cell(clf, aug, kind, float(s)).identity) for s in sorted(config.noise[kind]) if s != 0]
                f1s = [v.macro_f1 for v in vals if v is not None and v.macro_f1 is not None]
                entry[kind] = {
                    "mean_f1": round(float(np.mean(f1s)), 2) if f1s else None,
                    "mean_drop": round(base.macro_f1 - float(np.mean(f1s)), 2) if f1s and base and base.macro_f1 is not None else None,
                    "std_f1": round(float(np.std(f1s)), 2) if f1s else None,
                }
            drops = {k: entry[k]["mean_drop"] for k in config.noise}
            if noise.LINEAR in drops and noise.AWGN in drops and None not in drops.values():
                entry["linear_more_destructive_than_awgn"] = drops[noise.LINEAR] > drops[noise.AWGN]
            out[f"{clf}/{aug}"] = entry
    if "CNN" in config.classifiers and "SEPCNN" in config.classifiers:
        stability = {}
        for aug in config.augmentations:
            spread = {}
            for clf in ("CNN", "SEPCNN"):
                f1s = [r.macro_f1 for r in results
                       if r.classifier == clf and r.augmentation == aug and r.macro_f1 is not None]
                spread[clf] = round(float(np.std(f1s)), 2) if f1s else None
            if None not in spread.values():
                stability[aug] = {"f1_std_over_grid": spread, "sepcnn_more_stable": spread["SEPCNN"] < spread["CNN"]}
        out["classifier_stability"] = stability
    return out


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_report(results, config: GridConfig, output_dir=None, labels=None, figures: bool = True) -> dict[str, Path]:
    """Write every report file into ``output_dir`` (defaults to ``config.output_dir``)."""
    results = sorted(results, key=sort_key(config))
    if not results:
        raise ValueError("no results to report")
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"table": out / "table.csv", "curves": out / "curves.csv", "run": out / "run.json"}

    header, rows = table_rows(results, config)
    _write_csv(paths["table"], header, rows)
    _write_csv(paths["curves"], ["classifier", "augmentation", "noise_kind", "strength", "f1"],
               curve_rows(results, config))

    if labels is None:
        labels = [{"index": lab.index, "name": lab.name} for lab in label_map(load_records(config))]
    checksums = sorted({r.test_checksum for r in results if r.ok})
    doc = {
        "config": config.to_dict(),
        "label_map": labels,
        "protocol": PROTOCOL,
        "distinct_runs": len(results),
        "failed_cells": [r.cell.identity for r in results if not r.ok],
        "test_checksums": checksums,
        "test_set_identical_across_cells": len(checksums) <= 1,
        "trends": trend_summary(results, config),
        "cells": [r.to_dict() for r in results],
    }
    paths["run"].write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    if figures:
        from noisecnn import plotting

        paths["figure"] = plotting.plot_curves(results, config, out / "curves.png")
    return paths


def read_run(path) -> tuple[GridConfig, list[CellResult], list]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    config = GridConfig.from_dict(doc["config"])
    return config, [CellResult.from_dict(c) for c in doc["cells"]], doc.get("label_map")
