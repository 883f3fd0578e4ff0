"""Single-cell pipeline and the full grid sweep.

Pipeline per cell: load, split, window, corrupt the training windows, augment
the training windows, standardize every split, train with validation early
stopping, then score the untouched test windows.
"""

from __future__ import annotations

import functools
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from noisecnn import augment, data, noise, rng
from noisecnn.experiment.config import GridConfig
from noisecnn.metrics import confusion, macro_f1
from noisecnn.nn.model import preset
from noisecnn.nn.train import TrainConfig, train

log = logging.getLogger(__name__)


class CellError(RuntimeError):
    pass


@dataclass(frozen=True)
class Cell:
    classifier: str
    augmentation: str
    noise_kind: str
    strength: float

    def canonical(self) -> "Cell":
        """Zero strength under any kind is the same clean-baseline run."""
        if self.strength == 0 or self.noise_kind == noise.NONE:
            return Cell(self.classifier, self.augmentation, noise.NONE, 0.0)
        return self

    @property
    def identity(self) -> str:
        c = self.canonical()
        return f"{c.classifier}|{c.augmentation}|{c.noise_kind}|{float(c.strength)!r}"


@dataclass
class CellResult:
    classifier: str
    augmentation: str
    noise_kind: str
    strength: float
    macro_f1: float | None  # percent, two decimals
    epochs_run: int = 0
    wall_seconds: float = 0.0
    cell_seed: int = 0
    best_epoch: int = 0
    test_checksum: str = ""
    train_windows: int = 0
    synthetic_windows: int = 0
    history: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    error: str | None = None

    @property
    def cell(self) -> Cell:
        return Cell(self.classifier, self.augmentation, self.noise_kind, self.strength)

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CellResult":
        return cls(**d)


def cell_seed(global_seed: int, cell: Cell) -> int:
    return rng.stable_hash("cell", global_seed, cell.identity)


@functools.lru_cache(maxsize=4)
def _load_records(dataset_key: str) -> tuple:
    ds = json.loads(dataset_key)
    if "manifest" in ds:
        return tuple(data.load_dataset(ds["manifest"]))
    s = ds["synth"]
    return tuple(data.synth_dataset(s.get("classes", 4), s.get("records_per_class", 50),
                                    s.get("record_length", 1024), s.get("seed", 1)))


def load_records(config: GridConfig) -> list[data.SignalRecord]:
    return list(_load_records(json.dumps(config.dataset, sort_keys=True)))


@dataclass
class PreparedSplits:
    train: list
    val: list
    test: list
    num_classes: int
    labels: list


def prepare(config: GridConfig) -> PreparedSplits:
    """Split and window the dataset; nothing here depends on the cell."""
    records = load_records(config)
    labels = data.label_map(records)
    tr, va, te = data.split(records, config.split)
    L, S = config.window_length, config.window_stride
    return PreparedSplits(data.window_all(tr, L, S), data.window_all(va, L, S), data.window_all(te, L, S),
                          len(labels), labels)


def windows_checksum(windows) -> str:
    h = hashlib.sha256()
    for w in windows:
        h.update(np.ascontiguousarray(w.values, dtype="<f8").tobytes())
        h.update(int(w.label.index).to_bytes(4, "little"))
    return h.hexdigest()


def run_cell(config: GridConfig, cell: Cell) -> CellResult:
    """Run one grid cell; any stage failure is re-raised with the cell identity attached."""
    started = time.perf_counter()
    canon = cell.canonical()
    seed = cell_seed(config.global_seed, canon)
    try:
        with threadpool_limits(limits=1):
            splits = prepare(config)
            nspec = noise.NoiseSpec(canon.noise_kind, canon.strength)
            train_w = noise.corrupt_training_set(splits.train, nspec, rng.stable_hash(seed, "noise"),
                                                 x_scale=config.linear_noise_x_scale)
            notes: list[str] = []
            aspec = augment.AugmentSpec(canon.augmentation, config.gmm_components, config.target_per_class,
                                        rng.stable_hash(seed, "augment"), config.gmm_max_iters, config.gmm_tol)
            n_before = len(train_w)
            train_w = augment.augment(train_w, aspec, notes)
            synthetic = len(train_w) - n_before
            train_w = [data.standardize(w) for w in train_w]
            val_w = [data.standardize(w) for w in splits.val]
            test_w = [data.standardize(w) for w in splits.test]
            tcfg = TrainConfig(**{**config.train.to_dict(), "seed": rng.stable_hash(seed, "train")})
            net, history = train(preset(canon.classifier, splits.num_classes), train_w, val_w, tcfg,
                                 num_classes=splits.num_classes)
            x = np.stack([w.values for w in test_w])
            y = np.array([w.label.index for w in test_w])
            report = macro_f1(confusion(y, net.predict(x), splits.num_classes), average=config.metric)
    except Exception as exc:
        raise CellError(f"cell {canon.identity}: {type(exc).__name__}: {exc}") from exc
    return CellResult(
        classifier=canon.classifier,
        augmentation=canon.augmentation,
        noise_kind=canon.noise_kind,
        strength=float(canon.strength),
        macro_f1=round(100.0 * report.macro_f1, 2),
        epochs_run=len(history),
        wall_seconds=round(time.perf_counter() - started, 3),
        cell_seed=seed,
        best_epoch=net.best_epoch,
        test_checksum=windows_checksum(test_w),
        train_windows=len(train_w),
        synthetic_windows=synthetic,
        history=history,
        notes=notes,
    )


def grid_cells(config: GridConfig) -> list[Cell]:
    """Distinct training runs in report order; strength 0 appears once per (classifier, augmentation)."""
    cells = []
    for clf in config.classifiers:
        for aug in config.augmentations:
            cells.append(Cell(clf, aug, noise.NONE, 0.0))
            for kind in config.noise:
                for s in sorted(config.noise[kind]):
                    if s != 0:
                        cells.append(Cell(clf, aug, kind, float(s)))
    return cells


def sort_key(config: GridConfig):
    kinds = [noise.NONE, *config.noise]

    def key(r: CellResult):
        return (config.classifiers.index(r.classifier), config.augmentations.index(r.augmentation),
                kinds.index(r.noise_kind), r.strength)
    return key


def _safe_run(config: GridConfig, cell: Cell) -> CellResult:
    try:
        return run_cell(config, cell)
    except Exception as exc:  # one failing cell must not void the sweep
        log.error("%s", exc)
        canon = cell.canonical()
        return CellResult(canon.classifier, canon.augmentation, canon.noise_kind, float(canon.strength),
                          None, cell_seed=cell_seed(config.global_seed, canon), error=str(exc))


def run_grid(config: GridConfig, jobs: int = 1, order=None, progress=None) -> list[CellResult]:
    """Run every distinct cell, optionally across ``jobs`` processes.

    ``order`` may permute execution; results always come back in report order.
    """
    cells = grid_cells(config)
    if order is not None:
        cells = [cells[i] for i in order]
    results = []
    if jobs <= 1:
        for cell in cells:
            results.append(_safe_run(config, cell))
            if progress:
                progress(results[-1])
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(_safe_run, [config] * len(cells), cells):
                results.append(res)
                if progress:
                    progress(res)
    return sorted(results, key=sort_key(config))
