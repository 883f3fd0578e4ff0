"""Signal records, manifest loading, synthetic pulse-train data, splitting and windowing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from noisecnn import rng

MANIFEST_HEADER = ["id", "label", "sampling_rate_hz", "path"]


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class ClassLabel:
    index: int
    name: str


@dataclass
class SignalRecord:
    id: str
    samples: np.ndarray
    sampling_rate_hz: float
    label: ClassLabel

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise DatasetError(f"record {self.id}: samples must be a non-empty 1D sequence")
        if not np.all(np.isfinite(self.samples)):
            raise DatasetError(f"record {self.id}: non-finite sample")
        if not self.sampling_rate_hz > 0:
            raise DatasetError(f"record {self.id}: sampling rate must be positive")


@dataclass
class Window:
    values: np.ndarray
    label: ClassLabel
    source_id: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fracs = self.fractions
        if any(not 0 < f < 1 for f in fracs):
            raise ValueError(f"split fractions must lie in (0, 1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_fraction, self.val_fraction, self.test_fraction)


def label_map(records) -> list[ClassLabel]:
    """Distinct labels of ``records`` ordered by index."""
    return sorted({r.label for r in records}, key=lambda lab: lab.index)


# --- manifest I/O ----------------------------------------------------------


def _read_signal_file(path: Path) -> np.ndarray:
    if not path.is_file():
        raise DatasetError(f"{path}: signal file not found")
    values = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                v = float(text)
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: not a number: {text!r}") from None
            if not math.isfinite(v):
                raise DatasetError(f"{path}:{lineno}: non-finite sample {text!r}")
            values.append(v)
    if not values:
        raise DatasetError(f"{path}: signal file has no samples")
    return np.array(values)


def load_dataset(manifest_path) -> list[SignalRecord]:
    """Read a manifest CSV (``id,label,sampling_rate_hz,path``) and its signal files.

    Labels receive dense indices in order of first appearance.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DatasetError(f"{manifest_path}: manifest not found")
    base = manifest_path.parent
    labels: dict[str, ClassLabel] = {}
    records = []
    seen_ids = set()
    with manifest_path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_HEADER:
            raise DatasetError(f"{manifest_path}:1: expected header {','.join(MANIFEST_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise DatasetError(f"{manifest_path}:{lineno}: expected 4 fields, got {len(row)}")
            rid, label_name, rate_text, rel_path = (cell.strip() for cell in row)
            if not rid or not label_name or not rel_path:
                raise DatasetError(f"{manifest_path}:{lineno}: empty field")
            if rid in seen_ids:
                raise DatasetError(f"{manifest_path}:{lineno}: duplicate record id {rid!r}")
            try:
                rate = float(rate_text)
            except ValueError:
                raise DatasetError(f"{manifest_path}:{lineno}: bad sampling rate {rate_text!r}") from None
            if not (math.isfinite(rate) and rate > 0):
                raise DatasetError(f"{manifest_path}:{lineno}: sampling rate must be positive")
            if label_name not in labels:
                labels[label_name] = ClassLabel(len(labels), label_name)
            try:
                samples = _read_signal_file(base / rel_path)
            except DatasetError as exc:
                raise DatasetError(f"{manifest_path}:{lineno}: {exc}") from None
            seen_ids.add(rid)
            records.append(SignalRecord(rid, samples, rate, labels[label_name]))
    if not records:
        raise DatasetError(f"{manifest_path}: empty dataset")
    return records


def write_dataset(records, out_dir) -> Path:
    """Write ``records`` as one text file each plus ``manifest.csv``; returns the manifest path."""
    out_dir = Path(out_dir)
    sig_dir = out_dir / "signals"
    sig_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    # manifest order fixes label indices, so lead with one record per class in index order
    firsts = {}
    for r in records:
        firsts.setdefault(r.label.index, r)
    ordered = sorted(firsts.values(), key=lambda r: r.label.index)
    lead = {id(r) for r in ordered}
    ordered += [r for r in records if id(r) not in lead]
    with manifest.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for r in ordered:
            rel = f"signals/{r.id}.txt"
            (out_dir / rel).write_text("".join(f"{v!r}\n" for v in r.samples.tolist()), encoding="utf-8")
            w.writerow([r.id, r.label.name, repr(float(r.sampling_rate_hz)), rel])
    return manifest


# --- synthetic data -------------------------------------------------------


@dataclass(frozen=True)
class PulseClass:
    period: float  # samples between pulses
    width: float  # gaussian sigma of one pulse, samples
    amplitude: float
    jitter: float  # std of the per-pulse timing offset, samples
    scale: float  # target record std, amplitude units


def pulse_classes(num_classes: int) -> list[PulseClass]:
    """Per-class pulse-train parameters; every field differs between classes."""
    out = []
    for c in range(num_classes):
        frac = c / max(num_classes - 1, 1)
        out.append(PulseClass(
            period=30.0 + 2.5 * c,
            width=3.0 + 0.7 * c,
            amplitude=1.0 + 0.5 * frac,
            jitter=3.0 + 0.5 * frac,
            scale=90.0 + 20.0 * frac,
        ))
    return out


def _pulse_train(cls: PulseClass, length: int, gen: np.random.Generator) -> np.ndarray:
    t = np.arange(length, dtype=np.float64)
    signal = np.zeros(length)
    position = gen.uniform(0.0, cls.period)
    while position < length + 4 * cls.width:
        centre = position + cls.jitter * rng.gaussian(gen, 1)[0]
        height = cls.amplitude * (1.0 + 0.05 * rng.gaussian(gen, 1)[0])
        signal += height * np.exp(-0.5 * ((t - centre) / cls.width) ** 2)
        position += cls.period
    signal += 0.02 * rng.gaussian(gen, length)
    return signal


def synth_dataset(classes: int, records_per_class: int, record_length: int, seed: int,
                  sampling_rate_hz: float = 300.0) -> list[SignalRecord]:
    """Deterministic, class-separable pulse-train records.

    Each record is rescaled so its sample standard deviation sits within a few
    percent of its class scale (90 to 110 amplitude units).
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if records_per_class < 1:
        raise ValueError("need at least 1 record per class")
    if record_length < 64:
        raise ValueError("record_length must be >= 64")
    params = pulse_classes(classes)
    records = []
    for c, cls in enumerate(params):
        label = ClassLabel(c, f"class{c}")
        for i in range(records_per_class):
            gen = rng.stream(seed, c, i)
            raw = _pulse_train(cls, record_length, gen)
            target = cls.scale * (1.0 + 0.05 * (2.0 * gen.random() - 1.0))
            samples = (raw - raw.mean()) * (target / raw.std())
            records.append(SignalRecord(f"c{c}_r{i:04d}", samples, sampling_rate_hz, label))
    return records


# --- split / window / standardize -------------------------------------------


def _largest_remainder(n: int, fractions) -> list[int]:
    raw = [n * f for f in fractions]
    counts = [math.floor(v) for v in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    # every split gets at least one record, taken from the currently largest
    for i in range(len(counts)):
        if counts[i] == 0:
            donor = max(range(len(counts)), key=lambda j: (counts[j], -j))
            counts[donor] -= 1
            counts[i] = 1
    return counts


def split(records, spec: SplitSpec) -> tuple[list[SignalRecord], list[SignalRecord], list[SignalRecord]]:
    """Stratified per-record split into (train, val, test).

    Within each class the records are shuffled with ``spec.seed`` and cut by
    largest-remainder rounding; each part keeps the input order.
    """
    by_class: dict[int, list[int]] = {}
    for i, r in enumerate(records):
        by_class.setdefault(r.label.index, []).append(i)
    assignment = {}
    for c in sorted(by_class):
        members = by_class[c]
        if len(members) < 3:
            raise DatasetError(f"class {records[members[0]].label.name!r} has {len(members)} records; need >= 3")
        counts = _largest_remainder(len(members), spec.fractions)
        perm = rng.stream(spec.seed, c).permutation(len(members))
        bounds = np.cumsum([0] + counts)
        for part in range(3):
            for j in perm[bounds[part] : bounds[part + 1]]:
                assignment[members[j]] = part
    parts: tuple[list, list, list] = ([], [], [])
    for i, r in enumerate(records):
        parts[assignment[i]].append(r)
    return parts


def window(record: SignalRecord, length: int, stride: int) -> list[Window]:
    """Cut windows at offsets 0, stride, 2*stride, ...; a short record yields one zero-padded window."""
    if length < 1 or stride < 1:
        raise ValueError("window length and stride must be >= 1")
    x = record.samples
    if x.size < length:
        values = np.zeros(length)
        values[: x.size] = x
        return [Window(values, record.label, record.id)]
    count = (x.size - length) // stride + 1
    return [Window(x[k * stride : k * stride + length].copy(), record.label, record.id) for k in range(count)]


def window_all(records, length: int, stride: int) -> list[Window]:
    return [w for r in records for w in window(r, length, stride)]


def standardize(w: Window) -> Window:
    """Zero mean, unit standard deviation; flat windows map to zeros."""
    v = w.values
    std = v.std()
    if std < 1e-12:
        return Window(np.zeros_like(v), w.label, w.source_id)
    return Window((v - v.mean()) / std, w.label, w.source_id)
