"""Grid configuration: parsing, validation and the resolved dict written to run.json."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from noisecnn import augment, noise
from noisecnn.data import SplitSpec
from noisecnn.nn.train import TrainConfig

CLASSIFIERS = ("CNN", "SEPCNN")
GRID_NOISE_KINDS = (noise.LINEAR, noise.AWGN)
DEFAULT_STRENGTHS = {
    noise.LINEAR: [0.0, 0.2, 0.4, 0.6, 0.8],
    noise.AWGN: [0.0, 20.0, 40.0, 60.0, 80.0],
}


class ConfigError(ValueError):
    pass


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads exponent floats without a dot (``1e-06``) as numbers."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*(?:\.[0-9_]*)?(?:[eE][-+]?[0-9]+)?|\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                    |\.(?:inf|Inf|INF)|\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


@dataclass
class GridConfig:
    dataset: dict = field(default_factory=lambda: {
        "synth": {"classes": 4, "records_per_class": 50, "record_length": 1024, "seed": 1}
    })
    split: SplitSpec = field(default_factory=SplitSpec)
    window_length: int = 256
    window_stride: int = 128
    classifiers: list[str] = field(default_factory=lambda: list(CLASSIFIERS))
    augmentations: list[str] = field(default_factory=lambda: [augment.NONE, augment.GMM])
    noise: dict[str, list[float]] = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_STRENGTHS.items()})
    linear_noise_x_scale: float = 1.0
    gmm_components: int = 3
    target_per_class: int | str = augment.MATCH_MAJORITY
    gmm_max_iters: int = 100
    gmm_tol: float = 1e-6
    train: TrainConfig = field(default_factory=TrainConfig)
    metric: str = "macro"
    global_seed: int = 0
    output_dir: str = "runs/grid"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        ds = self.dataset
        if not isinstance(ds, dict) or len(ds) != 1 or next(iter(ds)) not in ("synth", "manifest"):
            raise ConfigError("dataset must be {'synth': {...}} or {'manifest': <path>}")
        if "synth" in ds:
            unknown = set(ds["synth"]) - {"classes", "records_per_class", "record_length", "seed"}
            if unknown:
                raise ConfigError(f"unknown synth keys: {sorted(unknown)}")
        if self.window_length < 1 or self.window_stride < 1:
            raise ConfigError("window length and stride must be >= 1")
        if not self.classifiers:
            raise ConfigError("at least one classifier is required")
        if not self.augmentations:
            raise ConfigError("at least one augmentation is required")
        for c in self.classifiers:
            if c not in CLASSIFIERS:
                raise ConfigError(f"unknown classifier {c!r}; choose from {CLASSIFIERS}")
        for a in self.augmentations:
            if a not in augment.AUGMENT_KINDS:
                raise ConfigError(f"unknown augmentation {a!r}; choose from {augment.AUGMENT_KINDS}")
        if len(set(self.classifiers)) != len(self.classifiers) or len(set(self.augmentations)) != len(self.augmentations):
            raise ConfigError("classifier and augmentation lists must not repeat entries")
        if not self.noise:
            raise ConfigError("at least one noise kind is required")
        for kind, strengths in self.noise.items():
            if kind not in GRID_NOISE_KINDS:
                raise ConfigError(f"unknown noise kind {kind!r}; choose from {GRID_NOISE_KINDS}")
            if 0 not in strengths:
                raise ConfigError(f"{kind} strengths must include 0 (the clean baseline)")
            if any(s < 0 for s in strengths) or len(set(strengths)) != len(strengths):
                raise ConfigError(f"{kind} strengths must be distinct and non-negative")
        if self.gmm_components < 1:
            raise ConfigError("gmm_components must be >= 1")
        if self.metric not in ("macro", "weighted"):
            raise ConfigError("metric must be 'macro' or 'weighted'")
        try:
            augment.AugmentSpec(augment.GMM, self.gmm_components, self.target_per_class)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise"] = {k: [float(s) for s in v] for k, v in self.noise.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "split" in d:
                d["split"] = SplitSpec(**d["split"])
            if "train" in d:
                d["train"] = TrainConfig(**d["train"])
            if "noise" in d:
                d["noise"] = {str(k).upper(): [float(s) for s in v] for k, v in d["noise"].items()}
            return cls(**d)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def load_config(path) -> GridConfig:
    """Read a YAML or JSON config; a run.json is accepted and its ``config`` block reused."""
    path = Path(path)
    try:
        doc = yaml.load(path.read_text(encoding="utf-8"), Loader=_Loader)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    if "config" in doc and "cells" in doc:
        doc = doc["config"]
    return GridConfig.from_dict(doc)


def dumps(config: GridConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True)
