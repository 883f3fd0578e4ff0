import pytest

from noisecnn.experiment.config import GridConfig
from noisecnn.nn.train import TrainConfig


def tiny_config(tmp_path=None, **overrides) -> GridConfig:
    """A grid small enough to run every cell in a few seconds."""
    kw = dict(
        dataset={"synth": {"classes": 2, "records_per_class": 6, "record_length": 256, "seed": 3}},
        window_length=64,
        window_stride=64,
        classifiers=["CNN"],
        augmentations=["NONE"],
        noise={"LINEAR": [0.0, 0.4], "AWGN": [0.0, 40.0]},
        gmm_components=2,
        train=TrainConfig(epochs=2, batch_size=8, early_stop_patience=2),
        output_dir=str(tmp_path / "out") if tmp_path is not None else "runs/test",
    )
    kw.update(overrides)
    return GridConfig(**kw)


@pytest.fixture
def tiny(tmp_path):
    return tiny_config(tmp_path)


ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(name: str, ok: bool, detail: str = "") -> bool:
    ACCEPTANCE.append((name, bool(ok), detail))
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
