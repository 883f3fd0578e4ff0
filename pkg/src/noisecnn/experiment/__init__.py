from noisecnn.experiment.config import ConfigError, GridConfig, load_config
from noisecnn.experiment.report import read_run, write_report
from noisecnn.experiment.runner import Cell, CellError, CellResult, grid_cells, run_cell, run_grid

__all__ = [
    "Cell",
    "CellError",
    "CellResult",
    "ConfigError",
    "GridConfig",
    "grid_cells",
    "load_config",
    "read_run",
    "run_cell",
    "run_grid",
    "write_report",
]
