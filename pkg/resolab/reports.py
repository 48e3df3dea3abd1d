# resolab/reports.py
"""Artifact writers: report.json, margins.json, sweep.csv, sweep_summary.json, spectrum.csv, plot.gp."""
import json
import logging
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd
import scipy
from pydantic import BaseModel

import resolab
from resolab.schemas import ExperimentConfig, RunReport

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12e"


def versions() -> dict[str, str]:
    return {"resolab": resolab.__version__, "numpy": np.__version__, "scipy": scipy.__version__}


def run_report(command: str, config: ExperimentConfig, passed: bool, payload: Optional[dict] = None) -> RunReport:
    return RunReport(
        command=command, config_hash=config.config_hash(), versions=versions(),
        passed=passed, payload=payload or {},
    )


def dump_model(model: BaseModel) -> dict:
    return model.model_dump(mode="json", by_alias=True)


def _plain(obj):
    """Models to dicts and non-finite floats to None, recursively."""
    if isinstance(obj, BaseModel):
        return _plain(dump_model(obj))
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def stamped(report: RunReport, body: dict) -> dict:
    """A side artifact carrying the run's config hash and versions."""
    out = _plain(body)
    out.update(config_hash=report.config_hash, versions=dict(report.versions))
    return out


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
    logger.info("wrote %s", path)
    return path


def write_csv(path: Path, frame: pd.DataFrame, columns: Optional[Iterable[str]] = None) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = frame if columns is None else frame[list(columns)]
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def plot_script(csv_name: str = "sweep.csv") -> str:
    """gnuplot script drawing log norms against 1/h from the sweep CSV."""
    return "\n".join([
        "# usage: gnuplot plot.gp",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 1000,420",
        "set output 'sweep.png'",
        "set multiplot layout 1,2",
        "set xlabel '1/h'",
        "set ylabel 'log norm'",
        f"plot '{csv_name}' using (1/$1):(log($4)) with linespoints title 'full'",
        "set logscale x",
        "set xlabel 'log(1/h)'",
        f"plot '{csv_name}' using (1/$1):(log($5)) with linespoints title 'exterior'",
        "unset multiplot",
        "",
    ])


def write_plot_script(path: Path, csv_name: str = "sweep.csv") -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(plot_script(csv_name))
    return path
