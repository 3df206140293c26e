import json
import posixpath

import fsspec
import numpy as np
import pandas as pd

from app.metrics import EvalReport
from app.symclaw_logger import logger

FLOAT_FORMAT = "%.17g"


class ReportWriter:
    """
    Writes an :class:`EvalReport` to ``out_dir`` as plot-ready CSVs and a
    ``metadata.json`` document.

    Args:
        report (EvalReport): Evaluation result.
        out_dir (str): Local path or fsspec URL.
    """

    def __init__(self, report: EvalReport, out_dir: str):
        self.report = report
        self.out_dir = out_dir
        self.fs, self.root = fsspec.core.url_to_fs(out_dir)
        self.written: list[str] = []
        try:
            self.fs.makedirs(self.root, exist_ok=True)
            if len(report.times):
                self.write_metric_series()
                self.write_profiles()
            self.write_metadata()
        except OSError as e:
            logger.error("Error writing report to %s: %s", out_dir, e)
            raise
        logger.info("Wrote %d report files to %s", len(self.written), out_dir)

    def _path(self, name: str) -> str:
        return posixpath.join(self.root, name)

    def _to_csv(self, frame: pd.DataFrame, name: str) -> None:
        with self.fs.open(self._path(name), "w") as f:
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT)
        self.written.append(name)

    def write_metric_series(self) -> None:
        """
        One ``t,value`` CSV per metric: ``conservation_<component>.csv``,
        ``entropy.csv``, ``entropy_boundary.csv`` and ``error.csv``.
        """
        data = self.report.data
        t = data["t"].values
        for component in self.report.components:
            values = data["conservation"].sel(component=component).values
            self._to_csv(
                pd.DataFrame({"t": t, "value": values}), f"conservation_{component}.csv"
            )
        for name in ("entropy", "entropy_boundary", "error"):
            self._to_csv(
                pd.DataFrame({"t": t, "value": data[name].values}), f"{name}.csv"
            )

    def profile_frame(self, values: np.ndarray) -> pd.DataFrame:
        """
        Flattens a state into columns ``x[,y],u1..up``, one row per cell with
        x running fastest.
        """
        grid = self.report.grid
        p = values.shape[-1]
        columns = {}
        for name, coords in zip(("x", "y"), grid.mesh(), strict=False):
            columns[name] = np.asarray(coords).ravel()
        flat = np.asarray(values).reshape(-1, p)
        for k in range(p):
            columns[f"u{k + 1}"] = flat[:, k]
        return pd.DataFrame(columns)

    def write_profiles(self) -> None:
        for t, values in sorted(self.report.profiles.items()):
            self._to_csv(self.profile_frame(values), f"profile_t{t:g}.csv")
        for t, values in sorted(self.report.reference_profiles.items()):
            self._to_csv(self.profile_frame(values), f"reference_profile_t{t:g}.csv")

    def write_metadata(self) -> None:
        json_to_file(
            self.report.metadata.model_dump(), self._path("metadata.json"), self.fs
        )
        self.written.append("metadata.json")


def json_to_file(json_data: dict, file_path: str, fs=None) -> None:
    """
    Writes JSON data to a file.

    Args:
        json_data (dict): The JSON data to write.
        file_path (str): The path to the file where the JSON data will be written.
        fs: fsspec filesystem; inferred from ``file_path`` when omitted.
    """
    if fs is None:
        fs, file_path = fsspec.core.url_to_fs(file_path)
    with fs.open(file_path, "w", encoding="utf-8") as f:
        try:
            json.dump(json_data, f, indent=2)
        except (TypeError, ValueError) as e:
            logger.error(f"Error writing data to file, {file_path}: {e}")
            raise


def emit_report(report: EvalReport, out_dir: str) -> list[str]:
    """
    Emits the report files.

    Returns:
        list[str]: Names of the files written, relative to ``out_dir``.
    """
    return ReportWriter(report, out_dir).written
