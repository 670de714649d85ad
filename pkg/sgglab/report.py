"""
Run comparison for metric reports.

Joins two or more metric report CSVs on (metric, K, variant) and adds
the delta of every run against the first one. The result is the data
behind per-metric bar charts comparing training setups.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from .metrics import REPORT_COLUMNS
from .utils.exceptions import ReportSchemaError
from .utils.logger import log_execution_time

logger = logging.getLogger("sgglab.report")

KEY_COLUMNS = ["metric", "K", "variant"]

PathLike = Union[str, Path]


def load_metric_report(path: PathLike) -> pd.DataFrame:
    """
    Read a metric report CSV.

    Raises:
        ReportSchemaError: When columns are missing or keys repeat
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ReportSchemaError(f"Cannot read metric report {path}: {e}")

    missing = [c for c in REPORT_COLUMNS if c not in frame.columns]
    if missing:
        raise ReportSchemaError(f"Metric report {path} lacks columns {missing}")
    if frame.duplicated(KEY_COLUMNS).any():
        raise ReportSchemaError(f"Metric report {path} repeats (metric, K, variant) keys")
    return frame[REPORT_COLUMNS]


class ReportComparer:
    """
    Compares metric reports of several runs.
    """

    def __init__(self, labels: Optional[Sequence[str]] = None):
        """
        Initialize report comparer.

        Args:
            labels: Run labels (defaults to the report file stems)
        """
        self.logger = logging.getLogger("sgglab.report")
        self.labels = list(labels) if labels is not None else None

    def _resolve_labels(self, paths: Sequence[PathLike]) -> List[str]:
        labels = self.labels if self.labels is not None else [Path(p).stem for p in paths]
        if len(labels) != len(paths):
            raise ReportSchemaError(f"Got {len(labels)} labels for {len(paths)} reports")
        if len(set(labels)) != len(labels):
            raise ReportSchemaError(f"Run labels must be unique, got {labels}")
        return labels

    @log_execution_time(logging.getLogger("sgglab.report"))
    def compare(self, paths: Sequence[PathLike]) -> pd.DataFrame:
        """
        Join reports and compute deltas against the first run.

        Args:
            paths: Two or more metric report CSVs

        Returns:
            DataFrame with metric, K, variant, value_<label> per run and
            delta_<label> per run after the first

        Raises:
            ReportSchemaError: On fewer than two reports or mismatched keys
        """
        if len(paths) < 2:
            raise ReportSchemaError("Need at least two metric reports to compare")
        labels = self._resolve_labels(paths)

        frames = [load_metric_report(p) for p in paths]
        reference_keys = set(map(tuple, frames[0][KEY_COLUMNS].values.tolist()))
        for label, frame in zip(labels[1:], frames[1:]):
            keys = set(map(tuple, frame[KEY_COLUMNS].values.tolist()))
            if keys != reference_keys:
                only_ref = sorted(reference_keys - keys)
                only_run = sorted(keys - reference_keys)
                raise ReportSchemaError(
                    f"Report '{label}' does not match '{labels[0]}': "
                    f"{len(only_ref)} rows only in the first, {len(only_run)} only in '{label}'"
                )

        joined = frames[0][KEY_COLUMNS].copy()
        for label, frame in zip(labels, frames):
            values = frame[KEY_COLUMNS + ["value"]].rename(columns={"value": f"value_{label}"})
            joined = joined.merge(values, on=KEY_COLUMNS, how="left", validate="one_to_one")

        base = joined[f"value_{labels[0]}"]
        for label in labels[1:]:
            joined[f"delta_{label}"] = joined[f"value_{label}"] - base

        joined = joined.sort_values(KEY_COLUMNS, kind="mergesort").reset_index(drop=True)
        self.logger.info(f"✓ Compared {len(labels)} runs over {len(joined)} metric rows")
        return joined


def compare_reports(paths: Sequence[PathLike], labels: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """Functional shortcut for ReportComparer(labels).compare(paths)."""
    return ReportComparer(labels).compare(paths)
