"""Define the comparison table and sample-table readers."""
import csv
import io
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from cgrlpy.errors import ConfigError, DomainError
from cgrlpy.harness.metrics import MetricsReport, read_report
from cgrlpy.harness.models import MODEL_RANDOM, MODELS
from cgrlpy.sim.geometry import Turn

_LOGGER: logging.Logger = logging.getLogger(__name__)

DELIMITER = "|"
METRIC_LABELS = ("C.R.", "A.R.", "A.V.")
MISSING = "-"
SAMPLE_DELIMITERS = (",", "\t", ";", "|")

Cell = Tuple[float, float, float]
PathLike = Union[str, Path]


def _model_order(models: Iterable[str]) -> List[str]:
    known = [model for model in MODELS if model in models]
    return known + sorted(model for model in models if model not in MODELS)


def _task_order(tasks: Iterable[str]) -> List[str]:
    known = [turn.value for turn in Turn]
    return [task for task in known if task in tasks] + sorted(
        task for task in tasks if task not in known
    )


def aggregate(reports: Sequence[MetricsReport]) -> Dict[Tuple[str, str], Cell]:
    """Return the seed-averaged metrics per ``(model, task)``."""
    grouped: Dict[Tuple[str, str], List[MetricsReport]] = {}
    for report in reports:
        grouped.setdefault((report.model, report.task), []).append(report)
    return {
        key: (
            float(np.mean([r.collision_rate for r in group])),
            float(np.mean([r.average_reward for r in group])),
            float(np.mean([r.average_velocity for r in group])),
        )
        for key, group in grouped.items()
    }


def export_table(reports: Sequence[MetricsReport]) -> str:
    """Return the comparison table: a row per model, three columns per task.

    Values are averaged over seeds and printed with two decimals; missing cells are
    ``-``.

    :param reports: Evaluation reports
    :type reports: ``Sequence[cgrlpy.harness.metrics.MetricsReport]``
    :rtype: ``str``
    :raises DomainError: when there is nothing to tabulate
    """
    if not reports:
        raise DomainError("No evaluation reports to tabulate")
    cells = aggregate(reports)
    models = _model_order({model for model, _ in cells})
    tasks = _task_order({task for _, task in cells})

    stream = io.StringIO()
    writer = csv.writer(stream, delimiter=DELIMITER, lineterminator="\n")
    writer.writerow(
        ["model"] + [f"{task} {label}" for task in tasks for label in METRIC_LABELS]
    )
    for model in models:
        row = [model]
        for task in tasks:
            cell = cells.get((model, task))
            if cell is None:
                row.extend([MISSING] * len(METRIC_LABELS))
            else:
                row.extend(f"{value:.2f}" for value in cell)
        writer.writerow(row)
    return stream.getvalue()


def parse_table(text: str) -> Dict[Tuple[str, str], Optional[Cell]]:
    """Return the cells of a table written by :func:`export_table`."""
    rows = list(csv.reader(io.StringIO(text), delimiter=DELIMITER))
    if not rows or rows[0][:1] != ["model"]:
        raise ConfigError("Not a comparison table")
    columns = rows[0][1:]
    if len(columns) % len(METRIC_LABELS):
        raise ConfigError("Comparison table columns are not grouped by task")
    tasks = [
        columns[index].rsplit(" ", 1)[0]
        for index in range(0, len(columns), len(METRIC_LABELS))
    ]
    cells: Dict[Tuple[str, str], Optional[Cell]] = {}
    for row in rows[1:]:
        if len(row) != len(columns) + 1:
            raise ConfigError(f"Malformed comparison row: {row}")
        for offset, task in enumerate(tasks):
            values = row[1 + offset * 3 : 4 + offset * 3]
            cells[(row[0], task)] = (
                None if MISSING in values else tuple(float(v) for v in values)
            )
    return cells


def collect_reports(directory: PathLike) -> List[MetricsReport]:
    """Return every evaluation report below ``directory``.

    Reports of unknown model ids are logged and skipped.
    """
    reports = []
    for path in sorted(Path(directory).rglob("eval-*.json")):
        report = read_report(path)
        if report.model not in MODELS and report.model != MODEL_RANDOM:
            _LOGGER.warning("Skipping %s: unknown model id %s", path, report.model)
            continue
        reports.append(report)
    return reports


def read_sample_table(text: str) -> Dict[str, np.ndarray]:
    """Return named sample blocks from a delimited table.

    The header names the block of every column; columns sharing a name form one
    block, in order of first appearance. Each row is one sample. Commas, tabs,
    semicolons and pipes are accepted as delimiters.

    :raises DomainError: on an empty or ragged table or a non-numeric cell
    """
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) < 2:
        raise DomainError("Sample table needs a header and at least one row")
    delimiter = next((d for d in SAMPLE_DELIMITERS if d in lines[0]), ",")
    rows = list(csv.reader(lines, delimiter=delimiter))
    header = [name.strip() for name in rows[0]]
    if any(len(row) != len(header) for row in rows[1:]):
        raise DomainError("Sample table rows do not match the header")
    try:
        data = np.array(
            [[float(value) for value in row] for row in rows[1:]], dtype=np.float64
        )
    except ValueError as err:
        raise DomainError(f"Non-numeric sample: {err}") from None
    return {
        name: data[:, [i for i, column in enumerate(header) if column == name]]
        for name in dict.fromkeys(header)
    }
