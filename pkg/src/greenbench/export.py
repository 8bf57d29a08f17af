"""CSV export of trial logs.

Files go to ``<out_dir>/result/category_<nc>/<yyyy_mm_dd_hh_mm_ss>.csv``. The
body is one header row followed by one row per logged sample in the
category's fixed column order (see :func:`greenbench.metrics.columns_for`),
numbers written with 6 significant digits. A footer of ``# key,value`` lines
carries the metric report and, for failed trials, the cause.
"""

from __future__ import annotations

import datetime as _dt
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ExportError
from .metrics import MetricReport, TrialLog, columns_for

TIME_FORMAT = "%Y_%m_%d_%H_%M_%S"


def format_value(value: float) -> str:
    return "%.6g" % value


def render_csv(log: TrialLog, report: MetricReport | None = None, cause: str = "") -> str:
    """CSV text for ``log``; deterministic for a given log and report."""
    names = columns_for(log.category)
    log.require(*names)
    data = np.column_stack([log.columns[n] for n in names]) if len(log) else np.zeros((0, len(names)))
    lines = [",".join(names)]
    lines.extend(",".join(format_value(v) for v in row) for row in data)
    lines.append("# key,value")
    if report is not None:
        lines.extend(f"# {key},{format_value(value)}" for key, value in report.as_rows())
    else:
        lines.append(f"# N,{len(log)}")
    if cause:
        lines.append(f"# failed,{cause.replace(chr(10), ' ')}")
    return "\n".join(lines) + "\n"


def result_path(out_dir: str | Path, category: int, when: _dt.datetime) -> Path:
    return Path(out_dir) / "result" / f"category_{category}" / f"{when.strftime(TIME_FORMAT)}.csv"


def export_csv(
    log: TrialLog,
    out_dir: str | Path,
    report: MetricReport | None = None,
    *,
    cause: str = "",
    clock: Callable[[], _dt.datetime] | None = None,
) -> Path:
    """Write ``log`` under ``out_dir`` and return the file path.

    ``clock`` supplies the timestamp for the file name (wall clock by
    default). If a file with that name exists, ``_1``, ``_2``, ... is
    appended so trials finishing within the same second never overwrite
    each other.
    """
    when = (clock or _dt.datetime.now)()
    path = result_path(out_dir, log.category, when)
    text = render_csv(log, report, cause)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        candidate, n = path, 0
        while True:
            try:
                with open(candidate, "x", newline="") as fh:
                    fh.write(text)
                return candidate
            except FileExistsError:
                n += 1
                candidate = path.with_name(f"{path.stem}_{n}{path.suffix}")
    except OSError as exc:
        raise ExportError(f"cannot write results under {out_dir}: {exc}") from exc
