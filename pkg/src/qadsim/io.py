"""Result serialization and measurement-data import.

Tables are plain CSV with a header row and ``%.17g`` floats, so exporting
and re-importing is lossless and identical configs produce byte-identical
files.  The manifest is JSON and carries the full config echo, the seed, and
package/library versions.
"""

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import TimeTrace
from .errors import FormatError, ValidationError

FLOAT_FORMAT = "%.17g"


@dataclass
class Table:
    """A named, plot-ready table of float columns."""

    columns: list
    rows: np.ndarray

    def __post_init__(self):
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if self.rows.size and self.rows.shape[1] != len(self.columns):
            raise ValidationError(
                f"table has {self.rows.shape[1]} columns but {len(self.columns)} names"
            )

    def column(self, name):
        return self.rows[:, self.columns.index(name)].copy()


@dataclass
class ResultBundle:
    """Everything one experiment run produces."""

    manifest: dict
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


def write_table(table, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([FLOAT_FORMAT % v for v in row])


def read_table(path):
    """Read a CSV written by :func:`write_table` (or compatible)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                bad = next(
                    i for i, v in enumerate(row)
                    if not _is_float(v)
                )
                raise FormatError(
                    f"{path}: line {line_no}, column {bad + 1}: "
                    f"cannot parse {row[bad]!r} as a number"
                ) from exc
            if len(row) != len(header):
                raise FormatError(
                    f"{path}: line {line_no}: {len(row)} values for "
                    f"{len(header)} columns"
                )
    return Table([h.strip() for h in header], np.array(rows, dtype=float))


def _is_float(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def export_bundle(bundle, out_dir):
    """Write all tables as CSV plus ``manifest.json``; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, table in bundle.tables.items():
        path = out / f"{name}.csv"
        write_table(table, path)
        paths.append(path)
    manifest = dict(bundle.manifest)
    manifest["summary"] = _jsonable(bundle.summary)
    manifest["tables"] = sorted(bundle.tables)
    mpath = out / "manifest.json"
    with open(mpath, "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(mpath)
    return paths


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    return value


def base_manifest(config_echo, seed, experiment):
    import scipy

    return {
        "experiment": experiment,
        "seed": seed,
        "config": config_echo,
        "versions": {
            "qadsim": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "created_unix_time": time.time(),
    }


# ---------------------------------------------------------------------------
# Measurement-trace import
# ---------------------------------------------------------------------------

def import_trace_data(path, resample_points=None):
    """Read probe traces from a CSV file.

    The first column is time (seconds), each further column one trace.  The
    time column must be strictly increasing; non-uniform grids are accepted
    only with ``resample_points`` (linear interpolation onto a uniform grid).
    Returns one :class:`TimeTrace` per data column.
    """
    table = read_table(path)
    if len(table.columns) < 2:
        raise FormatError(f"{path}: need a time column plus at least one trace column")
    if table.rows.shape[0] < 2:
        raise FormatError(f"{path}: need at least two samples per trace")
    times = table.rows[:, 0]
    diffs = np.diff(times)
    bad = np.flatnonzero(diffs <= 0)
    if bad.size:
        raise FormatError(
            f"{path}: line {bad[0] + 3}: time column not strictly increasing "
            f"({times[bad[0] + 1]!r} after {times[bad[0]]!r})"
        )
    values = table.rows[:, 1:]
    uniform = np.max(np.abs(diffs - diffs[0])) <= 1e-9 * max(abs(times[-1]), diffs[0])
    if not uniform:
        if resample_points is None:
            raise FormatError(
                f"{path}: time grid is not uniform; pass resample_points to interpolate"
            )
        new_times = np.linspace(times[0], times[-1], int(resample_points))
        values = np.column_stack(
            [np.interp(new_times, times, values[:, j]) for j in range(values.shape[1])]
        )
        times = new_times
    elif resample_points is not None and int(resample_points) != times.size:
        new_times = np.linspace(times[0], times[-1], int(resample_points))
        values = np.column_stack(
            [np.interp(new_times, times, values[:, j]) for j in range(values.shape[1])]
        )
        times = new_times
    return [
        TimeTrace(times.copy(), values[:, j], check_bounds=False)
        for j in range(values.shape[1])
    ]


def traces_to_table(traces, names=None):
    """Pack traces sharing one grid into a ``t`` + per-trace-column table."""
    if not traces:
        raise ValidationError("no traces to export")
    for tr in traces[1:]:
        if not traces[0].same_grid(tr):
            raise ValidationError("traces must share one time grid")
    if names is None:
        names = [f"pe_{i + 1}" for i in range(len(traces))]
    cols = ["t"] + list(names)
    rows = np.column_stack([traces[0].times] + [tr.pe for tr in traces])
    return Table(cols, rows)
