"""CSV traces, sweep grids and JSON run configurations.

Spectrum CSV::

    freq_mhz,s21_re,s21_im,s21_db

with 9 significant digits.  ``s21_db`` is ``10 log10`` of the
max-normalised power.  Power-only traces leave ``s21_re``/``s21_im``
empty and their dB column is floored at :data:`DB_FLOOR` (non-positive
noisy samples cannot be represented in dB).

Sweep CSV: header ``probe_mhz,<f_t 1>,<f_t 2>,...``, then one row per
probe frequency holding dB values.  Branch CSV: ``f_t_mhz``, one
``branchN_mhz`` column per eigen-branch, then the ``res_weightN`` columns.

All writers go through :func:`atomic_write` (temporary file, then rename).
"""
import csv
import io
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field

import numpy as np

from .params import ConfigError, SystemParams, SYSTEM_KEYS
from .spectra import DB_FLOOR, Spectrum, SweepGrid, to_db

__all__ = ["TraceFormatError", "TraceFile", "RunConfig", "SPECTRUM_HEADER", "atomic_write",
           "format_spectrum", "write_spectrum", "read_spectrum", "format_sweep", "write_sweep",
           "read_sweep", "format_branches", "write_branches", "load_config", "parse_config"]

SPECTRUM_HEADER = ("freq_mhz", "s21_re", "s21_im", "s21_db")
DIGITS = 9

OPTION_KEYS = {
    "model": str, "f_min": float, "f_max": float, "n_points": int,
    "sweep_min": float, "sweep_max": float, "sweep_steps": int,
    "hyperfine": bool, "prominence": float, "fixed": list, "n_peaks": int,
}


class TraceFormatError(ValueError):
    """A trace or sweep file cannot be parsed."""


def _fmt(x):
    return f"{x:.{DIGITS}g}"


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=os.path.basename(path), dir=folder)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ------------------------------------------------------------- spectrum

@dataclass(frozen=True)
class TraceFile:
    path: str
    spectrum: Spectrum
    format: str  # "complex" or "magnitude-dB"
    dropped: int = 0


def format_spectrum(s):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SPECTRUM_HEADER)
    db = to_db(s.power, DB_FLOOR)
    if s.s21 is None:
        for f, d in zip(s.freqs, db):
            w.writerow([_fmt(f), "", "", _fmt(d)])
    else:
        for f, z, d in zip(s.freqs, s.s21, db):
            w.writerow([_fmt(f), _fmt(z.real), _fmt(z.imag), _fmt(d)])
    return buf.getvalue()


def write_spectrum(path, s):
    atomic_write(path, format_spectrum(s))


def _number(text, row, col):
    if text.strip() == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise TraceFormatError(f"row {row}: column {col!r} is not a number: {text!r}") from None


def read_spectrum(path):
    """Parse a spectrum CSV.

    A trace whose ``s21_re``/``s21_im`` columns are filled is read as
    complex; otherwise power is recovered from ``s21_db``.  A file may
    also carry only ``freq_mhz,s21_db``.  Rows containing NaN are dropped
    with a warning giving their count.
    """
    path = os.fspath(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TraceFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if "freq_mhz" not in header:
        raise TraceFormatError(f"{path}: missing 'freq_mhz' column")
    idx = {h: i for i, h in enumerate(header)}
    has_db = "s21_db" in idx
    has_cx = "s21_re" in idx and "s21_im" in idx
    if not (has_db or has_cx):
        raise TraceFormatError(f"{path}: need 's21_db' or 's21_re'/'s21_im' columns")
    table = []
    for r, row in enumerate(rows[1:], start=2):
        if not any(c.strip() for c in row):
            continue
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        table.append([_number(row[idx[h]], r, h) if h in idx else math.nan
                      for h in SPECTRUM_HEADER])
    data = np.array(table, dtype=float).reshape(-1, 4)
    complex_fmt = has_cx and data.shape[0] > 0 and np.any(np.isfinite(data[:, 1]))
    need = [0, 1, 2] if complex_fmt else [0, 3]
    bad = ~np.all(np.isfinite(data[:, need]), axis=1)
    dropped = int(np.count_nonzero(bad))
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} row(s) containing NaN", stacklevel=2)
    data = data[~bad]
    if data.shape[0] == 0:
        raise TraceFormatError(f"{path}: no usable rows")
    f = data[:, 0]
    if f.size > 1 and not np.all(np.diff(f) > 0):
        raise TraceFormatError(f"{path}: frequencies are not strictly ascending")
    meta = {"source": path}
    if complex_fmt:
        s = Spectrum.from_s21(f, data[:, 1] + 1j * data[:, 2], meta)
        return TraceFile(path, s, "complex", dropped)
    s = Spectrum.from_power(f, 10.0 ** (data[:, 3] / 10.0), meta)
    return TraceFile(path, s, "magnitude-dB", dropped)


# ------------------------------------------------------------- sweeps

def format_sweep(grid):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["probe_mhz"] + [_fmt(v) for v in grid.sweep_values])
    for f, row in zip(grid.freqs, grid.magnitude_db):
        w.writerow([_fmt(f)] + [_fmt(v) for v in row])
    return buf.getvalue()


def write_sweep(path, grid):
    atomic_write(path, format_sweep(grid))


def read_sweep(path):
    """Parse a sweep CSV into a :class:`SweepGrid` (dB values, no branches)."""
    path = os.fspath(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if len(rows) < 2 or rows[0][0].strip() != "probe_mhz":
        raise TraceFormatError(f"{path}: expected a 'probe_mhz,<f_t>...' header and data rows")
    values = np.array([_number(c, 1, "header") for c in rows[0][1:]])
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise TraceFormatError(f"{path}: header must list the sweep values")
    width = values.size + 1
    table = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise TraceFormatError(f"{path}: row {r} has {len(row)} fields, expected {width}")
        table.append([_number(c, r, "value") for c in row])
    data = np.array(table, dtype=float)
    bad = ~np.isfinite(data[:, 0])
    dropped = int(np.count_nonzero(bad))
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} row(s) without a probe frequency", stacklevel=2)
    data = data[~bad]
    f = data[:, 0]
    if f.size > 1 and not np.all(np.diff(f) > 0):
        raise TraceFormatError(f"{path}: probe frequencies are not strictly ascending")
    db = data[:, 1:]
    return SweepGrid(values, f, db, meta={"source": path}, power=10.0 ** (db / 10.0))


def format_branches(grid):
    if grid.branches is None:
        raise ValueError("sweep grid carries no branch overlay")
    nb = grid.branches.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["f_t_mhz"] + [f"branch{k + 1}_mhz" for k in range(nb)]
               + [f"res_weight{k + 1}" for k in range(nb)])
    for v, b, rw in zip(grid.sweep_values, grid.branches, grid.resonator_weights):
        w.writerow([_fmt(v)] + [_fmt(x) for x in b] + [_fmt(x) for x in rw])
    return buf.getvalue()


def write_branches(path, grid):
    atomic_write(path, format_branches(grid))


# ------------------------------------------------------------- configs

@dataclass(frozen=True)
class RunConfig:
    """System parameters plus command options from a JSON file."""

    system: SystemParams
    options: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.options.get(key, default)


def parse_config(data):
    """Validate a decoded JSON object into a :class:`RunConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    if "system" not in data:
        raise ConfigError("missing 'system' section", key="system")
    try:
        system = SystemParams.from_dict(data["system"])
    except ConfigError as exc:
        key = f"system.{exc.key}" if exc.key else "system"
        raise ConfigError(f"{key}: {exc}", key=key) from exc
    options = {}
    for key, value in data.items():
        if key == "system":
            continue
        if key not in OPTION_KEYS:
            raise ConfigError(f"unknown option {key!r}", key=key)
        kind = OPTION_KEYS[key]
        ok = (isinstance(value, bool) if kind is bool else
              isinstance(value, int) and not isinstance(value, bool) if kind is int else
              isinstance(value, (int, float)) and not isinstance(value, bool) if kind is float
              else isinstance(value, kind))
        if not ok:
            raise ConfigError(f"option {key!r} must be {kind.__name__}, got {value!r}", key=key)
        options[key] = value
    for lo, hi in (("f_min", "f_max"), ("sweep_min", "sweep_max")):
        if lo in options and hi in options and not options[lo] < options[hi]:
            raise ConfigError(f"{lo} must be below {hi}", key=lo)
    for key in ("n_points", "sweep_steps", "n_peaks"):
        if key in options and options[key] < 1:
            raise ConfigError(f"{key} must be positive", key=key)
    for name in options.get("fixed", []):
        if name not in SYSTEM_KEYS:
            raise ConfigError(f"fixed-parameter mask names unknown key {name!r}", key="fixed")
    return RunConfig(system, options)


def load_config(path):
    """Read and validate a JSON configuration file.

    Syntax errors are reported with their line and column.
    """
    path = os.fspath(path)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    try:
        return parse_config(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}", key=exc.key) from exc
