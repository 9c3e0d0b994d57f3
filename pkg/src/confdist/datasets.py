"""Embedded example data sets and their CSV forms."""

from __future__ import annotations

import csv
import io

import numpy as np

from .errors import ParameterError

# mileages of military personnel carriers that failed in service (Lawless 1982)
LAWLESS = (162, 200, 271, 320, 393, 508, 539, 629, 706, 777, 884, 1008, 1101,
           1182, 1463, 1603, 1984, 2355, 2880)

# cd-4 counts (hundreds) for twenty HIV-positive subjects
CD4_BASELINE = (2.12, 4.35, 3.39, 2.51, 4.04, 5.10, 3.77, 3.35, 4.10, 3.35,
                4.15, 3.56, 3.39, 1.88, 2.56, 2.96, 2.49, 3.03, 2.66, 3.00)
CD4_ONE_YEAR = (2.47, 4.61, 5.26, 3.02, 6.36, 5.93, 3.93, 4.09, 4.88, 3.81,
                4.74, 3.29, 5.55, 2.82, 4.23, 3.23, 2.56, 4.31, 4.37, 2.40)

# gastric cancer trial: survival in years; trailing '*' marks censoring
_GASTRIC_COMB = """0.05 0.12 0.12 0.13 0.16 0.20 0.20 0.26 0.28 0.30 0.33 0.39 0.46 0.47
0.50 0.51 0.53 0.53 0.54 0.57 0.64 0.64 0.70 0.84 0.86 1.10 1.22 1.27 1.33 1.45 1.48
1.55 1.58 1.59 2.18 2.34 3.74 4.32 5.64 6.61* 6.81* 7.66* 7.68* 8.04* 8.19*"""
_GASTRIC_CHEMO = """0.00 0.17 0.29 0.35 0.50 0.59 0.68 0.72 0.82 0.82 0.94 0.97 0.98 0.98
1.04 1.05 1.05 1.06 1.08 1.12 1.26 1.34 1.37 1.43 1.44 1.47 1.54 1.56 1.85 1.85 2.05
2.13 2.15 2.18 2.62 2.65 2.74 3.41 3.48 3.89 4.25 4.64 6.47 7.55* 8.08*"""


def _parse_censored(text: str):
    times, events = [], []
    for tok in text.split():
        events.append(0 if tok.endswith("*") else 1)
        times.append(float(tok.rstrip("*")))
    return np.array(times), np.array(events, dtype=bool)


def lawless() -> np.ndarray:
    return np.array(LAWLESS, dtype=float)


def cd4():
    return np.array(CD4_BASELINE), np.array(CD4_ONE_YEAR)


def gastric_combination():
    """(times, events) for the chemotherapy-plus-radiotherapy arm."""
    return _parse_censored(_GASTRIC_COMB)


def gastric_chemotherapy():
    """(times, events) for the chemotherapy-only arm."""
    return _parse_censored(_GASTRIC_CHEMO)


NAMES = ("lawless", "cd4", "gastric_comb", "gastric_chemo")


def dataset_csv(name: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if name == "lawless":
        w.writerow(["mileage"])
        for x in LAWLESS:
            w.writerow([x])
    elif name == "cd4":
        w.writerow(["baseline", "one_year"])
        for a, b in zip(CD4_BASELINE, CD4_ONE_YEAR):
            w.writerow([f"{a:.2f}", f"{b:.2f}"])
    elif name in ("gastric_comb", "gastric_chemo"):
        t, e = gastric_combination() if name == "gastric_comb" else gastric_chemotherapy()
        w.writerow(["time", "event"])
        for ti, ei in zip(t, e):
            w.writerow([f"{ti:.2f}", int(ei)])
    else:
        raise ParameterError(f"unknown dataset {name!r}; choose from {', '.join(NAMES)}")
    return buf.getvalue()


def read_survival_csv(fh):
    """Read a ``time,event`` CSV (``#`` lines ignored) into arrays."""
    lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or not {"time", "event"} <= set(reader.fieldnames):
        raise ParameterError("survival CSV needs the columns time and event")
    times, events = [], []
    for row in reader:
        try:
            times.append(float(row["time"]))
            ev = int(float(row["event"]))
        except ValueError:
            raise ParameterError(f"bad survival row {row}") from None
        if ev not in (0, 1):
            raise ParameterError(f"event must be 0 or 1, got {row['event']}")
        events.append(ev)
    return np.array(times), np.array(events, dtype=bool)


def read_values_csv(fh, column=None) -> np.ndarray:
    """Read one numeric column (the first, unless named) from a CSV with header."""
    lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if not reader.fieldnames:
        raise ParameterError("CSV has no header row")
    col = column or reader.fieldnames[0]
    if col not in reader.fieldnames:
        raise ParameterError(f"column {col!r} not found in {reader.fieldnames}")
    try:
        return np.array([float(r[col]) for r in reader])
    except ValueError as exc:
        raise ParameterError(f"non-numeric value in column {col!r}: {exc}") from None
