"""Report rows and their CSV form."""

import csv
import io
import math
from dataclasses import dataclass

COLUMNS = ("quantity", "value", "expected", "provenance", "tolerance", "pass")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, str)):
        return str(x)
    return format(float(x), ".17g")


@dataclass(frozen=True)
class Row:
    """One report line.

    A row with an expected value passes when |value - expected| <= tolerance.
    Rows without an expected value are informational and always pass.
    """

    quantity: str
    value: float
    expected: float = None
    provenance: str = ""
    tolerance: float = None

    @property
    def passed(self):
        if self.expected is None:
            return True
        v = float(self.value)
        if not math.isfinite(v):
            return v == self.expected
        tol = 0.0 if self.tolerance is None else self.tolerance
        return abs(v - float(self.expected)) <= tol

    def cells(self):
        status = "info" if self.expected is None else ("pass" if self.passed else "FAIL")
        return [self.quantity, _fmt(self.value), _fmt(self.expected), self.provenance,
                _fmt(self.tolerance), status]


def rel_row(quantity, value, expected, rel, provenance):
    """Row whose tolerance is ``rel`` times |expected|."""
    return Row(quantity, float(value), float(expected), provenance, rel * abs(float(expected)))


def check_row(quantity, ok, provenance):
    """Boolean verdict row: value 1 must equal expected 1."""
    return Row(quantity, bool(ok), True, provenance, 0.0)


def info_row(quantity, value, provenance=""):
    return Row(quantity, value, None, provenance, None)


def all_passed(rows):
    return all(r.passed for r in rows)


def to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(to_csv(rows))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
