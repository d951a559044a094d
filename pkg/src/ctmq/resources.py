"""Closed-form qubit budgets for the superposed-machine circuit.

All register widths are ceil-log2 sizes, so the total is an affine
function of the iteration count: a base covering the program, state,
move, head, read, write and tape registers, plus one history record of
``ceil(log2 m) + ceil(log2 n)`` qubits for every iteration past the first.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable


def _clog2(x: int) -> int:
    if x < 1:
        raise ValueError("width argument must be >= 1")
    return (x - 1).bit_length()


@dataclass(frozen=True)
class ResourceEstimate:
    """Register widths and the affine total ``base + slope * (z - 1)``."""

    m: int
    n: int
    d: int
    c: int
    q_a: int
    widths: dict[str, int]
    base: int
    slope: int

    def total(self, z: int) -> int:
        if z < 1:
            raise ValueError("z must be >= 1")
        return self.base + self.slope * (z - 1)


def estimate(m: int, c: int, n: int = 2, d: int = 1, q_a: int = 0) -> ResourceEstimate:
    if min(m, c, n, d) < 1 or q_a < 0:
        raise ValueError("m, c, n, d must be >= 1 and q_a >= 0")
    widths = {
        "program": m * n * (_clog2(m) + _clog2(n) + d),
        "state": _clog2(m),
        "move": d,
        "head": _clog2(c),
        "read": _clog2(n),
        "write": _clog2(n),
        "tape": c * _clog2(n),
        "history_per_step": _clog2(m) + _clog2(n),
        "ancilla": q_a,
    }
    base = (
        widths["program"]
        + widths["state"]
        + widths["move"]
        + widths["head"]
        + widths["read"]
        + widths["write"]
        + widths["tape"]
        + widths["ancilla"]
    )
    return ResourceEstimate(m, n, d, c, q_a, widths, base, widths["history_per_step"])


def qubit_count(m: int, c: int, z: int, n: int = 2, d: int = 1, q_a: int = 0) -> int:
    """Total qubits to run ``z`` iterations with the history kept whole."""
    return estimate(m, c, n=n, d=d, q_a=q_a).total(z)


def growth_rows(
    m_values: Iterable[int],
    c_values: Iterable[int],
    z: int,
    n: int = 2,
    d: int = 1,
    q_a: int = 0,
) -> list[dict[str, int]]:
    """Qubit totals over a grid of state counts and tape lengths."""
    m_values = list(m_values)
    c_values = list(c_values)
    if not m_values or not c_values:
        raise ValueError("m and c ranges must be nonempty")
    rows = []
    for m in m_values:
        for c in c_values:
            rows.append(
                {
                    "m": m,
                    "c": c,
                    "z": z,
                    "q_a": q_a,
                    "qubits": qubit_count(m, c, z, n=n, d=d, q_a=q_a),
                }
            )
    return rows


def growth_csv(rows: list[dict[str, int]]) -> str:
    out = io.StringIO()
    out.write("m,c,z,q_a,qubits\n")
    for row in rows:
        out.write(f"{row['m']},{row['c']},{row['z']},{row['q_a']},{row['qubits']}\n")
    return out.getvalue()
