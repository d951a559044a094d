"""Complexity estimates from a halting census.

``d_value`` is the exact output frequency of a string among halting
machines, kept as a rational so that aggregation never rounds;
``ctm`` is its negative base-2 logarithm in bits, taken only at the very
end.  ``bdm`` extends the estimate to strings longer than the tape by
decomposing them into table-sized blocks, and ``fit_decay`` models how the
number of newly-halting machines falls off with the step index.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .census import FrequencyDistribution
from .machine import MachineSpec, count_programs


class NotInTableError(KeyError):
    """A queried string was never produced by any halting machine."""


def neg_log2_fraction(numerator: int, denominator: int) -> float:
    """-log2(numerator/denominator) for positive integers, in bits.

    Reduces the fraction first so that equal rationals always map to the
    identical float, no matter how callers scaled them.
    """
    if numerator <= 0 or denominator <= 0:
        raise ValueError("fraction must be positive")
    g = math.gcd(numerator, denominator)
    return math.log2(denominator // g) - math.log2(numerator // g)


def _check_string(s: str, c: int) -> str:
    if len(s) != c:
        raise ValueError(f"string {s!r} has length {len(s)}, table strings have {c}")
    if set(s) - {"0", "1"}:
        raise ValueError(f"string {s!r} is not binary")
    return s


def d_value(dist: FrequencyDistribution, s: str) -> Fraction:
    """Halting machines producing ``s`` over all halting machines, exact."""
    _check_string(s, dist.spec.c)
    if dist.halting_total == 0:
        raise ValueError("no machine halts in this census; d is undefined")
    return Fraction(dist.output_counts.get(s, 0), dist.halting_total)


def ctm(dist: FrequencyDistribution, s: str) -> float:
    """Complexity estimate -log2(d(s)) in bits."""
    value = d_value(dist, s)
    if value == 0:
        raise NotInTableError(s)
    return neg_log2_fraction(value.numerator, value.denominator)


@dataclass(frozen=True)
class CtmTable:
    """Lookup table of complexity estimates plus the census totals.

    Totals ride along so that persisted tables reconcile: counts over all
    entries must sum to ``halting_total`` and the three totals to the
    program count of the universe.
    """

    spec: MachineSpec
    counts: dict[str, int]
    halting_total: int
    nonhalting_total: int
    frozen_total: int

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.halting_total:
            raise ValueError("entry counts do not sum to the halting total")
        if self.total != count_programs(self.spec):
            raise ValueError("status totals do not sum to the program count")

    @classmethod
    def from_distribution(cls, dist: FrequencyDistribution) -> "CtmTable":
        return cls(
            dist.spec,
            dict(dist.output_counts),
            dist.halting_total,
            dist.nonhalting_total,
            dist.frozen_total,
        )

    @property
    def total(self) -> int:
        return self.halting_total + self.nonhalting_total + self.frozen_total

    @property
    def coverage(self) -> float:
        """Fraction of all length-c strings present in the table."""
        return len(self.counts) / (1 << self.spec.c)

    def __contains__(self, s: str) -> bool:
        return s in self.counts

    def d_value(self, s: str) -> Fraction:
        _check_string(s, self.spec.c)
        if self.halting_total == 0:
            raise ValueError("no machine halts in this census; d is undefined")
        return Fraction(self.counts.get(s, 0), self.halting_total)

    def ctm(self, s: str) -> float:
        _check_string(s, self.spec.c)
        count = self.counts.get(s, 0)
        if count == 0:
            raise NotInTableError(s)
        return neg_log2_fraction(count, self.halting_total)

    def entries(self) -> list[tuple[str, Fraction, float]]:
        """(string, d, ctm) rows in lexicographic string order."""
        return [(s, self.d_value(s), self.ctm(s)) for s in sorted(self.counts)]


def build_table(dist: FrequencyDistribution) -> CtmTable:
    return CtmTable.from_distribution(dist)


@dataclass(frozen=True)
class BdmResult:
    value: float
    blocks: list[tuple[str, int, float]]  # (block, occurrences, ctm)
    missing: list[tuple[str, int]]  # blocks absent from the table

    @property
    def skipped(self) -> int:
        return sum(count for _, count in self.missing)


def _decompose(s: str, block: int, mode: str, stride: int) -> list[str]:
    if mode == "partition":
        return [s[i : i + block] for i in range(0, len(s) - block + 1, block)]
    if mode == "sliding":
        if stride < 1:
            raise ValueError("stride must be >= 1")
        return [s[i : i + block] for i in range(0, len(s) - block + 1, stride)]
    raise ValueError(f"unknown decomposition mode {mode!r}")


def bdm_detail(
    s: str,
    table: CtmTable,
    block: int | None = None,
    mode: str = "partition",
    stride: int = 1,
    multiplicity: bool = False,
    lenient: bool = False,
) -> BdmResult:
    """Block decomposition with the per-block breakdown.

    ``mode="partition"`` cuts ``s`` into consecutive blocks and drops a
    trailing remainder shorter than the block; ``mode="sliding"`` walks a
    window with the given stride.  With ``multiplicity`` each distinct
    block contributes ``ctm + log2(occurrences)`` once, otherwise every
    occurrence contributes its full ctm value.

    Blocks absent from the table raise :class:`NotInTableError` unless
    ``lenient``, in which case they are skipped and reported.
    """
    if set(s) - {"0", "1"}:
        raise ValueError("input string is not binary")
    if block is None:
        block = table.spec.c
    if block != table.spec.c:
        raise ValueError(
            f"block size {block} does not match table string length {table.spec.c}"
        )
    if len(s) < block:
        raise ValueError(f"string shorter than one block ({len(s)} < {block})")
    occurrences = Counter(_decompose(s, block, mode, stride))
    missing = sorted(
        (b, count) for b, count in occurrences.items() if b not in table
    )
    if missing and not lenient:
        raise NotInTableError(
            "blocks missing from table: " + ", ".join(b for b, _ in missing)
        )
    rows = []
    value = 0.0
    for b in sorted(occurrences):
        if b not in table:
            continue
        count = occurrences[b]
        bits = table.ctm(b)
        rows.append((b, count, bits))
        value += bits + math.log2(count) if multiplicity else count * bits
    return BdmResult(value, rows, missing)


def bdm(
    s: str,
    table: CtmTable,
    block: int | None = None,
    mode: str = "partition",
    stride: int = 1,
    multiplicity: bool = False,
    lenient: bool = False,
) -> float:
    return bdm_detail(s, table, block, mode, stride, multiplicity, lenient).value


@dataclass(frozen=True)
class DecayFit:
    """Exponential model count(k) ~ alpha * exp(-lam * k) of halting steps."""

    alpha: float
    lam: float

    def tail_probability(self, z_limit: int) -> float:
        """Modelled probability of halting after step ``z_limit``.

        Geometric tail of the fitted distribution normalised over steps
        >= 1, which collapses to exp(-lam * z_limit).
        """
        if z_limit < 0:
            raise ValueError("z_limit must be >= 0")
        return math.exp(-self.lam * z_limit)


def fit_decay(hist_or_dist: FrequencyDistribution | dict[int, int]) -> DecayFit:
    """Least-squares fit of log-counts vs halting step, steps >= 1.

    Needs at least two strictly positive histogram entries past step 0 and
    an overall downward slope.
    """
    hist = (
        hist_or_dist.halted_by_step
        if isinstance(hist_or_dist, FrequencyDistribution)
        else hist_or_dist
    )
    points = sorted((k, v) for k, v in hist.items() if k >= 1 and v > 0)
    if len(points) < 2:
        raise ValueError(
            f"need at least 2 positive halting-step counts past step 0, "
            f"got {len(points)}"
        )
    ks = np.array([k for k, _ in points], dtype=float)
    logs = np.log([v for _, v in points])
    slope, intercept = np.polyfit(ks, logs, 1)
    if slope >= 0:
        raise ValueError("halting-step histogram does not decay")
    return DecayFit(alpha=float(np.exp(intercept)), lam=float(-slope))


def entropy(s: str) -> float:
    """Shannon entropy of the symbol frequencies of ``s``, in bits."""
    if not s:
        raise ValueError("entropy of the empty string is undefined")
    total = len(s)
    h = 0.0
    for count in Counter(s).values():
        p = count / total
        h -= p * math.log2(p)
    return h
