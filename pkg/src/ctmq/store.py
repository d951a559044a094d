"""Persistence for censuses, complexity tables and enumeration checkpoints.

Table files are line-oriented text with a fixed header block and one body
row per output string, sorted lexicographically.  Counts are exact
integers and d values reduced fractions, so a table round-trips losslessly
and two saves of the same table are byte-identical regardless of how many
workers produced it.  Checkpoints are JSON-lines files, one record per
completed shard, bound to the universe and encoding layout by a hash so
shards from different universes can never be merged silently.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .census import FrequencyDistribution, empty_distribution, merge
from .complexity import CtmTable, neg_log2_fraction
from .machine import MachineSpec, count_programs

TABLE_FORMAT_VERSION = 1
CHECKPOINT_FORMAT_VERSION = 1
# Version of the description-number bit layout; bump if row order, field
# order or move-bit polarity ever change.
ENCODING_LAYOUT_VERSION = 1

_WRITER = "ctmq"


class StoreError(ValueError):
    """Malformed, inconsistent or incompatible persisted data."""


def spec_key(spec: MachineSpec) -> str:
    """Short digest binding files to a universe and encoding layout."""
    text = (
        f"m={spec.m} n={spec.n} d={spec.d} c={spec.c} z={spec.z} "
        f"layout={ENCODING_LAYOUT_VERSION}"
    )
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _spec_to_dict(spec: MachineSpec) -> dict:
    return {"m": spec.m, "n": spec.n, "d": spec.d, "c": spec.c, "z": spec.z}


def _spec_from_dict(d: dict) -> MachineSpec:
    return MachineSpec(m=d["m"], c=d["c"], z=d["z"], n=d["n"], d=d["d"])


def _render_ctm(bits: float) -> str:
    """Fixed 12-significant-digit rendering used in table bodies."""
    return f"{bits:.11e}"


def save_table(table: CtmTable, path: str | Path) -> None:
    """Write a table in canonical form: same table, same bytes."""
    spec = table.spec
    lines = [
        f"ctmq-table {TABLE_FORMAT_VERSION}",
        f"layout {ENCODING_LAYOUT_VERSION}",
        f"writer {_WRITER}",
        f"spec-key {spec_key(spec)}",
        f"m {spec.m}",
        f"n {spec.n}",
        f"d {spec.d}",
        f"c {spec.c}",
        f"z {spec.z}",
        f"programs {table.total}",
        f"halting {table.halting_total}",
        f"nonhalting {table.nonhalting_total}",
        f"frozen {table.frozen_total}",
        f"entries {len(table.counts)}",
        "end-header",
    ]
    for s, d, bits in table.entries():
        lines.append(f"{s} {table.counts[s]} {d.numerator} {d.denominator} {_render_ctm(bits)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_table(path: str | Path) -> CtmTable:
    """Read a table file back, validating header/body reconciliation."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("ctmq-table "):
        raise StoreError(f"{path}: not a ctmq table file")
    version = int(lines[0].split()[1])
    if version != TABLE_FORMAT_VERSION:
        raise StoreError(
            f"{path}: table format version {version}, expected {TABLE_FORMAT_VERSION}"
        )
    header: dict[str, str] = {}
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        if line == "end-header":
            body_start = i + 1
            break
        key, _, value = line.partition(" ")
        header[key] = value
    if body_start is None:
        raise StoreError(f"{path}: missing end-header marker")
    if int(header["layout"]) != ENCODING_LAYOUT_VERSION:
        raise StoreError(
            f"{path}: encoding layout {header['layout']}, "
            f"expected {ENCODING_LAYOUT_VERSION}"
        )
    spec = MachineSpec(
        m=int(header["m"]),
        c=int(header["c"]),
        z=int(header["z"]),
        n=int(header["n"]),
        d=int(header["d"]),
    )
    if header.get("spec-key") != spec_key(spec):
        raise StoreError(f"{path}: spec key does not match header fields")
    halting = int(header["halting"])
    counts: dict[str, int] = {}
    previous = None
    for line in lines[body_start:]:
        if not line:
            continue
        s, count_s, num_s, den_s, ctm_s = line.split(" ")
        if previous is not None and not previous < s:
            raise StoreError(f"{path}: body rows not sorted at {s!r}")
        previous = s
        count = int(count_s)
        if count <= 0:
            raise StoreError(f"{path}: non-positive count for {s!r}")
        if Fraction(int(num_s), int(den_s)) != Fraction(count, halting):
            raise StoreError(f"{path}: d value for {s!r} does not match its count")
        if ctm_s != _render_ctm(neg_log2_fraction(count, halting)):
            raise StoreError(f"{path}: ctm value for {s!r} does not match its count")
        counts[s] = count
    if len(counts) != int(header["entries"]):
        raise StoreError(f"{path}: body has {len(counts)} rows, header says {header['entries']}")
    try:
        table = CtmTable(
            spec,
            counts,
            halting,
            int(header["nonhalting"]),
            int(header["frozen"]),
        )
    except ValueError as exc:
        raise StoreError(f"{path}: {exc}") from exc
    if table.total != int(header["programs"]):
        raise StoreError(f"{path}: program total does not reconcile")
    return table


def export_table_jsonl(table: CtmTable, path: str | Path) -> None:
    """Machine-readable twin of the table file: metadata object, then rows."""
    meta = {
        "format": "ctmq-table",
        "version": TABLE_FORMAT_VERSION,
        "layout": ENCODING_LAYOUT_VERSION,
        "spec": _spec_to_dict(table.spec),
        "spec_key": spec_key(table.spec),
        "programs": table.total,
        "halting": table.halting_total,
        "nonhalting": table.nonhalting_total,
        "frozen": table.frozen_total,
        "entries": len(table.counts),
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for s, d, bits in table.entries():
            row = {
                "string": s,
                "count": table.counts[s],
                "d_numerator": d.numerator,
                "d_denominator": d.denominator,
                "ctm": _render_ctm(bits),
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


@dataclass(frozen=True)
class Checkpoint:
    spec: MachineSpec
    shards: list[tuple[int, int, FrequencyDistribution]]

    @property
    def ranges(self) -> list[tuple[int, int]]:
        return [(lo, hi) for lo, hi, _ in self.shards]

    def merged(self) -> FrequencyDistribution:
        result = empty_distribution(self.spec)
        for _, _, dist in self.shards:
            result = merge(result, dist)
        return result

    def remaining(self, plan: list[tuple[int, int]]) -> list[tuple[int, int]]:
        """Planned ranges not yet covered by a completed shard.

        Every planned range must either match a completed shard exactly or
        be disjoint from all of them; merging across different shardings
        would double-count.
        """
        done = set(self.ranges)
        todo = []
        for lo, hi in plan:
            if (lo, hi) in done:
                continue
            for s_lo, s_hi, _ in self.shards:
                if lo < s_hi and s_lo < hi:
                    raise StoreError(
                        f"checkpoint shard [{s_lo}, {s_hi}) does not align "
                        f"with planned range [{lo}, {hi})"
                    )
            todo.append((lo, hi))
        return todo

    def is_complete(self) -> bool:
        covered = sum(hi - lo for lo, hi in self.ranges)
        return covered == count_programs(self.spec)


def _shard_record(lo: int, hi: int, dist: FrequencyDistribution) -> dict:
    return {
        "lo": lo,
        "hi": hi,
        "outputs": dist.output_counts,
        "steps": {str(k): v for k, v in dist.halted_by_step.items()},
        "halting": dist.halting_total,
        "nonhalting": dist.nonhalting_total,
        "frozen": dist.frozen_total,
    }


def _checkpoint_header(spec: MachineSpec) -> str:
    header = {
        "format": "ctmq-checkpoint",
        "version": CHECKPOINT_FORMAT_VERSION,
        "layout": ENCODING_LAYOUT_VERSION,
        "spec": _spec_to_dict(spec),
        "spec_key": spec_key(spec),
    }
    return json.dumps(header, sort_keys=True) + "\n"


def append_checkpoint_shard(
    path: str | Path,
    spec: MachineSpec,
    lo: int,
    hi: int,
    dist: FrequencyDistribution,
) -> None:
    """Append one completed shard, writing the header first if needed."""
    path = Path(path)
    new_file = not path.exists() or path.stat().st_size == 0
    with open(path, "a") as fh:
        if new_file:
            fh.write(_checkpoint_header(spec))
        fh.write(json.dumps(_shard_record(lo, hi, dist), sort_keys=True) + "\n")


def save_checkpoint(
    path: str | Path,
    spec: MachineSpec,
    shards: list[tuple[int, int, FrequencyDistribution]],
) -> None:
    Path(path).write_text(_checkpoint_header(spec))
    for lo, hi, dist in shards:
        append_checkpoint_shard(path, spec, lo, hi, dist)


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint, rejecting overlaps and foreign universes."""
    lines = [line for line in Path(path).read_text().splitlines() if line]
    if not lines:
        raise StoreError(f"{path}: empty checkpoint")
    header = json.loads(lines[0])
    if header.get("format") != "ctmq-checkpoint":
        raise StoreError(f"{path}: not a ctmq checkpoint")
    if header.get("version") != CHECKPOINT_FORMAT_VERSION:
        raise StoreError(f"{path}: checkpoint version {header.get('version')}")
    spec = _spec_from_dict(header["spec"])
    if header.get("spec_key") != spec_key(spec) or header.get("layout") != ENCODING_LAYOUT_VERSION:
        raise StoreError(f"{path}: spec key or layout mismatch")
    shards = []
    for line in lines[1:]:
        rec = json.loads(line)
        dist = FrequencyDistribution(
            spec,
            dict(rec["outputs"]),
            {int(k): v for k, v in rec["steps"].items()},
            rec["halting"],
            rec["nonhalting"],
            rec["frozen"],
        )
        if not 0 <= rec["lo"] <= rec["hi"] <= count_programs(spec):
            raise StoreError(f"{path}: shard range out of bounds")
        if dist.total != rec["hi"] - rec["lo"]:
            raise StoreError(f"{path}: shard totals do not match its range")
        shards.append((rec["lo"], rec["hi"], dist))
    shards.sort(key=lambda t: (t[0], t[1]))
    for (_, prev_hi, _), (lo, _, _) in zip(shards, shards[1:]):
        if lo < prev_hi:
            raise StoreError(f"{path}: overlapping shard ranges")
    return Checkpoint(spec, shards)
