"""Exhaustive halting census over all programs of a machine universe.

The census runs every description number of a :class:`~ctmq.machine.MachineSpec`
for at most ``z`` steps and tallies, with exact integer counts: how many
machines halt (and on which step, and with which final tape), how many are
still running at the budget, and how many froze in a spurious state.

The scan is vectorized with numpy over contiguous index ranges and is
embarrassingly parallel: shard results merge by plain addition, so the
outcome is identical for any worker count or shard plan.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .machine import MachineSpec, count_programs

# Index arithmetic inside a shard uses uint64; larger universes (m >= 7 at
# n=2) can still be counted, decoded and run one-off, just not censused.
MAX_ENUMERABLE_BITS = 63

_CHUNK = 1 << 19


@dataclass(frozen=True)
class FrequencyDistribution:
    """Exact halting/output tallies for a contiguous slice of programs."""

    spec: MachineSpec
    output_counts: dict[str, int]
    halted_by_step: dict[int, int]
    halting_total: int
    nonhalting_total: int
    frozen_total: int

    def __post_init__(self) -> None:
        if sum(self.output_counts.values()) != self.halting_total:
            raise ValueError("output counts do not sum to the halting total")
        if sum(self.halted_by_step.values()) != self.halting_total:
            raise ValueError("step histogram does not sum to the halting total")
        if any(k > self.spec.z for k in self.halted_by_step):
            raise ValueError("step histogram extends beyond the step budget")

    @property
    def total(self) -> int:
        return self.halting_total + self.nonhalting_total + self.frozen_total


def empty_distribution(spec: MachineSpec) -> FrequencyDistribution:
    return FrequencyDistribution(spec, {}, {}, 0, 0, 0)


def merge(a: FrequencyDistribution, b: FrequencyDistribution) -> FrequencyDistribution:
    """Componentwise sum of two shard censuses (same spec, disjoint ranges)."""
    if a.spec != b.spec:
        raise ValueError(f"spec mismatch: {a.spec} vs {b.spec}")
    outputs = dict(a.output_counts)
    for s, count in b.output_counts.items():
        outputs[s] = outputs.get(s, 0) + count
    steps = dict(a.halted_by_step)
    for k, count in b.halted_by_step.items():
        steps[k] = steps.get(k, 0) + count
    return FrequencyDistribution(
        a.spec,
        outputs,
        steps,
        a.halting_total + b.halting_total,
        a.nonhalting_total + b.nonhalting_total,
        a.frozen_total + b.frozen_total,
    )


def decode_rule_arrays(
    indices: np.ndarray, spec: MachineSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized row decode: (next_state, move, write) uint8 arrays of
    shape ``(len(indices), m*n)``, row ``q*n + r`` per program."""
    idx = np.asarray(indices, dtype=np.uint64)
    w = spec.row_width
    shifts = (np.arange(spec.num_rows, dtype=np.uint64) * np.uint64(w))[None, :]
    rows = (idx[:, None] >> shifts) & np.uint64((1 << w) - 1)
    write_tab = (rows & np.uint64(spec.n - 1)).astype(np.uint8)
    move_tab = ((rows >> np.uint64(spec.symbol_bits)) & np.uint64(1)).astype(np.uint8)
    next_tab = (rows >> np.uint64(spec.symbol_bits + spec.d)).astype(np.uint8)
    return next_tab, move_tab, write_tab


def _scan_chunk(spec: MachineSpec, lo: int, hi: int, acc: "_Accumulator") -> None:
    m, n, c, z = spec.m, spec.n, spec.c, spec.z
    count = hi - lo
    next_tab, move_tab, write_tab = decode_rule_arrays(
        np.arange(lo, hi, dtype=np.uint64), spec
    )

    state = np.full(count, spec.initial_state, dtype=np.uint8)
    head = np.zeros(count, dtype=np.int32)
    tape = np.zeros((count, c), dtype=np.uint8)
    halt_step = np.full(count, -1, dtype=np.int32)
    frozen = 0

    if spec.initial_state == spec.halt_state:  # m = 1: born halted
        halt_step[:] = 0
        alive = np.empty(0, dtype=np.int64)
    else:
        alive = np.arange(count, dtype=np.int64)

    for k in range(1, z + 1):
        if alive.size == 0:
            break
        h = head[alive]
        r = tape[alive, h]
        row = state[alive].astype(np.int64) * n + r
        nxt = next_tab[alive, row]
        tape[alive, h] = write_tab[alive, row]
        head[alive] = (h + (move_tab[alive, row].astype(np.int32) * 2 - 1)) % c
        state[alive] = nxt
        done = (nxt == spec.halt_state) | (nxt >= m)
        if done.any():
            halted = alive[nxt == spec.halt_state]
            halt_step[halted] = k
            frozen += int(np.count_nonzero(nxt >= m))
            alive = alive[~done]

    halted_mask = halt_step >= 0
    n_halted = int(np.count_nonzero(halted_mask))
    if n_halted:
        weights = (np.uint64(1) << np.arange(c - 1, -1, -1, dtype=np.uint64))
        keys = tape[halted_mask].astype(np.uint64) @ weights
        values, key_counts = np.unique(keys, return_counts=True)
        for v, kc in zip(values.tolist(), key_counts.tolist()):
            s = format(v, f"0{c}b")
            acc.outputs[s] = acc.outputs.get(s, 0) + kc
        step_hist = np.bincount(halt_step[halted_mask], minlength=z + 1)
        for k, kc in enumerate(step_hist.tolist()):
            if kc:
                acc.steps[k] = acc.steps.get(k, 0) + kc
    acc.halting += n_halted
    acc.frozen += frozen
    acc.nonhalting += count - n_halted - frozen


@dataclass
class _Accumulator:
    outputs: dict[str, int] = field(default_factory=dict)
    steps: dict[int, int] = field(default_factory=dict)
    halting: int = 0
    nonhalting: int = 0
    frozen: int = 0


def enumerate_range(spec: MachineSpec, lo: int, hi: int) -> FrequencyDistribution:
    """Census of programs with indices in ``[lo, hi)``."""
    total = count_programs(spec)
    if not 0 <= lo <= hi <= total:
        raise ValueError(f"invalid index range [{lo}, {hi}) for P={total}")
    if hi > 0 and (hi - 1).bit_length() > MAX_ENUMERABLE_BITS:
        raise ValueError(
            f"universe too large to census: indices up to {hi - 1} exceed "
            f"{MAX_ENUMERABLE_BITS}-bit shard arithmetic"
        )
    acc = _Accumulator()
    for a in range(lo, hi, _CHUNK):
        _scan_chunk(spec, a, min(a + _CHUNK, hi), acc)
    return FrequencyDistribution(
        spec, acc.outputs, acc.steps, acc.halting, acc.nonhalting, acc.frozen
    )


def _shard_worker(args: tuple[MachineSpec, int, int]) -> FrequencyDistribution:
    spec, lo, hi = args
    return enumerate_range(spec, lo, hi)


def shard_plan(spec: MachineSpec, shards: int) -> list[tuple[int, int]]:
    """Contiguous, equal-as-possible partition of [0, P) into index ranges."""
    total = count_programs(spec)
    shards = max(1, min(shards, total))
    bounds = [total * i // shards for i in range(shards + 1)]
    return [(bounds[i], bounds[i + 1]) for i in range(shards)]


def enumerate_machines(
    spec: MachineSpec,
    workers: int = 1,
    ranges: Sequence[tuple[int, int]] | None = None,
    on_shard: Callable[[int, int, FrequencyDistribution], None] | None = None,
) -> FrequencyDistribution:
    """Census of the whole universe (or of ``ranges``, when resuming).

    ``on_shard`` is invoked with every completed ``(lo, hi, distribution)``
    shard, in deterministic shard order, so callers can checkpoint partial
    progress.  The merged result is independent of ``workers``.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if ranges is None:
        ranges = shard_plan(spec, workers * 4 if workers > 1 else 1)
    result = empty_distribution(spec)
    if workers == 1 or len(ranges) <= 1:
        for lo, hi in ranges:
            dist = enumerate_range(spec, lo, hi)
            if on_shard is not None:
                on_shard(lo, hi, dist)
            result = merge(result, dist)
        return result
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for (lo, hi), dist in zip(
            ranges, pool.map(_shard_worker, [(spec, lo, hi) for lo, hi in ranges])
        ):
            if on_shard is not None:
                on_shard(lo, hi, dist)
            result = merge(result, dist)
    return result
