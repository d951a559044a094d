"""Binary-encoded Turing machines on a fixed-length cyclic tape.

A machine universe is fixed by a :class:`MachineSpec` (state count ``m``,
symbol count ``n``, tape dimension ``d``, tape length ``c``, step budget
``z``).  Every machine of the universe is identified by a single integer
description number; :func:`decode_program` / :func:`encode_program` convert
between that number and an explicit transition table, and :func:`run`
executes a machine deterministically for at most ``z`` steps.

Conventions (fixed so that results are reproducible bit-for-bit):

* state 0 is the halting state of enumerated machines; in the halting state
  a machine rewrites the symbol it read and moves left, so the tape is
  frozen from the first halt onwards,
* enumerated machines start in the highest valid state ``m - 1`` (the
  all-ones state-register pattern whenever ``m`` is a power of two) on an
  all-zero tape with the head on cell 0,
* the tape is cyclic: moves wrap modulo ``c``,
* states are stored in ``ceil(log2 m)`` bits, so for ``m`` not a power of
  two some encodable next-state values do not name a real state.  Entering
  such a spurious state freezes the machine: its configuration never
  changes again and it counts as non-halting.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Sequence

MOVE_LEFT = 0
MOVE_RIGHT = 1


def _ceil_log2(x: int) -> int:
    return (x - 1).bit_length()


@dataclass(frozen=True)
class MachineSpec:
    """Hyper-parameters of one enumeration universe.

    ``n`` (symbols) and ``d`` (tape dimension) accept only the binary
    1-dimensional case in this version; the fields exist so that file
    headers and resource formulas spell out the full tuple.
    """

    m: int
    c: int
    z: int
    n: int = 2
    d: int = 1

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"state count m must be >= 1, got {self.m}")
        if self.c < 1:
            raise ValueError(f"tape length c must be >= 1, got {self.c}")
        if self.z < 1:
            raise ValueError(f"iteration limit z must be >= 1, got {self.z}")
        if self.n != 2:
            raise ValueError(f"only n=2 symbols supported, got {self.n}")
        if self.d != 1:
            raise ValueError(f"only d=1 tape dimension supported, got {self.d}")

    @property
    def state_bits(self) -> int:
        return _ceil_log2(self.m)

    @property
    def symbol_bits(self) -> int:
        return _ceil_log2(self.n)

    @property
    def head_bits(self) -> int:
        return _ceil_log2(self.c)

    @property
    def row_width(self) -> int:
        """Bits per transition-table row: next state, move, write."""
        return self.state_bits + self.symbol_bits + self.d

    @property
    def num_rows(self) -> int:
        return self.m * self.n

    @property
    def halt_state(self) -> int:
        return 0

    @property
    def initial_state(self) -> int:
        # Highest valid state; equals the all-ones state-register pattern
        # when m is a power of two.  The literal all-ones pattern would be
        # spurious for other m and freeze every machine at birth.
        return self.m - 1


def count_programs(spec: MachineSpec) -> int:
    """Number of description numbers: 2^(m*n*(state_bits+symbol_bits+d))."""
    return 1 << (spec.num_rows * spec.row_width)


class TransitionRule(NamedTuple):
    next_state: int
    move: int
    write: int


@dataclass(frozen=True)
class TransitionTable:
    """Decoded rule table: one row per (state, symbol) pair.

    Row ``q*n + r`` answers "in state ``q`` reading symbol ``r``".  Rows are
    stored verbatim from the encoding, so ``next_state`` may name a spurious
    state.  The designated ``halt_state`` overrides its stored rows: it
    loops on itself, rewrites the symbol it read and moves left.
    """

    m: int
    n: int
    rows: tuple[TransitionRule, ...]
    halt_state: int = 0

    def __post_init__(self) -> None:
        if len(self.rows) != self.m * self.n:
            raise ValueError(
                f"expected {self.m * self.n} rows, got {len(self.rows)}"
            )
        if not 0 <= self.halt_state < self.m:
            raise ValueError(f"halt state {self.halt_state} out of range")

    def rule(self, state: int, symbol: int) -> TransitionRule:
        return self.rows[state * self.n + symbol]

    def effective_rule(self, state: int, symbol: int) -> TransitionRule | None:
        """Rule actually applied in ``state`` reading ``symbol``.

        Returns ``None`` for spurious states (frozen: identity transform).
        """
        if state == self.halt_state:
            return TransitionRule(self.halt_state, MOVE_LEFT, symbol)
        if state >= self.m:
            return None
        return self.rule(state, symbol)


def decode_program(index: int, spec: MachineSpec) -> TransitionTable:
    """Decode a description number into its transition table.

    Bit layout: row (q, r) occupies bits ``[(q*n+r)*w, (q*n+r+1)*w)`` of the
    index, ``w = row_width``, so higher states and higher read symbols sit
    in more significant bits.  Within a row the write field is least
    significant, then the move bit (0 = left, 1 = right), then the next
    state.
    """
    if not 0 <= index < count_programs(spec):
        raise ValueError(f"program index {index} out of range for {spec}")
    w = spec.row_width
    row_mask = (1 << w) - 1
    write_mask = (1 << spec.symbol_bits) - 1
    move_mask = (1 << spec.d) - 1
    rows = []
    for rank in range(spec.num_rows):
        bits = (index >> (rank * w)) & row_mask
        write = bits & write_mask
        move = (bits >> spec.symbol_bits) & move_mask
        next_state = bits >> (spec.symbol_bits + spec.d)
        rows.append(TransitionRule(next_state, move, write))
    return TransitionTable(spec.m, spec.n, tuple(rows))


def encode_program(table: TransitionTable, spec: MachineSpec) -> int:
    """Inverse of :func:`decode_program`; validates field widths."""
    if table.m != spec.m or table.n != spec.n:
        raise ValueError("table shape does not match spec")
    index = 0
    w = spec.row_width
    for rank, rule in enumerate(table.rows):
        if not 0 <= rule.next_state < (1 << spec.state_bits):
            raise ValueError(f"row {rank}: next state {rule.next_state} too wide")
        if not 0 <= rule.move < (1 << spec.d):
            raise ValueError(f"row {rank}: move {rule.move} not a direction bit")
        if not 0 <= rule.write < spec.n:
            raise ValueError(f"row {rank}: write symbol {rule.write} out of range")
        bits = (rule.next_state << (spec.symbol_bits + spec.d)) | (
            rule.move << spec.symbol_bits
        ) | rule.write
        index |= bits << (rank * w)
    return index


@dataclass(frozen=True)
class MachineConfig:
    state: int
    head: int
    tape: tuple[int, ...]
    step: int = 0


def step(config: MachineConfig, table: TransitionTable, spec: MachineSpec) -> MachineConfig:
    """One atomic machine step: read, look up the rule, write, move.

    Total function: the halting state applies its fixed rule, spurious
    states return the configuration unchanged.
    """
    rule = table.effective_rule(config.state, config.tape[config.head])
    if rule is None:
        return config
    tape = config.tape
    if rule.write != tape[config.head]:
        mutable = list(tape)
        mutable[config.head] = rule.write
        tape = tuple(mutable)
    head = (config.head + (1 if rule.move == MOVE_RIGHT else -1)) % spec.c
    return MachineConfig(rule.next_state, head, tape, config.step + 1)


class RunStatus(enum.Enum):
    HALTED = "halted"
    RUNNING = "running"
    FROZEN = "frozen"


@dataclass(frozen=True)
class RunOutcome:
    status: RunStatus
    step: int
    final_tape: str
    final_state: int

    @property
    def halted(self) -> bool:
        return self.status is RunStatus.HALTED


def _parse_tape(tape: str | Sequence[int], c: int) -> list[int]:
    cells = [int(x) for x in tape]
    if len(cells) != c:
        raise ValueError(f"initial tape length {len(cells)} != c={c}")
    if any(x not in (0, 1) for x in cells):
        raise ValueError("tape symbols must be 0 or 1")
    return cells


def run_table(
    table: TransitionTable,
    spec: MachineSpec,
    initial_tape: str | Sequence[int] | None = None,
    initial_state: int | None = None,
) -> RunOutcome:
    """Run an explicit transition table for at most ``z`` steps.

    Reports the first step at which the machine sits in its halting state
    (step 0 if it starts there), the step at which it entered a spurious
    state, or that it was still running when the budget ran out.
    """
    tape = [0] * spec.c if initial_tape is None else _parse_tape(initial_tape, spec.c)
    state = spec.initial_state if initial_state is None else initial_state
    head = 0
    n = spec.n

    def outcome(status: RunStatus, k: int) -> RunOutcome:
        return RunOutcome(status, k, "".join(map(str, tape)), state)

    if state == table.halt_state:
        return outcome(RunStatus.HALTED, 0)
    if state >= table.m:
        return outcome(RunStatus.FROZEN, 0)
    rows = table.rows
    c = spec.c
    for k in range(1, spec.z + 1):
        read = tape[head]
        next_state, move, write = rows[state * n + read]
        tape[head] = write
        head = (head + 1) % c if move == MOVE_RIGHT else (head - 1) % c
        state = next_state
        if state == table.halt_state:
            return outcome(RunStatus.HALTED, k)
        if state >= table.m:
            return outcome(RunStatus.FROZEN, k)
    return outcome(RunStatus.RUNNING, spec.z)


def run(
    index: int,
    spec: MachineSpec,
    initial_tape: str | Sequence[int] | None = None,
) -> RunOutcome:
    """Run one enumerated machine from the standard start configuration."""
    return run_table(decode_program(index, spec), spec, initial_tape)
