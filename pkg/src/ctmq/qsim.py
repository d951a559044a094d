"""Simulation of all machines of a universe evolving in superposition.

One machine step is the block sequence Read, Delta, Write, Move, Reset on
the register file laid out by :class:`RegisterLayout`:

* Read XORs the tape cell under the head into the clean read register,
* Delta looks the (state, read) row up in the program register, XORs the
  row's write symbol and move bit into their clean registers, deposits
  (previous state, read symbol) into the next history slot and replaces
  the state register with the row's next state,
* Write XORs read^write into the tape cell under the head (turning the
  cell from the read symbol into the write symbol),
* Move advances the head by one cell, cyclically,
* Reset recomputes (write, move, read) from the history slot and the
  program register and XORs them back to zero, leaving state, tape and
  head advanced and the scratch registers clean for the next step.

Every block is a permutation of computational basis states, which yields
the two backends: the permutation backend tracks each program's branch as
concrete register values with an exact rational weight, and the dense
state-vector backend applies the same blocks as index permutations of an
amplitude array, validating the register-level design at small sizes.

Two conventions keep the blocks reversible where the classical semantics
look lossy.  Branches sitting in a spurious state are left untouched by
every block; since they never deposit history, they can never collide with
a branch that just transitioned into the same configuration, which always
has a non-trivial record (a slot is all-zero only for the halting state
reading 0, whose scratch is identically zero anyway).  And the first step
of a stage deposits no slot: its pre-step state and read symbol are the
stage's preparation values, which the staged protocol knows classically.

Write and Move run after Delta has advanced the state register, so they
cannot use it to tell frozen branches apart from branches that froze just
now (whose write and move still belong to this step).  They condition on
the step's history record instead: non-empty means live, and the all-zero
ambiguity is resolved by the state register still holding the halting
state, the only live way to deposit an empty record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .census import decode_rule_arrays
from .complexity import NotInTableError, neg_log2_fraction
from .machine import MachineSpec, count_programs

DENSE_QUBIT_LIMIT = 26


class HistoryExhaustedError(RuntimeError):
    """All history slots of the stage are used; restart required."""


class ScratchError(RuntimeError):
    """Step/reset ordering contract violated, or uncomputation failed."""


@dataclass(frozen=True)
class RegisterLayout:
    """Qubit widths and bit offsets of every register, program first."""

    spec: MachineSpec
    z_ch: int
    widths: dict[str, int]
    offsets: dict[str, int]
    total: int

    @property
    def slots(self) -> int:
        return self.z_ch - 1

    @property
    def slot_width(self) -> int:
        return self.spec.state_bits + self.spec.symbol_bits

    def slot_offset(self, k: int) -> int:
        return self.offsets["history"] + k * self.slot_width

    def tape_offset(self, cell: int) -> int:
        return self.offsets["tape"] + cell * self.spec.symbol_bits


_REGISTER_ORDER = (
    "program", "state", "move", "head", "read", "write", "tape", "history", "ancilla",
)


def build_layout(spec: MachineSpec, z_ch: int, q_a: int = 0) -> RegisterLayout:
    """Register file for ``z_ch`` steps per stage plus ``q_a`` ancillas."""
    if z_ch < 1:
        raise ValueError("z_ch must be >= 1")
    if q_a < 0:
        raise ValueError("q_a must be >= 0")
    widths = {
        "program": spec.num_rows * spec.row_width,
        "state": spec.state_bits,
        "move": spec.d,
        "head": spec.head_bits,
        "read": spec.symbol_bits,
        "write": spec.symbol_bits,
        "tape": spec.c * spec.symbol_bits,
        "history": (z_ch - 1) * (spec.state_bits + spec.symbol_bits),
        "ancilla": q_a,
    }
    offsets = {}
    position = 0
    for name in _REGISTER_ORDER:
        offsets[name] = position
        position += widths[name]
    return RegisterLayout(spec, z_ch, widths, offsets, position)


class PermutationEnsemble:
    """Branch-per-program representation of the superposed run.

    Register values are concrete per branch; weights are exact rationals
    that only change under sampled stage restarts.  All transforms are
    basis-state permutations, so the branch count never changes.
    """

    def __init__(self, spec: MachineSpec, layout: RegisterLayout, indices: np.ndarray):
        self.spec = spec
        self.layout = layout
        self.programs = indices
        count = indices.size
        self.next_tab, self.move_tab, self.write_tab = decode_rule_arrays(indices, spec)
        self.state = np.full(count, spec.initial_state, dtype=np.uint8)
        self.head = np.zeros(count, dtype=np.int32)
        self.tape = np.zeros((count, spec.c), dtype=np.uint8)
        self.read = np.zeros(count, dtype=np.uint8)
        self.write = np.zeros(count, dtype=np.uint8)
        self.move = np.zeros(count, dtype=np.uint8)
        self.hist_state = np.zeros((count, layout.slots), dtype=np.uint8)
        self.hist_read = np.zeros((count, layout.slots), dtype=np.uint8)
        self.weights: Fraction | list[Fraction] = Fraction(1, count)
        self.steps_in_stage = 0
        self.steps_done = 0
        self.scratch_dirty = False
        self._snapshot()

    @property
    def size(self) -> int:
        return self.programs.size

    def weight_array(self) -> list[Fraction]:
        if isinstance(self.weights, Fraction):
            return [self.weights] * self.size
        return list(self.weights)

    def total_weight(self) -> Fraction:
        if isinstance(self.weights, Fraction):
            return self.weights * self.size
        return sum(self.weights, Fraction(0))

    def _snapshot(self) -> None:
        # Stage preparation record: what a physical restart would know
        # classically about each branch's (state, head, tape).
        self.snap_state = self.state.copy()
        self.snap_head = self.head.copy()
        self.snap_tape = self.tape.copy()

    def restart_stage(self) -> None:
        """Discard the computation history and begin a fresh stage."""
        if self.scratch_dirty:
            raise ScratchError("cannot restart a stage with dirty scratch registers")
        self.hist_state[:] = 0
        self.hist_read[:] = 0
        self.steps_in_stage = 0
        self._snapshot()


def prepare_initial(
    spec: MachineSpec,
    layout: RegisterLayout,
    indices: np.ndarray | None = None,
) -> PermutationEnsemble:
    """Uniform superposition over program indices in the start configuration.

    ``indices=None`` takes the whole universe; an explicit subset models a
    uniform superposition over those programs only (used for spot checks on
    universes too large to hold in full).
    """
    if indices is None:
        total = count_programs(spec)
        if (total - 1).bit_length() > 63:
            raise ValueError("universe too large to materialise; pass explicit indices")
        indices = np.arange(total, dtype=np.uint64)
    else:
        indices = np.asarray(indices, dtype=np.uint64)
        if indices.size == 0:
            raise ValueError("need at least one program index")
        if np.unique(indices).size != indices.size:
            raise ValueError("program indices must be distinct")
    return PermutationEnsemble(spec, layout, indices)


def tm_step(ensemble: PermutationEnsemble) -> PermutationEnsemble:
    """Apply Read, Delta, Write and Move to every branch."""
    if ensemble.scratch_dirty:
        raise ScratchError("tm_step needs clean scratch registers; call reset_step")
    spec = ensemble.spec
    if ensemble.steps_in_stage >= ensemble.layout.z_ch:
        raise HistoryExhaustedError(
            f"stage capacity of {ensemble.layout.z_ch} steps used; restart the stage"
        )
    m, n, c = spec.m, spec.n, spec.c
    va = np.flatnonzero(ensemble.state < m)  # frozen branches stay untouched
    s = ensemble.state[va]
    h = ensemble.head[va]
    r = ensemble.tape[va, h]

    ensemble.read[va] ^= r

    is_halt = s == spec.halt_state
    row = s.astype(np.int64) * n + r
    w = np.where(is_halt, r, ensemble.write_tab[va, row])
    mv = np.where(is_halt, 0, ensemble.move_tab[va, row]).astype(np.uint8)
    nxt = np.where(is_halt, s, ensemble.next_tab[va, row])
    k = ensemble.steps_in_stage
    if k >= 1:
        ensemble.hist_state[va, k - 1] ^= s
        ensemble.hist_read[va, k - 1] ^= r
    ensemble.write[va] ^= w
    ensemble.move[va] ^= mv
    ensemble.state[va] = nxt

    ensemble.tape[va, h] ^= ensemble.read[va] ^ ensemble.write[va]
    ensemble.head[va] = (h + mv.astype(np.int32) * 2 - 1) % c

    ensemble.steps_in_stage += 1
    ensemble.steps_done += 1
    ensemble.scratch_dirty = True
    return ensemble


def reset_step(ensemble: PermutationEnsemble) -> PermutationEnsemble:
    """Uncompute the scratch registers of the step just taken.

    Recomputes (read, write, move) from the history slot (or, for a
    stage's first step, from the stage preparation record) plus the
    program register, XORs them away and verifies the scratch is clean.
    """
    if not ensemble.scratch_dirty:
        raise ScratchError("reset_step must follow a tm_step")
    spec = ensemble.spec
    m, n = spec.m, spec.n
    k = ensemble.steps_in_stage - 1
    if k == 0:
        q_prev = ensemble.snap_state
        r = ensemble.snap_tape[np.arange(ensemble.size), ensemble.snap_head]
    else:
        q_prev = ensemble.hist_state[:, k - 1]
        r = ensemble.hist_read[:, k - 1]

    is_halt = q_prev == spec.halt_state  # also true for empty slots: no-op below
    valid = q_prev < m
    row = np.minimum(q_prev, m - 1).astype(np.int64) * n + r
    branch = np.arange(ensemble.size)
    w = np.where(is_halt, r, ensemble.write_tab[branch, row])
    mv = np.where(is_halt, 0, ensemble.move_tab[branch, row]).astype(np.uint8)
    w = np.where(valid, w, 0)
    mv = np.where(valid, mv, 0)
    r = np.where(valid, r, 0)

    ensemble.read ^= r
    ensemble.write ^= w
    ensemble.move ^= mv
    if ensemble.read.any() or ensemble.write.any() or ensemble.move.any():
        raise ScratchError("uncomputation failed to clear the scratch registers")
    ensemble.scratch_dirty = False
    return ensemble


@dataclass(frozen=True)
class MeasurementReport:
    """Halting probability and per-string joint probabilities.

    ``p_h`` is the probability of finding the state register in the
    halting state; ``p_s[s]`` the joint probability of the tape holding
    ``s`` and the state register halting.  Metadata fields do not take
    part in equality, so staging variants of the same run compare equal.
    """

    p_h: Fraction | float
    p_s: dict[str, Fraction | float]
    backend: str = field(compare=False, default="permutation")
    spec: MachineSpec | None = field(compare=False, default=None)
    z: int | None = field(compare=False, default=None)
    z_ch: int | None = field(compare=False, default=None)

    def ctm_estimate(self, s: str) -> float:
        """-log2(p_s / p_h) in bits; the complexity estimate of ``s``."""
        value = self.p_s.get(s)
        if not value:
            raise NotInTableError(s)
        if isinstance(value, Fraction) and isinstance(self.p_h, Fraction):
            ratio = value / self.p_h
            return neg_log2_fraction(ratio.numerator, ratio.denominator)
        return -math.log2(value / self.p_h)


def _tape_keys(tape: np.ndarray, c: int) -> np.ndarray:
    weights = np.uint64(1) << np.arange(c - 1, -1, -1, dtype=np.uint64)
    return tape.astype(np.uint64) @ weights


def measure(
    ensemble: PermutationEnsemble,
    z: int | None = None,
    z_ch: int | None = None,
) -> MeasurementReport:
    spec = ensemble.spec
    halted = ensemble.state == spec.halt_state
    keys = _tape_keys(ensemble.tape[halted], spec.c)
    p_s: dict[str, Fraction] = {}
    if isinstance(ensemble.weights, Fraction):
        p_h = ensemble.weights * int(np.count_nonzero(halted))
        values, counts = np.unique(keys, return_counts=True)
        for v, count in zip(values.tolist(), counts.tolist()):
            p_s[format(v, f"0{spec.c}b")] = ensemble.weights * count
    else:
        p_h = Fraction(0)
        halted_idx = np.flatnonzero(halted)
        for branch, key in zip(halted_idx.tolist(), keys.tolist()):
            s = format(key, f"0{spec.c}b")
            weight = ensemble.weights[branch]
            p_h += weight
            p_s[s] = p_s.get(s, Fraction(0)) + weight
    return MeasurementReport(
        p_h, p_s, backend="permutation", spec=spec, z=z, z_ch=z_ch
    )


def _collapse_to_sample(ensemble: PermutationEnsemble, rng: np.random.Generator) -> None:
    """Measure (state, head, tape) and keep only the observed outcome.

    Models the physical stage restart: the reading collapses the program
    register to the sub-superposition consistent with the outcome, whose
    weights are renormalised exactly.
    """
    outcome = np.column_stack([ensemble.state, ensemble.head, ensemble.tape])
    weights = ensemble.weight_array()
    groups, inverse = np.unique(outcome, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    group_weights = [Fraction(0)] * len(groups)
    for branch, group in enumerate(inverse.tolist()):
        group_weights[group] += weights[branch]
    total = sum(group_weights, Fraction(0))
    probabilities = np.array([float(w / total) for w in group_weights])
    chosen = rng.choice(len(groups), p=probabilities / probabilities.sum())
    keep = np.flatnonzero(inverse == chosen)
    scale = group_weights[chosen]
    ensemble.programs = ensemble.programs[keep]
    ensemble.next_tab = ensemble.next_tab[keep]
    ensemble.move_tab = ensemble.move_tab[keep]
    ensemble.write_tab = ensemble.write_tab[keep]
    ensemble.state = ensemble.state[keep]
    ensemble.head = ensemble.head[keep]
    ensemble.tape = ensemble.tape[keep]
    ensemble.read = ensemble.read[keep]
    ensemble.write = ensemble.write[keep]
    ensemble.move = ensemble.move[keep]
    ensemble.hist_state = ensemble.hist_state[keep]
    ensemble.hist_read = ensemble.hist_read[keep]
    ensemble.weights = [weights[b] / scale for b in keep.tolist()]


def _register_bits(layout: RegisterLayout, idx: np.ndarray, name: str) -> np.ndarray:
    return (idx >> layout.offsets[name]) & ((1 << layout.widths[name]) - 1)


def read_block(layout: RegisterLayout, idx: np.ndarray) -> np.ndarray:
    """XOR the tape cell under the head into the read register."""
    spec = layout.spec
    valid = _register_bits(layout, idx, "state") < spec.m
    head = _register_bits(layout, idx, "head")
    cell = (idx >> (layout.offsets["tape"] + head)) & 1
    return np.where(valid, idx ^ (cell << layout.offsets["read"]), idx)


def _row_lookup(
    layout: RegisterLayout, idx: np.ndarray, q: np.ndarray, r: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(write, move) of row (q, r) from the program register, with the
    halting-state override applied.  Caller masks invalid q out."""
    spec = layout.spec
    is_halt = q == spec.halt_state
    rank = np.minimum(q, spec.m - 1) * spec.n + r
    row = (idx >> (layout.offsets["program"] + rank * spec.row_width)) & (
        (1 << spec.row_width) - 1
    )
    w = np.where(is_halt, r, row & (spec.n - 1))
    mv = np.where(is_halt, 0, (row >> spec.symbol_bits) & 1)
    return w, mv


def delta_block(layout: RegisterLayout, idx: np.ndarray, slot: int | None) -> np.ndarray:
    """Rule lookup: set write/move, record (state, read), advance the state."""
    spec = layout.spec
    s = _register_bits(layout, idx, "state")
    r = _register_bits(layout, idx, "read")
    valid = s < spec.m
    is_halt = s == spec.halt_state
    rank = np.minimum(s, spec.m - 1) * spec.n + r
    row = (idx >> (layout.offsets["program"] + rank * spec.row_width)) & (
        (1 << spec.row_width) - 1
    )
    w = np.where(is_halt, r, row & (spec.n - 1))
    mv = np.where(is_halt, 0, (row >> spec.symbol_bits) & 1)
    nxt = np.where(is_halt, s, row >> (spec.symbol_bits + spec.d))
    out = idx ^ (w << layout.offsets["write"]) ^ (mv << layout.offsets["move"])
    if spec.state_bits:
        state_mask = ((1 << spec.state_bits) - 1) << layout.offsets["state"]
        out = (out & ~state_mask) | (nxt << layout.offsets["state"])
    if slot is not None:
        record = (s << spec.symbol_bits) | r
        out = out ^ (record << layout.slot_offset(slot))
    return np.where(valid, out, idx)


def _live_at_entry(layout: RegisterLayout, idx: np.ndarray, slot: int | None) -> np.ndarray:
    """Was this branch live (not frozen) when the step began?

    Write and Move run after Delta has replaced the state register, so a
    branch that just transitioned into a spurious state looks frozen even
    though its write and move still belong to this step.  Delta left the
    evidence: every live branch deposited a history record, which is
    all-zero only for a halting-state branch that read 0 (and the halting
    state survives Delta unchanged).  The first step of stage one has no
    slot and every branch is live.
    """
    spec = layout.spec
    if slot is None:
        return np.ones_like(idx, dtype=bool)
    record = (idx >> layout.slot_offset(slot)) & ((1 << layout.slot_width) - 1)
    return (record != 0) | (_register_bits(layout, idx, "state") == spec.halt_state)


def write_block(layout: RegisterLayout, idx: np.ndarray, slot: int | None) -> np.ndarray:
    """Turn the tape cell under the head from the read into the write symbol."""
    live = _live_at_entry(layout, idx, slot)
    head = _register_bits(layout, idx, "head")
    flip = _register_bits(layout, idx, "read") ^ _register_bits(layout, idx, "write")
    return np.where(live, idx ^ (flip << (layout.offsets["tape"] + head)), idx)


def move_block(layout: RegisterLayout, idx: np.ndarray, slot: int | None) -> np.ndarray:
    """Advance the head one cell left or right, cyclically."""
    spec = layout.spec
    live = _live_at_entry(layout, idx, slot)
    head = _register_bits(layout, idx, "head")
    mv = _register_bits(layout, idx, "move")
    moved = (head + 2 * mv - 1) % spec.c
    if spec.head_bits:
        head_mask = ((1 << spec.head_bits) - 1) << layout.offsets["head"]
        out = (idx & ~head_mask) | (moved << layout.offsets["head"])
    else:
        out = idx
    return np.where(live, out, idx)


def reset_block(layout: RegisterLayout, idx: np.ndarray, slot: int | None) -> np.ndarray:
    """Uncompute read/write/move from the history slot or the stage prep."""
    spec = layout.spec
    if slot is None:
        # First step of the stage: preparation values are classically
        # known, state = initial everywhere, read symbol = 0.
        q_prev = np.full_like(idx, spec.initial_state)
        r = np.zeros_like(idx)
    else:
        record = (idx >> layout.slot_offset(slot)) & ((1 << layout.slot_width) - 1)
        q_prev = record >> spec.symbol_bits
        r = record & ((1 << spec.symbol_bits) - 1)
    valid = q_prev < spec.m
    w, mv = _row_lookup(layout, idx, q_prev, r)
    w = np.where(valid, w, 0)
    mv = np.where(valid, mv, 0)
    r = np.where(valid, r, 0)
    return (
        idx
        ^ (r << layout.offsets["read"])
        ^ (w << layout.offsets["write"])
        ^ (mv << layout.offsets["move"])
    )


class StateVectorSim:
    """Dense amplitude simulation of the same circuit blocks.

    Blocks act as index maps on the basis states that carry amplitude; an
    injectivity check per block application asserts the permutation
    property at run time.
    """

    def __init__(self, spec: MachineSpec, layout: RegisterLayout):
        if layout.total > 62:
            raise ValueError("index arithmetic supports at most 62 qubits")
        self.spec = spec
        self.layout = layout
        self.amp = np.zeros(1 << layout.total, dtype=np.complex128)
        total = count_programs(spec)
        indices = (
            np.arange(total, dtype=np.int64) << layout.offsets["program"]
        ) | (spec.initial_state << layout.offsets["state"])
        self.amp[indices] = 1.0 / math.sqrt(total)

    def _bits(self, idx: np.ndarray, name: str) -> np.ndarray:
        return _register_bits(self.layout, idx, name)

    def _apply(self, block) -> None:
        source = np.flatnonzero(self.amp)
        target = block(source)
        if np.unique(target).size != target.size:
            raise ScratchError("block is not injective on the amplitude support")
        fresh = np.zeros_like(self.amp)
        fresh[target] = self.amp[source]
        self.amp = fresh

    def run_step(self, step_in_stage: int) -> None:
        """One full machine step; ``step_in_stage`` counts from 0."""
        lay = self.layout
        slot = step_in_stage - 1 if step_in_stage >= 1 else None
        self._apply(lambda idx: read_block(lay, idx))
        self._apply(lambda idx: delta_block(lay, idx, slot))
        self._apply(lambda idx: write_block(lay, idx, slot))
        self._apply(lambda idx: move_block(lay, idx, slot))
        self._apply(lambda idx: reset_block(lay, idx, slot))
        scratch = np.flatnonzero(self.amp)
        for name in ("read", "write", "move"):
            if self._bits(scratch, name).any():
                raise ScratchError(f"{name} register not clean after reset")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def measure(self, z: int | None = None, z_ch: int | None = None) -> MeasurementReport:
        spec, lay = self.spec, self.layout
        support = np.flatnonzero(self.amp)
        probs = np.abs(self.amp[support]) ** 2
        states = self._bits(support, "state")
        halted = states == spec.halt_state
        p_h = float(probs[halted].sum())
        cells = np.array(
            [(support[halted] >> lay.tape_offset(j)) & 1 for j in range(spec.c)]
        )
        weights = np.uint64(1) << np.arange(spec.c - 1, -1, -1, dtype=np.uint64)
        keys = (cells.T.astype(np.uint64) @ weights).astype(np.int64)
        p_s: dict[str, float] = {}
        for key, p in zip(keys.tolist(), probs[halted].tolist()):
            s = format(key, f"0{spec.c}b")
            p_s[s] = p_s.get(s, 0.0) + p
        return MeasurementReport(
            p_h, p_s, backend="statevector", spec=spec, z=z, z_ch=z_ch
        )


def run_staged(
    spec: MachineSpec,
    z: int | None = None,
    z_ch: int | None = None,
    backend: str = "permutation",
    indices: np.ndarray | None = None,
    dense_limit: int = DENSE_QUBIT_LIMIT,
    sampling_shots: int | None = None,
    seed: int | None = None,
) -> MeasurementReport:
    """Run the superposed machine for ``z`` steps in stages of ``z_ch``.

    Between stages the history register is discarded and the run continues
    from the carried (state, head, tape) values.  The permutation backend
    carries all branches losslessly, so its report does not depend on
    ``z_ch``; with ``sampling_shots`` it instead measures at each boundary
    as physical hardware would, re-preparing the sampled outcome, and
    averages the final statistics over that many independent runs.

    The dense backend validates the circuit itself and supports single-
    stage runs up to ``dense_limit`` qubits.
    """
    z = spec.z if z is None else z
    z_ch = z if z_ch is None else z_ch
    if z < 1:
        raise ValueError("z must be >= 1")
    if z_ch > z:
        raise ValueError(f"z_ch={z_ch} exceeds the run length z={z}")
    layout = build_layout(spec, z_ch)
    if backend == "permutation":
        if sampling_shots is None:
            ens = prepare_initial(spec, layout, indices)
            _advance(ens, z, z_ch)
            return measure(ens, z=z, z_ch=z_ch)
        rng = np.random.default_rng(seed)
        shots = sampling_shots
        p_h = Fraction(0)
        p_s: dict[str, Fraction] = {}
        for _ in range(shots):
            ens = prepare_initial(spec, layout, indices)
            _advance(ens, z, z_ch, rng=rng)
            report = measure(ens)
            p_h += Fraction(report.p_h, shots)
            for s, value in report.p_s.items():
                p_s[s] = p_s.get(s, Fraction(0)) + Fraction(value, shots)
        return MeasurementReport(
            p_h, p_s, backend="permutation-sampled", spec=spec, z=z, z_ch=z_ch
        )
    if backend == "statevector":
        if indices is not None:
            raise ValueError("the dense backend always takes the full universe")
        if math.ceil(z / z_ch) > 1:
            raise ValueError(
                "the dense backend is single-stage: stage restarts are "
                "measurements, not unitaries; use z_ch=z or the permutation backend"
            )
        if layout.total > dense_limit:
            raise ValueError(
                f"{layout.total} qubits exceed the dense limit of {dense_limit}"
            )
        sim = StateVectorSim(spec, layout)
        for k in range(z):
            sim.run_step(k)
        return sim.measure(z=z, z_ch=z_ch)
    raise ValueError(f"unknown backend {backend!r}")


def _advance(
    ensemble: PermutationEnsemble,
    z: int,
    z_ch: int,
    rng: np.random.Generator | None = None,
) -> None:
    for _ in range(z):
        if ensemble.steps_in_stage == z_ch:
            if rng is not None:
                _collapse_to_sample(ensemble, rng)
            ensemble.restart_stage()
        tm_step(ensemble)
        reset_step(ensemble)


def trace_program(spec: MachineSpec, index: int, z: int, z_ch: int | None = None) -> list[str]:
    """Line-oriented per-step register trace of one program's branch.

    Renders state, head and tape after every step, with the scratch
    values the step produced before Reset cleared them; meant for eyeball
    debugging against the scalar interpreter.
    """
    z_ch = z if z_ch is None else z_ch
    layout = build_layout(spec, z_ch)
    ens = prepare_initial(spec, layout, indices=np.array([index], dtype=np.uint64))

    def tape_str() -> str:
        return "".join(map(str, ens.tape[0].tolist()))

    lines = [f"step 0 state {ens.state[0]} head {ens.head[0]} tape {tape_str()}"]
    for k in range(1, z + 1):
        if ens.steps_in_stage == z_ch:
            ens.restart_stage()
            lines.append(f"stage-restart before step {k}")
        tm_step(ens)
        scratch = f"read {ens.read[0]} write {ens.write[0]} move {ens.move[0]}"
        reset_step(ens)
        lines.append(
            f"step {k} state {ens.state[0]} head {ens.head[0]} "
            f"tape {tape_str()} {scratch}"
        )
    return lines


def encode_branches(ensemble: PermutationEnsemble) -> np.ndarray:
    """Global basis index of every branch, for backend cross-checks."""
    lay = ensemble.layout
    spec = ensemble.spec
    idx = ensemble.programs.astype(np.int64) << lay.offsets["program"]
    idx |= ensemble.state.astype(np.int64) << lay.offsets["state"]
    idx |= ensemble.move.astype(np.int64) << lay.offsets["move"]
    idx |= ensemble.head.astype(np.int64) << lay.offsets["head"]
    idx |= ensemble.read.astype(np.int64) << lay.offsets["read"]
    idx |= ensemble.write.astype(np.int64) << lay.offsets["write"]
    for j in range(spec.c):
        idx |= ensemble.tape[:, j].astype(np.int64) << lay.tape_offset(j)
    for k in range(lay.slots):
        record = (
            ensemble.hist_state[:, k].astype(np.int64) << spec.symbol_bits
        ) | ensemble.hist_read[:, k].astype(np.int64)
        idx |= record << lay.slot_offset(k)
    return idx


def compare_backends(
    spec: MachineSpec, z: int, dense_limit: int = DENSE_QUBIT_LIMIT
) -> float:
    """Max per-basis-state |statevector probability - branch weight|."""
    layout = build_layout(spec, z)
    if layout.total > dense_limit:
        raise ValueError(
            f"{layout.total} qubits exceed the dense limit of {dense_limit}"
        )
    ens = prepare_initial(spec, layout)
    sim = StateVectorSim(spec, layout)
    for k in range(z):
        if ens.steps_in_stage == layout.z_ch:
            ens.restart_stage()
        tm_step(ens)
        reset_step(ens)
        sim.run_step(k)
    weights = {
        int(i): w for i, w in zip(encode_branches(ens).tolist(), ens.weight_array())
    }
    support = np.flatnonzero(sim.amp)
    probs = np.abs(sim.amp[support]) ** 2
    deviation = 0.0
    seen = set()
    for basis, p in zip(support.tolist(), probs.tolist()):
        seen.add(basis)
        deviation = max(deviation, abs(p - float(weights.get(basis, 0))))
    for basis, w in weights.items():
        if basis not in seen:
            deviation = max(deviation, float(w))
    return deviation
