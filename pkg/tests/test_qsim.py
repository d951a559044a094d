from fractions import Fraction

import numpy as np
import pytest

from ctmq.complexity import NotInTableError, ctm
from ctmq.machine import MachineConfig, MachineSpec, decode_program, step
from ctmq.qsim import (
    HistoryExhaustedError,
    ScratchError,
    StateVectorSim,
    build_layout,
    compare_backends,
    encode_branches,
    prepare_initial,
    reset_step,
    run_staged,
    tm_step,
)


class TestLayout:
    def test_reference_case_m5_c12(self):
        spec = MachineSpec(m=5, c=12, z=500)
        for z_ch in (1, 10, 500):
            layout = build_layout(spec, z_ch)
            assert layout.total == 72 + (z_ch - 1) * 4

    def test_reference_case_m6_c12(self):
        spec = MachineSpec(m=6, c=12, z=500)
        layout = build_layout(spec, 500)
        assert layout.total == 82 + 499 * 4

    def test_small_dense_case(self):
        layout = build_layout(MachineSpec(m=2, c=2, z=2), z_ch=2)
        assert layout.total == 21

    def test_offsets_disjoint_and_cover(self):
        spec = MachineSpec(m=3, c=5, z=10)
        layout = build_layout(spec, 4, q_a=2)
        spans = sorted(
            (layout.offsets[name], layout.offsets[name] + layout.widths[name])
            for name in layout.widths
        )
        assert spans[0][0] == 0
        assert spans[-1][1] == layout.total
        for (_, a_hi), (b_lo, _) in zip(spans, spans[1:]):
            assert a_hi == b_lo

    def test_bad_parameters(self):
        spec = MachineSpec(m=2, c=2, z=2)
        with pytest.raises(ValueError):
            build_layout(spec, 0)
        with pytest.raises(ValueError):
            build_layout(spec, 2, q_a=-1)


class TestPrepare:
    def test_uniform_weights(self):
        spec = MachineSpec(m=2, c=4, z=10)
        ens = prepare_initial(spec, build_layout(spec, 10))
        assert ens.size == 4096
        assert ens.total_weight() == 1
        assert ens.weight_array()[0] == Fraction(1, 4096)
        assert (ens.state == 1).all()
        assert not ens.tape.any()
        assert not ens.head.any()

    def test_single_state_universe(self):
        spec = MachineSpec(m=1, c=3, z=5)
        ens = prepare_initial(spec, build_layout(spec, 5))
        assert ens.size == 16
        assert ens.weight_array()[0] == Fraction(1, 16)
        assert (ens.state == 0).all()

    def test_subset_indices(self):
        spec = MachineSpec(m=3, c=4, z=10)
        ens = prepare_initial(spec, build_layout(spec, 10), indices=np.array([5, 9, 11]))
        assert ens.size == 3
        assert ens.total_weight() == 1

    def test_duplicate_indices_rejected(self):
        spec = MachineSpec(m=2, c=4, z=10)
        with pytest.raises(ValueError):
            prepare_initial(spec, build_layout(spec, 10), indices=np.array([1, 1]))


def advance(ens, steps):
    for _ in range(steps):
        if ens.steps_in_stage == ens.layout.z_ch:
            ens.restart_stage()
        reset_step(tm_step(ens))


class TestOracleEquivalence:
    """Each branch must match the scalar interpreter step for step."""

    def check_universe(self, spec, z, indices=None, checkpoints=(1, 2, 3)):
        layout = build_layout(spec, z)
        ens = prepare_initial(spec, layout, indices=indices)
        programs = ens.programs.tolist()
        configs = [
            MachineConfig(spec.initial_state, 0, (0,) * spec.c) for _ in programs
        ]
        tables = [decode_program(i, spec) for i in programs]
        for k in range(1, z + 1):
            reset_step(tm_step(ens))
            configs = [step(cfg, tab, spec) for cfg, tab in zip(configs, tables)]
            if k in checkpoints or k == z:
                assert ens.state.tolist() == [c.state for c in configs]
                assert ens.head.tolist() == [c.head for c in configs]
                assert [tuple(row) for row in ens.tape.tolist()] == [
                    c.tape for c in configs
                ]

    def test_single_state_full(self):
        self.check_universe(MachineSpec(m=1, c=3, z=6), z=6)

    def test_two_state_full(self):
        self.check_universe(
            MachineSpec(m=2, c=4, z=50), z=50, checkpoints=(1, 5, 20)
        )

    def test_three_state_sampled(self):
        spec = MachineSpec(m=3, c=4, z=30)
        rng = np.random.default_rng(11)
        indices = np.unique(rng.integers(0, 1 << 24, size=10_000))
        self.check_universe(spec, z=30, indices=indices, checkpoints=(1, 7, 30))


class TestStepContracts:
    def test_scratch_protocol_enforced(self):
        spec = MachineSpec(m=2, c=4, z=10)
        ens = prepare_initial(spec, build_layout(spec, 10))
        with pytest.raises(ScratchError):
            reset_step(ens)
        tm_step(ens)
        with pytest.raises(ScratchError):
            tm_step(ens)
        reset_step(ens)

    def test_scratch_clean_after_reset(self):
        spec = MachineSpec(m=2, c=4, z=10)
        ens = prepare_initial(spec, build_layout(spec, 10))
        for _ in range(10):
            reset_step(tm_step(ens))
            assert not ens.read.any()
            assert not ens.write.any()
            assert not ens.move.any()

    def test_history_exhaustion_signals_restart(self):
        spec = MachineSpec(m=2, c=4, z=10)
        ens = prepare_initial(spec, build_layout(spec, z_ch=3))
        advance(ens, 3)
        with pytest.raises(HistoryExhaustedError):
            tm_step(ens)
        ens.restart_stage()
        advance(ens, 3)

    def test_support_size_constant(self):
        spec = MachineSpec(m=2, c=4, z=10)
        ens = prepare_initial(spec, build_layout(spec, 10))
        for _ in range(10):
            reset_step(tm_step(ens))
            assert ens.size == 4096
            assert ens.total_weight() == 1
            assert np.unique(encode_branches(ens)).size == 4096

    def test_halt_branches_keep_tape_move_left(self):
        spec = MachineSpec(m=1, c=4, z=5)
        ens = prepare_initial(spec, build_layout(spec, 5))
        advance(ens, 3)
        assert (ens.state == 0).all()
        assert not ens.tape.any()
        assert (ens.head == (-3) % 4).all()


class TestMeasurement:
    def test_single_state_report(self):
        spec = MachineSpec(m=1, c=3, z=5)
        report = run_staged(spec)
        assert report.p_h == 1
        assert report.p_s == {"000": Fraction(1)}
        assert report.ctm_estimate("000") == 0.0

    def test_two_state_matches_census(self, census_2_2):
        spec = MachineSpec(m=2, c=4, z=50)
        report = run_staged(spec)
        assert report.p_h == Fraction(census_2_2.halting_total, 4096)
        assert report.p_h == Fraction(5, 8)
        for s, count in census_2_2.output_counts.items():
            assert report.p_s[s] == Fraction(count, 4096)
            assert report.ctm_estimate(s) == ctm(census_2_2, s)
        assert sum(report.p_s.values()) == report.p_h

    def test_missing_string(self):
        spec = MachineSpec(m=2, c=4, z=50)
        report = run_staged(spec)
        with pytest.raises(NotInTableError):
            report.ctm_estimate("0101")


class TestStaging:
    def test_staging_invariance(self):
        spec = MachineSpec(m=2, c=4, z=6)
        reports = [run_staged(spec, z=6, z_ch=z_ch) for z_ch in (1, 2, 3, 6)]
        for other in reports[1:]:
            assert other == reports[0]

    def test_history_cleared_between_stages(self):
        spec = MachineSpec(m=2, c=4, z=10)
        ens = prepare_initial(spec, build_layout(spec, z_ch=2))
        advance(ens, 2)
        assert ens.hist_state.any() or ens.hist_read.any()
        ens.restart_stage()
        assert not ens.hist_state.any()
        assert not ens.hist_read.any()
        assert ens.steps_in_stage == 0

    def test_z_ch_larger_than_z_rejected(self):
        spec = MachineSpec(m=2, c=4, z=10)
        with pytest.raises(ValueError):
            run_staged(spec, z=4, z_ch=5)

    def test_sampled_restarts_single_state(self):
        spec = MachineSpec(m=1, c=3, z=6)
        report = run_staged(spec, z=6, z_ch=2, sampling_shots=5, seed=1)
        assert report.p_h == 1
        assert report.p_s == {"000": Fraction(1)}

    def test_sampled_restarts_two_state(self):
        spec = MachineSpec(m=2, c=4, z=6)
        exact = run_staged(spec, z=6, z_ch=3)
        sampled = run_staged(spec, z=6, z_ch=3, sampling_shots=40, seed=7)
        assert sampled.backend == "permutation-sampled"
        assert sum(sampled.p_s.values()) == sampled.p_h
        assert 0 <= sampled.p_h <= 1
        # The sampled protocol is unbiased; with 40 shots it should land
        # in the right neighbourhood of the exact 5/8.
        assert abs(float(sampled.p_h) - float(exact.p_h)) < 0.25
        again = run_staged(spec, z=6, z_ch=3, sampling_shots=40, seed=7)
        assert again == sampled


class TestTrace:
    def test_trace_matches_interpreter(self):
        from ctmq.machine import run
        from ctmq.qsim import trace_program

        spec = MachineSpec(m=2, c=4, z=8)
        for index in (3, 100, 2049):
            lines = trace_program(spec, index, z=8)
            assert len(lines) == 9
            outcome = run(index, spec)
            if outcome.halted:
                halt_line = lines[outcome.step].split()
                assert halt_line[3] == "0"  # state register reached the halt state
                assert halt_line[7] == outcome.final_tape
            else:
                assert lines[-1].split()[3] != "0"

    def test_trace_marks_stage_restarts(self):
        from ctmq.qsim import trace_program

        spec = MachineSpec(m=2, c=4, z=6)
        lines = trace_program(spec, 70, z=6, z_ch=2)
        assert sum("stage-restart" in line for line in lines) == 2


class TestStateVector:
    def test_norm_preserved(self):
        spec = MachineSpec(m=2, c=2, z=4)
        layout = build_layout(spec, 4)
        assert layout.total == 25
        sim = StateVectorSim(spec, layout)
        for k in range(4):
            sim.run_step(k)
            assert abs(sim.norm() - 1.0) < 1e-10

    def test_backend_agreement_two_state(self):
        assert compare_backends(MachineSpec(m=2, c=2, z=2), z=2) < 1e-10

    def test_backend_agreement_single_state(self):
        assert compare_backends(MachineSpec(m=1, c=2, z=1), z=1) == 0.0

    @staticmethod
    def encode_basis(layout, program, state=0, head=0, tape=(), read=0, write=0, move=0):
        idx = program << layout.offsets["program"]
        idx |= state << layout.offsets["state"]
        idx |= head << layout.offsets["head"]
        idx |= read << layout.offsets["read"]
        idx |= write << layout.offsets["write"]
        idx |= move << layout.offsets["move"]
        for j, cell in enumerate(tape):
            idx |= cell << layout.tape_offset(j)
        return idx

    def test_block_maps_freeze_spurious_states(self):
        # A full dense run at m=3 would need 30 qubits, but the block maps
        # are pure index maps, so spurious-state behaviour is checked
        # directly on handcrafted basis states.
        from ctmq.qsim import delta_block, move_block, read_block, reset_block, write_block

        spec = MachineSpec(m=3, c=2, z=4)
        layout = build_layout(spec, 2)
        rng = np.random.default_rng(5)
        programs = rng.integers(0, 1 << 24, size=20).tolist()
        idx = np.array(
            [
                self.encode_basis(layout, p, state=3, head=h, tape=(t0, t1))
                for p in programs
                for h in (0, 1)
                for t0 in (0, 1)
                for t1 in (0, 1)
            ]
        )
        for block in (
            lambda a: read_block(layout, a),
            lambda a: delta_block(layout, a, 0),
            lambda a: write_block(layout, a, 0),
            lambda a: move_block(layout, a, 0),
        ):
            assert (block(idx) == idx).all()
        # Empty history slot: reset is a no-op as well.
        assert (reset_block(layout, idx, 0) == idx).all()

    def test_block_maps_match_interpreter_at_three_states(self):
        from ctmq.qsim import delta_block, move_block, read_block, reset_block, write_block

        spec = MachineSpec(m=3, c=2, z=4)
        layout = build_layout(spec, 2)
        rng = np.random.default_rng(6)
        slot = 0
        for program in rng.integers(0, 1 << 24, size=60).tolist():
            table = decode_program(program, spec)
            for state in (0, 1, 2):
                for tape in ((0, 0), (0, 1), (1, 0), (1, 1)):
                    config = MachineConfig(state, 1, tape)
                    expected = step(config, table, spec)
                    idx = np.array(
                        [self.encode_basis(layout, program, state, 1, tape)]
                    )
                    for block in (
                        lambda a: read_block(layout, a),
                        lambda a: delta_block(layout, a, slot),
                        lambda a: write_block(layout, a, slot),
                        lambda a: move_block(layout, a, slot),
                        lambda a: reset_block(layout, a, slot),
                    ):
                        idx = block(idx)
                    got = int(idx[0])
                    bits = lambda name: (got >> layout.offsets[name]) & (
                        (1 << layout.widths[name]) - 1
                    )
                    assert bits("state") == expected.state
                    assert bits("head") == expected.head
                    got_tape = tuple(
                        (got >> layout.tape_offset(j)) & 1 for j in range(spec.c)
                    )
                    assert got_tape == expected.tape
                    for scratch in ("read", "write", "move"):
                        assert bits(scratch) == 0

    def test_dense_report_matches_permutation(self):
        spec = MachineSpec(m=2, c=2, z=3)
        dense = run_staged(spec, backend="statevector")
        exact = run_staged(spec, backend="permutation")
        assert dense.p_h == pytest.approx(float(exact.p_h), abs=1e-12)
        assert set(dense.p_s) == set(exact.p_s)
        for s, value in dense.p_s.items():
            assert value == pytest.approx(float(exact.p_s[s]), abs=1e-12)

    def test_dense_limit_enforced(self):
        spec = MachineSpec(m=2, c=4, z=50)
        with pytest.raises(ValueError):
            run_staged(spec, backend="statevector")  # needs 127 qubits

    def test_dense_multi_stage_rejected(self):
        spec = MachineSpec(m=2, c=2, z=4)
        with pytest.raises(ValueError):
            run_staged(spec, z=4, z_ch=2, backend="statevector")

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            run_staged(MachineSpec(m=1, c=2, z=1), backend="tensor-network")
