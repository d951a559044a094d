import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler

from ctmq.complexity import NotInTableError, build_table, ctm
from ctmq.estimators import BdmEstimator, CtmEstimator, QuantumCtmEstimator
from ctmq.store import save_table
from ctmq.validation import as_bit_string, as_bit_strings


class TestValidation:
    def test_string_passthrough(self):
        assert as_bit_string("0101") == "0101"

    def test_bytes(self):
        assert as_bit_string(b"0101") == "0101"

    def test_int_sequence(self):
        assert as_bit_string([0, 1, 1, 0]) == "0110"
        assert as_bit_string(np.array([1, 0, 1, 0])) == "1010"

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            as_bit_string("0120")
        with pytest.raises(ValueError):
            as_bit_string([0, 2])
        with pytest.raises(TypeError):
            as_bit_string(3.5)

    def test_length_check(self):
        with pytest.raises(ValueError):
            as_bit_string("010", length=4)

    def test_batch_forms(self):
        batch = ["0101", [0, 1, 1, 0], np.array([1, 1, 1, 1])]
        assert as_bit_strings(batch) == ["0101", "0110", "1111"]
        matrix = np.array([[0, 0, 0, 0], [1, 0, 0, 0]])
        assert as_bit_strings(matrix) == ["0000", "1000"]

    def test_single_string_batch_rejected(self):
        with pytest.raises(TypeError):
            as_bit_strings("0101")


class TestCtmEstimator:
    def test_fit_transform_matches_library(self, census_2_2):
        est = CtmEstimator(states=2, tape_cells=4, max_steps=50).fit()
        strings = sorted(census_2_2.output_counts)
        values = est.transform(strings)
        assert values.shape == (4, 1)
        for row, s in zip(values[:, 0], strings):
            assert row == ctm(census_2_2, s)
        assert est.halting_fraction_ == 2560 / 4096

    def test_unfitted_raises(self):
        with pytest.raises(NotFittedError):
            CtmEstimator().transform(["0000"])

    def test_missing_policies(self):
        est = CtmEstimator(states=2, tape_cells=4, max_steps=50).fit()
        with pytest.raises(NotInTableError):
            est.transform(["0101"])
        est = CtmEstimator(states=2, tape_cells=4, max_steps=50, missing="nan").fit()
        out = est.transform(["0000", "0101"])
        assert math.isnan(out[1, 0])
        assert not math.isnan(out[0, 0])
        with pytest.raises(ValueError):
            CtmEstimator(missing="zero").fit()

    def test_fit_from_saved_table(self, census_2_2, tmp_path):
        path = tmp_path / "table.ctm"
        save_table(build_table(census_2_2), path)
        est = CtmEstimator(table_path=str(path)).fit()
        assert est.spec_.m == 2
        assert est.complexity("1111") == ctm(census_2_2, "1111")

    def test_get_params_roundtrip(self):
        est = CtmEstimator(states=3, tape_cells=5, max_steps=20, missing="nan")
        params = est.get_params()
        assert params["states"] == 3
        assert clone(est).get_params() == params

    def test_sklearn_pipeline_composition(self):
        pipe = Pipeline(
            [
                ("complexity", CtmEstimator(states=2, tape_cells=4, max_steps=50)),
                ("scale", StandardScaler()),
            ]
        )
        features = pipe.fit_transform(["0000", "1000", "0111", "1111"])
        assert features.shape == (4, 1)
        assert abs(features.mean()) < 1e-12


class TestBdmEstimator:
    @pytest.fixture
    def table(self, census_2_2):
        return build_table(census_2_2)

    def test_partition_values(self, table, census_2_2):
        est = BdmEstimator(table=table).fit()
        out = est.transform(["0000" + "1111"])
        assert out[0, 0] == pytest.approx(
            ctm(census_2_2, "0000") + ctm(census_2_2, "1111")
        )

    def test_multiplicity_variant(self, table, census_2_2):
        est = BdmEstimator(table=table, multiplicity=True).fit()
        out = est.transform(["0111" * 4])
        assert out[0, 0] == pytest.approx(ctm(census_2_2, "0111") + 2.0)

    def test_requires_table(self):
        with pytest.raises(ValueError):
            BdmEstimator().fit()

    def test_lenient_mode(self, table):
        strict = BdmEstimator(table=table).fit()
        with pytest.raises(NotInTableError):
            strict.transform(["01010000"])
        lenient = BdmEstimator(table=table, lenient=True).fit()
        assert lenient.transform(["01010000"])[0, 0] == pytest.approx(
            table.ctm("0000")
        )

    def test_from_path(self, table, tmp_path):
        path = tmp_path / "t.ctm"
        save_table(table, path)
        est = BdmEstimator(table_path=str(path)).fit()
        assert est.block_size_ == 4


class TestQuantumCtmEstimator:
    def test_matches_classical_route(self, census_2_2):
        classical = CtmEstimator(states=2, tape_cells=4, max_steps=50).fit()
        quantum = QuantumCtmEstimator(states=2, tape_cells=4, max_steps=50).fit()
        strings = sorted(census_2_2.output_counts)
        np.testing.assert_array_equal(
            classical.transform(strings), quantum.transform(strings)
        )
        assert quantum.p_h_ == classical.halting_fraction_

    def test_staged_fit(self):
        est = QuantumCtmEstimator(
            states=2, tape_cells=4, max_steps=6, stage_steps=2
        ).fit()
        assert est.report_.p_h == est.p_h_

    def test_missing_nan(self):
        est = QuantumCtmEstimator(
            states=2, tape_cells=4, max_steps=50, missing="nan"
        ).fit()
        assert math.isnan(est.transform(["0101"])[0, 0])
