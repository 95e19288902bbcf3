import numpy as np
import pytest

from hazardlab.errors import InvalidInputError
from hazardlab.fileio import (
    Checkpoint,
    config_hash,
    csv_text,
    load_checkpoint,
    provenance_line,
    read_cohort,
    read_csv,
    read_oracle,
    save_checkpoint,
    subject_from_json,
    subject_to_json,
    write_cohort,
    write_csv,
    write_oracle,
)
from hazardlab.model import BinaryRelapseModel, ModelConfig, init_params
from hazardlab.survival_core import SubjectRecord, TimeGrid
from hazardlab.synthcohort import CohortConfig, generate_cohort, generate_stitched_bags


class TestCohortFiles:
    def test_roundtrip(self, tmp_path):
        cohort, oracle = generate_cohort(CohortConfig(subject_count=30, seed=1))
        cohort += generate_stitched_bags(CohortConfig(seed=1), 2)
        write_cohort(tmp_path / "c.jsonl", cohort)
        back = read_cohort(tmp_path / "c.jsonl")
        assert len(back) == len(cohort)
        for a, b in zip(cohort, back):
            assert (a.id, a.observed_time, a.censored, a.true_risk, a.exclude_from_training) == (
                b.id, b.observed_time, b.censored, b.true_risk, b.exclude_from_training)
            np.testing.assert_array_equal(a.bag, b.bag)
            np.testing.assert_array_equal(a.instance_labels, b.instance_labels)
        write_oracle(tmp_path / "o.json", oracle)
        assert read_oracle(tmp_path / "o.json") == oracle

    def test_one_line_per_subject(self, tmp_path):
        cohort, _ = generate_cohort(CohortConfig(subject_count=25, seed=0, censor_fraction_target=0.9))
        write_cohort(tmp_path / "c.jsonl", cohort)
        assert len((tmp_path / "c.jsonl").read_text().splitlines()) == 25

    def test_minimal_record(self):
        s = subject_from_json('{"id": 7, "observed_time": 3, "censored": false, "instances": [[1, 2]]}')
        assert s.id == "7" and s.instance_labels is None and s.true_risk is None
        assert subject_from_json(subject_to_json(s)).bag.tolist() == [[1.0, 2.0]]

    @pytest.mark.parametrize("line", [
        "{not json",
        '{"id": 1, "censored": false, "instances": [[1]]}',
        '{"id": 1, "observed_time": 3, "censored": "no", "instances": [[1]]}',
        '{"id": 1, "observed_time": -3, "censored": false, "instances": [[1]]}',
    ])
    def test_bad_record(self, line):
        with pytest.raises(InvalidInputError):
            subject_from_json(line)

    def test_duplicate_ids(self, tmp_path):
        s = SubjectRecord("a", 1.0, False, np.zeros((1, 2)))
        write_cohort(tmp_path / "c.jsonl", [s, s])
        with pytest.raises(InvalidInputError):
            read_cohort(tmp_path / "c.jsonl")

    def test_empty(self, tmp_path):
        (tmp_path / "c.jsonl").write_text("\n")
        with pytest.raises(InvalidInputError):
            read_cohort(tmp_path / "c.jsonl")


class TestCheckpoint:
    def test_bit_exact_roundtrip(self, tmp_path):
        cfg = ModelConfig(seed=5)
        rng = np.random.default_rng(0)
        params = {k: v + rng.normal(0, 1e-3, np.shape(v)) for k, v in init_params(cfg).items()}
        binary = BinaryRelapseModel(rng.normal(size=9), 24.0, 31)
        grid = TimeGrid.uniform(28, 3.0)
        save_checkpoint(tmp_path / "m.npz", Checkpoint(params, cfg, grid, binary, {"epochs": 3}))
        back = load_checkpoint(tmp_path / "m.npz")
        assert back.config == cfg and back.grid == grid and back.extra == {"epochs": 3}
        for k in params:
            assert back.params[k].tobytes() == np.asarray(params[k], np.float64).tobytes()
        assert back.binary_model.weights.tobytes() == binary.weights.tobytes()
        assert back.binary_model.iterations == 31

    def test_resave_is_identical(self, tmp_path):
        cfg = ModelConfig(use_binary_feature=False)
        save_checkpoint(tmp_path / "a.npz", Checkpoint(init_params(cfg), cfg, TimeGrid.uniform(28, 3.0)))
        ck = load_checkpoint(tmp_path / "a.npz")
        assert ck.binary_model is None
        save_checkpoint(tmp_path / "b.npz", ck)
        a, b = load_checkpoint(tmp_path / "a.npz"), load_checkpoint(tmp_path / "b.npz")
        for k in a.params:
            assert a.params[k].tobytes() == b.params[k].tobytes()

    def test_wrong_shapes_rejected(self, tmp_path):
        cfg = ModelConfig()
        params = init_params(cfg)
        params["out_w"] = np.zeros(3)
        with pytest.raises(InvalidInputError):
            save_checkpoint(tmp_path / "m.npz", Checkpoint(params, cfg, TimeGrid.uniform(28, 3.0)))

    def test_garbage_file(self, tmp_path):
        (tmp_path / "m.npz").write_bytes(b"junk")
        with pytest.raises(InvalidInputError):
            load_checkpoint(tmp_path / "m.npz")


class TestCsv:
    def test_header_and_provenance(self, tmp_path):
        prov = provenance_line(3, config_hash("x"))
        write_csv(tmp_path / "a.csv", ["a", "b", "c"], [[1.5, True, float("nan")], [0.1, False, 2]], prov)
        text = (tmp_path / "a.csv").read_text()
        assert text.startswith("# hazardlab ") and "seed=3" in text.splitlines()[0]
        header, rows = read_csv(tmp_path / "a.csv")
        assert header == ["a", "b", "c"]
        assert rows == [["1.5", "1", "NA"], ["0.1", "0", "2"]]

    def test_float_repr_roundtrips(self):
        x = 0.1 + 0.2
        line = csv_text(["x"], [[x]], "# p").splitlines()[2]
        assert float(line) == x

    def test_hash_is_stable(self):
        assert config_hash("abc") == config_hash("abc") != config_hash("abd")
        assert len(config_hash("abc")) == 16
