import pytest

from hazardlab.config import load_config, parse_config
from hazardlab.errors import ConfigError
from hazardlab.model import ModelConfig, TrainConfig


class TestParse:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.seed == 0
        assert cfg.train() == TrainConfig()
        assert cfg.grid().interval_count == 28

    def test_typed_values(self):
        cfg = parse_config("[run]\nseed = 4\nvariant = mil\n[train]\nepochs = 3\nlearning_rate = 0.5\n"
                           "[strata]\nlimits = 0.2, 0.4\n[eval]\ninterpolate = no\n")
        assert cfg.seed == 4
        assert cfg.train().epochs == 3 and cfg.train().learning_rate == 0.5
        assert cfg.boundaries().limits == (0.2, 0.4)
        assert cfg.evaluation().interpolate is False
        m = cfg.model()
        assert m.use_mil and not m.use_self_attention and m.seed == 4

    def test_grid_flows_into_model_and_cohort(self):
        cfg = parse_config("[grid]\ninterval_count = 10\ninterval_length = 6\n[run]\nseed = 2\n")
        assert cfg.model().interval_count == 10
        c = cfg.cohort()
        assert c.interval_count == 10 and c.interval_length == 6.0 and c.seed == 2

    @pytest.mark.parametrize("text", [
        "[train]\nepoch = 3\n",
        "[nosuch]\na = 1\n",
        "[train]\nepochs = three\n",
        "[train]\nepochs = 1\nepochs = 2\n",
        "epochs = 1\n",
        "[eval]\ninterpolate = maybe\n",
        "[model]\ninterval_count = 4\n",
    ])
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    @pytest.mark.parametrize("text", [
        "[run]\nvariant = bogus\n",
        "[strata]\nlimits = 0.5, 0.2\n",
        "[train]\nepochs = -1\n",
        "[loss]\nalpha = 2\n",
    ])
    def test_invalid_values(self, text):
        with pytest.raises(ConfigError):
            parse_config(text).validate()

    def test_dump_roundtrip(self):
        cfg = parse_config("[run]\nseed = 9\n[model]\ngru_hidden = 5\n[strata]\nlimits = 0.25\n")
        again = parse_config(cfg.dump())
        assert again.model() == cfg.model()
        assert again.boundaries() == cfg.boundaries()
        assert again.digest() == cfg.digest()

    def test_overrides(self):
        cfg = parse_config("").with_overrides("model", use_mil=False)
        assert cfg.model() == ModelConfig(use_mil=False)
        with pytest.raises(ConfigError):
            cfg.with_overrides("model", nope=1)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "none.ini"))

    def test_no_file_means_defaults(self):
        assert load_config(None).train() == TrainConfig()
