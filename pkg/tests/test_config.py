import pytest

from tsdetect.config import (ConfigError, degradation_config, load_flat_config,
                             model_config, parse_flat_config, run_paths,
                             sine_config, train_config)


class TestParseFlat:
    def test_basic(self):
        cfg = parse_flat_config("a.x=1\n# comment\n\nb.y = hello \n")
        assert cfg == {"a.x": "1", "b.y": "hello"}

    def test_value_may_contain_equals(self):
        assert parse_flat_config("a=b=c") == {"a": "b=c"}

    def test_missing_equals_reports_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_flat_config("a=1\nnonsense\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_flat_config("a=1\na=2\n")

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_flat_config("/nonexistent/run.cfg")


class TestSectionBuilders:
    def test_train_overrides(self):
        cfg = train_config({"train.batch_size": "4", "train.max_steps": "99",
                            "train.base_lr": "0.002"})
        assert cfg.batch_size == 4
        assert cfg.max_steps == 99
        assert cfg.base_lr == 0.002

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="train.bogus"):
            train_config({"train.bogus": "1"})

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError, match="train.batch_size"):
            train_config({"train.batch_size": "four"})

    def test_invalid_combination_rejected(self):
        with pytest.raises(ConfigError):
            degradation_config({"degradation.p_soft": "0.9",
                                "degradation.p_uniform": "0.2"})

    def test_sine_defaults(self):
        cfg = sine_config({})
        assert cfg.period == 50 and cfg.train_len == 20000

    def test_sections_do_not_leak(self):
        cfg = train_config({"sine.seed": "9", "train.seed": "3"})
        assert cfg.seed == 3

    def test_run_paths(self):
        paths = run_paths({"data.train": "/a.csv"})
        assert paths.train == "/a.csv" and paths.test is None


class TestModelConfig:
    def test_simplified_preset_defaults(self):
        cfg = model_config({}, data_dim=3)
        assert (cfg.data_dim, cfg.window_size, cfg.patch_size) == (3, 100, 1)
        assert (cfg.embed_dim, cfg.num_layers, cfg.num_heads) == (256, 3, 8)

    def test_full_preset(self):
        cfg = model_config({"model.preset": "full"}, data_dim=2)
        assert (cfg.embed_dim, cfg.num_layers, cfg.num_heads) == (512, 6, 8)
        assert cfg.mlp_hidden == 2048
        assert cfg.window_size == 7168 and cfg.patch_size == 14

    def test_overrides_beat_preset(self):
        cfg = model_config({"model.window_size": "64", "model.patch_size": "4",
                            "model.embed_dim": "32"}, data_dim=1)
        assert (cfg.window_size, cfg.patch_size, cfg.embed_dim) == (64, 4, 32)

    def test_unknown_preset_rejected(self):
        with pytest.raises(ConfigError, match="preset"):
            model_config({"model.preset": "huge"}, data_dim=1)

    def test_indivisible_window_rejected(self):
        with pytest.raises(ConfigError):
            model_config({"model.window_size": "10", "model.patch_size": "3"},
                         data_dim=1)
