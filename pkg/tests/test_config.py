import pytest

from nerdebias.config import RunConfig, load_config_file, parse_config_text, resolve, write_resolved
from nerdebias.errors import ConfigError


class TestParse:
    def test_comments_and_blank_lines(self):
        text = "# header\nk = 2  # smoothing\n\nmode = bias_product\n"
        assert parse_config_text(text) == {"k": "2", "mode": "bias_product"}

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match=":2: unknown key 'kk'"):
            parse_config_text("k = 2\nkk = 3\n", "run.cfg")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("k = 2\nk = 3\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match=":1:"):
            parse_config_text("k 2\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="--config"):
            load_config_file(tmp_path / "absent.cfg")


class TestResolve:
    def test_defaults(self):
        cfg = resolve()
        assert (cfg.k, cfg.mode, cfg.lam, cfg.seeds) == (100.0, "none", 0.0, (1,))

    def test_override_beats_file(self):
        cfg = resolve({"k": "2", "epochs": "3"}, {"k": 5.0, "epochs": None})
        assert (cfg.k, cfg.epochs) == (5.0, 3)

    def test_types(self):
        cfg = resolve({"seeds": "1, 2,3", "record_time": "yes", "max_len": "40"})
        assert cfg.seeds == (1, 2, 3) and cfg.record_time is True and cfg.max_len == 40

    @pytest.mark.parametrize("key,value", [("k", "abc"), ("record_time", "maybe"), ("epochs", "1.5")])
    def test_bad_values(self, key, value):
        with pytest.raises(ConfigError, match=key):
            resolve({key: value})

    @pytest.mark.parametrize("kw", [{"mode": "mixture"}, {"bias_kind": "oracle"}, {"lam": -1.0},
                                    {"seeds": ()}, {"smoothing": "laplace"}, {"embed_dim": 0},
                                    {"decoder": "crf", "loss_positions": "first"}])
    def test_invalid_combinations(self, kw):
        with pytest.raises(ConfigError):
            RunConfig(**kw)

    def test_text_round_trip(self, tmp_path):
        cfg = resolve({"k": "2.5", "seeds": "1,2,3", "mode": "learned_mixin", "train": "a.conll", "lam": "0.1"})
        path = write_resolved(cfg, tmp_path)
        assert resolve(load_config_file(path)) == cfg

    def test_to_text_is_stable(self):
        assert resolve().to_text() == RunConfig().to_text()
        assert "k = 100.0\n" in RunConfig().to_text()


class TestRequire:
    def test_missing(self):
        with pytest.raises(ConfigError, match="missing required --vocab"):
            RunConfig().require("vocab")

    def test_nonexistent(self, tmp_path):
        with pytest.raises(ConfigError, match="--train: no such file"):
            RunConfig(train=str(tmp_path / "nope")).require("train")

    def test_output_dir_need_not_exist(self, tmp_path):
        RunConfig(output_dir=str(tmp_path / "new")).require("output_dir")

    def test_optional_file(self, tmp_path):
        assert RunConfig().optional_file("cui_file") is None
        with pytest.raises(ConfigError):
            RunConfig(cui_file=str(tmp_path / "x")).optional_file("cui_file")


class TestDerived:
    def test_temperature_and_ensemble(self):
        cfg = RunConfig(lam=0.1, mode="learned_mixin_h", entropy_weight=0.3)
        assert cfg.temperature().lam == 0.1
        ens = cfg.ensemble_config()
        assert (ens.mode, ens.entropy_weight, ens.temperature.lam) == ("learned_mixin_h", 0.3, 0.1)

    def test_tagger_config(self):
        t = RunConfig(hidden_dim=7, decoder="crf").tagger_config(seed=4, num_classes=5)
        assert (t.hidden_dim, t.decoder, t.seed, t.num_classes) == (7, "crf", 4, 5)
