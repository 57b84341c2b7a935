"""Tests for utils: settings loading, run config precedence, seeding, timer and console output."""

import json

import numpy as np
import pytest
from contracts.errors import ConfigError
from utils.config_loader import load_settings
from utils.output import format_accuracy, print_clone_results, print_json
from utils.run_config import RunConfig, load_run_config, parse_classes, parse_override
from utils.seeding import derive_seed, substream
from utils.timer import timer

PNC_KEYS = ("PNC_MNIST_DIR", "PNC_ZOO_DIR", "PNC_RUNS_DIR", "PNC_LOG_LEVEL", "PNC_LOG_FORMAT", "PNC_WORKERS")


@pytest.fixture
def clean_env(monkeypatch, tmp_path):
    """No PNC_* variables and no .env above the working directory."""
    for key in PNC_KEYS:
        monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)
    return monkeypatch


class TestSettings:
    """load_settings and the PNC_* mapping."""

    def test_defaults(self, clean_env) -> None:
        settings = load_settings()
        assert settings.mnist_dir == "data/mnist"
        assert settings.workers == 1

    def test_environment_overrides(self, clean_env) -> None:
        clean_env.setenv("PNC_MNIST_DIR", "/data/mnist")
        clean_env.setenv("PNC_WORKERS", "4")
        settings = load_settings()
        assert settings.mnist_dir == "/data/mnist"
        assert settings.workers == 4

    def test_dotenv_file(self, clean_env, tmp_path) -> None:
        # load_dotenv writes os.environ directly; this pair removes the variable at teardown
        clean_env.setenv("PNC_ZOO_DIR", "unset")
        clean_env.delenv("PNC_ZOO_DIR")
        (tmp_path / ".env").write_text("PNC_ZOO_DIR=/tmp/zoo-from-dotenv\n", encoding="utf-8")
        assert load_settings().zoo_dir == "/tmp/zoo-from-dotenv"

    def test_non_integer_workers(self, clean_env) -> None:
        clean_env.setenv("PNC_WORKERS", "many")
        with pytest.raises(ConfigError):
            load_settings()


class TestRunConfig:
    """Schema validation and precedence."""

    def test_defaults_are_the_small_scale_setting(self) -> None:
        config = RunConfig()
        assert config.target_classes == [0, 1, 2, 3, 4]
        assert config.cloned_classes == [5]
        assert config.rest_classes == [6, 7, 8, 9]
        assert config.data_fraction == 0.3

    def test_parse_classes(self) -> None:
        assert parse_classes("0-4") == [0, 1, 2, 3, 4]
        assert parse_classes("7,5, 6") == [5, 6, 7]
        assert parse_classes("1,3-4") == [1, 3, 4]
        with pytest.raises(ConfigError):
            parse_classes("a-b")

    def test_parse_override(self) -> None:
        assert parse_override("epochs=3") == ("epochs", 3)
        assert parse_override("target_arch=lenet") == ("target_arch", "lenet")
        assert parse_override("budgets=[2, 4, 20]") == ("budgets", [2, 4, 20])
        with pytest.raises(ConfigError):
            parse_override("epochs")

    def test_precedence(self, tmp_path) -> None:
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"seed": 3, "epochs": 4, "data_dir": "from-file"}), encoding="utf-8")
        config = load_run_config(path, overrides={"seed": 9, "lr": None}, defaults={"data_dir": "env", "workers": 2})
        assert config.seed == 9
        assert config.epochs == 4
        assert config.data_dir == "from-file"
        assert config.workers == 2
        assert config.lr == 0.01

    def test_class_specs_are_parsed(self) -> None:
        config = load_run_config(overrides={"target_classes": "0-2", "source_classes": "3-5", "cloned_classes": "4"})
        assert config.target_classes == [0, 1, 2]

    @pytest.mark.parametrize(
        "overrides",
        [
            {"cloned_classes": "3"},
            {"target_classes": "0-5"},
            {"num_masks": 10},
            {"epochs": 0},
            {"unknown_knob": 1},
            {"target_arch": "resnet"},
        ],
    )
    def test_schema_violations(self, overrides) -> None:
        with pytest.raises(ConfigError):
            load_run_config(overrides=overrides)

    def test_missing_and_invalid_files(self, tmp_path) -> None:
        with pytest.raises(ConfigError, match="not found"):
            load_run_config(tmp_path / "absent.json")
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            load_run_config(bad)

    def test_digest_tracks_content(self) -> None:
        assert RunConfig().digest() == RunConfig().digest()
        assert RunConfig().digest() != RunConfig(seed=1).digest()

    def test_updated_validates(self) -> None:
        with pytest.raises(ConfigError):
            RunConfig().updated(cloned_classes=[0])


class TestSeeding:
    """Named sub-streams."""

    def test_same_name_same_stream(self) -> None:
        np.testing.assert_array_equal(substream(0, "masks").random(4), substream(0, "masks").random(4))

    def test_names_and_seeds_separate_streams(self) -> None:
        base = substream(0, "masks").random(4)
        assert not np.array_equal(base, substream(0, "heldout").random(4))
        assert not np.array_equal(base, substream(1, "masks").random(4))

    def test_derive_seed_is_stable(self) -> None:
        assert derive_seed(5, "data") == derive_seed(5, "data")
        assert 0 <= derive_seed(5, "data") < 2**31 - 1


class TestOutput:
    """Timer and console output."""

    def test_timer_records_elapsed(self) -> None:
        with timer("stage") as t:
            sum(range(1000))
        assert t.label == "stage"
        assert t.elapsed_ms >= 0.0

    def test_format_accuracy(self) -> None:
        text = format_accuracy({"ori_acc": 0.95, "tar_acc": None, "avg_acc": 0.9})
        assert text == "Ori 95.00% | Tar n/a | Avg 90.00% | Macro n/a"

    def test_print_json_sorts_keys(self, capsys) -> None:
        print_json({"b": 1, "a": 2})
        out = capsys.readouterr().out
        assert out.index('"a"') < out.index('"b"')

    def test_print_clone_results(self, capsys) -> None:
        print_clone_results(
            {
                "trace": [{"position": 1, "convergence_value": 0.2, "ori_acc": 0.9}],
                "chosen_position": 1,
                "final": {"avg_acc": 0.9},
                "packet": {"bytes": 100, "ratio_to_source": None},
            }
        )
        out = capsys.readouterr().out
        assert "CLONED MODEL (R=1)" in out
        assert "100 bytes, n/a of the source checkpoint" in out
