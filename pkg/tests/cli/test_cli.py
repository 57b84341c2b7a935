"""Tests for the ``pnc`` console script."""

import json
from pathlib import Path

import pytest
from cli.main import _config, _parse_args, main
from contracts.errors import ConfigError


@pytest.fixture
def mnist28(make_fake_mnist):
    """Small fake MNIST at the real 28x28 resolution."""
    return make_fake_mnist(6, 3)


class TestParser:
    """Argument parsing."""

    def test_global_flags_and_subcommand(self) -> None:
        args = _parse_args(
            ["--seed", "3", "--set", "epochs=2", "sweep", "--target", "t.pncm", "--source", "s.pncm",
             "--classes", "5", "--axis", "budget", "--out", "o.csv"]
        )
        assert args.seed == 3
        assert args.overrides == ["epochs=2"]
        assert args.command == "sweep"
        assert args.values is None

    def test_global_flags_after_the_subcommand(self) -> None:
        args = _parse_args(["eval", "--packet", "x.pncp", "--zoo", "z", "--data", "d", "--seed", "9", "--error-json"])
        assert args.data == Path("d")
        assert args.seed == 9
        assert args.error_json is True
        assert args.packet == Path("x.pncp")

    def test_subcommand_flags_override_top_level(self) -> None:
        args = _parse_args(["--seed", "1", "--data", "top", "selftest", "--seed", "2"])
        assert args.seed == 2
        assert args.data == Path("top")
        assert args.error_json is False

    def test_overrides_from_both_positions_are_merged(self) -> None:
        args = _parse_args(["--set", "epochs=2", "selftest", "--set", "seed=7"])
        config = _config(args, {})
        assert config.epochs == 2
        assert config.seed == 7

    def test_unknown_axis_is_a_config_error(self) -> None:
        with pytest.raises(ConfigError):
            _parse_args(["sweep", "--target", "t", "--source", "s", "--classes", "5", "--axis", "depth", "--out", "o"])

    def test_eval_needs_packet_or_checkpoint(self) -> None:
        with pytest.raises(ConfigError):
            _parse_args(["eval"])


class TestMain:
    """Exit codes and command results."""

    def test_schema_violation_exits_2(self) -> None:
        assert main(["--set", "epochs=0", "selftest"]) == 2

    def test_malformed_override_exits_2(self) -> None:
        assert main(["--set", "epochs", "selftest"]) == 2

    def test_error_json(self, mnist28, tmp_path, capsys) -> None:
        code = main(["--error-json", "--data", str(mnist28), "eval", "--ckpt", str(tmp_path / "absent.pncm")])
        assert code == 3
        payload = json.loads(capsys.readouterr().out)
        assert payload["error"] == "CheckpointFormatError"
        assert payload["exit_code"] == 3

    def test_usage_error_is_reported_as_json(self, capsys) -> None:
        assert main(["--error-json", "selftest", "--bogus"]) == 2
        payload = json.loads(capsys.readouterr().out)
        assert payload["error"] == "ConfigError"
        assert "--bogus" in payload["message"]

    def test_usage_error_without_json_prints_nothing_on_stdout(self, capsys) -> None:
        assert main(["eval"]) == 2
        assert capsys.readouterr().out == ""

    def test_pretrain_then_eval(self, mnist28, tmp_path, capsys) -> None:
        ckpt = tmp_path / "zoo" / "mlp-012.pncm"
        code = main(
            ["--data", str(mnist28), "--set", "pretrain_epochs=1", "pretrain", "--arch", "mlp", "--classes", "0-2",
             "--out", str(ckpt)]
        )
        assert code == 0
        trained = json.loads(capsys.readouterr().out)
        assert trained["classes"] == [0, 1, 2]
        assert trained["checkpoint"]["bytes"] == ckpt.stat().st_size

        assert main(["--data", str(mnist28), "eval", "--ckpt", str(ckpt)]) == 0
        evaluated = json.loads(capsys.readouterr().out)
        assert evaluated["arch"] == "mlp"
        assert evaluated["accuracy"]["ori_count"] == 9

    @pytest.mark.slow
    def test_selftest_passes(self, capsys) -> None:
        assert main(["selftest"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["passed"] is True
        assert result["failed"] == []
