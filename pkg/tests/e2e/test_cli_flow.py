"""End-to-end CLI flow: pretrain two networks, clone, then pack / unpack / detach the packet.

Runs on fake 28x28 MNIST; opt in with PNC_RUN_SLOW=1.
"""

import json
import os

import pytest
from cli.main import main
from nets.checkpoint import load_checkpoint

pytestmark = pytest.mark.skipif(os.getenv("PNC_RUN_SLOW") != "1", reason="PNC_RUN_SLOW not set to 1")

FAST = [
    "--set", "pretrain_epochs=2",
    "--set", "data_fraction=0.5",
    "--set", "num_masks=20",
    "--set", "heldout_masks=5",
    "--set", "mask_steps=5",
    "--set", "epochs=1",
    "--set", "eval_batch=64",
]


class TestCliFlow:
    """One full clone-and-transfer round."""

    @pytest.mark.slow
    def test_clone_pack_unpack_detach(self, tmp_path, capsys, make_fake_mnist) -> None:
        data = make_fake_mnist(10, 4)
        zoo = tmp_path / "zoo"
        common = ["--data", str(data), *FAST]

        for classes, name in (("0-2", "mlp-012.pncm"), ("3-6", "mlp-3456.pncm")):
            assert main([*common, "pretrain", "--arch", "mlp", "--classes", classes, "--out", str(zoo / name)]) == 0
        capsys.readouterr()

        packet = tmp_path / "out" / "clone.pncp"
        code = main(
            [*common, "clone", "--target", str(zoo / "mlp-012.pncm"), "--source", str(zoo / "mlp-3456.pncm"),
             "--classes", "4", "--out", str(packet)]
        )
        assert code == 0
        report = json.loads(packet.with_suffix(".json").read_text(encoding="utf-8"))
        assert report["cloned_classes"] == [4]
        assert report["packet"]["bytes"] == packet.stat().st_size
        assert packet.with_suffix(".md").is_file()
        capsys.readouterr()

        repacked = tmp_path / "re.pncp"
        assert main([*common, "pack", "--packet", str(packet), "--zoo", str(zoo), "--out", str(repacked)]) == 0
        assert json.loads(capsys.readouterr().out)["identical"] is True

        assert main([*common, "unpack", "--packet", str(packet), "--zoo", str(zoo)]) == 0
        assert json.loads(capsys.readouterr().out)["num_outputs"] == 4

        detached = tmp_path / "detached.pncm"
        assert main([*common, "detach", "--packet", str(packet), "--zoo", str(zoo), "--out", str(detached)]) == 0
        assert detached.read_bytes() == (zoo / "mlp-012.pncm").read_bytes()
        assert load_checkpoint(detached).classes == [0, 1, 2]

        assert main([*common, "eval", "--packet", str(packet), "--zoo", str(zoo)]) == 0
        assert json.loads(capsys.readouterr().out)["accuracy"]["tar_count"] == 4
