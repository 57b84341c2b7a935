"""``pnc`` console script: one subcommand per pipeline step.

Logs go to stderr (structlog); command results go to stdout as JSON or to the
files named by ``--out`` / ``--report``. Every PncError maps to its exit code.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, NoReturn, Sequence

import numpy as np
import structlog

from cli.selftest import run_selftest
from contracts.errors import ConfigError, ContractError, PncError
from digits.dataset import class_split, subsample
from digits.idx import load_mnist
from digits.patches import PatchGrid, gen_masks, stack_masks
from evaluation.metrics import accuracy
from evaluation.reports import clone_markdown, write_report
from evaluation.similarity import locality_matrices, write_heat_image
from evaluation.sweep import sweep, write_sweep
from graft.pipeline import clone, prepare_context
from localize.masks import binarize_topk, default_budgets
from localize.trainer import train_masks
from nets.checkpoint import load_checkpoint, save_checkpoint
from nets.train import pretrain_checkpoint
from packet.codec import read_packet
from packet.transfer import detach, pack, unpack
from packet.transfer import repair as repair_model
from surrogates.model_set import fit_set, load_model_set, save_model_set
from utils.config_loader import load_settings
from utils.logging_config import configure_logging
from utils.output import print_clone_results, print_json
from utils.run_config import RunConfig, load_run_config, parse_classes, parse_override
from utils.seeding import derive_seed, substream

logger = structlog.get_logger(__name__)

ARCHS = ("lenet", "plaincnn", "mlp")


def _stamp(payload: dict[str, Any]) -> dict[str, Any]:
    return {"timestamp": datetime.now(timezone.utc).isoformat(), **payload}


class _Parser(argparse.ArgumentParser):
    """Usage errors raise ConfigError so they share the exit code and the --error-json path."""

    def error(self, message: str) -> NoReturn:
        raise ConfigError(f"{self.prog}: {message}")


def _add_global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # subcommand copies leave unset flags alone so the top-level value survives
    def default(value: Any) -> Any:
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--config", type=Path, default=default(None), help="JSON run config file")
    parser.add_argument(
        "--set",
        dest="sub_overrides" if suppress else "overrides",
        action="append",
        default=default([]),
        metavar="KEY=VALUE",
        help="Override one RunConfig field (repeatable); beats --config",
    )
    parser.add_argument("--seed", type=int, default=default(None), help="Root seed")
    parser.add_argument("--data", type=Path, default=default(None), help="Directory holding the MNIST IDX files")
    parser.add_argument("--log-level", default=default(None), help="Log level (default from PNC_LOG_LEVEL)")
    parser.add_argument(
        "--error-json", action="store_true", default=default(False), help="Print errors as JSON on stdout"
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="pnc",
        description="Partial network cloning on MNIST: pre-train, localize, graft, pack and evaluate.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    _add_global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _add_global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_command(name: str, **kwargs: Any) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_command("pretrain", help="Train a network on a class subset and save a PNCM checkpoint")
    p.add_argument("--arch", choices=ARCHS, default="lenet")
    p.add_argument("--classes", required=True, help='Class spec, e.g. "0-4"')
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--report", type=Path)

    p = add_command("surrogates", help="Precompute the local model set G for a source checkpoint")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--classes", required=True, help="Classes to clone")
    p.add_argument("--out", type=Path, required=True)

    p = add_command("localize", help="Train selection masks against a precomputed G and dump them as JSON")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--surrogates", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = add_command("clone", help="Clone classes from a source checkpoint into a target checkpoint")
    p.add_argument("--target", type=Path, required=True)
    p.add_argument("--source", type=Path, required=True)
    p.add_argument("--classes", required=True, help="Classes to clone")
    p.add_argument("--out", type=Path, required=True, help="Packet path (.pncp)")
    p.add_argument("--report", type=Path, help="Report path (default: next to the packet)")

    p = add_command("eval", help="Accuracy of a cloned model (packet + zoo) or of a plain checkpoint")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--packet", type=Path)
    group.add_argument("--ckpt", type=Path)
    p.add_argument("--zoo", type=Path, help="Zoo directory (default from PNC_ZOO_DIR)")
    p.add_argument("--out", type=Path)

    p = add_command("simmatrix", help="Source- and module-mode similarity matrices over a source's classes")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--heat", type=Path, help="Heat image of the module-mode matrix (.ppm or .pgm)")

    p = add_command("sweep", help="One clone run per mask budget or per insertion position")
    p.add_argument("--target", type=Path, required=True)
    p.add_argument("--source", type=Path, required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--axis", choices=("budget", "position"), required=True)
    p.add_argument("--values", help="Comma-separated axis values (default: the axis' standard grid)")
    p.add_argument("--out", type=Path, required=True, help="CSV path; a markdown summary is written next to it")

    p = add_command("pack", help="Rebuild a cloned model from a packet and the zoo, then re-encode it")
    p.add_argument("--packet", type=Path, required=True)
    p.add_argument("--zoo", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = add_command("unpack", help="Rebuild a cloned model and report it; optionally repair it on D_t")
    p.add_argument("--packet", type=Path, required=True)
    p.add_argument("--zoo", type=Path)
    p.add_argument("--repair", action="store_true", help="Re-fit masks, adapter and head at the packet's R")
    p.add_argument("--out", type=Path, help="Packet path for the repaired model")

    p = add_command("detach", help="Drop the cloned branch and write the untouched target checkpoint")
    p.add_argument("--packet", type=Path, required=True)
    p.add_argument("--zoo", type=Path)
    p.add_argument("--out", type=Path, required=True)

    add_command("selftest", help="Gradient checks and oracle comparisons on toy instances")
    return parser


def _parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    return _build_parser().parse_args(argv)


def _config(args: argparse.Namespace, env_defaults: dict[str, Any]) -> RunConfig:
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.data is not None:
        overrides["data_dir"] = str(args.data)
    overrides.update(parse_override(item) for item in [*args.overrides, *getattr(args, "sub_overrides", [])])
    return load_run_config(args.config, overrides, defaults=env_defaults)


def cmd_pretrain(args: argparse.Namespace, config: RunConfig) -> dict[str, Any]:
    classes = parse_classes(args.classes)
    mnist = load_mnist(config.data_dir)
    net, history = pretrain_checkpoint(args.arch, classes, mnist.train, config, args.out)
    size = net.origin.size if net.origin is not None else 0
    test = accuracy(net, class_split(mnist.test, classes), classes, classes, config.eval_batch)
    report = _stamp(
        {
            "command": "pretrain",
            "config": config.echo(),
            "arch": args.arch,
            "classes": classes,
            "checkpoint": {"path": str(args.out), "bytes": size},
            "history": history.to_dict(),
            "test": test.to_dict(),
        }
    )
    if args.report is not None:
        write_report(report, args.report)
    return report


def _anchor_images(config: RunConfig, classes: Sequence[int]) -> np.ndarray:
    mnist = load_mnist(config.data_dir)
    sample = subsample(class_split(mnist.train, classes), config.data_fraction, substream(config.seed, "data"))
    return sample.images


def cmd_surrogates(args: argparse.Namespace, config: RunConfig) -> dict[str, Any]:
    source = load_checkpoint(args.ckpt)
    classes = parse_classes(args.classes)
    source.class_columns(classes)
    images = _anchor_images(config, classes)
    grid = PatchGrid(config.grid_rows, config.grid_cols, *images.shape[-2:])
    masks = stack_masks(gen_masks(grid.num_patches, config.num_masks, substream(config.seed, "masks")))
    model_set = fit_set(
        source,
        images,
        masks,
        grid,
        classes,
        ridge_lambda=config.ridge_lambda,
        sigma=config.kernel_sigma,
        workers=config.workers,
        seed=derive_seed(config.seed, "masks"),
        source_arch=source.arch,
    )
    size = save_model_set(model_set, args.out)
    return {
        "command": "surrogates",
        "path": str(args.out),
        "bytes": size,
        "anchors": len(model_set),
        "classes": classes,
    }


def cmd_localize(args: argparse.Namespace, config: RunConfig) -> dict[str, Any]:
    source = load_checkpoint(args.ckpt)
    model_set = load_model_set(args.surrogates)
    if model_set.source_arch and model_set.source_arch != source.arch:
        raise ContractError(f"surrogates were fitted on {model_set.source_arch!r}, checkpoint is {source.arch!r}")
    images = _anchor_images(config, model_set.classes)
    if images.shape[0] != len(model_set):
        raise ContractError(
            f"config selects {images.shape[0]} anchors but the surrogate file holds {len(model_set)}; "
            "use the seed and data_fraction it was fitted with"
        )
    widths = source.mask_widths
    budgets = list(config.budgets) if config.budgets is not None else default_budgets(widths, config.budget_fraction)
    soft = train_masks(
        source,
        model_set,
        images,
        budgets,
        steps=config.mask_steps,
        lr=config.mask_lr,
        seed=substream(config.seed, "localize"),
        momentum=config.mask_momentum,
        batch_size=config.mask_batch,
        penalty=config.budget_penalty,
    )
    binary = binarize_topk(soft)
    dump = _stamp(
        {
            "command": "localize",
            "config": config.echo(),
            "classes": list(model_set.classes),
            "masks": binary.to_dict(),
            "history": list(soft.history),
        }
    )
    write_report(dump, args.out)
    return {"command": "localize", "path": str(args.out), "budgets": budgets, "selected": binary.selected}


def cmd_clone(args: argparse.Namespace, config: RunConfig) -> dict[str, Any]:
    target = load_checkpoint(args.target)
    source = load_checkpoint(args.source)
    config = config.updated(
        target_classes=list(target.classes),
        source_classes=list(source.classes),
        cloned_classes=parse_classes(args.classes),
    )
    _, _, report = clone(config, args.target, args.source, packet_path=args.out)
    report_path = args.report if args.report is not None else args.out.with_suffix(".json")
    write_report(report, report_path)
    report_path.with_suffix(".md").write_text(clone_markdown(report), encoding="utf-8")
    print_clone_results(report)
    return {"command": "clone", "packet": str(args.out), "report": str(report_path)}


def _zoo(args: argparse.Namespace, zoo_dir: str) -> Path:
    return args.zoo if args.zoo is not None else Path(zoo_dir)


def cmd_eval(args: argparse.Namespace, config: RunConfig, zoo_dir: str) -> dict[str, Any]:
    mnist = load_mnist(config.data_dir)
    if args.packet is not None:
        model = unpack(args.packet, _zoo(args, zoo_dir))
        classes = model.class_map
        result = accuracy(model, class_split(mnist.test, classes), classes, model.target.classes, config.eval_batch)
        subject = {"packet": str(args.packet), "position": model.position, "cloned_classes": model.cloned_classes}
    else:
        net = load_checkpoint(args.ckpt)
        classes = list(net.classes)
        result = accuracy(net, class_split(mnist.test, classes), classes, classes, config.eval_batch)
        subject = {"checkpoint": str(args.ckpt), "arch": net.arch}
    report = _stamp({"command": "eval", **subject, "classes": classes, "accuracy": result.to_dict()})
    if args.out is not None:
        write_report(report, args.out)
    return report


def cmd_simmatrix(args: argparse.Namespace, config: RunConfig) -> dict[str, Any]:
    source = load_checkpoint(args.ckpt)
    mnist = load_mnist(config.data_dir)
    source_mode, module_mode = locality_matrices(source, mnist.train, config)
    report = _stamp(
        {
            "command": "simmatrix",
            "config": config.echo(),
            "source": {"arch": source.arch, "classes": list(source.classes)},
            "source_mode": source_mode.to_dict(),
            "module_mode": module_mode.to_dict(),
        }
    )
    write_report(report, args.out)
    if args.heat is not None:
        write_heat_image(module_mode, args.heat)
        write_heat_image(source_mode, args.heat.with_name(f"{args.heat.stem}-source{args.heat.suffix}"))
    return {
        "command": "simmatrix",
        "path": str(args.out),
        "source_mode_gap": source_mode.diagonal_gap(),
        "module_mode_gap": module_mode.diagonal_gap(),
    }


def cmd_sweep(args: argparse.Namespace, config: RunConfig) -> dict[str, Any]:
    target = load_checkpoint(args.target)
    source = load_checkpoint(args.source)
    config = config.updated(
        target_classes=list(target.classes),
        source_classes=list(source.classes),
        cloned_classes=parse_classes(args.classes),
    )
    values = None
    if args.values:
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"--values must be comma-separated numbers, got {args.values!r}") from exc
    context = prepare_context(config, target, source)
    frame = sweep(context, config, args.axis, values)
    csv_path, md_path = write_sweep(frame, args.axis, args.out)
    return {"command": "sweep", "axis": args.axis, "csv": str(csv_path), "markdown": str(md_path), "rows": len(frame)}


def cmd_pack(args: argparse.Namespace, zoo_dir: str) -> dict[str, Any]:
    model = unpack(args.packet, _zoo(args, zoo_dir))
    size = pack(model, args.out)
    identical = args.out.read_bytes() == args.packet.read_bytes()
    return {"command": "pack", "path": str(args.out), "bytes": size, "identical": identical}


def cmd_unpack(args: argparse.Namespace, config: RunConfig, zoo_dir: str) -> dict[str, Any]:
    model = unpack(args.packet, _zoo(args, zoo_dir))
    summary: dict[str, Any] = {
        "command": "unpack",
        "header": read_packet(args.packet).header(),
        "num_outputs": model.num_outputs,
    }
    if not args.repair:
        return summary
    if args.out is None:
        raise ConfigError("--repair needs --out for the repaired packet")
    config = config.updated(
        target_classes=list(model.target.classes),
        source_classes=list(model.source.classes),
        cloned_classes=list(model.cloned_classes),
        position=model.position,
    )
    context = prepare_context(config, model.target, model.source)
    fit = repair_model(model, context.surrogates, context.anchors.images, config, context.negative_images)
    summary.update(
        repaired=str(args.out),
        bytes=pack(fit.model, args.out),
        convergence_value=fit.convergence_value,
    )
    return summary


def cmd_detach(args: argparse.Namespace, zoo_dir: str) -> dict[str, Any]:
    target = detach(unpack(args.packet, _zoo(args, zoo_dir)))
    size = save_checkpoint(target, args.out)
    return {"command": "detach", "path": str(args.out), "bytes": size, "classes": list(target.classes)}


def cmd_selftest(config: RunConfig) -> dict[str, Any]:
    results = run_selftest(config.seed)
    failed = [r.name for r in results if not r.passed]
    return {"command": "selftest", "passed": not failed, "failed": failed, "checks": [r.to_dict() for r in results]}


def _dispatch(args: argparse.Namespace, config: RunConfig, zoo_dir: str) -> dict[str, Any]:
    handlers: dict[str, Callable[[], dict[str, Any]]] = {
        "pretrain": lambda: cmd_pretrain(args, config),
        "surrogates": lambda: cmd_surrogates(args, config),
        "localize": lambda: cmd_localize(args, config),
        "clone": lambda: cmd_clone(args, config),
        "eval": lambda: cmd_eval(args, config, zoo_dir),
        "simmatrix": lambda: cmd_simmatrix(args, config),
        "sweep": lambda: cmd_sweep(args, config),
        "pack": lambda: cmd_pack(args, zoo_dir),
        "unpack": lambda: cmd_unpack(args, config, zoo_dir),
        "detach": lambda: cmd_detach(args, zoo_dir),
        "selftest": lambda: cmd_selftest(config),
    }
    return handlers[args.command]()


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args: argparse.Namespace | None = None
    try:
        settings = load_settings()
        configure_logging(settings.log_level, settings.log_format)
        args = _parse_args(argv)
        if args.log_level:
            configure_logging(args.log_level, settings.log_format)
        config = _config(args, {"data_dir": settings.mnist_dir, "workers": settings.workers})
        logger.info("cli.start", command=args.command, seed=config.seed, config_digest=config.digest())
        result = _dispatch(args, config, settings.zoo_dir)
    except PncError as exc:
        command = args.command if args is not None else None
        logger.error("cli.failed", command=command, error=type(exc).__name__, message=str(exc))
        if args.error_json if args is not None else "--error-json" in argv:
            print(json.dumps(exc.to_dict(), sort_keys=True))
        return exc.exit_code
    if args.command != "clone":
        print_json(result)
    if args.command == "selftest" and not result["passed"]:
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
