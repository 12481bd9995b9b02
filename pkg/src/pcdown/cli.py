"""Command-line entry points.

Subcommands: pretrain, train, eval, sample, bench, robustness, sweep.
Every run takes --seed and --out; artifacts (report.txt, epochs.csv,
checkpoints, exported clouds) land in the --out directory.

Exit codes: 0 success, 2 configuration/usage error, 3 diverged optimization.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from pathlib import Path


from .cloud import PointCloud, make_synthetic
from .config import RunConfig, preset
from .errors import ConfigurationError, DivergenceError
from .harness import (
    bench,
    evaluate,
    load_head,
    load_run,
    make_splits,
    pretrain_head,
    robustness,
    save_head,
    save_run,
    sweep,
    train_sampler,
)
from .io import load_xyz, save_xyz
from .sampling import downsample, save_sparse_matrix, sparsify
from .samplers import SamplerSpec, run_sampler

__all__ = ["main", "build_parser"]


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _add_run_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, required=True, help="run seed")
    sub.add_argument("--out", required=True, help="output directory")


def _add_config_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--task", choices=("classification", "reconstruction", "reconstruction_fold", "registration"))
    sub.add_argument("--dataset", choices=("synthetic", "dir"))
    sub.add_argument("--data-root", dest="data_root")
    sub.add_argument("--n", type=int)
    sub.add_argument("--m", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--batch-size", dest="batch_size", type=int)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--tau-start", dest="tau_start", type=float)
    sub.add_argument("--tau-min", dest="tau_min", type=float)
    sub.add_argument("--lr-start", dest="lr_start", type=float)
    sub.add_argument("--lr-end", dest="lr_end", type=float)
    sub.add_argument("--threshold", dest="sparsify_threshold", type=float)
    sub.add_argument("--flexible", action="store_true", default=None)
    sub.add_argument("--m-choices", dest="m_choices", type=_int_list)
    sub.add_argument("--joint", action="store_true", default=None)
    sub.add_argument("--head-epochs", dest="head_epochs", type=int)
    sub.add_argument("--head-lr", dest="head_lr", type=float)
    sub.add_argument("--paper-scale", action="store_true",
                     help="keep full-size network widths instead of the toy preset")
    sub.add_argument("--set", dest="extra", action="append", default=[],
                     metavar="KEY=VALUE", help="override any RunConfig field")


def _config_from_args(args, base: RunConfig | None = None) -> RunConfig:
    """Layer CLI flags over either a preset or an existing config."""
    overrides = {}
    names = {f.name for f in fields(RunConfig)}
    for name in names:
        if hasattr(args, name) and getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    for item in getattr(args, "extra", []):
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, raw = item.partition("=")
        if key not in names:
            raise ConfigurationError(f"--set: unknown config field {key!r}")
        current = getattr(RunConfig(), key)
        if isinstance(current, bool):
            overrides[key] = raw == "True"
        elif isinstance(current, int):
            overrides[key] = int(raw)
        elif isinstance(current, float):
            overrides[key] = float(raw)
        elif isinstance(current, tuple):
            overrides[key] = tuple(int(v) for v in raw.split(",")) if raw else ()
        else:
            overrides[key] = raw
    overrides["seed"] = args.seed
    if base is not None:
        return replace(base, **overrides).validate()
    task = overrides.pop("task", "classification")
    return preset(task, toy=not getattr(args, "paper_scale", False), **overrides)


def _cmd_pretrain(args) -> int:
    config = _config_from_args(args)
    head, report = pretrain_head(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_head(out / "head.ckpt", config, head)
    report.save(out)
    print(f"wrote {out / 'head.ckpt'}")
    for key in sorted(report.metrics):
        print(f"{key}: {report.metrics[key]:.4f}")
    return 0


def _load_head_arg(args):
    if not args.head:
        raise ConfigurationError("--head checkpoint is required (run `pretrain` first)")
    path = Path(args.head)
    if not path.exists():
        raise ConfigurationError(f"head checkpoint {path} does not exist")
    return load_head(path)


def _cmd_train(args) -> int:
    head, head_config = _load_head_arg(args)
    config = _config_from_args(args, base=head_config)
    train_items, test_items = make_splits(config)
    net, report = train_sampler(config, head, train_items)
    eval_report = evaluate(net, head, config, test_items, [config.m])
    report.metrics.update(eval_report.metrics)
    report.diagnostics.update(eval_report.diagnostics)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_run(out / "model.ckpt", config, net, head)
    report.save(out)
    print(f"wrote {out / 'model.ckpt'}")
    for key in sorted(report.metrics):
        print(f"{key}: {report.metrics[key]:.4f}")
    return 0


def _cmd_eval(args) -> int:
    net, head, config = load_run(_require_checkpoint(args))
    config = _config_from_args(args, base=config)
    _, test_items = make_splits(config)
    m_list = args.m_list or (config.m,)
    report = evaluate(net, head, config, test_items, m_list)
    out = Path(args.out)
    report.save(out)
    for key in sorted(report.metrics):
        print(f"{key}: {report.metrics[key]:.4f}")
    return 0


def _require_checkpoint(args) -> Path:
    path = Path(args.checkpoint)
    if not path.exists():
        raise ConfigurationError(f"checkpoint {path} does not exist")
    return path


def _cmd_sample(args) -> int:
    net, head, config = load_run(_require_checkpoint(args))
    if args.input:
        cloud = load_xyz(args.input)
    else:
        cloud = make_synthetic(args.shape, config.n, seed=args.seed)
    m = args.m or config.m
    result = downsample(cloud, net, m, config.tau_min, config.sparsify_threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_xyz(out / "generated.xyz", PointCloud(result.generated, label=cloud.label))
    save_xyz(out / "completed.xyz", cloud.subset(result.completed))
    (out / "indices.txt").write_text(
        "matched " + " ".join(str(i) for i in result.matched) + "\n"
        "completed " + " ".join(str(i) for i in result.completed) + "\n"
    )
    if args.export_matrix:
        import torch

        pts = torch.from_numpy(cloud.points.copy()).float()
        with torch.no_grad():
            matrix = net.sampling_matrix(pts, config.tau_min, m=m)
        save_sparse_matrix(out / "matrix.txt", sparsify(matrix, config.sparsify_threshold))
    if args.baseline:
        spec = SamplerSpec(kind=args.baseline, m=m, seed=args.seed)
        idx = run_sampler(cloud, spec)
        save_xyz(out / f"{args.baseline}.xyz", cloud.subset(idx))
    print(f"wrote downsampled cloud(s) to {out}")
    return 0


def _cmd_bench(args) -> int:
    report = bench(n=args.n or 1024, m_grid=args.m_grid, repeats=args.repeats, seed=args.seed)
    out = Path(args.out)
    report.save(out)
    for key in sorted(report.timings):
        print(f"{key}: {report.timings[key] * 1e3:.3f} ms")
    return 0


def _cmd_robustness(args) -> int:
    net, head, config = load_run(_require_checkpoint(args))
    config = _config_from_args(args, base=config)
    _, test_items = make_splits(config)
    report = robustness(net, head, config, test_items, args.levels, seed=args.seed)
    report.save(Path(args.out))
    for key in sorted(report.metrics):
        print(f"{key}: {report.metrics[key]:.4f}")
    return 0


def _cmd_sweep(args) -> int:
    head, head_config = _load_head_arg(args)
    config = _config_from_args(args, base=head_config)
    train_items, test_items = make_splits(config)
    values = args.values
    if args.field not in ("alpha", "tau_min", "lambda_emd", "translation_weight"):
        try:
            values = tuple(int(v) for v in values)
        except (TypeError, ValueError):
            pass
    report = sweep(config, args.field, values, head, train_items, test_items)
    report.save(Path(args.out))
    for key in sorted(report.metrics):
        print(f"{key}: {report.metrics[key]:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcdown",
        description="Task-oriented point cloud downsampling: train and evaluate "
        "a learned sampling matrix against classification, reconstruction, or "
        "registration networks, with classical baselines.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("pretrain", help="train a task head on full clouds")
    _add_run_args(p)
    _add_config_args(p)
    p.set_defaults(fn=_cmd_pretrain)

    p = subs.add_parser("train", help="train the sampler against a frozen head")
    _add_run_args(p)
    _add_config_args(p)
    p.add_argument("--head", help="path to a pretrained head checkpoint")
    p.set_defaults(fn=_cmd_train)

    p = subs.add_parser("eval", help="evaluate a trained checkpoint over an m list")
    _add_run_args(p)
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--m-list", dest="m_list", type=_int_list)
    p.set_defaults(fn=_cmd_eval)

    p = subs.add_parser("sample", help="downsample one cloud with a checkpoint")
    _add_run_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", help=".xyz file; omit to use a synthetic shape")
    p.add_argument("--shape", default="sphere", help="synthetic shape when no --input")
    p.add_argument("--m", type=int)
    p.add_argument("--export-matrix", action="store_true", dest="export_matrix")
    p.add_argument("--baseline", choices=("random", "fps", "voxel"),
                   help="also write a classical-sampler result")
    p.set_defaults(fn=_cmd_sample)

    p = subs.add_parser("bench", help="time classical vs learned samplers")
    _add_run_args(p)
    p.add_argument("--n", type=int)
    p.add_argument("--m-grid", dest="m_grid", type=_int_list, default=(8, 32, 128, 512))
    p.add_argument("--repeats", type=int, default=5)
    p.set_defaults(fn=_cmd_bench)

    p = subs.add_parser("robustness", help="evaluate under additive Gaussian noise")
    _add_run_args(p)
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--levels", type=_float_list, default=(0.0, 0.01, 0.02, 0.05, 0.1))
    p.set_defaults(fn=_cmd_robustness)

    p = subs.add_parser("sweep", help="retrain across values of one config field")
    _add_run_args(p)
    _add_config_args(p)
    p.add_argument("--head", help="path to a pretrained head checkpoint")
    p.add_argument("--field", required=True)
    p.add_argument("--values", type=_float_list, required=True)
    p.set_defaults(fn=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
