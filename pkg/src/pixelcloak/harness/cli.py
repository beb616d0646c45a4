"""Command-line interface: train, attack, detect, eval.

Defaults mirror the benchmark configuration (eps=16, delta=1, gamma=0.99,
fpr=0.05). Dataset handling is shared: `--format synthetic` generates the
deterministic blob dataset from the seed, `--format cifar10-bin` reads a
CIFAR-10 binary batch from `--in`. All subcommands respect the 60/20/20
split convention (train / calibrate / attack-evaluate).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..attacks.config import VARIANTS, AttackConfig
from ..attacks.fgsm import run_fgsm_attack
from ..detector import calibrate_threshold, detection_score
from ..models.architectures import get_architecture
from ..models.network import predict
from ..models.serialize import load_model, save_model
from ..models.training import train_classifier
from ..transforms.specs import spec_from_label
from .dataset import generate_synthetic, load_cifar_binary, split_records
from .experiment import SYNTHETIC_COUNT, config_from_dict, run_experiment
from .metrics import misleading_rate, psnr


def _load_split(format_name, dataset_path, seed, synthetic_count=SYNTHETIC_COUNT):
    if format_name == "synthetic":
        records = generate_synthetic(seed=seed, count=synthetic_count)
    else:
        records = load_cifar_binary(dataset_path)
    return split_records(records, seed)


def _cmd_train(args):
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    arch = get_architecture(cfg["arch"], classes=cfg.get("classes", 10))
    seed = cfg.get("seed", 0)
    train, _, _ = _load_split(
        cfg.get("format", "synthetic"),
        cfg.get("dataset", ""),
        seed,
        cfg.get("synthetic_count", SYNTHETIC_COUNT),
    )
    hyper = dict(cfg.get("hyper", {}))
    hyper.setdefault("seed", seed)
    model = train_classifier(arch, train, hyper)
    save_model(model, args.out)
    print(
        f"trained {arch.name} on {len(train)} images: "
        f"held-out accuracy {model.metadata['accuracy']:.3f} -> {args.out}"
    )
    return 0


def _cmd_attack(args):
    model_paths = [p for p in args.models.split(",") if p]
    models = tuple(load_model(p) for p in model_paths)
    _, _, records = _load_split(args.format, getattr(args, "in"), args.seed)
    records = records[: args.count]
    config = AttackConfig(
        variant=args.variant,
        models=models,
        epsilon=args.eps,
        delta=args.delta,
        mode=args.mode,
        gamma=args.gamma,
        master_seed=args.seed,
        classifier_mode=args.classifier_mode,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    images, targets, linfs, psnrs = [], [], [], []
    for i, rec in enumerate(records):
        res = run_fgsm_attack(config, rec.image, i)
        images.append(res.image)
        targets.append(-1 if res.target_class is None else res.target_class)
        linfs.append(res.linf)
        psnrs.append(psnr(rec.image, res.image))
    np.savez_compressed(
        out_dir / "adversarial.npz",
        images=np.stack(images),
        labels=np.array([r.label for r in records]),
        targets=np.array(targets),
        linf=np.array(linfs),
    )
    preds = [predict(models[0], img) for img in images]
    rate = misleading_rate(preds, [r.label for r in records], k=1)
    print(
        f"{config.label()} on {len(records)} images: top-1 misleading "
        f"{rate:.1f}% on {models[0].arch.name}, max L-inf {max(linfs):.1f}, "
        f"mean PSNR {np.mean(psnrs):.2f} dB -> {out_dir / 'adversarial.npz'}"
    )
    return 0


def _cmd_detect(args):
    model = load_model(args.model)
    spec = spec_from_label(args.defense)
    _, calib, evaluate = _load_split(args.format, getattr(args, "in"), args.seed)
    calib_scores = [detection_score(model, spec, r.image) for r in calib]
    tau = calibrate_threshold(calib_scores, args.fpr)
    eval_scores = [detection_score(model, spec, r.image) for r in evaluate]
    flagged = 100.0 * np.mean(np.asarray(eval_scores) > tau)
    print(
        f"{spec.label()} on {model.arch.name}: tau {tau:.6f} "
        f"(fpr target {args.fpr:.2f}, {len(calib)} calibration images); "
        f"clean flag rate {flagged:.1f}% on {len(evaluate)} held-out images"
    )
    return 0


def _cmd_eval(args):
    with open(args.config, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if args.out:
        data["output_dir"] = args.out
    config = config_from_dict(data)
    report = run_experiment(config)
    where = f" -> {Path(config.output_dir) / 'report.csv'}" if config.output_dir else ""
    print(
        f"evaluated {len(config.attacks)} attack(s): {len(report.rows)} report rows, "
        f"{len(report.failures)} failures{where}"
    )
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pixelcloak",
        description="Train toy classifiers, craft adversarial images, "
        "calibrate detectors, and run benchmark evaluations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a classifier from a JSON config")
    p.add_argument("--config", required=True, help="training config JSON path")
    p.add_argument("--out", required=True, help="output model file")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("attack", help="craft adversarial images")
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--models", required=True, help="comma-separated model files")
    p.add_argument("--eps", type=float, default=16.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("targeted", "untargeted"), default="targeted")
    p.add_argument("--classifier-mode", choices=("random", "ensemble"), default="random")
    p.add_argument("--count", type=int, default=100, help="images to attack")
    p.add_argument("--format", choices=("synthetic", "cifar10-bin"), default="synthetic")
    p.add_argument("--in", default="", help="dataset path (cifar10-bin)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("detect", help="calibrate a detector threshold")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--defense", required=True, help="defense spec, e.g. requantize:4")
    p.add_argument("--fpr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("synthetic", "cifar10-bin"), default="synthetic")
    p.add_argument("--in", default="", help="dataset path (cifar10-bin)")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval", help="run a full experiment from a JSON config")
    p.add_argument("--config", required=True, help="run config JSON path")
    p.add_argument("--out", default="", help="output directory (overrides config)")
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
