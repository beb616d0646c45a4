"""Experiment orchestration: dataset in, attacks run, report out.

The clean dataset is split 60/20/20: the first part belongs to classifier
training (models arrive pre-trained as files), the second calibrates the
detectors, and the third is attacked and evaluated, so the detector never
judges an image it was calibrated on. Adversarial generation fans out
over a process pool; metric aggregation sorts results by image index
before folding, so worker scheduling never changes the report bytes.
"""

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from ..attacks.config import AttackConfig
from ..attacks.fgsm import run_fgsm_attack
from ..detector import calibrate_detectors, defended_predict, detectability
from ..models.network import predict
from ..models.serialize import load_model
from ..transforms.specs import (
    JPEG_QUALITIES,
    MEDIAN_KERNELS,
    REQUANTIZE_BITS,
    TransformSpec,
    spec_from_label,
)
from .dataset import generate_synthetic, load_cifar_binary, split_records
from .metrics import misleading_rate, psnr
from .report import EvalReport, ReportRow, write_report

DATASET_FORMATS = ("cifar10-bin", "synthetic")
SYNTHETIC_COUNT = 2500

# attack-config keys accepted from run-config JSON
_ATTACK_KEYS = (
    "variant",
    "mode",
    "epsilon",
    "delta",
    "gamma",
    "master_seed",
    "iterations",
    "classifier_mode",
    "di_probability",
    "eot_lambda",
    "name",
)


def full_defense_breakdown():
    """Every defense parameter of every kind, as evaluation specs."""
    specs = [TransformSpec("requantize", b) for b in REQUANTIZE_BITS]
    specs += [TransformSpec("median", k) for k in MEDIAN_KERNELS]
    specs += [TransformSpec("jpeg", q) for q in JPEG_QUALITIES]
    return tuple(specs)


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs; JSON-shaped attack dicts included."""

    format: str = "synthetic"
    dataset: str = ""
    seen_models: tuple = ()
    unseen_model: str = ""
    attacks: tuple = ()
    defenses: tuple = None  # "kind:param" labels; None -> full breakdown
    seed: int = 0
    output_dir: str = ""
    count: int = None  # cap on attacked images
    workers: int = 1
    fpr_target: float = 0.05
    synthetic_count: int = SYNTHETIC_COUNT

    def __post_init__(self):
        if self.format not in DATASET_FORMATS:
            raise ValueError(f"format must be one of {DATASET_FORMATS}, got '{self.format}'")
        if self.format == "cifar10-bin" and not self.dataset:
            raise ValueError("cifar10-bin format needs a dataset path")
        if not self.seen_models:
            raise ValueError("need at least one seen model")
        if not self.unseen_model:
            raise ValueError("need an unseen model")
        if self.unseen_model in self.seen_models:
            raise ValueError("the unseen model must be distinct from every seen model")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        object.__setattr__(self, "seen_models", tuple(self.seen_models))
        object.__setattr__(self, "attacks", tuple(dict(a) for a in self.attacks))
        if self.defenses is not None:
            object.__setattr__(self, "defenses", tuple(self.defenses))

    def defense_specs(self):
        if self.defenses is None:
            return full_defense_breakdown()
        specs = tuple(spec_from_label(label) for label in self.defenses)
        for spec in specs:
            if not spec.is_defense or spec.kind == "identity":
                raise ValueError(f"'{spec.label()}' is not a defense evaluation kind")
        return specs


def config_from_dict(data):
    """Build a RunConfig from parsed run-config JSON."""
    data = dict(data)
    unknown = set(data) - {f.name for f in RunConfig.__dataclass_fields__.values()}
    # dataclass_fields is a dict; keep the error readable
    if unknown:
        raise ValueError(f"unknown run-config fields: {sorted(unknown)}")
    for key in ("seen_models", "attacks", "defenses"):
        if key in data and data[key] is not None:
            data[key] = tuple(data[key])
    return RunConfig(**data)


def load_records(config):
    if config.format == "synthetic":
        return generate_synthetic(seed=config.seed, count=config.synthetic_count)
    return load_cifar_binary(config.dataset)


def _build_attack(attack_dict, models_by_path, seen_paths, default_seed):
    """Materialize one AttackConfig from its JSON-shaped dict."""
    d = dict(attack_dict)
    unknown = set(d) - set(_ATTACK_KEYS) - {"models"}
    if unknown:
        raise ValueError(f"unknown attack fields: {sorted(unknown)}")
    if "variant" not in d:
        raise ValueError("attack entry needs a 'variant'")
    paths = d.pop("models", None)
    if paths is None:
        # multi-classifier variants default to the full seen set, the rest
        # to the first seen model
        variant = d["variant"]
        k_capable = variant in ("e-fgsm", "di-fgsm", "rp-fgsm")
        paths = list(seen_paths) if k_capable else [seen_paths[0]]
    models = tuple(models_by_path[p] for p in paths)
    d.setdefault("master_seed", default_seed)
    return AttackConfig(models=models, **d)


def check_adversarial(original, adversarial, epsilon):
    """Re-verify the attack contract before trusting an image in a report."""
    adv = np.asarray(adversarial)
    if adv.min() < 0.0 or adv.max() > 255.0:
        raise ValueError(f"adversarial pixel out of range [{adv.min()}, {adv.max()}]")
    if not np.array_equal(adv, np.floor(adv + 0.5)):
        raise ValueError("adversarial image has non-integer values")
    linf = float(np.abs(adv - np.asarray(original)).max())
    if linf > epsilon + 1e-9:
        raise ValueError(f"L-inf {linf} exceeds epsilon {epsilon}")


# ------------------------------------------------------------- worker pool

_WORKER = {}


def _worker_init(config):
    models_by_path = {}
    for path in list(config.seen_models) + [config.unseen_model]:
        if path not in models_by_path:
            models_by_path[path] = load_model(path)
    records = load_records(config)
    _, _, attack_records = split_records(records, config.seed)
    if config.count is not None:
        attack_records = attack_records[: config.count]
    attacks = [
        _build_attack(d, models_by_path, config.seen_models, config.seed)
        for d in config.attacks
    ]
    _WORKER["attacks"] = attacks
    _WORKER["records"] = attack_records


def _worker_run(task):
    attack_index, image_index = task
    attack = _WORKER["attacks"][attack_index]
    record = _WORKER["records"][image_index]
    try:
        result = run_fgsm_attack(attack, record.image, image_index)
        return attack_index, image_index, result.image, None
    except Exception as exc:  # per-image failures are recorded, not fatal
        return attack_index, image_index, None, f"{type(exc).__name__}: {exc}"


def run_experiment(config):
    """Calibrate, attack, evaluate, and (if output_dir is set) write files."""
    models_by_path = {}
    for path in list(config.seen_models) + [config.unseen_model]:
        if path not in models_by_path:
            try:
                models_by_path[path] = load_model(path)
            except OSError as exc:
                raise ValueError(f"cannot load model '{path}': {exc}") from exc
    seen = [models_by_path[p] for p in config.seen_models]
    unseen = models_by_path[config.unseen_model]
    eval_models = [(m.arch.name, m) for m in seen] + [(unseen.arch.name, unseen)]
    seen_set = "+".join(m.arch.name for m in seen)

    try:
        records = load_records(config)
    except OSError as exc:
        raise ValueError(f"cannot load dataset '{config.dataset}': {exc}") from exc
    _, calib_records, attack_records = split_records(records, config.seed)
    if config.count is not None:
        attack_records = attack_records[: config.count]

    detectors = calibrate_detectors(unseen, calib_records, config.fpr_target)
    thresholds = {d.spec.kind: d.threshold for d in detectors}
    defense_specs = config.defense_specs()
    attacks = [
        _build_attack(d, models_by_path, config.seen_models, config.seed)
        for d in config.attacks
    ]

    adversarial = {}  # (attack_index, image_index) -> image
    failures = []
    tasks = [(a, i) for a in range(len(attacks)) for i in range(len(attack_records))]
    if config.workers > 1 and tasks:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=config.workers,
            initializer=_worker_init,
            initargs=(config,),
        ) as pool:
            outcomes = list(pool.map(_worker_run, tasks, chunksize=8))
    else:
        _worker_init(config)
        outcomes = [_worker_run(t) for t in tasks]

    for attack_index, image_index, image, error in outcomes:
        if error is None:
            adversarial[(attack_index, image_index)] = image
        else:
            failures.append(
                {
                    "attack": attacks[attack_index].label(),
                    "image_index": image_index,
                    "error": error,
                }
            )

    rows = []
    for a_idx, attack in enumerate(attacks):
        indices = sorted(
            i for (a, i) in adversarial if a == a_idx
        )  # ordered reduction: image order, not completion order
        images = [adversarial[(a_idx, i)] for i in indices]
        labels = [attack_records[i].label for i in indices]
        if not images:
            continue
        for i, img in zip(indices, images):
            check_adversarial(attack_records[i].image, img, attack.epsilon)
        psnrs = [psnr(attack_records[i].image, img) for i, img in zip(indices, images)]
        psnr_mean = float(np.mean(psnrs))
        psnr_std = float(np.std(psnrs))
        detect_rate = detectability(detectors, images)
        for model_name, model in eval_models:
            for defense in (None, *defense_specs):
                if defense is None:
                    preds = [predict(model, img) for img in images]
                else:
                    preds = [defended_predict(model, defense, img) for img in images]
                rows.append(
                    ReportRow(
                        attack=attack.label(),
                        variant_mode=attack.mode,
                        seen_set=seen_set,
                        eval_model=model_name,
                        defense="none" if defense is None else defense.label(),
                        top1_misleading=misleading_rate(preds, labels, k=1),
                        top5_misleading=misleading_rate(preds, labels, k=5),
                        detectability=detect_rate,
                        psnr_mean=psnr_mean,
                        psnr_std=psnr_std,
                    )
                )

    echo = {
        "format": config.format,
        "dataset": config.dataset,
        "seen_models": list(config.seen_models),
        "unseen_model": config.unseen_model,
        "attacks": [dict(a) for a in config.attacks],
        "defenses": [s.label() for s in defense_specs],
        "count": config.count,
        "workers": config.workers,
        "fpr_target": config.fpr_target,
    }
    report = EvalReport(
        rows=tuple(rows),
        thresholds=thresholds,
        config=echo,
        seed=config.seed,
        failures=tuple(failures),
    )
    if config.output_dir:
        from pathlib import Path

        write_report(report, Path(config.output_dir) / "report.csv")
    return report
