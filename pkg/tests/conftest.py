"""Shared fixtures: synthetic dataset, a trained four-model zoo, detectors.

Training the zoo takes about two minutes on one core, so trained weights are
cached under tests/_cache, keyed by a fingerprint of the relevant source
files and the training configuration; editing those sources or the config
invalidates the cache and retrains.
"""

import hashlib
import pathlib

import pytest

from pixelcloak.detector import calibrate_detectors
from pixelcloak.harness.dataset import generate_synthetic, split_records
from pixelcloak.models import (
    get_architecture,
    load_model,
    save_model,
    train_classifier,
)

DATASET_SEED = 7
DATASET_COUNT = 2500
ZOO_HYPER = {
    "cnn-a": {"epochs": 8, "seed": 0},
    "cnn-b": {"epochs": 8, "seed": 1},
    "cnn-c": {"epochs": 8, "seed": 2},
    "cnn-d": {"epochs": 12, "learning_rate": 0.005, "seed": 9},
}
SEEN_NAMES = ("cnn-a", "cnn-b", "cnn-c")
UNSEEN_NAME = "cnn-d"

_CACHE = pathlib.Path(__file__).parent / "_cache"


def _fingerprint():
    src = pathlib.Path(__file__).parent.parent / "src" / "pixelcloak"
    files = sorted(
        list((src / "autodiff").glob("*.py"))
        + list((src / "models").glob("*.py"))
        + [src / "harness" / "dataset.py"]
    )
    digest = hashlib.sha256()
    for path in files:
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    config = (DATASET_SEED, DATASET_COUNT, sorted((k, sorted(v.items())) for k, v in ZOO_HYPER.items()))
    digest.update(repr(config).encode())
    return digest.hexdigest()[:16]


@pytest.fixture(scope="session")
def records():
    return generate_synthetic(seed=DATASET_SEED, count=DATASET_COUNT)


@pytest.fixture(scope="session")
def splits(records):
    train, calib, attack = split_records(records, seed=DATASET_SEED)
    return {"train": train, "calib": calib, "attack": attack}


@pytest.fixture(scope="session")
def zoo(splits):
    _CACHE.mkdir(exist_ok=True)
    (_CACHE / ".gitignore").write_text("*\n")
    tag = _fingerprint()
    stamp = _CACHE / "fingerprint.txt"
    models = {}
    if stamp.exists() and stamp.read_text() == tag:
        try:
            for name in ZOO_HYPER:
                models[name] = load_model(_CACHE / f"{name}.bin")
        except (OSError, ValueError):
            models = {}
    if len(models) != len(ZOO_HYPER):
        if stamp.exists():
            stamp.unlink()
        models = {}
        for name, hyper in ZOO_HYPER.items():
            models[name] = train_classifier(
                get_architecture(name), splits["train"], hyper
            )
            save_model(models[name], _CACHE / f"{name}.bin")
        stamp.write_text(tag)
    return models


@pytest.fixture(scope="session")
def seen_models(zoo):
    return tuple(zoo[name] for name in SEEN_NAMES)


@pytest.fixture(scope="session")
def unseen_model(zoo):
    return zoo[UNSEEN_NAME]


@pytest.fixture(scope="session")
def detectors(unseen_model, splits):
    return calibrate_detectors(unseen_model, splits["calib"])


@pytest.fixture(scope="session")
def zoo_paths(zoo):
    # the saved weight files backing the zoo, for harness/CLI tests
    return {name: str(_CACHE / f"{name}.bin") for name in ZOO_HYPER}
