"""Tests for dataset loading, metrics, report emission, experiment
orchestration, and the command-line interface."""

import json
import subprocess
import sys

import numpy as np
import pytest

from pixelcloak.harness import (
    CSV_HEADER,
    DatasetError,
    DatasetRecord,
    EvalReport,
    ReportRow,
    RunConfig,
    check_adversarial,
    config_from_dict,
    full_defense_breakdown,
    generate_synthetic,
    load_cifar_binary,
    misleading_rate,
    psnr,
    read_rows,
    run_experiment,
    split_records,
    top_k_classes,
    write_report,
)
from pixelcloak.models import predict_batch

RECORD_BYTES = 3073


def write_batch(path, labels, first_bytes=None):
    rng = np.random.default_rng(0)
    blob = bytearray()
    for i, label in enumerate(labels):
        body = rng.integers(0, 256, size=RECORD_BYTES - 1).astype(np.uint8)
        if first_bytes and i in first_bytes:
            body[0] = first_bytes[i]
        blob.append(label)
        blob.extend(body.tobytes())
    path.write_bytes(bytes(blob))


# ------------------------------------------------------------------ loader


def test_load_single_record(tmp_path):
    path = tmp_path / "one.bin"
    write_batch(path, [7], first_bytes={0: 200})
    records = load_cifar_binary(path)
    assert len(records) == 1
    rec = records[0]
    assert rec.label == 7
    assert rec.image.shape == (3, 32, 32)
    assert rec.image[0, 0, 0] == 200.0
    assert not rec.image.flags.writeable


def test_load_ten_thousand_records(tmp_path):
    path = tmp_path / "big.bin"
    labels = np.arange(10000) % 10
    rng = np.random.default_rng(1)
    data = rng.integers(0, 256, size=(10000, RECORD_BYTES)).astype(np.uint8)
    data[:, 0] = labels
    path.write_bytes(data.tobytes())
    records = load_cifar_binary(path)
    assert len(records) == 10000
    assert [r.label for r in records[:12]] == list(range(10)) + [0, 1]
    assert records[9999].image.min() >= 0.0 and records[9999].image.max() <= 255.0


def test_load_rejects_truncated_file(tmp_path):
    path = tmp_path / "cut.bin"
    path.write_bytes(bytes(3072))
    with pytest.raises(DatasetError, match="not a multiple"):
        load_cifar_binary(path)


def test_load_rejects_bad_label_byte(tmp_path):
    path = tmp_path / "bad.bin"
    write_batch(path, [3, 12])
    with pytest.raises(DatasetError, match="label byte 12"):
        load_cifar_binary(path)


def test_record_validation():
    with pytest.raises(ValueError):
        DatasetRecord(label=-1, image=np.zeros((3, 32, 32)))
    with pytest.raises(ValueError):
        DatasetRecord(label=0, image=np.zeros((3, 16, 16)))


# --------------------------------------------------------------- synthetic


def test_synthetic_is_deterministic():
    a = generate_synthetic(seed=3, count=40)
    b = generate_synthetic(seed=3, count=40)
    assert len(a) == 40
    for ra, rb in zip(a, b):
        assert ra.label == rb.label
        assert np.array_equal(ra.image, rb.image)
    c = generate_synthetic(seed=4, count=40)
    assert not all(np.array_equal(ra.image, rc.image) for ra, rc in zip(a, c))


def test_synthetic_labels_and_values():
    records = generate_synthetic(seed=5, count=25, classes=10)
    assert [r.label for r in records] == [i % 10 for i in range(25)]
    for r in records:
        assert np.array_equal(r.image, np.round(r.image))
        assert r.image.min() >= 0.0 and r.image.max() <= 255.0


def test_synthetic_edge_cases():
    assert generate_synthetic(seed=0, count=0) == []
    with pytest.raises(ValueError):
        generate_synthetic(seed=0, count=4, classes=1)


def test_split_is_a_disjoint_partition():
    records = generate_synthetic(seed=6, count=50)
    train, calib, attack = split_records(records, seed=1)
    assert (len(train), len(calib), len(attack)) == (30, 10, 10)
    ids = [id(r) for part in (train, calib, attack) for r in part]
    assert len(set(ids)) == 50


def test_zoo_accuracy_on_attack_split(zoo, splits):
    records = splits["attack"][:300]
    images = np.stack([r.image for r in records])
    labels = np.array([r.label for r in records])
    for name, model in zoo.items():
        correct = 0
        for start in range(0, len(records), 100):
            probs = predict_batch(model, images[start : start + 100])
            correct += int((probs.argmax(axis=1) == labels[start : start + 100]).sum())
        assert correct / len(records) >= 0.9, f"{name}: {correct / len(records):.3f}"


# ----------------------------------------------------------------- metrics


def test_top_k_ties_to_lowest_index():
    p = [0.3, 0.3, 0.2, 0.2]
    assert list(top_k_classes(p, 2)) == [0, 1]
    assert list(top_k_classes(p, 3)) == [0, 1, 2]
    with pytest.raises(ValueError):
        top_k_classes(p, 0)
    with pytest.raises(ValueError):
        top_k_classes(p, 5)


def vector_with_true_class_at(rank, true_class, classes=10):
    p = np.linspace(0.5, 0.05, classes)
    p /= p.sum()
    order = [c for c in range(classes) if c != true_class]
    order.insert(rank, true_class)
    out = np.empty(classes)
    out[order] = p
    return out


def test_misleading_rate_three_of_four():
    labels = [2, 2, 2, 2]
    preds = [vector_with_true_class_at(r, 2) for r in (9, 8, 7, 3)]
    assert misleading_rate(preds, labels, k=5) == 75.0
    assert misleading_rate(preds, labels, k=1) == 100.0


def test_misleading_top1_at_least_top5():
    rng = np.random.default_rng(7)
    preds = [rng.dirichlet(np.ones(10)) for _ in range(50)]
    labels = rng.integers(0, 10, size=50)
    assert misleading_rate(preds, labels, k=1) >= misleading_rate(preds, labels, k=5)


def test_misleading_validation():
    with pytest.raises(ValueError):
        misleading_rate([], [])
    with pytest.raises(ValueError):
        misleading_rate([np.ones(10) / 10], [1, 2])


def test_clean_misleading_complements_accuracy(seen_models, splits):
    model = seen_models[1]
    records = splits["attack"][:100]
    preds = [p for p in predict_batch(model, np.stack([r.image for r in records]))]
    labels = [r.label for r in records]
    accuracy = 100.0 * np.mean([int(np.argmax(p)) == lab for p, lab in zip(preds, labels)])
    assert misleading_rate(preds, labels, k=1) == pytest.approx(100.0 - accuracy, abs=1e-9)


def test_psnr_values():
    zeros = np.zeros((3, 32, 32))
    assert psnr(zeros, zeros) == 99.0
    assert psnr(zeros, np.full_like(zeros, 16.0)) == pytest.approx(20 * np.log10(255.0 / 16.0), abs=1e-9)
    one = zeros.copy()
    one[1, 5, 5] = 1.0
    assert psnr(zeros, one) == pytest.approx(10 * np.log10(255.0**2 * 3072), abs=1e-9)
    with pytest.raises(ValueError):
        psnr(zeros, np.zeros((3, 16, 16)))


# ------------------------------------------------------------------ report


def make_row(**overrides):
    base = dict(
        attack="rp-fgsm",
        variant_mode="targeted",
        seen_set="cnn-a+cnn-b+cnn-c",
        eval_model="cnn-d",
        defense="median:3",
        top1_misleading=95.2,
        top5_misleading=83.4,
        detectability=41.7,
        psnr_mean=27.31,
        psnr_std=1.42,
    )
    base.update(overrides)
    return ReportRow(**base)


def test_row_formatting_one_decimal():
    line = make_row().formatted()
    assert line == "rp-fgsm,targeted,cnn-a+cnn-b+cnn-c,cnn-d,median:3,95.2,83.4,41.7,27.31,1.42"


def test_row_rate_bounds():
    with pytest.raises(ValueError):
        make_row(top1_misleading=101.0)
    with pytest.raises(ValueError):
        make_row(detectability=-0.1)


def test_report_round_trip(tmp_path):
    rows = (make_row(), make_row(attack="u-fgsm", defense="none", detectability=0.0))
    report = EvalReport(rows=rows, thresholds={"median": 0.12}, config={"seed": 1}, seed=1)
    csv_path, json_path = write_report(report, tmp_path / "out" / "report.csv")
    back = read_rows(csv_path)
    assert back == list(rows)
    companion = json.loads(json_path.read_text())
    assert companion["thresholds"] == {"median": 0.12}
    assert companion["seed"] == 1
    assert companion["failures"] == []


def test_empty_report_writes_header_only(tmp_path):
    report = EvalReport(rows=(), thresholds={}, config={}, seed=0)
    csv_path, _ = write_report(report, tmp_path / "report.csv")
    assert csv_path.read_text() == CSV_HEADER + "\n"
    assert read_rows(csv_path) == []


def test_report_bytes_are_stable(tmp_path):
    report = EvalReport(rows=(make_row(),), thresholds={"jpeg": 0.2}, config={"a": 1}, seed=3)
    a, aj = write_report(report, tmp_path / "a" / "report.csv")
    b, bj = write_report(report, tmp_path / "b" / "report.csv")
    assert a.read_bytes() == b.read_bytes()
    assert aj.read_bytes() == bj.read_bytes()


def test_read_rows_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n")
    with pytest.raises(ValueError, match="header"):
        read_rows(bad)
    bad.write_text(CSV_HEADER + "\nonly,three,fields\n")
    with pytest.raises(ValueError, match="bad report line"):
        read_rows(bad)


# -------------------------------------------------------------- run config


def test_run_config_validation():
    good = dict(seen_models=("a.bin",), unseen_model="d.bin")
    RunConfig(**good)
    with pytest.raises(ValueError):
        RunConfig(**good, format="tfrecord")
    with pytest.raises(ValueError):
        RunConfig(**good, format="cifar10-bin")  # needs a dataset path
    with pytest.raises(ValueError):
        RunConfig(seen_models=(), unseen_model="d.bin")
    with pytest.raises(ValueError):
        RunConfig(seen_models=("a.bin",), unseen_model="a.bin")
    with pytest.raises(ValueError):
        RunConfig(**good, workers=0)


def test_config_from_dict_rejects_unknown_fields():
    with pytest.raises(ValueError, match="unknown run-config fields"):
        config_from_dict({"seen_models": ["a"], "unseen_model": "d", "epsilon": 16})


def test_defense_spec_selection():
    base = dict(seen_models=("a.bin",), unseen_model="d.bin")
    assert len(RunConfig(**base).defense_specs()) == 14  # 7 + 3 + 4
    picked = RunConfig(**base, defenses=("median:3", "jpeg:50")).defense_specs()
    assert [s.label() for s in picked] == ["median:3", "jpeg:50"]
    with pytest.raises(ValueError):
        RunConfig(**base, defenses=("identity",)).defense_specs()
    with pytest.raises(ValueError):
        RunConfig(**base, defenses=("scale:1.1",)).defense_specs()


def test_check_adversarial_contract():
    original = np.full((3, 4, 4), 100.0)
    check_adversarial(original, original + 16.0, epsilon=16.0)
    with pytest.raises(ValueError, match="out of range"):
        check_adversarial(original, np.full_like(original, 256.0), 16.0)
    with pytest.raises(ValueError, match="non-integer"):
        check_adversarial(original, original + 0.5, 16.0)
    with pytest.raises(ValueError, match="exceeds epsilon"):
        check_adversarial(original, original + 17.0, 16.0)


def test_full_defense_breakdown_covers_all_parameters():
    labels = [s.label() for s in full_defense_breakdown()]
    assert len(labels) == 14
    assert labels[0] == "requantize:1" and "median:5" in labels and "jpeg:100" in labels


# -------------------------------------------------------------- experiment


def quick_config(zoo_paths, out="", workers=1):
    return RunConfig(
        seen_models=(zoo_paths["cnn-a"], zoo_paths["cnn-b"]),
        unseen_model=zoo_paths["cnn-d"],
        attacks=(
            {"variant": "u-fgsm", "iterations": 2, "mode": "untargeted", "name": "quick"},
        ),
        defenses=("requantize:4",),
        seed=11,
        synthetic_count=120,
        count=4,
        output_dir=out,
        workers=workers,
    )


def test_run_experiment_smoke(zoo_paths, tmp_path):
    config = quick_config(zoo_paths, out=str(tmp_path / "run"))
    report = run_experiment(config)
    # 1 attack x 3 eval models x (no defense + requantize:4)
    assert len(report.rows) == 6
    assert report.failures == ()
    assert sorted(report.thresholds) == ["jpeg", "median", "requantize"]
    assert {row.attack for row in report.rows} == {"quick"}
    assert {row.eval_model for row in report.rows} == {"cnn-a", "cnn-b", "cnn-d"}
    assert {row.defense for row in report.rows} == {"none", "requantize:4"}
    assert all(row.seen_set == "cnn-a+cnn-b" for row in report.rows)
    csv_path = tmp_path / "run" / "report.csv"
    assert read_rows(csv_path) != []
    assert (tmp_path / "run" / "report.json").exists()


def test_run_experiment_rejects_missing_model(zoo_paths):
    config = RunConfig(
        seen_models=("/nonexistent/model.bin",),
        unseen_model=zoo_paths["cnn-d"],
        synthetic_count=60,
    )
    with pytest.raises(ValueError, match="cannot load model"):
        run_experiment(config)


def test_worker_count_does_not_change_report_bytes(zoo_paths, tmp_path):
    serial = quick_config(zoo_paths, out=str(tmp_path / "serial"))
    pooled = quick_config(zoo_paths, out=str(tmp_path / "pooled"), workers=2)
    run_experiment(serial)
    run_experiment(pooled)
    assert (tmp_path / "serial" / "report.csv").read_bytes() == (
        tmp_path / "pooled" / "report.csv"
    ).read_bytes()


# --------------------------------------------------------------------- cli


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "pixelcloak.harness.cli", *args],
        capture_output=True,
        text=True,
        timeout=600,
    )


def test_cli_train_detect_attack_eval(zoo_paths, tmp_path):
    train_cfg = tmp_path / "train.json"
    train_cfg.write_text(
        json.dumps(
            {
                "arch": "cnn-a",
                "seed": 1,
                "synthetic_count": 150,
                "hyper": {"epochs": 1},
            }
        )
    )
    model_path = tmp_path / "tiny.bin"
    out = run_cli("train", "--config", str(train_cfg), "--out", str(model_path))
    assert out.returncode == 0, out.stderr
    assert model_path.exists()
    assert "held-out accuracy" in out.stdout

    out = run_cli(
        "attack",
        "--variant", "u-fgsm",
        "--models", zoo_paths["cnn-a"],
        "--mode", "untargeted",
        "--count", "2",
        "--seed", "3",
        "--out", str(tmp_path / "adv"),
    )
    assert out.returncode == 0, out.stderr
    bundle = np.load(tmp_path / "adv" / "adversarial.npz")
    assert bundle["images"].shape == (2, 3, 32, 32)
    assert bundle["linf"].max() <= 16.0
    assert "top-1 misleading" in out.stdout

    out = run_cli(
        "detect",
        "--model", zoo_paths["cnn-d"],
        "--defense", "requantize:4",
        "--seed", "7",
    )
    assert out.returncode == 0, out.stderr
    assert "tau" in out.stdout and "clean flag rate" in out.stdout

    eval_cfg = tmp_path / "eval.json"
    eval_cfg.write_text(
        json.dumps(
            {
                "seen_models": [zoo_paths["cnn-a"]],
                "unseen_model": zoo_paths["cnn-d"],
                "attacks": [{"variant": "u-fgsm", "iterations": 2, "mode": "untargeted"}],
                "defenses": ["median:3"],
                "seed": 5,
                "synthetic_count": 120,
                "count": 3,
            }
        )
    )
    out = run_cli("eval", "--config", str(eval_cfg), "--out", str(tmp_path / "evalrun"))
    assert out.returncode == 0, out.stderr
    rows = read_rows(tmp_path / "evalrun" / "report.csv")
    assert len(rows) == 4  # 2 eval models x (none + median:3)
    assert "report rows" in out.stdout


def test_cli_reports_errors_with_exit_code_two(tmp_path):
    out = run_cli("detect", "--model", str(tmp_path / "missing.bin"), "--defense", "median:3")
    assert out.returncode == 2
    assert out.stderr.startswith("error:")
