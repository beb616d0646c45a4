"""Tests for the gradient-sign attack family, target selection, and the
saliency and linearization baselines."""

import numpy as np
import pytest

from pixelcloak.attacks import (
    AttackConfig,
    candidate_target_set,
    clip_to_neighborhood,
    deepfool_step,
    image_rng,
    iterations_for,
    jsma_saliency,
    perturbation_step,
    run_deepfool,
    run_fgsm_attack,
    run_jsma,
    select_target_class,
)
from pixelcloak.models import Architecture, INPUT_SHAPE, ModelParams, predict
from pixelcloak.transforms import TransformSpec, identity_set

LINEAR10 = Architecture("linear10", (("flatten",), ("dense", 10)), 10)
LINEAR2 = Architecture("linear2", (("flatten",), ("dense", 2)), 2)


def linear_model(arch, seed, scale=0.3):
    rng = np.random.default_rng(seed)
    params = {name: rng.normal(0.0, scale, shape) for name, shape in arch.param_shapes()}
    return ModelParams(arch=arch, params=params)


def linear_models(k, base_seed=20):
    return tuple(linear_model(LINEAR10, base_seed + i) for i in range(k))


def make_image(seed=21):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=INPUT_SHAPE).astype(np.float64)


# ------------------------------------------------------------- primitives


def test_clip_examples():
    assert clip_to_neighborhood(np.array([100.0]), np.array([120.0]), 16.0) == 116.0
    assert clip_to_neighborhood(np.array([5.0]), np.array([-20.0]), 16.0) == 0.0
    assert clip_to_neighborhood(np.array([250.0]), np.array([280.0]), 16.0) == 255.0


def test_clip_idempotent_inside_neighborhood():
    rng = np.random.default_rng(0)
    x0 = rng.uniform(0.0, 255.0, size=(3, 5, 5))
    cand = np.clip(x0 + rng.uniform(-16.0, 16.0, size=x0.shape), 0.0, 255.0)
    once = clip_to_neighborhood(x0, cand, 16.0)
    assert np.array_equal(once, cand)
    assert np.array_equal(clip_to_neighborhood(x0, once, 16.0), once)


def test_clip_shape_mismatch():
    with pytest.raises(ValueError):
        clip_to_neighborhood(np.zeros(3), np.zeros(4), 16.0)


def test_perturbation_step_examples():
    g = np.array([2.5, -0.1, 0.0])
    assert np.array_equal(perturbation_step(g, 1.0, "untargeted"), [1.0, -1.0, 0.0])
    assert np.array_equal(perturbation_step(g, 1.0, "targeted"), [-1.0, 1.0, 0.0])
    assert np.array_equal(perturbation_step(g, 2.0, "untargeted"), [2.0, -2.0, 0.0])
    with pytest.raises(ValueError):
        perturbation_step(g, 0.0, "untargeted")


def test_iteration_budgets():
    assert iterations_for(16.0) == 20
    assert iterations_for(16.0, k=3, selection="random") == 60
    assert iterations_for(16.0, k=3, selection="ensemble") == 20
    assert iterations_for(8.0) == 10
    assert iterations_for(1.0) == 1
    assert iterations_for(2.0) == 3  # round half away from zero at 2.5
    with pytest.raises(ValueError):
        iterations_for(0.5)
    with pytest.raises(ValueError):
        iterations_for(16.0, k=0)
    with pytest.raises(ValueError):
        iterations_for(16.0, selection="other")


def test_config_iteration_count():
    models3 = linear_models(3)
    rp = AttackConfig(variant="rp-fgsm", models=models3)
    assert rp.iteration_count() == 60
    ens = AttackConfig(variant="rp-fgsm", models=models3, classifier_mode="ensemble")
    assert ens.iteration_count() == 20
    single = AttackConfig(variant="u-fgsm", models=models3[:1])
    assert single.iteration_count() == 20
    fixed = AttackConfig(variant="u-fgsm", models=models3[:1], iterations=5)
    assert fixed.iteration_count() == 5


def test_config_validation():
    models = linear_models(3)
    with pytest.raises(ValueError):
        AttackConfig(variant="x-fgsm", models=models[:1])
    with pytest.raises(ValueError):
        AttackConfig(variant="u-fgsm", models=models)  # single-classifier variant
    with pytest.raises(ValueError):
        AttackConfig(variant="u-fgsm", models=())
    with pytest.raises(ValueError):
        AttackConfig(variant="u-fgsm", models=models[:1], mode="sideways")
    with pytest.raises(ValueError):
        AttackConfig(variant="u-fgsm", models=models[:1], target_override=3)
    with pytest.raises(ValueError):
        AttackConfig(variant="u-fgsm", models=models[:1], gamma=1.5)
    with pytest.raises(ValueError):
        AttackConfig(variant="rp-fgsm", models=models, classifier_mode="mixed")


# -------------------------------------------------------- target selection


def test_candidate_set_examples():
    p = (0.7, 0.25, 0.03, 0.015, 0.005)
    assert candidate_target_set(p, 0.99) == {4}
    assert candidate_target_set(p, 0.1) == {1, 2, 3, 4}


def test_candidate_set_tie_breaking():
    # ties sort by ascending class index, so class 1 can enter while the
    # equally probable class 0 stays out
    p = (0.4, 0.4, 0.1, 0.1)
    assert candidate_target_set(p, 0.5) == {2, 3}
    assert candidate_target_set(p, 0.3) == {1, 2, 3}


def test_candidate_set_never_contains_top_class():
    rng = np.random.default_rng(1)
    for _ in range(100):
        p = rng.dirichlet(np.ones(10) * 0.3)
        top = np.lexsort((np.arange(10), -p))[0]
        for gamma in (0.99, 0.5, 0.0):
            assert top not in candidate_target_set(p, gamma)


def test_select_singleton_intersection():
    a = (0.7, 0.25, 0.03, 0.015, 0.005)  # set {4}
    b = (0.6, 0.3, 0.095, 0.0025, 0.0025)  # set {3, 4}
    rng = np.random.default_rng(2)
    for _ in range(10):
        assert select_target_class([a, b], 0.99, rng) == 4


def test_select_relaxes_down_the_ladder():
    a = (0.7, 0.25, 0.03, 0.015, 0.005)  # {4} at 0.99
    b = (0.5, 0.3, 0.19, 0.004, 0.006)  # {3} at 0.99, {3, 4} at 0.9
    rng = np.random.default_rng(3)
    picks = {select_target_class([a, b], 0.99, rng) for _ in range(40)}
    assert picks == {3, 4}


def test_select_never_returns_predicted():
    rng = np.random.default_rng(4)
    for _ in range(50):
        p = rng.dirichlet(np.ones(10))
        target = select_target_class([p], 0.99, rng)
        assert target != int(np.lexsort((np.arange(10), -p))[0])


def test_select_requires_predictions():
    with pytest.raises(ValueError):
        select_target_class([], 0.99, np.random.default_rng(0))


# ------------------------------------------------------------ fgsm family


def variant_configs(models3):
    one = models3[:1]
    return [
        AttackConfig(variant="u-fgsm", models=one),
        AttackConfig(variant="r-fgsm", models=one, mode="targeted"),
        AttackConfig(variant="l-fgsm", models=one, mode="targeted"),
        AttackConfig(variant="p-fgsm", models=one, mode="targeted"),
        AttackConfig(variant="e-fgsm", models=models3),
        AttackConfig(variant="di-fgsm", models=models3),
        AttackConfig(variant="eot", models=one),
        AttackConfig(variant="rp-fgsm", models=models3, mode="targeted"),
    ]


def test_all_variants_respect_the_budget():
    models3 = linear_models(3)
    img = make_image()
    for config in variant_configs(models3):
        res = run_fgsm_attack(config, img, image_index=0)
        out = res.image
        assert out.shape == INPUT_SHAPE
        assert np.array_equal(out, np.round(out)), config.variant
        assert out.min() >= 0.0 and out.max() <= 255.0
        assert np.abs(out - img).max() <= config.epsilon + 1e-9, config.variant
        assert res.linf == np.abs(out - img).max()
        assert len(res.trace) == config.iteration_count()
        if config.mode == "targeted":
            assert res.target_class is not None
            assert res.target_class != int(predict(config.models[0], img).argmax())


def test_attack_determinism():
    models3 = linear_models(3)
    img = make_image(22)
    config = AttackConfig(variant="rp-fgsm", models=models3, mode="targeted", master_seed=5)
    a = run_fgsm_attack(config, img, image_index=3)
    b = run_fgsm_attack(config, img, image_index=3)
    assert np.array_equal(a.image, b.image)
    assert a.trace == b.trace
    assert a.target_class == b.target_class
    other = AttackConfig(variant="rp-fgsm", models=models3, mode="targeted", master_seed=6)
    c = run_fgsm_attack(other, img, image_index=3)
    assert a.trace != c.trace


def test_image_rng_streams_are_distinct():
    a = image_rng(0, 0).integers(0, 1 << 30, size=8)
    b = image_rng(0, 1).integers(0, 1 << 30, size=8)
    c = image_rng(1, 0).integers(0, 1 << 30, size=8)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.array_equal(a, image_rng(0, 0).integers(0, 1 << 30, size=8))


def test_rp_single_classifier_identity_set_reduces_to_p_fgsm():
    model = linear_models(1, base_seed=30)
    img = make_image(23)
    shared = dict(models=model, mode="targeted", master_seed=9)
    rp = AttackConfig(variant="rp-fgsm", transforms=identity_set(), **shared)
    p = AttackConfig(variant="p-fgsm", **shared)
    a = run_fgsm_attack(rp, img, image_index=1)
    b = run_fgsm_attack(p, img, image_index=1)
    assert np.array_equal(a.image, b.image)
    assert a.target_class == b.target_class


def test_ensemble_of_one_reduces_to_single_classifier():
    model = linear_models(1, base_seed=31)
    img = make_image(24)
    shared = dict(models=model, mode="targeted", target_override=7, master_seed=2)
    e = AttackConfig(variant="e-fgsm", **shared)
    r = AttackConfig(variant="r-fgsm", **shared)
    a = run_fgsm_attack(e, img, image_index=0)
    b = run_fgsm_attack(r, img, image_index=0)
    assert np.array_equal(a.image, b.image)
    assert a.trace == b.trace


def test_rp_draw_concentration():
    # classifier and transform-kind draws are uniform; check 3 sigma bands
    models3 = linear_models(3, base_seed=32)
    config = AttackConfig(variant="rp-fgsm", models=models3, master_seed=1)
    img = make_image(25)
    classifiers = []
    kinds = []
    for index in range(20):
        res = run_fgsm_attack(config, img, image_index=index)
        for classifier, label, _ in res.trace:
            classifiers.append(classifier)
            kinds.append(label.partition(":")[0])
    n = len(classifiers)
    assert n == 20 * 60
    for c in range(3):
        expect = n / 3
        sigma = np.sqrt(n * (1 / 3) * (2 / 3))
        assert abs(classifiers.count(c) - expect) <= 3 * sigma
    for kind in ("identity", "requantize", "median", "jpeg"):
        expect = n / 4
        sigma = np.sqrt(n * 0.25 * 0.75)
        assert abs(kinds.count(kind) - expect) <= 3 * sigma


def test_rp_ensemble_mode_consults_all_classifiers():
    models3 = linear_models(3, base_seed=33)
    config = AttackConfig(
        variant="rp-fgsm", models=models3, classifier_mode="ensemble", master_seed=4
    )
    res = run_fgsm_attack(config, make_image(26), image_index=0)
    assert len(res.trace) == 20
    assert all(classifier == -1 for classifier, _, _ in res.trace)


def test_di_coin_extremes():
    models3 = linear_models(3, base_seed=34)
    img = make_image(27)
    always = AttackConfig(variant="di-fgsm", models=models3, di_probability=1.0)
    never = AttackConfig(variant="di-fgsm", models=models3, di_probability=0.0)
    a = run_fgsm_attack(always, img, image_index=0)
    b = run_fgsm_attack(never, img, image_index=0)
    assert all(label.startswith("resize-pad:") for _, label, _ in a.trace)
    assert all(label == "identity" for _, label, _ in b.trace)


def test_attack_leaves_input_unchanged():
    model = linear_models(1, base_seed=35)
    img = make_image(28)
    before = img.copy()
    run_fgsm_attack(AttackConfig(variant="u-fgsm", models=model), img)
    assert np.array_equal(img, before)


# ----------------------------------------------------------------- jsma


def test_jsma_saliency_examples():
    tg = np.array([0.5, -0.5, 0.5])
    og = np.array([-0.3, -0.3, 0.1])
    assert np.allclose(jsma_saliency(tg, og), [0.15, 0.0, 0.0], atol=1e-12)
    with pytest.raises(ValueError):
        jsma_saliency(np.zeros(3), np.zeros(4))


def jsma_toy_model():
    # two positive-delta pixels and one negative-delta pixel; everything
    # else is neutral, so exactly two pixels are worth raising
    w = np.zeros((3072, 2))
    w[100, 1], w[100, 0] = 0.6, -0.3  # best pixel: delta +0.9
    w[2000, 1], w[2000, 0] = 0.3, -0.2  # second: delta +0.5
    w[1500, 1], w[1500, 0] = -0.4, 0.3  # hurts the target
    params = {"dense1_w": w, "dense1_b": np.array([0.5, 0.0])}
    return ModelParams(arch=LINEAR2, params=params)


def test_jsma_budget_zero_returns_input():
    model = jsma_toy_model()
    img = np.full(INPUT_SHAPE, 100.0)
    res = run_jsma(model, img, target=1, pixel_budget=0)
    assert np.array_equal(res.image, img)
    assert res.trace == ()
    assert res.linf == 0.0


def test_jsma_rejects_reaching_the_predicted_class():
    model = jsma_toy_model()
    img = np.zeros(INPUT_SHAPE)  # bias makes class 0 the prediction
    with pytest.raises(ValueError):
        run_jsma(model, img, target=0)
    with pytest.raises(ValueError):
        run_jsma(model, img, target=1, pixel_budget=-1)


def test_jsma_toy_first_iteration_hand_check():
    model = jsma_toy_model()
    img = np.full(INPUT_SHAPE, 100.0)
    res = run_jsma(model, img, target=1, pixel_budget=2)
    assert res.trace == (np.unravel_index(100, INPUT_SHAPE), np.unravel_index(2000, INPUT_SHAPE))
    want = img.copy()
    want[np.unravel_index(100, INPUT_SHAPE)] += 1.0
    want[np.unravel_index(2000, INPUT_SHAPE)] += 1.0
    assert np.array_equal(res.image, want)
    assert res.linf == 1.0


def test_jsma_modification_budget():
    model = jsma_toy_model()
    img = np.full(INPUT_SHAPE, 100.0)
    res = run_jsma(model, img, target=1, pixel_budget=25)
    assert len(res.trace) <= 25
    assert len(res.trace) % 2 == 0  # two modifications per iteration
    changed = int((res.image != img).sum())
    assert changed <= len(res.trace)
    assert np.array_equal(res.image, np.round(res.image))


# -------------------------------------------------------------- deepfool


def test_deepfool_step_example():
    l, delta = deepfool_step([2.0, 0.0], [[1.0, 0.0], [0.0, 0.0]], source=0)
    assert l == 1
    assert np.allclose(delta, [-2.0, 0.0], atol=1e-9)


def test_deepfool_step_ties_to_lowest_class():
    logits = [1.0, 0.0, 0.0]
    grads = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]  # classes 1 and 2 tie
    l, _ = deepfool_step(logits, grads, source=0)
    assert l == 1


def test_deepfool_step_skips_vanishing_normals():
    l, delta = deepfool_step([2.0, 0.0], [[1.0, 0.0], [1.0, 0.0]], source=0)
    assert l is None
    assert np.array_equal(delta, [0.0, 0.0])


def test_deepfool_disagreeing_source_is_a_no_op():
    model = linear_model(LINEAR10, seed=36)
    img = make_image(30)
    predicted = int(predict(model, img).argmax())
    wrong_source = (predicted + 1) % 10
    res = run_deepfool(model, img, source_class=wrong_source)
    assert res.trace == ()
    assert np.array_equal(res.image, img)
    assert res.linf == 0.0


def test_deepfool_flips_trained_model(seen_models, splits):
    model = seen_models[0]
    flips = 0
    total = 20
    for record in splits["attack"][:total]:
        res = run_deepfool(model, record.image)
        before = int(predict(model, record.image).argmax())
        after = int(predict(model, res.image).argmax())
        flips += int(after != before)
        assert res.image.min() >= 0.0 and res.image.max() <= 255.0
    assert flips / total >= 0.95
