"""Adversarial attacks: the gradient-sign family plus two baselines."""

from .config import (
    MULTI_CLASSIFIER_VARIANTS,
    VARIANTS,
    AdversarialResult,
    AttackConfig,
    image_rng,
    iterations_for,
)
from .deepfool import deepfool_step, run_deepfool
from .fgsm import clip_to_neighborhood, perturbation_step, run_fgsm_attack
from .jsma import jsma_saliency, run_jsma
from .target import GAMMA_LADDER, candidate_target_set, select_target_class

__all__ = [
    "AdversarialResult",
    "AttackConfig",
    "GAMMA_LADDER",
    "MULTI_CLASSIFIER_VARIANTS",
    "VARIANTS",
    "candidate_target_set",
    "clip_to_neighborhood",
    "deepfool_step",
    "image_rng",
    "iterations_for",
    "jsma_saliency",
    "perturbation_step",
    "run_deepfool",
    "run_fgsm_attack",
    "run_jsma",
    "select_target_class",
]
