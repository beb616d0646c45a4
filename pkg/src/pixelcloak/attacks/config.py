"""Attack configuration and results.

An AttackConfig pins everything an attack needs except the image: budget,
step size, mode, classifier handles, transform set, and the master seed.
Per-image randomness is derived from (master_seed, image_index), so runs
are reproducible image by image regardless of worker scheduling.
"""

from dataclasses import dataclass, field

import numpy as np

from ..transforms.specs import TransformSet
from ..autodiff.ops import round_half_up

VARIANTS = (
    "u-fgsm",
    "r-fgsm",
    "l-fgsm",
    "p-fgsm",
    "e-fgsm",
    "di-fgsm",
    "eot",
    "rp-fgsm",
)
MULTI_CLASSIFIER_VARIANTS = ("e-fgsm", "di-fgsm", "rp-fgsm")


def iterations_for(epsilon, k=1, selection="single"):
    """Iteration budget: N_bar = round(min(1.25 eps, eps + 4)), at least 1.

    Random per-iteration classifier selection runs N_bar * k iterations so
    each classifier is consulted N_bar times on average; single-classifier
    and ensemble schedules run N_bar iterations outright.
    """
    if epsilon < 1:
        raise ValueError(f"epsilon must be >= 1, got {epsilon}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n_bar = max(1, int(round_half_up(min(1.25 * epsilon, epsilon + 4.0))))
    if selection == "random":
        return n_bar * int(k)
    if selection in ("single", "ensemble"):
        return n_bar
    raise ValueError(f"unknown selection '{selection}'")


@dataclass(frozen=True)
class AttackConfig:
    variant: str
    models: tuple = ()
    transforms: TransformSet = None
    epsilon: float = 16.0
    delta: float = 1.0
    mode: str = "untargeted"
    gamma: float = 0.99
    master_seed: int = 0
    iterations: int = None  # default derived from epsilon and variant
    classifier_mode: str = "random"  # rp-fgsm only: "random" or "ensemble"
    di_probability: float = 0.5
    eot_lambda: float = 0.5
    target_override: int = None
    name: str = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant '{self.variant}' (have {VARIANTS})")
        if self.mode not in ("targeted", "untargeted"):
            raise ValueError(f"mode must be targeted or untargeted, got '{self.mode}'")
        if self.epsilon <= 0 or self.delta <= 0:
            raise ValueError("epsilon and delta must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if len(self.models) < 1:
            raise ValueError("need at least one classifier")
        if len(self.models) > 1 and self.variant not in MULTI_CLASSIFIER_VARIANTS:
            raise ValueError(f"{self.variant} takes a single classifier")
        if self.classifier_mode not in ("random", "ensemble"):
            raise ValueError(f"bad classifier_mode '{self.classifier_mode}'")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.target_override is not None and self.mode != "targeted":
            raise ValueError("target_override only makes sense for targeted mode")
        if not 0.0 <= self.di_probability <= 1.0:
            raise ValueError("di_probability must be in [0, 1]")

    @property
    def k(self):
        return len(self.models)

    def iteration_count(self):
        if self.iterations is not None:
            return self.iterations
        if self.variant == "rp-fgsm" and self.classifier_mode == "random":
            return iterations_for(self.epsilon, self.k, "random")
        if self.k > 1 or self.variant == "e-fgsm":
            return iterations_for(self.epsilon, self.k, "ensemble")
        return iterations_for(self.epsilon, 1, "single")

    def label(self):
        if self.name:
            return self.name
        if self.variant == "rp-fgsm" and self.classifier_mode == "ensemble":
            return "rp-fgsm[ensemble]"
        return self.variant


@dataclass(frozen=True)
class AdversarialResult:
    """Attack output: final image, chosen target, audit trace, L-inf.

    The trace is attack-specific. Gradient-sign attacks record one
    (classifier_index, transform_label, predicted_class) triple per
    iteration, with classifier_index -1 marking an all-classifiers
    (ensemble) iteration. The saliency attack records one (c, h, w)
    triple per modified pixel; the linearization attack records the
    boundary class crossed at each iteration.
    """

    image: np.ndarray
    target_class: int = None
    trace: tuple = ()
    linf: float = 0.0


def image_rng(master_seed, image_index):
    """The per-image random stream; all of an attack's draws come from it."""
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(image_index)])
    )
