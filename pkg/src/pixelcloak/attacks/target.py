"""Cumulative-probability target selection.

The target class is drawn uniformly from the classes every classifier
considers unlikely: for each classifier, probabilities are sorted in
descending order and a class enters the candidate set when the probability
mass strictly above it already exceeds gamma. Intersecting the per-
classifier sets keeps the draw safe under every attacked model at once.
"""

import numpy as np

# Relaxation ladder for an empty intersection: first gamma that yields a
# nonempty set wins. gamma = 0 leaves all classes but each top-1, which is
# nonempty whenever there are more classes than classifiers.
GAMMA_LADDER = (0.99, 0.9, 0.5, 0.1, 0.0)


def candidate_target_set(probabilities, gamma):
    """Candidate classes for one classifier at threshold gamma.

    Sorting is descending with probability ties broken by ascending class
    index; the class at sorted rank j+1 qualifies when the top-j cumulative
    probability strictly exceeds gamma, for j in [1, D-1].
    """
    p = np.asarray(probabilities, dtype=np.float64)
    d = p.shape[0]
    order = np.lexsort((np.arange(d), -p))
    cumulative = np.cumsum(p[order])
    return {int(order[j]) for j in range(1, d) if cumulative[j - 1] > gamma}


def _intersection(predictions, gamma):
    sets = [candidate_target_set(p, gamma) for p in predictions]
    out = sets[0]
    for s in sets[1:]:
        out = out & s
    return out


def select_target_class(predictions, gamma, rng):
    """Uniform draw from the intersected candidate sets (one rng draw).

    If the intersection at gamma is empty, gamma is relaxed down the fixed
    ladder to the largest value that yields a nonempty intersection.
    """
    if not predictions:
        raise ValueError("need at least one prediction vector")
    candidates = _intersection(predictions, gamma)
    if not candidates:
        for relaxed in GAMMA_LADDER:
            if relaxed >= gamma:
                continue
            candidates = _intersection(predictions, relaxed)
            if candidates:
                break
    if not candidates:
        raise ValueError("no eligible target class (too few classes?)")
    ordered = sorted(candidates)
    return ordered[int(rng.integers(len(ordered)))]
