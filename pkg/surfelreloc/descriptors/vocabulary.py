"""Visual vocabulary: k-medoids over Hamming distance."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .binary import hamming_matrix
from .features import as_descriptor_array

logger = logging.getLogger(__name__)

DEFAULT_VOCAB_SIZE = 64
DEFAULT_MAX_ITERATIONS = 25


class VocabularyError(ValueError):
    """Raised for untrained, undersized or corrupt vocabularies."""


@dataclass(frozen=True)
class Vocabulary:
    words: np.ndarray
    projection_seed: int = 0
    objective_history: List[int] = field(default_factory=list, compare=False)

    def __post_init__(self) -> None:
        words = as_descriptor_array(self.words)
        if words.shape[0] == 0:
            raise VocabularyError("Vocabulary has no words")
        words.flags.writeable = False
        object.__setattr__(self, "words", words)

    @property
    def size(self) -> int:
        return self.words.shape[0]

    def quantize(self, descriptors: np.ndarray) -> np.ndarray:
        """Nearest word id per descriptor; ties go to the lower word id."""
        return quantize(self, descriptors)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.projection_seed == other.projection_seed and np.array_equal(self.words, other.words)


def quantize(vocabulary: Vocabulary, descriptors: np.ndarray) -> np.ndarray:
    descriptors = as_descriptor_array(descriptors)
    if descriptors.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.argmin(hamming_matrix(descriptors, vocabulary.words), axis=1).astype(np.int64)


def _seed_medoids(sample: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-medoids++ seeding with squared Hamming distance weights."""
    n = sample.shape[0]
    chosen = [int(rng.integers(n))]
    nearest = hamming_matrix(sample, sample[chosen]).min(axis=1).astype(np.float64)
    while len(chosen) < k:
        weights = nearest**2
        total = weights.sum()
        if total > 0:
            pick = int(rng.choice(n, p=weights / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            pick = int(rng.choice(free))
        chosen.append(pick)
        nearest = np.minimum(nearest, hamming_matrix(sample, sample[[pick]])[:, 0])
    return np.asarray(chosen, dtype=np.int64)


def train_vocabulary(
    sample: np.ndarray,
    vocab_size: int = DEFAULT_VOCAB_SIZE,
    seed: int = 0,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    projection_seed: int | None = None,
) -> Vocabulary:
    """Cluster a descriptor sample into ``vocab_size`` medoid words.

    Alternates nearest-medoid assignment and per-cluster medoid updates. The current
    medoid stays a candidate during its update so the total quantization error never
    increases; an empty cluster keeps its medoid.
    """
    sample = as_descriptor_array(sample)
    if vocab_size < 1:
        raise VocabularyError(f"vocab_size must be positive, got {vocab_size}")
    if sample.shape[0] < vocab_size:
        raise VocabularyError(
            f"Descriptor sample of {sample.shape[0]} is smaller than vocab_size {vocab_size}"
        )

    rng = np.random.default_rng(seed)
    medoids = _seed_medoids(sample, vocab_size, rng)
    history: List[int] = []

    for iteration in range(max_iterations):
        dist = hamming_matrix(sample, sample[medoids])
        labels = np.argmin(dist, axis=1)
        history.append(int(dist[np.arange(sample.shape[0]), labels].sum()))

        updated = medoids.copy()
        for k in range(vocab_size):
            members = np.flatnonzero(labels == k)
            if members.size == 0:
                continue
            candidates = np.union1d(members, medoids[k : k + 1])
            costs = hamming_matrix(sample[candidates], sample[members]).sum(axis=1)
            current = int(np.flatnonzero(candidates == medoids[k])[0])
            best = int(np.argmin(costs))
            if costs[best] < costs[current]:
                updated[k] = candidates[best]
        if np.array_equal(updated, medoids):
            break
        medoids = updated
        logger.debug("k-medoids iteration %d objective %d", iteration, history[-1])

    final = hamming_matrix(sample, sample[medoids]).min(axis=1).sum()
    if not history or history[-1] != int(final):
        history.append(int(final))
    logger.info("Trained vocabulary of %d words from %d descriptors", vocab_size, sample.shape[0])
    return Vocabulary(
        sample[medoids].copy(),
        projection_seed=seed if projection_seed is None else projection_seed,
        objective_history=history,
    )
