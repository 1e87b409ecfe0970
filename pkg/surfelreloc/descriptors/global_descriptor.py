"""VLAD-style global descriptors aggregated over binary visual words."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .binary import unpack_bits
from .features import DESCRIPTOR_BYTES, as_descriptor_array
from .vocabulary import Vocabulary, VocabularyError

PROJECTED_DIM = 8


@lru_cache(maxsize=16)
def projection_matrix(seed: int) -> np.ndarray:
    """Fixed Gaussian projection from 256 bit-residuals to ``PROJECTED_DIM`` values."""
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((PROJECTED_DIM, DESCRIPTOR_BYTES * 8)) / np.sqrt(DESCRIPTOR_BYTES * 8)
    P.flags.writeable = False
    return P


def describe_global(vocabulary: Vocabulary, descriptors: np.ndarray) -> np.ndarray:
    """L2-normalized vector of length ``vocabulary.size * 8``.

    Each descriptor is assigned to its nearest word; the signed bit residual
    (descriptor bits minus word bits) is projected to 8 dimensions and summed per word.
    When the residuals cancel to zero, as when every descriptor equals its word, the word
    occupancy counts are spread over each word block instead.

    Raises:
        VocabularyError: if no vocabulary is given
        ValueError: on an empty descriptor list
    """
    if vocabulary is None:
        raise VocabularyError("Global descriptors need a trained vocabulary")
    descriptors = as_descriptor_array(descriptors)
    if descriptors.shape[0] == 0:
        raise ValueError("Cannot describe a frame without descriptors")

    words = vocabulary.quantize(descriptors)
    residuals = unpack_bits(descriptors).astype(np.float64) - unpack_bits(vocabulary.words[words])
    projected = residuals @ projection_matrix(vocabulary.projection_seed).T

    vlad = np.zeros((vocabulary.size, PROJECTED_DIM))
    np.add.at(vlad, words, projected)
    vlad = vlad.reshape(-1)
    norm = np.linalg.norm(vlad)
    if not norm > 1e-12:
        counts = np.bincount(words, minlength=vocabulary.size).astype(np.float64)
        vlad = np.repeat(counts, PROJECTED_DIM)
        norm = np.linalg.norm(vlad)
    return vlad / norm


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b))
