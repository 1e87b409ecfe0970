from .binary import Match, hamming, hamming_matrix, match_ratio
from .features import DESCRIPTOR_BYTES, FrameFeatures, Keypoint
from .global_descriptor import describe_global, similarity
from .vocabulary import Vocabulary, VocabularyError, quantize, train_vocabulary

__all__ = [
    "DESCRIPTOR_BYTES",
    "FrameFeatures",
    "Keypoint",
    "Match",
    "Vocabulary",
    "VocabularyError",
    "describe_global",
    "hamming",
    "hamming_matrix",
    "match_ratio",
    "quantize",
    "similarity",
    "train_vocabulary",
]
