import numpy as np


def required_iterations(inlier_ratio: float, sample_size: int, confidence: float, cap: int) -> int:
    """Iterations after which a clean minimal sample was drawn with probability ``confidence``."""
    if inlier_ratio <= 0.0:
        return cap
    p_clean = inlier_ratio**sample_size
    if p_clean >= 1.0:
        return 1
    n = np.log(1.0 - confidence) / np.log(1.0 - p_clean)
    return int(min(cap, max(1, np.ceil(n))))


def draw_sample(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    return np.sort(rng.choice(n, size=size, replace=False))
