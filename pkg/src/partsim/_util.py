import math

import numpy as np


def ceil_frac(f: float, n: int) -> int:
    """ceil(f * n), immune to float noise such as 0.7 * 10 = 7.000000000000001."""
    return math.ceil(round(f * n, 9))


def floor_frac(f: float, n: int) -> int:
    return math.floor(round(f * n, 9))


def rank_desc(scores) -> np.ndarray:
    """Indices sorted by descending score, ties by ascending index."""
    scores = np.asarray(scores)
    return np.argsort(-scores, kind="stable")
