"""Vector similarities and demographic match scores."""

from __future__ import annotations

import numpy as np


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; zero vectors map to 0.0 instead of NaN."""
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_rows(matrix: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Row-wise cosine against one vector, zero-guarded."""
    nv = np.linalg.norm(vec)
    if nv == 0.0:
        return np.zeros(matrix.shape[0], dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    out = matrix @ vec
    np.divide(out, norms * nv, out=out, where=norms > 0)
    out[norms == 0.0] = 0.0
    return np.clip(out, -1.0, 1.0)


def categoryboost(query_category_dist: np.ndarray, pin_category_dist: np.ndarray) -> float:
    """Cosine between category distributions; in [0, 1] since both are
    non-negative probability vectors."""
    return max(0.0, cosine(query_category_dist, pin_category_dist))


def topicboost(query_topic_dist: np.ndarray, pin_topic_dist: np.ndarray) -> float:
    return max(0.0, cosine(query_topic_dist, pin_topic_dist))


def embedding_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Plain cosine in [-1, 1] over latent vectors."""
    return cosine(a, b)


def gender_match(pin_male_score: float, segment_gender: str) -> float:
    """Match score in [0, 1]. A neutral pin (male score 0.5) scores 1.0 for
    every segment; a pin leaning away from the user's gender scores lower.
    Unknown-gender segments prefer neutral pins from either direction.
    """
    m = float(pin_male_score)
    if segment_gender == "male":
        return 1.0 - max(0.0, 0.5 - m) * 2.0
    if segment_gender == "female":
        return 1.0 - max(0.0, m - 0.5) * 2.0
    return 1.0 - abs(m - 0.5) * 2.0


def gender_match_batch(pin_male_scores: np.ndarray, segment_gender: str) -> np.ndarray:
    m = np.asarray(pin_male_scores, dtype=np.float64)
    if segment_gender == "male":
        return 1.0 - np.maximum(0.0, 0.5 - m) * 2.0
    if segment_gender == "female":
        return 1.0 - np.maximum(0.0, m - 0.5) * 2.0
    return 1.0 - np.abs(m - 0.5) * 2.0
