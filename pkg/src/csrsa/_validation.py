"""Input checks shared by the estimator classes."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .engine import labeled
from .scene import ReferenceContext, Utterance


def check_contexts(X) -> list[tuple[str, ReferenceContext]]:
    """Normalise X to (id, context) pairs; rejects empty input and non-contexts."""
    if isinstance(X, ReferenceContext):
        X = [X]
    try:
        pairs = labeled(X)
    except (TypeError, ValueError) as exc:
        raise ValueError("X must be a sequence of ReferenceContext, (id, context) pairs "
                         "or labelled contexts") from exc
    if not pairs:
        raise ValueError("X is empty")
    for cid, ctx in pairs:
        if not isinstance(ctx, ReferenceContext):
            raise ValueError(f"item {cid!r} of X is not a ReferenceContext")
    return pairs


def check_codes(y, n: int) -> list[Utterance | str]:
    """Coded utterances aligned with X (strings or Utterance objects)."""
    if isinstance(y, (str, Utterance)):
        raise ValueError("y must be a sequence of coded utterances, not a single string")
    y = list(y)
    if len(y) != n:
        raise ValueError(f"X and y have different lengths ({n} vs {len(y)})")
    for i, code in enumerate(y):
        if not isinstance(code, (str, Utterance)):
            raise ValueError(f"y[{i}] must be a string or Utterance, got {type(code).__name__}")
    return y


def check_sample_weight(sample_weight, n: int) -> np.ndarray:
    """Positive integer counts, one per trial (default all ones)."""
    if sample_weight is None:
        return np.ones(n, dtype=int)
    w = np.asarray(sample_weight)
    if w.shape != (n,):
        raise ValueError(f"sample_weight must have shape ({n},), got {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 1) or np.any(w != np.round(w)):
        raise ValueError("sample_weight must hold positive integer counts")
    return w.astype(int)


def check_fitted(est, attributes: Sequence[str]) -> None:
    """Raise sklearn's NotFittedError unless ``fit`` has set ``attributes``."""
    check_is_fitted(est, attributes)
