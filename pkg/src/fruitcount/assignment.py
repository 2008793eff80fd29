"""Greedy one-to-one assignment shared by the tracker and the evaluator."""

from __future__ import annotations

import numpy as np


def greedy_pairs(score: np.ndarray, threshold: float, strict: bool = True) -> list[tuple[int, int]]:
    """Greedy one-to-one matching on a static score matrix.

    Equivalent to repeatedly binding the globally best remaining pair
    while its score passes ``threshold`` (``>`` when ``strict``, else
    ``>=``). Ties go to the lower row, then the lower column.
    """
    score = np.asarray(score, dtype=float)
    keep = score > threshold if strict else score >= threshold
    rows, cols = np.nonzero(keep)
    if rows.size == 0:
        return []
    order = np.lexsort((cols, rows, -score[rows, cols]))
    used_r: set[int] = set()
    used_c: set[int] = set()
    pairs = []
    for k in order:
        r, c = int(rows[k]), int(cols[k])
        if r in used_r or c in used_c:
            continue
        used_r.add(r)
        used_c.add(c)
        pairs.append((r, c))
    return pairs
