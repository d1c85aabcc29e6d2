"""Double-masking search operation and the satisfiability check over its output."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import MaskSet, Rect


@dataclass(frozen=True)
class ConsistencyRecord:
    first_mask: Rect
    cp: bool
    y_con: Optional[int] = None

    def __post_init__(self):
        if self.cp != (self.y_con is not None):
            raise ValueError("y_con must be set exactly when cp is 1")


SCPSet = list  # list[ConsistencyRecord], one per selected first-round mask


def one_mask_sweep(clf, scene, mask_set: MaskSet, y_prior: int,
                   y_true: int | None = None) -> list[tuple[Rect, int]]:
    """Classify under each single mask and keep the informative ones.

    A mask is kept when its prediction differs from ``y_prior`` or, once the
    true label is known, equals it.
    """
    if len(mask_set) == 0:
        return []
    labels = clf.classify_batch(scene, None, mask_set.array)
    keep = labels != y_prior
    if y_true is not None:
        keep |= labels == y_true
    return [(mask_set[i], int(labels[i])) for i in np.flatnonzero(keep)]


def consistency_check(labels) -> tuple[bool, int | None]:
    labels = np.asarray(labels)
    if len(labels) and (labels == labels[0]).all():
        return True, int(labels[0])
    return False, None


def double_mask_check(clf, scene, m0: Rect, mask_set: MaskSet) -> ConsistencyRecord:
    labels = clf.classify_batch(scene, m0, mask_set.array)
    cp, y_con = consistency_check(labels)
    return ConsistencyRecord(Rect(*m0), cp, y_con)


def search_operation(clf, scene, mask_set: MaskSet, y_prior: int,
                     y_true: int | None = None, candidates: MaskSet | None = None):
    """One sweep of the search operation at a single mask size.

    ``candidates`` restricts the first-round masks (sliding-space optimisation);
    the second round always sweeps the full ``mask_set``.
    """
    first = mask_set if candidates is None else candidates
    selected = one_mask_sweep(clf, scene, first, y_prior, y_true)
    return [double_mask_check(clf, scene, m0, mask_set) for m0, _ in selected]


def satisfiability_check(scp) -> bool:
    """True iff some record is consistent; an empty set is False."""
    return any(r.cp for r in scp)
