"""Derandomized smoothing certificates for band and block ablations.

An ablation keeps a band (all rows, ``b`` consecutive columns) or a ``b`` x
``b`` block of the image and occludes everything else. Ablations wrap around
the image edges; patches do not.
"""
from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass

from .errors import InvalidGeometry
from .geometry import Rect


class AblationKind(str, enum.Enum):
    BAND = "band"
    BLOCK = "block"


@dataclass(frozen=True)
class AblationSpec:
    kind: AblationKind
    b: int
    k: int
    K: int
    width: int
    height: int

    @property
    def start(self) -> tuple[int, int]:
        """(column, row) of the top-left retained pixel."""
        if self.kind is AblationKind.BAND:
            return self.k - 1, 0
        row, col = divmod(self.k - 1, self.width)
        return col, row

    def columns(self) -> list[int]:
        c0, _ = self.start
        return [(c0 + i) % self.width for i in range(self.b)]

    def rows(self) -> list[int]:
        if self.kind is AblationKind.BAND:
            return list(range(self.height))
        _, r0 = self.start
        return [(r0 + i) % self.height for i in range(self.b)]


def _wrapped_complement(start: int, b: int, n: int) -> list[tuple[int, int]]:
    """Closed intervals of [0, n) outside the wrapped run start..start+b-1."""
    if b >= n:
        return []
    end = start + b - 1
    if end < n:
        out = []
        if start > 0:
            out.append((0, start - 1))
        if end < n - 1:
            out.append((end + 1, n - 1))
        return out
    return [(end - n + 1, start - 1)]


def ablation_complement(width: int, height: int, kind, b: int, k: int) -> list[Rect]:
    """Occluding rectangles that leave only the k-th ablation visible."""
    kind = AblationKind(kind)
    if kind is AblationKind.BAND:
        return [Rect(a, 0, z, height - 1) for a, z in _wrapped_complement(k - 1, b, width)]
    row, col = divmod(k - 1, width)
    rects = [Rect(a, 0, z, height - 1) for a, z in _wrapped_complement(col, b, width)]
    rects += [Rect(0, a, width - 1, z) for a, z in _wrapped_complement(row, b, height)]
    return rects


def enumerate_ablations(width: int, height: int, b: int, kind) -> list[AblationSpec]:
    kind = AblationKind(kind)
    limit = width if kind is AblationKind.BAND else min(width, height)
    if not 1 <= b <= limit:
        raise InvalidGeometry(f"ablation width {b} out of range [1, {limit}]")
    K = width if kind is AblationKind.BAND else width * height
    return [AblationSpec(kind, b, k, K, width, height) for k in range(1, K + 1)]


@dataclass(frozen=True)
class VoteTally:
    counts: dict
    K: int
    num_classes: int | None = None

    def top(self) -> int:
        """Most voted label; ties go to the smaller label."""
        return min(self.counts, key=lambda c: (-self.counts[c], c))

    def runner_up(self, y: int) -> int:
        return max((n for c, n in self.counts.items() if c != y), default=0)


def vote_tally(clf, scene, ablations) -> VoteTally:
    votes = Counter()
    for a in ablations:
        votes[clf.classify(scene, ablation_complement(a.width, a.height, a.kind, a.b, a.k))] += 1
    K = ablations[0].K if ablations else 0
    return VoteTally(dict(sorted(votes.items())), K, scene.num_classes)


def delta(kind, v: int, b: int) -> int:
    """Most ablations a v-sided patch can intersect."""
    n = v + b - 1
    return n * n if AblationKind(kind) is AblationKind.BLOCK else n


def _effective_margin(tally: VoteTally, y: int) -> int:
    """n_y minus the strongest competitor, where a smaller label wins ties.

    A competitor with a smaller label than ``y`` needs one vote less to take
    over, so it is charged one extra vote. Labels with no votes still compete
    when they are smaller than ``y``.
    """
    n_y = tally.counts.get(y, 0)
    best = 1 if y > 0 else 0
    for c, n in tally.counts.items():
        if c != y:
            best = max(best, n + (1 if c < y else 0))
    return n_y - best


def is_certified(tally: VoteTally, kind, v: int, b: int, y: int | None = None) -> bool:
    """Margin test: n_y >= n_y' + 2*delta, with ties resolved toward smaller labels."""
    y = tally.top() if y is None else y
    return _effective_margin(tally, y) >= 2 * delta(kind, v, b)


def max_certifiable_patch(tally: VoteTally, kind, b: int, width: int | None = None,
                          height: int | None = None) -> int:
    """Largest patch side the tally certifies, 0 if none."""
    kind = AblationKind(kind)
    y = tally.top()
    budget = _effective_margin(tally, y) // 2
    if budget < 1:
        return 0
    if kind is AblationKind.BAND:
        v = budget - b + 1
        cap = tally.K // 2 if width is None else width // 2
    else:
        v = math.isqrt(budget) - b + 1
        cap = math.isqrt(tally.K // 2) if width is None else math.isqrt(width * height // 2)
    return max(0, min(v, cap))
