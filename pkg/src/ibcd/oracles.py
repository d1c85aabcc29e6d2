"""Brute-force reference implementations, for tests and cross-checks only.

These read the hidden patch rectangle directly and enumerate everything.
Production code never imports this module.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolation
from .geometry import Rect, generate_mask_set


@dataclass(frozen=True)
class CoverageReport:
    eta: int
    covered: bool
    witness: Rect | None = None
    counterexample: Rect | None = None


def enumerate_patch_positions(width: int, height: int, v: int) -> list[Rect]:
    return [Rect.square(x, y, v) for y in range(height - v + 1) for x in range(width - v + 1)]


def _cover_matrix(masks: np.ndarray, patches: np.ndarray) -> np.ndarray:
    """Boolean (n_patches, n_masks) matrix: does mask j contain patch i."""
    p = patches[:, None, :]
    m = masks[None, :, :]
    return ((m[..., 0] <= p[..., 0]) & (m[..., 1] <= p[..., 1])
            & (m[..., 2] >= p[..., 2]) & (m[..., 3] >= p[..., 3]))


def coverage_oracle(mask_set, v: int, width: int, height: int) -> CoverageReport:
    """Check every placement of a ``v``-sided patch against every mask."""
    patches = enumerate_patch_positions(width, height, v)
    masks = np.array([tuple(m) for m in mask_set], dtype=np.int64).reshape(-1, 4)
    hit = _cover_matrix(masks, np.array(patches, dtype=np.int64))
    ok = hit.any(axis=1)
    if not ok.all():
        return CoverageReport(mask_set.eta, False, counterexample=patches[int(np.argmin(ok))])
    return CoverageReport(mask_set.eta, True, witness=Rect(*map(int, masks[int(np.argmax(hit[0]))])))


def some_mask_covers(patch: Rect, width: int, height: int, eta: int, stride: int) -> bool:
    if eta > min(width, height):
        return False
    ms = generate_mask_set(width, height, eta, stride)
    return any(m.x1 <= patch.x1 and m.y1 <= patch.y1 and m.x2 >= patch.x2 and m.y2 >= patch.y2
               for m in ms)


def brute_force_estimate(scene, schedule, width: int | None = None,
                         height: int | None = None) -> int:
    """Last schedule size before the first one whose grid fails to cover the patch."""
    width = scene.width if width is None else width
    height = scene.height if height is None else height
    if scene.patch is None:
        return 0
    last = None
    for eta in schedule.sizes:
        if not some_mask_covers(scene.patch, width, height, eta, schedule.stride):
            if last is None:
                raise AssumptionViolation(f"no mask of side {eta} covers the patch")
            return last
        last = eta
    return last


# ---------------------------------------------------------------- smoothing

def ablation_pixels(width: int, height: int, kind: str, b: int, k: int) -> set[tuple[int, int]]:
    """Retained pixels (x, y) of the k-th ablation (1-based), wrapping around."""
    if kind == "band":
        cols = {(k - 1 + i) % width for i in range(b)}
        return {(x, y) for x in cols for y in range(height)}
    row, col = divmod(k - 1, width)
    return {((col + i) % width, (row + j) % height) for i in range(b) for j in range(b)}


def ablation_count(width: int, height: int, kind: str) -> int:
    return width if kind == "band" else width * height


def _argmax(counts: dict[int, int]) -> int:
    return min(counts, key=lambda c: (-counts[c], c))


def smoothing_attack_oracle(scene, kind: str, v: int, b: int, clf=None) -> bool:
    """Can any ``v``-sided patch placement flip the smoothed prediction?

    Every ablation that touches the patch is handed to one wrong class; each
    candidate wrong class is tried. Ties go to the smaller label.
    """
    from .classifier import WorstCaseClassifier
    from .smoothing import ablation_complement

    if v <= 0:
        return False
    clf = WorstCaseClassifier() if clf is None else clf
    clean = scene.without_patch()
    W, H = scene.width, scene.height
    K = ablation_count(W, H, kind)
    pixels = [ablation_pixels(W, H, kind, b, k) for k in range(1, K + 1)]
    votes = [clf.classify(clean, ablation_complement(W, H, kind, b, k)) for k in range(1, K + 1)]
    counts: dict[int, int] = {}
    for lab in votes:
        counts[lab] = counts.get(lab, 0) + 1
    y = _argmax(counts)
    wrong = sorted(c for c in counts if c != y)
    absent = next((c for c in range(scene.num_classes) if c != y and c not in counts), None)
    if absent is not None:
        wrong.append(absent)
    for patch in enumerate_patch_positions(W, H, v):
        ppx = {(x, y_) for x in range(patch.x1, patch.x2 + 1) for y_ in range(patch.y1, patch.y2 + 1)}
        hit = [k for k in range(K) if pixels[k] & ppx]
        for c in wrong:
            new = dict(counts)
            new.setdefault(c, 0)
            for k in hit:
                new[votes[k]] -= 1
                new[c] += 1
            if _argmax(new) != y:
                return True
    return False
