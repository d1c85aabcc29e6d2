"""Scenes, the classifier contract and the simulated worst-case attacker."""
from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InvalidGeometry
from .geometry import Rect, check_rect


class AttackerPolicy(str, enum.Enum):
    CONSTANT_WRONG = "constant_wrong"
    REGION_HASH = "region_hash"

    @property
    def code(self) -> int:
        return kernels.CONSTANT_WRONG if self is AttackerPolicy.CONSTANT_WRONG else kernels.REGION_HASH


@dataclass(frozen=True)
class Scene:
    """Synthetic stand-in for an image: an object, a label, maybe a patch.

    ``tau`` is the fraction of the object that must stay visible for the
    classifier to recognise it once the patch is neutralised.
    """

    width: int
    height: int
    object_region: Rect
    true_label: int
    distractor_label: int
    patch: Rect | None = None
    tau: float = 0.0
    policy: AttackerPolicy = AttackerPolicy.CONSTANT_WRONG
    num_classes: int = 10
    scene_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "object_region", Rect(*self.object_region))
        if self.patch is not None:
            object.__setattr__(self, "patch", Rect(*self.patch))
        object.__setattr__(self, "policy", AttackerPolicy(self.policy))
        check_rect(self.object_region, self.width, self.height)
        if self.patch is not None:
            check_rect(self.patch, self.width, self.height)
            if self.patch.width != self.patch.height:
                raise InvalidGeometry(f"patch {tuple(self.patch)} is not square")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        for label in (self.true_label, self.distractor_label):
            if not 0 <= label < self.num_classes:
                raise ValueError(f"label {label} outside [0, {self.num_classes})")
        if self.distractor_label == self.true_label:
            raise ValueError("distractor label must differ from the true label")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")

    @property
    def patch_side(self) -> int:
        return 0 if self.patch is None else self.patch.width

    @property
    def is_attacked(self) -> bool:
        return self.patch is not None

    def admissible(self) -> bool:
        """True if the patch covers at most a quarter of the image."""
        v = self.patch_side
        return 4 * v * v <= self.width * self.height

    def without_patch(self) -> "Scene":
        return replace(self, patch=None)

    def with_tau(self, tau: float) -> "Scene":
        return replace(self, tau=tau)


def union_covers_patch(patch: Rect, applied_masks: Sequence[Rect]) -> bool:
    """True iff every pixel of ``patch`` lies under at least one mask."""
    if not applied_masks:
        return False
    covered = np.zeros((patch.height, patch.width), dtype=bool)
    for m in applied_masks:
        x1, y1 = max(m[0], patch.x1), max(m[1], patch.y1)
        x2, y2 = min(m[2], patch.x2), min(m[3], patch.y2)
        if x1 <= x2 and y1 <= y2:
            covered[y1 - patch.y1:y2 - patch.y1 + 1, x1 - patch.x1:x2 - patch.x1 + 1] = True
    return bool(covered.all())


def render_scene(scene: Scene, applied_masks: Sequence[Rect] = ()) -> np.ndarray:
    """Deterministic (H, W, 3) float image of ``scene`` with masked pixels at 0.0."""
    img = np.full((scene.height, scene.width, 3), 0.5, dtype=np.float64)
    o = scene.object_region
    shade = 0.25 + 0.5 * (scene.true_label + 1) / (scene.num_classes + 1)
    img[o.y1:o.y2 + 1, o.x1:o.x2 + 1] = (shade, 0.8, 1.0 - shade)
    if scene.patch is not None:
        p = scene.patch
        yy, xx = np.mgrid[p.y1:p.y2 + 1, p.x1:p.x2 + 1]
        checker = ((xx + yy) % 2).astype(np.float64)
        img[p.y1:p.y2 + 1, p.x1:p.x2 + 1] = (0.25 + 0.75 * checker)[..., None]
    for m in applied_masks:
        img[m[1]:m[3] + 1, m[0]:m[2] + 1] = 0.0
    return img


def _kernel_for(scene: Scene):
    return kernels.WorstCaseKernel(
        scene.width, scene.height,
        tuple(scene.patch) if scene.patch is not None else None,
        tuple(scene.object_region), scene.tau, scene.policy.code,
        scene.true_label, scene.distractor_label, scene.num_classes,
        kernels.pixel_key_table(scene.width, scene.height),
    )


class Classifier:
    """The contract every defense stage talks to.

    Subclasses implement :meth:`_classify`. Every call through
    :meth:`classify` or :meth:`classify_batch` counts one query per
    classified rendering.
    """

    def __init__(self):
        self._queries = 0
        self._lock = threading.Lock()

    @property
    def queries(self) -> int:
        return self._queries

    def _count(self, n: int) -> None:
        with self._lock:
            self._queries += n

    def classify(self, scene: Scene, applied_masks: Sequence[Rect] = ()) -> int:
        self._count(1)
        return int(self._classify(scene, list(applied_masks)))

    def classify_batch(self, scene: Scene, base: Rect | None, candidates) -> np.ndarray:
        """Labels for ``[base, c]`` (or ``[c]`` if base is None) per candidate mask."""
        cands = np.asarray(candidates, dtype=np.int64).reshape(-1, 4)
        self._count(len(cands))
        return self._classify_batch(scene, base, cands)

    def _classify(self, scene, applied_masks):
        raise NotImplementedError

    def _classify_batch(self, scene, base, cands):
        prefix = [Rect(*base)] if base is not None else []
        return np.array([self._classify(scene, prefix + [Rect(*c)]) for c in cands],
                        dtype=np.int64)


class WorstCaseClassifier(Classifier):
    """Classifier fooled by any visible patch pixel.

    When the patch is fully hidden (or absent) it returns the true label as
    long as at least ``tau`` of the object stays visible, and the distractor
    label otherwise.
    """

    def __init__(self):
        super().__init__()
        self._kernels = {}

    def kernel(self, scene: Scene):
        k = self._kernels.get(scene)
        if k is None:
            if len(self._kernels) > 64:
                self._kernels.clear()
            k = self._kernels[scene] = _kernel_for(scene)
        return k

    def _classify(self, scene, applied_masks):
        k = self.kernel(scene)
        if len(applied_masks) <= 2:
            cands = np.array([applied_masks[-1]], dtype=np.int64) if applied_masks else \
                np.array([[0, 0, -1, -1]], dtype=np.int64)
            base = tuple(applied_masks[0]) if len(applied_masks) == 2 else None
            return int(k.label_pairs(base, cands)[0])
        return int(k.label_masks(np.array(applied_masks, dtype=np.int64)))

    def _classify_batch(self, scene, base, cands):
        return self.kernel(scene).label_pairs(tuple(base) if base is not None else None, cands)


def worst_case_classify(scene: Scene, applied_masks: Sequence[Rect] = ()) -> int:
    """One-shot worst-case classification (pixel-bitmap route)."""
    return int(_kernel_for(scene).label_masks(np.array(list(applied_masks), dtype=np.int64)))
