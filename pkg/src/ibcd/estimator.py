"""Iterative black-box patch size estimation.

The search starts from a mask large enough to dominate any admissible patch
and shrinks the mask until the double-masking consistency signal disappears.
The returned size is the last mask size that still dominated the patch.
"""
from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .classifier import WorstCaseClassifier
from .errors import AssumptionViolation, InvalidConfig, InvalidInput
from .geometry import (MaskSchedule, MaskSet, Rect, generate_mask_set,
                       initial_mask_side, rect_intersects)
from .masking import double_mask_check, one_mask_sweep, satisfiability_check


@functools.lru_cache(maxsize=512)
def cached_mask_set(width: int, height: int, eta: int, stride: int) -> MaskSet:
    return generate_mask_set(width, height, eta, stride)


def build_schedule(width: int, stride: int, interval: int, eta_min: int | None = None,
                   height: int | None = None) -> MaskSchedule:
    """Descending mask sizes from the initial side down to ``eta_min``.

    ``eta_min`` defaults to the stride; smaller masks guarantee no coverage.
    """
    height = width if height is None else height
    if interval < 1:
        raise InvalidConfig(f"reduction interval must be >= 1, got {interval}")
    if stride < 1:
        raise InvalidConfig(f"stride must be >= 1, got {stride}")
    eta_min = stride if eta_min is None else eta_min
    if eta_min < stride:
        raise InvalidConfig(f"eta_min {eta_min} below stride {stride}")
    eta_max = initial_mask_side(width, height, stride)
    if eta_min > eta_max:
        raise InvalidConfig(f"eta_min {eta_min} above initial mask side {eta_max}")
    sizes = list(range(eta_max, eta_min, -interval))
    sizes.append(eta_min)
    return MaskSchedule(tuple(sizes), stride, interval)


def sliding_space_filter(hit_mask: Rect, next_mask_set: MaskSet) -> list[Rect]:
    return [m for m in next_mask_set if rect_intersects(m, hit_mask)]


def detect_clean(clf, scene, largest_mask_set: MaskSet, y_prior: int) -> bool:
    labels = clf.classify_batch(scene, None, largest_mask_set.array)
    return bool((labels == y_prior).all())


@dataclass
class EstimationResult:
    estimated_size: int
    iterations: int
    query_count: int
    search_count: int
    per_iteration_sizes: list[int] = field(default_factory=list)
    sat_states: list[bool] = field(default_factory=list)
    y_true_recovered: int | None = None
    used_sliding_opt: bool = False

    @property
    def is_clean(self) -> bool:
        return self.estimated_size == 0


def estimate_patch_size(clf, scene, schedule: MaskSchedule, sliding_opt: bool = False
                        ) -> EstimationResult:
    """Estimate the side of the patch in ``scene`` using only ``clf`` queries.

    ``search_count`` counts one-mask searches (first-round classifications,
    including the clean-detection sweep); ``query_count`` counts every
    classifier call.
    """
    W, H, s = scene.width, scene.height, schedule.stride
    q0 = clf.queries
    sizes: list[int] = []
    states: list[bool] = []

    def result(size, y_true=None):
        return EstimationResult(size, len(sizes), clf.queries - q0, searches, sizes,
                                states, y_true, sliding_opt)

    y_prior = clf.classify(scene)
    largest = cached_mask_set(W, H, schedule.sizes[0], s)
    searches = len(largest)
    if detect_clean(clf, scene, largest, y_prior):
        return result(0)

    def previous(it):
        if it == 0:
            raise AssumptionViolation(
                f"scene {scene.scene_id}: initial mask side {schedule.sizes[0]} does not "
                "dominate the patch; it exceeds the admissible size")
        return sizes[it - 1]

    y_true = None
    hit = None
    for it, eta in enumerate(schedule.sizes):
        mask_set = cached_mask_set(W, H, eta, s)
        sizes.append(eta)
        first = mask_set
        if sliding_opt and hit is not None:
            first = mask_set.subset(sliding_space_filter(hit, mask_set))
        searches += len(first)
        selected = one_mask_sweep(clf, scene, first, y_prior, y_true)
        records = []
        next_hit = None
        for m0, _ in selected:
            rec = double_mask_check(clf, scene, m0, mask_set)
            records.append(rec)
            if it == 0 and rec.cp and y_true is None:
                y_true = rec.y_con
            if rec.cp and rec.y_con != y_true:
                states.append(False)
                return result(previous(it), y_true)
            if rec.cp and next_hit is None:
                next_hit = rec.first_mask
        if not satisfiability_check(records):
            states.append(False)
            return result(previous(it), y_true)
        states.append(True)
        hit = next_hit
    return result(sizes[-1], y_true)


def aggregate_estimate(per_image_sizes) -> int:
    """Ceiling of the mean estimate, so the aggregate never under-covers."""
    sizes = list(per_image_sizes)
    if not sizes:
        raise InvalidInput("no estimates to aggregate")
    if all(isinstance(v, int) for v in sizes):
        return -(-sum(sizes) // len(sizes))
    return math.ceil(round(math.fsum(sizes) / len(sizes), 9))


def _estimate_one(args):
    scene, schedule, sliding_opt = args
    return estimate_patch_size(WorstCaseClassifier(), scene, schedule, sliding_opt)


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get("IBCD_WORKERS", "1"))
    return max(1, workers)


def estimate_many(scenes, schedule: MaskSchedule, sliding_opt: bool = False,
                  workers: int | None = None) -> list[EstimationResult]:
    """Estimate independent scenes, in input order, optionally in parallel.

    Each scene gets a fresh worst-case classifier so query counts are per scene.
    """
    jobs = [(sc, schedule, sliding_opt) for sc in scenes]
    n = worker_count(workers)
    if n == 1 or len(jobs) < 2:
        return [_estimate_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_estimate_one, jobs, chunksize=max(1, len(jobs) // (4 * n))))
