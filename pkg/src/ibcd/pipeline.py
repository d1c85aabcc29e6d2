"""Two-stage black-box certification: estimate the patch size, then certify."""
from __future__ import annotations

import csv
import io
import json
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .classifier import AttackerPolicy, WorstCaseClassifier
from .errors import IBCDError, InvalidConfig, InvalidInput, UndefinedRate
from .estimator import aggregate_estimate, build_schedule, cached_mask_set, estimate_many
from .geometry import MaskSet, mask_side_for_patch
from .smoothing import AblationKind, enumerate_ablations, is_certified, vote_tally

SCHEMA_VERSION = 1
BACKENDS = ("double_mask", "band", "block")


@dataclass
class ExperimentConfig:
    width: int = 32
    height: int = 32
    stride: int = 5
    interval: int = 2
    eta_min: int | None = None
    policy: str = "constant_wrong"
    tau: float = 0.0
    sizes: tuple = (3, 6, 9, 12, 15)
    scenes_per_size: int = 20
    clean_scenes: int = 20
    seed: int = 0
    sliding_opt: bool = False
    backend: str = "double_mask"
    ablation_width: int = 4
    num_classes: int = 10
    object_min_side: int | None = None
    object_max_side: int | None = None
    per_image: bool = False

    def __post_init__(self):
        self.sizes = tuple(int(v) for v in self.sizes)
        self.validate()

    def validate(self):
        if self.width < 2 or self.height < 2:
            raise InvalidConfig("image must be at least 2x2")
        if self.backend not in BACKENDS:
            raise InvalidConfig(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        AttackerPolicy(self.policy)
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidConfig(f"tau must lie in [0, 1], got {self.tau}")
        if self.scenes_per_size < 0 or self.clean_scenes < 0:
            raise InvalidConfig("scene counts must be non-negative")
        for v in self.sizes:
            if v < 1 or 4 * v * v > self.width * self.height:
                raise InvalidConfig(f"patch size {v} is not admissible for a "
                                    f"{self.width}x{self.height} image")
        self.schedule()

    def schedule(self):
        return build_schedule(self.width, self.stride, self.interval, self.eta_min, self.height)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# ------------------------------------------------------------ stage 2 metrics

def _mask_set_for(width, height, v, stride) -> MaskSet:
    eta = mask_side_for_patch(v, stride)
    if eta > min(width, height):
        raise InvalidConfig(f"patch size {v} needs mask side {eta}, larger than the image")
    return cached_mask_set(width, height, eta, stride)


def certify_two_mask(clf, scene, mask_set: MaskSet, v: int | None = None) -> bool:
    """Two-mask correctness of the clean scene over every ordered mask pair."""
    clean = scene.without_patch()
    if v == 0:
        return clf.classify(clean) == scene.true_label
    if v is not None and mask_set.eta - mask_set.stride + 1 < v:
        raise InvalidConfig(f"mask side {mask_set.eta} at stride {mask_set.stride} "
                            f"cannot cover a patch of side {v}")
    for m0 in mask_set:
        if (clf.classify_batch(clean, m0, mask_set.array) != scene.true_label).any():
            return False
    return True


def _smaller_majority(labels) -> int:
    counts = Counter(int(x) for x in labels)
    return min(counts, key=lambda c: (-counts[c], c))


def double_mask_predict(clf, scene, mask_set: MaskSet) -> int:
    """Double-masking recovery: trust a disagreeing one-mask label only if it
    survives every second mask, otherwise fall back to the majority."""
    first = clf.classify_batch(scene, None, mask_set.array)
    if (first == first[0]).all():
        return int(first[0])
    majority = _smaller_majority(first)
    for i in np.flatnonzero(first != majority):
        second = clf.classify_batch(scene, mask_set[i], mask_set.array)
        if (second == first[i]).all():
            return int(first[i])
    return majority


def clean_accuracy(clf, scenes, mask_set: MaskSet | None) -> float:
    """Fraction of scenes the defended model gets right on the clean image.

    ``mask_set=None`` means the estimated size was 0 and the image is classified
    undefended.
    """
    scenes = list(scenes)
    if not scenes:
        raise InvalidInput("no scenes")
    ok = 0
    for sc in scenes:
        clean = sc.without_patch()
        pred = clf.classify(clean) if mask_set is None else double_mask_predict(clf, clean, mask_set)
        ok += pred == sc.true_label
    return ok / len(scenes)


@dataclass(frozen=True)
class CertBackend:
    kind: str = "double_mask"
    stride: int = 5
    ablation_width: int = 4


class _TallyCache:
    def __init__(self):
        self._cache = {}

    def get(self, clf, scene, kind, b):
        key = (scene.without_patch(), kind, b)
        if key not in self._cache:
            abl = enumerate_ablations(scene.width, scene.height, b, kind)
            self._cache[key] = vote_tally(clf, key[0], abl)
        return self._cache[key]


def certified_accuracy(clf, scenes, v: int, backend: CertBackend, tallies=None) -> float:
    scenes = list(scenes)
    if not scenes:
        raise InvalidInput("no scenes")
    if v < 0:
        raise InvalidInput(f"patch size must be non-negative, got {v}")
    ok = 0
    if backend.kind == "double_mask":
        ms = None
        for sc in scenes:
            if v == 0:
                ok += certify_two_mask(clf, sc, None, 0)
                continue
            ms = ms or _mask_set_for(sc.width, sc.height, v, backend.stride)
            ok += certify_two_mask(clf, sc, ms, v)
    else:
        tallies = tallies or _TallyCache()
        for sc in scenes:
            t = tallies.get(clf, sc, backend.kind, backend.ablation_width)
            ok += t.top() == sc.true_label and is_certified(t, backend.kind, v, backend.ablation_width)
    return ok / len(scenes)


def smoothed_clean_accuracy(clf, scenes, backend: CertBackend, tallies=None) -> float:
    tallies = tallies or _TallyCache()
    scenes = list(scenes)
    if not scenes:
        raise InvalidInput("no scenes")
    return sum(tallies.get(clf, sc, backend.kind, backend.ablation_width).top() == sc.true_label
               for sc in scenes) / len(scenes)


def fluctuation_rate(acc_white: float, acc_black: float) -> float:
    """Relative accuracy gap between known-size and estimated-size certification."""
    if acc_white == 0:
        raise UndefinedRate("fluctuation rate undefined when the white-box accuracy is 0")
    return abs(acc_white - acc_black) / acc_white


# ---------------------------------------------------------------- the report

@dataclass
class ReportRow:
    actual_size: int
    certified_acc_white: float
    clean_acc_white: float
    mean_estimated_size: float
    estimated_size: int
    certified_acc_black: float
    clean_acc_black: float
    certified_fluctuation: float | None
    clean_fluctuation: float | None
    mean_query_count: float
    mean_search_count: float
    n_scenes: int
    per_image_sizes: list = field(default_factory=list)
    wall_time_s: float | None = None


CSV_COLUMNS = [
    "actual_size", "certified_acc_white", "clean_acc_white",
    "mean_estimated_size", "estimated_size", "certified_acc_black", "clean_acc_black",
    "certified_fluctuation", "clean_fluctuation",
    "mean_query_count", "mean_search_count", "n_scenes",
]


@dataclass
class CleanSummary:
    n_scenes: int
    detected_clean: float | None
    clean_acc: float | None
    mean_query_count: float | None


@dataclass
class Report:
    config: dict
    rows: list
    clean: CleanSummary
    backend: str
    schema_version: int = SCHEMA_VERSION

    def to_json(self, timing: bool = False) -> str:
        rows = []
        for r in self.rows:
            d = _rounded(asdict(r))
            if not timing:
                d.pop("wall_time_s")
            rows.append(d)
        doc = {"schema_version": self.schema_version, "backend": self.backend,
               "config": self.config, "rows": rows, "clean": _rounded(asdict(self.clean))}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            d = _rounded(asdict(r))
            w.writerow(["n/a" if d[c] is None else d[c] for c in CSV_COLUMNS])
        return buf.getvalue()


def _rounded(d: dict) -> dict:
    return {k: round(v, 6) if isinstance(v, float) else v for k, v in d.items()}


class PipelineError(IBCDError):
    def __init__(self, scene_id, cause):
        super().__init__(f"scene {scene_id}: {cause}")
        self.scene_id = scene_id
        self.cause = cause


def _safe_rate(white, black):
    try:
        return fluctuation_rate(white, black)
    except UndefinedRate:
        return None


def _estimate(scenes, schedule, sliding_opt, workers):
    # the estimator runs against the pure worst-case attacker (no occlusion sensitivity)
    probe = [sc.with_tau(0.0) for sc in scenes]
    try:
        return estimate_many(probe, schedule, sliding_opt, workers)
    except IBCDError:
        for sc in probe:
            try:
                estimate_many([sc], schedule, sliding_opt, 1)
            except IBCDError as exc:
                raise PipelineError(sc.scene_id, exc) from exc
        raise


def run_ibcd(config: ExperimentConfig, workers: int | None = None, corpus=None) -> Report:
    from .scenes import synth_scenes

    corpus = corpus or synth_scenes(config, config.seed)
    schedule = config.schedule()
    clf = WorstCaseClassifier()
    backend = CertBackend(config.backend, config.stride, config.ablation_width)
    tallies = _TallyCache()

    def stage2(scenes, v):
        if backend.kind == "double_mask":
            ms = None if v == 0 else _mask_set_for(config.width, config.height, v, config.stride)
            return (certified_accuracy(clf, scenes, v, backend),
                    clean_accuracy(clf, scenes, ms))
        return (certified_accuracy(clf, scenes, v, backend, tallies),
                smoothed_clean_accuracy(clf, scenes, backend, tallies))

    rows = []
    for v in config.sizes:
        t0 = time.perf_counter()
        scenes = [sc for sc in corpus.scenes if sc.patch_side == v]
        if not scenes:
            continue
        results = _estimate(scenes, schedule, config.sliding_opt, workers)
        sizes = [r.estimated_size for r in results]
        est = aggregate_estimate(sizes)
        cert_w, clean_w = stage2(scenes, v)
        if config.per_image:
            per = [stage2([sc], s) for sc, s in zip(scenes, sizes)]
            cert_b = sum(p[0] for p in per) / len(per)
            clean_b = sum(p[1] for p in per) / len(per)
        else:
            cert_b, clean_b = stage2(scenes, est)
        rows.append(ReportRow(
            actual_size=v,
            certified_acc_white=cert_w, clean_acc_white=clean_w,
            mean_estimated_size=sum(sizes) / len(sizes), estimated_size=est,
            certified_acc_black=cert_b, clean_acc_black=clean_b,
            certified_fluctuation=_safe_rate(cert_w, cert_b),
            clean_fluctuation=_safe_rate(clean_w, clean_b),
            mean_query_count=float(np.mean([r.query_count for r in results])),
            mean_search_count=float(np.mean([r.search_count for r in results])),
            n_scenes=len(scenes), per_image_sizes=sizes,
            wall_time_s=time.perf_counter() - t0,
        ))

    clean_scenes = [sc for sc in corpus.scenes if sc.patch is None]
    if clean_scenes:
        results = _estimate(clean_scenes, schedule, config.sliding_opt, workers)
        clean = CleanSummary(
            n_scenes=len(clean_scenes),
            detected_clean=sum(r.is_clean for r in results) / len(results),
            clean_acc=clean_accuracy(clf, clean_scenes, None),
            mean_query_count=float(np.mean([r.query_count for r in results])),
        )
    else:
        clean = CleanSummary(0, None, None, None)
    return Report(config.to_dict(), rows, clean, config.backend)

