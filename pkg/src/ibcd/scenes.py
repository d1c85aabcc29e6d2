"""Seeded synthetic scene corpora standing in for image test sets."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .classifier import AttackerPolicy, Scene
from .errors import GenerationError
from .geometry import Rect

GENERATOR_VERSION = "1"


@dataclass(frozen=True)
class SceneCorpus:
    seed: int
    scenes: tuple
    metadata: dict = field(default_factory=dict, compare=False)

    def attacked(self):
        return [s for s in self.scenes if s.patch is not None]

    def clean(self):
        return [s for s in self.scenes if s.patch is None]


def config_hash(config) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _object_side_range(config):
    limit = min(config.width, config.height)
    lo = config.object_min_side or max(1, limit // 4)
    hi = config.object_max_side or limit
    if config.tau > 0:
        smallest_mask = config.schedule().eta_min
        if hi <= smallest_mask:
            raise GenerationError(
                f"objects of side <= {hi} can be hidden by every mask "
                f"(smallest side {smallest_mask}) while tau={config.tau}")
        lo = max(lo, smallest_mask + 1)
    if not 1 <= lo <= hi <= limit:
        raise GenerationError(f"object side range [{lo}, {hi}] does not fit the image")
    return lo, hi


def synth_scenes(config, seed: int | None = None) -> SceneCorpus:
    """Attacked scenes for every configured patch size, then clean scenes.

    Patch positions are uniform over all in-bounds placements.
    """
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    W, H, n_cls = config.width, config.height, config.num_classes
    policy = AttackerPolicy(config.policy)
    lo, hi = _object_side_range(config)

    def draw(scene_id, v):
        true_label = int(rng.integers(n_cls))
        distractor = int(rng.integers(n_cls - 1))
        distractor += distractor >= true_label
        ow, oh = (int(x) for x in rng.integers(lo, hi + 1, size=2))
        ox, oy = int(rng.integers(W - ow + 1)), int(rng.integers(H - oh + 1))
        patch = None
        if v:
            if 4 * v * v > W * H:
                raise GenerationError(f"patch side {v} exceeds a quarter of the image")
            px, py = int(rng.integers(W - v + 1)), int(rng.integers(H - v + 1))
            patch = Rect.square(px, py, v)
        return Scene(W, H, Rect(ox, oy, ox + ow - 1, oy + oh - 1), true_label, distractor,
                     patch=patch, tau=config.tau, policy=policy, num_classes=n_cls,
                     scene_id=scene_id)

    scenes = []
    for v in config.sizes:
        for _ in range(config.scenes_per_size):
            scenes.append(draw(len(scenes), v))
    for _ in range(config.clean_scenes):
        scenes.append(draw(len(scenes), 0))
    meta = {"generator_version": GENERATOR_VERSION, "config_hash": config_hash(config)}
    return SceneCorpus(seed, tuple(scenes), meta)
