import os

import pytest
from hypothesis import HealthCheck, settings

from ibcd.classifier import Scene
from ibcd.geometry import Rect

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", parent=settings.get_profile("default"), max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_scene(W=32, H=None, patch=None, obj=None, true=3, distractor=5, tau=0.0,
               policy="constant_wrong", num_classes=10, scene_id=0):
    H = W if H is None else H
    obj = Rect(0, 0, W - 1, H - 1) if obj is None else Rect(*obj)
    patch = None if patch is None else Rect.square(*patch)
    return Scene(W, H, obj, true, distractor, patch=patch, tau=tau, policy=policy,
                 num_classes=num_classes, scene_id=scene_id)


@pytest.fixture
def scene_factory():
    return make_scene


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
