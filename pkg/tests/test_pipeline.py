import json

import pytest

from ibcd.classifier import WorstCaseClassifier
from ibcd.errors import AssumptionViolation, GenerationError, InvalidConfig, InvalidInput, UndefinedRate
from ibcd.geometry import generate_mask_set
from ibcd.pipeline import (CSV_COLUMNS, CertBackend, ExperimentConfig, PipelineError,
                           certified_accuracy, certify_two_mask, clean_accuracy,
                           double_mask_predict, fluctuation_rate, run_ibcd)
from ibcd.scenes import SceneCorpus, synth_scenes

from conftest import make_scene

SMALL = dict(sizes=(3, 6, 9), scenes_per_size=4, clean_scenes=3, seed=7)


def test_config_roundtrip_and_validation():
    cfg = ExperimentConfig(**SMALL)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(InvalidConfig):
        ExperimentConfig(sizes=(17,))
    with pytest.raises(InvalidConfig):
        ExperimentConfig(backend="nope")
    with pytest.raises(InvalidConfig):
        ExperimentConfig(stride=20)
    with pytest.raises(ValueError):
        ExperimentConfig(policy="nope")


def test_fluctuation_rate():
    assert fluctuation_rate(10.0, 4.73) == pytest.approx(0.527)
    assert fluctuation_rate(0.5, 0.5) == 0.0
    with pytest.raises(UndefinedRate):
        fluctuation_rate(0.0, 0.3)


def test_two_mask_certification():
    clf = WorstCaseClassifier()
    ms = generate_mask_set(16, 16, 8, 4)
    assert certify_two_mask(clf, make_scene(W=16, patch=(1, 1, 3)), ms, 5)
    occl = make_scene(W=16, obj=(4, 4, 9, 9), tau=0.6)
    assert not certify_two_mask(clf, occl, ms, 5)
    assert certify_two_mask(clf, occl, ms, 0)
    with pytest.raises(InvalidConfig):
        certify_two_mask(clf, occl, ms, 6)


def test_double_mask_predict_recovers_label():
    clf = WorstCaseClassifier()
    ms = generate_mask_set(16, 16, 8, 4)
    sc = make_scene(W=16, patch=(5, 5, 4))
    assert clf.classify(sc) == 5
    assert double_mask_predict(clf, sc, ms) == 3
    assert double_mask_predict(clf, make_scene(W=16), ms) == 3


def test_accuracy_functions():
    clf = WorstCaseClassifier()
    scenes = [make_scene(W=16), make_scene(W=16, obj=(4, 4, 9, 9), tau=0.6)]
    ms = generate_mask_set(16, 16, 8, 4)
    assert clean_accuracy(clf, scenes, None) == 1.0
    assert clean_accuracy(clf, scenes, ms) == 0.5
    assert certified_accuracy(clf, scenes, 5, CertBackend("double_mask", 4)) == 0.5
    with pytest.raises(InvalidInput):
        clean_accuracy(clf, [], None)
    with pytest.raises(InvalidInput):
        certified_accuracy(clf, scenes, -1, CertBackend())


def test_certified_accuracy_non_increasing():
    cfg = ExperimentConfig(width=16, height=16, stride=2, sizes=(2,), scenes_per_size=6,
                           clean_scenes=6, tau=0.3, seed=3)
    scenes = synth_scenes(cfg).scenes
    clf = WorstCaseClassifier()
    for backend in (CertBackend("double_mask", 2), CertBackend("band", 2, 2),
                    CertBackend("block", 2, 2)):
        accs = [certified_accuracy(clf, scenes, v, backend) for v in range(0, 8)]
        assert all(a >= b for a, b in zip(accs, accs[1:])), (backend, accs)


def test_synth_scenes_deterministic_and_bounded():
    cfg = ExperimentConfig(sizes=(16,), scenes_per_size=50, clean_scenes=2, seed=1)
    a, b = synth_scenes(cfg, 1), synth_scenes(cfg, 1)
    assert a == b and a.metadata == b.metadata
    assert len(a.attacked()) == 50 and len(a.clean()) == 2
    for sc in a.attacked():
        assert 0 <= sc.patch.x1 <= 16 and 0 <= sc.patch.y1 <= 16
    assert synth_scenes(cfg, 2) != a


def test_synth_scenes_feasibility():
    with pytest.raises(GenerationError):
        synth_scenes(ExperimentConfig(tau=0.5, object_max_side=5))
    corpus = synth_scenes(ExperimentConfig(tau=0.5, sizes=(3,), scenes_per_size=20))
    assert all(min(s.object_region.width, s.object_region.height) > 5 for s in corpus.scenes)


def test_report_conservative_and_sliding_neutral():
    cfg = ExperimentConfig(sizes=(3, 6, 9, 12, 15), scenes_per_size=6, clean_scenes=4, seed=5)
    a = run_ibcd(cfg)
    b = run_ibcd(ExperimentConfig(**{**cfg.to_dict(), "sliding_opt": True}))
    for ra, rb in zip(a.rows, b.rows):
        assert ra.estimated_size >= ra.actual_size
        assert all(s >= ra.actual_size for s in ra.per_image_sizes)
        assert ra.per_image_sizes == rb.per_image_sizes
        assert rb.mean_query_count <= ra.mean_query_count
    assert sum(r.mean_query_count for r in b.rows) < sum(r.mean_query_count for r in a.rows)
    assert a.clean.detected_clean == 1.0


def test_report_outputs():
    rep = run_ibcd(ExperimentConfig(**SMALL))
    lines = rep.to_csv().splitlines()
    assert lines[0].split(",") == CSV_COLUMNS and len(lines) == 4
    doc = json.loads(rep.to_json())
    assert "wall_time_s" not in doc["rows"][0]
    assert "wall_time_s" in json.loads(rep.to_json(timing=True))["rows"][0]


def test_clean_only_and_per_image():
    rep = run_ibcd(ExperimentConfig(sizes=(3,), scenes_per_size=0, clean_scenes=3))
    assert rep.rows == [] and rep.clean.n_scenes == 3
    rep = run_ibcd(ExperimentConfig(sizes=(6,), scenes_per_size=4, clean_scenes=0,
                                    per_image=True))
    assert rep.clean.n_scenes == 0 and rep.clean.detected_clean is None
    assert rep.rows[0].certified_acc_black == 1.0


def test_error_carries_scene_id(monkeypatch):
    import ibcd.pipeline as pl

    real = pl.estimate_many

    def flaky(scenes, *args):
        if any(sc.scene_id == 42 for sc in scenes):
            raise AssumptionViolation("boom")
        return real(scenes, *args)

    monkeypatch.setattr(pl, "estimate_many", flaky)
    cfg = ExperimentConfig(sizes=(3,), scenes_per_size=2, clean_scenes=0)
    corpus = SceneCorpus(0, (make_scene(patch=(0, 0, 3), scene_id=1),
                             make_scene(patch=(5, 5, 3), scene_id=42)))
    with pytest.raises(PipelineError) as ei:
        run_ibcd(cfg, corpus=corpus)
    assert ei.value.scene_id == 42
