"""Command line harness.

Subcommands: estimate, certify, smooth, ibcd, bench, oracle. Settings come
from defaults, then an optional JSON config file (``--config``), then flags.
``IBCD_WORKERS`` sets the worker-process count.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .classifier import WorstCaseClassifier
from .errors import IBCDError
from .estimator import build_schedule, estimate_many
from .geometry import generate_mask_set, max_coverable_patch
from .oracles import brute_force_estimate, coverage_oracle
from .pipeline import (CertBackend, ExperimentConfig, _mask_set_for, _TallyCache,
                       certified_accuracy, clean_accuracy, run_ibcd, smoothed_clean_accuracy)
from .scenes import synth_scenes
from .smoothing import max_certifiable_patch

CONFIG_FLAGS = {
    # flag dest -> ExperimentConfig field
    "width": "width", "height": "height", "stride": "stride", "interval": "interval",
    "eta_min": "eta_min", "policy": "policy", "tau": "tau", "sizes": "sizes",
    "scenes_per_size": "scenes_per_size", "clean_scenes": "clean_scenes", "seed": "seed",
    "sliding_opt": "sliding_opt", "backend": "backend", "ablation_width": "ablation_width",
    "num_classes": "num_classes", "object_min_side": "object_min_side",
    "object_max_side": "object_max_side", "per_image": "per_image",
}


def parse_int_list(text: str) -> list[int]:
    """``"3,6,9"``, ``"1..7"`` or ``"none"`` (empty list)."""
    text = text.strip()
    if text.lower() in ("", "none"):
        return []
    out = []
    for part in text.split(","):
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _add_config_flags(p):
    g = p.add_argument_group("experiment")
    g.add_argument("--config", help="JSON file with ExperimentConfig fields")
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--stride", type=int)
    g.add_argument("--interval", type=int, help="mask size reduction interval")
    g.add_argument("--eta-min", type=int)
    g.add_argument("--policy", choices=["constant_wrong", "region_hash"])
    g.add_argument("--tau", type=float, help="object visibility threshold")
    g.add_argument("--sizes", type=parse_int_list, help="patch sides, e.g. 3,6,9 or 2..16")
    g.add_argument("--scenes-per-size", type=int)
    g.add_argument("--clean-scenes", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--sliding-opt", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--backend", choices=["double_mask", "band", "block"])
    g.add_argument("--ablation-width", type=int)
    g.add_argument("--num-classes", type=int)
    g.add_argument("--object-min-side", type=int)
    g.add_argument("--object-max-side", type=int)
    g.add_argument("--per-image", action=argparse.BooleanOptionalAction, default=None)
    o = p.add_argument_group("output")
    o.add_argument("--out", help="write output here instead of stdout")
    o.add_argument("--format", choices=["json", "csv"], default="json")
    o.add_argument("--workers", type=int)


def load_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data.update(json.load(fh))
    for dest, name in CONFIG_FLAGS.items():
        val = getattr(args, dest, None)
        if val is not None:
            data[name] = val
    return ExperimentConfig.from_dict(data)


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table(args, rows: list[dict], meta: dict) -> str:
    if args.format == "csv":
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        return buf.getvalue()
    return json.dumps({"schema_version": 1, **meta, "rows": rows}, indent=2, sort_keys=True) + "\n"


def _r(x):
    return round(float(x), 6)


# ------------------------------------------------------------------ commands

def cmd_estimate(args, cfg):
    corpus = synth_scenes(cfg)
    scenes = [sc.with_tau(0.0) for sc in corpus.scenes]
    results = estimate_many(scenes, cfg.schedule(), cfg.sliding_opt, args.workers)
    rows = [{"scene_id": sc.scene_id, "actual_size": sc.patch_side,
             "estimated_size": r.estimated_size, "iterations": r.iterations,
             "query_count": r.query_count, "search_count": r.search_count}
            for sc, r in zip(corpus.scenes, results)]
    return _table(args, rows, {"command": "estimate", "config": cfg.to_dict(),
                               "corpus": corpus.metadata})


def cmd_certify(args, cfg):
    corpus = synth_scenes(cfg)
    clf = WorstCaseClassifier()
    backend = CertBackend(cfg.backend, cfg.stride, cfg.ablation_width)
    tallies = _TallyCache()
    scenes = list(corpus.scenes)
    rows = []
    for v in parse_int_list(args.size):
        cert = certified_accuracy(clf, scenes, v, backend, tallies)
        if backend.kind == "double_mask":
            ms = None if v == 0 else _mask_set_for(cfg.width, cfg.height, v, cfg.stride)
            clean = clean_accuracy(clf, scenes, ms)
        else:
            clean = smoothed_clean_accuracy(clf, scenes, backend, tallies)
        rows.append({"size": v, "clean_acc": _r(clean), "certified_acc": _r(cert),
                     "n_scenes": len(scenes)})
    return _table(args, rows, {"command": "certify", "config": cfg.to_dict()})


def cmd_smooth(args, cfg):
    kind = args.kind or (cfg.backend if cfg.backend != "double_mask" else "band")
    cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "backend": kind})
    corpus = synth_scenes(cfg)
    clf = WorstCaseClassifier()
    backend = CertBackend(cfg.backend, cfg.stride, cfg.ablation_width)
    tallies = _TallyCache()
    scenes = list(corpus.scenes)
    bounds = [max_certifiable_patch(tallies.get(clf, sc, cfg.backend, cfg.ablation_width),
                                    cfg.backend, cfg.ablation_width, cfg.width, cfg.height)
              for sc in scenes]
    clean = smoothed_clean_accuracy(clf, scenes, backend, tallies)
    rows = [{"size": v, "clean_acc": _r(clean),
             "certified_acc": _r(certified_accuracy(clf, scenes, v, backend, tallies)),
             "n_scenes": len(scenes)}
            for v in parse_int_list(args.size)]
    return _table(args, rows, {"command": "smooth", "config": cfg.to_dict(),
                               "max_certifiable_patch": bounds})


def cmd_ibcd(args, cfg):
    report = run_ibcd(cfg, workers=args.workers)
    if args.format == "csv":
        return report.to_csv()
    return report.to_json(timing=args.timing)


def cmd_bench(args, cfg):
    corpus = synth_scenes(cfg)
    scenes = [sc.with_tau(0.0) for sc in corpus.attacked()]
    modes = {"on": [True], "off": [False], "both": [False, True]}[args.sliding]
    rows = []
    for interval in parse_int_list(args.intervals):
        schedule = build_schedule(cfg.width, cfg.stride, interval, cfg.eta_min, cfg.height)
        for opt in modes:
            res = estimate_many(scenes, schedule, opt, args.workers)
            rows.append({
                "interval": interval, "sliding_opt": opt, "n_scenes": len(res),
                "mean_search_count": _r(np.mean([r.search_count for r in res])),
                "mean_query_count": _r(np.mean([r.query_count for r in res])),
                "mean_estimated_size": _r(np.mean([r.estimated_size for r in res])),
            })
    return _table(args, rows, {"command": "bench", "config": cfg.to_dict()})


def cmd_oracle(args, cfg):
    corpus = synth_scenes(cfg)
    schedule = cfg.schedule()
    attacked = [sc.with_tau(0.0) for sc in corpus.attacked()]
    rows = []
    for opt in (False, True):
        res = estimate_many(attacked, schedule, opt, args.workers)
        bad = sum(r.estimated_size != brute_force_estimate(sc, schedule)
                  for sc, r in zip(attacked, res))
        rows.append({"check": f"estimator_vs_brute_force[sliding_opt={opt}]",
                     "cases": len(res), "violations": bad})
    bad = cases = 0
    for eta in schedule.sizes:
        v = max_coverable_patch(eta, cfg.stride)
        if v < 1:
            continue
        cases += 1
        rep = coverage_oracle(generate_mask_set(cfg.width, cfg.height, eta, cfg.stride), v,
                              cfg.width, cfg.height)
        bad += not rep.covered
    rows.append({"check": "mask_grid_coverage", "cases": cases, "violations": bad})
    args._violations = sum(r["violations"] for r in rows)
    return _table(args, rows, {"command": "oracle", "config": cfg.to_dict()})


COMMANDS = {"estimate": cmd_estimate, "certify": cmd_certify, "smooth": cmd_smooth,
            "ibcd": cmd_ibcd, "bench": cmd_bench, "oracle": cmd_oracle}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ibcd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "estimate": "stage 1 only: per-scene size estimates and query counts",
        "certify": "stage 2 with given patch size(s)",
        "smooth": "derandomized smoothing certificates",
        "ibcd": "full two-stage report",
        "bench": "search cost across reduction intervals and sliding optimisation",
        "oracle": "cross-check estimator and mask grids against brute force",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_config_flags(p)
        if name in ("certify", "smooth"):
            p.add_argument("--size", required=True, help="patch side(s) to certify, e.g. 5 or 2..8")
        if name == "smooth":
            p.add_argument("--kind", choices=["band", "block"],
                           help="ablation shape (default: --backend if smoothing, else band)")
        if name == "bench":
            p.add_argument("--intervals", default="1..7")
            p.add_argument("--sliding", choices=["on", "off", "both"], default="both")
        if name == "ibcd":
            p.add_argument("--timing", action="store_true",
                           help="include wall time per row (JSON only; not reproducible)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        text = COMMANDS[args.command](args, cfg)
    except (IBCDError, ValueError, OSError) as exc:
        print(f"ibcd {args.command}: error: {exc}", file=sys.stderr)
        return 2
    _emit(args, text)
    return 1 if getattr(args, "_violations", 0) else 0


if __name__ == "__main__":
    sys.exit(main())
