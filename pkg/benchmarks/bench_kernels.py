"""Compare the compiled and numpy kernels on the estimator's hot loop.

    python benchmarks/bench_kernels.py --repeat 2000
"""
import argparse
import os
import subprocess
import sys
import time
import timeit

from ibcd.geometry import generate_mask_set
from ibcd.kernels import kernel_modules, pixel_key_table


def bench_pair_sweep(mod, width, eta, stride, repeat):
    ms = generate_mask_set(width, width, eta, stride)
    table = pixel_key_table(width, width)
    base = tuple(ms.masks[len(ms) // 2])
    out = {}
    for name, pol in (("constant_wrong", 0), ("region_hash", 1)):
        k = mod.WorstCaseKernel(width, width, (10, 10, 16, 16), (0, 0, width - 1, width - 1),
                                0.5, pol, 3, 5, 1000, table)
        t = timeit.timeit(lambda: k.label_pairs(base, ms.array), number=repeat) / repeat
        out[name] = (len(ms), t)
    return out


def bench_estimator(backend, scenes):
    # backend selection happens at import, so each one runs in a fresh interpreter
    env = dict(os.environ)
    env.pop("IBCD_PURE_PYTHON", None)
    if backend == "python":
        env["IBCD_PURE_PYTHON"] = "1"
    code = (
        "import time\n"
        "from ibcd.pipeline import ExperimentConfig\n"
        "from ibcd.scenes import synth_scenes\n"
        "from ibcd.estimator import estimate_patch_size\n"
        "from ibcd.classifier import WorstCaseClassifier\n"
        f"cfg = ExperimentConfig(scenes_per_size={scenes}, clean_scenes=0)\n"
        "sch = cfg.schedule()\n"
        "sc = [s.with_tau(0.0) for s in synth_scenes(cfg).scenes]\n"
        "t = time.perf_counter()\n"
        "for s in sc: estimate_patch_size(WorstCaseClassifier(), s, sch)\n"
        "print(time.perf_counter() - t, len(sc))\n"
    )
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    secs, n = res.stdout.split()
    return float(secs), int(n)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--width", type=int, default=32)
    ap.add_argument("--eta", type=int, default=16)
    ap.add_argument("--stride", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=1000)
    ap.add_argument("--scenes", type=int, default=10, help="scenes per patch size")
    args = ap.parse_args()

    mods = kernel_modules()
    print(f"pair sweep, {args.width}x{args.width}, eta={args.eta}, stride={args.stride}")
    timings = {}
    for name, mod in mods.items():
        for pol, (n, t) in bench_pair_sweep(mod, args.width, args.eta, args.stride,
                                            args.repeat).items():
            timings[name, pol] = t
            print(f"  {name:7s} {pol:15s} {n:5d} candidates  {t * 1e6:9.1f} us")
    if "cython" in mods:
        for pol in ("constant_wrong", "region_hash"):
            print(f"  speedup {pol}: {timings['python', pol] / timings['cython', pol]:.1f}x")
    else:
        print("  compiled extension not built; only the numpy kernel was timed")

    print("full estimator over a seeded corpus")
    for name in mods:
        secs, n = bench_estimator(name, args.scenes)
        print(f"  {name:7s} {n} scenes  {secs:.3f} s  ({secs / n * 1e3:.2f} ms/scene)")


if __name__ == "__main__":
    main()
