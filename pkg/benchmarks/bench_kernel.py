"""Compiled vs pure-Python training kernel on Mining.

    python3 benchmarks/bench_kernel.py [--frames N] [--repeats R]

Prints frames per second for each (tracker, backend), the speedup, and
whether both backends produced bit-identical weights.
"""
import argparse
import time

from rmu.belief import persistent_props_for
from rmu.envs import mining_env
from rmu.labelling import mining_noisy_gold
from rmu.rl import kernel
from rmu.rl.qlearn import checkpoint_frames

TRACKERS = ("perfect_rm", "thresholding", "independent", "persistent", "exact_filter")


def run(arrays, tracker, backend, frames):
    t0 = time.perf_counter()
    w, _ = kernel.train(arrays, tracker, 0.01, 0.2, frames, 10, 0, 1,
                        checkpoint_frames(frames, 2), backend)
    return time.perf_counter() - t0, w


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=50_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    if kernel.BACKEND != "compiled":
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    model = mining_env()
    lab = mining_noisy_gold("uniform", 1.0)
    arrays = kernel.pack_model(model, lab, persistent_props_for(model))
    print(f"{'tracker':<14}{'compiled f/s':>14}{'python f/s':>12}{'speedup':>9}  identical")
    for tr in TRACKERS:
        best, weights = {}, {}
        for backend in ("compiled", "python"):
            times = []
            for _ in range(args.repeats):
                dt, weights[backend] = run(arrays, tr, backend, args.frames)
                times.append(dt)
            best[backend] = min(times)
        same = weights["compiled"].tobytes() == weights["python"].tobytes()
        fc, fp = args.frames / best["compiled"], args.frames / best["python"]
        print(f"{tr:<14}{fc:>14,.0f}{fp:>12,.0f}{fc / fp:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
