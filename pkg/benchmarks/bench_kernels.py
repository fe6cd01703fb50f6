"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` wall time per kernel and backend, and the
speedup of the compiled backend where it is available.
"""
import argparse
import timeit

import numpy as np

from plenmcl import _kernels


def workloads(rng):
    """Inputs sized like one 128x128 stack with 48 labels."""
    h = w = 128
    center = rng.random((h, w, 9))
    views = rng.random((8, h, w, 9))
    offsets = np.array([[-1, -1], [-1, 0], [-1, 1], [0, -1], [0, 1], [1, -1], [1, 0], [1, 1]],
                       dtype=np.float64)
    gammas = np.abs(offsets[:, 1]) / np.abs(offsets).sum(axis=1)
    disp = np.linspace(0.2, 0.8, 48)

    theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    ring = np.c_[0.05 * np.cos(theta), 0.05 * np.sin(theta), np.zeros(64)]
    verts = np.vstack([ring + [0, 0, 0.55], ring + [0, 0.04, 0.6], [[0, 0.02, 0.5]]])
    tris = np.array([[i, (i + 1) % 64, 64 + i] for i in range(64)]
                    + [[(i + 1) % 64, 64 + (i + 1) % 64, 64 + i] for i in range(64)]
                    + [[128, i, (i + 1) % 64] for i in range(64)])

    values = rng.random((h, w, 48))
    labels = np.linspace(0.35, 1.0, 48)
    coverage = rng.random((h, w)) > 0.1
    depth = rng.uniform(0.3, 1.1, (h, w))

    return {
        "bilinear_shift": lambda k: k.bilinear_shift(center, 0.37, -1.2),
        "label_costs": lambda k: k.label_costs(center, views, offsets, gammas, disp, 0.5, 0.3, 0.5),
        "rasterize": lambda k: k.rasterize(verts, tris, 256.0, 256.0, 63.5, 63.5, h, w),
        "truncate_profiles": lambda k: k.truncate_profiles(values.reshape(-1, 48), 2, 2),
        "score_depth": lambda k: k.score_depth(values, labels, coverage, depth),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = {name: _kernels.load_backend(name) for name in _kernels.available_backends()}
    if "cython" not in backends:
        print("compiled kernels not built; timing the numpy fallback only")
    jobs = workloads(np.random.default_rng(0))

    print(f"{'kernel':<18}" + "".join(f"{n:>12}" for n in backends) + f"{'speedup':>10}")
    for name, job in jobs.items():
        times = {}
        for bname, mod in backends.items():
            job(mod)  # warm-up
            times[bname] = min(timeit.repeat(lambda: job(mod), number=1, repeat=args.repeat))
        row = f"{name:<18}" + "".join(f"{1e3 * t:>10.2f}ms" for t in times.values())
        if len(times) == 2:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
