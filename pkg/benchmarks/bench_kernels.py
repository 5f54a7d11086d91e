"""Compare the compiled and pure-numpy exponential-integral kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--nodes 256]
"""

import argparse
import timeit

import numpy as np

from conformal_dbar import kernels
from conformal_dbar.faddeev import disk_nodes, h1_at_zero


def cases(n_points, nodes):
    rng = np.random.default_rng(0)
    z = 10 ** rng.uniform(-2, 1.5, n_points) * np.exp(1j * rng.uniform(-3.1, 3.1, n_points))
    zn = disk_nodes(nodes)
    h0 = h1_at_zero()
    return {
        f"e1_array ({n_points} pts)": lambda m: m.e1_array(z),
        f"h1_array ({n_points} pts)": lambda m: m.h1_array(z),
        f"hhat_matrix |k|=3 ({nodes} nodes)": lambda m: m.hhat_matrix(3.0, zn, h0),
        f"hhat_matrix |k|=12 ({nodes} nodes)": lambda m: m.hhat_matrix(12.0, zn, h0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--nodes", type=int, default=256)
    args = ap.parse_args()

    backends = {"python": kernels.get_backend("python")}
    try:
        backends["cython"] = kernels.get_backend("cython")
    except ImportError:
        print("compiled backend not built; timing the numpy fallback only")
    print(f"import-time backend: {kernels.BACKEND}")
    print(f"{'kernel':<34}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.points, args.nodes).items():
        best = {}
        for b, mod in backends.items():
            fn(mod)  # warm up
            best[b] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        row = f"{name:<34}" + "".join(f"{best[b] * 1e3:>10.2f}ms" for b in backends)
        if "cython" in best:
            row += f"{best['python'] / best['cython']:>9.1f}x"
        print(row)
        if "cython" in backends:
            a, c = fn(backends["python"]), fn(backends["cython"])
            dev = np.max(np.abs(a - c)) / max(np.max(np.abs(a)), 1e-300)
            assert dev < 1e-12, f"{name}: backends disagree ({dev:.1e})"


if __name__ == "__main__":
    main()
