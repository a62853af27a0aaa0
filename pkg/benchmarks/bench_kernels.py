"""Time the compiled and pure-Python quadrature kernels on the same inputs.

Usage: python3 benchmarks/bench_kernels.py [--points N] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from hybridspec import presets
from hybridspec.quadrature import available_backends, backend, cauchy_transform, qgauss_moments
from hybridspec.spectra import sweep_transmon


def cases(n_points):
    p = presets.ensemble_characterization()
    xi = np.linspace(-20.0, 20.0, n_points)
    eta = p.gamma_s / (2.0 * p.width)
    return {
        "cauchy_transform q=1.96": lambda: cauchy_transform(xi, eta, p.q),
        "cauchy_transform + derivs": lambda: cauchy_transform(xi, eta, p.q, ncomp=3),
        "qgauss_moments": lambda: qgauss_moments(p.q),
        "sweep 21x401": lambda: sweep_transmon(presets.triple_resonance(),
                                               np.linspace(2991.2, 3011.2, 21),
                                               np.linspace(2960.0, 3040.0, 401)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=2001)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    names = available_backends()
    results = {}
    for name in names:
        with backend(name):
            for label, fn in cases(args.points).items():
                fn()
                results[label, name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    print(f"{'case':32s}" + "".join(f"{n:>12s}" for n in names) + "     speed-up")
    for label in cases(args.points):
        row = [results[label, n] for n in names]
        ratio = (results[label, "python"] / results[label, "compiled"]
                 if "compiled" in names else float("nan"))
        print(f"{label:32s}" + "".join(f"{t * 1e3:10.2f}ms" for t in row) + f"{ratio:12.1f}x")


if __name__ == "__main__":
    main()
