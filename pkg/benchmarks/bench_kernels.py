"""Time the compiled and numpy circuit kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--sites 4 8] [--batch 72] [--repeat 20]

Prints a table of milliseconds per call and the maximum difference between
the two backends' outputs.
"""

import argparse
import timeit

import numpy as np

from qclattice.kernels import get_backend
from qclattice.model import MeasurementOperator, param_count


def run(n, batch, repeat, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 2 * np.pi, param_count(n))
    sigma = rng.choice([-1.0, 1.0], size=(batch, n))
    flip, phase, n_y = MeasurementOperator.default(n).pauli.masks()
    py, cy = get_backend("python"), get_backend("cython")
    rows = []
    for name, fn in (("energies", "energies"), ("jacobian", "energies_and_jacobian")):
        times = {}
        outs = {}
        for label, mod in (("python", py), ("cython", cy)):
            f = getattr(mod, fn)
            outs[label] = f(x, sigma, flip, phase, n_y)
            t = timeit.repeat(lambda: f(x, sigma, flip, phase, n_y), number=1, repeat=repeat)
            times[label] = min(t) * 1e3
        a, b = outs["python"], outs["cython"]
        if isinstance(a, tuple):
            diff = max(float(np.max(np.abs(u - v))) for u, v in zip(a, b))
        else:
            diff = float(np.max(np.abs(a - b)))
        rows.append((n, batch, name, times["python"], times["cython"], times["python"] / times["cython"], diff))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sites", type=int, nargs="+", default=[4, 8])
    ap.add_argument("--batch", type=int, default=72)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    print(f"{'N':>3} {'B':>4} {'kernel':>9} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for n in args.sites:
        for row in run(n, args.batch, args.repeat):
            print("{:>3} {:>4} {:>9} {:>10.3f} {:>10.3f} {:>8.1f} {:>11.2e}".format(*row))


if __name__ == "__main__":
    main()
