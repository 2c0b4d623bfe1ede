"""Time the compiled polar-grid kernels against the numpy versions.

    python benchmarks/bench_kernels.py [n_r n_theta repeats]
"""

import sys
import timeit

import numpy as np

from glvortex import _kernels_py as py
from glvortex.field2d import DiskGrid

try:
    from glvortex import _kernels as cy
except ImportError:
    cy = None


def main(n_r=256, n_theta=256, repeats=20):
    g = DiskGrid(n_r, n_theta)
    rng = np.random.default_rng(0)
    shp = (n_r, n_theta)
    pp = rng.standard_normal(shp) + 1j * rng.standard_normal(shp)
    pm = rng.standard_normal(shp) + 1j * rng.standard_normal(shp)
    a, c, w = g.radial_coupling, g.angular_coupling, g.ring_weights
    sub = -np.ones(n_r - 1)
    diag = 4.0 + rng.uniform(size=(n_theta, n_r))
    rhs = rng.standard_normal((n_theta, n_r)) + 0j

    cases = {
        "stiffness_apply": lambda m: m.stiffness_apply(pp, a, c),
        "energy_gradient": lambda m: m.energy_gradient(pp, pm, a, c, w, 400.0, 0.5),
        "tridiag_solve": lambda m: m.tridiag_solve(sub, diag, rhs),
    }
    print(f"grid {n_r} x {n_theta}, best of {repeats}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'cython [ms]':>13}{'speed-up':>10}")
    for name, fn in cases.items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=repeats)) * 1e3
        if cy is None:
            print(f"{name:<18}{t_py:>12.3f}{'n/a':>13}{'':>10}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=repeats)) * 1e3
        print(f"{name:<18}{t_py:>12.3f}{t_cy:>13.3f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main(*(int(x) for x in sys.argv[1:4]))
