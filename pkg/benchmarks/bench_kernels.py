"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--samples N] [--repeat R] [--json out.json]

Both backends are imported directly, so the comparison does not depend on
ONEBIT_PURE_PYTHON. Results are also checked for bit-identical output.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import timeit

import numpy as np

from onebit import _kernels_py, lhv
from onebit.polytope import _digits

try:
    from onebit import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_mc(n: int, repeat: int) -> list[dict]:
    rng = np.random.default_rng(0)
    l1, l2 = lhv.sample_lhv_batch(rng, n)
    a = np.array([0.6, 0.0, 0.8])
    b = np.array([0.0, 0.8, -0.6])
    protos = {
        "max-entangled": lhv.MaxEntangledProtocol(),
        "toner-bacon": lhv.TonerBaconProtocol(),
        "semianalytical": lhv.SemianalyticalProtocol(lhv.load_preset("5pi/32")),
    }
    rows = []
    for name, p in protos.items():
        row = {"kernel": f"mc_table_sums[{name}]", "size": n}
        py = _kernels_py.mc_table_sums(p.kind, a, b, l1, l2, p.params())
        row["python_s"] = _time(lambda: _kernels_py.mc_table_sums(p.kind, a, b, l1, l2, p.params()), repeat)
        if _ckernels is not None:
            cy = _ckernels.mc_table_sums(p.kind, a, b, l1, l2, p.params())
            row["cython_s"] = _time(lambda: _ckernels.mc_table_sums(p.kind, a, b, l1, l2, p.params()), repeat)
            row["identical"] = bool(np.array_equal(np.asarray(py), np.asarray(cy)))
        rows.append(row)
    return rows


def bench_oracle(shape: tuple[int, int, int, int], repeat: int) -> dict:
    nx, ny, na, nb = shape
    D = np.random.default_rng(1).standard_normal(shape)
    digits = _digits(nb, ny)
    row = {"kernel": f"oracle_row_scores{shape}", "size": int(digits.shape[0])}
    py = _kernels_py.oracle_row_scores(D, digits, 1e-12)
    row["python_s"] = _time(lambda: _kernels_py.oracle_row_scores(D, digits, 1e-12), repeat)
    if _ckernels is not None:
        cy = _ckernels.oracle_row_scores(D, digits, 1e-12)
        row["cython_s"] = _time(lambda: _ckernels.oracle_row_scores(D, digits, 1e-12), repeat)
        row["identical"] = all(np.array_equal(np.asarray(u), np.asarray(v)) for u, v in zip(py, cy))
    return row


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the results here")
    args = ap.parse_args(argv)

    results = bench_mc(args.samples, args.repeat)
    for shape in ((3, 3, 3, 3), (4, 2, 4, 4), (3, 3, 4, 4)):
        results.append(bench_oracle(shape, args.repeat))

    print(f"{'kernel':38s} {'size':>9s} {'python [ms]':>11s} {'cython [ms]':>11s} {'speedup':>8s} same")
    for r in results:
        cy = r.get("cython_s")
        speed = f"{r['python_s'] / cy:8.1f}" if cy else f"{'-':>8s}"
        cy_txt = f"{1e3 * cy:11.4f}" if cy else f"{'n/a':>11s}"
        print(f"{r['kernel']:38s} {r['size']:9d} {1e3 * r['python_s']:11.4f} {cy_txt} {speed} {r.get('identical', '-')}")
    if _ckernels is None:
        print("compiled extension not available; only the fallback was timed", file=sys.stderr)
    if args.json:
        meta = {"python": platform.python_version(), "numpy": np.__version__, "machine": platform.machine()}
        with open(args.json, "w") as fh:
            json.dump({"meta": meta, "results": results}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
