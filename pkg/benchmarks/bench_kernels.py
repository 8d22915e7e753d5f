"""Time the numba kernels against their pure-numpy twins.

Run from a checkout with the package installed:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --samples 50000 --dims 2,4,8

The script always times the numpy fallbacks; the numba twins are timed too
when numba is importable and CTL_NO_NUMBA is unset. It also reports the max
elementwise deviation between the two paths, which should sit at BLAS
reduction-order level (~1e-12).
"""

import argparse
import time

import numpy as np

from ctlab import _accel


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _row(name, numpy_s, numba_s, dev):
    if numba_s is None:
        print(f"{name:<38} numpy {numpy_s * 1e3:9.2f} ms")
        return
    speedup = numpy_s / numba_s if numba_s > 0 else float("inf")
    print(
        f"{name:<38} numpy {numpy_s * 1e3:9.2f} ms   numba {numba_s * 1e3:9.2f} ms"
        f"   x{speedup:5.1f}   dev {dev:.1e}"
    )


def bench_haar(d, samples, repeats, rng, use_numba):
    g = (rng.standard_normal((samples, d, d)) + 1j * rng.standard_normal((samples, d, d))) / np.sqrt(2.0)
    np_s = _best_of(lambda: _accel._haar_batch_np(g), repeats)
    nb_s = dev = None
    if use_numba:
        _accel._haar_batch_nb(g[:2])  # warm the JIT outside the timed region
        nb_s = _best_of(lambda: _accel._haar_batch_nb(g), repeats)
        dev = float(np.abs(_accel._haar_batch_nb(g) - _accel._haar_batch_np(g)).max())
    _row(f"haar_batch        d={d} n={samples}", np_s, nb_s, dev)


def bench_fourth(d, samples, repeats, rng, use_numba):
    g = (rng.standard_normal((samples, d, d)) + 1j * rng.standard_normal((samples, d, d))) / np.sqrt(2.0)
    us = _accel._haar_batch_np(g)
    mats = [
        np.ascontiguousarray(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        for _ in range(4)
    ]
    np_s = _best_of(lambda: _accel._fourth_moment_values_np(us, *mats), repeats)
    nb_s = dev = None
    if use_numba:
        _accel._fourth_moment_values_nb(us[:2], *mats)
        nb_s = _best_of(lambda: _accel._fourth_moment_values_nb(us, *mats), repeats)
        dev = float(
            np.abs(
                _accel._fourth_moment_values_nb(us, *mats)
                - _accel._fourth_moment_values_np(us, *mats)
            ).max()
        )
    _row(f"fourth_moment     d={d} n={samples}", np_s, nb_s, dev)


def bench_quad(dim, samples, repeats, rng, use_numba):
    vecs = np.ascontiguousarray(
        rng.standard_normal((samples, dim)) + 1j * rng.standard_normal((samples, dim))
    )
    t = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    t = np.ascontiguousarray(t + t.conj().T)
    np_s = _best_of(lambda: _accel._quad_form_batch_np(vecs, t), repeats)
    nb_s = dev = None
    if use_numba:
        _accel._quad_form_batch_nb(vecs[:2], t)
        nb_s = _best_of(lambda: _accel._quad_form_batch_nb(vecs, t), repeats)
        dev = float(
            np.abs(_accel._quad_form_batch_nb(vecs, t) - _accel._quad_form_batch_np(vecs, t)).max()
        )
    _row(f"quad_form_batch dim={dim} n={samples}", np_s, nb_s, dev)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=20_000, help="batch size per call")
    parser.add_argument("--dims", default="2,4,8", help="comma-separated unitary dimensions")
    parser.add_argument("--vec-dims", default="16,64", help="comma-separated quad-form dimensions")
    parser.add_argument("--repeats", type=int, default=5, help="timed repeats, best kept")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    use_numba = _accel.active_path() == "numba"
    print(f"active path: {_accel.active_path()} (set CTL_NO_NUMBA=1 to force numpy)")
    if not use_numba:
        print("numba unavailable or disabled; timing the numpy path only\n")

    rng = np.random.default_rng(args.seed)
    for d in (int(x) for x in args.dims.split(",")):
        bench_haar(d, args.samples, args.repeats, rng, use_numba)
    print()
    for d in (int(x) for x in args.dims.split(",")):
        bench_fourth(d, args.samples, args.repeats, rng, use_numba)
    print()
    for dim in (int(x) for x in args.vec_dims.split(",")):
        bench_quad(dim, args.samples, args.repeats, rng, use_numba)


if __name__ == "__main__":
    main()
