"""Time the ensemble Biot-Savart kernel: numba against the numpy fallback.

    python3 benchmarks/bench_biot_savart.py --spins 1000000 --repeat 3
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hybridsim import _kernels
from hybridsim._accel import HAVE_NUMBA
from hybridsim.magnetostatics import NV_AXES, REGULARIZATION, EnsembleSpec, Geometry, place_spins, segment_currents
from hybridsim.transmon import DoubleJJParams


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spins", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    geom = Geometry.double_jj()
    p = DoubleJJParams(E_J1=2 * np.pi * 4.6e9, E_J2=2 * np.pi * 4.6e9, E_C=2 * np.pi * 92e6)
    L_N = 4e-6
    spec = EnsembleSpec(L_N=L_N, density=args.spins / L_N**3)
    pos, axes = place_spins(spec, geom)
    starts, ends, _, _ = geom.arrays()
    cur = segment_currents(geom, p)

    def run(jit: bool):
        return _kernels.transverse_sq(
            starts, ends, cur, pos, NV_AXES, axes, REGULARIZATION, numba=jit, threads=args.threads
        )

    print(f"spins: {len(pos)}  segments: {len(starts)}  threads: {args.threads}")
    ref, _ = run(False)
    t_np = best_of(lambda: run(False), args.repeat)
    print(f"numpy : {t_np:8.3f} s  ({len(pos) / t_np / 1e6:6.2f} Mspin/s)")
    if not HAVE_NUMBA:
        print("numba : unavailable or disabled")
        return
    run(True)  # compile
    out, _ = run(True)
    t_nb = best_of(lambda: run(True), args.repeat)
    diff = np.abs(out[:, 0] - ref[:, 0]).max() / np.abs(ref[:, 0]).max()
    print(f"numba : {t_nb:8.3f} s  ({len(pos) / t_nb / 1e6:6.2f} Mspin/s)  speedup {t_np / t_nb:5.2f}x")
    print(f"max relative difference |B_perp|^2: {diff:.2e}")


if __name__ == "__main__":
    main()
