"""Compare the numba and numpy backends on three workloads.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each workload is run once to warm up (JIT compilation) and then timed; the
outputs of both backends are checked for equality.
"""
import argparse
import time

import numpy as np

from rtsim import kernels
from rtsim.config import SimConfig
from rtsim.ledger import EnergyLedger
from rtsim.shift_mac import ShiftMacConfig, shift_mac_many
from rtsim.system import lenet5, run_inference
from rtsim.system.model import random_input


def booth_exhaustive():
    a, w = np.meshgrid(np.arange(-128, 128), np.arange(-128, 128), indexing="ij")
    return kernels.booth(a.ravel(), w.ravel(), 8)[0]


def shift_mac_cases(n=100_000, k=4):
    rng = np.random.default_rng(0)
    a = rng.integers(-128, 128, (n, k))
    d = rng.integers(-7, 8, (n, k))
    neg = (rng.random((n, k)) < 0.5).astype(np.int8)
    return shift_mac_many(a, d, ShiftMacConfig(8, 8), neg=neg)


_LENET = lenet5(seed=0)
_X = random_input(_LENET, 0)


def lenet_inference():
    cfg = SimConfig().with_mode("write_shift")
    y, _ = run_inference(_LENET, _X, cfg, EnergyLedger.from_config(cfg))
    return y


WORKLOADS = {"booth 8-bit exhaustive (65536 pairs)": booth_exhaustive,
             "shift-MAC 1e5 cases, k=4": shift_mac_cases,
             "LeNet-5 inference": lenet_inference}


def timed(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    print(f"{'workload':<40}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in WORKLOADS.items():
        times, outs = {}, {}
        for b in backends:
            with kernels.use_backend(b):
                times[b], outs[b] = timed(fn, args.repeat)
        ref = outs[backends[0]]
        assert all(np.array_equal(ref, o) for o in outs.values()), f"{name}: backends disagree"
        sp = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{name:<40}" + "".join(f"{times[b]:>11.3f}s" for b in backends) + f"{sp:>9.1f}x")


if __name__ == "__main__":
    main()
