"""Compare the compiled and numpy kernels on random states.

    python3 benchmarks/bench_kernels.py [--qubits 4 8 12] [--repeat 200]
"""

import argparse
import timeit

import numpy as np

from iondmet import _pykernels

try:
    from iondmet import _ckernels
except ImportError:
    _ckernels = None


def _cases(n, rng):
    amps = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    amps /= np.linalg.norm(amps)
    k = 32
    x = rng.integers(0, 2 ** n, k, dtype=np.int64)
    z = rng.integers(0, 2 ** n, k, dtype=np.int64)
    ny = np.array([bin(a & b).count("1") for a, b in zip(x, z)], dtype=np.int64)
    c = rng.normal(size=k)
    u1 = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))[0]
    u2 = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
    return {
        "pauli_expectation": lambda m: m.pauli_expectation(amps, x, z, ny, c),
        "apply_1q": lambda m: m.apply_1q(amps, n, n // 2, u1),
        "apply_2q": lambda m: m.apply_2q(amps, n, 0, n - 1, u2),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--qubits", type=int, nargs="+", default=[2, 6, 10, 14])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(1)
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':<18}{'n':>4}" + "".join(f"{name + ' us':>14}" for name, _ in backends) + f"{'speedup':>10}")
    for n in args.qubits:
        for name, fn in _cases(n, rng).items():
            ref = fn(_pykernels)
            times = []
            for _, mod in backends:
                assert np.allclose(fn(mod), ref, atol=1e-12), f"{name} backends disagree"
                t = min(timeit.repeat(lambda: fn(mod), number=args.repeat, repeat=3)) / args.repeat
                times.append(t * 1e6)
            speed = f"{times[0] / times[1]:>9.1f}x" if len(times) == 2 else ""
            print(f"{name:<18}{n:>4}" + "".join(f"{t:>14.2f}" for t in times) + speed)


if __name__ == "__main__":
    main()
