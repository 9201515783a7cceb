"""Compare the compiled and numpy statevector kernels.

    python benchmarks/bench_kernels.py [--qubits 20] [--repeat 5]

Times one U3 on every qubit, one CX on every neighbouring pair, and a full
18-qubit reduced Table S1 circuit, then checks that both backends produce the
same amplitudes.
"""
import argparse
import time

import numpy as np

from turbogen import _kernels_py
from turbogen.circuit import U3, build_circuit, u3_matrix
from turbogen.config import load_config

try:
    from turbogen import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def sweep(mod, n_q, state, u):
    def go():
        for b in range(n_q):
            mod.apply_1q(state, b, u)
        for b in range(n_q - 1):
            mod.apply_cx(state, b, b + 1)
    return go


def circuit(mod, gates, n_q):
    def go():
        state = np.zeros(1 << n_q, np.complex128)
        state[0] = 1.0
        for g in gates:
            if isinstance(g, U3):
                mod.apply_1q(state, g.qubit - 1, u3_matrix(g.theta, g.phi, g.gamma))
            else:
                mod.apply_cx(state, g.control - 1, g.target - 1)
        return state
    return go


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qubits", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = [("python", _kernels_py)] + ([("cython", _ckernels)] if _ckernels else [])
    if _ckernels is None:
        print("compiled extension not built; timing the numpy fallback only")

    rng = np.random.default_rng(0)
    u = u3_matrix(*rng.uniform(-np.pi, np.pi, 3))
    base = rng.standard_normal(1 << args.qubits) + 1j * rng.standard_normal(1 << args.qubits)
    base /= np.linalg.norm(base)
    cfg = load_config("reduced_18")
    gates = build_circuit(cfg.circuit_spec("up"))

    print(f"{'case':<28}{'backend':<10}{'seconds':>10}")
    results = {}
    for name, mod in backends:
        t = best_of(sweep(mod, args.qubits, base.copy(), u), args.repeat)
        print(f"{f'gate sweep, {args.qubits} qubits':<28}{name:<10}{t:>10.4f}")
        run = circuit(mod, gates, cfg.grid.n_q)
        t = best_of(run, args.repeat)
        results[name] = (t, run())
        print(f"{f'circuit, {len(gates)} gates':<28}{name:<10}{t:>10.4f}")
    if len(results) == 2:
        diff = np.max(np.abs(results["python"][1] - results["cython"][1]))
        print(f"speedup on circuit {results['python'][0] / results['cython'][0]:.2f}x, max amplitude difference {diff:.1e}")


if __name__ == "__main__":
    main()
