"""Conformance checks run by ``turbogen verify``.

Each check compares two independent computations on small sizes and reports
the worst discrepancy. ``mutation`` deliberately corrupts one leg so the
report can be shown to catch it.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from . import lattice
from .circuit import CX, U3, GateList, u3_matrix
from .errors import ConfigError
from .lattice import GridSpec
from .madelung import (
    KernelKind,
    build_measurement_operator,
    convolve_observable_direct,
    expectation,
    observable_spectrum,
)
from .simulator import SpinorField, run

__all__ = ["CheckResult", "MAX_VERIFY_QUBITS", "MUTATIONS", "dense_unitary", "random_gate_list", "run_checks"]

MAX_VERIFY_QUBITS = 12
MUTATIONS = ("momentum-sign", "cx-swap")


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: max error {self.max_error:.3e} (tol {self.tolerance:.0e}) {self.detail}".rstrip()


@dataclass
class VerifyReport:
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def text(self) -> str:
        lines = [r.line() for r in self.results]
        lines.append(f"{'PASS' if self.passed else 'FAIL'}: {sum(r.passed for r in self.results)}/{len(self.results)} checks")
        return "\n".join(lines) + "\n"


def dense_unitary(gates: GateList) -> np.ndarray:
    """Full ``2**n_q`` matrix of a gate list, built with Kronecker products."""
    n = gates.n_q
    dim = 1 << n
    U = np.eye(dim, dtype=np.complex128)
    for g in gates:
        if isinstance(g, U3):
            b = g.qubit - 1
            G = np.kron(np.kron(np.eye(1 << (n - 1 - b)), u3_matrix(g.theta, g.phi, g.gamma)), np.eye(1 << b))
        else:
            idx = np.arange(dim)
            flipped = np.where((idx >> (g.control - 1)) & 1, idx ^ (1 << (g.target - 1)), idx)
            G = np.zeros((dim, dim))
            G[flipped, idx] = 1.0
        U = G @ U
    return U


def random_gate_list(n_q: int, n_gates: int, rng: np.random.Generator) -> GateList:
    gates = []
    for _ in range(n_gates):
        if n_q > 1 and rng.random() < 0.4:
            a, b = rng.choice(n_q, size=2, replace=False) + 1
            gates.append(CX(int(a), int(b)))
        else:
            gates.append(U3(int(rng.integers(1, n_q + 1)), *map(float, rng.uniform(-np.pi, np.pi, 3))))
    return GateList(n_q, gates)


def random_spinor(grid: GridSpec, rng: np.random.Generator, band_limited: bool = True) -> SpinorField:
    """Random normalized spinor; ``band_limited`` keeps each direction's
    support inside ``[-N/4, N/4 - 1]`` (just ``k = 0`` for one-qubit directions)
    so circular and truncated products agree."""
    comps = []
    for _ in range(2):
        c = rng.standard_normal(grid.extent) + 1j * rng.standard_normal(grid.extent)
        if band_limited:
            for a, n in enumerate(grid.n_alpha):
                k = grid.wavenumbers(a)
                q = (1 << n) // 4
                keep = (k >= -q) & (k <= max(q - 1, 0))
                shape = [1] * grid.d
                shape[a] = -1
                c = c * keep.reshape(shape)
        comps.append(c)
    norm = np.sqrt(sum(np.sum(np.abs(c) ** 2) for c in comps))
    return SpinorField(comps[0] / norm, comps[1] / norm, grid)


def check_lattice(n_max: int = 8) -> CheckResult:
    t0 = time.perf_counter()
    bad = 0
    for n in range(1, n_max + 1):
        size, half = 1 << n, 1 << (n - 1)
        for j in range(size):
            k = lattice.index_to_wavenumber(j, n)
            bad += lattice.wavenumber_to_index(k, n) != j
            bad += not -half <= k <= half - 1
        for k in range(-half, half):
            ks = lattice.summation_set_K(k, n)
            expected = [kp for kp in range(-half, half) if -half <= k + kp <= half - 1]
            bad += ks != expected
            js = lattice.summation_set_J(lattice.wavenumber_to_index(k, n), n)
            bad += sorted(lattice.wavenumber_to_index(kp, n) for kp in expected) != js
    grid = GridSpec((2, 3, 1))
    for flat in range(grid.size):
        bad += grid.flat(grid.unflat(flat)) != flat
    for j in itertools.product(*(range(1 << n) for n in grid.n_alpha)):
        for jp in itertools.product(*(range(1 << n) for n in grid.n_alpha)):
            ksum = [lattice.index_to_wavenumber(a, n) + lattice.index_to_wavenumber(b, n) for a, b, n in zip(j, jp, grid.n_alpha)]
            inband = all(-(1 << (n - 1)) <= s <= (1 << (n - 1)) - 1 for s, n in zip(ksum, grid.n_alpha))
            if inband:
                m = lattice.flat_index_m(j, jp, grid)
                back = [lattice.index_to_wavenumber(x, n) for x, n in zip(grid.unflat(m), grid.n_alpha)]
                bad += back != ksum
    return CheckResult("lattice.index_maps", bad == 0, float(bad), 0.0, f"exhaustive up to {n_max} qubits", time.perf_counter() - t0)


def check_simulator(n_max: int = 6, seed: int = 0, mutation: str | None = None) -> CheckResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(1, n_max + 1):
        for _ in range(3):
            gl = random_gate_list(n, 6 * n, rng)
            state = run(gl).amplitudes
            oracle_gates = gl
            if mutation == "cx-swap":
                oracle_gates = GateList(n, [CX(g.target, g.control) if isinstance(g, CX) else g for g in gl])
            ref = dense_unitary(oracle_gates)[:, 0]
            worst = max(worst, float(np.max(np.abs(state - ref))))
    tol = 1e-12
    return CheckResult("simulator.dense_oracle", worst <= tol, worst, tol, f"n_q = 1..{n_max}", time.perf_counter() - t0)


def check_oracle_triangle(grids=None, seed: int = 0, mutation: str | None = None) -> CheckResult:
    """Direct convolution vs measurement operator vs FFT path, every in-band k."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    if grids is None:
        grids = [GridSpec((2,)), GridSpec((3,)), GridSpec((2, 2)), GridSpec((3, 2)), GridSpec((2, 2, 2))]
    worst = 0.0
    where = ""
    for grid in grids:
        for band_limited in (True, False):
            spinor = random_spinor(grid, rng, band_limited)
            flat = [grid.to_flat(c) for c in spinor.components]
            kinds = [KernelKind.density()] + [KernelKind.momentum(a) for a in range(grid.d)]
            for kind in kinds:
                fft = observable_spectrum(spinor, kind, dealias=not band_limited)
                for j in itertools.product(*(range(1 << n) for n in grid.n_alpha)):
                    k = [lattice.index_to_wavenumber(a, n) for a, n in zip(j, grid.n_alpha)]
                    direct = convolve_observable_direct(spinor, kind, k)
                    op = build_measurement_operator(kind, j, grid)
                    if mutation == "momentum-sign" and kind.tag == "momentum":
                        op = type(op)(op.rows, op.cols, -op.coeffs, op.kind, op.k_target, op.size)
                    via_op = sum(expectation(op, f) for f in flat)
                    err = max(abs(direct - via_op), abs(direct - fft[j]), abs(via_op - fft[j]))
                    if err > worst:
                        worst, where = err, f"{kind.tag}{'' if kind.axis is None else kind.axis} k={tuple(k)} grid={grid.n_alpha}"
    tol = 1e-10
    return CheckResult("madelung.oracle_triangle", worst <= tol, worst, tol, f"worst at {where}" if worst > tol else "", time.perf_counter() - t0)


def run_checks(n_max: int = 6, seed: int = 0, mutation: str | None = None) -> VerifyReport:
    if n_max > MAX_VERIFY_QUBITS:
        raise ConfigError(f"verify runs dense oracles and is limited to n_q <= {MAX_VERIFY_QUBITS} (asked for {n_max})")
    if mutation is not None and mutation not in MUTATIONS:
        raise ConfigError(f"unknown mutation {mutation!r}; choose from {', '.join(MUTATIONS)}")
    report = VerifyReport()
    report.results.append(check_lattice(max(n_max, 1)))
    report.results.append(check_simulator(min(n_max, 6) if n_max > 0 else 1, seed, mutation))
    report.results.append(check_oracle_triangle(seed=seed, mutation=mutation))
    return report
