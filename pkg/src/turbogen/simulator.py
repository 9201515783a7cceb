"""Statevector execution of encoding circuits.

Qubit ``m`` (1-based) acts on bit ``m - 1`` of the flat amplitude index, so
the qubits of direction 0 form the least-significant block, matching
:class:`turbogen.lattice.GridSpec`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .circuit import CX, U3, CircuitSpec, GateList, build_circuit, u3_matrix
from .errors import ConfigError, DomainError
from .lattice import GridSpec

__all__ = ["StateVector", "SpinorField", "apply_u3", "apply_cx", "run", "prepare_spinor", "NormAudit"]


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    n_q: int

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.n_q,):
            raise DomainError(f"expected {1 << self.n_q} amplitudes, got shape {self.amplitudes.shape}")

    @classmethod
    def ground(cls, n_q: int, dtype=np.complex128) -> "StateVector":
        amps = np.zeros(1 << n_q, dtype=dtype)
        amps[0] = 1.0
        return cls(amps, n_q)

    def norm(self) -> float:
        return float(np.sqrt(_norm_squared(self.amplitudes)))


@dataclass
class SpinorField:
    """Spectral coefficients of both spin components.

    ``psi_plus`` and ``psi_minus`` are arrays indexed ``[j_0, ..., j_{d-1}]``.
    The physical wave function is ``normalization * sum_k psi_hat(k) e^{ikx}``.
    """

    psi_plus: np.ndarray
    psi_minus: np.ndarray
    grid: GridSpec
    normalization: float = 1.0

    def __post_init__(self):
        if self.psi_plus.shape != self.grid.extent or self.psi_minus.shape != self.grid.extent:
            raise DomainError(
                f"spinor components {self.psi_plus.shape}/{self.psi_minus.shape} do not match grid {self.grid.extent}"
            )

    @property
    def components(self) -> tuple[np.ndarray, np.ndarray]:
        return self.psi_plus, self.psi_minus

    @classmethod
    def from_flat(cls, plus: np.ndarray, minus: np.ndarray, grid: GridSpec, normalization: float = 1.0):
        return cls(grid.to_array(plus), grid.to_array(minus), grid, normalization)


def _norm_squared(amps: np.ndarray) -> float:
    if amps.dtype == np.complex128 and amps.flags.c_contiguous:
        return kernels.norm_squared(amps)
    return float(np.sum(np.abs(amps.astype(np.complex128)) ** 2))


def _check_qubit(q: int, n_q: int) -> None:
    if not 1 <= q <= n_q:
        raise DomainError(f"qubit {q} outside [1, {n_q}]")


def _apply_1q_inplace(amps: np.ndarray, qubit: int, gate: np.ndarray) -> None:
    if amps.dtype == np.complex128:
        kernels.apply_1q(amps, qubit - 1, gate)
    else:
        from . import _kernels_py

        _kernels_py.apply_1q(amps, qubit - 1, gate.astype(amps.dtype))


def _apply_cx_inplace(amps: np.ndarray, control: int, target: int) -> None:
    if amps.dtype == np.complex128:
        kernels.apply_cx(amps, control - 1, target - 1)
    else:
        from . import _kernels_py

        _kernels_py.apply_cx(amps, control - 1, target - 1)


def apply_u3(state: StateVector, qubit: int, gate: np.ndarray) -> StateVector:
    """Return ``gate`` applied to ``qubit``; ``state`` is left untouched."""
    _check_qubit(qubit, state.n_q)
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape != (2, 2):
        raise DomainError(f"single-qubit gate must be 2x2, got {gate.shape}")
    amps = state.amplitudes.copy()
    _apply_1q_inplace(amps, qubit, gate)
    return StateVector(amps, state.n_q)


def apply_cx(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(control, state.n_q)
    _check_qubit(target, state.n_q)
    if control == target:
        raise DomainError(f"CX control and target coincide (qubit {control})")
    amps = state.amplitudes.copy()
    _apply_cx_inplace(amps, control, target)
    return StateVector(amps, state.n_q)


@dataclass
class NormAudit:
    """Norm drift observed while running a gate list."""

    max_gate_drift: float = 0.0
    final_norm: float = 1.0
    checked_gates: int = 0


def run(
    gates: GateList,
    n_q: int | None = None,
    dtype=np.complex128,
    audit: NormAudit | None = None,
    audit_every: int = 0,
) -> StateVector:
    """Apply ``gates`` to the ground state and return the final state.

    With an ``audit`` object the norm is checked every ``audit_every`` gates
    (0 disables per-gate checks) and once at the end.
    """
    n_q = gates.n_q if n_q is None else n_q
    if gates.n_q > n_q:
        raise DomainError(f"gate list addresses {gates.n_q} qubits but state has {n_q}")
    amps = np.zeros(1 << n_q, dtype=dtype)
    amps[0] = 1.0
    prev = 1.0
    for i, g in enumerate(gates.gates, start=1):
        if isinstance(g, U3):
            _apply_1q_inplace(amps, g.qubit, u3_matrix(g.theta, g.phi, g.gamma))
        elif isinstance(g, CX):
            _apply_cx_inplace(amps, g.control, g.target)
        else:
            raise DomainError(f"unknown gate {g!r}")
        if audit is not None and audit_every and i % audit_every == 0:
            nrm = np.sqrt(_norm_squared(amps))
            audit.max_gate_drift = max(audit.max_gate_drift, abs(nrm - prev))
            audit.checked_gates += 1
            prev = nrm
    if audit is not None:
        audit.final_norm = float(np.sqrt(_norm_squared(amps)))
    return StateVector(amps, n_q)


def prepare_spinor(
    spec_up: CircuitSpec,
    spec_down: CircuitSpec,
    dtype=np.complex128,
    normalization: float = 1.0,
) -> SpinorField:
    """Run one circuit per spin component and reshape onto the grid."""
    if spec_up.grid != spec_down.grid:
        raise ConfigError(f"spin circuits disagree on the grid: {spec_up.grid} vs {spec_down.grid}")
    grid = spec_up.grid
    up = run(build_circuit(spec_up), grid.n_q, dtype=dtype)
    down = run(build_circuit(spec_down), grid.n_q, dtype=dtype)
    return SpinorField.from_flat(up.amplitudes, down.amplitudes, grid, normalization)
