"""Shallow encoding circuit: spectrum-shaped U3 layers interleaved with CX pairs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .lattice import GridSpec

__all__ = [
    "ShapingParams",
    "CircuitSpec",
    "U3",
    "CX",
    "GateList",
    "TABLE_S1_SHAPING",
    "TABLE_S1_PAIRS",
    "u3_matrix",
    "qubit_wavenumber",
    "shaping_factor",
    "sample_angles",
    "build_circuit",
    "rescale_pairs",
]


@dataclass(frozen=True)
class ShapingParams:
    """Parameters of the per-qubit angle envelope.

    ``lam`` is the inertial decay exponent; ``L``, ``c_L`` and ``p0`` shape the
    large scales and ``eta``, ``c_eta``, ``beta`` the dissipative cutoff.
    """

    lam: float
    L: float
    c_L: float
    p0: float
    eta: float
    c_eta: float
    beta: float

    def __post_init__(self):
        problems = []
        if not self.L > 0:
            problems.append("L must be > 0")
        if not self.eta > 0:
            problems.append("eta must be > 0")
        for name in ("beta", "c_L", "c_eta"):
            if not getattr(self, name) >= 0:
                problems.append(f"{name} must be >= 0")
        if problems:
            raise ConfigError("invalid shaping parameters: " + "; ".join(problems))


TABLE_S1_SHAPING = ShapingParams(lam=5 / 3, L=2 * math.pi, c_L=1.0, p0=2.0, eta=0.01, c_eta=0.01, beta=15.0)

# 1-based (control, target) pairs for the 27-qubit, 512^3 circuit
TABLE_S1_PAIRS: tuple[tuple[tuple[int, int], ...], ...] = (
    ((1, 3), (2, 4), (5, 6), (8, 9), (9, 7), (10, 12), (11, 13), (14, 15), (17, 18), (18, 16),
     (19, 21), (20, 22), (23, 24), (26, 27), (27, 25)),
    ((1, 11), (10, 20), (19, 2), (3, 13), (12, 22), (21, 4), (3, 12), (12, 21), (21, 3)),
    ((2, 12), (11, 21), (20, 3), (1, 13), (10, 22), (19, 4), (4, 13), (13, 22), (22, 4)),
    ((1, 12), (10, 21), (19, 3), (2, 13), (11, 22), (20, 4), (5, 14), (14, 23), (23, 5)),
)


@dataclass(frozen=True)
class CircuitSpec:
    grid: GridSpec
    R: int
    r: int
    pair_sets: tuple[tuple[tuple[int, int], ...], ...]
    shaping: ShapingParams
    seed: int = 0

    def __post_init__(self):
        pair_sets = tuple(tuple((int(a), int(b)) for a, b in ps) for ps in self.pair_sets)
        object.__setattr__(self, "pair_sets", pair_sets)
        if self.R < 0 or self.r < 0:
            raise ConfigError(f"repetition counts must be non-negative (R={self.R}, r={self.r})")
        if self.R != len(pair_sets):
            raise ConfigError(f"R={self.R} but {len(pair_sets)} pair sets given")
        n_q = self.grid.n_q
        for ell, ps in enumerate(pair_sets, start=1):
            for a, b in ps:
                if a == b or not (1 <= a <= n_q and 1 <= b <= n_q):
                    raise ConfigError(f"pairs.{ell}: invalid pair ({a}, {b}) for {n_q} qubits (1-based)")

    def with_seed(self, seed: int) -> "CircuitSpec":
        return CircuitSpec(self.grid, self.R, self.r, self.pair_sets, self.shaping, seed)


class U3(NamedTuple):
    qubit: int
    theta: float
    phi: float
    gamma: float


class CX(NamedTuple):
    control: int
    target: int


@dataclass(frozen=True)
class GateList:
    """Ordered gates acting on ``n_q`` qubits, first gate applied first."""

    n_q: int
    gates: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            qubits = (g.qubit,) if isinstance(g, U3) else (g.control, g.target)
            if any(not 1 <= q <= self.n_q for q in qubits):
                raise DomainError(f"gate {g} addresses a qubit outside [1, {self.n_q}]")
            if isinstance(g, CX) and g.control == g.target:
                raise DomainError(f"CX with identical control and target: {g}")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def counts(self) -> dict:
        n_u3 = sum(isinstance(g, U3) for g in self.gates)
        return {"u3": n_u3, "cx": len(self.gates) - n_u3, "total": len(self.gates)}

    def to_text(self) -> str:
        lines = [f"# turbogen gate list n_q={self.n_q}"]
        for g in self.gates:
            if isinstance(g, U3):
                lines.append(f"u3 q{g.qubit} {g.theta:.17g} {g.phi:.17g} {g.gamma:.17g}")
            else:
                lines.append(f"cx q{g.control} q{g.target}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_q: int | None = None) -> "GateList":
        gates = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if line.startswith("#"):
                if n_q is None and "n_q=" in line:
                    n_q = int(line.split("n_q=")[1].split()[0])
                continue
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "u3" and len(parts) == 5:
                    gates.append(U3(int(parts[1][1:]), float(parts[2]), float(parts[3]), float(parts[4])))
                elif parts[0] == "cx" and len(parts) == 3:
                    gates.append(CX(int(parts[1][1:]), int(parts[2][1:])))
                else:
                    raise ValueError(parts[0])
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: cannot parse gate {raw!r}") from exc
        if n_q is None:
            n_q = max((max(g[:1]) if isinstance(g, U3) else max(g) for g in gates), default=0)
        return cls(n_q, gates)


def u3_matrix(theta: float, phi: float, gamma: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * gamma) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + gamma)) * c],
        ],
        dtype=np.complex128,
    )


def qubit_wavenumber(m: int, grid: GridSpec) -> int:
    """Wavenumber magnitude ``2**b`` carried by global qubit ``m`` (1-based),
    where ``b`` is the qubit's bit position inside its direction."""
    if not 1 <= m <= grid.n_q:
        raise DomainError(f"qubit {m} outside [1, {grid.n_q}]")
    for n, off in zip(grid.n_alpha, grid.offsets):
        if off < m <= off + n:
            return 1 << (m - 1 - off)
    raise AssertionError("unreachable")


def shaping_factor(kappa, p: ShapingParams):
    """Angle envelope ``kappa**-lam * f_L(kappa L) * f_eta(kappa eta)``.

    Accepts scalars or arrays.
    """
    kappa = np.asarray(kappa, dtype=np.float64)
    if np.any(kappa <= 0):
        raise DomainError("kappa must be positive")
    kl = kappa * p.L
    f_large = (kl / np.sqrt(kl * kl + p.c_L)) ** (p.p0 + p.lam)
    f_small = np.exp(-p.beta * (((kappa * p.eta) ** 4 + p.c_eta**4) ** 0.25 - p.c_eta))
    out = kappa ** (-p.lam) * f_large * f_small
    return float(out) if out.ndim == 0 else out


def sample_angles(spec: CircuitSpec) -> np.ndarray:
    """Rotation angles with shape ``(R, n_q, r, 3)``.

    Axis order is the draw order: module ``ell`` outermost, then qubit ``m``,
    then repetition ``l``, then ``(theta, phi, gamma)``. Each angle is an
    independent standard normal draw from ``numpy.random.default_rng(seed)``
    (PCG64) scaled by the shaping factor of its qubit.
    """
    n_q = spec.grid.n_q
    rng = np.random.default_rng(spec.seed)
    xi = rng.standard_normal((spec.R, n_q, spec.r, 3))
    kappa = np.array([qubit_wavenumber(m, spec.grid) for m in range(1, n_q + 1)], dtype=np.float64)
    scale = shaping_factor(kappa, spec.shaping) if n_q else np.empty(0)
    return xi * np.asarray(scale)[None, :, None, None]


def build_circuit(spec: CircuitSpec, angles: np.ndarray | None = None) -> GateList:
    """Gate list of the encoding unitary; within each module the rotation
    layer precedes that module's CX gates."""
    if angles is None:
        angles = sample_angles(spec)
    n_q = spec.grid.n_q
    if angles.shape != (spec.R, n_q, spec.r, 3):
        raise ConfigError(f"angle table has shape {angles.shape}, expected {(spec.R, n_q, spec.r, 3)}")
    gates: list = []
    for ell in range(spec.R):
        for m in range(n_q):
            for l in range(spec.r):
                theta, phi, gamma = angles[ell, m, l]
                gates.append(U3(m + 1, float(theta), float(phi), float(gamma)))
        gates.extend(CX(a, b) for a, b in spec.pair_sets[ell])
    return GateList(n_q, gates)


def rescale_pairs(
    pair_sets: Iterable[Sequence[tuple[int, int]]],
    n_alpha: Sequence[int],
    source_n: int = 9,
) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Carry a pair layout from ``source_n`` qubits per direction to ``n_alpha``.

    Qubits keep their local position inside their direction. Pairs touching a
    local position beyond the target width are dropped: those are the highest
    wavenumber qubits, whose rotation angles the default envelope suppresses
    to ~1e-4 or less, so the dropped CX gates act on (almost exactly) |0>.
    """
    n_alpha = tuple(n_alpha)
    offsets = [sum(n_alpha[:a]) for a in range(len(n_alpha))]

    def remap(q: int) -> int | None:
        direction, local = divmod(q - 1, source_n)
        if direction >= len(n_alpha):
            raise ConfigError(f"qubit {q} outside a {len(n_alpha)}-direction layout")
        if local >= n_alpha[direction]:
            return None
        return offsets[direction] + local + 1

    out = []
    for ps in pair_sets:
        mapped = []
        for a, b in ps:
            pa, pb = remap(a), remap(b)
            if pa is not None and pb is not None:
                mapped.append((pa, pb))
        out.append(tuple(mapped))
    return tuple(out)
