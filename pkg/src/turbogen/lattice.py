"""Grid geometry and the index algebra of the spectral encoding.

A ``d``-dimensional field is stored in ``2**n_q`` amplitudes. Direction
``alpha`` owns ``n_alpha`` consecutive bits of the flat index, with direction
0 in the least-significant block::

    flat(j) = sum_alpha j_alpha << (n_0 + ... + n_{alpha-1})

Within a direction the sub-index ``j`` and the signed wavenumber ``k`` follow
the standard DFT ordering ``0, 1, ..., N/2-1, -N/2, ..., -1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "GridSpec",
    "index_to_wavenumber",
    "wavenumber_to_index",
    "summation_set_K",
    "summation_set_J",
    "flat_index_m",
    "flat_index_n",
]


@dataclass(frozen=True)
class GridSpec:
    """Qubit layout of a periodic ``d``-dimensional grid.

    Parameters
    ----------
    n_alpha : sequence of int
        Qubits per direction; direction ``alpha`` has ``2**n_alpha[alpha]``
        grid points.
    domain_length : float or sequence of float
        Box size per direction. The default ``2*pi`` makes wavenumbers
        integers.
    """

    n_alpha: tuple[int, ...]
    domain_length: tuple[float, ...] = field(default=())

    def __init__(self, n_alpha: Sequence[int], domain_length: float | Sequence[float] = 2 * np.pi):
        n_alpha = tuple(int(n) for n in n_alpha)
        if not n_alpha:
            raise DomainError("grid needs at least one direction")
        if any(n < 1 for n in n_alpha):
            raise DomainError(f"qubit counts must be positive, got {n_alpha}")
        if np.ndim(domain_length) == 0:
            lengths = (float(domain_length),) * len(n_alpha)
        else:
            lengths = tuple(float(x) for x in domain_length)
        if len(lengths) != len(n_alpha) or any(x <= 0 for x in lengths):
            raise DomainError(f"bad domain_length {domain_length!r} for {len(n_alpha)} directions")
        object.__setattr__(self, "n_alpha", n_alpha)
        object.__setattr__(self, "domain_length", lengths)

    @property
    def d(self) -> int:
        return len(self.n_alpha)

    @property
    def n_q(self) -> int:
        return sum(self.n_alpha)

    @property
    def extent(self) -> tuple[int, ...]:
        return tuple(1 << n for n in self.n_alpha)

    @property
    def size(self) -> int:
        return 1 << self.n_q

    @property
    def offsets(self) -> tuple[int, ...]:
        """Bit offset of each direction inside the flat index."""
        out, acc = [], 0
        for n in self.n_alpha:
            out.append(acc)
            acc += n
        return tuple(out)

    def flat(self, j: Sequence[int]) -> int:
        if len(j) != self.d:
            raise DomainError(f"multi-index {tuple(j)} has wrong length for d={self.d}")
        total = 0
        for ja, n, off in zip(j, self.n_alpha, self.offsets):
            if not 0 <= ja < (1 << n):
                raise DomainError(f"sub-index {ja} out of range for {n} qubits")
            total += int(ja) << off
        return total

    def unflat(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.size:
            raise DomainError(f"flat index {flat} out of range")
        return tuple((flat >> off) & ((1 << n) - 1) for n, off in zip(self.n_alpha, self.offsets))

    def wavenumbers(self, alpha: int) -> np.ndarray:
        """Integer wavenumbers along ``alpha`` in storage order."""
        n = self.n_alpha[alpha]
        return np.fft.fftfreq(1 << n, d=1.0 / (1 << n)).astype(np.int64)

    def physical_wavenumbers(self, alpha: int) -> np.ndarray:
        return self.wavenumbers(alpha) * (2 * np.pi / self.domain_length[alpha])

    def to_array(self, amplitudes: np.ndarray) -> np.ndarray:
        """View flat amplitudes as an array indexed ``[j_0, ..., j_{d-1}]``."""
        return np.asarray(amplitudes).reshape(self.extent, order="F")

    def to_flat(self, array: np.ndarray) -> np.ndarray:
        return np.asarray(array).reshape(-1, order="F")

    def describe(self) -> dict:
        return {"d": self.d, "n_alpha": list(self.n_alpha), "domain_length": list(self.domain_length)}


def _check_qubits(n: int) -> None:
    if n < 1:
        raise DomainError(f"qubit count must be positive, got {n}")


def index_to_wavenumber(j: int, n: int) -> int:
    _check_qubits(n)
    size = 1 << n
    if not 0 <= j < size:
        raise DomainError(f"sub-index {j} outside [0, {size})")
    half = size >> 1
    return (j + half) % size - half


def wavenumber_to_index(k: int, n: int) -> int:
    _check_qubits(n)
    half = 1 << (n - 1)
    if not -half <= k <= half - 1:
        raise DomainError(f"wavenumber {k} outside [{-half}, {half - 1}]")
    # Heaviside with H(0) = 1
    return k if k >= 0 else k + (1 << n)


def summation_set_K(k: int, n: int) -> list[int]:
    """Partner wavenumbers ``k'`` such that both ``k'`` and ``k + k'`` stay in band."""
    _check_qubits(n)
    half = 1 << (n - 1)
    if not -half <= k <= half - 1:
        raise DomainError(f"wavenumber {k} outside [{-half}, {half - 1}]")
    lo = max(-half, -half - k)
    hi = min(half - 1, half - 1 - k)
    return list(range(lo, hi + 1))


def summation_set_J(j: int, n: int) -> list[int]:
    """Index-space counterpart of :func:`summation_set_K`, ascending."""
    _check_qubits(n)
    size = 1 << n
    if not 0 <= j < size:
        raise DomainError(f"sub-index {j} outside [0, {size})")
    half = size >> 1
    if j < half:
        return list(range(0, half - j)) + list(range(half, size))
    return list(range(0, half)) + list(range(3 * half - j, size))


def flat_index_m(j: Sequence[int], j_prime: Sequence[int], grid: GridSpec) -> int:
    """Flat index of the coupled wavenumber ``k(j) + k(j')``.

    Per direction the sum ``mod(j+h, N) + mod(j'+h, N) - N`` equals
    ``k + k'``; it is mapped back to a storage index so negative sums land in
    the upper half of the band.
    """
    if len(j) != grid.d or len(j_prime) != grid.d:
        raise DomainError("multi-index length does not match grid dimension")
    total = 0
    for ja, jpa, n, off in zip(j, j_prime, grid.n_alpha, grid.offsets):
        size, half = 1 << n, 1 << (n - 1)
        if not (0 <= ja < size and 0 <= jpa < size):
            raise DomainError(f"sub-index pair ({ja}, {jpa}) out of range for {n} qubits")
        ksum = (ja + half) % size + (jpa + half) % size - size
        if not -half <= ksum <= half - 1:
            raise DomainError(f"coupled pair ({ja}, {jpa}) falls off the {n}-qubit band")
        total += wavenumber_to_index(ksum, n) << off
    return total


def flat_index_n(j_prime: Sequence[int], grid: GridSpec) -> int:
    """Flat index of ``j'`` itself (the bra label of the measurement operator)."""
    return grid.flat(j_prime)
