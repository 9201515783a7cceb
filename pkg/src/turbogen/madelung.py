"""Spectral-space Madelung transform of a two-component spinor.

Fourier convention: ``psi(x) = sum_k psi_hat(k) exp(i k.x)``. Synthesis is
therefore unnormalized and analysis carries ``1/N``; both map onto
``scipy.fft`` with ``norm="forward"``.

Three routes to the same Fourier coefficients are provided and cross-checked
in the test suite:

* :func:`convolve_observable_direct` sums the truncated convolution term by term;
* :func:`build_measurement_operator` + :func:`expectation` evaluate the sparse
  operator whose expectation value is that convolution;
* :func:`density_field` / :func:`momentum_field` evaluate pointwise bilinears
  in physical space and transform back.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp

from .errors import DomainError, UnphysicalFieldError
from .lattice import GridSpec, index_to_wavenumber, summation_set_J, summation_set_K, wavenumber_to_index
from .simulator import SpinorField

__all__ = [
    "KernelKind",
    "MeasurementOperator",
    "FieldSet",
    "VACUUM_RTOL",
    "MAX_REGULARIZED_FRACTION",
    "convolve_observable_direct",
    "build_measurement_operator",
    "expectation",
    "hermitian_split",
    "to_physical",
    "to_spectral",
    "density_field",
    "momentum_field",
    "spin_field",
    "velocity_field",
    "vacuum_threshold",
    "observable_spectrum",
    "compute_fields",
]

VACUUM_RTOL = 1e-12
MAX_REGULARIZED_FRACTION = 0.01
_WORKERS = -1


@dataclass(frozen=True)
class KernelKind:
    """Bilinear kernel ``c_{s,s'}(k, k')`` of one fluid observable.

    ``tag`` is one of ``density``, ``momentum``, ``spin1``, ``spin2``,
    ``spin3``; ``axis`` selects the momentum component. ``spin2_sign=+1``
    uses the tabulated ``c_{+-} = -i, c_{-+} = +i``; the default ``-1`` is the
    textbook expansion of ``<sigma_2>``.
    """

    tag: str
    axis: int | None = None
    spin2_sign: int = -1

    def __post_init__(self):
        if self.tag not in ("density", "momentum", "spin1", "spin2", "spin3"):
            raise DomainError(f"unknown kernel {self.tag!r}")
        if (self.tag == "momentum") != (self.axis is not None):
            raise DomainError("momentum kernels need an axis; other kernels must not have one")
        if self.spin2_sign not in (1, -1):
            raise DomainError("spin2_sign must be +1 or -1")

    @classmethod
    def density(cls) -> "KernelKind":
        return cls("density")

    @classmethod
    def momentum(cls, axis: int) -> "KernelKind":
        return cls("momentum", axis)

    @classmethod
    def spin(cls, i: int, spin2_sign: int = -1) -> "KernelKind":
        return cls(f"spin{i}", spin2_sign=spin2_sign)

    @property
    def spin_diagonal(self) -> bool:
        return self.tag in ("density", "momentum", "spin3")

    def spin_weights(self) -> dict[tuple[int, int], complex]:
        """Nonzero ``(s, s')`` entries, with ``0`` for + and ``1`` for -.

        For momentum the weight is 1 and the wavenumber factor comes from
        :meth:`wave_factor`.
        """
        if self.tag in ("density", "momentum"):
            return {(0, 0): 1.0, (1, 1): 1.0}
        if self.tag == "spin1":
            return {(0, 1): 1.0, (1, 0): 1.0}
        if self.tag == "spin2":
            return {(0, 1): -1j * self.spin2_sign, (1, 0): 1j * self.spin2_sign}
        return {(0, 0): 1.0, (1, 1): -1.0}

    def wave_factor(self, k_alpha, kp_alpha, scale: float = 1.0):
        """``k/2 + k'`` along the momentum axis (times ``2 pi / L``), else 1."""
        if self.tag != "momentum":
            return 1.0
        return scale * (0.5 * np.asarray(k_alpha) + np.asarray(kp_alpha))


def _check_kind_axis(kind: KernelKind, grid: GridSpec) -> None:
    if kind.tag == "momentum" and not 0 <= kind.axis < grid.d:
        raise DomainError(f"momentum axis {kind.axis} outside grid dimension {grid.d}")


def convolve_observable_direct(spinor: SpinorField, kind: KernelKind, k: Sequence[int]) -> complex:
    """Truncated convolution ``sum_{s,s'} sum_{k'} c psi_s(k+k') conj(psi_s'(k'))``.

    ``k'`` runs over the per-direction sets of :func:`summation_set_K`, so
    every term stays inside the band. Brute force; meant for small grids.
    """
    grid = spinor.grid
    _check_kind_axis(kind, grid)
    if len(k) != grid.d:
        raise DomainError(f"wavenumber {tuple(k)} has wrong length for d={grid.d}")
    k = tuple(int(x) for x in k)
    partner_sets = [summation_set_K(ka, n) for ka, n in zip(k, grid.n_alpha)]
    comps = (spinor.psi_plus, spinor.psi_minus)
    weights = kind.spin_weights()
    norm2 = spinor.normalization**2
    total = 0j
    for kp in itertools.product(*partner_sets):
        j_sum = tuple(wavenumber_to_index(a + b, n) for a, b, n in zip(k, kp, grid.n_alpha))
        j_p = tuple(wavenumber_to_index(b, n) for b, n in zip(kp, grid.n_alpha))
        factor = 1.0
        if kind.tag == "momentum":
            a = kind.axis
            factor = kind.wave_factor(k[a], kp[a], 2 * np.pi / grid.domain_length[a])
        for (s, s2), w in weights.items():
            total += w * factor * comps[s][j_sum] * np.conj(comps[s2][j_p])
    return complex(total * norm2)


@dataclass(frozen=True)
class MeasurementOperator:
    """Sparse operator ``sum C |n(j')><m(j, j')|`` over the flat amplitude basis.

    ``rows`` holds the ket labels ``n(j')`` and ``cols`` the bra labels
    ``m(j, j')``; with this orientation ``<psi|Q|psi>`` reproduces the
    convolution coefficient rather than its complex conjugate.
    """

    rows: np.ndarray
    cols: np.ndarray
    coeffs: np.ndarray
    kind: KernelKind
    k_target: tuple[int, ...]
    size: int

    def __len__(self) -> int:
        return len(self.coeffs)

    def to_sparse(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.coeffs, (self.rows, self.cols)), shape=(self.size, self.size))

    def triples(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.coeffs.tolist()))


def build_measurement_operator(kind: KernelKind, j: Sequence[int], grid: GridSpec) -> MeasurementOperator:
    """Measurement operator extracting the ``k(j)`` Fourier coefficient of a
    spin-diagonal observable (density or one momentum component).

    The same operator acts on each spin component; the coefficient is the sum
    of the two expectation values.
    """
    if kind.tag not in ("density", "momentum"):
        raise DomainError(f"operator form is only defined for density and momentum, not {kind.tag}")
    _check_kind_axis(kind, grid)
    if len(j) != grid.d:
        raise DomainError(f"multi-index {tuple(j)} has wrong length for d={grid.d}")
    j = tuple(int(x) for x in j)
    grid.flat(j)  # range check
    per_dim_m, per_dim_n, per_dim_c = [], [], []
    for alpha, (ja, n, off) in enumerate(zip(j, grid.n_alpha, grid.offsets)):
        size, half = 1 << n, 1 << (n - 1)
        partners = np.array(summation_set_J(ja, n), dtype=np.int64)
        shifted_j = (ja + half) % size
        shifted_p = (partners + half) % size
        ksum = shifted_j + shifted_p - size  # k(j) + k(j')
        m_idx = np.where(ksum >= 0, ksum, ksum + size)
        per_dim_m.append(m_idx << off)
        per_dim_n.append(partners << off)
        if kind.tag == "momentum" and alpha == kind.axis:
            scale = 2 * np.pi / grid.domain_length[alpha]
            per_dim_c.append(scale * (shifted_j / 2 + shifted_p - 3 * (size / 4)))
        else:
            per_dim_c.append(np.ones(len(partners)))
    mesh_m = np.zeros(1, dtype=np.int64)
    mesh_n = np.zeros(1, dtype=np.int64)
    mesh_c = np.ones(1)
    # dimension 0 varies fastest so triples come out in ascending n order
    for m_a, n_a, c_a in zip(per_dim_m, per_dim_n, per_dim_c):
        mesh_m = (m_a[:, None] + mesh_m[None, :]).ravel()
        mesh_n = (n_a[:, None] + mesh_n[None, :]).ravel()
        mesh_c = (c_a[:, None] * mesh_c[None, :]).ravel()
    k_target = tuple(index_to_wavenumber(ja, n) for ja, n in zip(j, grid.n_alpha))
    return MeasurementOperator(
        rows=mesh_n, cols=mesh_m, coeffs=mesh_c.astype(np.complex128), kind=kind, k_target=k_target, size=grid.size
    )


def expectation(op, psi: np.ndarray) -> complex:
    """``<psi|op|psi>`` for a flat state; ``op`` is a MeasurementOperator or sparse/dense matrix."""
    psi = np.asarray(psi).reshape(-1, order="F") if np.ndim(psi) > 1 else np.asarray(psi)
    if isinstance(op, MeasurementOperator):
        return complex(np.sum(op.coeffs * np.conj(psi[op.rows]) * psi[op.cols]))
    return complex(np.vdot(psi, op @ psi))


def hermitian_split(op) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """``((Q + Q^dag)/2, (Q - Q^dag)/(2i))``; ``Tr(H1 r) + i Tr(H2 r) = Tr(Q r)``."""
    q = op.to_sparse() if isinstance(op, MeasurementOperator) else sp.csr_matrix(op)
    qh = q.conj().T.tocsr()
    return ((q + qh) * 0.5).tocsr(), ((q - qh) * (-0.5j)).tocsr()


def to_physical(coeffs: np.ndarray, axes=None) -> np.ndarray:
    """``sum_k c(k) exp(i k.x)`` on the grid."""
    return sfft.ifftn(coeffs, axes=axes, norm="forward", workers=_WORKERS)


def to_spectral(values: np.ndarray, axes=None) -> np.ndarray:
    """Fourier coefficients ``(1/N) sum_x f(x) exp(-i k.x)``."""
    return sfft.fftn(values, axes=axes, norm="forward", workers=_WORKERS)


def _wavenumber_grid(grid: GridSpec, alpha: int) -> np.ndarray:
    shape = [1] * grid.d
    shape[alpha] = grid.extent[alpha]
    return grid.physical_wavenumbers(alpha).reshape(shape)


def _pad_spectrum(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Embed in-band coefficients in a ``3N/2`` grid so bilinears do not alias."""
    shape = tuple(3 * e // 2 if e > 1 else e for e in grid.extent)
    out = np.zeros(shape, dtype=np.complex128)
    src, dst = [], []
    for e, big in zip(grid.extent, shape):
        half = e // 2
        src.append((slice(0, half), slice(half, e)) if e > 1 else (slice(0, 1), slice(0, 0)))
        dst.append((slice(0, half), slice(big - half, big)) if e > 1 else (slice(0, 1), slice(0, 0)))
    for choice in itertools.product((0, 1), repeat=grid.d):
        s = tuple(src[a][c] for a, c in enumerate(choice))
        t = tuple(dst[a][c] for a, c in enumerate(choice))
        out[t] = coeffs[s]
    return out


def _truncate_spectrum(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    out = np.empty(grid.extent, dtype=np.complex128)
    for choice in itertools.product((0, 1), repeat=grid.d):
        s, t = [], []
        for a, c in enumerate(choice):
            e, big = grid.extent[a], coeffs.shape[a]
            half = e // 2
            if e == 1:
                s.append(slice(0, 1) if c == 0 else slice(0, 0))
                t.append(slice(0, 1) if c == 0 else slice(0, 0))
            elif c == 0:
                s.append(slice(0, half))
                t.append(slice(0, half))
            else:
                s.append(slice(big - half, big))
                t.append(slice(half, e))
        out[tuple(t)] = coeffs[tuple(s)]
    return out


def _psi_physical(spinor: SpinorField, s: int) -> np.ndarray:
    return spinor.normalization * to_physical(spinor.components[s])


def density_field(spinor: SpinorField) -> np.ndarray:
    """``rho(x) = sum_s |psi_s(x)|^2``."""
    rho = np.zeros(spinor.grid.extent)
    for s in (0, 1):
        psi = _psi_physical(spinor, s)
        rho += psi.real**2 + psi.imag**2
    return rho


def momentum_field(spinor: SpinorField) -> np.ndarray:
    """``J(x) = sum_s Im(conj(psi_s) grad psi_s)``, shape ``(d, *extent)``."""
    grid = spinor.grid
    J = np.zeros((grid.d,) + grid.extent)
    for s in (0, 1):
        coeffs = spinor.components[s]
        psi = _psi_physical(spinor, s)
        for alpha in range(grid.d):
            grad = spinor.normalization * to_physical(1j * _wavenumber_grid(grid, alpha) * coeffs)
            J[alpha] += psi.real * grad.imag - psi.imag * grad.real
            del grad
    return J


def vacuum_threshold(rho: np.ndarray) -> float:
    return VACUUM_RTOL * float(np.max(rho))


def spin_field(spinor: SpinorField, spin2_sign: int = -1, rho: np.ndarray | None = None) -> np.ndarray:
    """Unit spin vector ``<psi|sigma|psi> / <psi|psi>``, shape ``(3, *extent)``.

    The default ``spin2_sign=-1`` gives the textbook ``s_2 = 2 Im(conj(psi_+) psi_-) / rho``,
    the sign for which the spin-vorticity identity reproduces ``curl u``. ``+1``
    follows the tabulated kernel ``2 Im(psi_+ conj(psi_-)) / rho``, which flips
    that identity. Near-vacuum points get ``s = (0, 0, 1)``.
    """
    up = _psi_physical(spinor, 0)
    down = _psi_physical(spinor, 1)
    if rho is None:
        rho = up.real**2 + up.imag**2 + down.real**2 + down.imag**2
    cross = up * np.conj(down)
    s = np.empty((3,) + spinor.grid.extent)
    s[0] = 2 * cross.real
    s[1] = 2 * spin2_sign * cross.imag
    s[2] = (up.real**2 + up.imag**2) - (down.real**2 + down.imag**2)
    del cross, up, down
    vacuum = rho < vacuum_threshold(rho)
    safe = np.where(vacuum, 1.0, rho)
    s /= safe
    if vacuum.any():
        s[:, vacuum] = np.array([0.0, 0.0, 1.0])[:, None]
    return s


def velocity_field(rho: np.ndarray, J: np.ndarray, return_count: bool = False):
    """``u = J / rho`` with vacuum points set to zero.

    Raises :class:`UnphysicalFieldError` when more than 1% of the grid is
    regularized.
    """
    if J.shape[1:] != rho.shape:
        raise DomainError(f"momentum shape {J.shape} does not match density shape {rho.shape}")
    vacuum = rho < vacuum_threshold(rho)
    count = int(vacuum.sum())
    if count > MAX_REGULARIZED_FRACTION * rho.size:
        raise UnphysicalFieldError(f"{count} of {rho.size} points are vacuum-regularized")
    u = J / np.where(vacuum, 1.0, rho)
    if count:
        u[:, vacuum] = 0.0
    return (u, count) if return_count else u


def observable_spectrum(spinor: SpinorField, kind: KernelKind, dealias: bool = False) -> np.ndarray:
    """Fourier coefficients of ``rho``, ``J_alpha`` or ``rho s_i`` on the whole band.

    Without ``dealias`` the pointwise product is taken on the native grid, which
    is exact when each spinor component's support fits in the central half-band.
    ``dealias=True`` zero-pads to ``3N/2`` points per direction and reproduces
    the truncated convolution for arbitrary spectra.
    """
    grid = spinor.grid
    _check_kind_axis(kind, grid)
    comps = spinor.components
    if dealias:
        comps = tuple(_pad_spectrum(c, grid) for c in comps)
        kshape = comps[0].shape
    else:
        kshape = grid.extent

    def physical(c):
        return spinor.normalization * to_physical(c)

    acc = np.zeros(kshape, dtype=np.complex128)
    if kind.tag == "momentum":
        a = kind.axis
        n = kshape[a]
        kvec = sfft.fftfreq(n, d=1.0 / n) * (2 * np.pi / grid.domain_length[a])
        shape = [1] * grid.d
        shape[a] = n
        kvec = kvec.reshape(shape)
        for c in comps:
            psi = physical(c)
            grad = physical(1j * kvec * c)
            acc += (psi.real * grad.imag - psi.imag * grad.real)
    else:
        phys = [physical(c) for c in comps]
        for (s, s2), w in kind.spin_weights().items():
            acc += w * phys[s] * np.conj(phys[s2])
    out = to_spectral(acc)
    return _truncate_spectrum(out, grid) if dealias else out


@dataclass
class FieldSet:
    """Physical-space fluid fields derived from one spinor.

    ``J``, ``u`` and ``s`` carry the component on their leading axis.
    """

    grid: GridSpec
    rho: np.ndarray
    J: np.ndarray
    u: np.ndarray
    s: np.ndarray
    regularized_points: int = 0
    spin2_sign: int = -1
    meta: dict = field(default_factory=dict)

    def spectral(self, name: str) -> np.ndarray:
        values = getattr(self, name)
        if name == "rho":
            return to_spectral(values)
        return to_spectral(values, axes=tuple(range(1, values.ndim)))


def compute_fields(spinor: SpinorField, spin2_sign: int = -1) -> FieldSet:
    rho = density_field(spinor)
    J = momentum_field(spinor)
    u, count = velocity_field(rho, J, return_count=True)
    s = spin_field(spinor, spin2_sign=spin2_sign, rho=rho)
    return FieldSet(spinor.grid, rho, J, u, s, count, spin2_sign)
