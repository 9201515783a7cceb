import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from turbogen.errors import DomainError, UnphysicalFieldError
from turbogen.lattice import GridSpec, index_to_wavenumber
from turbogen.madelung import (
    KernelKind,
    MAX_REGULARIZED_FRACTION,
    build_measurement_operator,
    compute_fields,
    convolve_observable_direct,
    density_field,
    expectation,
    hermitian_split,
    momentum_field,
    observable_spectrum,
    spin_field,
    to_physical,
    to_spectral,
    velocity_field,
)
from turbogen.simulator import SpinorField
from turbogen.verify import random_spinor

# splits of n_q = 2..6 qubits into 1-3 directions
LAYOUTS = [(2,), (1, 1), (3,), (2, 1), (1, 1, 1), (4,), (2, 2), (2, 1, 1), (5,), (3, 2), (2, 2, 1), (6,), (3, 3), (2, 2, 2)]


def all_indices(grid):
    return itertools.product(*(range(1 << n) for n in grid.n_alpha))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(LAYOUTS), st.integers(0, 2**32 - 1), st.booleans())
def test_oracle_triangle(layout, seed, band_limited):
    grid = GridSpec(layout, domain_length=2 * np.pi * (1 + seed % 3))
    spinor = random_spinor(grid, np.random.default_rng(seed), band_limited)
    flat = [grid.to_flat(c) for c in spinor.components]
    for kind in [KernelKind.density()] + [KernelKind.momentum(a) for a in range(grid.d)]:
        fft = observable_spectrum(spinor, kind, dealias=not band_limited)
        for j in all_indices(grid):
            k = [index_to_wavenumber(a, n) for a, n in zip(j, grid.n_alpha)]
            direct = convolve_observable_direct(spinor, kind, k)
            op = build_measurement_operator(kind, j, grid)
            via_op = sum(expectation(op, f) for f in flat)
            assert abs(direct - via_op) < 1e-10
            assert abs(direct - fft[j]) < 1e-10


@pytest.mark.parametrize("tag", ["spin1", "spin2", "spin3"])
def test_spin_kernels_direct_vs_fft(tag):
    grid = GridSpec((3, 2))
    spinor = random_spinor(grid, np.random.default_rng(4), band_limited=False)
    kind = KernelKind(tag)
    fft = observable_spectrum(spinor, kind, dealias=True)
    for j in all_indices(grid):
        k = [index_to_wavenumber(a, n) for a, n in zip(j, grid.n_alpha)]
        assert abs(convolve_observable_direct(spinor, kind, k) - fft[j]) < 1e-12


def test_physical_fields_match_spectral_observables():
    grid = GridSpec((3, 3, 3))
    spinor = random_spinor(grid, np.random.default_rng(9), band_limited=True)
    rho = density_field(spinor)
    assert np.allclose(to_spectral(rho), observable_spectrum(spinor, KernelKind.density()), atol=1e-14)
    J = momentum_field(spinor)
    for a in range(3):
        assert np.allclose(to_spectral(J[a]), observable_spectrum(spinor, KernelKind.momentum(a)), atol=1e-13)
    s = spin_field(spinor, rho=rho)
    for i in range(3):
        rs = to_spectral(rho * s[i])
        assert np.allclose(rs, observable_spectrum(spinor, KernelKind.spin(i + 1)), atol=1e-13)


def test_parseval_mean_density():
    grid = GridSpec((4, 3, 2))
    spinor = random_spinor(grid, np.random.default_rng(0), band_limited=False)
    total = sum(np.sum(np.abs(c) ** 2) for c in spinor.components)
    assert density_field(spinor).mean() == pytest.approx(total, rel=1e-13)


def test_transform_pair_round_trip():
    rng = np.random.default_rng(1)
    c = rng.standard_normal((8, 4)) + 1j * rng.standard_normal((8, 4))
    assert np.allclose(to_spectral(to_physical(c)), c)
    # a single mode e^{ikx} has unit amplitude in physical space
    e = np.zeros((8, 4), complex)
    e[1, 0] = 1
    x = 2 * np.pi * np.arange(8) / 8
    assert np.allclose(to_physical(e), np.exp(1j * x)[:, None] * np.ones(4))


def test_global_phase_and_su2_invariance():
    grid = GridSpec((3, 3, 3))
    sp = random_spinor(grid, np.random.default_rng(5))
    f0 = compute_fields(sp)
    phase = np.exp(0.7j)
    f1 = compute_fields(SpinorField(sp.psi_plus * phase, sp.psi_minus * phase, grid))
    assert np.allclose(f0.rho, f1.rho) and np.allclose(f0.u, f1.u) and np.allclose(f0.s, f1.s)
    # a global SU(2) rotation leaves rho and J unchanged and rotates s rigidly
    U = np.array([[np.cos(0.3), -np.sin(0.3) * np.exp(0.2j)], [np.sin(0.3) * np.exp(-0.2j), np.cos(0.3)]])
    up = U[0, 0] * sp.psi_plus + U[0, 1] * sp.psi_minus
    dn = U[1, 0] * sp.psi_plus + U[1, 1] * sp.psi_minus
    f2 = compute_fields(SpinorField(up, dn, grid))
    assert np.allclose(f0.rho, f2.rho) and np.allclose(f0.J, f2.J)
    assert np.allclose(np.sum(f2.s**2, axis=0), 1)


def test_spin_is_unit_and_sign_flag():
    grid = GridSpec((3, 3, 3))
    sp = random_spinor(grid, np.random.default_rng(6))
    s_text = spin_field(sp)
    s_tab = spin_field(sp, spin2_sign=1)
    assert np.allclose(np.sum(s_text**2, axis=0), 1, atol=1e-12)
    assert np.allclose(s_text[1], -s_tab[1]) and np.allclose(s_text[[0, 2]], s_tab[[0, 2]])
    up, dn = (to_physical(c) for c in sp.components)
    assert np.allclose(s_text[1], 2 * np.imag(np.conj(up) * dn) / (abs(up) ** 2 + abs(dn) ** 2))


def test_hermitian_split_recombines():
    grid = GridSpec((2, 2))
    sp = random_spinor(grid, np.random.default_rng(2), band_limited=False)
    psi = grid.to_flat(sp.psi_plus)
    for j in all_indices(grid):
        op = build_measurement_operator(KernelKind.momentum(1), j, grid)
        h1, h2 = hermitian_split(op)
        assert abs(h1 - h1.conj().T).max() < 1e-15 and abs(h2 - h2.conj().T).max() < 1e-15
        e1 = np.vdot(psi, h1 @ psi)
        e2 = np.vdot(psi, h2 @ psi)
        assert abs(e1.imag) < 1e-14 and abs(e2.imag) < 1e-14
        assert abs(e1 + 1j * e2 - expectation(op, psi)) < 1e-13


def test_operator_shape_and_triples():
    grid = GridSpec((3,))
    op = build_measurement_operator(KernelKind.density(), (0,), grid)
    assert op.triples() == [(n, n, 1.0 + 0j) for n in range(8)]
    op = build_measurement_operator(KernelKind.density(), (4,), grid)  # k = -4 couples only k' = 0..3
    assert sorted(op.rows.tolist()) == [0, 1, 2, 3] and sorted(op.cols.tolist()) == [4, 5, 6, 7]
    with pytest.raises(DomainError):
        build_measurement_operator(KernelKind.spin(1), (0,), grid)
    with pytest.raises(DomainError):
        build_measurement_operator(KernelKind.momentum(1), (0,), grid)


def test_momentum_coefficient_is_half_k_plus_kprime():
    grid = GridSpec((3,))
    op = build_measurement_operator(KernelKind.momentum(0), (2,), grid)  # k = 2
    for n, m, c in op.triples():
        kp = index_to_wavenumber(n, 3)
        assert index_to_wavenumber(m, 3) == kp + 2
        assert c == pytest.approx(1 + kp)


def test_vacuum_regularization():
    rho = np.ones((16, 16))
    J = np.ones((2, 16, 16))
    rho[0, 0] = 0.0
    u, count = velocity_field(rho, J, return_count=True)
    assert count == 1 and np.all(u[:, 0, 0] == 0) and np.all(u[:, 1:, :] == 1)
    rho[:1, :3] = 0.0
    with pytest.raises(UnphysicalFieldError):
        velocity_field(rho, J)
    assert MAX_REGULARIZED_FRACTION == 0.01


def test_plane_wave_velocity():
    grid = GridSpec((4, 4, 4))
    c = np.zeros(grid.extent, complex)
    c[3, 0, 0] = 1.0
    f = compute_fields(SpinorField(c, np.zeros_like(c), grid))
    assert np.allclose(f.rho, 1) and np.allclose(f.u[0], 3) and np.allclose(f.u[1:], 0)
    assert np.allclose(f.s[2], 1)
