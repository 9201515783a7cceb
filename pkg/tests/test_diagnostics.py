import numpy as np
import pytest
from scipy import stats

from turbogen import diagnostics as dg
from turbogen.errors import DomainError
from turbogen.lattice import GridSpec
from turbogen.madelung import to_spectral


def mesh(n):
    x = 2 * np.pi * np.arange(n) / n
    return np.meshgrid(x, x, x, indexing="ij")


G32 = GridSpec((5, 5, 5))
G64 = GridSpec((6, 6, 6))


def test_curl_of_taylor_green_like_field():
    X, Y, Z = mesh(32)
    u = np.stack([-np.sin(Y), np.sin(X), np.zeros_like(X)])
    w = dg.vorticity_from_velocity(u, G32)
    assert np.allclose(w[:2], 0, atol=1e-13)
    assert np.allclose(w[2], np.cos(X) + np.cos(Y), atol=1e-12)
    assert np.allclose(dg.divergence(u, G32), 0, atol=1e-12)


def test_divergence_of_gradient_field():
    X, Y, Z = mesh(32)
    v = np.stack([np.cos(X), np.cos(2 * Y), np.zeros_like(Z)])
    assert np.allclose(dg.divergence(v, G32), -np.sin(X) - 2 * np.sin(2 * Y), atol=1e-12)


def test_qr_rotation_and_strain_spot_values():
    X, Y, Z = mesh(64)
    rot = dg.qr_invariants(np.stack([-np.sin(Y), np.sin(X), 0 * X]), G64)
    assert abs(rot.Q[0, 0, 0] - 1) < 1e-6 and abs(rot.R[0, 0, 0]) < 1e-6
    strain = dg.qr_invariants(np.stack([np.sin(X), -np.sin(Y), 0 * X]), G64)
    assert abs(strain.Q[0, 0, 0] + 1) < 1e-6 and abs(strain.R[0, 0, 0]) < 1e-6


def test_qr_histogram_normalized_and_overlay():
    rng = np.random.default_rng(0)
    u = np.stack([dg._irfft(dg._rfft(rng.standard_normal((32,) * 3)) * np.exp(-0.1 * np.arange(17)), (32,) * 3) for _ in range(3)])
    qr = dg.qr_invariants(u, G32, bins=40)
    area = np.diff(qr.R_edges)[:, None] * np.diff(qr.Q_edges)[None, :]
    assert np.sum(qr.hist * area) == pytest.approx(1.0)
    assert qr.outside_fraction < 0.003
    r = qr.overlay["R"]
    assert np.allclose(27 * r**2 + 4 * qr.overlay["vieillefosse_Q"] ** 3, 0, atol=1e-9)
    # a compressible random field has no symmetry constraint, so only check that fields come back
    assert qr.Q.shape == (32,) * 3 and np.isfinite(qr.skewness_R)


def test_qr_requires_3d():
    with pytest.raises(DomainError):
        dg.qr_invariants(np.zeros((2, 8, 8)), GridSpec((3, 3)))


def test_spin_vorticity_on_hedgehog_free_texture():
    X, Y, Z = mesh(32)
    a = 1.0 + 0.3 * np.sin(X + Y)
    b = 0.5 * np.cos(Z) + 0.2 * np.sin(Y)
    s = np.stack([np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)])
    w = dg.vorticity_from_spin(s, G32)
    # 1/2 s . (d_b s x d_c s) = 1/2 sin(a) (d_b a d_c b - d_c a d_b b)
    da = [0.3 * np.cos(X + Y), 0.3 * np.cos(X + Y), 0 * X]
    db = [0 * X, 0.2 * np.cos(Y), -0.5 * np.sin(Z)]
    for i, (p, q) in enumerate(((1, 2), (2, 0), (0, 1))):
        ref = 0.5 * np.sin(a) * (da[p] * db[q] - da[q] * db[p])
        assert np.allclose(w[i], ref, atol=1e-10)


def test_shell_spectrum_single_mode_and_parseval():
    X, Y, Z = mesh(16)
    g = GridSpec((4, 4, 4))
    f = np.cos(3 * X + 4 * Y)  # |k| = 5
    spec = dg.energy_spectrum(f, g)
    assert spec.E[5] == pytest.approx(0.5) and spec.total == pytest.approx(0.5)
    full = dg.shell_spectrum(to_spectral(f), g)
    assert np.allclose(full.E[: len(spec.E)], spec.E)
    rng = np.random.default_rng(1)
    u = rng.standard_normal((3, 16, 16, 16))
    assert dg.energy_spectrum(u, g).total == pytest.approx(np.mean(np.sum(u**2, axis=0)))
    assert "k,E" in spec.to_csv()


def test_fit_power_law_exact_and_noisy():
    k = np.arange(200)
    E = np.zeros(200)
    E[1:] = k[1:] ** (-5 / 3)
    fit = dg.fit_power_law(dg.ShellSpectrum(k, E), (4, 64))
    assert abs(fit.exponent + 5 / 3) < 1e-12
    E[1:] = 3.0 * k[1:] ** (-10 / 3)
    assert dg.fit_power_law(dg.ShellSpectrum(k, E), (4, 64)).exponent == pytest.approx(-10 / 3, abs=1e-12)
    errs = []
    for seed in range(200):
        noisy = E * np.exp(0.1 * np.random.default_rng(seed).standard_normal(200))
        errs.append(dg.fit_power_law(dg.ShellSpectrum(k, noisy), (4, 64)).exponent + 10 / 3)
    # single fits scatter with stderr ~0.02, so the bound holds for ~99% of seeds
    assert np.mean(np.abs(errs) < 0.05) >= 0.95
    assert abs(np.mean(errs)) < 0.005


def test_fit_power_law_degenerate():
    with pytest.raises(DomainError):
        dg.fit_power_law(dg.ShellSpectrum(np.arange(10), np.ones(10)), (4, 6))
    with pytest.raises(DomainError):
        dg.fit_power_law(dg.ShellSpectrum(np.arange(10), np.zeros(10)), (1, 9))
    with pytest.raises(DomainError):
        dg.fit_power_law(dg.ShellSpectrum(np.arange(10), np.ones(10)), (5, 2))


def test_vorticity_pdf_gaussian_gives_beta_two():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((3, 10**7 // 3))
    pdf = dg.vorticity_pdf(w)
    assert pdf.reliable
    assert abs(pdf.beta - 2) < 0.15
    assert abs(pdf.excess_kurtosis) < 0.01
    assert pdf.omega_prime == pytest.approx(1.0, rel=1e-3)


def stretched_samples(c, beta, size, seed):
    """Inverse-CDF draws of |w| with density proportional to exp(-c |w|**beta)."""
    u = np.random.default_rng(seed).random(size)
    y = stats.gamma.ppf(u, a=1.0 / beta)  # y = c |w|^beta
    return (y / c) ** (1.0 / beta)


def test_stretched_exponential_recovery():
    x = stretched_samples(14.0, 0.2, 10**6, seed=3)
    c, beta, _ = dg.fit_stretched_exponential(x, tail_start=x.max() / 100)
    assert c == pytest.approx(14.0, rel=0.1)
    assert beta == pytest.approx(0.2, rel=0.1)


def test_vorticity_pdf_error_paths():
    with pytest.raises(DomainError):
        dg.vorticity_pdf(np.zeros((3, 8, 8, 8)))
    pdf = dg.vorticity_pdf(np.random.default_rng(0).standard_normal((3, 100)))
    assert not pdf.reliable


def test_structure_function_matches_analytic():
    # u = (sin z, 0, 0) sampled along z only: |du|^2 = (sin(z + r) - sin z)^2, mean 1 - cos r
    X, Y, Z = mesh(64)
    u = np.stack([np.sin(Z), 0 * Z, 0 * Z])
    sf = dg.structure_functions(u, G64, orders=(2,), samples=10**6, seed=5, axis=2)
    exact = 1 - np.cos(sf.r)
    z = np.abs(sf.S[0] - exact) / sf.stderr[0]
    assert np.all(z < 3)


def test_structure_function_error_scaling():
    X, Y, Z = mesh(32)
    u = np.stack([np.sin(X + Z), np.cos(Y), 0 * Z])
    a = dg.structure_functions(u, G32, orders=(2,), samples=4000, seed=1)
    b = dg.structure_functions(u, G32, orders=(2,), samples=16000, seed=1)
    ratio = np.median(a.stderr[0] / b.stderr[0])
    assert ratio == pytest.approx(2.0, rel=0.3)
    c = dg.structure_functions(u, G32, orders=(2,), samples=4000, seed=1)
    assert np.array_equal(a.S, c.S)


def test_structure_functions_zero_for_uniform_field():
    sf = dg.structure_functions(np.ones((3, 16, 16, 16)), GridSpec((4, 4, 4)), samples=1000)
    assert np.all(sf.S == 0) and sf.fits == {}


def test_reference_exponents():
    assert dg.k41_exponent(3) == 1.0 and dg.sl94_exponent(3) == pytest.approx(1.0, abs=1e-15)
    p = np.arange(1, 9)
    assert np.all(np.diff(dg.sl94_exponent(p), 2) < 0)
    assert dg.sl94_exponent(6) == pytest.approx(6 / 9 + 2 * (1 - (2 / 3) ** 2))


def test_reynolds_and_peak():
    assert dg.reynolds_estimate(1, 1280) == pytest.approx(13900, rel=0.01)
    assert dg.reynolds_estimate(1, 1) == 1.0
    with pytest.raises(DomainError):
        dg.reynolds_estimate(2, 1)
    k = np.arange(10)
    E = np.array([5, 1, 1, 1, 0.7, 0.01, 0, 0, 0, 0], float)
    assert dg.peak_enstrophy_wavenumber(dg.ShellSpectrum(k, E)) == 4


def test_helicity():
    X, Y, Z = mesh(32)
    # ABC flow is a Beltrami field: omega = u
    u = np.stack([np.sin(Z) + np.cos(Y), np.sin(X) + np.cos(Z), np.sin(Y) + np.cos(X)])
    w = dg.vorticity_from_velocity(u, G32)
    assert np.allclose(w, u, atol=1e-12)
    assert np.allclose(dg.helicity_density(u, w), np.sum(u * u, axis=0))
