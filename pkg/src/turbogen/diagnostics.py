"""Turbulence statistics of a generated velocity field.

All fields are real arrays on a :class:`~turbogen.lattice.GridSpec`, vector
fields carrying the component on the leading axis. Derivatives are spectral.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from scipy import optimize, stats

from .errors import DomainError
from .lattice import GridSpec

__all__ = [
    "ShellSpectrum",
    "ScalingFit",
    "VorticityPDF",
    "QRResult",
    "StructureFunctions",
    "vorticity_from_velocity",
    "vorticity_from_spin",
    "divergence",
    "shell_spectrum",
    "energy_spectrum",
    "fit_power_law",
    "fit_stretched_exponential",
    "vorticity_pdf",
    "qr_invariants",
    "vieillefosse_curve",
    "structure_functions",
    "k41_exponent",
    "sl94_exponent",
    "helicity_density",
    "reynolds_estimate",
    "peak_enstrophy_wavenumber",
]

_WORKERS = -1


def _require_3d(grid: GridSpec) -> None:
    if grid.d != 3:
        raise DomainError(f"operation needs a 3-dimensional grid, got d={grid.d}")


def _rfft(f: np.ndarray) -> np.ndarray:
    return sfft.rfftn(f, workers=_WORKERS)


def _irfft(fh: np.ndarray, shape) -> np.ndarray:
    return sfft.irfftn(fh, s=shape, workers=_WORKERS)


def _rfft_wavenumbers(grid: GridSpec) -> list[np.ndarray]:
    """Physical wavenumbers broadcastable against an ``rfftn`` output.

    The Nyquist mode is zeroed so derivatives of real fields stay real.
    """
    out = []
    for a in range(grid.d):
        n = grid.extent[a]
        if a == grid.d - 1:
            k = np.arange(n // 2 + 1, dtype=np.float64)
        else:
            k = np.fft.fftfreq(n, d=1.0 / n)
        if n > 1:
            k[np.abs(k) == n // 2] = 0.0
        k = k * (2 * np.pi / grid.domain_length[a])
        shape = [1] * grid.d
        shape[a] = len(k)
        out.append(k.reshape(shape))
    return out


def _gradient(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    fh = _rfft(f)
    ks = _rfft_wavenumbers(grid)
    return np.stack([_irfft(1j * k * fh, f.shape) for k in ks])


def vorticity_from_velocity(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Spectral curl ``i k x u_hat``."""
    _require_3d(grid)
    kx, ky, kz = _rfft_wavenumbers(grid)
    uh = [_rfft(c) for c in u]
    shape = u.shape[1:]
    return np.stack(
        [
            _irfft(1j * (ky * uh[2] - kz * uh[1]), shape),
            _irfft(1j * (kz * uh[0] - kx * uh[2]), shape),
            _irfft(1j * (kx * uh[1] - ky * uh[0]), shape),
        ]
    )


def divergence(v: np.ndarray, grid: GridSpec) -> np.ndarray:
    ks = _rfft_wavenumbers(grid)
    acc = np.zeros(_rfft(v[0]).shape, dtype=np.complex128)
    for k, c in zip(ks, v):
        acc += 1j * k * _rfft(c)
    return _irfft(acc, v.shape[1:])


def vorticity_from_spin(s: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``omega = 1/4 eps_ijk s_i grad s_j x grad s_k`` for a unit spin field.

    Component ``a`` reduces to ``1/2 s . (d_b s x d_c s)`` with ``(a, b, c)``
    cyclic.
    """
    _require_3d(grid)
    grads = np.stack([_gradient(c, grid) for c in s])  # grads[j, a] = d_a s_j
    out = np.empty_like(s)
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        db, dc = grads[:, b], grads[:, c]
        cross = np.stack(
            [db[1] * dc[2] - db[2] * dc[1], db[2] * dc[0] - db[0] * dc[2], db[0] * dc[1] - db[1] * dc[0]]
        )
        out[a] = 0.5 * np.sum(s * cross, axis=0)
    return out


@dataclass
class ShellSpectrum:
    """Energy per integer shell; ``k[i] = i`` and shell ``i`` covers ``[i - 1/2, i + 1/2)``.

    Shell 0 holds the mean.
    """

    k: np.ndarray
    E: np.ndarray
    label: str = ""

    @property
    def total(self) -> float:
        return float(self.E.sum())

    def to_csv(self) -> str:
        rows = ["k,E"] + [f"{int(k)},{e:.17g}" for k, e in zip(self.k, self.E)]
        return "\n".join(rows) + "\n"


def _shell_index(grid: GridSpec, half: bool) -> np.ndarray:
    kk = 0.0
    for a in range(grid.d):
        n = grid.extent[a]
        if half and a == grid.d - 1:
            k = np.arange(n // 2 + 1, dtype=np.float64)
        else:
            k = np.fft.fftfreq(n, d=1.0 / n)
        shape = [1] * grid.d
        shape[a] = len(k)
        kk = kk + (k * k).reshape(shape)
    return np.floor(np.sqrt(kk) + 0.5).astype(np.int64)


def shell_spectrum(field_hat: np.ndarray, grid: GridSpec, label: str = "") -> ShellSpectrum:
    """Bin ``|f_hat|^2`` over integer shells of the index wavenumber ``|k|``.

    ``field_hat`` holds full complex Fourier coefficients, either one array of
    the grid shape or a stack of components (energies add).
    """
    comps = field_hat[None] if field_hat.shape == grid.extent else field_hat
    if comps.shape[1:] != grid.extent:
        raise DomainError(f"spectral field shape {field_hat.shape} does not match grid {grid.extent}")
    idx = _shell_index(grid, half=False).ravel()
    nbins = int(idx.max()) + 1
    E = np.zeros(nbins)
    for c in comps:
        E += np.bincount(idx, weights=(c.real**2 + c.imag**2).ravel(), minlength=nbins)
    return ShellSpectrum(np.arange(nbins), E, label)


def energy_spectrum(values: np.ndarray, grid: GridSpec, label: str = "") -> ShellSpectrum:
    """Shell spectrum of a real field (or component stack) via ``rfftn``.

    Same normalization as ``shell_spectrum(to_spectral(values))``: the total
    equals the mean of ``sum |f|^2`` over the grid.
    """
    comps = values[None] if values.shape == grid.extent else values
    idx = _shell_index(grid, half=True)
    nlast = grid.extent[-1]
    weight = np.full(nlast // 2 + 1, 2.0)
    weight[0] = 1.0
    if nlast % 2 == 0:
        weight[-1] = 1.0
    idx_flat = idx.ravel()
    nbins = int(idx.max()) + 1
    E = np.zeros(nbins)
    size = float(np.prod(grid.extent))
    for c in comps:
        ch = _rfft(c) / size
        E += np.bincount(idx_flat, weights=((ch.real**2 + ch.imag**2) * weight).ravel(), minlength=nbins)
    return ShellSpectrum(np.arange(nbins), E, label)


@dataclass
class ScalingFit:
    fit_range: tuple[float, float]
    exponent: float
    stderr: float
    intercept: float = 0.0
    points: int = 0

    def as_dict(self) -> dict:
        return {
            "fit_range": list(self.fit_range),
            "exponent": self.exponent,
            "stderr": self.stderr,
            "intercept": self.intercept,
            "points": self.points,
        }


def _loglog_fit(x: np.ndarray, y: np.ndarray, fit_range) -> ScalingFit:
    if len(x) < 3:
        raise DomainError(f"need at least 3 points to fit, got {len(x)}")
    res = stats.linregress(np.log(x), np.log(y))
    return ScalingFit(tuple(float(v) for v in fit_range), float(res.slope), float(res.stderr), float(res.intercept), len(x))


def fit_power_law(spec: ShellSpectrum, fit_range: Sequence[float]) -> ScalingFit:
    """Least-squares slope of ``log E`` against ``log k`` over ``[k_lo, k_hi]``."""
    lo, hi = fit_range
    if not 0 < lo < hi:
        raise DomainError(f"bad fit range {fit_range}")
    mask = (spec.k >= lo) & (spec.k <= hi) & (spec.E > 0)
    if mask.sum() < 4:
        raise DomainError(f"fit range {fit_range} holds {int(mask.sum())} usable shells (need 4)")
    return _loglog_fit(spec.k[mask].astype(np.float64), spec.E[mask], (lo, hi))


@dataclass
class VorticityPDF:
    """Histogram of vorticity components in units of ``omega'`` plus the tail fit
    ``P = A exp(-c |w|^beta)``."""

    bin_centers: np.ndarray
    density: np.ndarray
    omega_prime: float
    c: float
    beta: float
    log_prefactor: float
    tail_samples: int
    reliable: bool
    tail_range: tuple[float, float] = (2.0, math.inf)
    excess_kurtosis: float = float("nan")

    def to_csv(self) -> str:
        rows = ["bin_center,density"] + [f"{b:.17g},{p:.17g}" for b, p in zip(self.bin_centers, self.density)]
        return "\n".join(rows) + "\n"


MIN_TAIL_SAMPLES = 1000


def fit_stretched_exponential(
    magnitudes: np.ndarray, tail_start: float, n_bins: int = 40, min_count: int = 5
) -> tuple[float, float, float]:
    """Fit ``log P = a - c x**beta`` to the density of ``magnitudes >= tail_start``.

    ``P`` is the density of the signed variable (half the density of the
    magnitude). For fixed ``beta`` the model is linear in ``(a, c)``; ``beta``
    is chosen by a bounded scalar search. Returns ``(c, beta, a)``.
    """
    x = np.asarray(magnitudes, dtype=np.float64)
    top = float(x.max())
    if not top > tail_start:
        raise DomainError("no samples beyond the tail start")
    edges = np.geomspace(tail_start, top * (1 + 1e-12), n_bins + 1)
    counts, _ = np.histogram(x, bins=edges)
    widths = np.diff(edges)
    keep = counts >= min_count
    if keep.sum() < 4:
        raise DomainError("too few populated tail bins for a stretched-exponential fit")
    centers = np.sqrt(edges[:-1] * edges[1:])[keep]
    logp = np.log(counts[keep] / (2.0 * x.size * widths[keep]))
    weights = np.sqrt(counts[keep])

    def solve(beta):
        design = np.stack([np.ones_like(centers), -(centers**beta)], axis=1)
        coef, *_ = np.linalg.lstsq(design * weights[:, None], logp * weights, rcond=None)
        resid = (design @ coef - logp) * weights
        return float(resid @ resid), coef

    grid = np.linspace(0.01, 3.0, 300)
    costs = [solve(b)[0] for b in grid]
    i = int(np.argmin(costs))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda b: solve(b)[0], bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    beta = float(res.x)
    _, (a, c) = solve(beta)
    return float(c), beta, float(a)


def vorticity_pdf(omega: np.ndarray, bins: int = 201, tail_start: float = 2.0) -> VorticityPDF:
    """PDF of the vorticity components normalized by ``omega' = (<|w|^2>/3)**0.5``.

    The three components are pooled. The tail fit covers the top two decades
    of ``|w|/omega'`` but never starts below ``tail_start``;
    it is flagged unreliable when fewer than 1000 samples reach the tail.
    """
    comps = np.asarray(omega, dtype=np.float64).reshape(omega.shape[0], -1)
    mean_sq = float(np.mean(np.sum(comps**2, axis=0)))
    if not mean_sq > 0:
        raise DomainError("vorticity field is identically zero")
    wp = math.sqrt(mean_sq / 3.0)
    values = (comps / wp).ravel()
    span = float(np.max(np.abs(values)))
    density, edges = np.histogram(values, bins=bins, range=(-span, span), density=True)
    centers = 0.5 * (edges[:-1] + edges[1:])
    mags = np.abs(values)
    n_tail = int(np.count_nonzero(mags >= tail_start))
    fit_lo = max(tail_start, span / 100.0)
    c = beta = a = float("nan")
    reliable = n_tail >= MIN_TAIL_SAMPLES
    try:
        c, beta, a = fit_stretched_exponential(mags, fit_lo)
    except DomainError:
        reliable = False
    kurt = float(np.mean([stats.kurtosis(row, fisher=True) for row in comps]))
    return VorticityPDF(centers, density, wp, c, beta, a, n_tail, reliable, (fit_lo, span), kurt)


@dataclass
class QRResult:
    Q: np.ndarray
    R: np.ndarray
    hist: np.ndarray
    R_edges: np.ndarray
    Q_edges: np.ndarray
    scale: float
    outside_fraction: float
    skewness_R: float
    skewness_R_raw: float
    overlay: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        rc = 0.5 * (self.R_edges[:-1] + self.R_edges[1:])
        qc = 0.5 * (self.Q_edges[:-1] + self.Q_edges[1:])
        rows = ["R,Q,density"]
        for i, r in enumerate(rc):
            for j, q in enumerate(qc):
                rows.append(f"{r:.17g},{q:.17g},{self.hist[i, j]:.17g}")
        return "\n".join(rows) + "\n"


def vieillefosse_curve(R: np.ndarray) -> np.ndarray:
    """``Q`` on the zero-discriminant line ``27 R^2 + 4 Q^3 = 0``."""
    return -np.cbrt(27.0 * np.asarray(R) ** 2 / 4.0)


def qr_invariants(
    u: np.ndarray, grid: GridSpec, bins: int = 100, normalize: bool = True, clip: float = 0.999
) -> QRResult:
    """Invariants ``Q = -A_ij A_ji / 2`` and ``R = -det A`` of ``A_ij = d u_j / d x_i``.

    With ``normalize`` the histogram axes are ``R / <Q_w>^{3/2}`` and
    ``Q / <Q_w>`` with ``Q_w = |omega|^2 / 4``; the returned fields stay in
    physical units. The histogram spans the central ``clip`` quantile range of
    each axis and integrates to one over it. ``skewness_R`` is the skewness
    of the R marginal of that histogram window; ``skewness_R_raw`` uses every
    grid point and is dominated by a handful of near-vacuum points.
    """
    _require_3d(grid)
    # A[i][j] = d u_j / d x_i
    A = np.empty((3, 3) + u.shape[1:])
    for j in range(3):
        A[:, j] = _gradient(u[j], grid)
    Q = -0.5 * np.einsum("ij...,ji...->...", A, A)
    R = -(
        A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
        - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
        + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0])
    )
    wx = A[1, 2] - A[2, 1]
    wy = A[2, 0] - A[0, 2]
    wz = A[0, 1] - A[1, 0]
    qw = float(np.mean(wx**2 + wy**2 + wz**2)) / 4.0
    del A, wx, wy, wz
    scale = qw if (normalize and qw > 0) else 1.0
    Rn = (R / scale**1.5).ravel()
    Qn = (Q / scale).ravel()
    tail = (1.0 - clip) / 2.0
    r_lo, r_hi = np.quantile(Rn, [tail, 1.0 - tail])
    q_lo, q_hi = np.quantile(Qn, [tail, 1.0 - tail])
    if r_hi <= r_lo:
        r_lo, r_hi = r_lo - 0.5, r_hi + 0.5
    if q_hi <= q_lo:
        q_lo, q_hi = q_lo - 0.5, q_hi + 0.5
    inside = (Rn >= r_lo) & (Rn <= r_hi) & (Qn >= q_lo) & (Qn <= q_hi)
    hist, r_edges, q_edges = np.histogram2d(Rn[inside], Qn[inside], bins=bins, range=[[r_lo, r_hi], [q_lo, q_hi]], density=True)
    r_line = np.linspace(r_lo, r_hi, 201)
    overlay = {"R": r_line, "vieillefosse_Q": vieillefosse_curve(r_line), "zero_line_R": 0.0}
    r_in = Rn[inside]
    skew = float(stats.skew(r_in)) if r_in.size > 2 and np.std(r_in) > 0 else 0.0
    skew_raw = float(stats.skew(Rn)) if np.std(Rn) > 0 else 0.0
    return QRResult(Q, R, hist, r_edges, q_edges, scale, float(1.0 - inside.mean()), skew, skew_raw, overlay)


def k41_exponent(p) -> np.ndarray:
    return np.asarray(p, dtype=np.float64) / 3.0


def sl94_exponent(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return p / 9.0 + 2.0 * (1.0 - (2.0 / 3.0) ** (p / 3.0))


@dataclass
class StructureFunctions:
    """Monte Carlo estimates ``S_p(r) = <|u(x + r) - u(x)|^p>``.

    ``S`` and ``stderr`` have shape ``(len(orders), len(r))``.
    """

    r: np.ndarray
    orders: tuple[int, ...]
    S: np.ndarray
    stderr: np.ndarray
    samples: int
    fits: dict = field(default_factory=dict)
    fit_range: tuple[float, float] = (0.0, 0.0)

    def zeta(self) -> dict[int, float]:
        return {p: f.exponent for p, f in self.fits.items()}

    def to_csv(self) -> str:
        head = "r," + ",".join(f"S_{p}" for p in self.orders)
        rows = [head]
        for i, r in enumerate(self.r):
            rows.append(f"{r:.17g}," + ",".join(f"{v:.17g}" for v in self.S[:, i]))
        return "\n".join(rows) + "\n"


def structure_functions(
    u: np.ndarray,
    grid: GridSpec,
    orders: Sequence[int] = (2, 3, 4, 5),
    samples: int = 100_000,
    seed: int = 0,
    n_separations: int = 24,
    fit_range: tuple[float, float] | None = None,
    axis: int | None = None,
) -> StructureFunctions:
    """Monte Carlo structure functions over grid-aligned separations.

    For each log-spaced separation ``r = m * dx`` (``m`` integer, ``r`` at most
    half the box) ``samples`` base points are drawn uniformly; the separation
    axis is drawn uniformly per sample unless ``axis`` is fixed. Each separation
    uses its own Philox substream spawned from ``seed``. Exponents are fitted on
    ``fit_range`` (default ``[8 dx, L / 8]``).
    """
    n = grid.extent[0]
    if any(e != n for e in grid.extent) or len(set(grid.domain_length)) != 1:
        raise DomainError("structure functions need a cubic grid")
    dx = grid.domain_length[0] / n
    box = grid.domain_length[0]
    offsets = np.unique(np.round(np.geomspace(1, n // 2, n_separations)).astype(np.int64))
    offsets = offsets[offsets * dx <= box / 2]
    r = offsets * dx
    orders = tuple(int(p) for p in orders)
    S = np.zeros((len(orders), len(r)))
    err = np.zeros_like(S)
    flat = [c.ravel() for c in u]
    strides = [int(np.prod(grid.extent[a + 1:])) for a in range(grid.d)]  # C-order strides
    children = np.random.SeedSequence(seed).spawn(len(r))
    for i, (m, ss) in enumerate(zip(offsets, children)):
        rng = np.random.Generator(np.random.Philox(ss))
        pts = rng.integers(0, n, size=(samples, grid.d))
        ax = np.full(samples, axis) if axis is not None else rng.integers(0, grid.d, size=samples)
        shifted = pts.copy()
        shifted[np.arange(samples), ax] = (shifted[np.arange(samples), ax] + m) % n
        i0 = pts @ np.array(strides)
        i1 = shifted @ np.array(strides)
        du2 = np.zeros(samples)
        for c in flat:
            d = c[i1] - c[i0]
            du2 += d * d
        mag = np.sqrt(du2)
        for j, p in enumerate(orders):
            vals = mag**p
            S[j, i] = vals.mean()
            err[j, i] = vals.std(ddof=1) / math.sqrt(samples)
    if fit_range is None:
        fit_range = (8 * dx, box / 8)
    lo, hi = fit_range
    mask = (r >= lo * (1 - 1e-9)) & (r <= hi * (1 + 1e-9))
    fits = {}
    for j, p in enumerate(orders):
        good = mask & (S[j] > 0)
        if good.sum() >= 3:
            fits[p] = _loglog_fit(r[good], S[j][good], fit_range)
    return StructureFunctions(r, orders, S, err, samples, fits, tuple(fit_range))


def helicity_density(u: np.ndarray, omega: np.ndarray) -> np.ndarray:
    if u.shape != omega.shape:
        raise DomainError(f"shape mismatch: {u.shape} vs {omega.shape}")
    return np.einsum("i...,i...->...", u, omega)


def reynolds_estimate(k_L: float, k_eta: float) -> float:
    """``(k_eta / k_L)**(4/3)``."""
    if not (k_L > 0 and k_eta >= k_L):
        raise DomainError(f"need 0 < k_L <= k_eta, got k_L={k_L}, k_eta={k_eta}")
    return (k_eta / k_L) ** (4.0 / 3.0)


def peak_enstrophy_wavenumber(spec: ShellSpectrum) -> int:
    """Shell maximizing ``k^2 E(k)`` (shell 0 excluded)."""
    ens = spec.k.astype(np.float64) ** 2 * spec.E
    return int(np.argmax(ens[1:]) + 1)
