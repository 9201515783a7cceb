"""Acceptance suite: one test, and one PASS/FAIL line, per criterion.

Seeds for the encoded-field criteria were fixed before any of them were run
(101, 102, 103 for spin up and the same plus 1000 for spin down) and are
disjoint from the seeds used to tune the 24-qubit shaping.

Set ``TURBOGEN_FULL_SCALE=1`` to include the 27-qubit leg of criterion 3.
"""
import itertools
import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from turbogen import diagnostics as dg
from turbogen.circuit import TABLE_S1_SHAPING, build_circuit, shaping_factor
from turbogen.cli import cmd_generate, main
from turbogen.config import load_config
from turbogen.lattice import GridSpec, index_to_wavenumber
from turbogen.madelung import (
    KernelKind,
    build_measurement_operator,
    compute_fields,
    convolve_observable_direct,
    expectation,
    observable_spectrum,
    to_spectral,
)
from turbogen.simulator import SpinorField, prepare_spinor
from turbogen.verify import check_simulator, random_spinor

HELD_OUT = (101, 102, 103)
DOWN_OFFSET = 1000
LAYOUTS = [(2,), (1, 1), (3,), (2, 1), (1, 1, 1), (4,), (2, 2), (2, 1, 1), (5,), (3, 2), (2, 2, 1), (6,), (3, 3), (2, 2, 2)]


def mesh(n):
    x = 2 * np.pi * np.arange(n) / n
    return np.meshgrid(x, x, x, indexing="ij")


# -- 1 ------------------------------------------------------------------------

def test_c1_oracle_triangle(criteria):
    t0 = time.perf_counter()
    worst = 0.0
    for i, layout in enumerate(LAYOUTS):
        for seed in range(3):
            grid = GridSpec(layout)
            spinor = random_spinor(grid, np.random.default_rng(1000 * i + seed), band_limited=True)
            flat = [grid.to_flat(c) for c in spinor.components]
            for kind in [KernelKind.density()] + [KernelKind.momentum(a) for a in range(grid.d)]:
                fft = observable_spectrum(spinor, kind)
                for j in itertools.product(*(range(1 << n) for n in layout)):
                    k = [index_to_wavenumber(a, n) for a, n in zip(j, layout)]
                    direct = convolve_observable_direct(spinor, kind, k)
                    via_op = sum(expectation(build_measurement_operator(kind, j, grid), f) for f in flat)
                    worst = max(worst, abs(direct - via_op), abs(direct - fft[j]), abs(via_op - fft[j]))
    dt = time.perf_counter() - t0
    ok = worst < 1e-10 and dt < 60
    criteria.record(1, ok, f"oracle triangle max pairwise error {worst:.2e} (< 1e-10), {dt:.1f} s (< 60 s)")
    assert ok


# -- 2 ------------------------------------------------------------------------

def test_c2_simulator_conformance(criteria, tmp_path):
    dense = check_simulator(n_max=6, seed=7)
    cfg = load_config("reduced_18").with_overrides(output_dir=tmp_path)
    t0 = time.perf_counter()
    report = cmd_generate(cfg)
    dt = time.perf_counter() - t0
    drift = max(abs(report["norm_up"] - 1), abs(report["norm_down"] - 1))
    ok = dense.passed and drift < 1e-10 and dt < 30
    criteria.record(2, ok, f"dense oracle error {dense.max_error:.2e} (<= 1e-12); 18-qubit norm drift {drift:.1e} (< 1e-10); generate {dt:.1f} s (< 30 s)")
    assert ok


# -- 3 ------------------------------------------------------------------------

def test_c3_spectral_shape(criteria, tmp_path):
    t0 = time.perf_counter()
    code = main(["all", "--config", "reduced_24", "--seed-up", str(HELD_OUT[0]),
                 "--seed-down", str(HELD_OUT[0] + DOWN_OFFSET), "--out", str(tmp_path)])
    dt = time.perf_counter() - t0
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    slope = summary["slope_u"]["exponent"]
    vsf = [f["exponent"] for f in summary["slope_s"]]
    gap = slope - float(np.mean(vsf))
    lo, hi = summary["fit_range"]
    ok_slope = abs(slope + 5 / 3) <= 0.35
    ok_vsf = abs(gap - 5 / 3) <= 0.5
    ok = ok_slope and ok_vsf and dt < 600
    criteria.record(3, ok, f"24 qubits, k in [{lo:g}, {hi:g}]: slope {slope:.3f} (-5/3 +- 0.35); "
                           f"VSF slopes {', '.join(f'{v:.3f}' for v in vsf)}, steeper by {gap:.3f} (5/3 +- 0.5); {dt:.0f} s (< 600 s)")
    if os.environ.get("TURBOGEN_FULL_SCALE") == "1":
        full = tmp_path / "full"
        assert main(["all", "--config", "table_s1", "--out", str(full)]) == 0
        s27 = json.loads((full / "summary.json").read_text())["slope_u"]["exponent"]
        ok27 = abs(s27 + 5 / 3) <= 0.2
        criteria.record("3 (27 qubits)", ok27, f"slope {s27:.3f} over k in [4, 64] (-5/3 +- 0.2)")
        ok = ok and ok27
    else:
        criteria.record("3 (27 qubits)", None, "set TURBOGEN_FULL_SCALE=1 to run the full-scale leg")
    assert ok


# -- encoded 21-qubit fields shared by 4, 5 and 6 -----------------------------

@pytest.fixture(scope="module")
def encoded21():
    cfg = load_config("reduced_21")
    grid = cfg.grid
    out = {}
    for seed in HELD_OUT:
        c = cfg.with_overrides(seed_up=seed, seed_down=seed + DOWN_OFFSET)
        u = compute_fields(prepare_spinor(c.circuit_spec("up"), c.circuit_spec("down"))).u
        stats_ = {"pdf": dg.vorticity_pdf(dg.vorticity_from_velocity(u, grid)), "qr": dg.qr_invariants(u, grid)}
        if seed == HELD_OUT[0]:
            stats_["sf"] = dg.structure_functions(u, grid, samples=10**6, seed=0)
        out[seed] = stats_
        del u
    return out


# -- 4 ------------------------------------------------------------------------

def stretched_samples(c, beta, size, seed):
    y = stats.gamma.ppf(np.random.default_rng(seed).random(size), a=1.0 / beta)
    return (y / c) ** (1.0 / beta)


def test_c4_intermittency(criteria, encoded21):
    pdf = encoded21[HELD_OUT[0]]["pdf"]
    x = stretched_samples(14.0, 0.2, 10**6, seed=HELD_OUT[0])
    c, beta, _ = dg.fit_stretched_exponential(x, tail_start=x.max() / 100)
    ok_field = pdf.excess_kurtosis > 3 and pdf.reliable and pdf.beta < 1
    ok_synth = abs(c / 14 - 1) <= 0.1 and abs(beta / 0.2 - 1) <= 0.1
    ok = ok_field and ok_synth
    criteria.record(4, ok, f"21 qubits: excess kurtosis {pdf.excess_kurtosis:.1f} (> 3), beta_fit {pdf.beta:.3f} (< 1); "
                           f"synthetic recovery c {c:.2f} (14 +- 10%), beta {beta:.4f} (0.2 +- 10%)")
    assert ok


# -- 5 ------------------------------------------------------------------------

def test_c5_qr_topology(criteria, encoded21):
    skews = [encoded21[s]["qr"].skewness_R for s in HELD_OUT]
    mean_skew = float(np.mean(skews))
    g = GridSpec((6, 6, 6))
    X, Y, Z = mesh(64)
    rot = dg.qr_invariants(np.stack([-np.sin(Y), np.sin(X), 0 * X]), g)
    strain = dg.qr_invariants(np.stack([np.sin(X), -np.sin(Y), 0 * X]), g)
    spot = max(abs(rot.Q[0, 0, 0] - 1), abs(rot.R[0, 0, 0]), abs(strain.Q[0, 0, 0] + 1), abs(strain.R[0, 0, 0]))
    ok = abs(mean_skew) < 0.1 and spot < 1e-6
    criteria.record(5, ok, f"R skewness per seed {', '.join(f'{v:.3f}' for v in skews)}, mean {mean_skew:.3f} (|.| < 0.1); "
                           f"spot-value error {spot:.1e} (< 1e-6)")
    assert ok


# -- 6 ------------------------------------------------------------------------

def test_c6_structure_functions(criteria, encoded21):
    X, Y, Z = mesh(64)
    u = np.stack([np.sin(Z), 0 * Z, 0 * Z])
    sf = dg.structure_functions(u, GridSpec((6, 6, 6)), orders=(2,), samples=10**6, seed=5, axis=2)
    zmax = float(np.max(np.abs(sf.S[0] - (1 - np.cos(sf.r))) / sf.stderr[0]))
    tables = dg.k41_exponent(3) == 1.0 and abs(dg.sl94_exponent(3) - 1.0) < 1e-15
    zeta = encoded21[HELD_OUT[0]]["sf"].zeta()
    concave = all(p in zeta for p in (2, 3, 4)) and (zeta[4] - zeta[3]) < (zeta[3] - zeta[2])
    ok = zmax < 3 and tables and concave
    zs = ", ".join(f"z{p} {v:.3f}" for p, v in sorted(zeta.items()))
    criteria.record(6, ok, f"S2 worst deviation {zmax:.2f} SE (< 3); reference zeta3 = 1 {tables}; "
                           f"21 qubits {zs}, concave {concave}")
    assert ok


# -- 7 ------------------------------------------------------------------------

def test_c7_spin_vorticity(criteria):
    g = GridSpec((6, 6, 6))
    X, Y, Z = mesh(64)
    a = 1.2 + 0.3 * np.sin(X + 2 * Y) + 0.2 * np.cos(Z - Y)
    p1 = 0.4 * np.sin(Y) + 0.3 * np.cos(X + Z)
    p2 = 0.5 * np.cos(Z) - 0.2 * np.sin(2 * X)
    up = np.cos(a / 2) * np.exp(1j * p1)
    dn = np.sin(a / 2) * np.exp(1j * p2)
    f = compute_fields(SpinorField(to_spectral(up), to_spectral(dn), g))
    w_u = dg.vorticity_from_velocity(f.u, g)
    err = np.linalg.norm(dg.vorticity_from_spin(f.s, g) - w_u) / np.linalg.norm(w_u)
    ok = err < 1e-6 and np.max(np.abs(f.rho - 1)) < 1e-12
    criteria.record(7, ok, f"64^3 unit-density spinor: vorticity from spin vs curl u relative L2 {err:.2e} (< 1e-6)")
    assert ok


# -- 8 ------------------------------------------------------------------------

def test_c8_scalars(criteria):
    import mpmath

    re = dg.reynolds_estimate(1, 1280)
    gates = build_circuit(load_config("table_s1").circuit_spec("up"))
    n_gates = len(gates)
    mpmath.mp.dps = 50
    p = TABLE_S1_SHAPING
    kap = mpmath.mpf(1)
    L, cL, p0, eta, ceta, lam, beta = (mpmath.mpf(x) for x in (p.L, p.c_L, p.p0, p.eta, p.c_eta, p.lam, p.beta))
    fL = (kap * L / mpmath.sqrt((kap * L) ** 2 + cL)) ** (lam + p0)
    feta = mpmath.e ** (-beta * (((kap * eta) ** 4 + ceta**4) ** mpmath.mpf(0.25) - ceta))
    ref = float(kap ** (-lam) * fL * feta)
    err = abs(float(shaping_factor(1.0, p)) - ref)
    ok = abs(re / 13900 - 1) <= 0.01 and n_gates == 1122 and err <= 1e-12
    criteria.record(8, ok, f"Re(1, 1280) = {re:.0f} (13900 +- 1%); gates {n_gates} (1122); shaping_factor(1) = {ref:.12f}, error {err:.1e} (<= 1e-12)")
    assert ok


# -- 9 ------------------------------------------------------------------------

def test_c9_determinism(criteria, tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        assert main(["all", "--config", "reduced_18", "--out", str(d)]) == 0
    files = sorted(p.name for p in dirs[0].iterdir() if p.suffix in (".bin", ".csv"))
    differ = [f for f in files if (dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes()]
    ok = bool(files) and not differ and files == sorted(p.name for p in dirs[1].iterdir() if p.suffix in (".bin", ".csv"))
    criteria.record(9, ok, f"{len(files)} dumps and CSVs compared, {len(differ)} differ{': ' + ', '.join(differ) if differ else ''}")
    assert ok
