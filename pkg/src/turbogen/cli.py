"""Command-line pipeline: generate -> measure -> diagnose, plus verify and export-circuit."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, diagnostics as dg
from .circuit import build_circuit
from .config import RunConfig, load_config
from .errors import ConfigError, DomainError, DumpError, UnphysicalFieldError
from .io import read_dump, write_dump
from .madelung import compute_fields, to_spectral
from .simulator import NormAudit, SpinorField, run

log = logging.getLogger("turbogen")

MEMORY_CAP_ENV = "TURBOGEN_MEMORY_CAP_GB"
NORM_TOL = 1e-10
# peak working set per grid point, in units of one complex amplitude
_STAGE_FOOTPRINT = {"generate": 2.2, "measure": 10.0, "diagnose": 9.0}


def memory_cap_bytes() -> float:
    env = os.environ.get(MEMORY_CAP_ENV)
    if env:
        try:
            return float(env) * 2**30
        except ValueError:
            raise ConfigError(f"{MEMORY_CAP_ENV}={env!r} is not a number") from None
    try:
        return 0.8 * os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES")
    except (ValueError, OSError, AttributeError):
        return math.inf


def estimate_memory(stage: str, n_q: int, precision: str) -> float:
    amp = 16 if precision == "double" else 8
    if stage != "generate":
        amp = 16  # downstream stages work in double regardless of dump precision
    return _STAGE_FOOTPRINT[stage] * (1 << n_q) * amp


def guard_memory(stage: str, cfg: RunConfig) -> None:
    need = estimate_memory(stage, cfg.grid.n_q, cfg.precision)
    cap = memory_cap_bytes()
    if need > cap:
        raise ConfigError(
            f"{stage} at n_q={cfg.grid.n_q} ({cfg.precision}) needs about {need / 2**30:.1f} GiB, "
            f"over the {cap / 2**30:.1f} GiB cap (set {MEMORY_CAP_ENV} to change it)"
        )


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(type(x))


def _run_meta(cfg: RunConfig) -> dict:
    return {
        "config": cfg.source,
        "seed_up": cfg.seed_up,
        "seed_down": cfg.seed_down,
        "precision": cfg.precision,
        "version": __version__,
    }


# -- generate -----------------------------------------------------------------

def cmd_generate(cfg: RunConfig) -> dict:
    guard_memory("generate", cfg)
    out = cfg.output_dir
    dtype = np.complex128 if cfg.precision == "double" else np.complex64
    report = {"n_q": cfg.grid.n_q, "stage_seconds": {}}
    for spin, name in (("up", "psi_plus"), ("down", "psi_minus")):
        t0 = time.perf_counter()
        gates = build_circuit(cfg.circuit_spec(spin))
        _write_text(out / f"circuit_{spin}.txt", gates.to_text())
        audit = NormAudit()
        state = run(gates, cfg.grid.n_q, dtype=dtype, audit=audit, audit_every=cfg.grid.n_q * cfg.r)
        tol = NORM_TOL if cfg.precision == "double" else 1e-5
        if abs(audit.final_norm - 1.0) > tol:
            raise UnphysicalFieldError(f"spin-{spin} norm drifted to {audit.final_norm!r}")
        write_dump(out / f"{name}.bin", name, cfg.grid.to_array(state.amplitudes), cfg.grid, cfg.precision,
                   {**_run_meta(cfg), "norm": audit.final_norm, "gates": gates.counts()})
        report[f"norm_{spin}"] = audit.final_norm
        report[f"max_gate_drift_{spin}"] = audit.max_gate_drift
        report["gates"] = gates.counts()
        report["stage_seconds"][spin] = time.perf_counter() - t0
        del state
    _write_json(out / "generate.json", report)
    return report


# -- measure ------------------------------------------------------------------

def _load_spinor(cfg: RunConfig) -> SpinorField:
    out = cfg.output_dir
    up = read_dump(out / "psi_plus.bin", cfg.grid, "psi_plus")
    down = read_dump(out / "psi_minus.bin", cfg.grid, "psi_minus")
    return SpinorField(up.data[0].astype(np.complex128), down.data[0].astype(np.complex128), cfg.grid)


def support_radius(coeffs: np.ndarray, grid, mass: float = 0.99) -> float:
    """Radius about the power-weighted centroid that encloses ``mass`` of ``|c|^2``.

    Measuring from the centroid keeps an off-origin cube and a centred ball
    comparable.
    """
    power = (coeffs.real**2 + coeffs.imag**2).ravel()
    total = power.sum()
    if total <= 0:
        return 0.0
    ks = np.meshgrid(*(grid.wavenumbers(a).astype(np.float64) for a in range(grid.d)), indexing="ij")
    dist2 = np.zeros(power.shape)
    for k in ks:
        k = k.ravel()
        dist2 += (k - np.dot(power, k) / total) ** 2
    order = np.argsort(dist2, kind="stable")
    cum = np.cumsum(power[order]) / total
    return float(np.sqrt(dist2[order][min(np.searchsorted(cum, mass), len(cum) - 1)]))


def octant_fraction(coeffs: np.ndarray, grid) -> float:
    """Spectral mass inside the positive-wavenumber octant ``[0, N/2)^d``."""
    idx = tuple(slice(0, n // 2) for n in grid.extent)
    return float(np.sum(np.abs(coeffs[idx]) ** 2) / np.sum(np.abs(coeffs) ** 2))


def cmd_measure(cfg: RunConfig) -> dict:
    guard_memory("measure", cfg)
    out = cfg.output_dir
    grid = cfg.grid
    spinor = _load_spinor(cfg)
    stage1 = dg.shell_spectrum(spinor.psi_plus, grid, "psi_plus")
    stage1_m = dg.shell_spectrum(spinor.psi_minus, grid, "psi_minus")
    octant = min(octant_fraction(spinor.psi_plus, grid), octant_fraction(spinor.psi_minus, grid))
    r1 = support_radius(spinor.psi_plus, grid)
    fields = compute_fields(spinor, spin2_sign=cfg.diagnostics.spin2_sign)
    del spinor
    meta = _run_meta(cfg)
    rho_hat = to_spectral(fields.rho)
    reality = float(np.max(np.abs(np.fft.ifftn(rho_hat, norm="forward").imag)))
    stage2 = dg.shell_spectrum(rho_hat, grid, "rho")
    r2 = support_radius(rho_hat, grid)
    stage3 = dg.energy_spectrum(fields.u, grid, "u") if grid.d == 3 else None
    for name in cfg.observables:
        write_dump(out / f"{name}.bin", name, getattr(fields, name), grid, cfg.precision, meta)
    if "rho" in cfg.observables:
        write_dump(out / "rho_hat.bin", "rho_hat", rho_hat, grid, cfg.precision, meta)
    del rho_hat
    if "J" in cfg.observables:
        write_dump(out / "J_hat.bin", "J_hat", fields.spectral("J"), grid, cfg.precision, meta)
    rows = ["k,psi_plus,psi_minus,rho" + (",u" if stage3 is not None else "")]
    for i in range(len(stage1.k)):
        vals = [stage1.E[i], stage1_m.E[i], stage2.E[i] if i < len(stage2.E) else 0.0]
        if stage3 is not None:
            vals.append(stage3.E[i] if i < len(stage3.E) else 0.0)
        rows.append(f"{i}," + ",".join(f"{v:.17g}" for v in vals))
    _write_text(out / "spectra_stages.csv", "\n".join(rows) + "\n")
    report = {
        "rho_mean": float(fields.rho.mean()),
        "rho_min": float(fields.rho.min()),
        "reality_residual": reality,
        "regularized_points": fields.regularized_points,
        "stage1_octant_fraction": octant,
        "support_radius_stage1": r1,
        "support_radius_stage2": r2,
        "support_ratio": r2 / r1 if r1 > 0 else math.inf,
        "spin2_sign": fields.spin2_sign,
    }
    _write_json(out / "measure.json", report)
    return report


# -- diagnose -----------------------------------------------------------------

def _default_fit_range(grid) -> tuple[float, float]:
    n = min(grid.extent)
    return (n / 40.0, n / 4.0)


def _safe_fit(spec, fit_range):
    try:
        return dg.fit_power_law(spec, fit_range).as_dict()
    except DomainError as exc:
        return {"error": str(exc)}


def cmd_diagnose(cfg: RunConfig) -> dict:
    guard_memory("diagnose", cfg)
    grid = cfg.grid
    if grid.d != 3:
        raise ConfigError("diagnose needs a 3D grid")
    out = cfg.output_dir
    d = cfg.diagnostics
    u = read_dump(out / "u.bin", grid, "u").data.astype(np.float64)
    s = read_dump(out / "s.bin", grid, "s").data.astype(np.float64) if d.spin_vorticity or d.spectra else None
    fit_range = d.fit_range or _default_fit_range(grid)
    summary: dict = {"fit_range": list(fit_range), "n_alpha": list(grid.n_alpha)}

    E_u = dg.energy_spectrum(u, grid, "u")
    if d.spectra:
        spectra = [E_u] + [dg.energy_spectrum(s[i], grid, f"s{i + 1}") for i in range(3)]
        rows = ["k," + ",".join(sp.label for sp in spectra)]
        for i in range(len(E_u.k)):
            rows.append(f"{i}," + ",".join(f"{sp.E[i]:.17g}" for sp in spectra))
        _write_text(out / "spectra.csv", "\n".join(rows) + "\n")
        summary["slope_u"] = _safe_fit(E_u, fit_range)
        summary["slope_s"] = [_safe_fit(sp, fit_range) for sp in spectra[1:]]
    if E_u.total > 0:
        k_peak = dg.peak_enstrophy_wavenumber(E_u)
        k_eta = d.k_eta_factor * k_peak
        summary["k_peak"] = k_peak
        summary["k_eta"] = k_eta
        try:
            summary["reynolds"] = dg.reynolds_estimate(d.k_L, k_eta)
        except DomainError as exc:
            summary["reynolds"] = None
            summary["reynolds_error"] = str(exc)

    omega = dg.vorticity_from_velocity(u, grid)
    if d.spin_vorticity and s is not None:
        w_s = dg.vorticity_from_spin(s, grid)
        den = float(np.linalg.norm(omega))
        summary["spin_vorticity_rel_l2"] = float(np.linalg.norm(w_s - omega) / den) if den > 0 else 0.0
        del w_s
    del s
    h = dg.helicity_density(u, omega)
    summary["helicity_mean"] = float(h.mean())
    summary["relative_helicity_mean"] = float(
        np.mean(h / np.maximum(np.sqrt(np.sum(u * u, axis=0) * np.sum(omega * omega, axis=0)), 1e-300))
    )
    del h
    if d.vorticity_pdf:
        try:
            pdf = dg.vorticity_pdf(omega, bins=d.pdf_bins)
            _write_text(out / "vorticity_pdf.csv", pdf.to_csv())
            summary["vorticity_pdf"] = {
                "omega_prime": pdf.omega_prime,
                "c": pdf.c,
                "beta_fit": pdf.beta,
                "log_prefactor": pdf.log_prefactor,
                "tail_samples": pdf.tail_samples,
                "reliable": pdf.reliable,
                "tail_range": list(pdf.tail_range),
                "excess_kurtosis": pdf.excess_kurtosis,
            }
        except DomainError as exc:
            summary["vorticity_pdf"] = {"error": str(exc)}
    del omega
    if d.qr:
        qr = dg.qr_invariants(u, grid, bins=d.qr_bins)
        _write_text(out / "qr_joint_pdf.csv", qr.to_csv())
        ov = qr.overlay
        _write_text(
            out / "qr_overlay.csv",
            "R,vieillefosse_Q\n" + "".join(f"{r:.17g},{q:.17g}\n" for r, q in zip(ov["R"], ov["vieillefosse_Q"])),
        )
        summary["qr"] = {
            "skewness_R": qr.skewness_R,
            "skewness_R_raw": qr.skewness_R_raw,
            "scale_Qw": qr.scale,
            "outside_fraction": qr.outside_fraction,
        }
        del qr
    if d.structure_functions:
        sf = dg.structure_functions(u, grid, samples=d.sf_samples, seed=d.sf_seed, fit_range=d.sf_fit_range)
        _write_text(out / "structure_functions.csv", sf.to_csv())
        summary["structure_functions"] = {
            "fit_range": list(sf.fit_range),
            "samples": sf.samples,
            "fits": {str(p): f.as_dict() for p, f in sf.fits.items()},
            "sl94": {str(p): float(dg.sl94_exponent(p)) for p in sf.orders},
            "k41": {str(p): float(dg.k41_exponent(p)) for p in sf.orders},
        }
    _write_json(out / "summary.json", summary)
    _write_text(out / "summary.txt", _summary_text(summary))
    return summary


def _summary_text(s: dict) -> str:
    lines = [f"grid {s['n_alpha']}  fit range k in [{s['fit_range'][0]:g}, {s['fit_range'][1]:g}]"]
    su = s.get("slope_u", {})
    if "exponent" in su:
        lines.append(f"energy spectrum slope {su['exponent']:.4f} +- {su['stderr']:.4f}")
    if s.get("slope_s"):
        sl = [x.get("exponent") for x in s["slope_s"]]
        lines.append("spin spectrum slopes " + " ".join("n/a" if v is None else f"{v:.4f}" for v in sl))
    if "reynolds" in s:
        re = s["reynolds"]
        lines.append(f"k_peak {s['k_peak']}  k_eta {s['k_eta']:g}  Re {'n/a' if re is None else f'{re:.0f}'}")
    vp = s.get("vorticity_pdf", {})
    if "beta_fit" in vp:
        lines.append(f"vorticity tail: c {vp['c']:.4g} beta_fit {vp['beta_fit']:.4f} kurtosis {vp['excess_kurtosis']:.4g}"
                     f"{'' if vp['reliable'] else ' (unreliable)'}")
    if "qr" in s:
        lines.append(f"R skewness {s['qr']['skewness_R']:.4f} (all points {s['qr']['skewness_R_raw']:.4f})")
    if "structure_functions" in s:
        z = s["structure_functions"]["fits"]
        lines.append("zeta_p " + " ".join(f"{p}:{f['exponent']:.4f}" for p, f in z.items()))
    if "spin_vorticity_rel_l2" in s:
        lines.append(f"spin-vorticity vs curl u rel L2 {s['spin_vorticity_rel_l2']:.3e}")
    return "\n".join(lines) + "\n"


# -- verify / export ----------------------------------------------------------

def cmd_verify(cfg: RunConfig | None, n_max: int, mutation: str | None, seed: int = 0):
    from .verify import run_checks

    report = run_checks(n_max=n_max, seed=seed, mutation=mutation)
    if cfg is not None:
        _write_text(cfg.output_dir / "verify.txt", report.text())
    return report


def cmd_export_circuit(cfg: RunConfig) -> list[Path]:
    paths = []
    for spin in ("up", "down"):
        gates = build_circuit(cfg.circuit_spec(spin))
        p = cfg.output_dir / f"circuit_{spin}.txt"
        _write_text(p, gates.to_text())
        paths.append(p)
    return paths


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="turbogen", description="Quantum-encoded turbulent field generator")
    parser.add_argument("--version", action="version", version=f"turbogen {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="TOML file or bundled preset (table_s1, reduced_24, reduced_21, reduced_18)")
        p.add_argument("--seed-up", type=int)
        p.add_argument("--seed-down", type=int)
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--precision", choices=("single", "double"))

    for name, help_ in (
        ("generate", "run both spin circuits and dump the spinor"),
        ("measure", "compute rho, J, u, s and the three-stage spectra"),
        ("diagnose", "spectra, vorticity PDF, Q-R, structure functions, Re"),
        ("export-circuit", "write both gate lists"),
        ("all", "generate, measure and diagnose"),
    ):
        common(sub.add_parser(name, help=help_))
    pv = sub.add_parser("verify", help="conformance checks against exact oracles")
    common(pv, config_required=False)
    pv.add_argument("--max-qubits", type=int, default=6)
    pv.add_argument("--inject", choices=("momentum-sign", "cx-swap"), help="corrupt one leg to prove the checks bite")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = None
        if args.config:
            cfg = load_config(args.config).with_overrides(args.seed_up, args.seed_down, args.out, args.precision)
        if args.command == "verify":
            report = cmd_verify(cfg, args.max_qubits, args.inject)
            sys.stdout.write(report.text())
            return 0 if report.passed else 1
        if args.command == "export-circuit":
            for p in cmd_export_circuit(cfg):
                print(p)
            return 0
        stages = ("generate", "measure", "diagnose") if args.command == "all" else (args.command,)
        for stage in stages:
            t0 = time.perf_counter()
            result = {"generate": cmd_generate, "measure": cmd_measure, "diagnose": cmd_diagnose}[stage](cfg)
            log.info("%s finished in %.1f s", stage, time.perf_counter() - t0)
            if stage == "diagnose":
                sys.stdout.write(_summary_text(result))
        return 0
    except (ConfigError, DumpError, DomainError, UnphysicalFieldError) as exc:
        print(f"turbogen: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
