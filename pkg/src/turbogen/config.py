"""Run configuration: TOML schema, validation and the bundled presets."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .circuit import CircuitSpec, ShapingParams, TABLE_S1_PAIRS, rescale_pairs
from .errors import ConfigError
from .lattice import GridSpec

__all__ = ["RunConfig", "DiagnosticsConfig", "load_config", "parse_config", "bundled_config_path", "PRESETS", "render_config"]

PRESETS = {
    "table_s1": "table_s1.toml",
    "reduced_24": "reduced_24.toml",
    "reduced_21": "reduced_21.toml",
    "reduced_18": "reduced_18.toml",
}

_SCHEMA: dict[str, dict[str, tuple[type, ...]]] = {
    "grid": {"n_alpha": (list,), "domain_length": (int, float, list)},
    "shaping": {k: (int, float) for k in ("lambda", "L", "c_L", "p0", "eta", "c_eta", "beta")},
    "circuit": {"R": (int,), "r": (int,), "seed_up": (int,), "seed_down": (int,), "allow_equal_seeds": (bool,)},
    "diagnostics": {
        "spectra": (bool,),
        "vorticity_pdf": (bool,),
        "qr": (bool,),
        "structure_functions": (bool,),
        "spin_vorticity": (bool,),
        "fit_range": (list,),
        "sf_samples": (int,),
        "sf_seed": (int,),
        "sf_fit_range": (list,),
        "pdf_bins": (int,),
        "qr_bins": (int,),
        "k_L": (int, float),
        "k_eta_factor": (int, float),
        "spin2_sign": (int,),
    },
    "output": {"directory": (str,), "precision": (str,), "observables": (list,)},
}
_REQUIRED = {
    "grid": ("n_alpha",),
    "shaping": ("lambda", "L", "c_L", "p0", "eta", "c_eta", "beta"),
    "circuit": ("R", "r", "seed_up", "seed_down"),
}
_OBSERVABLES = ("rho", "J", "u", "s")


@dataclass(frozen=True)
class DiagnosticsConfig:
    spectra: bool = True
    vorticity_pdf: bool = True
    qr: bool = True
    structure_functions: bool = True
    spin_vorticity: bool = True
    fit_range: tuple[float, float] | None = None
    sf_samples: int = 100_000
    sf_seed: int = 0
    sf_fit_range: tuple[float, float] | None = None
    pdf_bins: int = 201
    qr_bins: int = 100
    k_L: float = 1.0
    k_eta_factor: float = 5.0
    spin2_sign: int = -1


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    shaping: ShapingParams
    R: int
    r: int
    pair_sets: tuple
    seed_up: int
    seed_down: int
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output_dir: Path = Path("turbogen-out")
    precision: str = "double"
    observables: tuple[str, ...] = _OBSERVABLES
    source: str = ""

    def circuit_spec(self, spin: str) -> CircuitSpec:
        seed = {"up": self.seed_up, "down": self.seed_down}[spin]
        return CircuitSpec(self.grid, self.R, self.r, self.pair_sets, self.shaping, seed)

    def with_overrides(self, seed_up=None, seed_down=None, output_dir=None, precision=None) -> "RunConfig":
        cfg = replace(
            self,
            seed_up=self.seed_up if seed_up is None else int(seed_up),
            seed_down=self.seed_down if seed_down is None else int(seed_down),
            output_dir=self.output_dir if output_dir is None else Path(output_dir),
            precision=self.precision if precision is None else precision,
        )
        _check_run(cfg, allow_equal=seed_up is not None and seed_up == seed_down)
        return cfg


def _check_run(cfg: RunConfig, allow_equal: bool = False) -> None:
    if cfg.precision not in ("single", "double"):
        raise ConfigError(f"output.precision: expected 'single' or 'double', got {cfg.precision!r}")
    if cfg.seed_up == cfg.seed_down and not allow_equal:
        raise ConfigError("circuit.seed_up and circuit.seed_down must differ (set circuit.allow_equal_seeds = true)")


def _pairs_from(raw: Any, path: str) -> tuple[tuple[int, int], ...]:
    if not isinstance(raw, list):
        raise ConfigError(f"{path}: expected a list of [control, target] pairs")
    out = []
    for i, item in enumerate(raw):
        if not (isinstance(item, list) and len(item) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in item)):
            raise ConfigError(f"{path}[{i}]: expected [control, target] integers, got {item!r}")
        a, b = item
        if a < 1 or b < 1:
            raise ConfigError(f"{path}[{i}]: qubit indices are 1-based, got ({a}, {b})")
        out.append((a, b))
    return tuple(out)


def _typed(section: str, key: str, value: Any) -> Any:
    allowed = _SCHEMA[section][key]
    if isinstance(value, bool) and bool not in allowed:
        raise ConfigError(f"{section}.{key}: expected {'/'.join(t.__name__ for t in allowed)}, got bool")
    if not isinstance(value, allowed):
        raise ConfigError(f"{section}.{key}: expected {'/'.join(t.__name__ for t in allowed)}, got {type(value).__name__}")
    return value


def parse_config(data: dict, source: str = "<dict>") -> RunConfig:
    """Validate a parsed TOML document and build a :class:`RunConfig`."""
    known = set(_SCHEMA) | {"pairs"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    problems = []
    for section, keys in _REQUIRED.items():
        if section not in data:
            problems.append(f"missing section [{section}] (keys: {', '.join(keys)})")
            continue
        missing = [k for k in keys if k not in data[section]]
        if missing:
            problems.append(f"[{section}] missing key(s): {', '.join(f'{section}.{k}' for k in missing)}")
    for section, table in data.items():
        if section == "pairs":
            continue
        if not isinstance(table, dict):
            problems.append(f"{section}: expected a table")
            continue
        extra = sorted(set(table) - set(_SCHEMA[section]))
        if extra:
            problems.append(f"unknown key(s): {', '.join(f'{section}.{k}' for k in extra)}")
    if problems:
        raise ConfigError("; ".join(problems))

    g = data["grid"]
    n_alpha = _typed("grid", "n_alpha", g["n_alpha"])
    if not n_alpha or not all(isinstance(n, int) and not isinstance(n, bool) and n > 0 for n in n_alpha):
        raise ConfigError(f"grid.n_alpha: expected positive integers, got {n_alpha!r}")
    length = _typed("grid", "domain_length", g.get("domain_length", 2 * math.pi))
    grid = GridSpec(n_alpha, length)

    s = {k: float(_typed("shaping", k, v)) for k, v in data["shaping"].items()}
    shaping = ShapingParams(lam=s["lambda"], L=s["L"], c_L=s["c_L"], p0=s["p0"], eta=s["eta"], c_eta=s["c_eta"], beta=s["beta"])

    c = {k: _typed("circuit", k, v) for k, v in data["circuit"].items()}
    R, r = c["R"], c["r"]
    pairs_table = data.get("pairs", {})
    if not isinstance(pairs_table, dict):
        raise ConfigError("pairs: expected tables [pairs.1] ... [pairs.R]")
    expected = {str(i) for i in range(1, R + 1)}
    if set(pairs_table) != expected:
        raise ConfigError(
            f"pairs: expected sections {sorted(expected, key=int)}, got {sorted(pairs_table, key=lambda x: (len(x), x))}"
        )
    pair_sets = []
    for i in range(1, R + 1):
        block = pairs_table[str(i)]
        if not isinstance(block, dict) or set(block) != {"pairs"}:
            raise ConfigError(f"pairs.{i}: expected exactly one key 'pairs'")
        pair_sets.append(_pairs_from(block["pairs"], f"pairs.{i}.pairs"))
    # CircuitSpec validates index ranges against n_q
    CircuitSpec(grid, R, r, tuple(pair_sets), shaping, 0)

    dd = {k: _typed("diagnostics", k, v) for k, v in data.get("diagnostics", {}).items()}
    for key in ("fit_range", "sf_fit_range"):
        if key in dd:
            v = dd[key]
            if len(v) != 2 or not all(isinstance(x, (int, float)) for x in v) or not 0 < v[0] < v[1]:
                raise ConfigError(f"diagnostics.{key}: expected [lo, hi] with 0 < lo < hi, got {v!r}")
            dd[key] = (float(v[0]), float(v[1]))
    if dd.get("spin2_sign", -1) not in (1, -1):
        raise ConfigError("diagnostics.spin2_sign must be 1 or -1")
    diagnostics = DiagnosticsConfig(**dd)

    o = {k: _typed("output", k, v) for k, v in data.get("output", {}).items()}
    observables = tuple(o.get("observables", _OBSERVABLES))
    bad = [x for x in observables if x not in _OBSERVABLES]
    if bad:
        raise ConfigError(f"output.observables: unknown observable(s) {bad}; choose from {list(_OBSERVABLES)}")
    cfg = RunConfig(
        grid=grid,
        shaping=shaping,
        R=R,
        r=r,
        pair_sets=tuple(pair_sets),
        seed_up=c["seed_up"],
        seed_down=c["seed_down"],
        diagnostics=diagnostics,
        output_dir=Path(o.get("directory", "turbogen-out")),
        precision=o.get("precision", "double"),
        observables=observables,
        source=source,
    )
    _check_run(cfg, allow_equal=bool(c.get("allow_equal_seeds", False)))
    return cfg


def bundled_config_path(name: str = "table_s1") -> Path:
    return Path(str(resources.files("turbogen") / "data" / PRESETS[name]))


def load_config(path: str | os.PathLike) -> RunConfig:
    """Read a TOML run configuration. ``path`` may also name a bundled preset."""
    if str(path) in PRESETS:
        path = bundled_config_path(str(path))
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        with p.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return parse_config(data, source=str(p))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, str):
        return '"' + v + '"'
    return str(v)


def render_config(cfg: RunConfig, header: str = "") -> str:
    """Serialize a RunConfig back to the TOML schema."""
    sh = cfg.shaping
    lines = [f"# {line}" for line in header.splitlines()] + [""] if header else []
    lines += ["[grid]", f"n_alpha = {_fmt(list(cfg.grid.n_alpha))}"]
    lengths = set(cfg.grid.domain_length)
    lines.append(f"domain_length = {_fmt(lengths.pop() if len(lengths) == 1 else list(cfg.grid.domain_length))}")
    lines += ["", "[shaping]"]
    for key, val in (("lambda", sh.lam), ("L", sh.L), ("c_L", sh.c_L), ("p0", sh.p0), ("eta", sh.eta), ("c_eta", sh.c_eta), ("beta", sh.beta)):
        lines.append(f"{key} = {_fmt(float(val))}")
    lines += ["", "[circuit]", f"R = {cfg.R}", f"r = {cfg.r}", f"seed_up = {cfg.seed_up}", f"seed_down = {cfg.seed_down}"]
    for i, ps in enumerate(cfg.pair_sets, start=1):
        lines += ["", f"[pairs.{i}]", "pairs = [" + ", ".join(f"[{a}, {b}]" for a, b in ps) + "]"]
    d = cfg.diagnostics
    lines += ["", "[diagnostics]"]
    for key in DiagnosticsConfig.__dataclass_fields__:
        val = getattr(d, key)
        if val is not None:
            lines.append(f"{key} = {_fmt(list(val) if isinstance(val, tuple) else val)}")
    lines += [
        "",
        "[output]",
        f"directory = {_fmt(str(cfg.output_dir))}",
        f"precision = {_fmt(cfg.precision)}",
        f"observables = {_fmt(list(cfg.observables))}",
    ]
    return "\n".join(lines) + "\n"


def table_s1_config() -> RunConfig:
    """The 27-qubit circuit parameters, built in code (used to generate the presets)."""
    grid = GridSpec((9, 9, 9))
    shaping = ShapingParams(lam=5 / 3, L=2 * math.pi, c_L=1.0, p0=2.0, eta=0.01, c_eta=0.01, beta=15.0)
    return RunConfig(grid, shaping, 4, 10, TABLE_S1_PAIRS, seed_up=1, seed_down=1001,
                     diagnostics=DiagnosticsConfig(fit_range=(4.0, 64.0)))


def reduced_config(n_per_dir: int, shaping: ShapingParams | None = None, fit_range=None) -> RunConfig:
    base = table_s1_config()
    grid = GridSpec((n_per_dir,) * 3)
    return replace(
        base,
        grid=grid,
        shaping=shaping or base.shaping,
        pair_sets=rescale_pairs(base.pair_sets, grid.n_alpha),
        diagnostics=replace(base.diagnostics, fit_range=fit_range),
    )
