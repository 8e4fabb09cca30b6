"""Run configuration: INI-style ``[section]`` blocks of ``key = value`` lines.

Unknown keys, missing required keys and unparsable values are hard errors
that name the key and its line.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .eom import ConversionSystem
from .fock import MAX_BASIS_SIZE, BasisTooLargeError, basis_size, enumerate_basis
from .grid import DimensionError, OneBodyOperatorSpec, SpatialGrid, potential_from_text
from .operators import InteractionSpec
from .propagation import IntegratorConfig


class ConfigError(ValueError):
    pass


_REQUIRED = object()


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class SystemConfig:
    N: int = _REQUIRED
    M: int = _REQUIRED
    M_mol: int = _REQUIRED
    n_points: int = _REQUIRED
    length: float = _REQUIRED
    mass_a: float = 1.0
    mass_m: float = 2.0
    trap_a: str = "harmonic(1)"
    trap_m: str = "harmonic(1)"
    offset_a: float = 0.0
    offset_m: float = 0.0
    interaction: str = "contact"
    lambda_a: float = 0.0
    lambda_m: float = 0.0
    lambda_am: float = 0.0
    lambda_con: float = 0.0
    kernel_a: str = "delta"
    kernel_m: str = "delta"
    kernel_am: str = "delta"
    kernel_conv: str = "delta"
    eps: float = 1e-8


@dataclass(frozen=True)
class IntegratorSection:
    scheme: str = "rk4"
    dt: float = 1e-3
    t_final: float = 1.0
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    record_every: int = 1
    freeze_orbitals: bool = False
    tol_energy: float = 1e-10
    tol_orbital: float = 1e-8
    max_iter: int = 100000


@dataclass(frozen=True)
class InitialSection:
    orbitals: str = "trap"           # trap | restart
    coefficients: str = "all_atoms"  # all_atoms | restart
    restart: str = ""


@dataclass(frozen=True)
class OutputSection:
    dir: str = "output"
    density_every: int = 0           # density snapshot every k records, 0 = never
    dump_matrices: bool = False


_SECTIONS = {
    "system": SystemConfig,
    "integrator": IntegratorSection,
    "initial": InitialSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    initial: InitialSection = field(default_factory=InitialSection)
    output: OutputSection = field(default_factory=OutputSection)
    mode: str = "propagate"
    base_dir: Path = field(default=Path("."), compare=False)

    def resolved_items(self) -> list[tuple[str, str, object]]:
        """(section, key, value) for every setting, defaults included."""
        out = []
        for name in _SECTIONS:
            section = getattr(self, name)
            for f in fields(section):
                out.append((name, f.name, getattr(section, f.name)))
        return out

    def header_lines(self) -> list[str]:
        lines = [f"mode = {self.mode}"]
        current = None
        for section, key, value in self.resolved_items():
            if section != current:
                lines.append(f"[{section}]")
                current = section
            lines.append(f"{key} = {_format(value)}")
        return lines

    def as_dict(self) -> dict:
        out = {"mode": self.mode}
        for section, key, value in self.resolved_items():
            out.setdefault(section, {})[key] = value
        return out

    def with_mode(self, mode: str) -> "RunConfig":
        if mode not in ("relax", "propagate", "validate"):
            raise ConfigError(f"unknown mode {mode!r}")
        return RunConfig(self.system, self.integrator, self.initial, self.output, mode, self.base_dir)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _line_of(lines: list[str], section: str, key: str) -> int | None:
    current = None
    pattern = re.compile(r"^\s*([^=:\s][^=:]*?)\s*[=:]")
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
            continue
        match = pattern.match(line)
        if match and current == section and match.group(1) == key:
            return number
    return None


def parse_config_text(text: str, base_dir: Path = Path("."), source: str = "<config>") -> RunConfig:
    lines = text.splitlines()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    def where(section, key):
        line = _line_of(lines, section, key)
        return f"{source}:{line}" if line else source

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")

    built = {}
    for name, cls in _SECTIONS.items():
        known = {f.name: f for f in fields(cls)}
        values = {}
        items = parser[name] if parser.has_section(name) else {}
        for key in items:
            if key not in known:
                raise ConfigError(f"{where(name, key)}: unknown key '{key}' in [{name}]")
            raw = items[key]
            kind = known[key].type
            try:
                if kind == "int":
                    values[key] = int(raw)
                elif kind == "float":
                    values[key] = float(raw)
                elif kind == "bool":
                    values[key] = _bool(raw)
                else:
                    values[key] = raw.strip()
            except ValueError:
                raise ConfigError(
                    f"{where(name, key)}: key '{key}' expects {kind}, got {raw!r}") from None
        for key, f in known.items():
            if f.default is _REQUIRED and key not in values:
                raise ConfigError(f"{source}: missing required key '{key}' in [{name}]")
        built[name] = cls(**values)

    cfg = RunConfig(built["system"], built["integrator"], built["initial"], built["output"],
                    base_dir=base_dir)
    validate_config(cfg)
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    return parse_config_text(path.read_text(), base_dir=path.parent, source=str(path))


def validate_config(cfg: RunConfig) -> None:
    s = cfg.system
    if s.N < 1 or s.M < 1 or s.M_mol < 1:
        raise ConfigError(f"need N, M, M_mol >= 1 (got {s.N}, {s.M}, {s.M_mol})")
    size = basis_size(s.N, s.M, s.M_mol)
    if size > MAX_BASIS_SIZE:
        raise ConfigError(f"basis size {size} exceeds the limit {MAX_BASIS_SIZE}")
    if s.interaction not in ("contact", "general"):
        raise ConfigError(f"interaction must be 'contact' or 'general', got {s.interaction!r}")
    if not s.eps > 0:
        raise ConfigError("eps must be positive")
    it = cfg.integrator
    if it.scheme not in ("rk4", "rk45"):
        raise ConfigError(f"scheme must be rk4 or rk45, got {it.scheme!r}")
    if not it.dt > 0 or not it.dt <= it.t_final:
        raise ConfigError(f"need 0 < dt <= t_final (dt={it.dt}, t_final={it.t_final})")
    if it.record_every < 1:
        raise ConfigError("record_every must be >= 1")
    ini = cfg.initial
    if ini.orbitals not in ("trap", "restart") or ini.coefficients not in ("all_atoms", "restart"):
        raise ConfigError("initial orbitals must be trap|restart, coefficients all_atoms|restart")
    if "restart" in (ini.orbitals, ini.coefficients):
        if not ini.restart:
            raise ConfigError("restart requested but [initial] restart file not given")
        if not resolve_path(cfg, ini.restart).exists():
            raise ConfigError(f"restart file {ini.restart!r} does not exist")


def resolve_path(cfg: RunConfig, text: str) -> Path:
    path = Path(text)
    return path if path.is_absolute() else cfg.base_dir / path


_GAUSSIAN = re.compile(r"^\s*gaussian\(\s*([^)]+?)\s*\)\s*$")


def kernel_from_text(grid: SpatialGrid, text: str, strength: float, base_dir: Path) -> np.ndarray:
    """Kernel matrix K[i, j] including its strength.

    ``delta`` is strength * I / dx; ``gaussian(sigma)`` is a unit-area
    Gaussian of x_i - x_j; anything else is a file with an n x n matrix.
    """
    n = grid.n_points
    if text.strip().lower() == "delta":
        return strength * np.eye(n) / grid.spacing
    match = _GAUSSIAN.match(text)
    if match:
        sigma = float(match.group(1))
        d = grid.points[:, None] - grid.points[None, :]
        return strength * np.exp(-0.5 * (d / sigma) ** 2) / (np.sqrt(2 * np.pi) * sigma)
    path = Path(text.strip())
    if not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise ConfigError(f"kernel {text!r} is neither delta, gaussian(sigma) nor a file")
    mat = np.loadtxt(path, ndmin=2)
    if mat.shape != (n, n):
        raise DimensionError(f"kernel file {path} has shape {mat.shape}, expected ({n}, {n})")
    return strength * mat


def build_system(cfg: RunConfig) -> ConversionSystem:
    s = cfg.system
    grid = SpatialGrid(s.n_points, s.length)
    h_a = OneBodyOperatorSpec(grid, s.mass_a, potential_from_text(grid, s.trap_a, s.mass_a, cfg.base_dir),
                              s.offset_a)
    h_m = OneBodyOperatorSpec(grid, s.mass_m, potential_from_text(grid, s.trap_m, s.mass_m, cfg.base_dir),
                              s.offset_m)
    lams = dict(lambda_a=s.lambda_a, lambda_m=s.lambda_m, lambda_am=s.lambda_am, lambda_con=s.lambda_con)
    if s.interaction == "contact":
        interaction = InteractionSpec("contact", **lams)
    else:
        kernels = {
            name: kernel_from_text(grid, getattr(s, f"kernel_{name}"), lam, cfg.base_dir)
            for name, lam in zip(("a", "m", "am", "conv"), lams.values())
        }
        interaction = InteractionSpec("general", **lams, kernels=kernels)
    try:
        basis = enumerate_basis(s.N, s.M, s.M_mol)
    except BasisTooLargeError as exc:
        raise ConfigError(str(exc)) from None
    return ConversionSystem(basis, h_a, h_m, interaction, s.eps)


def integrator_config(cfg: RunConfig) -> IntegratorConfig:
    it = cfg.integrator
    return IntegratorConfig(scheme=it.scheme, dt=it.dt, t_final=it.t_final, abs_tol=it.abs_tol,
                            rel_tol=it.rel_tol, freeze_orbitals=it.freeze_orbitals)
