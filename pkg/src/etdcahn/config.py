"""Sectioned plain-text run configuration: parsing, validation, canonical
serialization.

The format is INI-style (`[section]` headers, `key = value` lines, `#`
comments). Every key is typed and belongs to a fixed schema; unknown
sections or keys are errors so typos cannot pass silently. Lists are
space-separated. Serialization is canonical: fixed section and key order,
floats in shortest round-trip form, optional keys omitted when unset, so
parse -> serialize is a fixpoint and shipped presets can be compared
byte-for-byte.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from typing import Optional

BC_KINDS = ("periodic", "neumann", "dirichlet")
MASK_KINDS = ("lshape",)
BOUNDARY_KINDS = ("zero", "bottom_one")
POTENTIAL_KINDS = ("double_well", "flory_huggins")
MOBILITY_KINDS = ("constant", "degenerate")
VELOCITY_KINDS = ("zero", "constant", "rotating", "decaying")
INITIAL_KINDS = ("zero", "cosine_product", "sine_highfreq", "random_uniform")
SCHEMES = ("etd1", "etdrk2")
SNAPSHOT_FORMATS = ("csv", "vtk")


class ConfigError(ValueError):
    """Syntax or semantic failure; message enumerates every violation."""


@dataclass(frozen=True)
class GridConfig:
    n: tuple
    box: tuple = (0.0, 1.0)
    bc: str = "periodic"
    mask: Optional[str] = None
    g: str = "zero"


@dataclass(frozen=True)
class PhysicsConfig:
    potential: str
    eps: float
    theta: Optional[float] = None
    theta_c: Optional[float] = None
    mobility: str = "constant"
    mobility_value: float = 1.0
    kappa: Optional[float] = None


@dataclass(frozen=True)
class VelocityConfig:
    kind: str = "zero"
    components: Optional[tuple] = None


@dataclass(frozen=True)
class InitialConfig:
    kind: str = "zero"
    amplitude: float = 1.0
    seed: Optional[int] = None


@dataclass(frozen=True)
class TimeConfig:
    tau: float
    t_end: float
    scheme: str = "etdrk2"


@dataclass(frozen=True)
class ToleranceConfig:
    krylov_tol: float = 1e-12
    mbp_slack: float = 1e-12
    max_krylov_dim: int = 100
    on_violation: str = "error"


@dataclass(frozen=True)
class OutputConfig:
    series_csv: Optional[str] = None
    snapshot_times: Optional[tuple] = None
    snapshot_format: str = "vtk"
    snapshot_dir: Optional[str] = None


@dataclass(frozen=True)
class StudyConfig:
    tau_list: Optional[tuple] = None
    tau_ref: Optional[float] = None
    n_list: Optional[tuple] = None
    n_ref: Optional[int] = None
    tau_fixed: Optional[float] = None


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig
    physics: PhysicsConfig
    velocity: VelocityConfig = VelocityConfig()
    initial: InitialConfig = InitialConfig()
    time: TimeConfig = TimeConfig(tau=0.1, t_end=0.0)
    tolerances: ToleranceConfig = ToleranceConfig()
    output: OutputConfig = OutputConfig()
    study: StudyConfig = StudyConfig()

    @property
    def dim(self) -> int:
        return len(self.grid.n)


# (key, kind) per section, in canonical serialization order; kind is one of
# int, float, str, ints, floats
_SCHEMA = {
    "grid": (("n", "ints"), ("box", "floats"), ("bc", "str"), ("mask", "str"), ("g", "str")),
    "physics": (
        ("potential", "str"), ("eps", "float"), ("theta", "float"),
        ("theta_c", "float"), ("mobility", "str"), ("mobility_value", "float"),
        ("kappa", "float"),
    ),
    "velocity": (("kind", "str"), ("components", "floats")),
    "initial": (("kind", "str"), ("amplitude", "float"), ("seed", "int")),
    "time": (("tau", "float"), ("t_end", "float"), ("scheme", "str")),
    "tolerances": (
        ("krylov_tol", "float"), ("mbp_slack", "float"),
        ("max_krylov_dim", "int"), ("on_violation", "str"),
    ),
    "output": (
        ("series_csv", "str"), ("snapshot_times", "floats"),
        ("snapshot_format", "str"), ("snapshot_dir", "str"),
    ),
    "study": (
        ("tau_list", "floats"), ("tau_ref", "float"), ("n_list", "ints"),
        ("n_ref", "int"), ("tau_fixed", "float"),
    ),
}

_SECTION_TYPES = {
    "grid": GridConfig,
    "physics": PhysicsConfig,
    "velocity": VelocityConfig,
    "initial": InitialConfig,
    "time": TimeConfig,
    "tolerances": ToleranceConfig,
    "output": OutputConfig,
    "study": StudyConfig,
}

_REQUIRED = {"grid": ("n",), "physics": ("potential", "eps"), "time": ("tau", "t_end")}


def _parse_value(kind, raw, where):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw.strip()
        parts = raw.split()
        if not parts:
            raise ValueError("empty list")
        if kind == "ints":
            return tuple(int(p) for p in parts)
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind} ({exc})") from exc


def _format_value(kind, value):
    if kind == "int":
        return str(value)
    if kind == "float":
        return repr(float(value))
    if kind == "str":
        return value
    if kind == "ints":
        return " ".join(str(v) for v in value)
    return " ".join(repr(float(v)) for v in value)


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError with every violation listed."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"syntax error: {exc}") from exc

    problems = []
    for section in cp.sections():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
    if problems:
        raise ConfigError("; ".join(problems))

    parts = {}
    for section, keys in _SCHEMA.items():
        known = {k: kind for k, kind in keys}
        values = {}
        if cp.has_section(section):
            for key in cp[section]:
                if key not in known:
                    problems.append(f"[{section}] unknown key {key!r}")
                    continue
                values[key] = _parse_value(known[key], cp[section][key], f"[{section}] {key}")
        for req in _REQUIRED.get(section, ()):
            if req not in values:
                problems.append(f"[{section}] missing required key {req!r}")
        if problems:
            continue
        parts[section] = _SECTION_TYPES[section](**values)
    if problems:
        raise ConfigError("; ".join(problems))

    cfg = RunConfig(**parts)
    violations = validate_config(cfg)
    if violations:
        raise ConfigError("; ".join(violations))
    return cfg


def validate_config(cfg: RunConfig) -> list:
    """Cross-field constraint check; returns a list of violation messages."""
    v = []
    g = cfg.grid
    dim = len(g.n)
    if not 1 <= dim <= 3:
        v.append(f"grid dimension must be 1..3, got {dim}")
    if any(n < 2 for n in g.n):
        v.append("every n must be at least 2")
    if len(g.box) != 2 or not g.box[0] < g.box[1]:
        v.append("box must be two floats lo hi with lo < hi")
    if g.bc not in BC_KINDS:
        v.append(f"bc must be one of {BC_KINDS}")
    if g.mask is not None:
        if g.mask not in MASK_KINDS:
            v.append(f"mask must be one of {MASK_KINDS}")
        if g.bc != "dirichlet":
            v.append(f"mask = {g.mask} requires bc = dirichlet, got bc = {g.bc}")
        if dim != 2:
            v.append("mask = lshape requires a 2D grid")
        elif any(n % 2 for n in g.n):
            v.append("mask = lshape requires even cell counts")
    if g.g not in BOUNDARY_KINDS:
        v.append(f"g must be one of {BOUNDARY_KINDS}")
    if g.g != "zero" and g.bc != "dirichlet":
        v.append("boundary data g requires bc = dirichlet")

    p = cfg.physics
    if p.potential not in POTENTIAL_KINDS:
        v.append(f"potential must be one of {POTENTIAL_KINDS}")
    if p.potential == "flory_huggins":
        if p.theta is None or p.theta_c is None:
            v.append("flory_huggins requires theta and theta_c")
    elif p.theta is not None or p.theta_c is not None:
        v.append("theta/theta_c only apply to flory_huggins")
    if not p.eps > 0:
        v.append("eps must be positive")
    if p.mobility not in MOBILITY_KINDS:
        v.append(f"mobility must be one of {MOBILITY_KINDS}")
    if p.mobility == "degenerate" and p.mobility_value != 1.0:
        v.append("mobility_value only applies to constant mobility")
    if p.mobility == "constant" and not p.mobility_value > 0:
        v.append("mobility_value must be positive")

    vel = cfg.velocity
    if vel.kind not in VELOCITY_KINDS:
        v.append(f"velocity kind must be one of {VELOCITY_KINDS}")
    if vel.kind == "constant":
        if vel.components is None:
            v.append("constant velocity requires components")
        elif len(vel.components) != dim:
            v.append(
                f"velocity components count {len(vel.components)} != grid dimension {dim}"
            )
    elif vel.components is not None:
        v.append("components only apply to constant velocity")
    if vel.kind in ("rotating", "decaying") and dim != 2:
        v.append(f"velocity kind {vel.kind} requires a 2D grid")

    ini = cfg.initial
    if ini.kind not in INITIAL_KINDS:
        v.append(f"initial kind must be one of {INITIAL_KINDS}")
    if ini.kind == "random_uniform":
        if ini.seed is None:
            v.append("random_uniform initial data requires a seed")
    elif ini.seed is not None:
        v.append("seed only applies to random_uniform initial data")
    if ini.kind == "sine_highfreq" and dim != 2:
        v.append("sine_highfreq initial data requires a 2D grid")

    t = cfg.time
    if not t.tau > 0:
        v.append("tau must be positive")
    if t.t_end < 0:
        v.append("t_end must be nonnegative")
    if t.scheme not in SCHEMES:
        v.append(f"scheme must be one of {SCHEMES}")

    tol = cfg.tolerances
    if not 0 < tol.krylov_tol <= 1e-2:
        v.append("krylov_tol must lie in (0, 1e-2]")
    if tol.max_krylov_dim < 1:
        v.append("max_krylov_dim must be at least 1")
    if tol.on_violation not in ("error", "warn"):
        v.append("on_violation must be 'error' or 'warn'")

    out = cfg.output
    if out.snapshot_format not in SNAPSHOT_FORMATS:
        v.append(f"snapshot_format must be one of {SNAPSHOT_FORMATS}")
    if out.snapshot_times is not None and any(s < 0 for s in out.snapshot_times):
        v.append("snapshot_times must be nonnegative")

    st = cfg.study
    for name, seq in (("tau_list", st.tau_list), ("n_list", st.n_list)):
        if seq is not None and any(x <= 0 for x in seq):
            v.append(f"{name} entries must be positive")
    for name, val in (("tau_ref", st.tau_ref), ("tau_fixed", st.tau_fixed)):
        if val is not None and not val > 0:
            v.append(f"{name} must be positive")
    if st.n_ref is not None and st.n_ref < 2:
        v.append("n_ref must be at least 2")
    return v


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) reproduces cfg exactly."""
    lines = []
    for section, keys in _SCHEMA.items():
        block = getattr(cfg, section)
        defaults = _SECTION_TYPES[section]
        body = []
        for key, kind in keys:
            value = getattr(block, key)
            if value is None:
                continue
            body.append(f"{key} = {_format_value(kind, value)}")
        if body:
            lines.append(f"[{section}]")
            lines.extend(body)
            lines.append("")
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
