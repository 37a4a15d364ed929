"""Run configuration: a flat, typed key-value format with sections.

The on-disk form is a TOML-like subset: ``[section]`` headers, ``key = value``
lines, ``#`` comments.  Values are ints, floats, booleans, quoted strings or
bracketed lists of numbers.  Serialization writes floats with 17 significant
digits so parse -> serialize -> parse is the identity; unknown sections or
keys are rejected.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field, fields

from .errors import ConfigError

_INT_RE = re.compile(r"[+-]?\d+$")


@dataclass
class ModelBlock:
    delta: float = 1.0
    nu: float = 1.0
    zeeman: tuple = (-1.0, 0.0, 1.0)
    zeeman_preset: str = ""

    def resolve_zeeman(self):
        from .model import ZeemanSet

        if self.zeeman_preset:
            return ZeemanSet.preset(self.zeeman_preset)
        return ZeemanSet(tuple(self.zeeman))


@dataclass
class DriveBlock:
    ratio: float = 0.0


@dataclass
class ScanBlock:
    axis_x: str = "delta"
    x_lo: float = 0.1
    x_hi: float = 4.0
    n_x: int = 200
    nu_lo: float = 0.1
    nu_hi: float = 6.0
    n_y: int = 200
    refine: bool = True
    n_probes: int = 3


@dataclass
class SolverBlock:
    seed: int = 0x5EED
    n_starts: int = 64


@dataclass
class QcpBlock:
    delta_lo: float = 0.05
    delta_hi: float = 5.0
    xi_lo_scale: float = 0.01
    xi_hi_scale: float = 3.0
    grid_n: int = 240


@dataclass
class QtpBlock:
    x_lo: float = 0.5
    x_hi: float = 4.0
    n_probes: int = 25


@dataclass
class FitBlock:
    input: str = ""
    nu_c_hint: float = 0.0
    bracket: float = 0.0   # 0 -> automatic


@dataclass
class EdBlock:
    n_atoms: int = 12
    photon_cutoff: int = 24
    nu_lo: float = 0.2
    nu_hi: float = 3.0
    n_nu: int = 15


@dataclass
class OutputBlock:
    dir: str = "."


@dataclass
class RunConfig:
    model: ModelBlock = field(default_factory=ModelBlock)
    drive: DriveBlock = field(default_factory=DriveBlock)
    scan: ScanBlock = field(default_factory=ScanBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    qcp: QcpBlock = field(default_factory=QcpBlock)
    qtp: QtpBlock = field(default_factory=QtpBlock)
    fit: FitBlock = field(default_factory=FitBlock)
    ed: EdBlock = field(default_factory=EdBlock)
    output: OutputBlock = field(default_factory=OutputBlock)


_SECTIONS = {f.name: f.default_factory for f in fields(RunConfig)}


def _parse_value(raw: str, where: str):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return ()
        return tuple(_parse_scalar(v.strip(), where) for v in inner.split(","))
    return _parse_scalar(raw, where)


def _parse_scalar(raw: str, where: str):
    if raw in ("true", "false"):
        return raw == "true"
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if _INT_RE.match(raw):
        return int(raw)
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} at {where}") from None


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigError(f"unknown section [{name}] at line {lineno}")
            section = name
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected key = value at line {lineno}: {line!r}")
        if section is None:
            raise ConfigError(f"key outside any section at line {lineno}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        block = getattr(cfg, section)
        names = {f.name: f for f in fields(block)}
        if key not in names:
            raise ConfigError(f"unknown key {key!r} in section [{section}] at line {lineno}")
        value = _parse_value(raw, f"line {lineno}")
        value = _coerce(value, names[key].type, key, section)
        setattr(block, key, value)
    return cfg


def _coerce(value, anno, key, section):
    if anno in ("float", float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if anno in ("tuple", tuple) and isinstance(value, tuple):
        return tuple(float(v) for v in value)
    expected = {"float": float, "int": int, "str": str, "bool": bool, "tuple": tuple}
    want = expected.get(anno, anno if isinstance(anno, type) else None)
    if want is not None and not isinstance(value, want):
        raise ConfigError(
            f"key {key!r} in [{section}] expects {getattr(want, '__name__', want)}, "
            f"got {type(value).__name__}"
        )
    if want is int and isinstance(value, bool):
        raise ConfigError(f"key {key!r} in [{section}] expects int, got bool")
    return value


def _format_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return '"' + str(v) + '"'


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for sec in _SECTIONS:
        block = getattr(cfg, sec)
        lines.append(f"[{sec}]")
        for f in fields(block):
            v = getattr(block, f.name)
            if isinstance(v, tuple):
                inner = ", ".join(_format_scalar(x) for x in v)
                lines.append(f"{f.name} = [{inner}]")
            else:
                lines.append(f"{f.name} = {_format_scalar(v)}")
        lines.append("")
    return "\n".join(lines)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def configs_equal(a: RunConfig, b: RunConfig) -> bool:
    return dataclasses.asdict(a) == dataclasses.asdict(b)
