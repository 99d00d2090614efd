"""Experiment configuration: plain-text `key = value` files.

Theorem experiments carry a dozen parameters; a flat config file keeps the
whole record reproducible and diffable.  Unknown keys are rejected so typos
fail loudly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace

from patchwind.geometry import (
    PatchBoundary,
    make_disk,
    make_ellipse,
    make_perturbed_disk,
)


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


_SHAPE_RE = re.compile(r"^\s*(disk|ellipse|perturbed)\s*\(([^)]*)\)\s*$")


@dataclass(frozen=True)
class ShapeSpec:
    """Initial patch shape: disk(r), ellipse(a,b), or perturbed(m,eta)."""

    kind: str
    params: tuple[float, ...]

    @staticmethod
    def parse(text: str) -> "ShapeSpec":
        m = _SHAPE_RE.match(text)
        if not m:
            raise ConfigError(f"cannot parse initial_shape {text!r}; expected "
                              "disk(r), ellipse(a,b), or perturbed(m,eta)")
        kind = m.group(1)
        try:
            params = tuple(float(p) for p in m.group(2).split(","))
        except ValueError as exc:
            raise ConfigError(f"bad shape parameters in {text!r}") from exc
        arity = {"disk": 1, "ellipse": 2, "perturbed": 2}[kind]
        if len(params) != arity:
            raise ConfigError(f"{kind} takes {arity} parameter(s), got {len(params)}")
        return ShapeSpec(kind, params)

    def build(self, n: int) -> PatchBoundary:
        if self.kind == "disk":
            return make_disk(self.params[0], n)
        if self.kind == "ellipse":
            return make_ellipse(self.params[0], self.params[1], n)
        return make_perturbed_disk(int(self.params[0]), self.params[1], n)

    def __str__(self) -> str:
        if self.kind == "perturbed":
            return f"perturbed({int(self.params[0])},{self.params[1]:g})"
        return f"{self.kind}({','.join(f'{p:g}' for p in self.params)})"


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation run."""

    initial_shape: ShapeSpec = field(default_factory=lambda: ShapeSpec.parse("disk(1.0)"))
    nodes: int = 1024
    tracers: int = 0
    dt: float = 0.01
    t_end: float = 10.0
    snapshot_dt: float = 1.0
    seed: int = 0
    field_mode: str = "contour"
    epsilon_override: float | None = None
    output_dir: str = "out"
    # dt must satisfy dt <= cfl * h_min / U_max.  The velocity field of a
    # unit patch is smooth with O(1) gradients, so the node-spacing CFL is
    # very conservative; the default factor reflects the RK4 stability of
    # the physical rotation rate rather than grid advection.
    cfl: float = 20.0
    r_guard: float = 10.0
    rho_min: float = 1e-8
    remesh: bool = True
    h_min_factor: float = 0.5
    h_max_factor: float = 2.0
    delta_zero_tol: float = 1e-4
    probe_count: int = 64

    def validate(self) -> "SimConfig":
        checks = [
            ("nodes", self.nodes >= 8),
            ("tracers", self.tracers >= 0),
            ("dt", self.dt > 0.0 and math.isfinite(self.dt)),
            ("t_end", self.t_end >= 0.0),
            ("snapshot_dt", self.snapshot_dt > 0.0),
            ("field_mode", self.field_mode in ("contour", "exact_disk")),
            ("epsilon_override",
             self.epsilon_override is None or 0.0 < self.epsilon_override <= 0.5),
            ("cfl", self.cfl > 0.0),
            ("r_guard", self.r_guard > 0.0),
            ("rho_min", self.rho_min > 0.0),
            ("h_min_factor", 0.0 < self.h_min_factor < 1.0),
            ("h_max_factor", self.h_max_factor > 1.0),
            ("delta_zero_tol", self.delta_zero_tol >= 0.0),
            ("probe_count", self.probe_count >= 1),
        ]
        for name, ok in checks:
            if not ok:
                raise ConfigError(f"invalid value for {name}: {getattr(self, name)!r}")
        return self

    def with_overrides(self, **kw) -> "SimConfig":
        return replace(self, **kw).validate()


_PARSERS = {
    "initial_shape": ShapeSpec.parse,
    "nodes": int,
    "tracers": int,
    "dt": float,
    "t_end": float,
    "snapshot_dt": float,
    "seed": int,
    "field_mode": str,
    "epsilon_override": lambda s: None if s.lower() == "none" else float(s),
    "output_dir": str,
    "cfl": float,
    "r_guard": float,
    "rho_min": float,
    "remesh": lambda s: {"true": True, "false": False}[s.lower()],
    "h_min_factor": float,
    "h_max_factor": float,
    "delta_zero_tol": float,
    "probe_count": int,
}


def parse_config(text: str) -> SimConfig:
    """Parse `key = value` lines ('#' starts a comment) into a SimConfig."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](val)
        except ConfigError:
            raise
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from exc
    return SimConfig(**values).validate()


def serialize_config(cfg: SimConfig) -> str:
    """Normalized text form; parse(serialize(cfg)) round-trips."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            v = "none"
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
