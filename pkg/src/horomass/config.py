"""Experiment configuration: a versioned YAML document with nested sections.

Schema (version 1); every key is optional and defaults as shown::

    schema_version: 1
    n: 3                    # dimension, >= 3
    tau: null               # decay exponent; null means n/2 + 0.6; must exceed n/2
    alpha: 1.5              # rho(eps) = eps^-alpha; the evaluation check needs alpha > 4/3
    seed: 0                 # seeds numpy.random.default_rng for every sample set
    family:
      kind: tail            # zero | bump | tail | gauge
      amplitude: null       # null: 0.2 (tail), 0.05 (bump), 0.02 (gauge)
      center: null          # bump/gauge ball center, n numbers; null picks a default
      radius: null          # bump/gauge ball radius
      frame: false          # bump: amplitude measured in the b-orthonormal frame
    schedule:
      eps0: 0.5             # eps_j = eps0 * 2^-j
      points: 6
      values: null          # explicit strictly decreasing list overrides eps0/points
    quadrature: {order: 8, subdivisions: 2, rtol: 1.0e-08, atol: 1.0e-14, max_depth: 10, max_cells: 20000}
    conventions:
      measure: b            # b | g: measure and normal in the mass fluxes
      g_constant: corrected # corrected | paper: constant subtracted in G
      bounds: corrected     # corrected | literal: which small-terms bound chain gates the status
    checks:
      potentials: null      # subset of 0..n-1; null means all
      identity_radii: [3.0, 8.0]
      identity_shells: 8
      per_shell: 24
      cutoff_eps: [0.01, 0.001]
      evaluation_rtol: 0.001
      oracle_rtol: 0.0001
      mass_atol: 1.0e-10
    output:
      dir: horomass-out
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from .perturbations import BumpFamily, GaugeFamily, TailFamily, ZeroFamily
from .quadrature import QuadratureSpec

__all__ = [
    "SCHEMA_VERSION",
    "FAMILY_KINDS",
    "ConfigError",
    "FamilyConfig",
    "ScheduleConfig",
    "QuadratureConfig",
    "ConventionConfig",
    "ChecksConfig",
    "OutputConfig",
    "ExperimentConfig",
    "parse_config",
    "emit_config",
    "load_config",
    "build_family",
]

SCHEMA_VERSION = 1
FAMILY_KINDS = ("zero", "bump", "tail", "gauge")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted field path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


@dataclass(frozen=True)
class FamilyConfig:
    kind: str = "tail"
    amplitude: float | None = None
    center: tuple | None = None
    radius: float | None = None
    frame: bool = False


@dataclass(frozen=True)
class ScheduleConfig:
    eps0: float = 0.5
    points: int = 6
    values: tuple | None = None

    def eps(self):
        if self.values is not None:
            return list(self.values)
        return [self.eps0 * 2.0**-j for j in range(self.points)]


@dataclass(frozen=True)
class QuadratureConfig:
    order: int = 8
    subdivisions: int = 2
    rtol: float = 1e-8
    atol: float = 1e-14
    max_depth: int = 10
    max_cells: int = 20000

    def spec(self):
        return QuadratureSpec(**asdict(self))


@dataclass(frozen=True)
class ConventionConfig:
    measure: str = "b"
    g_constant: str = "corrected"
    bounds: str = "corrected"


@dataclass(frozen=True)
class ChecksConfig:
    potentials: tuple | None = None
    identity_radii: tuple = (3.0, 8.0)
    identity_shells: int = 8
    per_shell: int = 24
    cutoff_eps: tuple = (1e-2, 1e-3)
    evaluation_rtol: float = 1e-3
    oracle_rtol: float = 1e-4
    mass_atol: float = 1e-10


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "horomass-out"


@dataclass(frozen=True)
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    n: int = 3
    tau: float | None = None
    alpha: float = 1.5
    seed: int = 0
    family: FamilyConfig = field(default_factory=FamilyConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    conventions: ConventionConfig = field(default_factory=ConventionConfig)
    checks: ChecksConfig = field(default_factory=ChecksConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def effective_tau(self):
        return self.n / 2 + 0.6 if self.tau is None else self.tau

    def potentials(self):
        return list(range(self.n)) if self.checks.potentials is None else list(self.checks.potentials)

    def to_dict(self):
        return _plain(asdict(self))

    def digest(self):
        """sha256 of the canonical JSON form; the output directory is excluded."""
        d = self.to_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def override(self, **kw):
        """Apply command-line overrides; ``family`` resets the family parameters."""
        cfg = self
        for key, val in kw.items():
            if val is None:
                continue
            if key == "family":
                cfg = replace(cfg, family=FamilyConfig(kind=val))
            elif key == "out":
                cfg = replace(cfg, output=OutputConfig(dir=str(val)))
            elif key in ("measure", "g_constant", "bounds"):
                cfg = replace(cfg, conventions=replace(cfg.conventions, **{key: val}))
            else:
                cfg = replace(cfg, **{key: val})
        return validate(_rebuild(cfg))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _rebuild(cfg):
    return parse_config(cfg.to_dict())


# ---------------------------------------------------------------------------
# parsing


def _number(val, path, kind=float, allow_none=False):
    if val is None and allow_none:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(path, f"expected a number, got {val!r}")
    if kind is int:
        if isinstance(val, float) and not val.is_integer():
            raise ConfigError(path, f"expected an integer, got {val!r}")
        return int(val)
    return float(val)


def _choice(val, path, options):
    if val not in options:
        raise ConfigError(path, f"must be one of {', '.join(options)}; got {val!r}")
    return val


def _numbers(val, path, allow_none=False, kind=float):
    if val is None and allow_none:
        return None
    if not isinstance(val, (list, tuple)):
        raise ConfigError(path, f"expected a list, got {val!r}")
    return tuple(_number(v, f"{path}[{i}]", kind) for i, v in enumerate(val))


def _section(d, path, cls, converters):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a mapping")
    known = {f.name for f in fields(cls)}
    for key in d:
        if key not in known:
            raise ConfigError(f"{path}.{key}" if path else str(key), "unknown field")
    kw = {k: converters[k](v, f"{path}.{k}" if path else k) for k, v in d.items()}
    return cls(**kw)


def parse_config(data):
    """Build and validate an :class:`ExperimentConfig` from a mapping."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping at top level")
    cfg = _section(data, "", ExperimentConfig, {
        "schema_version": lambda v, p: _number(v, p, int),
        "n": lambda v, p: _number(v, p, int),
        "tau": lambda v, p: _number(v, p, allow_none=True),
        "alpha": _number,
        "seed": lambda v, p: _number(v, p, int),
        "family": lambda v, p: _section(v, p, FamilyConfig, {
            "kind": lambda v, p: _choice(v, p, FAMILY_KINDS),
            "amplitude": lambda v, p: _number(v, p, allow_none=True),
            "center": lambda v, p: _numbers(v, p, allow_none=True),
            "radius": lambda v, p: _number(v, p, allow_none=True),
            "frame": _flag,
        }),
        "schedule": lambda v, p: _section(v, p, ScheduleConfig, {
            "eps0": _number,
            "points": lambda v, p: _number(v, p, int),
            "values": lambda v, p: _numbers(v, p, allow_none=True),
        }),
        "quadrature": lambda v, p: _section(v, p, QuadratureConfig, {
            "order": lambda v, p: _number(v, p, int),
            "subdivisions": lambda v, p: _number(v, p, int),
            "rtol": _number,
            "atol": _number,
            "max_depth": lambda v, p: _number(v, p, int),
            "max_cells": lambda v, p: _number(v, p, int),
        }),
        "conventions": lambda v, p: _section(v, p, ConventionConfig, {
            "measure": lambda v, p: _choice(v, p, ("b", "g")),
            "g_constant": lambda v, p: _choice(v, p, ("corrected", "paper")),
            "bounds": lambda v, p: _choice(v, p, ("corrected", "literal")),
        }),
        "checks": lambda v, p: _section(v, p, ChecksConfig, {
            "potentials": lambda v, p: _numbers(v, p, allow_none=True, kind=int),
            "identity_radii": _numbers,
            "identity_shells": lambda v, p: _number(v, p, int),
            "per_shell": lambda v, p: _number(v, p, int),
            "cutoff_eps": _numbers,
            "evaluation_rtol": _number,
            "oracle_rtol": _number,
            "mass_atol": _number,
        }),
        "output": lambda v, p: _section(v, p, OutputConfig, {"dir": _text}),
    })
    return validate(cfg)


def _flag(val, path):
    if not isinstance(val, bool):
        raise ConfigError(path, f"expected true or false, got {val!r}")
    return val


def _text(val, path):
    if not isinstance(val, str) or not val:
        raise ConfigError(path, f"expected a non-empty string, got {val!r}")
    return val


def validate(cfg):
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {cfg.schema_version}; expected {SCHEMA_VERSION}")
    n = cfg.n
    if n < 3:
        raise ConfigError("n", f"dimension must be at least 3, got {n}")
    if cfg.tau is not None and not cfg.tau > n / 2:
        raise ConfigError("tau", f"must exceed n/2 = {n / 2:g}, got {cfg.tau:g}")
    if not cfg.alpha > 0:
        raise ConfigError("alpha", "must be positive")
    if cfg.seed < 0:
        raise ConfigError("seed", "must be non-negative")
    fam = cfg.family
    if fam.center is not None:
        if len(fam.center) != n:
            raise ConfigError("family.center", f"needs {n} coordinates, got {len(fam.center)}")
        if fam.center[-1] <= 0:
            raise ConfigError("family.center", "last coordinate must be positive")
    if fam.radius is not None and not fam.radius > 0:
        raise ConfigError("family.radius", "must be positive")
    if fam.kind in ("bump", "gauge"):
        center, radius = _ball(cfg)
        if center[-1] - radius <= 0:
            raise ConfigError("family.radius", "the support ball must stay inside x^n > 0")
    eps = cfg.schedule.eps()
    if cfg.schedule.values is None:
        if not 0 < cfg.schedule.eps0 < 1:
            raise ConfigError("schedule.eps0", "must lie in (0, 1)")
        if cfg.schedule.points < 4:
            raise ConfigError("schedule.points", "need at least four points")
    else:
        if len(eps) < 4:
            raise ConfigError("schedule.values", "need at least four points")
        for i, e in enumerate(eps):
            if not 0 < e < 1:
                raise ConfigError(f"schedule.values[{i}]", "must lie in (0, 1)")
        if any(b >= a for a, b in zip(eps[:-1], eps[1:])):
            raise ConfigError("schedule.values", "must be strictly decreasing")
    try:
        cfg.quadrature.spec()
    except ValueError as exc:
        raise ConfigError("quadrature", str(exc)) from None
    ch = cfg.checks
    if ch.potentials is not None:
        for i, k in enumerate(ch.potentials):
            if not 0 <= k < n:
                raise ConfigError(f"checks.potentials[{i}]", f"must lie in 0..{n - 1}")
    if len(ch.identity_radii) != 2 or not 0 < ch.identity_radii[0] < ch.identity_radii[1]:
        raise ConfigError("checks.identity_radii", "expected [rmin, rmax] with 0 < rmin < rmax")
    if ch.identity_shells < 8:
        raise ConfigError("checks.identity_shells", "slope fits need at least eight shells")
    if ch.per_shell < 1:
        raise ConfigError("checks.per_shell", "must be positive")
    for i, e in enumerate(ch.cutoff_eps):
        if not 0 < e < 1:
            raise ConfigError(f"checks.cutoff_eps[{i}]", "must lie in (0, 1)")
    for name in ("evaluation_rtol", "oracle_rtol", "mass_atol"):
        if not getattr(ch, name) > 0:
            raise ConfigError(f"checks.{name}", "must be positive")
    return cfg


def emit_config(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return parse_config(data)


# ---------------------------------------------------------------------------
# families


def _ball(cfg):
    n = cfg.n
    fam = cfg.family
    if fam.kind == "gauge":
        center = (0.2, -0.1) + (0.0,) * (n - 3) + (0.6,)
        radius = 0.25
    else:
        # crosses F at eps = 1/2 and straddles the horosphere
        center = (0.2, -0.1) + (0.0,) * (n - 3) + (0.75,)
        radius = 0.3
    return (tuple(fam.center) if fam.center is not None else center,
            fam.radius if fam.radius is not None else radius)


def build_family(cfg):
    fam = cfg.family
    if fam.kind == "zero":
        return ZeroFamily(cfg.n)
    if fam.kind == "tail":
        amp = 0.2 if fam.amplitude is None else fam.amplitude
        return TailFamily(cfg.n, tau=cfg.effective_tau, amplitude=amp)
    center, radius = _ball(cfg)
    if fam.kind == "bump":
        amp = 0.05 if fam.amplitude is None else fam.amplitude
        return BumpFamily(center, radius, amplitude=amp, frame=fam.frame)
    amp = 0.02 if fam.amplitude is None else fam.amplitude
    return GaugeFamily(center, radius, amplitude=amp)
