"""Problem configuration: nested dataclasses and a flat ``section.key = value`` text format.

Example::

    stokes.nu = 0.001
    observation.kind = vorticity
    likelihood.data = 30.0, 40.0, 50.0, 40.0, 40.0, 40.0, 30.0, 50.0

Floats are written with ``repr`` so that parse -> serialize -> parse is the
identity.  Unknown keys are rejected; missing keys take their defaults.
"""
from __future__ import annotations

import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .advdiff import SourceSpec
from .boundary import ClampParams
from .errors import ConfigError
from .observe import KINDS, SCALAR_VAR_GLOBAL, VORTICITY, SectorSpec, SensorArray, ring_sensors
from .stokes import StokesConfig


@dataclass(frozen=True)
class BoundaryConfig:
    b0: float = 1.0
    K: int = 320
    n_B: int = 160
    quad_order: int = 8


@dataclass(frozen=True)
class PriorConfig:
    s: float = 1.25


@dataclass(frozen=True)
class DomainConfig:
    R: float = 2.0
    h: float = 0.03


@dataclass(frozen=True)
class AdvDiffConfig:
    kappa: float = 1.0


@dataclass(frozen=True)
class ObservationConfig:
    """Observation kind plus the sensor ring (vorticity) or sector edges (sectoral)."""

    kind: str = VORTICITY
    sensor_count: int = 8
    sensor_ring: float = 1.75
    sensor_radius: float = 0.1
    sensor_start_deg: float = 0.0
    sector_angles_deg: tuple[float, ...] = (0.0, 90.0, 180.0, 270.0, 360.0)


@dataclass(frozen=True)
class LikelihoodConfig:
    data: tuple[float, ...] = (30.0, 40.0, 50.0, 40.0, 40.0, 40.0, 30.0, 50.0)
    sigma: float = 1.0


@dataclass(frozen=True)
class ChainConfig:
    n_samples: int = 50000
    n_chains: int = 2
    seed: int = 0
    checkpoint_every: int = 100
    adapt: bool = True
    adapt_every: int = 100
    rho0: float = 0.95
    init: str = "prior"
    burn_in: float = 0.2


@dataclass(frozen=True)
class ProblemConfig:
    boundary: BoundaryConfig = field(default_factory=BoundaryConfig)
    clamp: ClampParams = field(default_factory=ClampParams)
    prior: PriorConfig = field(default_factory=PriorConfig)
    domain: DomainConfig = field(default_factory=DomainConfig)
    stokes: StokesConfig = field(default_factory=StokesConfig)
    advdiff: AdvDiffConfig = field(default_factory=AdvDiffConfig)
    source: SourceSpec = field(default_factory=SourceSpec)
    observation: ObservationConfig = field(default_factory=ObservationConfig)
    likelihood: LikelihoodConfig = field(default_factory=LikelihoodConfig)
    chain: ChainConfig = field(default_factory=ChainConfig)

    @property
    def sensors(self) -> SensorArray:
        o = self.observation
        return ring_sensors(o.sensor_count, o.sensor_ring, o.sensor_radius,
                            np.deg2rad(o.sensor_start_deg))

    @property
    def sectors(self) -> SectorSpec:
        deg = np.asarray(self.observation.sector_angles_deg, dtype=float)
        angles = np.deg2rad(deg)
        angles[-1] = 2 * np.pi if deg[-1] == 360.0 else angles[-1]
        return SectorSpec(angles)

    @property
    def n_obs(self) -> int:
        kind = self.observation.kind
        if kind == VORTICITY:
            return self.observation.sensor_count
        if kind == SCALAR_VAR_GLOBAL:
            return 1
        return len(self.observation.sector_angles_deg) - 1

    @property
    def prior_spec(self):
        from .inference import PriorSpec
        return PriorSpec(self.prior.s, self.boundary.K)

    @property
    def likelihood_spec(self):
        from .inference import LikelihoodSpec
        return LikelihoodSpec(np.asarray(self.likelihood.data), self.likelihood.sigma)

    def with_changes(self, **sections) -> "ProblemConfig":
        """Copy with individual section fields replaced, e.g. ``chain={"seed": 3}``."""
        updates = {name: replace(getattr(self, name), **vals) for name, vals in sections.items()}
        return validate(replace(self, **updates))


# ---------------------------------------------------------------------------
# Validation


def validate(cfg: ProblemConfig) -> ProblemConfig:
    """Check cross-field consistency; raise :class:`ConfigError` listing every problem."""
    errs = []
    b, o, lk, ch = cfg.boundary, cfg.observation, cfg.likelihood, cfg.chain
    if b.K < 2 or b.K % 2:
        errs.append(f"boundary.K: must be a positive even integer, got {b.K}")
    if b.n_B < 8:
        errs.append(f"boundary.n_B: need at least 8 spline intervals, got {b.n_B}")
    if b.quad_order < 1:
        errs.append("boundary.quad_order: must be positive")
    if not cfg.prior.s > 0.5:
        errs.append(f"prior.s: must exceed 1/2, got {cfg.prior.s}")
    if cfg.domain.R <= cfg.clamp.r_max:
        errs.append("domain.R: outer radius must exceed clamp.r_max")
    if cfg.domain.h <= 0:
        errs.append("domain.h: must be positive")
    if len(cfg.source.x0) != 2:
        errs.append("source.x0: expected two coordinates")
    if cfg.advdiff.kappa <= 0:
        errs.append("advdiff.kappa: must be positive")
    if o.kind not in KINDS:
        errs.append(f"observation.kind: expected one of {', '.join(KINDS)}, got {o.kind!r}")
    elif o.kind == VORTICITY:
        if o.sensor_count < 1 or o.sensor_radius <= 0:
            errs.append("observation.sensor_count/sensor_radius: must be positive")
        else:
            try:
                cfg.sensors.check_inside(cfg.clamp.r_max, cfg.domain.R)
            except ValueError as exc:
                errs.append(f"observation.sensor_ring: {exc}")
    elif o.kind != SCALAR_VAR_GLOBAL:
        deg = o.sector_angles_deg
        if len(deg) < 2 or deg[0] != 0.0 or deg[-1] != 360.0 or np.any(np.diff(deg) <= 0):
            errs.append("observation.sector_angles_deg: must increase strictly from 0 to 360")
    if o.kind in KINDS and len(lk.data) != cfg.n_obs:
        errs.append(f"likelihood.data: {o.kind} expects {cfg.n_obs} values, got {len(lk.data)}")
    if not np.all(np.isfinite(lk.data)):
        errs.append("likelihood.data: values must be finite")
    if not lk.sigma > 0:
        errs.append(f"likelihood.sigma: must be positive, got {lk.sigma}")
    if ch.n_samples < 1 or ch.n_chains < 1 or ch.checkpoint_every < 1 or ch.adapt_every < 1:
        errs.append("chain: n_samples, n_chains, checkpoint_every and adapt_every must be positive")
    if not 0.0 <= ch.rho0 < 1.0:
        errs.append("chain.rho0: must lie in [0, 1)")
    if ch.init not in ("prior", "zero"):
        errs.append(f"chain.init: expected 'prior' or 'zero', got {ch.init!r}")
    if not 0.0 <= ch.burn_in < 1.0:
        errs.append("chain.burn_in: must lie in [0, 1)")
    if errs:
        raise ConfigError("; ".join(errs))
    return cfg


# ---------------------------------------------------------------------------
# Text format


def _hints(cls) -> dict:
    return typing.get_type_hints(cls)


def _parse_value(text: str, tp, key: str):
    try:
        if tp is bool:
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError("expected true or false")
            return low == "true"
        if tp is int:
            return int(text)
        if tp is float:
            return float(text)
        if tp is str:
            return text
        if typing.get_origin(tp) is tuple:
            return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} ({exc})") from exc
    raise ConfigError(f"{key}: unsupported field type {tp}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def parse_config(text: str) -> ProblemConfig:
    sections = {f.name: f.type for f in fields(ProblemConfig)}
    section_types = _hints(ProblemConfig)
    values: dict[str, dict] = {name: {} for name in sections}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key.count(".") != 1:
            raise ConfigError(f"line {lineno}: key {key!r} must look like section.key")
        sec, name = key.split(".")
        if sec not in values:
            raise ConfigError(f"{key}: unknown section {sec!r}")
        hints = _hints(section_types[sec])
        if name not in hints:
            raise ConfigError(f"{key}: unknown key")
        if name in values[sec]:
            raise ConfigError(f"{key}: given twice")
        values[sec][name] = _parse_value(val, hints[name], key)
    built = {}
    for sec, vals in values.items():
        try:
            built[sec] = section_types[sec](**vals)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{sec}: {exc}") from exc
    return validate(ProblemConfig(**built))


def serialize_config(cfg: ProblemConfig) -> str:
    lines = []
    for sec in fields(cfg):
        obj = getattr(cfg, sec.name)
        for f in fields(obj):
            if f.init:
                lines.append(f"{sec.name}.{f.name} = {_format_value(getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> ProblemConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def save_config(cfg: ProblemConfig, path) -> None:
    Path(path).write_text(serialize_config(cfg))
