"""
Scenario configuration files (TOML).

Every section is optional and falls back to the reference bench rig: a
26.5-30.5 GHz / 256 point sweep, a 40 x 40 element RIS at 5 mm pitch and
both horns 0.6 m in front of the surface. Unknown keys are errors, and
every error message names the file and the offending key.

Bundled scenarios are addressed by bare name, e.g. ``load_scenario("scenario1")``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from os import PathLike
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .geometry import CartesianPoint, RisArray, Scene, build_ris_array
from .measurement import SweepConfig
from .simulate import SimOptions
from .targets import SHAPES, make_cloud
from .volumetric import ImagingParams

__all__ = [
    "ConfigError",
    "RisConfig",
    "TargetSpec",
    "RadarConfig",
    "RoiDefaults",
    "ProcessingConfig",
    "ScenarioConfig",
    "load_scenario",
    "parse_scenario",
    "bundled_scenarios",
]


class ConfigError(ValueError):
    """Invalid scenario file; the message carries file and key location."""


@dataclass(frozen=True)
class RisConfig:
    rows: int = 40
    cols: int = 40
    pitch: float = 0.005
    design_frequency: float = 28.5e9

    def build(self) -> RisArray:
        return build_ris_array(self.rows, self.cols, self.pitch, self.design_frequency)


@dataclass(frozen=True)
class TargetSpec:
    name: str
    shape: str
    center: tuple[float, float, float]
    reflectivity: float = 1.0
    points: int = 50
    height: float = 1.8
    width: float = 0.5
    radius: float = 0.15
    size: tuple[float, float, float] = (0.5, 0.5, 0.5)
    pose: str = "standing"

    def cloud(self, seed: int) -> tuple[np.ndarray, np.ndarray]:
        pts, w = make_cloud(
            self.shape, self.center, seed, points=self.points, height=self.height, width=self.width,
            radius=self.radius, size=self.size, pose=self.pose,
        )
        return pts, w * self.reflectivity


@dataclass(frozen=True)
class RadarConfig:
    sigma_r: float = 0.0
    sigma_phi: float = 0.0
    cluster_radius: float = 0.3


@dataclass(frozen=True)
class RoiDefaults:
    step: float = 1.0
    span_phi: float = 20.0
    span_theta: float = 20.0
    center_theta: float = 97.0
    range_pad: float = 0.5


@dataclass(frozen=True)
class ProcessingConfig:
    fft_len: int | None = None
    window: bool = True
    grid: str = "auto"


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "unnamed"
    seed: int = 0
    sweep: SweepConfig = SweepConfig.from_band(26.5e9, 30.5e9, 256)
    ris: RisConfig = RisConfig()
    tx: CartesianPoint = CartesianPoint(0.6, 0.0, 0.0)
    rx: CartesianPoint = CartesianPoint(0.6, 0.0, 0.0)
    targets: tuple[TargetSpec, ...] = ()
    radar: RadarConfig = RadarConfig()
    roi: RoiDefaults = RoiDefaults()
    imaging: ImagingParams = ImagingParams()
    processing: ProcessingConfig = ProcessingConfig()
    sim: SimOptions = SimOptions()
    source: str = field(default="<memory>", compare=False)

    def build_array(self) -> RisArray:
        return self.ris.build()

    def target_clouds(self) -> list[tuple[TargetSpec, np.ndarray, np.ndarray]]:
        """Each target's sampled points and weights; target i is seeded with ``seed + i``."""
        return [(t, *t.cloud(self.seed + i)) for i, t in enumerate(self.targets)]

    def build_scene(self) -> Scene:
        clouds = self.target_clouds()
        if not clouds:
            return Scene((), self.tx, self.rx)
        pts = np.concatenate([c[1] for c in clouds])
        w = np.concatenate([c[2] for c in clouds])
        return Scene.from_arrays(pts, w, self.tx, self.rx)

    @property
    def wavelength(self) -> float:
        from .measurement import SPEED_OF_LIGHT

        return SPEED_OF_LIGHT / self.ris.design_frequency


# --- schema -----------------------------------------------------------------

def _num(loc, v, *, positive=False, nonneg=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{loc}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{loc}: expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{loc}: must be finite, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{loc}: must be > 0, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(f"{loc}: must be >= 0, got {v!r}")
    return int(v) if integer else float(v)


def _bool(loc, v):
    if not isinstance(v, bool):
        raise ConfigError(f"{loc}: expected true/false, got {v!r}")
    return v


def _str(loc, v):
    if not isinstance(v, str):
        raise ConfigError(f"{loc}: expected a string, got {v!r}")
    return v


def _vec3(loc, v):
    if not isinstance(v, list) or len(v) != 3:
        raise ConfigError(f"{loc}: expected a list of 3 numbers, got {v!r}")
    return tuple(_num(f"{loc}[{i}]", x) for i, x in enumerate(v))


def _section(loc: str, table: Any, allowed: dict) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(f"{loc}: expected a table, got {table!r}")
    out = {}
    for key, value in table.items():
        if key not in allowed:
            raise ConfigError(f"{loc}.{key}: unknown key (allowed: {', '.join(sorted(allowed))})")
        out[key] = allowed[key](f"{loc}.{key}", value)
    return out


_pos = lambda loc, v: _num(loc, v, positive=True)  # noqa: E731
_nonneg = lambda loc, v: _num(loc, v, nonneg=True)  # noqa: E731
_count = lambda loc, v: _num(loc, v, positive=True, integer=True)  # noqa: E731

_SWEEP = {"f_min": _pos, "f_max": _pos, "points": _count, "f_start": _pos, "step": _pos}
_RIS = {"rows": _count, "cols": _count, "pitch": _pos, "design_frequency": _pos}
_ANTENNAS = {"tx": _vec3, "rx": _vec3}
_TARGET = {
    "name": _str, "shape": _str, "center": _vec3, "reflectivity": _nonneg, "points": _count,
    "height": _pos, "width": _pos, "radius": _pos, "size": _vec3, "pose": _str,
}
_RADAR = {"sigma_r": _nonneg, "sigma_phi": _nonneg, "cluster_radius": _pos}
_ROI = {"step": _pos, "span_phi": _nonneg, "span_theta": _nonneg, "center_theta": _num, "range_pad": _pos}
_IMAGING = {
    "voxel_size": _pos, "delta": _pos, "sigma": _pos, "tau_db": _num, "sigma_in_meters": _bool,
    "compensate": _bool, "r_ref": _pos, "grid_pad": _nonneg, "truncate": _pos,
}
_PROCESSING = {"fft_len": _count, "window": _bool, "grid": _str}
_SIM = {
    "spreading_loss": _bool, "noise_std": _nonneg, "leakage": _bool, "leakage_amplitude": _nonneg,
    "leakage_range": _nonneg, "quantized": _bool,
}
_TOP = {"name", "seed", "sweep", "ris", "antennas", "targets", "radar", "roi", "imaging", "processing", "sim"}


def _build_sweep(loc, d) -> SweepConfig:
    if not d:
        return ScenarioConfig.sweep
    if "f_min" in d or "f_max" in d:
        if "f_start" in d or "step" in d:
            raise ConfigError(f"{loc}: give either f_min/f_max or f_start/step, not both")
        missing = {"f_min", "f_max", "points"} - d.keys()
        if missing:
            raise ConfigError(f"{loc}.{sorted(missing)[0]}: required with f_min/f_max")
        return SweepConfig.from_band(d["f_min"], d["f_max"], d["points"])
    missing = {"f_start", "step", "points"} - d.keys()
    if missing:
        raise ConfigError(f"{loc}.{sorted(missing)[0]}: required")
    return SweepConfig(d["f_start"], d["step"], d["points"])


def parse_scenario(doc: dict, source: str = "<memory>") -> ScenarioConfig:
    """Validate a decoded TOML document."""
    for key in doc:
        if key not in _TOP:
            raise ConfigError(f"{source}: {key}: unknown top-level key (allowed: {', '.join(sorted(_TOP))})")
    kw: dict[str, Any] = {"source": source}
    try:
        if "name" in doc:
            kw["name"] = _str(f"{source}: name", doc["name"])
        if "seed" in doc:
            kw["seed"] = _num(f"{source}: seed", doc["seed"], nonneg=True, integer=True)
        try:
            kw["sweep"] = _build_sweep(f"{source}: sweep", _section(f"{source}: sweep", doc.get("sweep", {}), _SWEEP))
        except ValueError as exc:
            raise ConfigError(f"{source}: sweep: {exc}") from None
        ris = _section(f"{source}: ris", doc.get("ris", {}), _RIS)
        kw["ris"] = RisConfig(**ris)
        ant = _section(f"{source}: antennas", doc.get("antennas", {}), _ANTENNAS)
        if "tx" in ant:
            kw["tx"] = CartesianPoint(*ant["tx"])
        kw["rx"] = CartesianPoint(*ant["rx"]) if "rx" in ant else kw.get("tx", ScenarioConfig.tx)
        targets = doc.get("targets", [])
        if not isinstance(targets, list):
            raise ConfigError(f"{source}: targets: expected an array of tables ([[targets]])")
        specs = []
        for i, t in enumerate(targets):
            loc = f"{source}: targets[{i}]"
            d = _section(loc, t, _TARGET)
            for req in ("shape", "center"):
                if req not in d:
                    raise ConfigError(f"{loc}.{req}: required")
            if d["shape"] not in SHAPES:
                raise ConfigError(f"{loc}.shape: unknown shape {d['shape']!r} (allowed: {', '.join(SHAPES)})")
            if d.get("pose", "standing") not in ("standing", "arm_extended"):
                raise ConfigError(f"{loc}.pose: unknown pose {d['pose']!r}")
            d.setdefault("name", f"target{i}")
            specs.append(TargetSpec(**d))
        kw["targets"] = tuple(specs)
        kw["radar"] = RadarConfig(**_section(f"{source}: radar", doc.get("radar", {}), _RADAR))
        kw["roi"] = RoiDefaults(**_section(f"{source}: roi", doc.get("roi", {}), _ROI))
        img = _section(f"{source}: imaging", doc.get("imaging", {}), _IMAGING)
        try:
            kw["imaging"] = ImagingParams(**img)
        except ValueError as exc:
            raise ConfigError(f"{source}: imaging: {exc}") from None
        proc = _section(f"{source}: processing", doc.get("processing", {}), _PROCESSING)
        if proc.get("grid", "auto") not in ("auto", "hemisphere"):
            raise ConfigError(f"{source}: processing.grid: expected 'auto' or 'hemisphere', got {proc['grid']!r}")
        sweep_points = kw["sweep"].points
        if proc.get("fft_len", sweep_points) < sweep_points:
            raise ConfigError(f"{source}: processing.fft_len: must be >= sweep points ({sweep_points})")
        kw["processing"] = ProcessingConfig(**proc)
        sim = _section(f"{source}: sim", doc.get("sim", {}), _SIM)
        kw["sim"] = SimOptions(
            include_spreading_loss=sim.get("spreading_loss", True),
            noise_std=sim.get("noise_std", 0.0),
            include_direct_leakage=sim.get("leakage", False),
            leakage_amplitude=sim.get("leakage_amplitude", 1.0),
            leakage_range=sim.get("leakage_range", 0.0),
            quantized=sim.get("quantized", True),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return ScenarioConfig(**kw)


def bundled_scenarios() -> list[str]:
    root = resources.files("risim") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def _resolve(path: str | PathLike) -> tuple[str, bytes]:
    p = Path(path)
    if p.is_file():
        return str(p), p.read_bytes()
    name = str(path)
    if name.endswith(".toml"):
        name = name[:-5]
    res = resources.files("risim") / "scenarios" / f"{name}.toml"
    if res.is_file():
        return f"<bundled {name}>", res.read_bytes()
    raise ConfigError(f"{path}: no such file or bundled scenario (bundled: {', '.join(bundled_scenarios())})")


def load_scenario(path: str | PathLike) -> ScenarioConfig:
    """Read, parse and validate a scenario file or bundled scenario name."""
    source, raw = _resolve(path)
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: parse error: {exc}") from None
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{source}: not UTF-8 text: {exc}") from None
    return parse_scenario(doc, source)
