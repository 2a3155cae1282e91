"""Scenario configuration (JSON-backed) and the per-run result container.

Config files are versioned JSON documents; ``ScenarioConfig.from_dict``
validates everything up front so a bad file fails fast at the CLI boundary
rather than mid-sweep.  Defaults follow the experiment regime the controllers
were designed around: 0.01 s sampling, 20 s runs, measurement noise with
sigma = 0.1 m and piecewise-constant perturbations drawn uniformly from
[-0.5, +0.5].
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .avoidance import Obstacle
from .errors import ConfigError, DegeneratePathError
from .reference import PATH_KINDS, path_spec_from_dict

CONFIG_VERSION = 1

CONTROLLERS = ("heol", "mfpc")


@dataclass(frozen=True)
class NoiseConfig:
    enabled: bool = True
    sigma: float = 0.1


@dataclass(frozen=True)
class PerturbationConfig:
    enabled: bool = False
    switch_interval: float = 2.0
    low: float = -0.5
    high: float = 0.5


@dataclass(frozen=True)
class HeolConfig:
    kx: float = 2.0
    ky: float = 2.0
    t_window: float = 0.3


@dataclass(frozen=True)
class MfpcConfig:
    alpha1: float = 1.0
    alpha2: float = 1.5
    horizon: float = 0.3
    t_window: float = 0.7
    u1_max: float = 5.0
    u2_margin: float = 0.01
    eval_at_next: bool = False


@dataclass(frozen=True)
class SyncConfig:
    enabled: bool = True
    tau_max: float = 5.0
    startup_threshold: float = 0.5


@dataclass(frozen=True)
class AvoidanceConfig:
    margin: float = 0.5
    sensing_radius: float = 5.0
    lead: float = 0.5
    speed_hint: float | None = None  # None: reference speed at the crossing


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    dt: float = 0.01
    duration: float = 20.0
    seed: int = 0
    noise_seed: int | None = None          # None: master seed
    perturbation_seed: int | None = None   # None: master seed
    controller: str = "heol"
    path: dict = field(default_factory=lambda: {
        "kind": "polyline", "waypoints": ((0.0, 0.0), (25.0, 0.0)), "speed": 1.0})
    start: tuple | None = None             # None: reference start point
    obstacles: tuple = ()
    noise: NoiseConfig = NoiseConfig()
    perturbation: PerturbationConfig = PerturbationConfig()
    heol: HeolConfig = HeolConfig()
    mfpc: MfpcConfig = MfpcConfig()
    sync: SyncConfig = SyncConfig()
    avoidance: AvoidanceConfig = AvoidanceConfig()

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.dt <= 0.0 or self.duration <= 0.0:
            raise ConfigError("dt and duration must be positive")
        steps = self.duration / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError(f"duration/dt = {steps} is not an integer")
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"controller must be one of {CONTROLLERS}, got {self.controller!r}")
        if self.path.get("kind") not in PATH_KINDS:
            raise ConfigError(f"unknown path kind {self.path.get('kind')!r}")
        if self.noise.sigma < 0.0:
            raise ConfigError("noise sigma must be non-negative")
        p = self.perturbation
        if not -0.5 <= p.low <= p.high <= 0.5:
            raise ConfigError("perturbation range must satisfy -0.5 <= low <= high <= 0.5")
        if p.switch_interval <= 0.0:
            raise ConfigError("perturbation switch_interval must be positive")
        if self.heol.kx <= 0.0 or self.heol.ky <= 0.0:
            raise ConfigError("HEOL gains must be positive")
        if self.sync.tau_max <= 0.0:
            raise ConfigError("tau_max must be positive")
        for ob in self.obstacles:
            if ob.r <= 0.0:
                raise ConfigError("obstacle radius must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def path_spec(self):
        try:
            return path_spec_from_dict(self.path)
        except DegeneratePathError as exc:
            raise ConfigError(str(exc)) from exc

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "version": CONFIG_VERSION,
            "name": self.name,
            "dt": self.dt,
            "duration": self.duration,
            "seed": self.seed,
            "controller": self.controller,
            "path": _jsonable(self.path),
            "start": list(self.start) if self.start is not None else None,
            "obstacles": [asdict(ob) for ob in self.obstacles],
            "noise": asdict(self.noise),
            "perturbation": asdict(self.perturbation),
            "heol": asdict(self.heol),
            "mfpc": asdict(self.mfpc),
            "sync": asdict(self.sync),
            "avoidance": asdict(self.avoidance),
        }
        if self.noise_seed is not None:
            d["noise_seed"] = self.noise_seed
        if self.perturbation_seed is not None:
            d["perturbation_seed"] = self.perturbation_seed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        version = d.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version}")
        known = {"version", "name", "dt", "duration", "seed", "noise_seed",
                 "perturbation_seed", "controller", "path", "start", "obstacles",
                 "noise", "perturbation", "heol", "mfpc", "sync", "avoidance"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            obstacles = tuple(Obstacle(**ob) for ob in d.get("obstacles", ()))
            start = d.get("start")
            return cls(
                name=d.get("name", "scenario"),
                dt=float(d.get("dt", 0.01)),
                duration=float(d.get("duration", 20.0)),
                seed=int(d.get("seed", 0)),
                noise_seed=d.get("noise_seed"),
                perturbation_seed=d.get("perturbation_seed"),
                controller=d.get("controller", "heol"),
                path=d.get("path", {"kind": "polyline",
                                    "waypoints": ((0.0, 0.0), (25.0, 0.0)),
                                    "speed": 1.0}),
                start=tuple(float(v) for v in start) if start is not None else None,
                obstacles=obstacles,
                noise=NoiseConfig(**d.get("noise", {})),
                perturbation=PerturbationConfig(**d.get("perturbation", {})),
                heol=HeolConfig(**d.get("heol", {})),
                mfpc=MfpcConfig(**d.get("mfpc", {})),
                sync=SyncConfig(**d.get("sync", {})),
                avoidance=AvoidanceConfig(**d.get("avoidance", {})),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def with_overrides(cfg: ScenarioConfig, **kwargs) -> ScenarioConfig:
    """dataclasses.replace with validation re-run."""
    return replace(cfg, **kwargs)


@dataclass
class ScenarioResult:
    """Full time series plus events and scalar metrics for one run.

    Aborted runs keep full-length arrays (NaN past the failure) so sweeps can
    aggregate them without special cases.
    """

    config: ScenarioConfig
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    x_meas: np.ndarray
    y_meas: np.ndarray
    x_ref: np.ndarray
    y_ref: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    nu1: np.ndarray | None
    nu2: np.ndarray | None
    fhat_x: np.ndarray
    fhat_y: np.ndarray
    p: np.ndarray
    events: list
    metrics: dict
    aborted: bool = False
    abort_reason: str = ""


def compute_metrics(cfg: ScenarioConfig, series: dict, events: list) -> dict:
    """Scalar summary of one run's series.

    rms/max tracking are measured against the active (revised) reference.
    reverse_distance accumulates travel whose displacement projects negatively
    onto the local reference tangent.
    """
    # divergent-but-finite samples of an aborted run may overflow the squares
    with np.errstate(over="ignore"):
        return _compute_metrics(cfg, series, events)


def _compute_metrics(cfg: ScenarioConfig, series: dict, events: list) -> dict:
    x, y = series["x"], series["y"]
    xr, yr = series["x_ref"], series["y_ref"]
    valid = np.isfinite(x) & np.isfinite(y) & np.isfinite(xr) & np.isfinite(yr)
    err2 = (x[valid] - xr[valid]) ** 2 + (y[valid] - yr[valid]) ** 2
    metrics = {
        "rms_tracking": float(np.sqrt(err2.mean())) if err2.size else float("nan"),
        "max_tracking": float(np.sqrt(err2.max())) if err2.size else float("nan"),
    }
    fx, fy = np.diff(x), np.diff(y)
    seg_ok = np.isfinite(fx) & np.isfinite(fy)
    seg_len = np.hypot(fx[seg_ok], fy[seg_ok])
    metrics["total_path_length"] = float(seg_len.sum())

    tx, ty = series["dx_ref"][:-1][seg_ok], series["dy_ref"][:-1][seg_ok]
    speed = np.hypot(tx, ty)
    moving = speed > 1e-9
    proj = np.zeros_like(seg_len)
    proj[moving] = (fx[seg_ok][moving] * tx[moving] + fy[seg_ok][moving] * ty[moving]) / speed[moving]
    metrics["reverse_distance"] = float(seg_len[proj < 0.0].sum())

    u1 = series["u1"][:-1]
    u1_ok = np.isfinite(u1)
    metrics["control_energy"] = float((u1[u1_ok] ** 2).sum() * cfg.dt)

    clearances = []
    for ob in cfg.obstacles:
        d = np.hypot(x[valid] - ob.cx, y[valid] - ob.cy)
        clearances.append(float(d.min()) if d.size else float("nan"))
    metrics["min_clearance"] = clearances

    metrics["detour_total"] = float(sum(e.get("detour", 0.0) for e in events
                                        if e.get("kind") == "bypass_start"))
    metrics["n_bypasses"] = sum(1 for e in events if e.get("kind") == "bypass_start")
    metrics["n_sync_events"] = sum(1 for e in events if e.get("kind") == "sync")
    return metrics
