"""Canonical scenario builders used by the acceptance suite and handy as
starting points for experiments.

The tracking set deliberately sticks to paths whose heading stays inside
(-pi/2, pi/2): with u1 >= 0 and the heading window, the predictive stack can
never make x decrease, so both controllers are compared on paths they can both
follow.
"""

from __future__ import annotations

from dataclasses import replace

from .scenario import (AvoidanceConfig, NoiseConfig, PerturbationConfig,
                       ScenarioConfig, SyncConfig)

LINE_PATH = {"kind": "polyline", "waypoints": ((0.0, 0.0), (25.0, 0.0)), "speed": 1.0}
SINE_PATH = {"kind": "sinusoid", "amplitude": 1.0, "wavelength": 12.0, "speed": 1.0}
# Gentle arc: heading runs 0 -> ~57 degrees over 20 s at unit speed.
ARC_PATH = {"kind": "circle", "cx": 0.0, "cy": 20.0, "radius": 20.0,
            "omega": 0.05, "phase": -1.5707963267948966}
FULL_CIRCLE_PATH = {"kind": "circle", "cx": 0.0, "cy": 0.0, "radius": 5.0, "omega": 0.2}

TRACKING_PATHS = {"line": LINE_PATH, "sinusoid": SINE_PATH, "arc": ARC_PATH}


def nominal_tracking(controller: str, path_name: str = "line",
                     seed: int = 0) -> ScenarioConfig:
    """On-path start, nominal plant, no measurement noise."""
    return ScenarioConfig(
        name=f"{path_name}-{controller}-nominal",
        controller=controller,
        path=TRACKING_PATHS[path_name],
        seed=seed,
        noise=NoiseConfig(enabled=False),
        perturbation=PerturbationConfig(enabled=False),
    )


def safety_scenario(controller: str, seed: int) -> ScenarioConfig:
    """Line following with measurement noise; the sweep machinery drops a
    randomly placed crossing obstacle onto the path."""
    return ScenarioConfig(
        name=f"safety-{controller}",
        controller=controller,
        path=LINE_PATH,
        seed=seed,
        noise=NoiseConfig(enabled=True, sigma=0.1),
        perturbation=PerturbationConfig(enabled=False),
        avoidance=AvoidanceConfig(margin=0.5, sensing_radius=5.0, lead=0.5),
    )


def robustness_scenario(controller: str, seed: int) -> ScenarioConfig:
    """Safety scenario plus the piecewise-constant output perturbation."""
    return replace(safety_scenario(controller, seed),
                   name=f"robust-{controller}",
                   perturbation=PerturbationConfig(enabled=True, switch_interval=2.0,
                                                   low=-0.5, high=0.5))


def startup_offset_scenario(sync_enabled: bool, seed: int = 7) -> ScenarioConfig:
    """Vehicle dropped well ahead of the reference start; with synchronization
    off it backtracks toward the t=0 point before turning around."""
    return ScenarioConfig(
        name=f"startup-{'sync' if sync_enabled else 'nosync'}",
        controller="heol",
        path=LINE_PATH,
        start=(3.0, 0.4),
        seed=seed,
        noise=NoiseConfig(enabled=True, sigma=0.1),
        perturbation=PerturbationConfig(enabled=False),
        sync=SyncConfig(enabled=sync_enabled),
    )
