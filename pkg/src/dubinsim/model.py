"""Kinematic vehicle model and its supporting noise/perturbation machinery.

The plant is the classic two-input planar car

    x' = u1 * cos(u2)
    y' = u1 * (1 + p) * sin(u2)

with u1 the linear speed, u2 the heading angle and p a piecewise-constant
output perturbation (p = 0 for the nominal plant).  The auxiliary controls
nu1 = u1*cos(u2), nu2 = u1*sin(u2) turn the plant into two parallel
integrators, which is what the flatness-based controller works with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StateIntegrityError

# Below this speed atan2(nu2, nu1) is ill-conditioned; the heading is frozen
# at its previous value instead.
EPS_SPEED = 1e-6

# Sub-stream indices for the counter-based seed construction.  Every consumer
# derives its generator from (master_seed, stream_index), so adding a consumer
# never shifts the draws seen by an existing one.
STREAM_NOISE_X = 0
STREAM_NOISE_Y = 1
STREAM_PERTURBATION = 2
STREAM_PLACEMENT = 3


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Generator for one named sub-stream of a master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream)]))


@dataclass(frozen=True)
class VehicleState:
    """Planar pose sample of the rear-axle midpoint at time t."""

    t: float
    x: float
    y: float


@dataclass(frozen=True)
class ControlInput:
    """True controls (u1, u2) plus optional auxiliary controls (nu1, nu2).

    The auxiliary fields are populated by the flatness stack only; the
    predictive controller commands (u1, u2) directly.
    """

    u1: float
    u2: float
    nu1: float | None = None
    nu2: float | None = None


def aux_to_true(nu1: float, nu2: float, prev_u2: float = 0.0) -> tuple[float, float]:
    """Map auxiliary controls to (u1, u2).

    u1 = sqrt(nu1^2 + nu2^2), u2 = atan2(nu2, nu1).  Below EPS_SPEED the
    heading is held at ``prev_u2``.
    """
    u1 = math.hypot(nu1, nu2)
    if u1 < EPS_SPEED:
        return u1, prev_u2
    return u1, math.atan2(nu2, nu1)


def true_to_aux(u1: float, u2: float) -> tuple[float, float]:
    """Map true controls to auxiliary controls (nu1, nu2)."""
    return u1 * math.cos(u2), u1 * math.sin(u2)


def step_plant(state: VehicleState, control: ControlInput, p: float = 0.0,
               dt: float = 0.01) -> VehicleState:
    """One explicit-Euler step of the (possibly perturbed) plant.

    The perturbation p scales the y-rate by (1 + p); p = 0 recovers the
    nominal dynamics exactly.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not (math.isfinite(state.x) and math.isfinite(state.y)
            and math.isfinite(control.u1) and math.isfinite(control.u2)
            and math.isfinite(p)):
        raise StateIntegrityError(
            f"non-finite plant input at t={state.t}: state=({state.x}, {state.y}), "
            f"control=({control.u1}, {control.u2}), p={p}")
    x = state.x + dt * control.u1 * math.cos(control.u2)
    y = state.y + dt * control.u1 * (1.0 + p) * math.sin(control.u2)
    if not (math.isfinite(x) and math.isfinite(y)):
        raise StateIntegrityError(f"plant state diverged at t={state.t}")
    return VehicleState(t=state.t + dt, x=x, y=y)


@dataclass
class NoiseModel:
    """Additive i.i.d. Gaussian measurement noise on x and y.

    Each axis draws from its own seeded stream so that measurement order
    never couples the axes.  A disabled model returns the true state and
    consumes no draws.
    """

    sigma: float = 0.1
    seed: int = 0
    enabled: bool = True
    _rng_x: np.random.Generator = field(init=False, repr=False)
    _rng_y: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        self._rng_x = stream_rng(self.seed, STREAM_NOISE_X)
        self._rng_y = stream_rng(self.seed, STREAM_NOISE_Y)


def measure(state: VehicleState, noise: NoiseModel) -> tuple[float, float]:
    """Measured (x, y): true position plus per-axis Gaussian noise."""
    if not noise.enabled:
        return state.x, state.y
    return (state.x + noise.sigma * float(noise._rng_x.standard_normal()),
            state.y + noise.sigma * float(noise._rng_y.standard_normal()))


@dataclass(frozen=True)
class PerturbationSchedule:
    """Piecewise-constant perturbation signal p(t).

    p(t) = values[floor(t / switch_interval)], clamped to the last level.
    """

    switch_interval: float
    values: tuple
    seed: int = 0

    def __post_init__(self):
        if self.switch_interval <= 0.0:
            raise ValueError("switch_interval must be positive")
        if not self.values:
            raise ValueError("values must be non-empty")

    @classmethod
    def zero(cls) -> "PerturbationSchedule":
        """Nominal plant: p identically zero."""
        return cls(switch_interval=math.inf, values=(0.0,), seed=0)

    @classmethod
    def draw(cls, duration: float, switch_interval: float = 2.0, seed: int = 0,
             low: float = -0.5, high: float = 0.5) -> "PerturbationSchedule":
        """Draw enough uniform levels on [low, high] to cover [0, duration]."""
        if not -0.5 <= low <= high <= 0.5:
            raise ValueError(f"perturbation range [{low}, {high}] must lie in [-0.5, 0.5]")
        n = max(1, int(math.floor(duration / switch_interval + 1e-9)) + 1)
        rng = stream_rng(seed, STREAM_PERTURBATION)
        vals = tuple(float(v) for v in rng.uniform(low, high, size=n))
        return cls(switch_interval=float(switch_interval), values=vals, seed=int(seed))

    def at(self, t: float) -> float:
        if t < 0.0:
            t = 0.0
        i = 0 if math.isinf(self.switch_interval) else int(t / self.switch_interval)
        return self.values[min(i, len(self.values) - 1)]
