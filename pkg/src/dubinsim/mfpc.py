"""Model-free predictive control.

Each axis is described only by the first-order ultra-local model
dy/dt = F + alpha*u with F re-estimated from recent data every step.  For the
quadratic cost (y - y_set)^2 + u^2 the Euler-Lagrange equation is the linear
ODE y'' = alpha^2 (y - y_set), whose solution through the two boundary points
(t_i, y_i) and (t_f, y_set) is available in closed form.  The loop re-solves
this tiny boundary problem every sample on a receding horizon and applies the
initial optimal velocity, corrected by the current drift estimate.

The x axis drives the speed u1 and the y axis drives the heading u2, which is
kept strictly inside (-pi/2, pi/2); with u1 >= 0 this stack can therefore only
track paths whose x never has to decrease.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ControllerFault, HorizonTooLongError
from .estimation import FWindow
from .model import ControlInput
from .reference import ReferenceTrajectory

# |rate * (t_f - t_i)| beyond this risks overflow in the exponentials; callers
# shrink the horizon instead.
MAX_EXP_ARG = 40.0


@dataclass(frozen=True)
class BoundarySolution:
    """y*(t) = y_setpoint + c1*exp(rate*t) + c2*exp(-rate*t) on [t_i, t_f]."""

    c1: float
    c2: float
    t_i: float
    t_f: float
    rate: float
    y_setpoint: float

    def value(self, t: float) -> float:
        return self.y_setpoint + self.c1 * math.exp(self.rate * t) + self.c2 * math.exp(-self.rate * t)

    def velocity(self, t: float) -> float:
        return self.rate * (self.c1 * math.exp(self.rate * t) - self.c2 * math.exp(-self.rate * t))


def solve_two_point(y_i: float, y_setpoint: float, t_i: float, t_f: float,
                    alpha: float) -> BoundarySolution:
    """Closed-form optimal arc through y(t_i) = y_i and y(t_f) = y_setpoint.

    The sign of alpha is irrelevant here (negating it swaps c1 and c2), so the
    exponent rate is |alpha|.  The solution does not depend on the drift value
    the model currently carries.
    """
    if not t_f > t_i:
        raise ValueError(f"need t_f > t_i, got [{t_i}, {t_f}]")
    if alpha == 0.0:
        raise ValueError("alpha must be nonzero")
    rate = abs(alpha)
    if rate * (t_f - t_i) > MAX_EXP_ARG:
        raise HorizonTooLongError(
            f"rate*(t_f - t_i) = {rate * (t_f - t_i):.3g} exceeds {MAX_EXP_ARG}")
    den = math.exp(rate * t_i) * math.exp(-rate * t_f) - math.exp(-rate * t_i) * math.exp(rate * t_f)
    dy = y_i - y_setpoint
    c1 = dy * math.exp(-rate * t_f) / den
    c2 = -math.exp(rate * t_f) * dy / den
    return BoundarySolution(c1=c1, c2=c2, t_i=t_i, t_f=t_f, rate=rate,
                            y_setpoint=y_setpoint)


class UltraLocalAxis:
    """Per-axis state: scaling constant, sample window, drift estimate, clamps."""

    def __init__(self, alpha: float, t_window: float, dt: float,
                 u_min: float | None = None, u_max: float | None = None,
                 eval_at_next: bool = False):
        if alpha == 0.0:
            raise ValueError("alpha must be nonzero")
        self.alpha = float(alpha)
        self.dt = float(dt)
        self.window = FWindow(t_window, dt, input_gain=self.alpha)
        self.u_min = u_min
        self.u_max = u_max
        self.eval_at_next = eval_at_next
        self.f_est = 0.0
        self.last_solution: BoundarySolution | None = None
        self.last_raw_u = 0.0
        self.last_clamped = False


def estimate_F_ul(window) -> float:
    """Data-driven drift estimate for the ultra-local model (0 during warm-up)."""
    return window.estimate()


def mfpc_axis_step(axis: UltraLocalAxis, y_meas: float, y_setpoint: float,
                   t_k: float, t_f: float) -> float:
    """One receding-horizon step for a single axis; returns the applied input.

    The horizon is shrunk if the exponent guard would trip.  The input pushed
    into the estimation window is the clamped value actually applied.
    """
    axis.f_est = estimate_F_ul(axis.window)
    rate = abs(axis.alpha)
    if rate * (t_f - t_k) > MAX_EXP_ARG:
        t_f = t_k + MAX_EXP_ARG / rate
    if not t_f > t_k + axis.dt:
        raise HorizonTooLongError(f"horizon [{t_k}, {t_f}] shorter than one step")
    sol = solve_two_point(y_meas, y_setpoint, t_k, t_f, axis.alpha)
    t_eval = t_k + axis.dt if axis.eval_at_next else t_k
    u = (sol.velocity(t_eval) - axis.f_est) / axis.alpha
    axis.last_raw_u = u
    axis.last_clamped = False
    if axis.u_min is not None and u < axis.u_min:
        u = axis.u_min
        axis.last_clamped = True
    if axis.u_max is not None and u > axis.u_max:
        u = axis.u_max
        axis.last_clamped = True
    axis.window.push(y_meas, u)
    axis.last_solution = sol
    return u


def mfpc_step(meas: tuple[float, float], traj: ReferenceTrajectory, t: float,
              axes: tuple[UltraLocalAxis, UltraLocalAxis],
              horizon: float) -> ControlInput:
    """Full MIMO step: x axis -> u1, y axis -> u2, setpoints read one horizon
    ahead on the (possibly revised) reference."""
    xm, ym = meas
    if not (math.isfinite(xm) and math.isfinite(ym)):
        raise ControllerFault(f"non-finite measurement ({xm}, {ym}) at t={t}")
    axis_x, axis_y = axes
    x_sp, y_sp = traj.position(t + horizon)
    t_f = t + horizon
    u1 = mfpc_axis_step(axis_x, xm, x_sp, t, t_f)
    u2 = mfpc_axis_step(axis_y, ym, y_sp, t, t_f)
    return ControlInput(u1=u1, u2=u2)


@dataclass(frozen=True)
class MfpcParams:
    alpha1: float = 1.0
    alpha2: float = 1.5
    horizon: float = 0.3
    t_window: float = 0.3
    u1_max: float = 5.0
    u2_margin: float = 0.01
    eval_at_next: bool = False

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if not 0.0 < self.u2_margin < math.pi / 2:
            raise ValueError("u2_margin must lie in (0, pi/2)")


class MfpcController:
    """Stateful wrapper owning the two ultra-local axes; logs clamp episodes."""

    kind = "mfpc"

    def __init__(self, params: MfpcParams, dt: float):
        self.params = params
        u2_lim = math.pi / 2 - params.u2_margin
        self.axis_x = UltraLocalAxis(params.alpha1, params.t_window, dt,
                                     u_min=0.0, u_max=params.u1_max,
                                     eval_at_next=params.eval_at_next)
        self.axis_y = UltraLocalAxis(params.alpha2, params.t_window, dt,
                                     u_min=-u2_lim, u_max=u2_lim,
                                     eval_at_next=params.eval_at_next)
        self.horizon = params.horizon
        self.events: list = []
        self._in_episode = {"u1": False, "u2": False}

    def step(self, x_meas: float, y_meas: float, traj: ReferenceTrajectory,
             t: float) -> ControlInput:
        ctrl = mfpc_step((x_meas, y_meas), traj, t,
                         (self.axis_x, self.axis_y), self.horizon)
        for name, axis in (("u1", self.axis_x), ("u2", self.axis_y)):
            if axis.last_clamped and not self._in_episode[name]:
                self.events.append({"kind": "clamp", "t": t, "input": name,
                                    "raw": axis.last_raw_u})
            self._in_episode[name] = axis.last_clamped
        return ctrl

    @property
    def last_fhat(self) -> tuple[float, float]:
        return self.axis_x.f_est, self.axis_y.f_est
