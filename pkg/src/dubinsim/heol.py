"""Flatness-based tracking loop.

Around a reference trajectory the error dynamics of the auxiliary-control
plant collapse to two decoupled first-order relations

    d(dx_err)/dt = F_x + dnu1      d(dy_err)/dt = F_y + dnu2

where F lumps every mismatch and disturbance.  The loop estimates F per axis
from a sliding window and closes with the intelligent proportional law

    dnu = -(F_hat + K * err)

on top of the open-loop feedforward.  With a good estimate the error contracts
like exp(-K t) regardless of what F actually was.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ControllerFault
from .estimation import FWindow
from .model import ControlInput, aux_to_true
from .reference import ReferenceTrajectory


@dataclass(frozen=True)
class HeolGains:
    kx: float = 2.0
    ky: float = 2.0
    t_window: float = 0.3

    def __post_init__(self):
        if self.kx <= 0.0 or self.ky <= 0.0:
            raise ValueError("proportional gains must be positive")
        if self.t_window <= 0.0:
            raise ValueError("t_window must be positive")


class EstimatorWindow(FWindow):
    """Window of (flat-output error, auxiliary-control error) samples."""

    def __init__(self, t_window: float, dt: float):
        super().__init__(t_window, dt, input_gain=1.0)


def estimate_F(window) -> float:
    """Sliding-window drift estimate; 0 while the window is still warming up."""
    return window.estimate()


def heol_step(meas: tuple[float, float], traj: ReferenceTrajectory, t: float,
              gains: HeolGains, windows, prev_u2: float = 0.0) -> ControlInput:
    """One closed-loop step: feedforward plus the iP correction.

    ``windows`` is the (x-axis, y-axis) estimator pair.  The freshly computed
    (error, correction) samples are pushed after the output is formed, so the
    estimate never sees data from its own step.
    """
    xm, ym = meas
    if not (math.isfinite(xm) and math.isfinite(ym)):
        raise ControllerFault(f"non-finite measurement ({xm}, {ym}) at t={t}")
    win_x, win_y = windows
    x_ref, y_ref, dx_ref, dy_ref = traj.lookup(t)
    ex = xm - x_ref
    ey = ym - y_ref
    fx = estimate_F(win_x)
    fy = estimate_F(win_y)
    dnu1 = -(fx + gains.kx * ex)
    dnu2 = -(fy + gains.ky * ey)
    nu1 = dx_ref + dnu1
    nu2 = dy_ref + dnu2
    u1, u2 = aux_to_true(nu1, nu2, prev_u2)
    win_x.push(ex, dnu1)
    win_y.push(ey, dnu2)
    return ControlInput(u1=u1, u2=u2, nu1=nu1, nu2=nu2)


class HeolController:
    """Stateful wrapper owning the two estimator windows and the last heading."""

    kind = "heol"

    def __init__(self, gains: HeolGains, dt: float):
        self.gains = gains
        self.win_x = EstimatorWindow(gains.t_window, dt)
        self.win_y = EstimatorWindow(gains.t_window, dt)
        self.prev_u2 = 0.0
        self.events: list = []

    def step(self, x_meas: float, y_meas: float, traj: ReferenceTrajectory,
             t: float) -> ControlInput:
        ctrl = heol_step((x_meas, y_meas), traj, t, self.gains,
                         (self.win_x, self.win_y), prev_u2=self.prev_u2)
        self.prev_u2 = ctrl.u2
        return ctrl

    @property
    def last_fhat(self) -> tuple[float, float]:
        return self.win_x.last_estimate, self.win_y.last_estimate
