"""Obstacle discovery, danger-zone crossing detection and bypass planning.

Obstacles are disks; the keep-out region is the disk inflated by a safety
margin.  When the active reference crosses a danger zone the planner builds a
tangent-arc-tangent wrap around it: straight onto the circle, along it, and
straight back to the reference.  That construction is the shortest smooth path
between two outside points that respects the keep-out radius, so comparing the
two sides' extra length directly implements detour minimization.

Side naming follows the direction of travel at the crossing: a "right" bypass
keeps the obstacle on the vehicle's left, which is a counterclockwise wrap of
the danger circle; "left" is the clockwise wrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InfeasibleBypassError
from .model import VehicleState
from .reference import ReferenceTrajectory, SyncEvent

TWO_PI = 2.0 * math.pi

# Bypass geometry is planned on a circle this much larger than the danger
# radius so sampled arc points never fall inside the zone through rounding.
CLEARANCE_PAD = 1e-6


@dataclass(frozen=True)
class Obstacle:
    cx: float
    cy: float
    r: float
    t_appear: float = 0.0

    def __post_init__(self):
        if self.r <= 0.0:
            raise ValueError("obstacle radius must be positive")
        if self.t_appear < 0.0:
            raise ValueError("t_appear must be non-negative")

    def danger_zone(self, margin: float) -> "DangerZone":
        if margin <= 0.0:
            raise ValueError("safety margin must be positive")
        return DangerZone(cx=self.cx, cy=self.cy, r_danger=self.r + margin)


@dataclass(frozen=True)
class DangerZone:
    cx: float
    cy: float
    r_danger: float


@dataclass(frozen=True)
class BypassPlan:
    side: str  # "left" | "right"
    entry_point: tuple  # tangency point onto the danger circle
    exit_point: tuple   # tangency point leaving it
    arc_center: tuple
    arc_radius: float
    arc_start: float    # angle of entry_point around the center
    arc_sweep: float    # unsigned sweep, radians
    orientation: int    # +1 counterclockwise, -1 clockwise
    detour_length: float
    t_start: float      # splice interval on the reference timeline
    t_end: float
    t_exit_original: float  # original-timeline instant of the exit anchor
    tau_tail: float         # t_exit_original - t_end; tail re-timing offset
    x: np.ndarray
    y: np.ndarray
    dx: np.ndarray
    dy: np.ndarray


def discover(obstacles, state: VehicleState, sensing_radius: float,
             known=frozenset()) -> list[int]:
    """Indices of obstacles that become known at this state.

    An obstacle is discoverable once it exists (t >= t_appear) and the vehicle
    is within sensing range.  Discovery is monotone: the caller keeps the
    ``known`` set and obstacles are never forgotten.
    """
    newly = []
    for i, ob in enumerate(obstacles):
        if i in known or ob.t_appear > state.t + 1e-12:
            continue
        if math.hypot(state.x - ob.cx, state.y - ob.cy) <= sensing_radius:
            newly.append(i)
    return newly


def _bisect_boundary(xa, ya, xb, yb, ta, tb, cx, cy, r2, iters=60):
    """Time of the zone-boundary crossing on the segment (a outside, b inside
    or vice versa), refined well past 1e-6 m."""
    lo, hi = 0.0, 1.0
    inside_b = (xb - cx) ** 2 + (yb - cy) ** 2 < r2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        mx = xa + mid * (xb - xa)
        my = ya + mid * (yb - ya)
        if (((mx - cx) ** 2 + (my - cy) ** 2) < r2) == inside_b:
            hi = mid
        else:
            lo = mid
    s = 0.5 * (lo + hi)
    return ta + s * (tb - ta)


def path_crosses_zone(traj: ReferenceTrajectory, zone: DangerZone,
                      t_from: float = 0.0):
    """First maximal interval [t_in, t_out] where the reference runs strictly
    inside the danger circle, scanning forward from t_from; None if it never
    enters.  Boundary times come from bisection on the sample segments."""
    i0 = max(0, int(math.ceil((t_from - traj.t0) / traj.dt - 1e-9)))
    if i0 > traj.n - 1:
        return None
    r2 = zone.r_danger ** 2
    d2 = (traj.x[i0:] - zone.cx) ** 2 + (traj.y[i0:] - zone.cy) ** 2
    inside = d2 < r2
    if not inside.any():
        return None
    j = i0 + int(np.argmax(inside))
    ts = traj.times
    if j == i0:
        t_in = float(ts[i0])
    else:
        t_in = _bisect_boundary(traj.x[j - 1], traj.y[j - 1], traj.x[j], traj.y[j],
                                ts[j - 1], ts[j], zone.cx, zone.cy, r2)
    tail = inside[j - i0:]
    if tail.all():
        t_out = traj.tf
    else:
        k = j + int(np.argmin(tail))
        t_out = _bisect_boundary(traj.x[k - 1], traj.y[k - 1], traj.x[k], traj.y[k],
                                 ts[k - 1], ts[k], zone.cx, zone.cy, r2)
    return float(t_in), float(t_out)


def _tangent_geometry(px, py, cx, cy, r):
    """Polar angle of the point around the center, tangent half-angle, and
    tangent segment length.  The point must lie strictly outside."""
    mx, my = px - cx, py - cy
    d = math.hypot(mx, my)
    if d <= r * (1.0 + 1e-12):
        raise InfeasibleBypassError(f"anchor ({px:.3g}, {py:.3g}) is not outside radius {r:.3g}")
    return math.atan2(my, mx), math.acos(r / d), math.sqrt(d * d - r * r)


def plan_bypass(traj: ReferenceTrajectory, zone: DangerZone, crossing,
                side: str, speed_hint: float, lead: float = 0.5,
                t_min: float | None = None) -> BypassPlan:
    """Tangent-arc-tangent wrap of the danger circle on one side.

    Anchors are reference samples ``lead`` seconds outside the crossing,
    pushed further out while still inside the zone (entry anchors never move
    before t_min, the current time).  The wrap is re-timed at ``speed_hint``
    onto the sample grid; its last sample coincides with the exit anchor.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if speed_hint <= 0.0:
        raise InfeasibleBypassError("speed hint must be positive")
    t_in, t_out = crossing
    dt = traj.dt
    n = traj.n
    R = zone.r_danger + CLEARANCE_PAD
    cx, cy = zone.cx, zone.cy

    i_min = 0 if t_min is None else max(0, int(math.ceil((t_min - traj.t0) / dt - 1e-9)))
    i_a = min(n - 1, max(i_min, int(math.floor((t_in - lead - traj.t0) / dt + 1e-9))))
    while i_a >= i_min and math.hypot(traj.x[i_a] - cx, traj.y[i_a] - cy) <= R + 1e-9:
        i_a -= 1
    if i_a < i_min:
        raise InfeasibleBypassError("no entry anchor outside the danger zone")
    i_b = max(i_a + 1, int(math.ceil((t_out + lead - traj.t0) / dt - 1e-9)))
    while i_b <= n - 1 and math.hypot(traj.x[i_b] - cx, traj.y[i_b] - cy) <= R + 1e-9:
        i_b += 1
    if i_b > n - 1:
        raise InfeasibleBypassError("no exit anchor outside the danger zone")

    ax, ay = float(traj.x[i_a]), float(traj.y[i_a])
    bx, by = float(traj.x[i_b]), float(traj.y[i_b])
    phi_a, th_a, len_a = _tangent_geometry(ax, ay, cx, cy, R)
    phi_b, th_b, len_b = _tangent_geometry(bx, by, cx, cy, R)

    if side == "right":
        orient = 1
        psi1 = phi_a + th_a
        psi2 = phi_b - th_b
        sweep = (psi2 - psi1) % TWO_PI
    else:
        orient = -1
        psi1 = phi_a - th_a
        psi2 = phi_b + th_b
        sweep = (psi1 - psi2) % TWO_PI
    arc_len = R * sweep
    p1 = (cx + R * math.cos(psi1), cy + R * math.sin(psi1))
    p2 = (cx + R * math.cos(psi2), cy + R * math.sin(psi2))
    total = len_a + arc_len + len_b

    n_b = max(2, int(math.ceil(total / (speed_hint * dt) - 1e-9)))
    t_start = traj.t0 + i_a * dt
    t_end = t_start + n_b * dt
    t_exit_original = traj.t0 + i_b * dt
    v = total / (n_b * dt)

    xs = np.empty(n_b + 1)
    ys = np.empty(n_b + 1)
    dxs = np.empty(n_b + 1)
    dys = np.empty(n_b + 1)
    seg1 = ((p1[0] - ax) / len_a, (p1[1] - ay) / len_a)
    seg2 = ((bx - p2[0]) / len_b, (by - p2[1]) / len_b)
    for k in range(n_b + 1):
        s = min(k * dt * v, total)
        if s <= len_a:
            px, py = ax + seg1[0] * s, ay + seg1[1] * s
            tx, ty = seg1
        elif s <= len_a + arc_len:
            a = psi1 + orient * (s - len_a) / R
            px, py = cx + R * math.cos(a), cy + R * math.sin(a)
            tx, ty = -orient * math.sin(a), orient * math.cos(a)
        else:
            s2 = s - len_a - arc_len
            px, py = p2[0] + seg2[0] * s2, p2[1] + seg2[1] * s2
            tx, ty = seg2
        xs[k], ys[k] = px, py
        dxs[k], dys[k] = tx * v, ty * v
    xs[0], ys[0] = ax, ay
    xs[n_b], ys[n_b] = bx, by

    detour = total - traj.path_length(t_start, t_exit_original)
    return BypassPlan(side=side, entry_point=p1, exit_point=p2,
                      arc_center=(cx, cy), arc_radius=R, arc_start=psi1,
                      arc_sweep=sweep, orientation=orient, detour_length=detour,
                      t_start=t_start, t_end=t_end,
                      t_exit_original=t_exit_original,
                      tau_tail=t_exit_original - t_end,
                      x=xs, y=ys, dx=dxs, dy=dys)


def plan_both_sides(traj, zone, crossing, speed_hint, lead=0.5, t_min=None):
    """(left, right) plans; a side that cannot be built is None."""
    plans = []
    for side in ("left", "right"):
        try:
            plans.append(plan_bypass(traj, zone, crossing, side, speed_hint,
                                     lead=lead, t_min=t_min))
        except InfeasibleBypassError:
            plans.append(None)
    return plans[0], plans[1]


def select_side(left: BypassPlan | None, right: BypassPlan | None,
                controller_kind: str) -> BypassPlan:
    """MFPC always bypasses on the right (its heading constraint rules out the
    left wrap); the flatness stack takes the smaller detour, right on ties."""
    if controller_kind == "mfpc":
        if right is None:
            raise InfeasibleBypassError("MFPC requires a right-side bypass")
        return right
    if left is None and right is None:
        raise InfeasibleBypassError("no feasible bypass on either side")
    if left is None:
        return right
    if right is None:
        return left
    return right if right.detour_length <= left.detour_length else left


def splice(traj: ReferenceTrajectory, plan: BypassPlan) -> ReferenceTrajectory:
    """Replace the reference between the plan's anchors with the bypass samples.

    The bypass generally takes longer than the segment it replaces, so the
    remainder of the reference is re-timed to start right after it; that
    offset is recorded as a post-bypass sync event.  Both junctions are
    position-continuous by construction.
    """
    dt = traj.dt
    n = traj.n
    i_start = traj.index_of(plan.t_start)
    m = len(plan.x)
    i_end = i_start + m - 1
    if i_end > n - 1:
        raise InfeasibleBypassError("bypass extends past the end of the trajectory")
    x, y = traj.x.copy(), traj.y.copy()
    dx_, dy_ = traj.dx.copy(), traj.dy.copy()
    x[i_start:i_end + 1] = plan.x
    y[i_start:i_end + 1] = plan.y
    dx_[i_start:i_end + 1] = plan.dx
    dy_[i_start:i_end + 1] = plan.dy
    shift = int(round(plan.tau_tail / dt))
    if i_end + 1 <= n - 1:
        src = np.arange(i_end + 1, n) + shift
        clipped = (src < 0) | (src > n - 1)
        src = np.clip(src, 0, n - 1)
        x[i_end + 1:] = traj.x[src]
        y[i_end + 1:] = traj.y[src]
        dx_[i_end + 1:] = np.where(clipped, 0.0, traj.dx[src])
        dy_[i_end + 1:] = np.where(clipped, 0.0, traj.dy[src])
    event = SyncEvent(t_event=plan.t_end, tau=shift * dt, reason="post_bypass")
    return replace(traj, x=x, y=y, dx=dx_, dy=dy_,
                   sync_events=traj.sync_events + (event,))
