"""Reference trajectory generation, lookup, feedforward and time synchronization.

A trajectory is a uniformly sampled table of flat outputs (x, y) and their
time derivatives.  Lookups outside the sampled domain clamp to the endpoint
with zero derivative, so a vehicle that outruns its path simply parks at the
goal.  All revision operations (time offsets, bypass splices) return new
trajectories; nothing is mutated in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegeneratePathError
from .model import ControlInput, aux_to_true


@dataclass(frozen=True)
class SyncEvent:
    """One applied time offset: lookups at/after t_event read the prior
    trajectory at t + tau."""

    t_event: float
    tau: float
    reason: str  # "startup" | "post_bypass"


# ---------------------------------------------------------------------------
# Path specifications


@dataclass(frozen=True)
class PolylinePath:
    """Waypoint polyline traversed at constant speed, corners rounded with
    circular fillets so the feedforward heading is continuous."""

    waypoints: tuple
    speed: float = 1.0
    fillet_radius: float = 0.5


@dataclass(frozen=True)
class CirclePath:
    """x = cx + R*cos(omega*t + phase), y = cy + R*sin(omega*t + phase)."""

    cx: float = 0.0
    cy: float = 0.0
    radius: float = 5.0
    omega: float = 0.2
    phase: float = 0.0


@dataclass(frozen=True)
class SinePath:
    """Constant forward speed in x with a sinusoidal sweep in y."""

    amplitude: float = 1.0
    wavelength: float = 10.0
    speed: float = 1.0
    x0: float = 0.0
    y0: float = 0.0


PATH_KINDS = {"polyline": PolylinePath, "circle": CirclePath, "sinusoid": SinePath}


@dataclass(frozen=True)
class ReferenceTrajectory:
    t0: float
    dt: float
    x: np.ndarray
    y: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    segments: object = None
    sync_events: tuple = ()

    def __post_init__(self):
        n = len(self.x)
        if n < 2:
            raise DegeneratePathError("trajectory needs at least two samples")
        object.__setattr__(self, "_n", n)
        object.__setattr__(self, "_tf", self.t0 + (n - 1) * self.dt)

    @property
    def n(self) -> int:
        return self._n

    @property
    def tf(self) -> float:
        return self._tf

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self._n)

    def index_of(self, t: float) -> int:
        i = int(round((t - self.t0) / self.dt))
        if i < 0:
            return 0
        if i >= self._n:
            return self._n - 1
        return i

    def lookup(self, t: float) -> tuple[float, float, float, float]:
        """(x, y, dx, dy) at the grid sample nearest t; parked beyond the domain."""
        i = self.index_of(t)
        if t < self.t0 - 1e-12 or t > self._tf + 1e-12:
            return float(self.x[i]), float(self.y[i]), 0.0, 0.0
        return float(self.x[i]), float(self.y[i]), float(self.dx[i]), float(self.dy[i])

    def position(self, t: float) -> tuple[float, float]:
        i = self.index_of(t)
        return float(self.x[i]), float(self.y[i])

    def path_length(self, t_a: float, t_b: float) -> float:
        """Polyline length of the sample chain between the grid times nearest t_a, t_b."""
        ia, ib = self.index_of(t_a), self.index_of(t_b)
        if ib <= ia:
            return 0.0
        return float(np.hypot(np.diff(self.x[ia:ib + 1]), np.diff(self.y[ia:ib + 1])).sum())


# ---------------------------------------------------------------------------
# Construction


def _unit(vx, vy):
    n = math.hypot(vx, vy)
    if n < 1e-12:
        raise DegeneratePathError("zero-length direction in path spec")
    return vx / n, vy / n


def _polyline_pieces(spec: PolylinePath):
    """Break the polyline into line and fillet-arc pieces.

    Returns a list of ("line", p0, dirvec, length) and
    ("arc", center, radius, start_angle, signed_sweep) entries.
    """
    pts = [(float(px), float(py)) for px, py in spec.waypoints]
    if len(pts) < 2:
        raise DegeneratePathError("polyline needs at least two waypoints")
    if spec.speed <= 0.0:
        raise DegeneratePathError("polyline speed must be positive")
    r = float(spec.fillet_radius)

    # Per-leg unit directions and lengths.
    dirs, lens = [], []
    for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
        d = _unit(bx - ax, by - ay)
        dirs.append(d)
        lens.append(math.hypot(bx - ax, by - ay))

    # Tangent offsets consumed at each interior vertex.
    offs = [0.0]
    turns = []
    for i in range(1, len(pts) - 1):
        (d1x, d1y), (d2x, d2y) = dirs[i - 1], dirs[i]
        cross = d1x * d2y - d1y * d2x
        dot = d1x * d2x + d1y * d2y
        beta = math.atan2(cross, dot)
        turns.append(beta)
        if abs(beta) < 1e-12 or r <= 0.0:
            offs.append(0.0)
        else:
            if abs(abs(beta) - math.pi) < 1e-9:
                raise DegeneratePathError("polyline reverses direction at a vertex")
            offs.append(r * math.tan(abs(beta) / 2.0))
    offs.append(0.0)

    for i, leg in enumerate(lens):
        if offs[i] + offs[i + 1] > leg + 1e-12:
            raise DegeneratePathError(
                f"fillet radius {r} does not fit on leg {i} of length {leg:.3g}")

    pieces = []
    cursor = pts[0]
    for i, ((dx_, dy_), leg) in enumerate(zip(dirs, lens)):
        seg_len = leg - offs[i] - offs[i + 1]
        if seg_len > 1e-12:
            pieces.append(("line", cursor, (dx_, dy_), seg_len))
        end = (cursor[0] + dx_ * seg_len, cursor[1] + dy_ * seg_len)
        if i < len(dirs) - 1 and offs[i + 1] > 0.0:
            beta = turns[i]
            sign = 1.0 if beta > 0 else -1.0
            # Fillet center sits at distance r on the turn side of the incoming leg.
            nx, ny = -dy_ * sign, dx_ * sign
            cx, cy = end[0] + r * nx, end[1] + r * ny
            a0 = math.atan2(end[1] - cy, end[0] - cx)
            pieces.append(("arc", (cx, cy), r, a0, beta))
            a1 = a0 + beta
            cursor = (cx + r * math.cos(a1), cy + r * math.sin(a1))
        else:
            cursor = end
    if not pieces:
        raise DegeneratePathError("polyline has zero length")
    return pieces


def _piece_length(piece):
    if piece[0] == "line":
        return piece[3]
    return piece[2] * abs(piece[4])


def _piece_point(piece, s):
    """Point and unit tangent at arclength s into the piece."""
    if piece[0] == "line":
        _, (px, py), (dx_, dy_), _ = piece
        return px + dx_ * s, py + dy_ * s, dx_, dy_
    _, (cx, cy), r, a0, beta = piece
    sign = 1.0 if beta > 0 else -1.0
    a = a0 + sign * s / r
    return (cx + r * math.cos(a), cy + r * math.sin(a),
            -sign * math.sin(a), sign * math.cos(a))


def _sample_polyline(spec: PolylinePath, dt: float):
    pieces = _polyline_pieces(spec)
    lengths = [_piece_length(p) for p in pieces]
    total = sum(lengths)
    v = spec.speed
    n = int(math.floor(total / v / dt + 1e-9))
    if n < 1:
        raise DegeneratePathError("polyline shorter than one sample step")
    xs = np.empty(n + 1)
    ys = np.empty(n + 1)
    dxs = np.empty(n + 1)
    dys = np.empty(n + 1)
    bounds = np.concatenate([[0.0], np.cumsum(lengths)])
    junctions = bounds[1:-1]
    pi = 0
    for k in range(n + 1):
        s = min(k * dt * v, total)
        while pi < len(pieces) - 1 and s > bounds[pi + 1] + 1e-12:
            pi += 1
        px, py, tx, ty = _piece_point(pieces[pi], s - bounds[pi])
        xs[k], ys[k] = px, py
        dxs[k], dys[k] = tx * v, ty * v
    # Near piece junctions the analytic tangent has a curvature kink; store the
    # central difference there instead so the table stays self-consistent.
    for sj in junctions:
        k = int(round(sj / (v * dt)))
        for kk in (k - 1, k, k + 1):
            if 1 <= kk <= n - 1:
                dxs[kk] = (xs[kk + 1] - xs[kk - 1]) / (2.0 * dt)
                dys[kk] = (ys[kk + 1] - ys[kk - 1]) / (2.0 * dt)
    return xs, ys, dxs, dys


def build_reference(spec, dt: float = 0.01, duration: float = 20.0) -> ReferenceTrajectory:
    """Sample a path spec into a ReferenceTrajectory at spacing dt.

    Circle and sinusoid paths are sampled over [0, duration] with analytic
    derivatives.  Polylines are sampled over their full traversal time; the
    clamped lookup parks the vehicle at the final waypoint afterwards.
    """
    if dt <= 0.0:
        raise DegeneratePathError("dt must be positive")
    if isinstance(spec, PolylinePath):
        xs, ys, dxs, dys = _sample_polyline(spec, dt)
    elif isinstance(spec, CirclePath):
        if spec.radius <= 0.0 or spec.omega == 0.0:
            raise DegeneratePathError("circle needs positive radius and nonzero omega")
        t = dt * np.arange(int(round(duration / dt)) + 1)
        a = spec.omega * t + spec.phase
        xs = spec.cx + spec.radius * np.cos(a)
        ys = spec.cy + spec.radius * np.sin(a)
        dxs = -spec.radius * spec.omega * np.sin(a)
        dys = spec.radius * spec.omega * np.cos(a)
    elif isinstance(spec, SinePath):
        if spec.speed <= 0.0 or spec.wavelength <= 0.0:
            raise DegeneratePathError("sinusoid needs positive speed and wavelength")
        t = dt * np.arange(int(round(duration / dt)) + 1)
        k = 2.0 * math.pi / spec.wavelength
        xs = spec.x0 + spec.speed * t
        ys = spec.y0 + spec.amplitude * np.sin(k * spec.speed * t)
        dxs = np.full_like(t, spec.speed)
        dys = spec.amplitude * k * spec.speed * np.cos(k * spec.speed * t)
    else:
        raise DegeneratePathError(f"unknown path spec {type(spec).__name__}")
    return ReferenceTrajectory(t0=0.0, dt=dt, x=np.asarray(xs, dtype=float),
                               y=np.asarray(ys, dtype=float),
                               dx=np.asarray(dxs, dtype=float),
                               dy=np.asarray(dys, dtype=float), segments=spec)


def path_spec_from_dict(d: dict):
    """Instantiate a path spec from its JSON form ({"kind": ..., ...})."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in PATH_KINDS:
        raise DegeneratePathError(f"unknown path kind {kind!r}")
    cls = PATH_KINDS[kind]
    if kind == "polyline" and "waypoints" in d:
        d["waypoints"] = tuple((float(p[0]), float(p[1])) for p in d["waypoints"])
    try:
        return cls(**d)
    except TypeError as exc:
        raise DegeneratePathError(f"bad {kind} path spec: {exc}") from exc


# ---------------------------------------------------------------------------
# Feedforward and synchronization


def flat_feedforward(traj: ReferenceTrajectory, t: float, prev_u2: float = 0.0) -> ControlInput:
    """Open-loop controls that replay the reference exactly: nu = (dx, dy)."""
    _, _, dx_, dy_ = traj.lookup(t)
    u1, u2 = aux_to_true(dx_, dy_, prev_u2)
    return ControlInput(u1=u1, u2=u2, nu1=dx_, nu2=dy_)


def sync_offset(x_sync: float, y_sync: float, traj: ReferenceTrajectory,
                t_now: float, tau_max: float = 5.0) -> float:
    """Grid-search the time offset minimizing the squared distance between
    (x_sync, y_sync) and the reference at t_now + tau.

    Candidates are ordered 0, +dt, -dt, +2dt, ... and only strict improvements
    are kept, which realizes the tie rules: smallest |tau| first, positive
    before negative.
    """
    k_max = int(round(tau_max / traj.dt))
    ks = np.empty(2 * k_max + 1, dtype=int)
    ks[0] = 0
    ks[1::2] = np.arange(1, k_max + 1)
    ks[2::2] = -np.arange(1, k_max + 1)
    idx = np.clip(np.round((t_now + ks * traj.dt - traj.t0) / traj.dt).astype(int),
                  0, traj.n - 1)
    d2 = (traj.x[idx] - x_sync) ** 2 + (traj.y[idx] - y_sync) ** 2
    return float(ks[int(np.argmin(d2))] * traj.dt)


def apply_sync(traj: ReferenceTrajectory, tau: float, t_event: float,
               reason: str = "startup") -> ReferenceTrajectory:
    """Re-index the trajectory: lookups at/after t_event read the original at
    t + tau.  Samples shifted past either end clamp there with zero derivative
    (the path parks rather than extrapolating)."""
    shift = int(round(tau / traj.dt))
    n = traj.n
    i0 = max(0, int(math.ceil((t_event - traj.t0) / traj.dt - 1e-9)))
    x, y = traj.x.copy(), traj.y.copy()
    dx_, dy_ = traj.dx.copy(), traj.dy.copy()
    src = np.arange(i0, n) + shift
    clipped = (src < 0) | (src > n - 1)
    src = np.clip(src, 0, n - 1)
    x[i0:] = traj.x[src]
    y[i0:] = traj.y[src]
    dx_[i0:] = np.where(clipped, 0.0, traj.dx[src])
    dy_[i0:] = np.where(clipped, 0.0, traj.dy[src])
    event = SyncEvent(t_event=t_event, tau=shift * traj.dt, reason=reason)
    return replace(traj, x=x, y=y, dx=dx_, dy=dy_,
                   sync_events=traj.sync_events + (event,))
