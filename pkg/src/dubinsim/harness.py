"""Closed-loop scenario execution, batch sweeps and file emission.

One run is strictly sequential and fully determined by its config (all
randomness flows from named sub-streams of the seeds), so identical configs
give byte-identical outputs and sweeps can fan runs out safely.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import avoidance
from .avoidance import Obstacle
from .errors import (ConfigError, ControllerFault, InfeasibleBypassError,
                     StateIntegrityError)
from .heol import HeolController, HeolGains
from .mfpc import MfpcController, MfpcParams
from .model import (STREAM_PLACEMENT, NoiseModel, PerturbationSchedule,
                    VehicleState, measure, step_plant, stream_rng)
from .reference import apply_sync, build_reference, sync_offset
from .scenario import ScenarioConfig, ScenarioResult, compute_metrics

CSV_COLUMNS = ("t", "x", "y", "x_meas", "y_meas", "x_ref", "y_ref",
               "u1", "u2", "nu1", "nu2", "Fhat_x", "Fhat_y", "p")

# Cap on replans within a single sample; more than this means the planner is
# thrashing and the run is flagged instead of looping.
MAX_REPLANS_PER_STEP = 8


def _make_controller(cfg: ScenarioConfig):
    if cfg.controller == "heol":
        h = cfg.heol
        return HeolController(HeolGains(kx=h.kx, ky=h.ky, t_window=h.t_window), cfg.dt)
    m = cfg.mfpc
    return MfpcController(MfpcParams(alpha1=m.alpha1, alpha2=m.alpha2,
                                     horizon=m.horizon, t_window=m.t_window,
                                     u1_max=m.u1_max, u2_margin=m.u2_margin,
                                     eval_at_next=m.eval_at_next), cfg.dt)


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Execute one scenario: measure, discover, replan, control, step.

    Controller faults and infeasible bypasses abort the run with a flagged
    partial result; they never raise across this boundary.
    """
    dt = cfg.dt
    n = cfg.n_steps
    traj = build_reference(cfg.path_spec(), dt=dt, duration=cfg.duration)
    noise = NoiseModel(sigma=cfg.noise.sigma,
                       seed=cfg.seed if cfg.noise_seed is None else cfg.noise_seed,
                       enabled=cfg.noise.enabled)
    if cfg.perturbation.enabled:
        pc = cfg.perturbation
        pert = PerturbationSchedule.draw(
            cfg.duration, switch_interval=pc.switch_interval,
            seed=cfg.seed if cfg.perturbation_seed is None else cfg.perturbation_seed,
            low=pc.low, high=pc.high)
    else:
        pert = PerturbationSchedule.zero()
    controller = _make_controller(cfg)

    start = cfg.start if cfg.start is not None else traj.position(0.0)
    state = VehicleState(t=0.0, x=float(start[0]), y=float(start[1]))

    events: list[dict] = []
    if cfg.sync.enabled:
        rx, ry = traj.position(0.0)
        if math.hypot(state.x - rx, state.y - ry) > cfg.sync.startup_threshold:
            tau = sync_offset(state.x, state.y, traj, 0.0, cfg.sync.tau_max)
            traj = apply_sync(traj, tau, 0.0, "startup")
            events.append({"kind": "sync", "t": 0.0, "tau": tau, "reason": "startup"})

    series = {key: np.full(n + 1, np.nan) for key in
              ("t", "x", "y", "x_meas", "y_meas", "x_ref", "y_ref", "dx_ref",
               "dy_ref", "u1", "u2", "nu1", "nu2", "fhat_x", "fhat_y", "p")}

    zones = {}          # obstacle index -> DangerZone, once discovered
    unchecked = set()   # zones needing a crossing scan against the active traj
    pending_ends = []   # t_end of spliced bypasses not yet completed
    aborted = False
    abort_reason = ""

    for k in range(n + 1):
        t = k * dt
        xm, ym = measure(state, noise)

        newly = avoidance.discover(cfg.obstacles, state, cfg.avoidance.sensing_radius,
                                   known=zones.keys())
        for i in newly:
            zones[i] = cfg.obstacles[i].danger_zone(cfg.avoidance.margin)
            unchecked.add(i)
            events.append({"kind": "discovery", "t": t, "obstacle": i})

        completed = [te for te in pending_ends if t >= te - 1e-9]
        if completed:
            pending_ends = [te for te in pending_ends if t < te - 1e-9]
            for te in completed:
                events.append({"kind": "bypass_end", "t": t})
            if cfg.sync.enabled:
                tau = sync_offset(xm, ym, traj, t, cfg.sync.tau_max)
                if abs(tau) > 0.5 * dt:
                    traj = apply_sync(traj, tau, t, "post_bypass")
                    events.append({"kind": "sync", "t": t, "tau": tau,
                                   "reason": "post_bypass"})
                    unchecked = set(zones)

        replans = 0
        while unchecked and not aborted:
            best = None
            for i in sorted(unchecked):
                crossing = avoidance.path_crosses_zone(traj, zones[i], t_from=t)
                if crossing is None:
                    unchecked.discard(i)
                elif best is None or crossing[0] < best[1][0]:
                    best = (i, crossing)
            if best is None:
                break
            if replans >= MAX_REPLANS_PER_STEP:
                aborted, abort_reason = True, "replanning loop exceeded limit"
                break
            i, crossing = best
            hint = cfg.avoidance.speed_hint
            if hint is None:
                _, _, dxa, dya = traj.lookup(crossing[0])
                hint = max(math.hypot(dxa, dya), 0.1)
            try:
                left, right = avoidance.plan_both_sides(
                    traj, zones[i], crossing, hint,
                    lead=cfg.avoidance.lead, t_min=t)
                plan = avoidance.select_side(left, right, cfg.controller)
                traj = avoidance.splice(traj, plan)
            except InfeasibleBypassError as exc:
                aborted, abort_reason = True, f"infeasible bypass: {exc}"
                break
            pending_ends.append(plan.t_end)
            events.append({
                "kind": "bypass_start", "t": t, "obstacle": i, "side": plan.side,
                "detour": plan.detour_length, "t_start": plan.t_start,
                "t_end": plan.t_end, "tau_tail": plan.tau_tail,
                "detour_left": left.detour_length if left else None,
                "detour_right": right.detour_length if right else None,
            })
            unchecked = set(zones)
            unchecked.discard(i)
            replans += 1

        if aborted:
            break

        try:
            ctrl = controller.step(xm, ym, traj, t)
        except ControllerFault as exc:
            aborted, abort_reason = True, f"controller fault: {exc}"
            break

        x_ref, y_ref, dx_ref, dy_ref = traj.lookup(t)
        fx, fy = controller.last_fhat
        row = series
        row["t"][k] = t
        row["x"][k] = state.x
        row["y"][k] = state.y
        row["x_meas"][k] = xm
        row["y_meas"][k] = ym
        row["x_ref"][k] = x_ref
        row["y_ref"][k] = y_ref
        row["dx_ref"][k] = dx_ref
        row["dy_ref"][k] = dy_ref
        row["u1"][k] = ctrl.u1
        row["u2"][k] = ctrl.u2
        if ctrl.nu1 is not None:
            row["nu1"][k] = ctrl.nu1
            row["nu2"][k] = ctrl.nu2
        row["fhat_x"][k] = fx
        row["fhat_y"][k] = fy
        row["p"][k] = pert.at(t)

        if k < n:
            try:
                state = step_plant(state, ctrl, p=pert.at(t), dt=dt)
            except StateIntegrityError as exc:
                aborted, abort_reason = True, f"state integrity: {exc}"
                break

    events.extend(controller.events)
    events.sort(key=lambda e: (e["t"], e["kind"]))
    metrics = compute_metrics(cfg, series, events)
    is_mfpc = cfg.controller == "mfpc"
    return ScenarioResult(
        config=cfg, t=series["t"], x=series["x"], y=series["y"],
        x_meas=series["x_meas"], y_meas=series["y_meas"],
        x_ref=series["x_ref"], y_ref=series["y_ref"],
        u1=series["u1"], u2=series["u2"],
        nu1=None if is_mfpc else series["nu1"],
        nu2=None if is_mfpc else series["nu2"],
        fhat_x=series["fhat_x"], fhat_y=series["fhat_y"], p=series["p"],
        events=events, metrics=metrics, aborted=aborted, abort_reason=abort_reason)


# ---------------------------------------------------------------------------
# Sweeps


def place_crossing_obstacle(cfg: ScenarioConfig, seed: int,
                            radius_range=(0.5, 1.0), lateral_max=0.3,
                            window=(0.3, 0.6)) -> Obstacle:
    """Draw one obstacle centered near the reference so its zone is crossed.

    The center sits within ``lateral_max`` of a reference point drawn in the
    middle ``window`` of the horizon; since lateral_max < r the reference
    always enters the danger disk.
    """
    rng = stream_rng(seed, STREAM_PLACEMENT)
    traj = build_reference(cfg.path_spec(), dt=cfg.dt, duration=cfg.duration)
    t_c = float(rng.uniform(window[0], window[1])) * traj.tf
    px, py, dxr, dyr = traj.lookup(t_c)
    speed = math.hypot(dxr, dyr)
    nx, ny = (-dyr / speed, dxr / speed) if speed > 1e-9 else (0.0, 1.0)
    off = float(rng.uniform(-lateral_max, lateral_max))
    r = float(rng.uniform(*radius_range))
    return Obstacle(cx=px + off * nx, cy=py + off * ny, r=r, t_appear=0.0)


@dataclass
class SweepReport:
    base_name: str
    n_runs: int
    seeds: list
    aborted_runs: list
    safety_violations: int
    metrics_summary: dict   # metric -> {"min":, "median":, "max":}
    per_run: list           # one metrics dict per run, in run order

    def to_dict(self) -> dict:
        return {
            "base_name": self.base_name,
            "n_runs": self.n_runs,
            "seeds": self.seeds,
            "aborted_runs": self.aborted_runs,
            "safety_violations": self.safety_violations,
            "metrics_summary": self.metrics_summary,
            "per_run": self.per_run,
        }


_SWEEP_METRICS = ("rms_tracking", "max_tracking", "total_path_length",
                  "reverse_distance", "control_energy", "detour_total")


def run_sweep(cfg: ScenarioConfig, n_runs: int, seed: int | None = None,
              randomize=("obstacles", "noise", "perturbation"),
              keep_results: bool = False):
    """Run seeded variants of a base scenario and aggregate their metrics.

    ``randomize`` picks which aspects get per-run seeds; anything not listed
    stays pinned to the base config.  A safety violation is a run whose
    minimum obstacle clearance drops below the physical radius.
    """
    if n_runs < 1:
        raise ConfigError("n_runs must be >= 1")
    base_seed = cfg.seed if seed is None else int(seed)
    reports = []
    results = []
    seeds = []
    aborted = []
    violations = 0
    for i in range(n_runs):
        run_seed = base_seed + i
        overrides = {"name": f"{cfg.name}-r{i:03d}", "seed": run_seed}
        if "obstacles" in randomize:
            overrides["obstacles"] = (place_crossing_obstacle(cfg, run_seed),)
        overrides["noise_seed"] = run_seed if "noise" in randomize else base_seed
        overrides["perturbation_seed"] = (run_seed if "perturbation" in randomize
                                          else base_seed)
        run_cfg = replace(cfg, **overrides)
        result = run_scenario(run_cfg)
        seeds.append(run_seed)
        if result.aborted:
            aborted.append({"run": i, "seed": run_seed, "reason": result.abort_reason})
        clearances = result.metrics["min_clearance"]
        for ob, c in zip(run_cfg.obstacles, clearances):
            if math.isfinite(c) and c < ob.r:
                violations += 1
                break
        row = {m: result.metrics[m] for m in _SWEEP_METRICS}
        row["min_clearance"] = (min(c for c in clearances if math.isfinite(c))
                                if clearances else None)
        row["aborted"] = result.aborted
        reports.append(row)
        if keep_results:
            results.append(result)

    summary = {}
    for m in _SWEEP_METRICS + ("min_clearance",):
        vals = [r[m] for r in reports if r[m] is not None and math.isfinite(r[m])]
        summary[m] = ({"min": min(vals), "median": float(np.median(vals)),
                       "max": max(vals)} if vals else None)
    report = SweepReport(base_name=cfg.name, n_runs=n_runs, seeds=seeds,
                         aborted_runs=aborted, safety_violations=violations,
                         metrics_summary=summary, per_run=reports)
    return (report, results) if keep_results else report


# ---------------------------------------------------------------------------
# Emission


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return f"{v:.9g}"


def emit_csv(result: ScenarioResult, path) -> None:
    """Write the run's time series; one row per sample, 9 significant digits.

    The auxiliary-control columns are left empty for controllers that do not
    populate them.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(CSV_COLUMNS) + "\n")
        has_nu = result.nu1 is not None
        for k in range(len(result.t)):
            vals = [
                _fmt(result.t[k]), _fmt(result.x[k]), _fmt(result.y[k]),
                _fmt(result.x_meas[k]), _fmt(result.y_meas[k]),
                _fmt(result.x_ref[k]), _fmt(result.y_ref[k]),
                _fmt(result.u1[k]), _fmt(result.u2[k]),
                _fmt(result.nu1[k]) if has_nu else "",
                _fmt(result.nu2[k]) if has_nu else "",
                _fmt(result.fhat_x[k]), _fmt(result.fhat_y[k]), _fmt(result.p[k]),
            ]
            f.write(",".join(vals) + "\n")


def emit_summary(result: ScenarioResult, path) -> None:
    """Sidecar JSON with the run's metrics and events."""
    doc = {
        "name": result.config.name,
        "controller": result.config.controller,
        "seed": result.config.seed,
        "aborted": result.aborted,
        "abort_reason": result.abort_reason,
        "metrics": _json_safe(result.metrics),
        "events": _json_safe(result.events),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def emit(result: ScenarioResult, out_dir, name: str | None = None) -> tuple[str, str]:
    """CSV plus summary sidecar under out_dir; returns the two paths."""
    os.makedirs(out_dir, exist_ok=True)
    stem = name or result.config.name
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    summary_path = os.path.join(out_dir, f"{stem}_summary.json")
    emit_csv(result, csv_path)
    emit_summary(result, summary_path)
    return csv_path, summary_path


def emit_sweep(report: SweepReport, out_dir, name: str | None = None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    stem = name or f"{report.base_name}_sweep"
    path = os.path.join(out_dir, f"{stem}.json")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_json_safe(report.to_dict()), f, indent=2, sort_keys=True)
        f.write("\n")
    return path
