"""Continuous execution of grid paths by one four-thruster boat.

Grid waypoints are released at a fixed rate; between releases a straight
line generator feeds sub-goals to three decoupled PID loops (longitudinal,
lateral, rotational).  Their body-frame command is mapped to thruster
forces and back, then drives a damped planar rigid body.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

PRINTED = "printed"        # transform matrix exactly as published
CONVENTIONAL = "conventional"  # rotation by -psi, the usual global-to-body map


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    a = math.fmod(a, 2 * math.pi)
    if a <= -math.pi:
        a += 2 * math.pi
    elif a > math.pi:
        a -= 2 * math.pi
    return a


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    psi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.psi)


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValueError("PID gains must be non-negative")

    def scaled(self, factor: float) -> "PidGains":
        return PidGains(self.kp * factor, self.ki * factor, self.kd * factor)


@dataclass(frozen=True)
class ControllerGains:
    longitudinal: PidGains
    lateral: PidGains
    rotational: PidGains

    def scaled(self, factor: float) -> "ControllerGains":
        return ControllerGains(self.longitudinal.scaled(factor), self.lateral.scaled(factor),
                               self.rotational.scaled(factor))


# gains of the physical boats; the simulated plant uses them times TrackConfig.gains_scale
BOAT_GAINS = ControllerGains(
    longitudinal=PidGains(2210.0, 7.0, 4.67),
    lateral=PidGains(1500.0, 10.5, 7.0),
    rotational=PidGains(153.0, 2.4, 1.6),
)


@dataclass(frozen=True)
class ThrustVector:
    f1: float
    f2: float
    f3: float
    f4: float
    l: float = 0.1

    def as_array(self) -> np.ndarray:
        return np.array([self.f1, self.f2, self.f3, self.f4], dtype=float)


@dataclass
class Dynamics:
    mass: float = 6.0              # kg
    linear_damping: float = 12.0   # N s / m
    angular_inertia: float = 0.08  # kg m^2
    angular_damping: float = 0.5   # N m s


@dataclass
class TrackConfig:
    step_length: float = 0.25      # m, sub-goal distance of the line generator
    cell_size: float = 0.25        # m
    update_period: float = 4.0     # s between waypoint releases
    dt: float = 0.02               # s
    dynamics: Dynamics = field(default_factory=Dynamics)
    l: float = 0.1                 # m, thruster moment arm
    f_max: float = 10.0            # N per thruster
    gains_scale: float = 0.01      # calibrated once, see tests for the settling check
    frame: str = PRINTED
    settle_time: float = 16.0      # s simulated after the last waypoint release

    def __post_init__(self):
        d = self.dynamics
        values = (self.step_length, self.cell_size, self.update_period, self.dt, self.l,
                  self.f_max, self.gains_scale, d.mass, d.linear_damping, d.angular_inertia,
                  d.angular_damping)
        if min(values) <= 0:
            raise ValueError("track parameters must be positive")
        if self.dt >= self.update_period:
            raise ValueError("dt must be shorter than the update period")
        if self.frame not in (PRINTED, CONVENTIONAL):
            raise ValueError(f"frame must be {PRINTED!r} or {CONVENTIONAL!r}")


# --- pure kinematics -------------------------------------------------------

def next_traj_point(x: Sequence[float], xg: Sequence[float], s: float) -> tuple[float, float]:
    """Sub-goal at most ``s`` along the straight line from ``x`` towards ``xg``."""
    dx, dy = xg[0] - x[0], xg[1] - x[1]
    d = math.hypot(dx, dy)
    if d <= s:
        return (float(xg[0]), float(xg[1]))
    gamma = math.atan2(dy, dx)
    return (x[0] + s * math.cos(gamma), x[1] + s * math.sin(gamma))


def transform_matrix(pose: Pose, frame: str = PRINTED) -> np.ndarray:
    """Homogeneous 4x4 map of ``(x, y, psi, 1)`` targets into the body frame."""
    c, s = math.cos(pose.psi), math.sin(pose.psi)
    x, y, psi = pose.x, pose.y, pose.psi
    if frame == PRINTED:
        return np.array([
            [c, -s, 0.0, -x * c + y * s],
            [s, c, 0.0, -x * s - y * c],
            [0.0, 0.0, 1.0, -psi],
            [0.0, 0.0, 0.0, 1.0],
        ])
    if frame == CONVENTIONAL:
        return np.array([
            [c, s, 0.0, -x * c - y * s],
            [-s, c, 0.0, x * s - y * c],
            [0.0, 0.0, 1.0, -psi],
            [0.0, 0.0, 0.0, 1.0],
        ])
    raise ValueError(f"unknown frame {frame!r}")


def to_body_frame(pose: Pose, target: Pose, frame: str = PRINTED) -> Pose:
    """Target expressed relative to ``pose``; the heading error is wrapped."""
    eta = np.array([target.x, target.y, target.psi, 1.0])
    out = transform_matrix(pose, frame) @ eta
    return Pose(float(out[0]), float(out[1]), float(out[2]))


# --- control ----------------------------------------------------------------

@dataclass
class PidState:
    gains: PidGains
    f_max: float = 10.0
    integral: float = 0.0
    prev_error: Optional[float] = None

    def reset(self) -> None:
        self.integral = 0.0
        self.prev_error = None


def pid_step(state: PidState, error: float, dt: float) -> float:
    """One controller update.

    Trapezoidal integral, backward-difference derivative.  The first call
    treats the previous error as equal to the current one, so there is no
    derivative kick.  The integral is clamped to ``+-f_max / ki``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = state.gains
    prev = error if state.prev_error is None else state.prev_error
    state.integral += 0.5 * (error + prev) * dt
    if g.ki > 0:
        bound = state.f_max / g.ki
        state.integral = min(max(state.integral, -bound), bound)
    derivative = (error - prev) / dt
    state.prev_error = error
    return g.kp * error + g.ki * state.integral + g.kd * derivative


def thrust_matrix(l: float) -> np.ndarray:
    return np.array([
        [0.0, 1.0, 0.0, 1.0],
        [1.0, 0.0, 1.0, 0.0],
        [l, -l, -l, l],
    ])


def compose_thrust(f: ThrustVector) -> np.ndarray:
    """Body force and moment ``(Fx, Fy, Mz)`` produced by four thruster forces."""
    return thrust_matrix(f.l) @ f.as_array()


def allocate_thrust(tau: Sequence[float], l: float, f_max: float) -> ThrustVector:
    """Minimum-norm thruster forces for ``tau``, scaled down uniformly to respect ``f_max``."""
    if l <= 0:
        raise ValueError("moment arm must be positive")
    f = np.linalg.pinv(thrust_matrix(l)) @ np.asarray(tau, dtype=float)
    peak = float(np.max(np.abs(f)))
    if peak > f_max:
        f = f * (f_max / peak)
    return ThrustVector(*(float(v) for v in f), l=l)


# --- simulation ---------------------------------------------------------------

@dataclass
class ContinuousTrace:
    dt: float
    samples: list  # [{t, x, y, psi, d, d_lat}]

    def to_json(self) -> dict:
        return {"dt": self.dt, "samples": self.samples}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def column(self, key: str) -> np.ndarray:
        return np.array([s[key] for s in self.samples])


def settling_time(trace: ContinuousTrace, tol: float = 0.05, key: str = "d") -> Optional[float]:
    """Earliest time after which ``|key| < tol`` holds for every later sample."""
    values = np.abs(trace.column(key))
    bad = np.nonzero(values >= tol)[0]
    if len(bad) == 0:
        return 0.0
    last = int(bad[-1])
    if last == len(values) - 1:
        return None
    return trace.samples[last + 1]["t"]


def _as_points(path, cell_size: float, units: str) -> list:
    pts = getattr(path, "waypoints", path)
    pts = [tuple(float(v) for v in p) for p in pts]
    if not pts:
        raise ValueError("path is empty")
    if units == "cells":
        return [(x * cell_size, y * cell_size) for x, y in pts]
    if units == "meters":
        return pts
    raise ValueError("units must be 'cells' or 'meters'")


def trace_waypoints(trace, group_id: int) -> list:
    """Anchor cell of one group over a navigation trace, repeats dropped."""
    out = []
    for step in trace.steps:
        cells = step.get(group_id)
        if cells is None:
            continue
        a = min(cells, key=lambda c: (c[1], c[0]))
        if not out or out[-1] != a:
            out.append(a)
    if not out:
        raise KeyError(group_id)
    return out


def simulate_track(path, gains: Optional[ControllerGains] = None,
                   config: Optional[TrackConfig] = None, start: Optional[Pose] = None,
                   units: str = "cells", duration: Optional[float] = None) -> ContinuousTrace:
    """Track a waypoint sequence with the PID boat model.

    ``path`` is a :class:`~sapoa.assignment.FootprintPath` or a list of
    points, in grid cells (scaled by ``config.cell_size``) or meters.
    Waypoint ``k`` is released at ``(k - 1) * update_period``; the boat
    starts on the first point unless ``start`` is given.  ``gains`` are
    the boat gains before ``config.gains_scale`` is applied.

    Each sample records the distance ``d`` to the active waypoint and its
    signed component ``d_lat`` perpendicular to the active segment.
    """
    config = config or TrackConfig()
    gains = (gains or BOAT_GAINS).scaled(config.gains_scale)
    pts = _as_points(path, config.cell_size, units)
    pose = start or Pose(pts[0][0], pts[0][1], 0.0)
    heading_goal = pose.psi
    dyn = config.dynamics
    pids = [PidState(g, config.f_max) for g in (gains.longitudinal, gains.lateral, gains.rotational)]
    release = max(0, len(pts) - 2) * config.update_period
    total = duration if duration is not None else release + config.settle_time
    n_steps = int(round(total / config.dt))
    x, y, psi = pose.x, pose.y, pose.psi
    vx = vy = omega = 0.0
    samples = []

    def record(t, active):
        gx, gy = pts[active]
        ex, ey = gx - x, gy - y
        d = math.hypot(ex, ey)
        px, py = pts[active - 1] if active > 0 else (pose.x, pose.y)
        sx, sy = gx - px, gy - py
        seg = math.hypot(sx, sy)
        d_lat = (sx * ey - sy * ex) / seg if seg > 0 else 0.0
        samples.append({"t": round(t, 9), "x": x, "y": y, "psi": psi, "d": d, "d_lat": d_lat})

    def active_at(t):
        if len(pts) == 1:
            return 0
        return min(len(pts) - 1, 1 + int(t // config.update_period + 1e-9))

    record(0.0, active_at(0.0))
    for k in range(1, n_steps + 1):
        t_prev = (k - 1) * config.dt
        active = active_at(t_prev)
        sub = next_traj_point((x, y), pts[active], config.step_length)
        err = to_body_frame(Pose(x, y, psi), Pose(sub[0], sub[1], heading_goal), config.frame)
        command = [pid_step(p, e, config.dt) for p, e in zip(pids, err.as_tuple())]
        tau = [float(v) for v in compose_thrust(allocate_thrust(command, config.l, config.f_max))]
        c, s = math.cos(psi), math.sin(psi)
        fx = c * tau[0] - s * tau[1]
        fy = s * tau[0] + c * tau[1]
        # semi-implicit Euler on the damped rigid body
        vx += (fx - dyn.linear_damping * vx) / dyn.mass * config.dt
        vy += (fy - dyn.linear_damping * vy) / dyn.mass * config.dt
        omega += (tau[2] - dyn.angular_damping * omega) / dyn.angular_inertia * config.dt
        x += vx * config.dt
        y += vy * config.dt
        psi = wrap_angle(psi + omega * config.dt)
        if not all(math.isfinite(v) for v in (x, y, psi, vx, vy, omega)):
            raise FloatingPointError("dynamics diverged")
        record(k * config.dt, active_at(k * config.dt))
    return ContinuousTrace(config.dt, samples)


def coast(speed: tuple[float, float], config: Optional[TrackConfig] = None,
          seconds: float = 5.0) -> list:
    """Speeds of the unforced plant starting from ``speed`` (damping check)."""
    config = config or TrackConfig()
    dyn = config.dynamics
    vx, vy = speed
    out = [math.hypot(vx, vy)]
    for _ in range(int(round(seconds / config.dt))):
        vx -= dyn.linear_damping * vx / dyn.mass * config.dt
        vy -= dyn.linear_damping * vy / dyn.mass * config.dt
        out.append(math.hypot(vx, vy))
    return out


def config_to_json(config: TrackConfig) -> dict:
    return asdict(config)
