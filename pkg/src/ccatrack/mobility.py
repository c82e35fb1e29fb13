"""Smooth-Turn UAV mobility with separation constraints and derived attitude.

Horizontally a UAV circles a turn centre at constant speed; at exponentially
distributed epochs it draws a new inverse turning radius from
``N(0, sigma_r2)``. Vertically it climbs or descends at a constant rate drawn
per leg from ``U(v_z_min, v_z_max)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .array import wrap_pi

G_ACCEL = 9.81


@dataclass(frozen=True)
class MobilityParams:
    mean_turn_duration: float = 1.0
    sigma_r2: float = 0.05
    v_xy_max: float = 20.0
    v_xy_min: float = 10.0
    v_z_min: float = 2.0
    v_z_max: float = 3.0
    d_min: float = 10.0
    d_max: float = 60.0
    dt: float = 0.01

    def __post_init__(self):
        positive = ("mean_turn_duration", "v_xy_max", "v_z_max", "d_min", "d_max", "dt")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma_r2 < 0 or self.v_xy_min < 0 or self.v_z_min < 0:
            raise ValueError("variances and minimum speeds must be non-negative")
        if self.v_xy_min > self.v_xy_max or self.v_z_min > self.v_z_max:
            raise ValueError("speed ranges are inverted")
        if self.d_min >= self.d_max:
            raise ValueError("d_min must be below d_max")

    @property
    def margin(self) -> float:
        return 0.3 * (self.d_max - self.d_min)


@dataclass(frozen=True)
class UavState:
    X: np.ndarray
    Theta: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        for name in ("X", "Theta", "v", "a"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (3,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite 3-vector")
            if name == "Theta":
                arr = np.asarray(wrap_pi(arr), dtype=float)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class TurnState:
    """Internal Smooth-Turn state of one UAV."""

    position: np.ndarray
    heading: float
    speed: float
    kappa: float = 0.0
    v_z: float = 0.0
    leg_left: float = 0.0
    steering: bool = False
    projected: bool = False
    legs: tuple = field(default=(), repr=False)  # drawn leg durations

    @property
    def velocity(self) -> np.ndarray:
        return np.array(
            [self.speed * math.cos(self.heading), self.speed * math.sin(self.heading), self.v_z]
        )

    def turn_center(self) -> np.ndarray | None:
        if abs(self.kappa) < 1e-12:
            return None
        r = 1.0 / self.kappa
        return self.position[:2] + r * np.array([-math.sin(self.heading), math.cos(self.heading)])


def initial_state(position, params: MobilityParams, rng, heading=None) -> TurnState:
    speed = rng.uniform(params.v_xy_min, params.v_xy_max)
    if heading is None:
        heading = rng.uniform(-math.pi, math.pi)
    return TurnState(np.asarray(position, dtype=float), float(heading), float(speed))


def draw_leg(state: TurnState, params: MobilityParams, rng) -> TurnState:
    """Start a new turn leg: duration, inverse radius, speed and climb rate."""
    duration = rng.exponential(params.mean_turn_duration)
    kappa = rng.normal(0.0, math.sqrt(params.sigma_r2))
    speed = rng.uniform(params.v_xy_min, params.v_xy_max)
    v_z = rng.uniform(params.v_z_min, params.v_z_max)
    up = rng.random() < 0.5
    return replace(
        state,
        kappa=float(kappa),
        speed=float(speed),
        v_z=float(v_z if up else -v_z),
        leg_left=float(duration),
        steering=False,
        projected=False,
        legs=state.legs + (float(duration),),
    )


def advance(state: TurnState, dt: float) -> TurnState:
    """Move along the current arc for ``dt`` seconds."""
    x, y, z = state.position
    h0 = state.heading
    omega = state.speed * state.kappa
    if abs(omega) * dt < 1e-12:
        h1 = h0
        x += state.speed * dt * math.cos(h0)
        y += state.speed * dt * math.sin(h0)
    else:
        h1 = h0 + omega * dt
        r = state.speed / omega
        x += r * (math.sin(h1) - math.sin(h0))
        y -= r * (math.cos(h1) - math.cos(h0))
    z += state.v_z * dt
    return replace(
        state,
        position=np.array([x, y, z]),
        heading=float(wrap_pi(h1)),
        leg_left=state.leg_left - dt,
    )


def step(state: TurnState, params: MobilityParams, rng) -> TurnState:
    if state.leg_left <= 0 or state.steering:
        state = draw_leg(state, params, rng)
    return advance(state, params.dt)


def _distance(state, other):
    return float(np.linalg.norm(state.position - np.asarray(other, float)))


def steer(prev: TurnState, target, away: bool, params: MobilityParams) -> TurnState:
    """Replace the current leg by a pursuit turn towards (or away from) ``target``.

    The curvature closes the heading error within one slot but is capped at
    ``2 / margin``; the UAV flies at ``v_xy_max`` and climbs towards (or away
    from) the target altitude at ``v_z_max``.
    """
    delta = np.asarray(target, float) - prev.position
    desired = math.atan2(delta[1], delta[0]) + (math.pi if away else 0.0)
    err = wrap_pi(desired - prev.heading)
    speed = params.v_xy_max
    k_max = 2.0 / params.margin
    kappa = float(np.clip(err / (speed * params.dt), -k_max, k_max))
    v_z = params.v_z_max if (delta[2] >= 0) != away else -params.v_z_max
    return replace(prev, kappa=kappa, speed=speed, v_z=v_z, steering=True, projected=False)


def enforce_constraints(prev: TurnState, proposed: TurnState, r_position, params, rng) -> TurnState:
    """Keep a t-UAV between ``d_min`` and ``d_max`` of the r-UAV.

    Inside a soft margin of either bound the leg is re-drawn with its turn
    centre biased towards (too far) or away from (too close) the r-UAV. A step that still
    leaves the allowed shell is replaced by the radial projection of the
    previous position, so the hard bounds are never violated; such states
    carry ``projected=True``.
    """
    r_position = np.asarray(r_position, float)
    d = _distance(proposed, r_position)
    lo, hi = params.d_min, params.d_max
    too_far = d > hi - params.margin
    too_close = d < lo + params.margin
    if not (too_far or too_close) and lo <= d <= hi:
        return proposed

    away = too_close or d < lo
    candidate = advance(steer(prev, r_position, away, params), params.dt)
    d = _distance(candidate, r_position)
    if lo <= d <= hi:
        return candidate
    # last resort: nearest feasible point to the previous position, which
    # moves the UAV by at most the r-UAV's own displacement in this slot
    off = prev.position - r_position
    d_prev = float(np.linalg.norm(off))
    target = min(max(d_prev, lo), hi)
    return replace(candidate, position=r_position + off * (target / d_prev), projected=True)


def attitude_from_motion(v, a, prev_yaw: float = 0.0, hover_speed: float = 1e-9) -> np.ndarray:
    """Yaw, pitch and roll from velocity and acceleration.

    Yaw follows the horizontal velocity (held at ``prev_yaw`` when hovering),
    pitch is the climb angle and roll is the coordinated-turn bank angle
    ``atan(a_lat / g)`` with lateral acceleration positive to the right.
    """
    v = np.asarray(v, float)
    a = np.asarray(a, float)
    vxy = math.hypot(v[0], v[1])
    if vxy <= hover_speed:
        yaw = prev_yaw
        a_lat = 0.0
    else:
        yaw = math.atan2(v[1], v[0])
        a_lat = (v[1] * a[0] - v[0] * a[1]) / vxy
    pitch = math.atan2(v[2], vxy)
    roll = math.atan(a_lat / G_ACCEL)
    return np.array([wrap_pi(yaw), pitch, roll])


@dataclass
class Trajectory:
    """Per-slot positions and derived motion of one UAV."""

    positions: np.ndarray
    dt: float
    attitude: np.ndarray = None
    velocity: np.ndarray = None
    acceleration: np.ndarray = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, float)
        if self.velocity is None or self.acceleration is None:
            v = np.zeros_like(self.positions)
            v[1:] = np.diff(self.positions, axis=0) / self.dt
            if len(v) > 1:
                v[0] = v[1]
            acc = np.zeros_like(v)
            acc[1:] = np.diff(v, axis=0) / self.dt
            self.velocity, self.acceleration = v, acc
        if self.attitude is None:
            att = np.zeros_like(self.positions)
            yaw = 0.0
            for t in range(len(att)):
                att[t] = attitude_from_motion(self.velocity[t], self.acceleration[t], yaw)
                yaw = att[t, 0]
            self.attitude = att

    def __len__(self):
        return len(self.positions)

    def state(self, t: int) -> UavState:
        return UavState(self.positions[t], self.attitude[t], self.velocity[t], self.acceleration[t])

    def msi(self) -> np.ndarray:
        """``(n, 6)`` array of x, y, z, yaw, pitch, roll."""
        return np.hstack([self.positions, self.attitude])

    def slice(self, start, stop=None) -> "Trajectory":
        sl = slice(start, stop)
        return Trajectory(
            self.positions[sl],
            self.dt,
            self.attitude[sl],
            self.velocity[sl],
            self.acceleration[sl],
        )


def simulate_formation(K: int, params: MobilityParams, n_slots: int, rng, r_start=(0.0, 0.0, 100.0)):
    """Trajectories of one r-UAV and ``K`` t-UAVs kept inside the distance shell.

    Returns ``(r_traj, [t_traj, ...], legs)`` where ``legs`` lists the drawn
    turn-leg durations of every UAV.
    """
    r = initial_state(r_start, params, rng)
    ts = []
    for _ in range(K):
        dist = rng.uniform(params.d_min + params.margin, params.d_max - params.margin)
        az = rng.uniform(-math.pi, math.pi)
        dz = rng.uniform(-0.2, 0.2) * dist
        dxy = math.sqrt(max(dist**2 - dz**2, 0.0))
        pos = np.asarray(r_start, float) + np.array([dxy * math.cos(az), dxy * math.sin(az), dz])
        ts.append(initial_state(pos, params, rng))
    r_pos = np.zeros((n_slots, 3))
    t_pos = np.zeros((K, n_slots, 3))
    for t in range(n_slots):
        r = step(r, params, rng)
        r_pos[t] = r.position
        for k in range(K):
            proposed = step(ts[k], params, rng)
            ts[k] = enforce_constraints(ts[k], proposed, r.position, params, rng)
            t_pos[k, t] = ts[k].position
    legs = [list(r.legs)] + [list(s.legs) for s in ts]
    return (
        Trajectory(r_pos, params.dt),
        [Trajectory(t_pos[k], params.dt) for k in range(K)],
        legs,
    )


TRAJECTORY_HEADER = ["slot", "x", "y", "z", "yaw", "pitch", "roll"]


def export_trajectory(traj: Trajectory, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        for t, row in enumerate(traj.msi()):
            w.writerow([t] + [repr(float(x)) for x in row])


def import_trajectory(path, dt: float) -> Trajectory:
    """Read a trajectory CSV; velocity/acceleration are re-derived by differences."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    pos = np.array([[float(r["x"]), float(r["y"]), float(r["z"])] for r in rows])
    att = np.array([[float(r["yaw"]), float(r["pitch"]), float(r["roll"])] for r in rows])
    traj = Trajectory(pos, dt)
    traj.attitude = att
    return traj
