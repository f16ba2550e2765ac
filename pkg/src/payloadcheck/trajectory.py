"""Timed joint trajectories, the pick-and-place and push generators, and JSON I/O."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from payloadcheck.errors import (
    DimensionMismatch,
    IkFailure,
    JointLimitHit,
    MalformedTrajectory,
    NoConvergence,
    SingularityStall,
    VelocityLimitHit,
)
from payloadcheck.kinematics import EePose, IkParams, ee_pose, resolved_rate_path, solve_ik
from payloadcheck.model import RobotModel

MIN_SEGMENT_DURATION = 0.5
# tool z axis pointing down, tool x along base x
TOP_DOWN = np.diag([1.0, -1.0, -1.0])

Region = tuple[tuple[float, float], tuple[float, float]]
DEFAULT_REGION: Region = ((-0.7, 0.7), (-0.7, 0.7))


@dataclass(frozen=True)
class JointState:
    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray


@dataclass(frozen=True)
class Waypoint:
    t: float
    state: JointState


@dataclass
class Trajectory:
    """Waypoints stored column-wise: ``t`` is ``(N,)``, the joint arrays ``(N, n)``."""

    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        self.qdot = np.atleast_2d(np.asarray(self.qdot, dtype=float))
        self.qddot = np.atleast_2d(np.asarray(self.qddot, dtype=float))

    def __len__(self):
        return len(self.t)

    @property
    def dof(self) -> int:
        return self.q.shape[1]

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    @property
    def waypoints(self) -> list[Waypoint]:
        return [Waypoint(float(t), JointState(q, qd, qdd)) for t, q, qd, qdd in zip(self.t, self.q, self.qdot, self.qddot)]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.meta == other.meta
            and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in ("t", "q", "qdot", "qddot"))
        )


def static_trajectory(q, n_waypoints: int = 1, dt: float = 0.01, meta: Optional[dict] = None) -> Trajectory:
    """Robot held at rest at ``q``."""
    q = np.asarray(q, dtype=float)
    Q = np.tile(q, (n_waypoints, 1))
    return Trajectory(np.arange(n_waypoints) * dt, Q, np.zeros_like(Q), np.zeros_like(Q), dict(meta or {"primitive": "external"}))


# ------------------------------------------------------------------ timing


def quintic_segment(q0, q1, duration: float, dt: float) -> Trajectory:
    """Rest-to-rest quintic from ``q0`` to ``q1``.

    ``duration`` is rounded up to a whole number of ``dt`` steps so the
    samples land on both endpoints.
    """
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    if q0.shape != q1.shape or q0.ndim != 1:
        raise DimensionMismatch(f"endpoint shapes differ: {q0.shape} vs {q1.shape}")
    if not (duration > 0 and dt > 0):
        raise ValueError("duration and dt must be positive")
    K = max(1, math.ceil(duration / dt - 1e-9))
    T = K * dt
    s = (np.arange(K + 1) / K)[:, None]
    dq = (q1 - q0)[None, :]
    h = s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
    hd = 30.0 * s**2 * (1.0 - s) ** 2 / T
    hdd = 60.0 * s * (1.0 - 3.0 * s + 2.0 * s**2) / (T * T)
    q = q0 + dq * h
    q[-1] = q1
    return Trajectory(np.arange(K + 1) * dt, q, dq * hd, dq * hdd, {})


def segment_duration(model: RobotModel, q0, q1, dt: float) -> float:
    """Shortest whole-step duration whose quintic peak speed (15/8 dq / T) respects joint limits."""
    dq = np.abs(np.asarray(q1, dtype=float) - np.asarray(q0, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(dq > 0, 15.0 / 8.0 * dq / model.velocity_limits, 0.0)
    T = max(MIN_SEGMENT_DURATION, float(np.max(need)) if need.size else 0.0)
    return math.ceil(T / dt - 1e-9) * dt


def concatenate(segments: Sequence[Trajectory], meta: Optional[dict] = None) -> Trajectory:
    """Join segments end to start; shared boundary waypoints appear once."""
    if not segments:
        raise ValueError("nothing to concatenate")
    dt = segments[0].dt
    parts = {k: [getattr(segments[0], k)] for k in ("q", "qdot", "qddot")}
    for seg in segments[1:]:
        for k in parts:
            parts[k].append(getattr(seg, k)[1:])
    q = np.concatenate(parts["q"])
    return Trajectory(np.arange(len(q)) * dt, q, np.concatenate(parts["qdot"]), np.concatenate(parts["qddot"]), dict(meta or {}))


# -------------------------------------------------------------- generators


def yaw_matrix(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def top_down_pose(position, align_yaw: bool = True) -> EePose:
    """Tool z axis down; optionally yawed to face radially away from the base."""
    position = np.asarray(position, dtype=float)
    R = TOP_DOWN
    if align_yaw:
        R = yaw_matrix(math.atan2(position[1], position[0])) @ TOP_DOWN
    return EePose(R, position)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


@dataclass(frozen=True)
class PickPlaceParams:
    home_config: np.ndarray
    surface_height: float = 0.0
    region: Region = DEFAULT_REGION
    lift_height: float = 0.15
    dt: float = 0.01
    rng_seed: Union[int, tuple[int, ...]] = 0
    align_yaw: bool = True
    ik: IkParams = IkParams()

    def __post_init__(self):
        (x0, x1), (y0, y1) = self.region
        if not (x0 <= x1 and y0 <= y1):
            raise ValueError(f"empty region {self.region}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class PushParams:
    start_pose: EePose
    seed_config: np.ndarray
    direction_index: int = 0
    distance: float = 0.10
    speed: float = 0.05
    dt: float = 0.01
    ik: IkParams = IkParams()

    def __post_init__(self):
        if not (isinstance(self.direction_index, (int, np.integer)) and 0 <= self.direction_index <= 7):
            raise ValueError(f"direction_index must be an integer in 0..7, got {self.direction_index}")
        if not (self.distance > 0 and self.speed > 0 and self.dt > 0):
            raise ValueError("distance, speed and dt must be positive")

    @property
    def direction(self) -> np.ndarray:
        a = self.direction_index * math.pi / 4
        return np.array([math.cos(a), math.sin(a), 0.0])


def sample_pick_target(params: PickPlaceParams) -> np.ndarray:
    (x0, x1), (y0, y1) = params.region
    u = _rng(params.rng_seed).random(2)
    return np.array([x0 + (x1 - x0) * u[0], y0 + (y1 - y0) * u[1], params.surface_height])


def _ik(model, pose, seed, params, what):
    try:
        return solve_ik(model, pose, seed, params)
    except NoConvergence as exc:
        raise IkFailure(f"{what}: {exc}") from exc


def _seed_meta(seed):
    return list(seed) if isinstance(seed, (tuple, list)) else seed


def gen_pick_place(model: RobotModel, params: PickPlaceParams) -> Trajectory:
    """home -> pre-grasp -> grasp -> lift, each a velocity-limited quintic."""
    target = sample_pick_target(params)
    pose = top_down_pose(target, params.align_yaw)
    above = EePose(pose.rotation, target + np.array([0.0, 0.0, params.lift_height]))
    home = np.asarray(params.home_config, dtype=float)
    q_pre = _ik(model, above, home, params.ik, "pre-grasp")
    q_grasp = _ik(model, pose, q_pre, params.ik, "grasp")
    legs = [(home, q_pre), (q_pre, q_grasp), (q_grasp, q_pre)]
    segs = [quintic_segment(a, b, segment_duration(model, a, b, params.dt), params.dt) for a, b in legs]
    meta = {
        "primitive": "pick",
        "generator_seed": _seed_meta(params.rng_seed),
        "target_ee_position": target.tolist(),
        "grasp_index": len(segs[0]) + len(segs[1]) - 2,
    }
    return concatenate(segs, meta)


def push_state(path: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Commanded joint velocities along a resolved-rate path and their central differences.

    Waypoint k carries the rate that takes it to waypoint k + 1; the last
    waypoint keeps the final commanded rate.
    """
    if len(path) == 1:
        return np.zeros_like(path), np.zeros_like(path)
    qdot = np.empty_like(path)
    qdot[:-1] = np.diff(path, axis=0) / dt
    qdot[-1] = qdot[-2]
    qddot = np.gradient(qdot, dt, axis=0, edge_order=1)
    return qdot, qddot


def gen_push(model: RobotModel, params: PushParams) -> Trajectory:
    q0 = _ik(model, params.start_pose, params.seed_config, params.ik, "push start")
    path = resolved_rate_path(model, q0, params.direction, params.distance, params.speed, params.dt, params.ik.damping)
    qdot, qddot = push_state(path, params.dt)
    over = np.abs(qdot) > model.velocity_limits
    if np.any(over):
        k, j = np.argwhere(over)[0]
        raise VelocityLimitHit(f"joint {j} exceeds its velocity limit at waypoint {k}")
    end = ee_pose(model, path[-1]).position
    meta = {
        "primitive": "push",
        "direction_index": int(params.direction_index),
        "start_ee_position": np.asarray(params.start_pose.position, dtype=float).tolist(),
        "target_ee_position": end.tolist(),
    }
    return Trajectory(np.arange(len(path)) * params.dt, path, qdot, qddot, meta)


# -------------------------------------------------------------------- batch


@dataclass(frozen=True)
class BatchConfig:
    """Shared settings for generating many primitives."""

    home_config: np.ndarray
    region: Region = DEFAULT_REGION
    surface_height: float = 0.0
    lift_height: float = 0.15
    push_distance: float = 0.10
    push_speed: float = 0.05
    dt: float = 0.01
    align_yaw: bool = True


@dataclass
class BatchItem:
    index: int
    seed: list
    trajectory: Optional[Trajectory]
    error: Optional[str] = None


def sample_seed(seed: int, index: int) -> tuple[int, int]:
    """Per-sample RNG stream key; independent of scheduling and batch size."""
    return (int(seed), int(index))


def gen_sample(model: RobotModel, mode: str, config: BatchConfig, seed: int, index: int) -> BatchItem:
    key = sample_seed(seed, index)
    try:
        if mode == "pick":
            params = PickPlaceParams(
                home_config=config.home_config,
                surface_height=config.surface_height,
                region=config.region,
                lift_height=config.lift_height,
                dt=config.dt,
                rng_seed=key,
                align_yaw=config.align_yaw,
            )
            traj = gen_pick_place(model, params)
        elif mode == "push":
            rng = _rng(key)
            (x0, x1), (y0, y1) = config.region
            u = rng.random(2)
            start = np.array([x0 + (x1 - x0) * u[0], y0 + (y1 - y0) * u[1], config.surface_height])
            params = PushParams(
                start_pose=top_down_pose(start, config.align_yaw),
                seed_config=config.home_config,
                direction_index=int(rng.integers(0, 8)),
                distance=config.push_distance,
                speed=config.push_speed,
                dt=config.dt,
            )
            traj = gen_push(model, params)
            traj.meta["generator_seed"] = list(key)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    except (IkFailure, SingularityStall, JointLimitHit, VelocityLimitHit) as exc:
        return BatchItem(index, list(key), None, f"{type(exc).__name__}: {exc}")
    return BatchItem(index, list(key), traj)


def generate_batch(
    model: RobotModel, mode: str, count: int, seed: int, config: BatchConfig, threads: int = 1
) -> list[BatchItem]:
    """``count`` primitives in index order; results do not depend on ``threads``."""
    if threads <= 1 or count <= 1:
        return [gen_sample(model, mode, config, seed, i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: gen_sample(model, mode, config, seed, i), range(count)))


# ---------------------------------------------------------------------- I/O


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "n": int(traj.dof),
        "dt": traj.dt,
        "meta": traj.meta,
        "waypoints": [
            {"t": float(t), "q": q.tolist(), "qdot": qd.tolist(), "qddot": qdd.tolist()}
            for t, q, qd, qdd in zip(traj.t, traj.q, traj.qdot, traj.qddot)
        ],
    }


def dumps_trajectory(traj: Trajectory) -> str:
    return json.dumps(trajectory_to_dict(traj), sort_keys=True, allow_nan=False) + "\n"


def save_trajectory(traj: Trajectory, sink) -> None:
    """Write JSON to a path or a text file object."""
    text = dumps_trajectory(traj)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        Path(sink).write_text(text, encoding="utf-8")


def trajectory_from_dict(doc) -> Trajectory:
    if not isinstance(doc, dict) or "waypoints" not in doc:
        raise MalformedTrajectory("missing 'waypoints'")
    wps = doc["waypoints"]
    if not isinstance(wps, list) or not wps:
        raise MalformedTrajectory("'waypoints' must be a non-empty list")
    n = doc.get("n")
    rows = {k: [] for k in ("t", "q", "qdot", "qddot")}
    for i, wp in enumerate(wps):
        if not isinstance(wp, dict):
            raise MalformedTrajectory(f"waypoint {i}: not an object")
        for k in ("t", "q", "qdot", "qddot"):
            if k not in wp:
                raise MalformedTrajectory(f"waypoint {i}: missing field {k!r}")
        try:
            t = float(wp["t"])
            vecs = [np.asarray(wp[k], dtype=float) for k in ("q", "qdot", "qddot")]
        except (TypeError, ValueError) as exc:
            raise MalformedTrajectory(f"waypoint {i}: {exc}") from exc
        if n is None:
            n = len(vecs[0])
        for k, v in zip(("q", "qdot", "qddot"), vecs):
            if v.shape != (n,):
                raise MalformedTrajectory(f"waypoint {i}: {k} has length {v.size}, expected {n}")
            if not np.all(np.isfinite(v)):
                raise MalformedTrajectory(f"waypoint {i}: {k} is not finite")
            rows[k].append(v)
        if not math.isfinite(t) or t < 0:
            raise MalformedTrajectory(f"waypoint {i}: invalid time {wp['t']!r}")
        if rows["t"] and t <= rows["t"][-1]:
            raise MalformedTrajectory(f"waypoint {i}: time {t} does not increase")
        rows["t"].append(t)
    meta = doc.get("meta") or {}
    if not isinstance(meta, dict):
        raise MalformedTrajectory("'meta' must be an object")
    return Trajectory(np.array(rows["t"]), np.array(rows["q"]), np.array(rows["qdot"]), np.array(rows["qddot"]), meta)


def load_trajectory(source) -> Trajectory:
    """Read JSON from a path or a text file object."""
    try:
        text = source.read() if hasattr(source, "read") else Path(source).read_text(encoding="utf-8")
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedTrajectory(f"invalid JSON: {exc}") from exc
    return trajectory_from_dict(doc)

