"""Torque-limit verification, payload sweeps and reachable-area estimation."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from payloadcheck.dynamics import CHUNK, rnea
from payloadcheck.errors import DimensionMismatch, EmptyTrajectory, PayloadCheckError
from payloadcheck.model import PayloadSpec, RobotModel, attach_payload
from payloadcheck.trajectory import Region, Trajectory

log = logging.getLogger(__name__)

SWEEP_HEADER = ("payload_kg", "valid_fraction", "n_valid", "n_total", "n_unreachable")
GRID_HEADER = ("x_m", "y_m", "occupied")


@dataclass(frozen=True)
class Violation:
    waypoint_index: int
    joint_index: int
    tau: float
    limit: float


@dataclass
class ValidityReport:
    valid: bool
    worst_ratio: float
    first_violation: Optional[Violation] = None
    torques: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        out = {"valid": self.valid, "worst_ratio": self.worst_ratio, "first_violation": None}
        if self.first_violation is not None:
            v = self.first_violation
            out["first_violation"] = {
                "waypoint_index": v.waypoint_index,
                "joint_index": v.joint_index,
                "tau": v.tau,
                "limit": v.limit,
            }
        if self.torques is not None:
            out["torques"] = self.torques.tolist()
        return out


def _report(tau: np.ndarray, limits: np.ndarray, keep_torques: bool) -> ValidityReport:
    mag = np.abs(tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.isinf(limits), 0.0, mag / limits)
    worst = float(np.max(ratio))
    over = mag > limits
    violation = None
    if np.any(over):
        k, j = (int(i) for i in np.argwhere(over)[0])
        violation = Violation(k, j, float(tau[k, j]), float(limits[j]))
    return ValidityReport(violation is None, worst, violation, tau.copy() if keep_torques else None)


def _check_dims(model: RobotModel, traj: Trajectory):
    if len(traj) == 0:
        raise EmptyTrajectory("trajectory has no waypoints")
    if traj.dof != model.dof:
        raise DimensionMismatch(f"trajectory has {traj.dof} joints, model has {model.dof}")


def check_trajectory(model: RobotModel, traj: Trajectory, keep_torques: bool = False) -> ValidityReport:
    """Run RNEA at every waypoint and test ``|tau_i| <= limit_i`` for all joints.

    ``model`` must already carry the payload.  A torque exactly at its limit
    passes.
    """
    _check_dims(model, traj)
    tau = np.atleast_2d(rnea(model, traj.q, traj.qdot, traj.qddot))
    return _report(tau, model.effort_limits, keep_torques)


def _batch_torques(model: RobotModel, Q, Qd, Qdd, threads: int) -> np.ndarray:
    N = Q.shape[0]
    if threads <= 1 or N <= CHUNK:
        return rnea(model, Q, Qd, Qdd)
    bounds = [(s, min(N, s + CHUNK)) for s in range(0, N, CHUNK)]
    out = np.empty((N, model.dof))

    def work(b):
        s, e = b
        out[s:e] = rnea(model, Q[s:e], Qd[s:e], Qdd[s:e])

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, bounds))
    return out


def check_batch(model: RobotModel, trajectories: Sequence[Trajectory], threads: int = 1) -> list[ValidityReport]:
    """:func:`check_trajectory` over many trajectories with one stacked RNEA pass."""
    if not trajectories:
        return []
    for traj in trajectories:
        _check_dims(model, traj)
    lengths = np.array([len(t) for t in trajectories])
    Q = np.concatenate([t.q for t in trajectories])
    Qd = np.concatenate([t.qdot for t in trajectories])
    Qdd = np.concatenate([t.qddot for t in trajectories])
    tau = _batch_torques(model, Q, Qd, Qdd, threads)
    limits = model.effort_limits
    starts = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    return [_report(tau[s : s + n], limits, False) for s, n in zip(starts, lengths)]


@dataclass
class SweepResult:
    payload_masses: list[float]
    valid_fraction: list[float]
    n_valid: list[int]
    trajectories_per_mass: int
    unreachable_count: int = 0

    def rows(self):
        for m, f, v in zip(self.payload_masses, self.valid_fraction, self.n_valid):
            yield m, f, v, self.trajectories_per_mass, self.unreachable_count


def payload_sweep(
    model: RobotModel,
    template: PayloadSpec,
    masses: Sequence[float],
    trajectories: Sequence[Optional[Trajectory]],
    threads: int = 1,
    unreachable: int = 0,
) -> SweepResult:
    """Valid-trajectory fraction for each payload mass.

    The template fixes the com offset; rotational inertia scales with mass.
    ``None`` entries (failed generations), trajectories that do not fit the
    model, and the extra ``unreachable`` count are excluded from the
    denominator and reported as unreachable.
    """
    masses = [float(m) for m in masses]
    if any(m < 0 for m in masses):
        raise ValueError("payload masses must be non-negative")
    if masses != sorted(masses):
        raise ValueError("payload masses must be sorted ascending")
    usable = []
    for traj in trajectories:
        if traj is None:
            unreachable += 1
            continue
        try:
            _check_dims(model, traj)
        except PayloadCheckError as exc:
            log.warning("skipping trajectory: %s", exc)
            unreachable += 1
            continue
        usable.append(traj)
    fractions, counts = [], []
    for m in masses:
        loaded = attach_payload(model, template.scaled_to(m))
        reports = check_batch(loaded, usable, threads)
        n_valid = sum(r.valid for r in reports)
        counts.append(n_valid)
        fractions.append(n_valid / len(usable) if usable else 0.0)
    for a, b in zip(fractions, fractions[1:]):
        if b > a:
            log.warning("valid fraction increased with payload mass (%.6g -> %.6g)", a, b)
    return SweepResult(masses, fractions, counts, len(usable), unreachable)


# ----------------------------------------------------------------- workspace


@dataclass
class WorkspaceGrid:
    """Planar occupancy grid; ``occupancy[iy, ix]`` covers
    ``[x0 + ix*cell, x0 + (ix+1)*cell) x [y0 + iy*cell, ...)``."""

    origin: np.ndarray
    cell_size: float
    dims: tuple[int, int]
    occupancy: np.ndarray = field(repr=False)

    @property
    def area(self) -> float:
        return int(np.count_nonzero(self.occupancy)) * self.cell_size * self.cell_size

    def cell_centers(self):
        nx, ny = self.dims
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.cell_size
        ys = self.origin[1] + (np.arange(ny) + 0.5) * self.cell_size
        return xs, ys


@dataclass
class AreaResult:
    area: float
    grid: WorkspaceGrid
    clipped: int = 0


def grid_for_region(region: Region, cell_size: float, z: float = 0.0) -> WorkspaceGrid:
    if not cell_size > 0:
        raise ValueError("cell_size must be positive")
    (x0, x1), (y0, y1) = region
    nx = max(1, math.ceil((x1 - x0) / cell_size - 1e-9))
    ny = max(1, math.ceil((y1 - y0) / cell_size - 1e-9))
    return WorkspaceGrid(np.array([x0, y0, z], dtype=float), float(cell_size), (nx, ny), np.zeros((ny, nx), dtype=bool))


def reachable_area(valid_targets, region: Region, cell_size: float = 0.02) -> AreaResult:
    """Bin target (x, y) positions into cells; area = occupied cells * cell_size^2.

    Targets outside ``region`` are dropped and counted in ``clipped``; a
    target on the region's upper edge falls in the last cell.
    """
    grid = grid_for_region(region, cell_size)
    (x0, x1), (y0, y1) = region
    pts = np.asarray(valid_targets, dtype=float).reshape(-1, 3) if len(valid_targets) else np.zeros((0, 3))
    inside = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
    nx, ny = grid.dims
    ix = np.minimum(((pts[inside, 0] - x0) / cell_size).astype(int), nx - 1)
    iy = np.minimum(((pts[inside, 1] - y0) / cell_size).astype(int), ny - 1)
    grid.occupancy[iy, ix] = True
    return AreaResult(grid.area, grid, int(np.count_nonzero(~inside)))


# ---------------------------------------------------------------------- output


def _g(x: float) -> str:
    return f"{x:.6g}"


def sweep_csv(sweep: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for m, f, v, n, u in sweep.rows():
        w.writerow((_g(m), _g(f), v, n, u))
    return buf.getvalue()


def grid_csv(grid: WorkspaceGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GRID_HEADER)
    xs, ys = grid.cell_centers()
    for iy, y in enumerate(ys):
        for ix, x in enumerate(xs):
            w.writerow((_g(x), _g(y), int(grid.occupancy[iy, ix])))
    return buf.getvalue()


def grid_sidecar(grid: WorkspaceGrid) -> dict:
    return {
        "origin": [float(v) for v in grid.origin],
        "cell_size_m": grid.cell_size,
        "dims": list(grid.dims),
        "area_m2": grid.area,
    }


def emit_sweep(sweep: SweepResult, path) -> None:
    Path(path).write_text(sweep_csv(sweep), encoding="utf-8")


def emit_grid(grid: WorkspaceGrid, csv_path, sidecar_path=None) -> None:
    csv_path = Path(csv_path)
    sidecar_path = Path(sidecar_path) if sidecar_path else csv_path.with_suffix(".json")
    csv_path.write_text(grid_csv(grid), encoding="utf-8")
    sidecar_path.write_text(json.dumps(grid_sidecar(grid), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_grid(csv_path, sidecar_path=None) -> WorkspaceGrid:
    csv_path = Path(csv_path)
    sidecar_path = Path(sidecar_path) if sidecar_path else csv_path.with_suffix(".json")
    meta = json.loads(sidecar_path.read_text(encoding="utf-8"))
    nx, ny = meta["dims"]
    with csv_path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != GRID_HEADER or len(rows) - 1 != nx * ny:
        raise ValueError(f"{csv_path}: unexpected grid layout")
    occ = np.array([int(r[2]) for r in rows[1:]], dtype=bool).reshape(ny, nx)
    return WorkspaceGrid(np.array(meta["origin"], dtype=float), float(meta["cell_size_m"]), (nx, ny), occ)
