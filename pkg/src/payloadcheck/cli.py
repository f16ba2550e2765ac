"""``payloadcheck`` command line: info, validate, gen, sweep, workspace.

Exit codes: 0 success / valid, 1 torque-invalid, 2 usage, model or IO error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from payloadcheck import analysis, fixtures
from payloadcheck.errors import PayloadCheckError
from payloadcheck.model import PayloadSpec, RobotModel, attach_payload, load_payload_json, load_urdf, validate_model
from payloadcheck.trajectory import DEFAULT_REGION, BatchConfig, dumps_trajectory, generate_batch, load_trajectory

DEFAULT_SEED = 20240
MANIFEST = "manifest.json"

log = logging.getLogger("payloadcheck")


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ parsing


def _floats(text: str, n: int | None, what: str) -> list[float]:
    try:
        vals = [float(s) for s in text.split(",")]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"{what}: expected {n} values, got {len(vals)}")
    return vals


def parse_masses(text: str) -> list[float]:
    """Inclusive ``start:stop:step`` (or a single number) to a mass list."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad masses range {text!r}") from None
    if len(nums) == 1:
        return nums
    if len(nums) != 3:
        raise UsageError(f"masses must be start:stop:step, got {text!r}")
    start, stop, step = nums
    if not step > 0 or stop < start:
        raise UsageError(f"masses need step > 0 and stop >= start, got {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def _region(text: str | None):
    if text is None:
        return DEFAULT_REGION
    x0, x1, y0, y1 = _floats(text, 4, "--region")
    if not (x1 >= x0 and y1 >= y0):
        raise UsageError("--region must be xmin,xmax,ymin,ymax with max >= min")
    return ((x0, x1), (y0, y1))


def _model(args) -> RobotModel:
    path = args.model or fixtures.panda_urdf_path()
    if not Path(path).is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    model = load_urdf(path)
    if getattr(args, "effort_limit", None) is not None:
        vals = _floats(args.effort_limit, None, "--effort-limit")
        if len(vals) not in (1, model.dof):
            raise UsageError(f"--effort-limit takes 1 or {model.dof} values")
        model = model.with_effort_limits(vals[0] if len(vals) == 1 else vals)
    return model


def _payload_template(args) -> PayloadSpec:
    """Payload from --payload-json, overridden by --payload-mass/--payload-offset."""
    p = load_payload_json(args.payload_json) if args.payload_json else PayloadSpec(0.0)
    if args.payload_offset is not None:
        p = PayloadSpec(p.mass, np.array(_floats(args.payload_offset, 3, "--payload-offset")), p.inertia_about_com)
    if args.payload_mass is not None:
        if args.payload_mass < 0 or not math.isfinite(args.payload_mass):
            raise UsageError("--payload-mass must be finite and non-negative")
        p = p.scaled_to(args.payload_mass) if p.mass > 0 else PayloadSpec(args.payload_mass, p.com_offset, p.inertia_about_com)
    return p


def _batch_config(args) -> BatchConfig:
    return BatchConfig(
        home_config=fixtures.PANDA_HOME if args.home is None else np.array(_floats(args.home, None, "--home")),
        region=_region(args.region),
        surface_height=args.surface_height,
        lift_height=args.lift_height,
        push_distance=args.push_distance,
        push_speed=args.push_speed,
        dt=args.dt,
    )


def _write(path, text: str):
    Path(path).write_text(text, encoding="utf-8")


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ----------------------------------------------------------------- commands


def cmd_info(args) -> int:
    model = _model(args)
    print(f"model: {model.name}")
    print(f"dof: {model.dof}")
    print(f"end effector: {model.ee_name}")
    for j in model.actuated_joints:
        lo, hi = j.position_limits
        print(
            f"  joint {j.name:<16} {j.kind.value:<9} effort {j.effort_limit:g}  velocity {j.velocity_limit:g}"
            f"  range [{lo:g}, {hi:g}]"
        )
    for link in model.links:
        print(f"  link  {link.name:<16} mass {link.inertia.mass:.6g}")
    print(f"total mass: {model.total_mass:.6g}")
    print(f"moving mass: {model.moving_mass:.6g}")
    for d in validate_model(model):
        print(f"warning: {d}")
    return 0


def cmd_validate(args) -> int:
    model = attach_payload(_model(args), _payload_template(args))
    traj = load_trajectory(args.trajectory)
    report = analysis.check_trajectory(model, traj, keep_torques=args.keep_torques)
    print(f"valid: {str(report.valid).lower()}")
    print(f"worst_ratio: {report.worst_ratio:.6g}")
    v = report.first_violation
    if v is not None:
        print(f"first_violation: waypoint {v.waypoint_index} joint {v.joint_index} tau {v.tau:.6g} limit {v.limit:.6g}")
    if args.out:
        _write(args.out, _json(report.to_dict()))
    return 0 if report.valid else 1


def cmd_gen(args) -> int:
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    model = _model(args)
    config = _batch_config(args)
    out = Path(args.out or "trajectories")
    out.mkdir(parents=True, exist_ok=True)
    items = generate_batch(model, args.mode, args.count, args.seed, config, threads=args.threads)
    entries = []
    for item in items:
        entry = {"index": item.index, "seed": item.seed}
        if item.trajectory is None:
            entry.update(status="failed", error=item.error)
        else:
            name = f"traj_{item.index:05d}.json"
            _write(out / name, dumps_trajectory(item.trajectory))
            entry.update(status="ok", file=name)
        entries.append(entry)
    n_ok = sum(e["status"] == "ok" for e in entries)
    manifest = {
        "mode": args.mode,
        "seed": args.seed,
        "count": args.count,
        "model": model.name,
        "n_ok": n_ok,
        "n_failed": len(entries) - n_ok,
        "items": entries,
    }
    _write(out / MANIFEST, _json(manifest))
    print(f"generated {n_ok}/{args.count} {args.mode} trajectories in {out}")
    return 0


def _load_dir(traj_dir: Path):
    if not traj_dir.is_dir():
        raise FileNotFoundError(f"trajectory directory not found: {traj_dir}")
    unreachable = 0
    manifest = traj_dir / MANIFEST
    if manifest.is_file():
        doc = json.loads(manifest.read_text(encoding="utf-8"))
        unreachable = sum(1 for e in doc.get("items", []) if e.get("status") != "ok")
    files = sorted(p for p in traj_dir.glob("*.json") if p.name != MANIFEST)
    return [load_trajectory(p) for p in files], unreachable


def cmd_sweep(args) -> int:
    model = _model(args)
    masses = parse_masses(args.masses)
    trajs, unreachable = _load_dir(Path(args.trajectories))
    if not trajs:
        raise UsageError(f"no trajectories in {args.trajectories}")
    # the sweep sets the mass; the template only fixes geometry
    template = _payload_template(args)
    result = analysis.payload_sweep(model, template, masses, trajs, threads=args.threads, unreachable=unreachable)
    text = analysis.sweep_csv(result)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_workspace(args) -> int:
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    if not args.cell_size > 0:
        raise UsageError("--cell-size must be positive")
    base = _model(args)
    config = _batch_config(args)
    loaded = attach_payload(base, _payload_template(args))
    items = generate_batch(base, args.mode, args.count, args.seed, config, threads=args.threads)
    trajs = [it.trajectory for it in items if it.trajectory is not None]
    reports = analysis.check_batch(loaded, trajs, threads=args.threads)
    targets = [t.meta["target_ee_position"] for t, r in zip(trajs, reports) if r.valid]
    result = analysis.reachable_area(targets, config.region, args.cell_size)
    out = Path(args.out or "workspace")
    out.mkdir(parents=True, exist_ok=True)
    analysis.emit_grid(result.grid, out / "grid.csv", out / "grid.json")
    print(f"samples: {args.count} generated: {len(trajs)} valid: {len(targets)} clipped: {result.clipped}")
    print(f"area_m2: {result.area:.6g}")
    return 0


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="URDF file (default: bundled Panda fixture)")
    common.add_argument("--payload-mass", type=float, help="point payload mass in kg")
    common.add_argument("--payload-offset", help="payload com x,y,z in the end-effector frame, m")
    common.add_argument("--payload-json", help="payload JSON file (mass_kg, com_offset_m, inertia_kg_m2)")
    common.add_argument("--effort-limit", help="override effort limits: one value or one per joint, 'inf' allowed")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--threads", type=int, default=1)

    gen_opts = argparse.ArgumentParser(add_help=False)
    gen_opts.add_argument("--mode", choices=("pick", "push"), default="pick")
    gen_opts.add_argument("--count", type=int, default=100)
    gen_opts.add_argument("--region", help="target region xmin,xmax,ymin,ymax in m")
    gen_opts.add_argument("--surface-height", type=float, default=0.0)
    gen_opts.add_argument("--lift-height", type=float, default=0.15)
    gen_opts.add_argument("--push-distance", type=float, default=0.10)
    gen_opts.add_argument("--push-speed", type=float, default=0.05)
    gen_opts.add_argument("--dt", type=float, default=0.01)
    gen_opts.add_argument("--home", help="home configuration, comma-separated joint values")

    p = argparse.ArgumentParser(prog="payloadcheck", description="Payload-aware torque-limit analysis.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("info", parents=[common], help="summarize a robot model")
    s.set_defaults(func=cmd_info)

    s = sub.add_parser("validate", parents=[common], help="check one trajectory against torque limits")
    s.add_argument("trajectory")
    s.add_argument("--keep-torques", action="store_true", help="include per-waypoint torques in the JSON report")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("gen", parents=[common, gen_opts], help="generate pick or push trajectories")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("sweep", parents=[common], help="valid fraction over payload masses")
    s.add_argument("trajectories", help="directory of trajectory JSON files")
    s.add_argument("--masses", default="0:18:1", help="inclusive start:stop:step in kg")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("workspace", parents=[common, gen_opts], help="reachable area under a payload")
    s.add_argument("--cell-size", type=float, default=0.02)
    s.set_defaults(func=cmd_workspace)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (PayloadCheckError, UsageError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
