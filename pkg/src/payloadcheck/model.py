"""Serial-chain robot description, URDF-subset ingestion and payload attachment."""

from __future__ import annotations

import enum
import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from payloadcheck.errors import (
    BranchingChain,
    InvalidLimit,
    MalformedPayload,
    MalformedXml,
    MissingInertial,
    ModelError,
    NonUnitAxis,
)
from payloadcheck.spatial import (
    SpatialInertia,
    SpatialTransform,
    compose,
    compose_inertia,
    matrix_rpy,
    rotate_inertia,
    rpy_matrix,
    shift_inertia,
)

DEFAULT_GRAVITY = (0.0, 0.0, -9.81)


class JointKind(str, enum.Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"
    FIXED = "fixed"


@dataclass(frozen=True)
class Joint:
    name: str
    kind: JointKind
    axis: np.ndarray
    origin: SpatialTransform
    position_limits: tuple[float, float] = (-math.inf, math.inf)
    velocity_limit: float = math.inf
    effort_limit: float = math.inf

    @property
    def actuated(self) -> bool:
        return self.kind is not JointKind.FIXED


@dataclass(frozen=True)
class Link:
    name: str
    inertia: SpatialInertia


@dataclass(frozen=True)
class RobotModel:
    """Immutable serial chain.

    ``links[0]`` is the fixed base; ``joints[i]`` connects ``links[i]`` to
    ``links[i + 1]``.  ``ee_offset`` places the end-effector frame relative to
    the terminal link frame (it absorbs trailing fixed joints collapsed during
    parsing).
    """

    links: tuple[Link, ...]
    joints: tuple[Joint, ...]
    gravity: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_GRAVITY))
    ee_offset: SpatialTransform = field(default_factory=SpatialTransform.identity)
    name: str = "robot"
    ee_name: str = "ee"

    def __post_init__(self):
        if len(self.joints) != len(self.links) - 1:
            raise ModelError(f"{len(self.links)} links need {len(self.links) - 1} joints, got {len(self.joints)}")
        names = [l.name for l in self.links]
        if len(set(names)) != len(names):
            raise ModelError("link names must be unique")
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float))

    @cached_property
    def actuated_indices(self) -> tuple[int, ...]:
        return tuple(i for i, j in enumerate(self.joints) if j.actuated)

    @property
    def dof(self) -> int:
        return len(self.actuated_indices)

    @cached_property
    def dof_index(self) -> dict[str, int]:
        return {self.joints[i].name: k for k, i in enumerate(self.actuated_indices)}

    @cached_property
    def actuated_joints(self) -> tuple[Joint, ...]:
        return tuple(self.joints[i] for i in self.actuated_indices)

    @cached_property
    def effort_limits(self) -> np.ndarray:
        return np.array([j.effort_limit for j in self.actuated_joints], dtype=float)

    @cached_property
    def velocity_limits(self) -> np.ndarray:
        return np.array([j.velocity_limit for j in self.actuated_joints], dtype=float)

    @cached_property
    def lower_limits(self) -> np.ndarray:
        return np.array([j.position_limits[0] for j in self.actuated_joints], dtype=float)

    @cached_property
    def upper_limits(self) -> np.ndarray:
        return np.array([j.position_limits[1] for j in self.actuated_joints], dtype=float)

    @property
    def total_mass(self) -> float:
        """Sum of all link masses, base included."""
        return float(sum(l.inertia.mass for l in self.links))

    @property
    def moving_mass(self) -> float:
        return float(sum(l.inertia.mass for l in self.links[1:]))

    @property
    def terminal(self) -> Link:
        return self.links[-1]

    def with_gravity(self, gravity) -> RobotModel:
        return replace(self, gravity=np.asarray(gravity, dtype=float))

    def with_effort_limits(self, limits) -> RobotModel:
        """Copy with actuated-joint effort limits replaced (scalar broadcasts)."""
        limits = np.broadcast_to(np.asarray(limits, dtype=float), (self.dof,))
        joints = list(self.joints)
        for k, i in enumerate(self.actuated_indices):
            joints[i] = replace(joints[i], effort_limit=float(limits[k]))
        return replace(self, joints=tuple(joints))

    def with_terminal_inertia(self, inertia: SpatialInertia) -> RobotModel:
        links = self.links[:-1] + (replace(self.links[-1], inertia=inertia),)
        return replace(self, links=links)


@dataclass(frozen=True)
class PayloadSpec:
    """Rigid payload expressed in the end-effector frame."""

    mass: float
    com_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia_about_com: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "com_offset", np.asarray(self.com_offset, dtype=float).reshape(3))
        object.__setattr__(self, "inertia_about_com", np.asarray(self.inertia_about_com, dtype=float).reshape(3, 3))
        if not math.isfinite(self.mass) or self.mass < 0:
            raise MalformedPayload(f"payload mass must be finite and >= 0, got {self.mass}")
        I = self.inertia_about_com
        if np.max(np.abs(I - I.T)) > 1e-12 or np.linalg.eigvalsh(0.5 * (I + I.T))[0] < -1e-12:
            raise MalformedPayload("payload inertia must be symmetric positive semidefinite")

    def as_inertia(self) -> SpatialInertia:
        return SpatialInertia(self.mass, self.com_offset, self.inertia_about_com)

    def scaled_to(self, mass: float) -> PayloadSpec:
        """Same geometry with ``mass``; rotational inertia scales proportionally."""
        I = self.inertia_about_com * (mass / self.mass) if self.mass > 0 else np.zeros((3, 3))
        return PayloadSpec(mass, self.com_offset, I)

    @classmethod
    def from_dict(cls, d: dict) -> PayloadSpec:
        try:
            return cls(
                d["mass_kg"],
                d.get("com_offset_m", (0.0, 0.0, 0.0)),
                d.get("inertia_kg_m2", np.zeros((3, 3))),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedPayload(f"bad payload: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "mass_kg": self.mass,
            "com_offset_m": self.com_offset.tolist(),
            "inertia_kg_m2": self.inertia_about_com.tolist(),
        }


def load_payload_json(path) -> PayloadSpec:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedPayload(f"{path}: {exc}") from exc
    return PayloadSpec.from_dict(d)


def attach_payload(model: RobotModel, payload: PayloadSpec) -> RobotModel:
    """Rigidly merge ``payload`` into the terminal link.

    The payload is given in the end-effector frame; it is carried through
    ``model.ee_offset`` into terminal-link coordinates and composed with the
    link's own inertia.  A massless, inertia-free payload returns ``model``.
    """
    if payload.mass == 0.0 and not np.any(payload.inertia_about_com):
        return model
    R, p = model.ee_offset.pose()
    body = shift_inertia(rotate_inertia(payload.as_inertia(), R), p)
    return model.with_terminal_inertia(compose_inertia(model.terminal.inertia, body))


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    subject: str
    message: str

    def __str__(self):
        return f"{self.kind}[{self.subject}]: {self.message}"


def validate_model(model: RobotModel) -> list[Diagnostic]:
    out = []
    for link in model.links:
        for msg in link.inertia.diagnostics():
            out.append(Diagnostic("InvalidInertia", link.name, msg))
    for j in model.joints:
        if not j.origin.is_valid():
            out.append(Diagnostic("InvalidOrigin", j.name, "origin rotation is not a proper rotation"))
        if not j.actuated:
            continue
        if abs(np.linalg.norm(j.axis) - 1.0) > 1e-9:
            out.append(Diagnostic("NonUnitAxis", j.name, f"|axis| = {np.linalg.norm(j.axis):.12g}"))
        lo, hi = j.position_limits
        if not lo < hi:
            out.append(Diagnostic("InvalidLimit", j.name, f"position limits [{lo}, {hi}] are empty"))
        if not j.velocity_limit > 0:
            out.append(Diagnostic("InvalidLimit", j.name, f"velocity limit {j.velocity_limit} <= 0"))
        if not j.effort_limit > 0:
            out.append(Diagnostic("InvalidLimit", j.name, f"effort limit {j.effort_limit} <= 0"))
    if not np.all(np.isfinite(model.gravity)):
        out.append(Diagnostic("InvalidGravity", model.name, "gravity not finite"))
    return out


# --------------------------------------------------------------------- URDF


def _floats(text: Optional[str], n: int, what: str) -> np.ndarray:
    if text is None:
        return np.zeros(n)
    try:
        vals = np.array([float(t) for t in text.split()], dtype=float)
    except ValueError as exc:
        raise MalformedXml(f"{what}: {exc}") from exc
    if vals.shape != (n,) or not np.all(np.isfinite(vals)):
        raise MalformedXml(f"{what}: expected {n} finite numbers, got {text!r}")
    return vals


def _origin(el: Optional[ET.Element], what: str) -> SpatialTransform:
    if el is None:
        return SpatialTransform.identity()
    xyz = _floats(el.get("xyz"), 3, f"{what} origin xyz")
    rpy = _floats(el.get("rpy"), 3, f"{what} origin rpy")
    return SpatialTransform.from_pose(rpy_matrix(rpy), xyz)


def _attr_float(el: ET.Element, key: str, default: float, what: str) -> float:
    raw = el.get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise MalformedXml(f"{what}: {key}={raw!r}") from exc


def _parse_inertial(link_el: ET.Element) -> Optional[SpatialInertia]:
    name = link_el.get("name")
    inertial = link_el.find("inertial")
    if inertial is None:
        return None
    mass_el = inertial.find("mass")
    if mass_el is None:
        raise MissingInertial(f"link {name!r}: inertial block without mass")
    mass = _attr_float(mass_el, "value", math.nan, f"link {name!r} mass")
    if not math.isfinite(mass) or mass < 0:
        raise MalformedXml(f"link {name!r}: invalid mass {mass_el.get('value')!r}")
    frame = _origin(inertial.find("origin"), f"link {name!r} inertial")
    R, p = frame.pose()
    I = np.zeros((3, 3))
    inertia_el = inertial.find("inertia")
    if inertia_el is not None:
        g = {k: _attr_float(inertia_el, k, 0.0, f"link {name!r} inertia") for k in ("ixx", "ixy", "ixz", "iyy", "iyz", "izz")}
        I = np.array(
            [[g["ixx"], g["ixy"], g["ixz"]], [g["ixy"], g["iyy"], g["iyz"]], [g["ixz"], g["iyz"], g["izz"]]]
        )
    return SpatialInertia(mass, p, R @ I @ R.T)


def parse_urdf(text: str) -> RobotModel:
    """Parse the supported URDF subset into a :class:`RobotModel`.

    Fixed joints are collapsed into their parent link; trailing fixed joints
    define ``ee_offset``.  Links may omit ``<inertial>`` only when they are
    the root or hang off a fixed joint (they are then massless).
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc
    if root.tag != "robot":
        raise MalformedXml(f"root element is <{root.tag}>, expected <robot>")

    link_els = {}
    for el in root.findall("link"):
        name = el.get("name")
        if name is None:
            raise MalformedXml("link without name")
        if name in link_els:
            raise MalformedXml(f"duplicate link {name!r}")
        link_els[name] = el
    if not link_els:
        raise MalformedXml("no links")

    children: dict[str, list[ET.Element]] = {n: [] for n in link_els}
    child_of = {}
    for el in root.findall("joint"):
        jname = el.get("name")
        p_el, c_el = el.find("parent"), el.find("child")
        if jname is None or p_el is None or c_el is None:
            raise MalformedXml("joint needs name, parent and child")
        parent, child = p_el.get("link"), c_el.get("link")
        if parent not in link_els or child not in link_els:
            raise MalformedXml(f"joint {jname!r} references unknown link")
        if child in child_of:
            raise MalformedXml(f"link {child!r} has two parents")
        children[parent].append(el)
        child_of[child] = jname
    for parent, els in children.items():
        if len(els) > 1:
            raise BranchingChain(f"link {parent!r} has {len(els)} child joints")
    roots = [n for n in link_els if n not in child_of]
    if len(roots) != 1:
        raise MalformedXml(f"expected one root link, found {len(roots)}")

    def inertia_of(name: str, required: bool) -> SpatialInertia:
        inertia = _parse_inertial(link_els[name])
        if inertia is None:
            if required:
                raise MissingInertial(f"link {name!r} has no <inertial> block")
            return SpatialInertia.zero()
        return inertia

    base = roots[0]
    kept_names = [base]
    kept_inertia = [inertia_of(base, required=False)]
    joints: list[Joint] = []
    acc = SpatialTransform.identity()  # kept link frame -> current (possibly collapsed) frame
    current = base
    tail_name = base

    while children[current]:
        el = children[current][0]
        jname = el.get("name")
        kind_raw = el.get("type")
        child = el.find("child").get("link")
        origin = _origin(el.find("origin"), f"joint {jname!r}")
        if kind_raw == "fixed":
            acc = compose(acc, origin)
            R, p = acc.pose()
            body = shift_inertia(rotate_inertia(inertia_of(child, required=False), R), p)
            kept_inertia[-1] = compose_inertia(kept_inertia[-1], body)
            current = tail_name = child
            continue
        if kind_raw in ("revolute", "continuous"):
            kind = JointKind.REVOLUTE
        elif kind_raw == "prismatic":
            kind = JointKind.PRISMATIC
        else:
            raise MalformedXml(f"joint {jname!r}: unsupported type {kind_raw!r}")
        axis_el = el.find("axis")
        axis = _floats(axis_el.get("xyz") if axis_el is not None else "1 0 0", 3, f"joint {jname!r} axis")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise NonUnitAxis(f"joint {jname!r}: |axis| = {np.linalg.norm(axis):.12g}")
        limit = el.find("limit")
        if limit is None and kind_raw != "continuous":
            raise InvalidLimit(f"joint {jname!r}: missing <limit>")
        if limit is None:
            limit = ET.Element("limit")
        what = f"joint {jname!r} limit"
        effort = _attr_float(limit, "effort", math.nan, what)
        velocity = _attr_float(limit, "velocity", math.nan, what)
        if kind_raw == "continuous":
            lo, hi = -math.inf, math.inf
        else:
            lo = _attr_float(limit, "lower", 0.0, what)
            hi = _attr_float(limit, "upper", 0.0, what)
        if not effort > 0:
            raise InvalidLimit(f"joint {jname!r}: effort limit {limit.get('effort')!r} must be > 0")
        if not velocity > 0:
            raise InvalidLimit(f"joint {jname!r}: velocity limit {limit.get('velocity')!r} must be > 0")
        if not lo < hi:
            raise InvalidLimit(f"joint {jname!r}: position limits [{lo}, {hi}] are empty")
        joints.append(Joint(jname, kind, axis, compose(acc, origin), (lo, hi), velocity, effort))
        kept_names.append(child)
        kept_inertia.append(inertia_of(child, required=True))
        acc = SpatialTransform.identity()
        current = tail_name = child

    links = tuple(Link(n, i) for n, i in zip(kept_names, kept_inertia))
    return RobotModel(links, tuple(joints), ee_offset=acc, name=root.get("name", "robot"), ee_name=tail_name)


def load_urdf(path) -> RobotModel:
    return parse_urdf(Path(path).read_text(encoding="utf-8"))


def _fmt(values: Sequence[float]) -> str:
    return " ".join(repr(float(v)) for v in values)


def to_urdf(model: RobotModel) -> str:
    """Serialize to the URDF subset accepted by :func:`parse_urdf`.

    Only serial models without interior fixed joints round-trip exactly;
    interior fixed joints are written as-is and collapse on re-parse.
    """
    root = ET.Element("robot", name=model.name)
    for link in model.links:
        el = ET.SubElement(root, "link", name=link.name)
        i = link.inertia
        inertial = ET.SubElement(el, "inertial")
        ET.SubElement(inertial, "origin", xyz=_fmt(i.com), rpy="0.0 0.0 0.0")
        ET.SubElement(inertial, "mass", value=repr(float(i.mass)))
        I = i.inertia_about_com
        ET.SubElement(
            inertial,
            "inertia",
            ixx=repr(float(I[0, 0])),
            ixy=repr(float(I[0, 1])),
            ixz=repr(float(I[0, 2])),
            iyy=repr(float(I[1, 1])),
            iyz=repr(float(I[1, 2])),
            izz=repr(float(I[2, 2])),
        )

    def add_origin(parent_el, x: SpatialTransform):
        R, p = x.pose()
        ET.SubElement(parent_el, "origin", xyz=_fmt(p), rpy=_fmt(matrix_rpy(R)))

    for k, j in enumerate(model.joints):
        el = ET.SubElement(root, "joint", name=j.name, type=j.kind.value)
        ET.SubElement(el, "parent", link=model.links[k].name)
        ET.SubElement(el, "child", link=model.links[k + 1].name)
        add_origin(el, j.origin)
        if j.actuated:
            ET.SubElement(el, "axis", xyz=_fmt(j.axis))
            ET.SubElement(
                el,
                "limit",
                lower=repr(float(j.position_limits[0])),
                upper=repr(float(j.position_limits[1])),
                velocity=repr(float(j.velocity_limit)),
                effort=repr(float(j.effort_limit)),
            )
    R, p = model.ee_offset.pose()
    if not (np.array_equal(R, np.eye(3)) and not np.any(p)):
        ee_name = model.ee_name
        if ee_name in {l.name for l in model.links}:
            ee_name = f"{ee_name}_ee"
        ET.SubElement(root, "link", name=ee_name)
        el = ET.SubElement(root, "joint", name=f"{ee_name}_joint", type="fixed")
        ET.SubElement(el, "parent", link=model.terminal.name)
        ET.SubElement(el, "child", link=ee_name)
        add_origin(el, model.ee_offset)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"
