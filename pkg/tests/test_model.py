import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from payloadcheck import fixtures
from payloadcheck.errors import (
    BranchingChain,
    InvalidLimit,
    MalformedPayload,
    MalformedXml,
    MissingInertial,
    ModelError,
    NonUnitAxis,
)
from payloadcheck.model import (
    JointKind,
    PayloadSpec,
    RobotModel,
    attach_payload,
    load_payload_json,
    parse_urdf,
    to_urdf,
    validate_model,
)
from payloadcheck.spatial import SpatialInertia, compose_inertia

ONE_JOINT = """
<robot name="one">
  <link name="base"/>
  <link name="arm">
    <inertial>
      <origin xyz="1 0 0" rpy="0 0 0"/>
      <mass value="1.0"/>
      <inertia ixx="0" ixy="0" ixz="0" iyy="0" iyz="0" izz="0"/>
    </inertial>
  </link>
  <joint name="j" type="revolute">
    <parent link="base"/><child link="arm"/>
    <axis xyz="0 -1 0"/>
    <limit lower="-3" upper="3" effort="10" velocity="2"/>
  </joint>
</robot>
"""


def test_minimal_document():
    m = parse_urdf(ONE_JOINT)
    assert m.dof == 1
    assert m.effort_limits.tolist() == [10.0]
    assert m.velocity_limits.tolist() == [2.0]
    assert m.joints[0].kind is JointKind.REVOLUTE
    assert m.terminal.inertia.mass == 1.0
    assert validate_model(m) == []


def test_branching_chain():
    text = ONE_JOINT.replace(
        "</robot>",
        """<link name="other"><inertial><mass value="1"/></inertial></link>
        <joint name="k" type="revolute"><parent link="base"/><child link="other"/>
        <axis xyz="0 0 1"/><limit lower="-1" upper="1" effort="1" velocity="1"/></joint></robot>""",
    )
    with pytest.raises(BranchingChain):
        parse_urdf(text)


@pytest.mark.parametrize(
    "old,new,err",
    [
        ('effort="10"', 'effort="0"', InvalidLimit),
        ('velocity="2"', 'velocity="-1"', InvalidLimit),
        ('lower="-3"', 'lower="4"', InvalidLimit),
        ('xyz="0 -1 0"', 'xyz="0 -2 0"', NonUnitAxis),
        ("</robot>", "</robt>", MalformedXml),
        ('type="revolute"', 'type="planar"', MalformedXml),
    ],
)
def test_parse_errors(old, new, err):
    with pytest.raises(err):
        parse_urdf(ONE_JOINT.replace(old, new, 1))


def test_missing_inertial_on_moving_link():
    start = ONE_JOINT.index('<link name="arm">')
    end = ONE_JOINT.index("</link>", start) + len("</link>")
    text = ONE_JOINT[:start] + '<link name="arm"/>' + ONE_JOINT[end:]
    with pytest.raises(MissingInertial):
        parse_urdf(text)


def test_panda_fixture_matches_file(panda):
    assert panda.dof == 7
    assert [j.name for j in panda.actuated_joints] == [f"panda_joint{i}" for i in range(1, 8)]
    # independent scan of the XML for link masses
    root = ET.fromstring(fixtures.panda_urdf_text())
    masses = [float(m.get("value")) for m in root.iter("mass")]
    assert abs(panda.total_mass - math.fsum(masses)) <= 1e-12
    limits = {}
    for j in root.iter("joint"):
        lim = j.find("limit")
        if lim is not None:
            limits[j.get("name")] = float(lim.get("effort"))
    assert panda.effort_limits.tolist() == [limits[j.name] for j in panda.actuated_joints]
    assert validate_model(panda) == []


def test_fixed_joints_collapse_into_parent(panda):
    # the hand and flange links hang off fixed joints behind joint 7
    assert panda.terminal.name == "panda_link7"
    assert panda.ee_name == "panda_hand_tcp"
    R, p = panda.ee_offset.pose()
    np.testing.assert_allclose(p, [0, 0, 0.107 + 0.1034], atol=1e-12)
    np.testing.assert_allclose(R @ [1, 0, 0], [math.cos(-math.pi / 4), math.sin(-math.pi / 4), 0], atol=1e-12)


def test_attach_zero_payload_is_identity(panda):
    assert attach_payload(panda, PayloadSpec(0.0)) is panda


def test_attach_nominal_payload_adds_mass(panda):
    loaded = attach_payload(panda, PayloadSpec(3.0))
    assert loaded.terminal.inertia.mass == panda.terminal.inertia.mass + 3.0
    assert loaded.total_mass == pytest.approx(panda.total_mass + 3.0, abs=1e-12)
    assert loaded.dof == panda.dof
    # original untouched
    assert panda.terminal.inertia.mass == fixtures.panda().terminal.inertia.mass


def test_attach_offset_payload_hand_composition():
    # 2R chain: ee frame at the tip of link 2, aligned with the link frame
    m = fixtures.planar_2r()
    loaded = attach_payload(m, PayloadSpec(2.0, [0.1, 0.0, 0.0]))
    # two point-free bodies: link (1 kg rod, com 0.5) and payload (2 kg at 1.0 + 0.1)
    m1, c1 = 1.0, 0.5
    m2, c2 = 2.0, 1.1
    mass = m1 + m2
    com = (m1 * c1 + m2 * c2) / mass
    rod = 1.0 / 12.0
    Iyy = rod + m1 * (c1 - com) ** 2 + m2 * (c2 - com) ** 2
    t = loaded.terminal.inertia
    assert t.mass == mass
    np.testing.assert_allclose(t.com, [com, 0, 0], atol=1e-15)
    np.testing.assert_allclose(np.diag(t.inertia_about_com), [0.0, Iyy, Iyy], atol=1e-14)
    # inertia growth about the link origin is exactly m d^2 of the payload
    growth = t.inertia_about_origin() - m.terminal.inertia.inertia_about_origin()
    np.testing.assert_allclose(np.diag(growth), [0.0, m2 * c2**2, m2 * c2**2], atol=1e-14)


def test_attach_rotated_ee_frame(panda):
    # ee frame is yawed -45 deg: an offset along ee x lands along the rotated axis
    loaded = attach_payload(panda, PayloadSpec(1.0, [0.1, 0.0, 0.0]))
    base = panda.terminal.inertia
    t = loaded.terminal.inertia
    payload_com = (t.com * t.mass - base.com * base.mass) / 1.0
    c = math.cos(-math.pi / 4)
    np.testing.assert_allclose(payload_com, [0.1 * c, -0.1 * c, 0.2104], atol=1e-12)


def test_double_attachment_equals_combined(panda):
    p1 = PayloadSpec(1.5, [0.02, 0.0, 0.05], np.diag([0.01, 0.02, 0.03]))
    p2 = PayloadSpec(0.7, [-0.03, 0.04, 0.1])
    twice = attach_payload(attach_payload(panda, p1), p2)
    both = compose_inertia(p1.as_inertia(), p2.as_inertia())
    once = attach_payload(panda, PayloadSpec(both.mass, both.com, both.inertia_about_com))
    a, b = twice.terminal.inertia, once.terminal.inertia
    assert a.mass == pytest.approx(b.mass, abs=1e-12)
    np.testing.assert_allclose(a.com, b.com, atol=1e-12)
    np.testing.assert_allclose(a.inertia_about_com, b.inertia_about_com, atol=1e-12)


def test_payload_spec_json(tmp_path):
    p = PayloadSpec(2.0, [0, 0, 0.05], np.diag([0.1, 0.1, 0.1]))
    assert PayloadSpec.from_dict(p.to_dict()).to_dict() == p.to_dict()
    f = tmp_path / "p.json"
    f.write_text('{"mass_kg": 1.5, "com_offset_m": [0, 0, 0.1]}')
    q = load_payload_json(f)
    assert q.mass == 1.5 and q.inertia_about_com.tolist() == np.zeros((3, 3)).tolist()
    f.write_text("{bad")
    with pytest.raises(MalformedPayload):
        load_payload_json(f)
    with pytest.raises(MalformedPayload):
        PayloadSpec(-1.0)
    with pytest.raises(MalformedPayload):
        PayloadSpec(1.0, inertia_about_com=np.diag([1.0, -1.0, 1.0]))


def test_scaled_payload_scales_inertia():
    p = PayloadSpec(2.0, [0, 0, 0.05], np.diag([0.1, 0.2, 0.3]))
    s = p.scaled_to(5.0)
    np.testing.assert_allclose(s.inertia_about_com, np.diag([0.25, 0.5, 0.75]))
    np.testing.assert_array_equal(s.com_offset, p.com_offset)


def test_urdf_round_trip(panda):
    again = parse_urdf(to_urdf(panda))
    assert again.dof == panda.dof and again.name == panda.name
    for a, b in zip(panda.links, again.links):
        assert a.name == b.name
        assert abs(a.inertia.mass - b.inertia.mass) <= 1e-12
        np.testing.assert_allclose(a.inertia.com, b.inertia.com, atol=1e-12)
        np.testing.assert_allclose(a.inertia.inertia_about_com, b.inertia.inertia_about_com, atol=1e-12)
    for a, b in zip(panda.joints, again.joints):
        np.testing.assert_allclose(a.origin.rotation, b.origin.rotation, atol=1e-12)
        np.testing.assert_allclose(a.origin.translation, b.origin.translation, atol=1e-12)
        np.testing.assert_allclose(a.axis, b.axis, atol=1e-12)
        assert a.position_limits == b.position_limits
        assert (a.effort_limit, a.velocity_limit) == (b.effort_limit, b.velocity_limit)
    np.testing.assert_allclose(again.ee_offset.rotation, panda.ee_offset.rotation, atol=1e-12)
    np.testing.assert_allclose(again.ee_offset.translation, panda.ee_offset.translation, atol=1e-12)


def test_validate_effort_zero(panda):
    bad = panda.with_effort_limits([87, 87, 0, 87, 12, 12, 12])
    diags = validate_model(bad)
    assert len(diags) == 1 and diags[0].kind == "InvalidLimit" and diags[0].subject == "panda_joint3"


def test_validate_non_psd_inertia(panda):
    bad = panda.with_terminal_inertia(SpatialInertia(1.0, np.zeros(3), np.diag([1.0, 1.0, -0.5])))
    diags = validate_model(bad)
    assert len(diags) == 1 and diags[0].kind == "InvalidInertia" and diags[0].subject == panda.terminal.name


def test_model_invariants(panda):
    with pytest.raises(ModelError):
        RobotModel(panda.links, panda.joints[:-1])
    assert panda.dof_index == {f"panda_joint{i}": i - 1 for i in range(1, 8)}
    assert panda.with_effort_limits(math.inf).effort_limits.tolist() == [math.inf] * 7
    g = panda.with_gravity([0, 0, -1.62])
    assert g.gravity.tolist() == [0, 0, -1.62] and panda.gravity[2] == -9.81
