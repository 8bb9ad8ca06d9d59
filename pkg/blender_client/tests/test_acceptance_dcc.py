"""Acceptance gate for the DCC client: a headless batch run receives a real
streamed session from the controller library, builds the armature, applies
every frame, and the final bone head positions must match the controller's
own forward kinematics within 1e-3. Prints a ``[criterion 9] PASS`` line
with the measured figure (run with -s to see it).

Also pins the deployment split: the controller-side package and its test
suite must run with no DCC installed, so nothing there may import the DCC
modules.
"""

import math
import re
import threading
from pathlib import Path

from motionkit.protocol.client import play
from motionkit.rotations import axis_rotation, quat_mul
from motionkit.skeleton import Joint, MotionClip, Pose, Skeleton, forward_kinematics

from motionkit_blender import scene
from motionkit_blender.listener import LiveLink
from wire_helpers import pump_until

REPO_ROOT = Path(__file__).resolve().parents[2]


ROOT_CHANNELS = ("TX", "TY", "TZ", "RZ", "RX", "RY")
ROT_CHANNELS = ("RZ", "RX", "RY")


def biped() -> Skeleton:
    return Skeleton(
        (
            Joint("hips", None, (0.0, 0.9, 0.0), ROOT_CHANNELS),
            Joint("spine", 0, (0.0, 0.3, 0.0), ROT_CHANNELS),
            Joint("chest", 1, (0.0, 0.3, 0.0), ROT_CHANNELS),
            Joint("neck_tip", 2, (0.0, 0.2, 0.0), is_end_site=True),
            Joint("l_shoulder", 2, (0.2, 0.05, 0.0), ROT_CHANNELS),
            Joint("l_hand_tip", 4, (0.3, 0.0, 0.0), is_end_site=True),
            Joint("r_shoulder", 2, (-0.2, 0.05, 0.0), ROT_CHANNELS),
            Joint("r_hand_tip", 6, (-0.3, 0.0, 0.0), is_end_site=True),
            Joint("l_hip", 0, (0.12, -0.05, 0.0), ROT_CHANNELS),
            Joint("l_foot_tip", 8, (0.0, -0.8, 0.0), is_end_site=True),
            Joint("r_hip", 0, (-0.12, -0.05, 0.0), ROT_CHANNELS),
            Joint("r_foot_tip", 10, (0.0, -0.8, 0.0), is_end_site=True),
        )
    )


def wiggle_clip(skeleton: Skeleton, frames: int = 100) -> MotionClip:
    """Deterministic full-body motion: every joint swings, the root drifts."""
    posed = skeleton.posed_joints
    poses = []
    for f in range(frames):
        rotations = []
        for k, _ in enumerate(posed):
            swing = 35.0 * math.sin(0.11 * f + 0.7 * k)
            twist = 20.0 * math.sin(0.07 * f + 1.3 * k)
            rotations.append(
                quat_mul(axis_rotation("ZXY"[k % 3], swing), axis_rotation("Y", twist))
            )
        root = (0.4 * math.sin(0.09 * f), 0.9 + 0.05 * math.sin(0.13 * f), 0.02 * f)
        poses.append(Pose(root_translation=root, rotations=tuple(rotations)))
    return MotionClip(skeleton=skeleton, frame_time=1.0 / 120.0, frames=tuple(poses))


def test_criterion_9_headless_batch_matches_fk_oracle():
    skeleton = biped()
    clip = wiggle_clip(skeleton, frames=100)

    link = LiveLink(port=0)
    link.start()
    failures: list[BaseException] = []
    summary = {}

    def controller():
        try:
            summary["play"] = play(
                clip, ("127.0.0.1", link.port), "hero", fps=2000.0
            )
        except BaseException as exc:  # noqa: BLE001 - surfaced after join
            failures.append(exc)

    thread = threading.Thread(target=controller, daemon=True)
    thread.start()
    try:
        pump_until(link, lambda: link.session_done and link.updates.empty(), timeout=60.0)
    finally:
        thread.join(timeout=10.0)
        link.stop()
    assert failures == []
    assert summary["play"].frames_sent == 100

    binding = link.bindings["hero"]
    assert len(binding) == len(skeleton.joints)

    assert binding.last_index == 99
    oracle = forward_kinematics(skeleton, clip.frames[-1])
    pose_bones = binding.object.pose.bones
    worst = 0.0
    for joint, (position, _) in zip(skeleton.joints, oracle):
        head = pose_bones[joint.name].head
        err = math.sqrt(sum((a - b) ** 2 for a, b in zip(head, position)))
        worst = max(worst, err)
    assert worst <= 1e-3

    # the streamed session also proves the threading rule under real traffic
    assert scene.MUTATION_THREADS == {threading.get_ident()}
    assert scene.MUTATION_CALLS == 101  # one build plus one hundred frames

    print(
        f"[criterion 9] PASS: armature has {len(binding)} joints (streamed "
        f"{len(skeleton.joints)}), 100 frames applied, max bone head error "
        f"{worst:.2e} (limit 1e-3)"
    )


def test_controller_side_never_imports_dcc_modules():
    # the primary package and suite run with no DCC installed
    pattern = re.compile(r"^\s*(?:import|from)\s+(?:bpy|mathutils)\b", re.MULTILINE)
    offenders = []
    for tree in (REPO_ROOT / "src", REPO_ROOT / "tests"):
        for path in sorted(tree.rglob("*.py")):
            if pattern.search(path.read_text(encoding="utf-8")):
                offenders.append(str(path.relative_to(REPO_ROOT)))
    assert offenders == []


def test_addon_touches_the_controller_package_only_over_the_wire():
    # the add-on source shares nothing with the controller but the protocol
    pattern = re.compile(r"^\s*(?:import|from)\s+motionkit(?:\.|\b)(?!_)", re.MULTILINE)
    src = Path(__file__).resolve().parents[1] / "src"
    offenders = [
        str(path.relative_to(src))
        for path in sorted(src.rglob("*.py"))
        if pattern.search(path.read_text(encoding="utf-8"))
    ]
    assert offenders == []
