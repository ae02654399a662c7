"""Part hierarchy and forward kinematics for revolute and prismatic joints.

Joint descriptors live in the canonical (rest) frame of the object. A child's
pose is its parent link's pose composed with the joint motion::

    revolute:   parent ∘ T(q) ∘ R(u, state) ∘ T(-q) ∘ rest
    prismatic:  parent ∘ T(u * state) ∘ rest

Revolute states are degrees, prismatic states meters. Every child hangs off
part 0 unless its joint names another parent, which is how serial chains are
expressed; either way each child is composed pairwise from its own parent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateAxisError, InvalidComparisonError, InvalidTreeError, JointLimitError
from .geometry import PoseSE3, axis_angle

UNIT_TOL = 1e-9
DEGENERATE_TOL = 1e-9


def _unit(v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise InvalidTreeError(f"{what} must be a unit 3-vector, got {v.tolist()}")
    return v


@dataclass(frozen=True, eq=False)
class JointRecord:
    joint_type: str
    axis: np.ndarray
    child: int
    limits: tuple
    pivot: np.ndarray | None = None
    parent: int = 0

    def __post_init__(self):
        if self.joint_type not in ("revolute", "prismatic"):
            raise InvalidTreeError(f"unknown joint type {self.joint_type!r}")
        object.__setattr__(self, "axis", _unit(self.axis, "joint axis"))
        lo, hi = (float(x) for x in self.limits)
        if not lo <= hi:
            raise InvalidTreeError(f"joint limits [{lo}, {hi}] are reversed")
        if self.joint_type == "revolute":
            if self.pivot is None:
                raise InvalidTreeError("revolute joints need a pivot point")
            if lo < 0.0 or hi >= 360.0:
                raise InvalidTreeError("revolute limits must lie within [0, 360)")
            object.__setattr__(self, "pivot", np.asarray(self.pivot, dtype=float).reshape(3))
        else:
            object.__setattr__(self, "pivot", None)
        object.__setattr__(self, "limits", (lo, hi))

    @classmethod
    def revolute(cls, axis, pivot, child, limits=(0.0, 359.0), parent=0):
        a = np.asarray(axis, dtype=float)
        return cls("revolute", a / np.linalg.norm(a), child, limits, pivot, parent)

    @classmethod
    def prismatic(cls, axis, child, limits=(0.0, 0.5), parent=0):
        a = np.asarray(axis, dtype=float)
        return cls("prismatic", a / np.linalg.norm(a), child, limits, None, parent)

    def motion(self, state: float) -> PoseSE3:
        """Relative transform of the child at joint ``state``."""
        if self.joint_type == "revolute":
            R = axis_angle(self.axis, state)
            return PoseSE3(R, self.pivot - R @ self.pivot)
        return PoseSE3(np.eye(3), self.axis * state)

    def in_frame(self, pose: PoseSE3) -> "JointRecord":
        """This joint with descriptors expressed through ``pose`` (e.g. camera frame)."""
        pivot = None if self.pivot is None else pose.apply(self.pivot)
        return JointRecord(self.joint_type, pose.rotation @ self.axis, self.child, self.limits, pivot, self.parent)

    def to_dict(self) -> dict:
        d = {"type": self.joint_type, "u": self.axis.tolist(), "limits": list(self.limits), "child": self.child}
        if self.pivot is not None:
            d["q"] = self.pivot.tolist()
        if self.parent != 0:
            d["parent"] = self.parent
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "JointRecord":
        return cls(d["type"], d["u"], int(d["child"]), tuple(d["limits"]), d.get("q"), int(d.get("parent", 0)))


@dataclass(frozen=True, eq=False)
class PartTree:
    """One root part (index ``parent``) and one joint per child part."""

    joints: tuple
    parent: int = 0
    rest_poses: tuple | None = None
    _order: tuple = field(init=False, repr=False)

    def __post_init__(self):
        joints = tuple(self.joints)
        object.__setattr__(self, "joints", joints)
        n = len(joints) + 1
        if self.parent != 0:
            raise InvalidTreeError("the root part must have index 0")
        children = [j.child for j in joints]
        if sorted(children) != list(range(1, n)):
            raise InvalidTreeError(f"children must be exactly parts 1..{n - 1}, got {children}")
        for j in joints:
            if not 0 <= j.parent < n or j.parent == j.child:
                raise InvalidTreeError(f"joint of part {j.child} has invalid parent {j.parent}")
        # topological order from the root; parts unreachable from it sit on a cycle
        order, placed = [], {0}
        pending = list(joints)
        while pending:
            ready = [j for j in pending if j.parent in placed]
            if not ready:
                raise InvalidTreeError("joint graph contains a cycle")
            for j in ready:
                order.append(j)
                placed.add(j.child)
                pending.remove(j)
        object.__setattr__(self, "_order", tuple(order))
        if self.rest_poses is None:
            object.__setattr__(self, "rest_poses", tuple(PoseSE3.identity() for _ in range(n)))
        elif len(self.rest_poses) != n:
            raise InvalidTreeError("need one rest pose per part")

    @property
    def part_count(self) -> int:
        return len(self.joints) + 1

    @property
    def is_chain(self) -> bool:
        return any(j.parent != 0 for j in self.joints)

    @property
    def joint_types(self) -> tuple:
        return tuple(j.joint_type for j in self.joints)

    def to_dict(self) -> dict:
        return {"parent": self.parent, "joints": [j.to_dict() for j in self.joints]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "PartTree":
        return cls(tuple(JointRecord.from_dict(j) for j in d["joints"]), int(d.get("parent", 0)))

    @classmethod
    def from_json(cls, text: str) -> "PartTree":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ArticulatedPose:
    """Per-part poses, parent first, indexed by part id."""

    poses: tuple

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if not all(isinstance(p, PoseSE3) for p in self.poses):
            raise TypeError("ArticulatedPose holds PoseSE3 entries")

    def __len__(self):
        return len(self.poses)

    def __getitem__(self, i) -> PoseSE3:
        return self.poses[i]

    def __iter__(self):
        return iter(self.poses)


@dataclass(frozen=True)
class JointFrame:
    alignment: np.ndarray
    motion: np.ndarray


def orthogonalize(a, b_raw) -> np.ndarray:
    """Unit vector along ``b_raw`` with its component along unit ``a`` removed."""
    a = np.asarray(a, dtype=float)
    b_raw = np.asarray(b_raw, dtype=float)
    residual = b_raw - np.dot(a, b_raw) * a
    norm = np.linalg.norm(residual)
    if np.linalg.norm(b_raw) <= DEGENERATE_TOL or norm <= DEGENERATE_TOL:
        raise DegenerateAxisError("motion axis is parallel to the joint axis")
    b = residual / norm
    # one more projection pass pushes |a.b| to rounding level
    b = b - np.dot(a, b) * a
    return b / np.linalg.norm(b)


def joint_frame(u, b_raw) -> JointFrame:
    a = np.asarray(u, dtype=float)
    a = a / np.linalg.norm(a)
    return JointFrame(a, orthogonalize(a, b_raw))


def check_limits(joint: JointRecord, state: float) -> None:
    lo, hi = joint.limits
    if not lo <= state <= hi:
        raise JointLimitError(f"state {state} outside limits [{lo}, {hi}] for part {joint.child}")


def child_pose_fk(parent: PoseSE3, joint: JointRecord, state: float, rest: PoseSE3 | None = None) -> PoseSE3:
    check_limits(joint, state)
    pose = parent @ joint.motion(state)
    return pose if rest is None else pose @ rest


def recover_articulated_pose(parent_estimate: PoseSE3, tree: PartTree, joint_states: Sequence[float]) -> ArticulatedPose:
    """Compose every child from the parent estimate; ``joint_states`` follow ``tree.joints``."""
    if len(joint_states) != len(tree.joints):
        raise InvalidTreeError(f"expected {len(tree.joints)} joint states, got {len(joint_states)}")
    state_of = {j.child: float(s) for j, s in zip(tree.joints, joint_states)}
    # a link's frame before its own rest offset, used by its children
    frames = {0: parent_estimate}
    poses = [None] * tree.part_count
    poses[0] = parent_estimate @ tree.rest_poses[0]
    for j in tree._order:
        frames[j.child] = child_pose_fk(frames[j.parent], j, state_of[j.child])
        poses[j.child] = frames[j.child] @ tree.rest_poses[j.child]
    return ArticulatedPose(poses)


def link_frames(articulated: ArticulatedPose, tree: PartTree) -> list:
    """Per-part frame that joint descriptors of its children are expressed through."""
    return [p @ r.inverse() for p, r in zip(articulated.poses, tree.rest_poses)]


def axis_metrics(pred: JointRecord, gt: JointRecord):
    """``(angle_error_deg, distance_error_m)``; distance is ``None`` for prismatic joints."""
    if pred.joint_type != gt.joint_type:
        raise InvalidComparisonError(f"cannot compare {pred.joint_type} with {gt.joint_type}")
    cos = min(abs(float(np.dot(pred.axis, gt.axis))), 1.0)
    cross = np.cross(pred.axis, gt.axis)
    # atan2 keeps precision for nearly parallel axes
    angle = float(np.degrees(np.arctan2(np.linalg.norm(cross), cos)))
    if gt.joint_type == "prismatic":
        return angle, None
    d = gt.pivot - pred.pivot
    n = np.linalg.norm(cross)
    if n < 1e-12:
        dist = np.linalg.norm(np.cross(d, pred.axis))
    else:
        dist = abs(np.dot(d, cross)) / n
    return angle, float(dist)
