"""Synthetic articulated objects and partial point-cloud observations.

Parts are boxes in the object's canonical frame. Occlusion is approximated by
culling every point on one side of a random plane through the object; the
plane offset is chosen so the surviving fraction lands in a target interval.
Intervals are half-open ``(low, high]``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import GenerationFailedError, InvalidDatasetError, InvalidParameterError
from .geometry import PoseSE3
from .codec import euler_to_rotation
from .kinematics import ArticulatedPose, JointRecord, PartTree, recover_articulated_pose

N_POINTS = 1024
N_SURFACE = 2048
NO_CULL_LOW = 0.99
MAX_RETRIES = 50
POINT_DECIMALS = 6
DEFAULT_BUCKETS = ((0.0, 0.4), (0.4, 0.8), (0.8, 1.0))


@dataclass(frozen=True, eq=False)
class ObjectTemplate:
    """A category: part tree plus one ``(center, size)`` box per part, in meters."""

    name: str
    tree: PartTree
    boxes: tuple

    def __post_init__(self):
        boxes = tuple((np.asarray(c, dtype=float), np.asarray(s, dtype=float)) for c, s in self.boxes)
        if len(boxes) != self.tree.part_count:
            raise InvalidParameterError(f"{self.name}: need {self.tree.part_count} boxes, got {len(boxes)}")
        for _, size in boxes:
            if size.shape != (3,) or np.any(size <= 0):
                raise InvalidParameterError(f"{self.name}: degenerate part box {size.tolist()}")
        object.__setattr__(self, "boxes", boxes)


def _templates() -> dict:
    rev, pri = JointRecord.revolute, JointRecord.prismatic
    laptop = ObjectTemplate(
        "laptop",
        PartTree((rev((1, 0, 0), (0, 0.11, 0.02), 1, (0.0, 150.0)),)),
        (((0, 0, 0.01), (0.32, 0.22, 0.02)), ((0, 0, 0.025), (0.32, 0.22, 0.01))),
    )
    eyeglasses = ObjectTemplate(
        "eyeglasses",
        PartTree(
            (
                rev((0, 0, -1), (-0.068, 0, 0), 1, (0.0, 90.0)),
                rev((0, 0, 1), (0.068, 0, 0), 2, (0.0, 90.0)),
            )
        ),
        (
            ((0, 0, 0), (0.14, 0.006, 0.045)),
            ((-0.068, 0.07, 0), (0.004, 0.14, 0.01)),
            ((0.068, 0.07, 0), (0.004, 0.14, 0.01)),
        ),
    )
    dishwasher = ObjectTemplate(
        "dishwasher",
        PartTree((rev((1, 0, 0), (0, -0.3, 0.0), 1, (0.0, 90.0)),)),
        (((0, 0, 0.42), (0.6, 0.6, 0.84)), ((0, -0.31, 0.42), (0.6, 0.02, 0.84))),
    )
    scissors = ObjectTemplate(
        "scissors",
        PartTree((rev((0, 0, 1), (0, 0, 0), 1, (0.0, 60.0)),)),
        (((0.06, 0, 0), (0.16, 0.02, 0.004)), ((0.06, 0, 0.004), (0.16, 0.02, 0.004))),
    )
    drawer = ObjectTemplate(
        "drawer",
        PartTree(tuple(pri((0, -1, 0), i, (0.0, 0.3)) for i in (1, 2, 3))),
        (((0, 0, 0.3), (0.4, 0.4, 0.6)),)
        + tuple(((0, -0.19, 0.1 + 0.2 * i), (0.36, 0.36, 0.16)) for i in range(3)),
    )
    arm_axes = ((0, 0, 1), (0, 1, 0), (0, 1, 0), (0, 0, 1), (0, 1, 0), (0, 0, 1))
    robot_arm = ObjectTemplate(
        "robot_arm",
        PartTree(tuple(rev(arm_axes[i - 1], (0, 0, 0.1 * i), i, (0.0, 180.0), parent=i - 1) for i in range(1, 7))),
        tuple(((0, 0, 0.05 + 0.1 * i), (0.05, 0.05, 0.1)) for i in range(7)),
    )
    return {t.name: t for t in (laptop, eyeglasses, dishwasher, scissors, drawer, robot_arm)}


TEMPLATES = _templates()
CATEGORIES = ("laptop", "eyeglasses", "dishwasher", "scissors", "drawer")


def get_template(name: str) -> ObjectTemplate:
    try:
        return TEMPLATES[name]
    except KeyError:
        raise InvalidParameterError(f"unknown template {name!r}; choose from {sorted(TEMPLATES)}") from None


@dataclass(frozen=True, eq=False)
class ObservationInstance:
    points: np.ndarray
    labels: np.ndarray
    visibility: float
    gt_pose: ArticulatedPose
    gt_joint_states: tuple
    gt_tree: PartTree
    template_id: str
    seed: int
    camera_pose: PoseSE3 = field(default_factory=PoseSE3.identity)
    bucket: int | None = None

    def to_dict(self) -> dict:
        joints = []
        for j, s in zip(self.gt_tree.joints, self.gt_joint_states):
            d = j.to_dict()
            d["state"] = float(s)
            joints.append(d)
        return {
            "template_id": self.template_id,
            "seed": self.seed,
            "bucket": self.bucket,
            "visibility": self.visibility,
            "parent_pose": self.gt_pose[0].to_dict(),
            "camera_pose": self.camera_pose.to_dict(),
            "joints": joints,
            "labels": self.labels.tolist(),
            "points": self.points.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObservationInstance":
        tree = PartTree(tuple(JointRecord.from_dict(j) for j in d["joints"]))
        states = tuple(float(j["state"]) for j in d["joints"])
        parent = PoseSE3.from_dict(d["parent_pose"])
        camera = PoseSE3.from_dict(d["camera_pose"]) if "camera_pose" in d else PoseSE3.identity()
        return cls(
            points=np.asarray(d["points"], dtype=float).reshape(-1, 3),
            labels=np.asarray(d["labels"], dtype=np.int64),
            visibility=float(d["visibility"]),
            gt_pose=recover_articulated_pose(parent, tree, states),
            gt_joint_states=states,
            gt_tree=tree,
            template_id=d["template_id"],
            seed=int(d["seed"]),
            camera_pose=camera,
            bucket=d.get("bucket"),
        )


def sample_parent_pose(rng: np.random.Generator, max_tilt: float = 20.0) -> PoseSE3:
    """Upright-ish placement: any yaw, pitch and roll within ``max_tilt`` degrees."""
    yaw = rng.uniform(0.0, 360.0)
    pitch, roll = rng.uniform(-max_tilt, max_tilt, size=2)
    t = np.array([rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.4, 0.8)])
    return PoseSE3(euler_to_rotation((yaw, pitch, roll)), t)


def sample_joint_states(tree: PartTree, rng: np.random.Generator) -> tuple:
    return tuple(float(rng.uniform(*j.limits)) for j in tree.joints)


def sample_box_surface(center, size, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform over the surface of an axis-aligned box."""
    sx, sy, sz = size
    areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    pts = rng.uniform(-0.5, 0.5, size=(n, 3)) * size
    axis = face // 2
    sign = np.where(face % 2 == 0, 0.5, -0.5)
    pts[np.arange(n), axis] = sign * np.asarray(size)[axis]
    return pts + center


def surface_points(template: ObjectTemplate, pose: ArticulatedPose, rng: np.random.Generator, n: int = N_SURFACE):
    """Area-weighted surface samples of all parts, posed; returns ``(points, labels)``."""
    areas = np.array([2 * (s[0] * s[1] + s[1] * s[2] + s[0] * s[2]) for _, s in template.boxes])
    labels = np.sort(rng.choice(len(areas), size=n, p=areas / areas.sum()))
    points = np.empty((n, 3))
    for part, (center, size) in enumerate(template.boxes):
        sel = labels == part
        local = sample_box_surface(center, size, int(sel.sum()), rng)
        points[sel] = pose[part].apply(local)
    return points, labels


def cull_half_space(points, target, rng: np.random.Generator, max_retries: int = MAX_RETRIES):
    """Indices of points kept by a random half-space, and the kept fraction.

    Targets with ``low >= 0.99`` skip culling entirely.
    """
    low, high = target
    if not 0.0 <= low < high <= 1.0:
        raise InvalidParameterError(f"occlusion target must satisfy 0 <= low < high <= 1, got {target}")
    n = points.shape[0]
    if low >= NO_CULL_LOW:
        return np.arange(n), 1.0
    draws = []
    for _ in range(max_retries):
        r = rng.uniform(low, high)
        k = math.ceil(r * n)
        ratio = k / n
        draws.append(ratio)
        if low < ratio <= high and k >= 1:
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            order = np.argsort(-(points @ direction), kind="stable")
            return np.sort(order[:k]), ratio
    raise GenerationFailedError(
        f"visibility target ({low}, {high}] unreachable with {n} surface points after {max_retries} draws; "
        f"last ratios {draws[-3:]}"
    )


def sample_instance(
    template: ObjectTemplate,
    rng: np.random.Generator,
    occlusion_target=(0.0, 1.0),
    *,
    seed: int = 0,
    bucket: int | None = None,
    max_tilt: float = 20.0,
) -> ObservationInstance:
    parent = sample_parent_pose(rng, max_tilt)
    states = sample_joint_states(template.tree, rng)
    gt = recover_articulated_pose(parent, template.tree, states)
    points, labels = surface_points(template, gt, rng)
    keep, ratio = cull_half_space(points, occlusion_target, rng)
    replace = keep.shape[0] < N_POINTS
    pick = rng.choice(keep, size=N_POINTS, replace=replace)
    return ObservationInstance(
        points=np.round(points[pick], POINT_DECIMALS),
        labels=labels[pick],
        visibility=ratio,
        gt_pose=gt,
        gt_joint_states=states,
        gt_tree=template.tree,
        template_id=template.name,
        seed=seed,
        bucket=bucket,
    )


def instance_seed(dataset_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(dataset_seed), int(index)]).generate_state(1)[0])


def build_dataset(
    template: ObjectTemplate | str,
    count: int,
    occlusion_buckets: Sequence = DEFAULT_BUCKETS,
    seed: int = 0,
    path: str | Path | None = None,
) -> list:
    """``count`` instances assigned round-robin to the visibility buckets.

    Each instance draws from its own stream seeded by ``(seed, index)``.
    Written as JSON lines when ``path`` is given.
    """
    if isinstance(template, str):
        template = get_template(template)
    if count < 1:
        raise InvalidParameterError("count must be at least 1")
    buckets = [tuple(b) for b in occlusion_buckets]
    if not buckets:
        raise InvalidParameterError("need at least one occlusion bucket")
    instances = []
    for i in range(count):
        s = instance_seed(seed, i)
        b = i % len(buckets)
        instances.append(sample_instance(template, np.random.default_rng(s), buckets[b], seed=s, bucket=b))
    if path is not None:
        save_dataset(instances, path)
    return instances


def save_dataset(instances, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for inst in instances:
                fh.write(json.dumps(inst.to_dict(), separators=(",", ":")))
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write dataset {path}: {exc}") from exc
    return path


def load_dataset(path) -> list:
    path = Path(path)
    out = []
    try:
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    out.append(ObservationInstance.from_dict(json.loads(line)))
                except (KeyError, ValueError, TypeError) as exc:
                    raise InvalidDatasetError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise OSError(f"cannot read dataset {path}: {exc}") from exc
    return out


def write_gt_csv(instances, path) -> Path:
    """Ground-truth table: one row per part with its pose and joint state."""
    path = Path(path)
    header = ["instance", "template", "part", "visibility"]
    header += [f"R{i}{j}" for i in range(3) for j in range(3)] + ["tx", "ty", "tz", "joint_type", "joint_state"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, inst in enumerate(instances):
            joint_of = {j.child: (j.joint_type, s) for j, s in zip(inst.gt_tree.joints, inst.gt_joint_states)}
            for part, pose in enumerate(inst.gt_pose):
                jt, s = joint_of.get(part, ("", ""))
                row = [i, inst.template_id, part, repr(inst.visibility)]
                row += [repr(float(v)) for v in pose.rotation.reshape(-1)]
                row += [repr(float(v)) for v in pose.translation] + [jt, "" if s == "" else repr(float(s))]
                w.writerow(row)
    return path
