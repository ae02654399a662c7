"""Pose tokenization.

A pose sequence is six tokens per tokenized part, ``[l, m, n, x, y, z]``
(intrinsic Z-Y-X Euler angles, then translation), followed by one ``JOINT``
token per child joint. Token values are bins ``1..K``; :data:`MASK` (0) is the
absorbing noise state and never a concrete value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    IncompleteSequenceError,
    InvalidParameterError,
    InvalidValueError,
    MaskNotConcreteError,
    SequenceShapeError,
)
from .geometry import PoseSE3, rot_x, rot_y, rot_z, validate_rotation

MASK = 0
GIMBAL_TOL_DEG = 1e-6
JOINT_TYPES = ("revolute", "prismatic")


class TokenKind(IntEnum):
    ROT = 0
    TSL = 1
    JOINT = 2


PART_KINDS = (TokenKind.ROT,) * 3 + (TokenKind.TSL,) * 3


@dataclass(frozen=True)
class BinSpec:
    """Uniform binning of angles, translations and prismatic joint states."""

    bin_count: int = 360
    translation_range: tuple = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))
    prismatic_range: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if int(self.bin_count) != self.bin_count or self.bin_count < 2:
            raise InvalidParameterError(f"bin_count must be an integer >= 2, got {self.bin_count}")
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.translation_range)
        if len(ranges) != 3:
            raise InvalidParameterError("translation_range needs one interval per axis")
        prismatic = (float(self.prismatic_range[0]), float(self.prismatic_range[1]))
        for lo, hi in ranges + (prismatic,):
            if not lo < hi:
                raise InvalidParameterError(f"degenerate interval [{lo}, {hi}]")
        object.__setattr__(self, "bin_count", int(self.bin_count))
        object.__setattr__(self, "translation_range", ranges)
        object.__setattr__(self, "prismatic_range", prismatic)

    @property
    def angle_width(self) -> float:
        return 360.0 / self.bin_count

    def translation_width(self, axis: int = 0) -> float:
        lo, hi = self.translation_range[axis]
        return (hi - lo) / self.bin_count

    def interval(self, kind: TokenKind, axis: int = 0, joint_type: str = "revolute"):
        """``(low, high)`` for a token kind; ``axis`` picks the translation axis."""
        if kind == TokenKind.ROT or (kind == TokenKind.JOINT and joint_type == "revolute"):
            return 0.0, 360.0
        if kind == TokenKind.TSL:
            return self.translation_range[axis]
        if kind == TokenKind.JOINT and joint_type == "prismatic":
            return self.prismatic_range
        raise InvalidParameterError(f"unknown joint type {joint_type!r}")

    def to_dict(self) -> dict:
        return {
            "bin_count": self.bin_count,
            "translation_range": [list(r) for r in self.translation_range],
            "prismatic_range": list(self.prismatic_range),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BinSpec":
        kwargs = {"bin_count": d.get("bin_count", 360)}
        if "translation_range" in d:
            tr = d["translation_range"]
            # a single [lo, hi] applies to all three axes
            if len(tr) == 2 and not isinstance(tr[0], (list, tuple)):
                tr = [tr, tr, tr]
            kwargs["translation_range"] = tuple(tuple(r) for r in tr)
        if "prismatic_range" in d:
            kwargs["prismatic_range"] = tuple(d["prismatic_range"])
        return cls(**kwargs)


class EulerAngles(NamedTuple):
    """Intrinsic Z-Y-X angles in degrees, each in [0, 360)."""

    l: float
    m: float
    n: float


def _wrap360(deg: float) -> float:
    w = deg % 360.0
    # -1e-17 % 360 == 360.0 in floating point
    return 0.0 if w >= 360.0 else w


def rotation_to_euler(R) -> EulerAngles:
    """Decompose ``R = Rz(l) @ Ry(m) @ Rx(n)``.

    Pitch is recovered with ``atan2`` against the column norm, which keeps
    precision near +/-90 degrees. Within ``GIMBAL_TOL_DEG`` of gimbal lock
    the roll is set to 0 and folded into the yaw.
    """
    R = validate_rotation(R)
    pitch = math.degrees(math.atan2(-R[2, 0], math.hypot(R[0, 0], R[1, 0])))
    if abs(abs(pitch) - 90.0) <= GIMBAL_TOL_DEG:
        yaw = math.degrees(math.atan2(-R[0, 1], R[1, 1]))
        roll = 0.0
    else:
        yaw = math.degrees(math.atan2(R[1, 0], R[0, 0]))
        roll = math.degrees(math.atan2(R[2, 1], R[2, 2]))
    return EulerAngles(_wrap360(yaw), _wrap360(pitch), _wrap360(roll))


def euler_to_rotation(angles) -> np.ndarray:
    l, m, n = angles
    return rot_z(l) @ rot_y(m) @ rot_x(n)


def _check_kind(kind):
    try:
        return TokenKind(kind)
    except ValueError:
        raise InvalidParameterError(f"unknown token kind {kind!r}") from None


def quantize(value: float, spec: BinSpec, kind: TokenKind, *, axis: int = 0, joint_type: str = "revolute") -> int:
    """Map a scalar to its bin in ``1..K``.

    Angles are reduced mod 360 (so 360 lands in bin 1); linear quantities are
    clamped to their interval. Bins are half-open ``[low, high)`` with the top
    endpoint clamped into bin K, so the origin of a symmetric translation
    interval falls in bin ``K/2 + 1``.
    """
    value = float(value)
    if math.isnan(value):
        raise InvalidValueError("cannot quantize NaN")
    kind = _check_kind(kind)
    low, high = spec.interval(kind, axis, joint_type)
    K = spec.bin_count
    if high == 360.0 and low == 0.0:
        if math.isinf(value):
            raise InvalidValueError("cannot quantize an infinite angle")
        value = _wrap360(value)
    else:
        value = min(max(value, low), high)
    idx = math.floor((value - low) * K / (high - low)) + 1
    return int(min(max(idx, 1), K))


def dequantize(token: int, spec: BinSpec, kind: TokenKind, *, axis: int = 0, joint_type: str = "revolute") -> float:
    """Bin center of ``token``."""
    if token == MASK:
        raise MaskNotConcreteError("MASK has no concrete value")
    token = int(token)
    if not 1 <= token <= spec.bin_count:
        raise InvalidValueError(f"token {token} outside 1..{spec.bin_count}")
    kind = _check_kind(kind)
    low, high = spec.interval(kind, axis, joint_type)
    return low + (token - 0.5) * (high - low) / spec.bin_count


@dataclass(frozen=True)
class TokenLayout:
    """Positions of token kinds: ``n_parts`` six-token blocks, then joints."""

    n_parts: int = 1
    joint_types: tuple = ()

    def __post_init__(self):
        if self.n_parts < 0:
            raise InvalidParameterError("n_parts must be nonnegative")
        jt = tuple(self.joint_types)
        for j in jt:
            if j not in JOINT_TYPES:
                raise InvalidParameterError(f"unknown joint type {j!r}")
        object.__setattr__(self, "joint_types", jt)

    @property
    def length(self) -> int:
        return 6 * self.n_parts + len(self.joint_types)

    @property
    def kinds(self) -> np.ndarray:
        return np.array(PART_KINDS * self.n_parts + (TokenKind.JOINT,) * len(self.joint_types), dtype=np.int64)

    def to_dict(self) -> dict:
        return {"n_parts": self.n_parts, "joint_types": list(self.joint_types)}

    @classmethod
    def from_dict(cls, d: dict) -> "TokenLayout":
        return cls(int(d["n_parts"]), tuple(d["joint_types"]))


@dataclass(frozen=True, eq=False)
class TokenSequence:
    """Immutable token values laid out per ``layout``.

    ``clamped`` records that an input had to be clamped or wrapped during
    encoding.
    """

    values: np.ndarray
    layout: TokenLayout
    clamped: bool = False
    _kinds: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.int64).reshape(-1)
        if v.shape[0] != self.layout.length:
            raise SequenceShapeError(f"layout expects {self.layout.length} tokens, got {v.shape[0]}")
        if np.any(v < 0):
            raise InvalidValueError("token values must be MASK (0) or bins >= 1")
        v.flags.writeable = False
        kinds = self.layout.kinds
        kinds.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_kinds", kinds)

    @classmethod
    def all_mask(cls, layout: TokenLayout) -> "TokenSequence":
        return cls(np.zeros(layout.length, dtype=np.int64), layout)

    @property
    def kinds(self) -> np.ndarray:
        return self._kinds

    @property
    def mask(self) -> np.ndarray:
        return self.values == MASK

    def __len__(self):
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, TokenSequence):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.layout, self.values.tobytes()))

    def replace(self, values) -> "TokenSequence":
        return TokenSequence(values, self.layout)

    def tokens(self) -> list:
        """``(kind, value)`` pairs; MASK values are reported as ``None``."""
        return [(TokenKind(k), None if v == MASK else int(v)) for k, v in zip(self.kinds, self.values)]


def _translation_clamped(t, spec: BinSpec) -> bool:
    return any(not lo <= ti < hi for ti, (lo, hi) in zip(t, spec.translation_range))


def encode_pose(
    poses: Sequence[PoseSE3],
    joint_states: Sequence[float] = (),
    spec: BinSpec = BinSpec(),
    joint_types: Sequence[str] | None = None,
) -> TokenSequence:
    """Tokenize ``poses`` (all of them, in order) and ``joint_states``.

    Pass only the parent pose for the parent-plus-joints layout. Joint types
    default to revolute. Out-of-range joint states are clamped (prismatic) or
    wrapped (revolute) and flagged in :attr:`TokenSequence.clamped`.
    """
    joint_states = [float(s) for s in joint_states]
    if joint_types is None:
        joint_types = ("revolute",) * len(joint_states)
    layout = TokenLayout(len(poses), tuple(joint_types))
    if len(layout.joint_types) != len(joint_states):
        raise SequenceShapeError("joint_types and joint_states differ in length")
    values = []
    clamped = False
    for pose in poses:
        values.extend(quantize(a, spec, TokenKind.ROT) for a in rotation_to_euler(pose.rotation))
        values.extend(quantize(c, spec, TokenKind.TSL, axis=i) for i, c in enumerate(pose.translation))
        clamped |= _translation_clamped(pose.translation, spec)
    for state, jt in zip(joint_states, layout.joint_types):
        if math.isnan(state):
            raise InvalidValueError("joint state is NaN")
        low, high = spec.interval(TokenKind.JOINT, joint_type=jt)
        clamped |= not low <= state < high
        values.append(quantize(state, spec, TokenKind.JOINT, joint_type=jt))
    return TokenSequence(np.array(values, dtype=np.int64), layout, clamped=clamped)


def decode_pose(seq: TokenSequence, spec: BinSpec = BinSpec()):
    """Inverse of :func:`encode_pose` up to quantization: ``(poses, joint_states)``."""
    if np.any(seq.mask):
        raise IncompleteSequenceError(f"{int(seq.mask.sum())} MASK tokens remain")
    if int(seq.values.max(initial=1)) > spec.bin_count:
        raise InvalidValueError(f"token value exceeds bin_count {spec.bin_count}")
    v = seq.values
    poses = []
    for p in range(seq.layout.n_parts):
        block = v[6 * p : 6 * p + 6]
        angles = [dequantize(b, spec, TokenKind.ROT) for b in block[:3]]
        t = [dequantize(b, spec, TokenKind.TSL, axis=i) for i, b in enumerate(block[3:])]
        poses.append(PoseSE3(euler_to_rotation(angles), t))
    offset = 6 * seq.layout.n_parts
    states = [
        dequantize(v[offset + j], spec, TokenKind.JOINT, joint_type=jt) for j, jt in enumerate(seq.layout.joint_types)
    ]
    return poses, states
