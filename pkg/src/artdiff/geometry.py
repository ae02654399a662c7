"""Rigid-body primitives: rotation helpers and the :class:`PoseSE3` value type.

Angles at the public surface are in degrees. Rotation matrices act on column
vectors from the left.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidRotationError

ORTHO_TOL = 1e-9


def validate_rotation(R, tol: float = ORTHO_TOL) -> np.ndarray:
    """Return ``R`` as a float array, raising if it is not in SO(3)."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise InvalidRotationError(f"expected a finite 3x3 matrix, got shape {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        raise InvalidRotationError("matrix is not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise InvalidRotationError("matrix determinant is not +1")
    return R


def rot_x(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def axis_angle(axis, deg: float) -> np.ndarray:
    """Rodrigues rotation about a unit ``axis`` by ``deg`` degrees."""
    u = np.asarray(axis, dtype=float)
    theta = np.radians(deg)
    K = skew(u)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def rotation_angle(R) -> float:
    """Rotation angle of ``R`` in degrees, in [0, 180].

    Uses ``atan2(sin, cos)`` built from the skew and trace parts rather than
    ``arccos`` of the trace alone, so angles near zero keep full precision.
    """
    R = np.asarray(R, dtype=float)
    cos_theta = (np.trace(R) - 1.0) / 2.0
    sin_theta = 0.5 * np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return float(np.degrees(np.arctan2(sin_theta, cos_theta)))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform rotation from a normalized Gaussian quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True, eq=False)
class PoseSE3:
    """Rigid transform ``p -> R p + t`` with translation in meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = validate_rotation(self.rotation).copy()
        t = np.asarray(self.translation, dtype=float).reshape(-1).copy()
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise InvalidRotationError("translation must be a finite 3-vector")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, M) -> "PoseSE3":
        M = np.asarray(M, dtype=float)
        return cls(M[:3, :3], M[:3, 3])

    @classmethod
    def from_translation(cls, t) -> "PoseSE3":
        return cls(np.eye(3), t)

    @property
    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def compose(self, other: "PoseSE3") -> "PoseSE3":
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return PoseSE3(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    __matmul__ = compose

    def inverse(self) -> "PoseSE3":
        Rt = self.rotation.T
        return PoseSE3(Rt, -Rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def to_dict(self) -> dict:
        return {"R": [float(v) for v in self.rotation.reshape(-1)], "t": [float(v) for v in self.translation]}

    @classmethod
    def from_dict(cls, d: dict) -> "PoseSE3":
        return cls(np.asarray(d["R"], dtype=float).reshape(3, 3), d["t"])

    def __repr__(self):
        return f"PoseSE3(R={self.rotation.tolist()}, t={self.translation.tolist()})"
