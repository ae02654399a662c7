import numpy as np
import pytest
from scipy.spatial.transform import Rotation


def quat_mul(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_axis_angle(axis, deg):
    axis = np.asarray(axis, dtype=float)
    h = np.radians(deg) / 2
    return np.concatenate([[np.cos(h)], np.sin(h) * axis / np.linalg.norm(axis)])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v):
    return quat_mul(quat_mul(q, np.concatenate([[0.0], v])), quat_conj(q))[1:]


def quat_from_matrix(R):
    """Scalar-first quaternion via scipy, an implementation independent of the package."""
    x, y, z, w = Rotation.from_matrix(R).as_quat()
    return np.array([w, x, y, z])


def quat_angle_deg(q1, q2):
    """Angle of the relative rotation, stable near zero."""
    d = quat_mul(quat_conj(q1), q2)
    return float(np.degrees(2 * np.arctan2(np.linalg.norm(d[1:]), abs(d[0]))))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def quaternion_fk(parent_R, parent_t, tree, states):
    """Per-part (quaternion, translation) from an independent quaternion composition."""
    frames = {0: (quat_from_matrix(parent_R), np.asarray(parent_t, dtype=float))}
    pending = list(zip(tree.joints, states))
    while pending:
        for item in list(pending):
            j, s = item
            if j.parent not in frames:
                continue
            qp, tp = frames[j.parent]
            if j.joint_type == "revolute":
                qm = quat_axis_angle(j.axis, s)
                tm = j.pivot - quat_rotate(qm, j.pivot)
            else:
                qm = np.array([1.0, 0.0, 0.0, 0.0])
                tm = j.axis * s
            frames[j.child] = (quat_mul(qp, qm), tp + quat_rotate(qp, tm))
            pending.remove(item)
    return [frames[i] for i in range(tree.part_count)]


ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
