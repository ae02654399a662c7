"""Turn an articulated pose into tokens and back.

A laptop's base pose becomes six tokens (three Euler angles, three
translation coordinates) and its hinge angle one more. Decoding returns bin
centers, so the round trip is off by at most half a bin per component.
"""

import numpy as np

from artdiff import BinSpec, PoseSE3, decode_pose, encode_pose, euler_to_rotation
from artdiff.evaluation import rotation_error

spec = BinSpec()
pose = PoseSE3(euler_to_rotation((123.4, 10.2, 355.1)), [0.12, -0.05, 0.61])
hinge = 87.3

tokens = encode_pose([pose], [hinge], spec, ("revolute",))
print("tokens:", tokens.values.tolist())
print("kinds: ", tokens.kinds.tolist(), "(0 rotation, 1 translation, 2 joint)")

(decoded,), (state,) = decode_pose(tokens, spec)
print(f"rotation error     {rotation_error(decoded.rotation, pose.rotation):.3f} deg")
print(f"translation error  {np.linalg.norm(decoded.translation - pose.translation) * 1000:.2f} mm")
print(f"hinge              {hinge} -> {state}")
