"""Discrete mask-absorbing diffusion for articulated object pose estimation."""

from .codec import (
    MASK,
    BinSpec,
    EulerAngles,
    TokenKind,
    TokenLayout,
    TokenSequence,
    decode_pose,
    dequantize,
    encode_pose,
    euler_to_rotation,
    quantize,
    rotation_to_euler,
)
from .denoisers import KnnDenoiser, OracleDenoiser, extract_features, knn_fit
from .evaluation import ExperimentConfig, rotation_error, run_ablation, run_experiment, translation_error
from .forward import (
    NoiseSchedule,
    TransitionMatrix,
    build_schedule,
    build_transition,
    cumulative_transition,
    forward_sample,
    forward_trajectory,
    marginal,
)
from .geometry import PoseSE3
from .kinematics import (
    ArticulatedPose,
    JointFrame,
    JointRecord,
    PartTree,
    axis_metrics,
    child_pose_fk,
    orthogonalize,
    recover_articulated_pose,
)
from .reverse import FlowDecision, FlowSchedule, default_flow, flow_decide, posterior_analytic, reverse_step, sample_reverse
from .synth import TEMPLATES, ObjectTemplate, ObservationInstance, build_dataset, load_dataset, sample_instance

__version__ = "0.1.0"
