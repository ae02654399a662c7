"""Concrete denoisers: exact / noisy oracle and a nearest-neighbour baseline."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .codec import BinSpec, TokenLayout, TokenSequence, encode_pose
from .errors import InvalidDatasetError, InvalidObservationError, InvalidParameterError

MAX_PARTS = 7
FEATURE_DIM = 9 + MAX_PARTS


@dataclass(frozen=True, eq=False)
class OracleDenoiser:
    """Knows the clean tokens; puts ``1 - epsilon`` on them and spreads the rest uniformly.

    Ignores ``x_t``, ``t`` and the observation.
    """

    tokens: TokenSequence
    epsilon: float = 0.0
    bin_count: int = 360

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise InvalidParameterError("epsilon must lie in [0, 1)")
        if np.any(self.tokens.mask) or self.tokens.values.max(initial=1) > self.bin_count:
            raise InvalidParameterError("oracle tokens must be concrete bins in 1..K")
        L, K = len(self.tokens), self.bin_count
        probs = np.full((L, K), self.epsilon / (K - 1))
        probs[np.arange(L), self.tokens.values - 1] = 1.0 - self.epsilon
        probs.flags.writeable = False
        object.__setattr__(self, "_probs", probs)

    def predict(self, x_t, t, observation=None) -> np.ndarray:
        return self._probs


def extract_features(points, labels) -> np.ndarray:
    """16-scalar descriptor of a labelled point cloud.

    Centroid (3), per-axis extent (3), ascending covariance eigenvalues (3)
    and the fraction of points on each part id ``0..6`` (7). Every term is a
    function of the empirical point distribution, so the descriptor does not
    change under point permutation or uniform duplication.
    """
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if points.ndim != 2 or points.shape[1] != 3 or points.shape[0] == 0:
        raise InvalidObservationError(f"expected a nonempty (N, 3) point array, got shape {points.shape}")
    if labels.shape[0] != points.shape[0]:
        raise InvalidObservationError("labels and points differ in length")
    if labels.min() < 0 or labels.max() >= MAX_PARTS:
        raise InvalidObservationError(f"part labels must lie in 0..{MAX_PARTS - 1}")
    centroid = points.mean(axis=0)
    extent = points.max(axis=0) - points.min(axis=0)
    centred = points - centroid
    cov = centred.T @ centred / points.shape[0]
    eig = np.linalg.eigvalsh(cov)
    fractions = np.bincount(labels, minlength=MAX_PARTS) / labels.shape[0]
    return np.concatenate([centroid, extent, eig, fractions])


def _instance_tokens(instance, spec: BinSpec) -> TokenSequence:
    return encode_pose([instance.gt_pose[0]], instance.gt_joint_states, spec, instance.gt_tree.joint_types)


class KnnDenoiser:
    """Neighbour-vote histogram over clean tokens of the ``k`` closest references.

    Features are standardized by the reference set's per-feature spread.
    Distance ties go to the earlier reference.
    """

    def __init__(self, features, tokens, layout: TokenLayout, k: int = 5, bin_count: int = 360):
        features = np.asarray(features, dtype=float)
        tokens = np.asarray(tokens, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] == 0:
            raise InvalidDatasetError("kNN reference set is empty")
        if tokens.shape != (features.shape[0], layout.length):
            raise InvalidDatasetError("reference tokens do not match the layout")
        if k < 1:
            raise InvalidParameterError("k must be at least 1")
        if k > features.shape[0]:
            warnings.warn(f"k={k} exceeds the {features.shape[0]} references; using k={features.shape[0]}")
            k = features.shape[0]
        self.features = features
        self.tokens = tokens
        self.layout = layout
        self.k = int(k)
        self.bin_count = int(bin_count)
        scale = features.std(axis=0)
        self.scale = np.where(scale > 0, scale, 1.0)

    @classmethod
    def fit(cls, dataset, k: int = 5, spec: BinSpec = BinSpec()) -> "KnnDenoiser":
        dataset = list(dataset)
        if not dataset:
            raise InvalidDatasetError("cannot fit kNN on an empty dataset")
        layouts = set()
        feats, toks = [], []
        for inst in dataset:
            seq = _instance_tokens(inst, spec)
            layouts.add(seq.layout)
            feats.append(extract_features(inst.points, inst.labels))
            toks.append(seq.values)
        if len(layouts) != 1:
            raise InvalidDatasetError("instances do not share one part-tree schema")
        return cls(np.array(feats), np.array(toks), layouts.pop(), k, spec.bin_count)

    def neighbours(self, observation) -> np.ndarray:
        f = extract_features(observation.points, observation.labels)
        d = np.linalg.norm((self.features - f) / self.scale, axis=1)
        return np.argsort(d, kind="stable")[: self.k]

    def predict(self, x_t, t, observation) -> np.ndarray:
        idx = self.neighbours(observation)
        votes = self.tokens[idx]
        L = self.layout.length
        probs = np.zeros((L, self.bin_count))
        for row in votes:
            probs[np.arange(L), row - 1] += 1.0
        return probs / len(idx)

    def to_dict(self) -> dict:
        return {
            "kind": "knn",
            "k": self.k,
            "bin_count": self.bin_count,
            "layout": self.layout.to_dict(),
            "features": self.features.tolist(),
            "tokens": self.tokens.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "KnnDenoiser":
        return cls(d["features"], d["tokens"], TokenLayout.from_dict(d["layout"]), d["k"], d["bin_count"])

    @classmethod
    def from_json(cls, text: str) -> "KnnDenoiser":
        return cls.from_dict(json.loads(text))


def knn_fit(dataset, k: int = 5, spec: BinSpec = BinSpec()) -> KnnDenoiser:
    return KnnDenoiser.fit(dataset, k, spec)
