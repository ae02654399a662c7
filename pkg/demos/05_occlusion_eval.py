"""Evaluate the kNN denoiser across three visibility buckets.

Instances are culled by random half-spaces so the visible fraction lands in
(0, 0.4], (0.4, 0.8] or (0.8, 1]. The kNN stand-in votes with the clean
tokens of the closest training objects. Its descriptor (centroid, extent,
covariance spectrum, part fractions) says little about yaw, so rotation errors
stay large in every bucket; the point here is the protocol, not the numbers.
"""

import tempfile
from pathlib import Path

from artdiff.evaluation import ExperimentConfig, run_experiment
from artdiff.synth import build_dataset, save_dataset

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    save_dataset(build_dataset("laptop", 30, seed=10), tmp / "test.jsonl")
    save_dataset(build_dataset("laptop", 150, seed=11), tmp / "train.jsonl")
    cfg = ExperimentConfig.from_dict(
        {"dataset": "test.jsonl", "seed": 0, "denoiser": {"type": "knn", "train": "train.jsonl", "k": 5}},
        base_dir=tmp,
    )
    run_experiment(cfg, tmp / "out")
    print((tmp / "out" / "results.csv").read_text())
