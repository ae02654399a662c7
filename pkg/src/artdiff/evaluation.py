"""Pose metrics, experiment configuration and report writing."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .codec import BinSpec, decode_pose, encode_pose
from .denoisers import KnnDenoiser, OracleDenoiser
from .errors import ArtDiffError, ConfigError, SchemaVersionError
from .forward import build_schedule
from .geometry import rotation_angle, validate_rotation
from .kinematics import axis_metrics, link_frames, recover_articulated_pose
from .reverse import MODES, X0_CHOICES, default_flow, sample_reverse
from .synth import DEFAULT_BUCKETS, instance_seed, load_dataset

REPORT_SCHEMA_VERSION = "1.0"


def rotation_error(R_pred, R_gt) -> float:
    """Geodesic angle between two rotations, degrees in [0, 180]."""
    return rotation_angle(validate_rotation(R_pred).T @ validate_rotation(R_gt))


def translation_error(t_pred, t_gt) -> float:
    return float(np.linalg.norm(np.asarray(t_pred, dtype=float) - np.asarray(t_gt, dtype=float)))


@dataclass
class PoseMetrics:
    rotation: list
    translation: list
    axis_angle: list
    axis_distance: list  # None entries for prismatic joints

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation,
            "translation": self.translation,
            "axis_angle": self.axis_angle,
            "axis_distance": self.axis_distance,
        }


def pose_metrics(pred_pose, gt_pose, tree) -> PoseMetrics:
    """Per-part pose errors and per-joint axis errors, axes compared in the camera frame."""
    rot = [rotation_error(p.rotation, g.rotation) for p, g in zip(pred_pose, gt_pose)]
    tsl = [translation_error(p.translation, g.translation) for p, g in zip(pred_pose, gt_pose)]
    pred_frames = link_frames(pred_pose, tree)
    gt_frames = link_frames(gt_pose, tree)
    angles, dists = [], []
    for j in tree.joints:
        a, d = axis_metrics(j.in_frame(pred_frames[j.parent]), j.in_frame(gt_frames[j.parent]))
        angles.append(a)
        dists.append(d)
    return PoseMetrics(rot, tsl, angles, dists)


@dataclass
class ExperimentConfig:
    """Run description; loaded from a JSON document (see README for the schema)."""

    dataset: str
    seed: int
    out: str = "results"
    T: int = 100
    profile: str = "linear"
    beta_floor: float = 1e-8
    bins: BinSpec = field(default_factory=BinSpec)
    mode: str = "reformulated"
    x0_choice: str | None = None
    lambda1: float | list | None = None
    denoiser: dict = field(default_factory=lambda: {"type": "oracle", "epsilon": 0.0})
    buckets: list = field(default_factory=lambda: [list(b) for b in DEFAULT_BUCKETS])
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        if "seed" not in d:
            raise ConfigError("config must set a seed")
        if "dataset" not in d:
            raise ConfigError("config must name a dataset")
        sched = d.get("schedule", {})
        flow = d.get("flow", {})
        try:
            cfg = cls(
                dataset=str(d["dataset"]),
                seed=int(d["seed"]),
                out=str(d.get("out", "results")),
                T=int(sched.get("T", 100)),
                profile=sched.get("profile", "linear"),
                beta_floor=float(sched.get("beta_floor", 1e-8)),
                bins=BinSpec.from_dict(d.get("bins", {})),
                mode=d.get("mode", "reformulated"),
                x0_choice=d.get("x0_choice"),
                lambda1=flow.get("lambda1"),
                denoiser=dict(d.get("denoiser", {"type": "oracle", "epsilon": 0.0})),
                buckets=[list(b) for b in d.get("buckets", DEFAULT_BUCKETS)],
                base_dir=str(base_dir),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d, base_dir=path.parent)

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.x0_choice is not None and self.x0_choice not in X0_CHOICES:
            raise ConfigError(f"x0_choice must be one of {X0_CHOICES}")
        kind = self.denoiser.get("type")
        if kind not in ("oracle", "knn"):
            raise ConfigError(f"denoiser.type must be 'oracle' or 'knn', got {kind!r}")
        if kind == "knn" and not ({"train", "model"} & set(self.denoiser)):
            raise ConfigError("knn denoiser needs a 'train' dataset or a fitted 'model' path")
        for b in self.buckets:
            if len(b) != 2 or not 0.0 <= b[0] < b[1] <= 1.0:
                raise ConfigError(f"bad visibility bucket {b}")

    def resolve(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "seed": self.seed,
            "out": self.out,
            "schedule": {"T": self.T, "profile": self.profile, "beta_floor": self.beta_floor},
            "bins": self.bins.to_dict(),
            "mode": self.mode,
            "x0_choice": self.x0_choice,
            "flow": {"lambda1": self.lambda1},
            "denoiser": self.denoiser,
            "buckets": self.buckets,
        }


def _bucket_of(visibility: float, buckets) -> int | None:
    for i, (lo, hi) in enumerate(buckets):
        if lo < visibility <= hi:
            return i
    return None


def _load_instances(cfg: ExperimentConfig) -> list:
    path = cfg.resolve(cfg.dataset)
    if not path.exists():
        raise ConfigError(f"dataset {path} does not exist")
    instances = load_dataset(path)
    if not instances:
        raise ConfigError(f"dataset {path} is empty")
    return instances


def _make_denoiser(cfg: ExperimentConfig):
    spec = cfg.denoiser
    if spec["type"] == "oracle":
        eps = float(spec.get("epsilon", 0.0))
        return lambda inst, tokens: OracleDenoiser(tokens, eps, cfg.bins.bin_count)
    if "model" in spec:
        path = cfg.resolve(spec["model"])
        try:
            knn = KnnDenoiser.from_json(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read kNN model {path}: {exc}") from exc
    else:
        path = cfg.resolve(spec["train"])
        if not path.exists():
            raise ConfigError(f"kNN training set {path} does not exist")
        knn = KnnDenoiser.fit(load_dataset(path), int(spec.get("k", 5)), cfg.bins)
    return lambda inst, tokens: knn


def evaluate_instances(cfg: ExperimentConfig, instances, mode: str | None = None) -> list:
    """Per-instance records; failures are recorded, never raised."""
    mode = mode or cfg.mode
    schedule = build_schedule(cfg.T, cfg.profile, cfg.beta_floor)
    flow = default_flow(schedule, cfg.lambda1)
    make = _make_denoiser(cfg)
    records = []
    for i, inst in enumerate(instances):
        rec = {"index": i, "template": inst.template_id, "visibility": inst.visibility,
               "bucket": _bucket_of(inst.visibility, cfg.buckets)}
        try:
            gt_tokens = encode_pose([inst.gt_pose[0]], inst.gt_joint_states, cfg.bins, inst.gt_tree.joint_types)
            denoiser = make(inst, gt_tokens)
            rng = np.random.default_rng(instance_seed(cfg.seed, i))
            est = sample_reverse(inst, denoiser, schedule, gt_tokens.layout, rng, bin_count=cfg.bins.bin_count,
                                 flow=flow, mode=mode, x0_choice=cfg.x0_choice)
            (parent,), states = decode_pose(est, cfg.bins)
            states = [min(max(s, j.limits[0]), j.limits[1]) for s, j in zip(states, inst.gt_tree.joints)]
            pred = recover_articulated_pose(parent, inst.gt_tree, states)
            metrics = pose_metrics(pred, inst.gt_pose, inst.gt_tree)
            rec.update(ok=True, token_accuracy=float(np.mean(est.values == gt_tokens.values)), **metrics.to_dict())
        except (ArtDiffError, ValueError, FloatingPointError) as exc:
            rec.update(ok=False, error=f"{type(exc).__name__}: {exc}")
        records.append(rec)
    return records


def _mean_lists(rows, key):
    vals = [r[key] for r in rows]
    if not vals:
        return []
    cols = list(zip(*vals))
    return [None if any(v is None for v in c) else float(np.mean(c)) for c in cols]


def _median_lists(rows, key):
    vals = [r[key] for r in rows]
    if not vals:
        return []
    cols = list(zip(*vals))
    return [None if any(v is None for v in c) else float(np.median(c)) for c in cols]


def aggregate(records, buckets) -> dict:
    """Mean and median per bucket and overall, over successful instances."""
    ok = [r for r in records if r["ok"]]
    groups = [(f"({lo:g}, {hi:g}]", [r for r in ok if r["bucket"] == i]) for i, (lo, hi) in enumerate(buckets)]
    groups.append(("overall", ok))
    out = {}
    for name, rows in groups:
        out[name] = {
            "count": len(rows),
            "mean": {k: _mean_lists(rows, k) for k in ("rotation", "translation", "axis_angle", "axis_distance")},
            "median": {k: _median_lists(rows, k) for k in ("rotation", "translation", "axis_angle", "axis_distance")},
        }
    return out


def _fmt(values, digits) -> str:
    if not values:
        return "-"
    return ", ".join("-" if v is None else f"{v:.{digits}f}" for v in values)


CSV_HEADER = ["group", "count", "rotation_error_deg", "translation_error_m", "axis_angle_error_deg", "axis_distance_error_m"]


def results_csv(agg: dict) -> str:
    """One row per bucket plus overall; list-valued cells hold per-part or per-joint means."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for name, g in agg.items():
        m = g["mean"]
        w.writerow([name, g["count"], _fmt(m["rotation"], 3), _fmt(m["translation"], 4),
                    _fmt(m["axis_angle"], 3), _fmt(m["axis_distance"], 4)])
    return buf.getvalue()


def summary_document(cfg: ExperimentConfig, records, agg, mode) -> dict:
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "git_describe": "",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "mode": mode,
        "aggregation": "per-instance mean and median over successful instances",
        "n_instances": len(records),
        "n_failed": sum(not r["ok"] for r in records),
        "groups": agg,
        "failures": [{"index": r["index"], "error": r["error"]} for r in records if not r["ok"]],
        "instances": records,
    }


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None, mode: str | None = None) -> dict:
    """Evaluate the dataset and write ``results.csv`` and ``summary.json``."""
    mode = mode or cfg.mode
    out = Path(out_dir) if out_dir is not None else cfg.resolve(cfg.out)
    records = evaluate_instances(cfg, _load_instances(cfg), mode)
    agg = aggregate(records, cfg.buckets)
    summary = summary_document(cfg, records, agg, mode)
    _write(out / "results.csv", results_csv(agg))
    _write(out / "summary.json", json.dumps(summary, indent=1, sort_keys=True))
    return summary


def load_summary(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = str(doc.get("schema_version", ""))
    major = version.split(".")[0]
    if major != REPORT_SCHEMA_VERSION.split(".")[0]:
        raise SchemaVersionError(f"unsupported report schema version {version!r}")
    return doc


def sign_test(better_first, other) -> dict:
    """One-sided sign test that ``better_first`` values are smaller; ties dropped."""
    a = np.asarray(better_first, dtype=float)
    b = np.asarray(other, dtype=float)
    wins = int(np.sum(a < b))
    losses = int(np.sum(a > b))
    n = wins + losses
    p = 1.0 if n == 0 else float(binomtest(wins, n, 0.5, alternative="greater").pvalue)
    return {"wins": wins, "losses": losses, "ties": int(a.size - n), "p_value": p}


def run_ablation(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> dict:
    """Paired reformulated / vanilla runs sharing instance seeds."""
    out = Path(out_dir) if out_dir is not None else cfg.resolve(cfg.out)
    instances = _load_instances(cfg)
    runs = {m: evaluate_instances(cfg, instances, m) for m in MODES}
    aggs = {m: aggregate(runs[m], cfg.buckets) for m in MODES}
    paired = [(r, v) for r, v in zip(runs["reformulated"], runs["vanilla"]) if r["ok"] and v["ok"]]
    tests = {}
    for key in ("rotation", "translation"):
        ref = [float(np.mean(r[key])) for r, _ in paired]
        van = [float(np.mean(v[key])) for _, v in paired]
        tests[key] = sign_test(ref, van)
        tests[key]["mean_reformulated"] = float(np.mean(ref)) if ref else None
        tests[key]["mean_vanilla"] = float(np.mean(van)) if van else None
    deltas = {}
    for group in aggs["reformulated"]:
        deltas[group] = {}
        for key in ("rotation", "translation"):
            r = aggs["reformulated"][group]["mean"][key]
            v = aggs["vanilla"][group]["mean"][key]
            deltas[group][key] = [None if a is None or b is None else a - b for a, b in zip(r, v)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "mode"] + CSV_HEADER[1:])
    for group in aggs["reformulated"]:
        for m in MODES:
            g = aggs[m][group]
            w.writerow([group, m, g["count"], _fmt(g["mean"]["rotation"], 3), _fmt(g["mean"]["translation"], 4),
                        _fmt(g["mean"]["axis_angle"], 3), _fmt(g["mean"]["axis_distance"], 4)])
        w.writerow([group, "delta", "", _fmt(deltas[group]["rotation"], 3), _fmt(deltas[group]["translation"], 4), "", ""])
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "git_describe": "",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "groups": aggs,
        "deltas": deltas,
        "sign_tests": tests,
        "n_paired": len(paired),
    }
    _write(out / "ablation.csv", buf.getvalue())
    _write(out / "ablation.json", json.dumps(doc, indent=1, sort_keys=True))
    return doc
