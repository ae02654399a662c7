"""Command-line entry point: ``artdiff {generate,corrupt,sample,eval,ablate}``.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .codec import BinSpec, decode_pose, encode_pose
from .errors import ArtDiffError, ConfigError
from .evaluation import ExperimentConfig, _make_denoiser, run_ablation, run_experiment
from .forward import build_schedule, forward_trajectory
from .reverse import default_flow, sample_reverse
from .synth import DEFAULT_BUCKETS, TEMPLATES, build_dataset, load_dataset, write_gt_csv


def _parse_buckets(text: str):
    try:
        buckets = [tuple(float(x) for x in part.split(":")) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bucket list {text!r}; use low:high,low:high") from None
    if any(len(b) != 2 for b in buckets):
        raise argparse.ArgumentTypeError("each bucket is low:high")
    return buckets


def _common(p: argparse.ArgumentParser, config_required: bool = False):
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    p.add_argument("--config", type=Path, required=config_required, help="experiment config JSON")
    p.add_argument("--out", type=Path, default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="artdiff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build a synthetic dataset")
    _common(g)
    g.add_argument("--template", choices=sorted(TEMPLATES), default="drawer")
    g.add_argument("--count", type=int, default=30)
    g.add_argument("--buckets", type=_parse_buckets, default=list(DEFAULT_BUCKETS),
                   help="visibility intervals low:high,... (default 0:0.4,0.4:0.8,0.8:1)")

    c = sub.add_parser("corrupt", help="forward-corrupt one instance and dump the trajectory")
    _common(c)
    c.add_argument("--dataset", type=Path, required=True)
    c.add_argument("--index", type=int, default=0)
    c.add_argument("--t", type=int, default=None, help="last forward step (default T)")
    c.add_argument("--T", type=int, default=100)
    c.add_argument("--profile", choices=("linear", "cosine"), default="linear")

    s = sub.add_parser("sample", help="reverse-sample one instance with a trace")
    _common(s, config_required=True)
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--mode", choices=("reformulated", "vanilla"), default=None)

    e = sub.add_parser("eval", help="run an experiment config")
    _common(e, config_required=True)

    a = sub.add_parser("ablate", help="paired reformulated / vanilla runs")
    _common(a, config_required=True)
    return parser


def _dump_jsonl(path: Path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, separators=(",", ":")) + "\n")


def _pick(instances, index):
    if not instances:
        raise ConfigError("dataset is empty")
    if not 0 <= index < len(instances):
        raise ConfigError(f"index {index} outside 0..{len(instances) - 1}")
    return instances[index]


def cmd_generate(args) -> int:
    out = args.out or Path("data")
    seed = 0 if args.seed is None else args.seed
    instances = build_dataset(args.template, args.count, args.buckets, seed, out / "dataset.jsonl")
    write_gt_csv(instances, out / "gt.csv")
    print(f"wrote {len(instances)} {args.template} instances to {out / 'dataset.jsonl'}")
    return 0


def cmd_corrupt(args) -> int:
    out = args.out or Path("corrupt")
    seed = 0 if args.seed is None else args.seed
    inst = _pick(load_dataset(args.dataset), args.index)
    spec = BinSpec()
    x0 = encode_pose([inst.gt_pose[0]], inst.gt_joint_states, spec, inst.gt_tree.joint_types)
    schedule = build_schedule(args.T, args.profile)
    traj = forward_trajectory(x0, schedule, np.random.default_rng(seed), args.t)
    records = [{"t": t, "tokens": [None if v == 0 else int(v) for v in x.values]} for t, x in enumerate(traj)]
    _dump_jsonl(out / "trajectory.jsonl", records)
    masked = int(traj[-1].mask.sum())
    print(f"t={len(traj) - 1}: {masked}/{len(x0)} tokens masked")
    return 0


def cmd_sample(args) -> int:
    cfg = ExperimentConfig.load(args.config, seed=args.seed)
    out = args.out or cfg.resolve(cfg.out)
    inst = _pick(load_dataset(cfg.resolve(cfg.dataset)), args.index)
    mode = args.mode or cfg.mode
    x0 = encode_pose([inst.gt_pose[0]], inst.gt_joint_states, cfg.bins, inst.gt_tree.joint_types)
    denoiser = _make_denoiser(cfg)(inst, x0)
    schedule = build_schedule(cfg.T, cfg.profile, cfg.beta_floor)
    trace = []
    est = sample_reverse(inst, denoiser, schedule, x0.layout, np.random.default_rng(cfg.seed),
                         bin_count=cfg.bins.bin_count, flow=default_flow(schedule, cfg.lambda1), mode=mode,
                         x0_choice=cfg.x0_choice, trace=trace)
    _dump_jsonl(out / "trace.jsonl", trace)
    (parent,), states = decode_pose(est, cfg.bins)
    result = {
        "index": args.index,
        "mode": mode,
        "tokens": est.values.tolist(),
        "gt_tokens": x0.values.tolist(),
        "parent_pose": parent.to_dict(),
        "joint_states": states,
    }
    (out / "sample.json").write_text(json.dumps(result, indent=1, sort_keys=True), encoding="utf-8")
    print(f"recovered {int(np.sum(est.values == x0.values))}/{len(x0)} tokens")
    return 0


def cmd_eval(args) -> int:
    cfg = ExperimentConfig.load(args.config, seed=args.seed)
    summary = run_experiment(cfg, args.out)
    print(f"evaluated {summary['n_instances']} instances ({summary['n_failed']} failed)")
    return 0


def cmd_ablate(args) -> int:
    cfg = ExperimentConfig.load(args.config, seed=args.seed)
    doc = run_ablation(cfg, args.out)
    rot = doc["sign_tests"]["rotation"]
    print(f"rotation: reformulated {rot['mean_reformulated']:.3f} vs vanilla {rot['mean_vanilla']:.3f} deg, "
          f"sign test p={rot['p_value']:.3g}")
    return 0


COMMANDS = {"generate": cmd_generate, "corrupt": cmd_corrupt, "sample": cmd_sample, "eval": cmd_eval,
            "ablate": cmd_ablate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"artdiff: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ArtDiffError, ValueError) as exc:
        print(f"artdiff: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
