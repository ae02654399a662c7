import json
import subprocess
import sys

import pytest

from artdiff.cli import main


@pytest.fixture
def dataset(tmp_path):
    assert main(["generate", "--template", "laptop", "--count", "6", "--seed", "1", "--out", str(tmp_path / "data")]) == 0
    return tmp_path / "data" / "dataset.jsonl"


def config(tmp_path, dataset, **extra):
    cfg = {"dataset": str(dataset), "seed": 4, "schedule": {"T": 15}}
    cfg.update(extra)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_generate_outputs(dataset):
    assert len(dataset.read_text().splitlines()) == 6
    assert (dataset.parent / "gt.csv").exists()


def test_generate_bucket_syntax(tmp_path):
    assert main(["generate", "--count", "2", "--buckets", "0.2:0.3", "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "dataset.jsonl").read_text().splitlines()[0])
    assert 0.2 < rec["visibility"] <= 0.3


def test_bad_buckets_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["generate", "--buckets", "0.2-0.3", "--out", str(tmp_path)])
    assert info.value.code == 2


def test_corrupt(tmp_path, dataset):
    out = tmp_path / "c"
    assert main(["corrupt", "--dataset", str(dataset), "--T", "10", "--seed", "2", "--out", str(out)]) == 0
    lines = [json.loads(x) for x in (out / "trajectory.jsonl").read_text().splitlines()]
    assert [r["t"] for r in lines] == list(range(11))
    assert None not in lines[0]["tokens"]


def test_corrupt_bad_index(tmp_path, dataset):
    assert main(["corrupt", "--dataset", str(dataset), "--index", "99", "--out", str(tmp_path)]) == 2


def test_sample(tmp_path, dataset):
    out = tmp_path / "s"
    assert main(["sample", "--config", str(config(tmp_path, dataset)), "--out", str(out)]) == 0
    result = json.loads((out / "sample.json").read_text())
    assert result["tokens"] == result["gt_tokens"]
    assert len((out / "trace.jsonl").read_text().splitlines()) == 16


def test_eval_and_ablate(tmp_path, dataset):
    cfg = config(tmp_path, dataset, denoiser={"type": "oracle", "epsilon": 0.1})
    assert main(["eval", "--config", str(cfg), "--out", str(tmp_path / "e")]) == 0
    assert (tmp_path / "e" / "results.csv").exists()
    assert main(["ablate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert (tmp_path / "a" / "ablation.json").exists()


def test_config_errors_exit_2(tmp_path, dataset):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dataset": str(dataset)}))
    assert main(["eval", "--config", str(bad)]) == 2
    assert main(["eval", "--config", str(tmp_path / "missing.json")]) == 2


def test_runtime_error_exit_1(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{}\n")
    assert main(["corrupt", "--dataset", str(bad), "--out", str(tmp_path)]) == 1


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "artdiff", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "generate" in r.stdout
