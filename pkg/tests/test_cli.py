import json

import numpy as np
import pytest

from svp.cli import main
from svp.descriptor_io import DescriptorSet, TokenStack, load_descriptors, save_descriptors, save_tokens


@pytest.fixture
def scene(tmp_path):
    path = tmp_path / "scene.svgd"
    assert main(["simulate", "--frames", "24", "--clusters", "3", "--seed", "4", "--out", str(path)]) == 0
    return path


def _read(path):
    return json.loads(path.read_text())


def test_simulate_writes_descriptors_and_labels(scene):
    assert load_descriptors(scene).num_frames == 24
    labels = _read(scene.with_name("scene.labels.json"))
    assert labels["labels"] == [i * 3 // 24 for i in range(24)]


def test_partition_deterministic(scene, tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"p{i}.json"
        assert main(["partition", "--input", str(scene), "--out", str(out), "--workers", str(1 + 3 * i)]) == 0
        outs.append((out.read_bytes(), out.with_name(f"p{i}.plan.json").read_bytes()))
    assert outs[0] == outs[1]
    doc = json.loads(outs[0][0])
    for key in ("version", "n", "k", "anchor", "weights", "iterations", "seed", "groups", "loss_trace", "density", "threshold"):
        assert key in doc
    assert doc["weights"]["bal"] == pytest.approx(1 / 24)
    plan = json.loads(outs[0][1])
    assert all(sub["frames"][0] == 0 for sub in plan["subscenes"])


def test_partition_groups_override(scene, tmp_path):
    out = tmp_path / "p.json"
    assert main(["partition", "--input", str(scene), "--out", str(out), "--groups", "4"]) == 0
    assert _read(out)["k"] == 4
    assert len(_read(out)["groups"]) == 4


def test_partition_accepts_tokens(tmp_path):
    data = np.random.default_rng(0).standard_normal((10, 3, 4)).astype(np.float32)
    save_tokens(TokenStack(data), tmp_path / "t.svgt")
    assert main(["partition", "--input", str(tmp_path / "t.svgt"), "--out", str(tmp_path / "p.json"), "--groups", "2"]) == 0


def test_partition_zero_norm_exit_code(tmp_path, capsys):
    d = np.ones((5, 3), dtype=np.float32)
    d[3] = 0
    save_descriptors(DescriptorSet(d), tmp_path / "z.svgd")
    code = main(["partition", "--input", str(tmp_path / "z.svgd"), "--out", str(tmp_path / "p.json")])
    assert code == 3
    assert "[3]" in capsys.readouterr().err


def test_bad_file_and_bad_config_codes(tmp_path, scene):
    (tmp_path / "junk").write_bytes(b"nope" * 10)
    assert main(["analyze", "--input", str(tmp_path / "junk")]) == 3
    assert main(["analyze", "--input", str(scene), "--threshold", "1.5"]) == 2
    assert main(["partition", "--input", str(scene), "--groups", "99"]) == 2
    with pytest.raises(SystemExit) as err:
        main(["partition", "--iters", "x"])
    assert err.value.code == 2


def test_analyze_report(tmp_path):
    ones = np.ones((5, 3), dtype=np.float32)
    save_descriptors(DescriptorSet(ones), tmp_path / "ones.svgd")
    out = tmp_path / "a.json"
    assert main(["analyze", "--input", str(tmp_path / "ones.svgd"), "--out", str(out)]) == 0
    doc = _read(out)
    assert doc["density"] == 4.0 and doc["per_frame_counts"] == [4] * 5 and doc["k"] == 4
    assert set(doc["similarity_stats"]) == {"min", "mean", "max"}

    save_descriptors(DescriptorSet(np.eye(4, dtype=np.float32)), tmp_path / "eye.svgd")
    assert main(["analyze", "--input", str(tmp_path / "eye.svgd"), "--out", str(out)]) == 0
    assert _read(out)["density"] == 0.0 and _read(out)["k"] == 1

    block = np.zeros((6, 2), dtype=np.float32)
    block[:3, 0] = 1
    block[3:, 1] = 1
    save_descriptors(DescriptorSet(block), tmp_path / "block.svgd")
    assert main(["analyze", "--input", str(tmp_path / "block.svgd"), "--out", str(out)]) == 0
    assert _read(out)["density"] == 2.0


def test_bench_model_only(tmp_path):
    out = tmp_path / "c.json"
    assert main(["bench", "--frames", "512", "--groups", "8", "--model-only", "--out", str(out)]) == 0
    doc = _read(out)
    assert set(doc) == {"baseline_ops", "partitioned_ops", "overhead_ops", "speedup", "per_subscene_ops", "tokens_per_frame"}
    assert doc["speedup"] == pytest.approx(7.785, abs=1e-3)
    assert main(["bench", "--frames", "100", "--groups", "1", "--model-only", "--out", str(out)]) == 0
    assert _read(out)["speedup"] == pytest.approx(1.0, abs=1e-3)


def test_bench_canonical_deterministic(tmp_path):
    blobs = []
    for workers in (1, 4, 1):
        out = tmp_path / f"b{workers}.json"
        args = ["bench", "--frames", "32", "--groups", "4", "--tokens-per-frame", "32", "--canonical", "--workers", str(workers), "--out", str(out)]
        assert main(args) == 0
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]
    doc = json.loads(blobs[0])
    assert "total_ms" not in doc["bench"]
    assert doc["bench"]["measured_ops"] == sum(doc["bench"]["per_subscene_ops"])


def test_bench_from_plan_file_and_timings(tmp_path, scene):
    assert main(["partition", "--input", str(scene), "--out", str(tmp_path / "p.json")]) == 0
    out = tmp_path / "b.json"
    assert main(["bench", "--input", str(tmp_path / "p.plan.json"), "--tokens-per-frame", "16", "--out", str(out)]) == 0
    bench = _read(out)["bench"]
    for key in ("workers", "total_ms", "per_subscene_ms", "measured_ops", "baseline_ms", "baseline_ops"):
        assert key in bench


def test_bench_guard_exit_code(tmp_path):
    assert main(["bench", "--frames", "200", "--groups", "2", "--out", str(tmp_path / "b.json")]) == 4


def test_workers_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("SVP_WORKERS", "3")
    out = tmp_path / "b.json"
    assert main(["bench", "--frames", "8", "--groups", "2", "--tokens-per-frame", "8", "--out", str(out)]) == 0
    assert _read(out)["bench"]["workers"] == 3


def test_oracle_command(tmp_path):
    out = tmp_path / "o.json"
    assert main(["oracle", "--frames", "8", "--seed", "3", "--out", str(out)]) == 0
    doc = _read(out)
    assert doc["dominance"] is True
    assert doc["oracle"]["loss"] <= doc["optimizer"]["loss"]
    # S(8,2) = 127 minus C(8,6) + C(8,7) = 36 splits over the cap of 5
    assert doc["candidates"] == 91
    assert main(["oracle", "--frames", "16", "--groups", "4", "--out", str(out)]) == 4
