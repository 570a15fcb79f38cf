import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import torch

from buildmesh.cli import main
from buildmesh.meshio import read_mesh, write_cloud, write_mesh
from buildmesh.synthetic import BuildingSpec, ScanSpec, generate_building, simulate_scan

torch.set_num_threads(1)

HELP_DIR = Path(__file__).parent / "data" / "cli_help"

TINY_CONFIG = {
    "model": {
        "width": 16, "heads": 2, "depth": 1, "ff_hidden": 32, "dropout": 0.0,
        "fine_resolution": 16, "coarse_resolution": 4,
        "encoder_channels": [8, 16, 16],
    },
    "train": {
        "batch_size": 2, "warmup_steps": 2, "total_steps": 30,
        "augment_scale": False, "augment_rotate": False,
        "augment_jitter": False, "log_every": 2, "checkpoint_every": 5,
        "seed": 0,
    },
}


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert run_cli("gen-corpus", "--n", "3", "--seed", "5", "--out", str(out)) == 0
    return out


@pytest.fixture(scope="module")
def trained(tmp_path_factory, corpus):
    out = tmp_path_factory.mktemp("run")
    cfg = out / "config.json"
    cfg.write_text(json.dumps(TINY_CONFIG))
    for module in ("vertex", "face"):
        code = run_cli(
            "train", "--module", module, "--data", str(corpus),
            "--out", str(out), "--config", str(cfg), "--steps", "3",
        )
        assert code == 0
    return out


class TestHelpGolden:
    CASES = [
        ("main", []),
        ("gen-corpus", ["gen-corpus"]),
        ("tokenize", ["tokenize"]),
        ("train", ["train"]),
        ("reconstruct", ["reconstruct"]),
        ("evaluate", ["evaluate"]),
        ("check", ["check"]),
        ("grad-check", ["grad-check"]),
    ]

    @pytest.mark.parametrize("name,argv", CASES, ids=[c[0] for c in CASES])
    def test_help_matches_golden(self, name, argv):
        env = dict(os.environ, COLUMNS="80")
        proc = subprocess.run(
            [sys.executable, "-m", "buildmesh.cli", *argv, "--help"],
            capture_output=True, text=True, env=env,
        )
        assert proc.returncode == 0
        assert proc.stdout == (HELP_DIR / f"{name}.txt").read_text()

    def test_every_flag_listed(self):
        # each subcommand's golden help must mention all of its flags
        flags = {
            "gen-corpus": ["--n", "--config", "--seed", "--manifest", "--out"],
            "train": ["--module", "--data", "--config", "--steps", "--seed",
                      "--manifest", "--out"],
            "reconstruct": ["--cloud", "--checkpoints", "--config", "--jobs",
                            "--seed", "--manifest", "--out"],
            "evaluate": ["--gt", "--pred", "--sweep", "--samples", "--jobs",
                         "--seed", "--manifest", "--out"],
            "check": ["--mesh", "--cloud", "--seed", "--manifest"],
            "grad-check": ["--samples", "--epsilon", "--seed", "--manifest"],
        }
        for name, expected in flags.items():
            text = (HELP_DIR / f"{name}.txt").read_text()
            for flag in expected:
                assert flag in text, (name, flag)


class TestUsageErrors:
    def test_unknown_flag_exits_2(self, capsys):
        assert run_cli("gen-corpus", "--bogus") == 2

    def test_no_command_exits_2(self):
        assert run_cli() == 2

    def test_missing_input_file(self, tmp_path, capsys):
        code = run_cli(
            "tokenize", "--mesh", str(tmp_path / "nope.mesh"),
            "--cloud", str(tmp_path / "nope.cloud"),
        )
        assert code == 2

    def test_bad_config_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = run_cli(
            "gen-corpus", "--n", "1", "--out", str(tmp_path / "o"),
            "--config", str(bad),
        )
        assert code == 2


class TestGenCorpus:
    def test_outputs_and_manifests(self, corpus):
        names = sorted(p.name for p in corpus.iterdir())
        assert "building_00000.mesh" in names
        assert "building_00002.cloud" in names
        assert "manifest.json" in names
        run = json.loads((corpus / "run_manifest.json").read_text())
        assert run["command"] == "gen-corpus"
        assert run["seed"] == 5
        assert run["outcome"] == {"buildings": 3}
        assert len(run["config_hash"]) == 64
        assert run["config"]["scan"]["roof_density"] == ScanSpec().roof_density

    def test_seed_reproducible(self, tmp_path, corpus):
        again = tmp_path / "again"
        assert run_cli("gen-corpus", "--n", "3", "--seed", "5",
                       "--out", str(again)) == 0
        for name in ("building_00001.mesh", "building_00001.cloud"):
            assert (again / name).read_bytes() == (corpus / name).read_bytes()


class TestTokenize:
    def test_stdout_json(self, corpus, capsys):
        code = run_cli(
            "tokenize", "--mesh", str(corpus / "building_00000.mesh"),
            "--cloud", str(corpus / "building_00000.cloud"),
            "--manifest", str(corpus / "tok_manifest.json"),
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["vertex_tokens"][-1] == 256
        assert payload["face_tokens"][-1] == 0
        assert len(payload["vertex_tokens"]) == 3 * payload["vertex_count"] + 1

    def test_file_output(self, corpus, tmp_path):
        out = tmp_path / "tokens.json"
        code = run_cli(
            "tokenize", "--mesh", str(corpus / "building_00000.mesh"),
            "--cloud", str(corpus / "building_00000.cloud"), "--out", str(out),
        )
        assert code == 0
        assert json.loads(out.read_text())["vertex_count"] >= 4


class TestTrain:
    def test_artifacts(self, trained):
        assert (trained / "vertex.ckpt").exists()
        assert (trained / "face.ckpt").exists()
        log = (trained / "vertex_log.csv").read_text().splitlines()
        assert log[0] == "step,lr,loss"
        run = json.loads((trained / "run_manifest.json").read_text())
        assert run["command"] == "train"
        assert run["outcome"]["steps"] == 3
        assert run["config"]["model"]["width"] == 16
        # full-default echo: fields not in the file are still present
        assert run["config"]["train"]["max_grad_norm"] == 1.0

    def test_unpaired_corpus_exits_2(self, tmp_path, capsys):
        mesh = generate_building(BuildingSpec())
        write_mesh(tmp_path / "a.mesh", mesh)
        code = run_cli("train", "--module", "vertex", "--data", str(tmp_path),
                       "--out", str(tmp_path / "o"))
        assert code == 2


class TestReconstruct:
    def test_exhausted_exit_1(self, corpus, trained, tmp_path, capsys):
        out = tmp_path / "recon"
        code = run_cli(
            "reconstruct", "--cloud", str(corpus / "building_00000.cloud"),
            "--checkpoints", str(trained), "--out", str(out), "--seed", "3",
        )
        report = json.loads((out / "building_00000.report.json").read_text())
        if code == 1:
            assert report["failure"] == "exhausted"
            assert not report["ok"]
            assert "exhausted" in capsys.readouterr().err
        else:
            assert code == 0 and report["ok"]
            assert (out / "building_00000.mesh").exists()
        assert report["vertex_rollouts"] >= 1

    def test_seed_reproducible(self, corpus, trained, tmp_path):
        reports = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            run_cli(
                "reconstruct", "--cloud", str(corpus / "building_00000.cloud"),
                "--checkpoints", str(trained), "--out", str(out), "--seed", "9",
            )
            data = json.loads((out / "building_00000.report.json").read_text())
            reports.append((data["attempts"], data["vertex_rollouts"]))
        assert reports[0] == reports[1]

    def test_missing_checkpoints_exit_2(self, corpus, tmp_path, capsys):
        code = run_cli(
            "reconstruct", "--cloud", str(corpus / "building_00000.cloud"),
            "--checkpoints", str(tmp_path), "--out", str(tmp_path / "o"),
        )
        assert code == 2


class TestEvaluate:
    def test_self_evaluation(self, corpus, tmp_path):
        out = tmp_path / "eval"
        code = run_cli(
            "evaluate", "--gt", str(corpus), "--pred", str(corpus),
            "--out", str(out), "--sweep", "0.5,1.0", "--samples", "200",
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["buildings"] == 3
        # identical meshes: perfect matching and zero one-sided distance
        assert summary["sweep"]["0.5"]["vertex_f1"] == 1.0
        assert summary["sweep"]["1"]["edge_f1"] == 1.0
        assert summary["mean"]["mde"] < 1e-9
        assert summary["mean"]["err_face_count"] == 0.0
        csv_lines = (out / "per_building.csv").read_text().splitlines()
        assert len(csv_lines) == 4
        assert csv_lines[0].startswith("name,chamfer,hausdorff,mde")

    def test_mismatched_pairing_exits_2(self, corpus, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = run_cli("evaluate", "--gt", str(corpus), "--pred", str(empty),
                       "--out", str(tmp_path / "o"))
        assert code == 2

    def test_bad_sweep_exits_2(self, corpus, tmp_path, capsys):
        code = run_cli("evaluate", "--gt", str(corpus), "--pred", str(corpus),
                       "--out", str(tmp_path / "o"), "--sweep", "abc")
        assert code == 2


class TestCheck:
    def test_valid_building(self, corpus, tmp_path, capsys):
        code = run_cli(
            "check", "--mesh", str(corpus / "building_00000.mesh"),
            "--cloud", str(corpus / "building_00000.cloud"),
            "--manifest", str(tmp_path / "m.json"),
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["valid"]
        assert report["floor_coverage"] == "ok"

    def test_floorless_mesh_fails(self, tmp_path, capsys):
        mesh = generate_building(BuildingSpec())
        cloud = simulate_scan(mesh, ScanSpec(), np.random.default_rng(0))
        # drop the floor face (the one whose vertices all sit at z = 0)
        floorless = [
            f for f in mesh.faces
            if not all(mesh.vertices[i][2] == 0.0 for i in f)
        ]
        from buildmesh.geometry import PolyMesh

        write_mesh(tmp_path / "m.mesh", PolyMesh(mesh.vertices, tuple(floorless)))
        write_cloud(tmp_path / "c.cloud", cloud)
        code = run_cli(
            "check", "--mesh", str(tmp_path / "m.mesh"),
            "--cloud", str(tmp_path / "c.cloud"),
            "--manifest", str(tmp_path / "m.json"),
        )
        assert code == 1
        report = json.loads(capsys.readouterr().out)
        assert not report["valid"]
        assert report["floor_coverage"] == "missing-floor-faces"


class TestGradCheckCommand:
    def test_passes(self, tmp_path, capsys):
        code = run_cli("grad-check", "--samples", "50",
                       "--manifest", str(tmp_path / "m.json"))
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["passed"]
        assert report["max_relative_error"] < 1e-5
        manifest = json.loads((tmp_path / "m.json").read_text())
        assert manifest["command"] == "grad-check"
        assert manifest["outcome"]["passed"] is True


class TestMeshOutputs:
    def test_corpus_meshes_parse(self, corpus):
        mesh = read_mesh(corpus / "building_00000.mesh")
        assert mesh.vertex_count >= 8
        assert mesh.face_count >= 6
