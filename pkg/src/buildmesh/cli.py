"""Command-line interface.

One entry point with subcommands covering the whole pipeline: corpus
generation, tokenization, training, reconstruction, evaluation, validity
checking, and the gradient check. Every command writes a run manifest
(command, resolved config, config hash, seed, paths, timestamps, outcome)
so runs are self-describing.

Exit codes: 0 success, 1 domain failure (e.g. reconstruction exhausted,
failed validity check), 2 usage or I/O error.
"""

import argparse
import csv
import datetime
import glob
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import codec, metrics
from .errors import BuildmeshError
from .geometry import PolyMesh, canonicalize, normalize, quantize, sample_surface
from .meshio import read_cloud, read_mesh, write_cloud, write_mesh
from .nn import (
    FaceModule,
    PointCloudEncoder,
    VertexModule,
    load_checkpoint,
    read_checkpoint,
    run_miniature_check,
)
from .nn.config import ModelConfig
from .pipeline import SamplerConfig, reconstruct_mesh
from .sampling import NeuralSampler
from .synthetic import ScanSpec, generate_corpus
from .training import TrainConfig, prepare_sample, train_module
from .validity import (
    COVERAGE_OK,
    check_floor_coverage,
    check_floor_wall_connectivity,
    check_no_diagonal_wall_edges,
)

GRADCHECK_TOLERANCE = 1e-5


class UsageError(Exception):
    """Bad arguments, unreadable input, or mismatched file pairing."""


# --------------------------------------------------------------------------
# run manifests


@dataclass
class RunManifest:
    command: str
    config: dict
    config_hash: str
    seed: object
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    started: str = ""
    finished: str = ""
    outcome: dict = field(default_factory=dict)


def _config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _start_manifest(command, config, seed, inputs):
    return RunManifest(
        command=command,
        config=config,
        config_hash=_config_hash(config),
        seed=seed,
        inputs=[str(p) for p in inputs],
        started=_now(),
    )


def _finish_manifest(manifest, path, outputs, outcome):
    manifest.outputs = [str(p) for p in outputs]
    manifest.finished = _now()
    manifest.outcome = outcome
    _write_json(path, asdict(manifest))


def _manifest_path(args):
    if getattr(args, "manifest", None):
        return args.manifest
    out = getattr(args, "out", None)
    if out and os.path.isdir(out):
        return os.path.join(out, "run_manifest.json")
    if out:
        return os.path.join(os.path.dirname(out) or ".", "run_manifest.json")
    return "run_manifest.json"


# --------------------------------------------------------------------------
# small I/O helpers


def _write_json(path, payload):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _load_json_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            loaded = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(loaded, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return loaded


def _build_dataclass(cls, overrides, what):
    try:
        return cls(**overrides)
    except TypeError as exc:
        raise UsageError(f"bad {what} config: {exc}") from exc


def _read_pair(mesh_path, cloud_path):
    try:
        return read_mesh(mesh_path), read_cloud(cloud_path)
    except OSError as exc:
        raise UsageError(str(exc)) from exc


def _corpus_pairs(data_dir):
    """Paired (mesh path, cloud path) lists from a corpus directory."""
    if not os.path.isdir(data_dir):
        raise UsageError(f"not a directory: {data_dir}")
    meshes = sorted(glob.glob(os.path.join(data_dir, "*.mesh")))
    clouds = sorted(glob.glob(os.path.join(data_dir, "*.cloud")))
    mesh_stems = [os.path.splitext(os.path.basename(p))[0] for p in meshes]
    cloud_stems = [os.path.splitext(os.path.basename(p))[0] for p in clouds]
    if mesh_stems != cloud_stems:
        raise UsageError(
            f"mesh/cloud files in {data_dir} do not pair one-to-one"
        )
    if not meshes:
        raise UsageError(f"no mesh/cloud pairs in {data_dir}")
    return list(zip(meshes, clouds))


def _load_models(checkpoint_dir):
    """Build encoder + both modules from vertex.ckpt and face.ckpt."""
    vertex_path = os.path.join(checkpoint_dir, "vertex.ckpt")
    face_path = os.path.join(checkpoint_dir, "face.ckpt")
    for path in (vertex_path, face_path):
        if not os.path.isfile(path):
            raise UsageError(f"missing checkpoint {path}")
    config, _ = read_checkpoint(vertex_path)
    encoder = PointCloudEncoder(config)
    vertex_module = VertexModule(config)
    face_module = FaceModule(config)
    load_checkpoint(vertex_path, {"encoder": encoder, "vertex": vertex_module})
    load_checkpoint(face_path, {"face": face_module})
    for module in (encoder, vertex_module, face_module):
        module.eval()
    return config, encoder, vertex_module, face_module


def _map_jobs(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_corpus(args):
    config = _load_json_config(args.config)
    scan = _build_dataclass(ScanSpec, config.get("scan", {}), "scan")
    resolved = {"scan": scan.to_dict(), "n": args.n}
    manifest = _start_manifest("gen-corpus", resolved, args.seed, [])
    generate_corpus(args.out, args.n, args.seed, scan)
    outputs = sorted(glob.glob(os.path.join(args.out, "building_*")))
    _finish_manifest(
        manifest, _manifest_path(args), outputs, {"buildings": args.n}
    )
    return 0


def cmd_tokenize(args):
    mesh, cloud = _read_pair(args.mesh, args.cloud)
    manifest = _start_manifest("tokenize", {}, args.seed, [args.mesh, args.cloud])
    _, qmesh, vertex_tokens, face_tokens = prepare_sample(mesh, cloud)
    payload = {
        "vertex_tokens": [int(t) for t in vertex_tokens],
        "face_tokens": [int(t) for t in face_tokens],
        "vertex_count": qmesh.vertices.shape[0],
        "face_count": len(qmesh.faces),
    }
    outputs = []
    if args.out:
        _write_json(args.out, payload)
        outputs.append(args.out)
    else:
        json.dump(payload, sys.stdout)
        sys.stdout.write("\n")
    _finish_manifest(
        manifest, _manifest_path(args), outputs,
        {"vertex_tokens": len(vertex_tokens), "face_tokens": len(face_tokens)},
    )
    return 0


def cmd_train(args):
    config = _load_json_config(args.config)
    model_cfg = _build_dataclass(ModelConfig, config.get("model", {}), "model")
    train_overrides = dict(config.get("train", {}))
    if args.seed is not None:
        train_overrides["seed"] = args.seed
    train_cfg = _build_dataclass(TrainConfig, train_overrides, "train")
    pairs = _corpus_pairs(args.data)
    dataset = [_read_pair(m, c) for m, c in pairs]
    resolved = {"model": model_cfg.to_dict(), "train": train_cfg.to_dict()}
    manifest = _start_manifest(
        "train", resolved, train_cfg.seed, [p for pair in pairs for p in pair]
    )
    os.makedirs(args.out, exist_ok=True)
    _, history = train_module(
        args.module, dataset, model_cfg, train_cfg,
        out_dir=args.out, steps=args.steps,
    )
    ckpt = "vertex.ckpt" if args.module == "vertex" else "face.ckpt"
    outputs = [
        os.path.join(args.out, ckpt),
        os.path.join(args.out, f"{args.module}_log.csv"),
    ]
    _finish_manifest(
        manifest, _manifest_path(args), outputs,
        {"steps": len(history), "final_loss": history[-1]},
    )
    return 0


def _reconstruct_one(task):
    """Reconstruct one cloud file; returns its report dict."""
    cloud_path, checkpoint_dir, out_dir, sampler_kwargs, greedy, seed_entropy = task
    import torch

    torch.set_num_threads(1)
    cfg = SamplerConfig(**sampler_kwargs)
    _, encoder, vertex_module, face_module = _load_models(checkpoint_dir)
    sampler = NeuralSampler(
        encoder, vertex_module, face_module,
        top_p=cfg.top_p, redistribution=cfg.redistribution, greedy=greedy,
    )
    cloud = read_cloud(cloud_path)
    rng = np.random.default_rng(np.random.SeedSequence(seed_entropy))
    outcome = reconstruct_mesh(cloud, sampler, cfg, rng)
    stem = os.path.splitext(os.path.basename(cloud_path))[0]
    # reports name files by basename so reruns in different directories
    # stay byte-identical; full paths live in the run manifest
    report = {
        "cloud": os.path.basename(cloud_path),
        "seed": seed_entropy,
        "ok": outcome.ok,
        "failure": outcome.failure,
        "attempts": list(outcome.attempts),
        "vertex_rollouts": outcome.vertex_rollouts,
        "face_rollouts": outcome.face_rollouts,
        "mesh": None,
    }
    if outcome.ok:
        mesh_path = os.path.join(out_dir, f"{stem}.mesh")
        tmp = f"{mesh_path}.tmp"
        write_mesh(tmp, outcome.mesh)
        os.replace(tmp, mesh_path)
        report["mesh"] = os.path.basename(mesh_path)
    _write_json(os.path.join(out_dir, f"{stem}.report.json"), report)
    return report


def cmd_reconstruct(args):
    config = _load_json_config(args.config)
    greedy = bool(config.pop("greedy", False))
    cfg = _build_dataclass(SamplerConfig, config, "sampler")
    if os.path.isdir(args.cloud):
        clouds = sorted(glob.glob(os.path.join(args.cloud, "*.cloud")))
        if not clouds:
            raise UsageError(f"no .cloud files in {args.cloud}")
    elif os.path.isfile(args.cloud):
        clouds = [args.cloud]
    else:
        raise UsageError(f"no such cloud file or directory: {args.cloud}")
    resolved = dict(asdict(cfg), greedy=greedy)
    manifest = _start_manifest("reconstruct", resolved, args.seed, clouds)
    os.makedirs(args.out, exist_ok=True)
    tasks = [
        (path, args.checkpoints, args.out, asdict(cfg), greedy, [args.seed, i])
        for i, path in enumerate(clouds)
    ]
    reports = _map_jobs(_reconstruct_one, tasks, args.jobs)
    succeeded = sum(r["ok"] for r in reports)
    outputs = sorted(
        glob.glob(os.path.join(args.out, "*.mesh"))
        + glob.glob(os.path.join(args.out, "*.report.json"))
    )
    _finish_manifest(
        manifest, _manifest_path(args), outputs,
        {"clouds": len(clouds), "succeeded": succeeded},
    )
    if succeeded < len(clouds):
        for report in reports:
            if not report["ok"]:
                print(
                    f"reconstruction failed for {report['cloud']}: "
                    f"{report['failure']}",
                    file=sys.stderr,
                )
        return 1
    return 0


def _evaluate_one(task):
    """Metrics for one ground-truth / predicted mesh pair."""
    name, gt_path, pred_path, thresholds, samples, seed = task
    gt = read_mesh(gt_path)
    pred = read_mesh(pred_path)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    gt_pts = sample_surface(gt, samples, rng)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    pred_pts = sample_surface(pred, samples, rng)
    row = {
        "name": name,
        "chamfer": metrics.chamfer(gt_pts, pred_pts),
        "hausdorff": metrics.hausdorff(gt_pts, pred_pts),
        "mde": metrics.mde(gt, pred, n=samples, seed=seed),
    }
    for key, value in metrics.count_errors(gt, pred).items():
        row[f"err_{key}"] = value
    for t in thresholds:
        row[f"vertex_f1@{t:g}"] = metrics.vertex_prf(
            gt.vertices, pred.vertices, t
        ).f1
        row[f"edge_f1@{t:g}"] = metrics.edge_prf(gt, pred, t).f1
    return row


def cmd_evaluate(args):
    try:
        thresholds = [float(t) for t in args.sweep.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --sweep value: {args.sweep}") from exc
    if not thresholds:
        raise UsageError("--sweep needs at least one threshold")
    gt_meshes = sorted(glob.glob(os.path.join(args.gt, "*.mesh")))
    if not gt_meshes:
        raise UsageError(f"no .mesh files in {args.gt}")
    pairs = []
    for gt_path in gt_meshes:
        name = os.path.splitext(os.path.basename(gt_path))[0]
        pred_path = os.path.join(args.pred, os.path.basename(gt_path))
        if not os.path.isfile(pred_path):
            raise UsageError(f"no predicted mesh for {name} in {args.pred}")
        pairs.append((name, gt_path, pred_path))
    resolved = {"sweep": thresholds, "samples": args.samples}
    manifest = _start_manifest(
        "evaluate", resolved, args.seed,
        [p for _, g, r in pairs for p in (g, r)],
    )
    os.makedirs(args.out, exist_ok=True)
    tasks = [
        (name, g, p, thresholds, args.samples, args.seed)
        for name, g, p in pairs
    ]
    rows = _map_jobs(_evaluate_one, tasks, args.jobs)

    csv_path = os.path.join(args.out, "per_building.csv")
    tmp = f"{csv_path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    os.replace(tmp, csv_path)

    summary = {
        "buildings": len(rows),
        "mean": {
            key: float(np.mean([row[key] for row in rows]))
            for key in rows[0]
            if key != "name"
        },
        "sweep": {
            f"{t:g}": {
                "vertex_f1": float(np.mean([r[f"vertex_f1@{t:g}"] for r in rows])),
                "edge_f1": float(np.mean([r[f"edge_f1@{t:g}"] for r in rows])),
            }
            for t in thresholds
        },
    }
    summary_path = os.path.join(args.out, "summary.json")
    _write_json(summary_path, summary)
    _finish_manifest(
        manifest, _manifest_path(args), [csv_path, summary_path],
        {"buildings": len(rows), "mean_chamfer": summary["mean"]["chamfer"]},
    )
    return 0


def cmd_check(args):
    mesh, cloud = _read_pair(args.mesh, args.cloud)
    manifest = _start_manifest("check", {}, args.seed, [args.mesh, args.cloud])
    cloud_n, transform = normalize(cloud)
    mesh_n = PolyMesh(vertices=transform.apply(mesh.vertices), faces=mesh.faces)
    qmesh = canonicalize(quantize(mesh_n, cloud_n, transform))
    coverage = check_floor_coverage(qmesh, cloud_n)
    report = {
        "floor_coverage": coverage,
        "floor_wall_connectivity": check_floor_wall_connectivity(qmesh),
        "no_diagonal_wall_edges": check_no_diagonal_wall_edges(qmesh),
    }
    report["valid"] = (
        coverage == COVERAGE_OK
        and report["floor_wall_connectivity"]
        and report["no_diagonal_wall_edges"]
    )
    json.dump(report, sys.stdout)
    sys.stdout.write("\n")
    _finish_manifest(manifest, _manifest_path(args), [], report)
    return 0 if report["valid"] else 1


def cmd_grad_check(args):
    import torch

    torch.set_num_threads(1)
    resolved = {"samples": args.samples, "epsilon": args.epsilon}
    manifest = _start_manifest("grad-check", resolved, args.seed, [])
    error = run_miniature_check(
        seed=args.seed, samples=args.samples, epsilon=args.epsilon
    )
    passed = error < GRADCHECK_TOLERANCE
    report = {
        "max_relative_error": error,
        "tolerance": GRADCHECK_TOLERANCE,
        "passed": passed,
    }
    json.dump(report, sys.stdout)
    sys.stdout.write("\n")
    _finish_manifest(manifest, _manifest_path(args), [], report)
    return 0 if passed else 1


# --------------------------------------------------------------------------
# argument parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="buildmesh",
        description="Polygonal building meshes from 3D point clouds: "
        "corpus generation, training, reconstruction, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def common(p, out_help=None):
        p.add_argument("--seed", type=int, default=0, help="random seed")
        p.add_argument(
            "--manifest", metavar="FILE",
            help="run manifest path (default: run_manifest.json in the "
            "output directory)",
        )
        if out_help:
            p.add_argument("--out", required=True, metavar="PATH", help=out_help)

    p = sub.add_parser(
        "gen-corpus", help="generate a synthetic mesh/cloud corpus"
    )
    p.add_argument("--n", type=int, required=True, help="number of buildings")
    p.add_argument("--config", metavar="FILE", help="JSON scan config")
    common(p, out_help="corpus output directory")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser(
        "tokenize", help="print the token sequences of one mesh/cloud pair"
    )
    p.add_argument("--mesh", required=True, metavar="FILE", help="mesh file")
    p.add_argument("--cloud", required=True, metavar="FILE", help="cloud file")
    p.add_argument("--out", metavar="FILE", help="JSON output (default: stdout)")
    common(p)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("train", help="train the vertex or face module")
    p.add_argument(
        "--module", required=True, choices=("vertex", "face"),
        help="which module to train",
    )
    p.add_argument(
        "--data", required=True, metavar="DIR", help="corpus directory"
    )
    p.add_argument(
        "--config", metavar="FILE",
        help='JSON config with "model" and "train" sections',
    )
    p.add_argument(
        "--steps", type=int, metavar="N",
        help="step count override (default: the schedule's total)",
    )
    common(p, out_help="checkpoint and log output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser(
        "reconstruct", help="reconstruct meshes from point clouds"
    )
    p.add_argument(
        "--cloud", required=True, metavar="PATH",
        help="cloud file or directory of .cloud files",
    )
    p.add_argument(
        "--checkpoints", required=True, metavar="DIR",
        help="directory holding vertex.ckpt and face.ckpt",
    )
    p.add_argument("--config", metavar="FILE", help="JSON sampler config")
    p.add_argument(
        "--jobs", type=int, default=1, metavar="N",
        help="per-building parallelism",
    )
    common(p, out_help="output directory for meshes and reports")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser(
        "evaluate", help="score predicted meshes against ground truth"
    )
    p.add_argument(
        "--gt", required=True, metavar="DIR", help="ground-truth mesh directory"
    )
    p.add_argument(
        "--pred", required=True, metavar="DIR", help="predicted mesh directory"
    )
    p.add_argument(
        "--sweep", default="1.0", metavar="T1,T2,...",
        help="matching thresholds in meters for the F1 sweep",
    )
    p.add_argument(
        "--samples", type=int, default=10000, metavar="N",
        help="surface samples per mesh",
    )
    p.add_argument(
        "--jobs", type=int, default=1, metavar="N",
        help="per-building parallelism",
    )
    common(p, out_help="output directory for the summary and CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "check", help="run the validity checks on an existing mesh"
    )
    p.add_argument("--mesh", required=True, metavar="FILE", help="mesh file")
    p.add_argument("--cloud", required=True, metavar="FILE", help="cloud file")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser(
        "grad-check",
        help="finite-difference gradient check on a miniature model",
    )
    p.add_argument(
        "--samples", type=int, default=200, metavar="N",
        help="sampled parameter entries",
    )
    p.add_argument(
        "--epsilon", type=float, default=1e-4, help="finite-difference step"
    )
    common(p)
    p.set_defaults(func=cmd_grad_check)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BuildmeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
