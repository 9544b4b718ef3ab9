"""Command-line entry point: ``svp {partition,analyze,bench,simulate,oracle}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import anchor_schedule, cost_model, descriptor_io, mock_backbone, scene_graph, soft_partition
from .errors import ConfigError, FormatError, SVPError

log = logging.getLogger("svp")

TIMING_FIELDS = ("total_ms", "per_subscene_ms", "baseline_ms", "workers")


def _default_workers():
    env = os.environ.get("SVP_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"SVP_WORKERS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def _write_json(obj, path, echo=False):
    text = json.dumps(obj, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
        log.info("wrote %s", path)
    if echo or not path:
        sys.stdout.write(text)


def _weights(args, n):
    return soft_partition.GroupWeights.default(n, coh=args.lambda_coh, bal=args.lambda_bal, sharp=args.lambda_sharp)


def _opt_config(args):
    return soft_partition.OptimizeConfig(iterations=args.iters, step=args.step, seed=args.seed)


def _analyze_graph(args, dset):
    graph = scene_graph.similarity_matrix(dset, workers=args.workers)
    est = scene_graph.density(graph, args.threshold)
    k = scene_graph.group_count(est, args.k_max, graph.num_frames, args.groups)
    return graph, est, k


def _run_partition(args, dset):
    graph, est, k = _analyze_graph(args, dset)
    n = graph.num_frames
    if not 0 <= args.anchor < n:
        raise ConfigError(f"--anchor {args.anchor} outside [0, {n})")
    w = _weights(args, n)
    cfg = _opt_config(args)
    cap = soft_partition.default_cap(n, k) if args.cap is None else args.cap
    part, result = soft_partition.partition_frames(graph, k, w, cfg, anchor=args.anchor, cap=cap, refine_steps=not args.no_refine)
    doc = {
        "version": 1,
        "n": n,
        "k": k,
        "anchor": part.anchor,
        "weights": w.as_dict(),
        "iterations": cfg.iterations,
        "step": cfg.step,
        "seed": cfg.seed,
        "cap": cap,
        "refined": not args.no_refine,
        "groups": [list(g) for g in part.groups],
        "loss_trace": [float(x) for x in result.loss_trace],
        "hard_loss": soft_partition.hard_loss(part, graph, w),
        "density": est.density,
        "threshold": est.threshold,
    }
    return part, doc


def cmd_partition(args):
    dset = descriptor_io.load_any(args.input)
    part, doc = _run_partition(args, dset)
    plan = anchor_schedule.build_plan(part)
    out = args.out or "partition.json"
    plan_out = args.plan_out or str(Path(out).with_suffix("")) + ".plan.json"
    _write_json(doc, out, args.print)
    _write_json(plan.to_json(), plan_out, args.print)


def cmd_analyze(args):
    dset = descriptor_io.load_any(args.input)
    graph, est, k = _analyze_graph(args, dset)
    s = graph.matrix
    off = s[~np.eye(graph.num_frames, dtype=bool)] if graph.num_frames > 1 else s.ravel()
    doc = {
        "n": graph.num_frames,
        "threshold": est.threshold,
        "density": est.density,
        "k": k,
        "per_frame_counts": est.per_frame_counts.tolist(),
        "similarity_stats": {"min": float(off.min()), "mean": float(off.mean()), "max": float(off.max())},
    }
    _write_json(doc, args.out, args.print)


def _load_plan(args):
    if args.input:
        path = Path(args.input)
        with open(path, "rb") as fh:
            head = fh.read(4)
        if head in (descriptor_io.DESCRIPTORS_MAGIC, descriptor_io.TOKENS_MAGIC):
            part, _ = _run_partition(args, descriptor_io.load_any(path))
            return anchor_schedule.build_plan(part)
        try:
            plan = anchor_schedule.ExecutionPlan.from_json(json.loads(path.read_text()))
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"{path}: not a plan JSON or descriptor file ({exc})", field="plan") from None
    else:
        if args.frames is None:
            raise ConfigError("bench needs --input or --frames")
        k = args.groups or 1
        if not 1 <= k <= args.frames:
            raise ConfigError(f"--groups {k} outside [1, {args.frames}]")
        plan = anchor_schedule.balanced_plan(args.frames, k, anchor=args.anchor)
    problems = anchor_schedule.validate_plan(plan)
    if problems:
        raise FormatError("invalid plan: " + "; ".join(problems), field="plan")
    return plan


def cmd_bench(args):
    plan = _load_plan(args)
    report = cost_model.plan_cost(plan, args.tokens_per_frame)
    if args.model_only:
        _write_json(report.to_json(), args.out, args.print)
        return
    res = mock_backbone.run_plan(plan, args.tokens_per_frame, args.channels, args.workers, seed=args.seed, max_tokens=args.max_tokens)
    base_s, base_ops, base_sum = mock_backbone.mock_global_attention(
        plan.n, args.tokens_per_frame, args.channels, seed=args.seed, max_tokens=args.max_tokens
    )
    bench = {
        "workers": res.workers,
        "total_ms": res.total_ms,
        "per_subscene_ms": res.per_subscene_ms,
        "measured_ops": res.measured_ops,
        "per_subscene_ops": res.per_subscene_ops,
        "checksum": res.checksum,
        "baseline_ms": base_s * 1e3,
        "baseline_ops": base_ops,
        "baseline_checksum": base_sum,
        "measured_speedup_ops": base_ops / res.measured_ops,
    }
    if args.canonical:
        for key in TIMING_FIELDS:
            bench.pop(key)
    _write_json({"plan": plan.to_json(), "cost_report": report.to_json(), "bench": bench}, args.out, args.print)


def cmd_simulate(args):
    scene = mock_backbone.synth_scene(args.frames, args.clusters, args.noise, args.seed, channels=args.channels)
    out = Path(args.out or "scene.svgd")
    descriptor_io.save_descriptors(scene.descriptors, out)
    log.info("wrote %s", out)
    labels_out = args.labels_out or str(out.with_suffix("")) + ".labels.json"
    _write_json(scene.labels_json(), labels_out, args.print)


def cmd_oracle(args):
    if args.input:
        dset = descriptor_io.load_any(args.input)
    else:
        dset = mock_backbone.synth_scene(args.frames or 8, args.clusters, args.noise, args.seed, channels=args.channels).descriptors
    graph = scene_graph.similarity_matrix(dset)
    n = graph.num_frames
    k = args.groups or 2
    if not 1 <= k <= n:
        raise ConfigError(f"--groups {k} outside [1, {n}]")
    w = _weights(args, n)
    cap = soft_partition.default_cap(n, k) if args.cap is None else args.cap
    best, best_loss = mock_backbone.brute_force_partition(graph, k, w, cap, anchor=args.anchor)
    part, result = soft_partition.partition_frames(graph, k, w, _opt_config(args), anchor=args.anchor, cap=cap, refine_steps=not args.no_refine)
    loss = soft_partition.hard_loss(part, graph, w)
    doc = {
        "n": n,
        "k": k,
        "cap": cap,
        "weights": w.as_dict(),
        "candidates": mock_backbone.count_capped_partitions(n, k, cap),
        "oracle": {"groups": [list(g) for g in best.groups], "loss": best_loss},
        "optimizer": {"groups": [list(g) for g in part.groups], "loss": loss, "loss_trace": [float(x) for x in result.loss_trace]},
        "ratio": loss / best_loss if best_loss > 0 else (1.0 if loss == 0 else float("inf")),
        "dominance": best_loss <= loss,
    }
    _write_json(doc, args.out, args.print)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="SVGD/SVGT file (bench also takes a plan JSON)")
    common.add_argument("--out", help="output path (JSON, or SVGD for simulate)")
    common.add_argument("--print", action="store_true", help="also pretty-print JSON to stdout")
    common.add_argument("--threshold", type=float, default=scene_graph.DEFAULT_THRESHOLD)
    common.add_argument("--k-max", type=int, default=scene_graph.DEFAULT_K_MAX)
    common.add_argument("--groups", type=int, default=None, help="fix the number of subscenes")
    common.add_argument("--lambda-coh", type=float, default=None)
    common.add_argument("--lambda-bal", type=float, default=None, help="default 1/N")
    common.add_argument("--lambda-sharp", type=float, default=None)
    common.add_argument("--iters", type=int, default=10)
    common.add_argument("--step", type=float, default=0.5)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tokens-per-frame", type=int, default=cost_model.DEFAULT_TOKENS_PER_FRAME)
    common.add_argument("--workers", type=int, default=None, help="default $SVP_WORKERS or the CPU count")
    common.add_argument("--anchor", type=int, default=0)
    common.add_argument("--cap", type=int, default=None, help="max frames per group (default ceil(N/K)+1)")
    common.add_argument("--no-refine", action="store_true", help="skip local search after rebalancing")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="svp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", parents=[common], help="partition frames and write partition + plan JSON")
    p.add_argument("--plan-out", help="plan JSON path (default <out>.plan.json)")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("analyze", parents=[common], help="similarity and density report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bench", parents=[common], help="cost model and mock attention benchmark")
    p.add_argument("--frames", type=int, help="build a balanced plan of this many frames (with --groups)")
    p.add_argument("--channels", type=int, default=mock_backbone.DEFAULT_CHANNELS)
    p.add_argument("--max-tokens", type=int, default=mock_backbone.MAX_TOKENS)
    p.add_argument("--model-only", action="store_true", help="emit the cost report only")
    p.add_argument("--canonical", action="store_true", help="drop timing and worker fields for byte comparison")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic clustered scene")
    p.add_argument("--frames", type=int, default=64)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--channels", type=int, default=mock_backbone.DEFAULT_SCENE_CHANNELS)
    p.add_argument("--labels-out", help="labels sidecar path (default <out>.labels.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", parents=[common], help="compare the optimizer with exhaustive search")
    p.add_argument("--frames", type=int, help="synthetic scene size when --input is absent (default 8)")
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--channels", type=int, default=mock_backbone.DEFAULT_SCENE_CHANNELS)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        if args.workers is None:
            args.workers = _default_workers()
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        args.func(args)
    except SVPError as exc:
        print(f"svp {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"svp {args.command}: error: {exc}", file=sys.stderr)
        return FormatError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
