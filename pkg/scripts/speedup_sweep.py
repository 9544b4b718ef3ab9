"""Predicted vs. measured compute reduction of anchor-shared subscenes.

    python scripts/speedup_sweep.py --frames 64 --tokens 64 --workers 4
"""
import argparse

from svp.anchor_schedule import balanced_plan
from svp.cost_model import idealized_cost, plan_cost
from svp.mock_backbone import mock_global_attention, run_plan


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=64)
    ap.add_argument("--tokens", type=int, default=64)
    ap.add_argument("--channels", type=int, default=16)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--k", type=int, nargs="+", default=[1, 2, 4, 8])
    args = ap.parse_args()

    runs = [mock_global_attention(args.frames, args.tokens, args.channels) for _ in range(2)]
    base_t, base_ops, _ = min(runs)
    print(f"baseline: {base_ops:.3e} ops, {base_t * 1e3:.1f} ms")
    print(f"{'K':>3} {'ideal':>7} {'model':>7} {'ops':>7} {'wall':>7}")
    for k in args.k:
        plan = balanced_plan(args.frames, k)
        model = plan_cost(plan, args.tokens)
        res = run_plan(plan, args.tokens, args.channels, workers=args.workers)
        ideal = idealized_cost(args.frames, k, args.tokens).speedup
        print(f"{k:>3} {ideal:>7.3f} {model.speedup:>7.3f} {base_ops / res.measured_ops:>7.3f} {base_t * 1e3 / res.total_ms:>7.3f}")


if __name__ == "__main__":
    main()
