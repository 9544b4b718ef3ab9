"""Compare pipeline partitions with exhaustive search over a grid of scene settings.

    python scripts/oracle_gap.py --seeds 50
"""
import argparse

import numpy as np

from svp.mock_backbone import brute_force_partition, synth_scene
from svp.scene_graph import similarity_matrix
from svp.soft_partition import GroupWeights, OptimizeConfig, default_cap, hard_loss, partition_frames


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--sizes", type=int, nargs="+", default=[6, 8, 10])
    ap.add_argument("--noise", type=float, nargs="+", default=[0.05, 0.1, 0.3])
    args = ap.parse_args()

    print(f"{'n':>3} {'k':>2} {'sigma':>6} {'refined<=1.1':>13} {'raw<=1.1':>9} {'median ratio':>13}")
    for n in args.sizes:
        for k in (2, 3):
            if k == 3 and n > 9:
                continue
            for sigma in args.noise:
                hits = raw_hits = 0
                ratios = []
                for seed in range(args.seeds):
                    s = similarity_matrix(synth_scene(n, 2, sigma, seed=seed).descriptors)
                    w = GroupWeights.default(n)
                    cap = default_cap(n, k)
                    _, best = brute_force_partition(s, k, w, cap)
                    cfg = OptimizeConfig(seed=seed)
                    refined = hard_loss(partition_frames(s, k, w, cfg, cap=cap)[0], s, w)
                    raw = hard_loss(partition_frames(s, k, w, cfg, cap=cap, refine_steps=False)[0], s, w)
                    hits += refined <= 1.1 * best
                    raw_hits += raw <= 1.1 * best
                    ratios.append(refined / best if best > 0 else 1.0)
                print(f"{n:>3} {k:>2} {sigma:>6.2f} {hits:>10}/{args.seeds} {raw_hits:>6}/{args.seeds} {np.median(ratios):>13.3f}")


if __name__ == "__main__":
    main()
