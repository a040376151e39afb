#!/usr/bin/env python3
"""Compare the copula generator's synthetic rows against held-out real data
on the four generation-quality metrics, per protected group.

Usage: python scripts/generator_quality.py [--rows 2000] [--seed 3]
"""
import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from demo_audit import build_dataset

from evtfair.synthgen import (
    detection_auc,
    downstream_f1_loss,
    fit_generator,
    frechet_distance,
    kl_similarity,
    sample,
)
from evtfair.tabular import Dataset, GroupSpec, split


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    ds = build_dataset(args.rows, args.seed)
    group = GroupSpec("group", privileged_value="blue", unprivileged_value="green")
    train, _valid, test = split(ds, (0.6, 0.2, 0.2), seed=args.seed)

    print(f"{'group':>8} {'FID':>8} {'KL':>8} {'LG-D':>8} {'F1 loss':>8}")
    for value in group.values:
        gen = fit_generator(train, group, value)
        real = test.subset_by_value("group", value)
        synth = Dataset(ds.schema, tuple(sample(gen, len(real), seed=args.seed + 1)))
        fid = frechet_distance(real, synth)
        kl = kl_similarity(real, synth)
        lgd = detection_auc(real, synth, seed=args.seed + 2)
        f1_loss = downstream_f1_loss(train.subset_by_value("group", value), synth, test)
        print(f"{value:>8} {fid:8.3f} {kl:8.3f} {lgd:8.3f} {f1_loss:8.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
