"""Fit the gate on a planted hard switch and report how well the threshold is recovered.

ALS is exact on items with at least `--switch` ratings, LASSO below it; the
learned gamma should land between the two count bands with beta > 0.
"""
import argparse
import sys

import numpy as np

from balse.gate import BlendSet, gate_weight, train_gate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=600)
    ap.add_argument("--max-count", type=int, default=10)
    ap.add_argument("--switch", type=int, default=5)
    ap.add_argument("--noise", type=float, default=1.0)
    ap.add_argument("--iters", type=int, default=15000)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args(argv)

    print("seed      beta     gamma  loss0 -> loss   separates")
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        counts = rng.integers(0, args.max_count + 1, args.size)
        truth = rng.normal(0, 1.5, args.size)
        noise = rng.normal(0, args.noise, args.size)
        high = counts >= args.switch
        data = BlendSet(np.where(high, truth, truth + noise), np.where(high, truth - noise, truth),
                        counts, truth)
        fit = train_gate(data, iters=args.iters)
        p = fit.params
        ok = p.beta > 0 and counts[~high].max() < p.gamma < counts[high].min()
        print(f"{seed:>4} {p.beta:>9.4f} {p.gamma:>9.4f}  {fit.initial_loss:.3g} -> {fit.final_loss:.3g}   {ok}")
    w = gate_weight(np.arange(args.max_count + 1), p)
    print("last fit, weight on ALS by count:", " ".join(f"{x:.3f}" for x in w))
    return 0


if __name__ == "__main__":
    sys.exit(main())
