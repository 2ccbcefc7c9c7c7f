"""Primal/dual gap and weak-duality spot checks on random lattice instances.

Usage: python scripts/duality_check.py [--instances 50] [--measures 10] [--seed 0]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from instances import random_instance  # noqa: E402

from superhedge.pricing import dual_objective, penalty, price, solve_dual  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=50)
    ap.add_argument("--measures", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    worst_gap = worst_weak = 0.0
    bad = 0
    for k in range(args.instances):
        seed = args.seed + k
        p = random_instance(seed).problem()
        r = price(p)
        gap = abs(r.primal_value - r.dual_value) / (1 + abs(r.primal_value))
        rng = np.random.default_rng(seed)
        weak = max(dual_objective(p, solve_dual(p.with_payoff(rng.normal(size=p.lattice.n_paths))).measure)
                   - r.primal_value for _ in range(args.measures))
        worst_gap, worst_weak = max(worst_gap, gap), max(worst_weak, weak)
        flag = gap > 1e-7 or weak > 1e-7
        bad += flag
        print(f"seed {seed:>4}  paths {p.lattice.n_paths:>5}  options {len(p.options)}  "
              f"price {r.primal_value:>12.6g}  gap {gap:.1e}  weak {weak:+.1e}{'  !' if flag else ''}")
    print(f"max gap {worst_gap:.2e}, max weak-duality excess {worst_weak:.2e}, {bad} flagged")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
