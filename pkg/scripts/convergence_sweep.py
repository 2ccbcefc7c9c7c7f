"""Variance and straddle prices on the uniform/tent pair as the discretization is refined.

Usage: python scripts/convergence_sweep.py [--atoms 10 20 40 60] [--ask 0.5 --bid 0.4]
"""

import argparse
import time

from superhedge import CostLadder, MarketModel, PricingProblem, TradableOption, bind, build, price
from superhedge.market import discretize_density


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--atoms", type=int, nargs="+", default=[10, 20, 40, 60])
    ap.add_argument("--ask", type=float, default=0.5)
    ap.add_argument("--bid", type=float, default=0.4)
    args = ap.parse_args()

    var = bind("powi(x[2][1] - x[1][1], 2)", 1, 2)
    absinc = bind("abs(x[2][1] - x[1][1])", 1, 2)
    print(f"{'atoms':>6} {'paths':>7} {'variance':>10} {'inf|dS|':>10} {'sup|dS|':>10} {'straddle':>10} {'secs':>6}")
    for n in args.atoms:
        t0 = time.perf_counter()
        m = MarketModel.from_list([2.0], [discretize_density("uniform(1,3)", n),
                                          discretize_density("tent", n, time_index=2)])
        lat = build(m)
        v = price(PricingProblem(m, lat, var)).primal_value
        lo = -price(PricingProblem(m, lat, bind("-abs(x[2][1] - x[1][1])", 1, 2))).primal_value
        hi = price(PricingProblem(m, lat, absinc)).primal_value
        opt = TradableOption("straddle", absinc, CostLadder([(args.ask, 1.0)], [(args.bid, 1.0)]))
        s = price(PricingProblem(m, lat, var, (opt,))).primal_value
        print(f"{n:>6} {lat.n_paths:>7} {v:>10.5f} {lo:>10.5f} {hi:>10.5f} {s:>10.5f} {time.perf_counter() - t0:>6.2f}")


if __name__ == "__main__":
    main()
