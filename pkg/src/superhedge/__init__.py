"""Model-independent superhedging, duality and arbitrage on finite path lattices."""

from .arbitrage import FtapReport, OapReport, ftap_check, optimal_arbitrage_profit, verify_certificate
from .constraints import (Gamma, NodeSet, PerNode, box, disk_polygon, drawdown, node_table, non_tradable,
                          shortselling, unconstrained)
from .lattice import LatticeMeasure, PathLattice, build
from .lp import LinearProgram, LpBuilder, LpSolution, SolverOptions, solve
from .market import CallCurve, MarginalDistribution, MarketModel, discretize_density
from .orderbook import CostLadder, TradableOption
from .payoff import Payoff, bind, parse
from .pricing import PricingProblem, PricingReport, price, risk_measure, solve_dual

__all__ = [
    "CallCurve", "CostLadder", "FtapReport", "Gamma", "LatticeMeasure", "LinearProgram", "LpBuilder",
    "LpSolution", "MarginalDistribution", "MarketModel", "NodeSet", "OapReport", "PathLattice", "Payoff",
    "PerNode", "PricingProblem", "PricingReport", "SolverOptions", "TradableOption", "bind", "box", "build",
    "discretize_density", "disk_polygon", "drawdown", "ftap_check", "node_table", "non_tradable",
    "optimal_arbitrage_profit", "parse", "price", "risk_measure", "shortselling", "solve", "solve_dual",
    "unconstrained", "verify_certificate",
]
