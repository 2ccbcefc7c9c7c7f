"""Limit order books as convex piecewise-linear cost functions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .payoff import Payoff


# quantities within this relative distance of the book depth count as filled
DEPTH_TOL = 1e-12


class DepthError(ValueError):
    pass


def _levels(levels, side: str) -> tuple[tuple[float, float], ...]:
    out = []
    for item in levels:
        price, qty = (float(v) for v in item)
        if not (math.isfinite(price) and math.isfinite(qty)):
            raise ValueError(f"{side}: prices and quantities must be finite")
        if price < 0:
            raise ValueError(f"{side}: negative price {price:g}")
        if qty <= 0:
            raise ValueError(f"{side}: level at price {price:g} has nonpositive quantity {qty:g}")
        out.append((price, qty))
    return tuple(out)


@dataclass(frozen=True)
class CostLadder:
    """Ask and bid ladders of one option.

    ``asks`` are (price, quantity) with nondecreasing prices, ``bids`` with
    nonincreasing prices. Beyond the listed depth the cost is infinite unless the
    side carries an unbounded terminal level, which trades any further quantity at
    ``unbounded_ask_price`` / ``unbounded_bid_price``.
    """

    asks: tuple = ()
    bids: tuple = ()
    unbounded_ask_price: float | None = None
    unbounded_bid_price: float | None = None

    def __post_init__(self):
        asks = _levels(self.asks, "asks")
        bids = _levels(self.bids, "bids")
        object.__setattr__(self, "asks", asks)
        object.__setattr__(self, "bids", bids)
        ap = [p for p, _ in asks] + ([self.unbounded_ask_price] if self.unbounded_ask_price is not None else [])
        bp = [p for p, _ in bids] + ([self.unbounded_bid_price] if self.unbounded_bid_price is not None else [])
        if any(nxt < cur for cur, nxt in zip(ap, ap[1:])):
            raise ValueError("ask prices must be nondecreasing")
        if any(nxt > cur for cur, nxt in zip(bp, bp[1:])):
            raise ValueError("bid prices must be nonincreasing")
        if any(p < 0 or not math.isfinite(p) for p in ap + bp):
            raise ValueError("unbounded level prices must be finite and nonnegative")
        if ap and bp and bp[0] > ap[0]:
            raise ValueError(f"crossed book: best bid {bp[0]:g} above best ask {ap[0]:g}")

    @classmethod
    def liquid(cls, price: float) -> "CostLadder":
        """Linear cost: any quantity trades at ``price`` on both sides."""
        return cls((), (), float(price), float(price))

    # depth ------------------------------------------------------------
    @property
    def ask_cap(self) -> float:
        return math.inf if self.unbounded_ask_price is not None else sum(q for _, q in self.asks)

    @property
    def bid_cap(self) -> float:
        return math.inf if self.unbounded_bid_price is not None else sum(q for _, q in self.bids)

    def breakpoints(self) -> np.ndarray:
        """Kinks of the cost function, from the deepest sell level to the deepest buy level."""
        buy = np.cumsum([q for _, q in self.asks]) if self.asks else np.zeros(0)
        sell = -np.cumsum([q for _, q in self.bids]) if self.bids else np.zeros(0)
        return np.concatenate([sell[::-1], [0.0], buy])

    # cost -------------------------------------------------------------
    def cost(self, eta: float) -> float:
        eta = float(eta)
        if eta == 0.0:
            return 0.0
        if eta > 0:
            levels, extra, sign = self.asks, self.unbounded_ask_price, 1.0
        else:
            levels, extra, sign = self.bids, self.unbounded_bid_price, -1.0
        left = abs(eta)
        slack = DEPTH_TOL * max(1.0, left)
        total = 0.0
        for price, qty in levels:
            take = min(left, qty)
            total += price * take
            left -= take
            if left <= slack:
                return sign * total
        if extra is None:
            return math.inf
        return sign * (total + extra * left)

    def unit_price(self, eta: float) -> float:
        if eta == 0:
            return self.bid_ask()[1] if (self.asks or self.unbounded_ask_price is not None) else math.inf
        c = self.cost(eta)
        if not math.isfinite(c):
            raise DepthError("quantity exceeds book depth")
        return c / eta

    def bid_ask(self) -> tuple[float, float]:
        """One-sided derivatives ``(c'(0-), c'(0+))``.

        An empty bid side gives 0 (nothing can be sold); an empty ask side gives
        +inf (nothing can be bought).
        """
        if self.bids:
            bid = self.bids[0][0]
        elif self.unbounded_bid_price is not None:
            bid = self.unbounded_bid_price
        else:
            bid = 0.0
        if self.asks:
            ask = self.asks[0][0]
        elif self.unbounded_ask_price is not None:
            ask = self.unbounded_ask_price
        else:
            ask = math.inf
        return bid, ask

    def conjugate(self, y: float) -> float:
        """``sup_eta (eta * y - c(eta))``, attained at a breakpoint or infinite."""
        y = float(y)
        if self.unbounded_ask_price is not None and y > self.unbounded_ask_price:
            return math.inf
        if self.unbounded_bid_price is not None and y < self.unbounded_bid_price:
            return math.inf
        best = 0.0
        for eta in self.breakpoints():
            if eta != 0.0:
                best = max(best, eta * y - self.cost(eta))
        return best

    def is_liquid(self) -> bool:
        if self.unbounded_ask_price is None or self.unbounded_bid_price is None:
            return False
        prices = [p for p, _ in self.asks] + [p for p, _ in self.bids]
        prices += [self.unbounded_ask_price, self.unbounded_bid_price]
        return max(prices) == min(prices)

    # LP encoding ------------------------------------------------------
    def segments(self):
        """Linear pieces as ``(side, price, capacity)``; a capacity of inf is the unbounded level.

        ``side`` is +1 for buying and -1 for selling. Buying ``z`` at price ``a`` adds
        ``z * (psi - a)`` to the payoff; selling ``w`` at ``b`` adds ``w * (b - psi)``.
        """
        out = [(1, p, q) for p, q in self.asks]
        if self.unbounded_ask_price is not None:
            out.append((1, self.unbounded_ask_price, math.inf))
        out += [(-1, p, q) for p, q in self.bids]
        if self.unbounded_bid_price is not None:
            out.append((-1, self.unbounded_bid_price, math.inf))
        return out


@dataclass(frozen=True)
class TradableOption:
    id: str
    payoff: Payoff
    ladder: CostLadder
