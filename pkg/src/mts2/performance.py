"""Stationary performance measures of the shared-server make-to-stock queue.

The total job count behaves as an M/M/1 queue at rate lambda1 + lambda2, and
the type-i job count is geometric with ratio

    r_i = lambda_i / (mu - lambda_j),

so every mean below is a closed form in r_i and S_i. Waiting times are
unconditional: customers served from stock contribute a zero wait.

The underscore-prefixed scalar kernels take plain floats. They sit on the hot
path of the equilibrium and welfare solvers, which call them millions of times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import IndexOutOfRange
from .model import EffectiveRates, InventoryPolicy, MarketParams, check_stable, other

__all__ = [
    "PerformanceReport",
    "queue_length_pmf",
    "inventory_pmf",
    "backlog_pmf",
    "position_pmf",
    "position_moments",
    "stockout_prob",
    "expected_wait",
    "expected_inventory",
    "expected_backlog",
    "report",
]


def _ratio(lam_i, lam_j, mu):
    return lam_i / (mu - lam_j)


def _stockout(lam_i, lam_j, S, mu):
    # Python evaluates 0.0 ** 0 as 1.0, which is the convention we want.
    return _ratio(lam_i, lam_j, mu) ** S


def _wait(lam_i, lam_j, S, mu):
    return _ratio(lam_i, lam_j, mu) ** S / (mu - lam_i - lam_j)


def _inventory(lam_i, lam_j, S, mu):
    return S - lam_i / (mu - lam_i - lam_j) * (1.0 - _ratio(lam_i, lam_j, mu) ** S)


def _backlog(lam_i, lam_j, S, mu):
    return _ratio(lam_i, lam_j, mu) ** S * lam_i / (mu - lam_i - lam_j)


def _unpack(i, rates: EffectiveRates, mu):
    j = other(i)
    lam_i, lam_j = rates.lam(i), rates.lam(j)
    check_stable(lam_i, lam_j, mu)
    return lam_i, lam_j


def queue_length_pmf(n: int, rates: EffectiveRates, mu: float) -> float:
    """P{N = n} for the total number of jobs in the production queue."""
    check_stable(rates.lambda1, rates.lambda2, mu)
    if n < 0:
        raise IndexOutOfRange(f"queue length must be nonnegative, got {n}")
    rho = rates.total / mu
    return (1.0 - rho) * rho ** n


def inventory_pmf(k: int, i: int, rates: EffectiveRates, policy: InventoryPolicy, mu: float) -> float:
    """P{I_i = k} for k in 0..S_i."""
    lam_i, lam_j = _unpack(i, rates, mu)
    S = policy.S(i)
    if not 0 <= k <= S:
        raise IndexOutOfRange(f"inventory level {k} outside 0..{S}")
    r = _ratio(lam_i, lam_j, mu)
    if k == 0:
        return r ** S
    return (1.0 - r) * r ** (S - k)


def backlog_pmf(k: int, i: int, rates: EffectiveRates, policy: InventoryPolicy, mu: float) -> float:
    """P{B_i = k} for k >= 0."""
    lam_i, lam_j = _unpack(i, rates, mu)
    if k < 0:
        raise IndexOutOfRange(f"backlog must be nonnegative, got {k}")
    S = policy.S(i)
    r = _ratio(lam_i, lam_j, mu)
    if k == 0:
        return 1.0 - r ** (S + 1)
    return (1.0 - r) * r ** (S + k)


def position_pmf(n_a: int, n_b: int, i: int, rates: EffectiveRates, policy: InventoryPolicy,
                 mu: float) -> float:
    """Joint law of (jobs ahead of and including the serving job, jobs behind it).

    Only defined for S_i >= 1. The measure is carried by the stockout event, so
    its total mass is the stockout probability rather than one.
    """
    lam_i, lam_j = _unpack(i, rates, mu)
    S = policy.S(i)
    if S < 1:
        raise IndexOutOfRange("the queue-position law requires S_i >= 1")
    if n_a < 1 or n_b < S - 1:
        return 0.0
    lam = lam_i + lam_j
    return (
        math.comb(n_b, S - 1)
        * lam ** (n_a - 1) * lam_i ** S * lam_j ** (n_b - S + 1)
        * (mu - lam) / mu ** (n_a + n_b + 1)
    )


def position_moments(i: int, rates: EffectiveRates, policy: InventoryPolicy, mu: float,
                     tol: float = 1e-14) -> tuple[float, float]:
    """Total mass and first moment of N_a under the queue-position law.

    The pmf factorises into a series in n_a and a series in n_b; each is summed
    numerically and truncated once a geometric bound on its remaining tail
    drops below ``tol``.
    Returns ``(mass, E[N_a])`` with E taken against the sub-probability measure,
    so ``E[N_a] / mu`` is the unconditional expected wait.
    """
    lam_i, lam_j = _unpack(i, rates, mu)
    S = policy.S(i)
    if S < 1:
        raise IndexOutOfRange("the queue-position law requires S_i >= 1")
    lam = lam_i + lam_j
    x_a, x_b = lam / mu, lam_j / mu

    # n_a marginal weights: x_a^(n-1); tail of sum n * x^(n-1) beyond N is
    # bounded by (N+1) x^N / (1-x)^2.
    a_terms, a_first = [], []
    n = 1
    while True:
        w = x_a ** (n - 1)
        a_terms.append(w)
        a_first.append(n * w)
        if (n + 1) * x_a ** n / (1.0 - x_a) ** 2 < tol:
            break
        n += 1
    sum_a, sum_na = math.fsum(a_terms), math.fsum(a_first)

    # n_b weights: C(k+S-1, S-1) x_b^k. Term ratio (k+S)/(k+1) * x_b; once it
    # drops below one, the tail after term t is at most t * q / (1 - q).
    b_terms = []
    k = 0
    term = 1.0
    while True:
        b_terms.append(term)
        q = (k + S) / (k + 1) * x_b
        nxt = term * q
        if q < 1.0 and nxt / (1.0 - q) < tol:
            break
        term = nxt
        k += 1
    sum_b = math.fsum(b_terms)

    # The pmf factorises as const * x_a^(n_a-1) * C(n_b, S-1) x_b^(n_b-S+1).
    const = (mu - lam) * lam_i ** S / mu ** (S + 1)
    return const * sum_a * sum_b, const * sum_na * sum_b


def stockout_prob(i: int, rates: EffectiveRates, policy: InventoryPolicy, mu: float) -> float:
    lam_i, lam_j = _unpack(i, rates, mu)
    return _stockout(lam_i, lam_j, policy.S(i), mu)


def expected_wait(i: int, rates: EffectiveRates, policy: InventoryPolicy, mu: float) -> float:
    """Mean wait of a joining type-i customer, zero waits included."""
    lam_i, lam_j = _unpack(i, rates, mu)
    return _wait(lam_i, lam_j, policy.S(i), mu)


def expected_inventory(i: int, rates: EffectiveRates, policy: InventoryPolicy, mu: float) -> float:
    lam_i, lam_j = _unpack(i, rates, mu)
    return _inventory(lam_i, lam_j, policy.S(i), mu)


def expected_backlog(i: int, rates: EffectiveRates, policy: InventoryPolicy, mu: float) -> float:
    lam_i, lam_j = _unpack(i, rates, mu)
    return _backlog(lam_i, lam_j, policy.S(i), mu)


@dataclass(frozen=True)
class PerformanceReport:
    expected_wait: tuple[float, float]
    expected_inventory: tuple[float, float]
    expected_backlog: tuple[float, float]
    stockout_prob: tuple[float, float]
    total_utilization: float

    def to_dict(self) -> dict:
        out = {}
        for i in (1, 2):
            out[f"type{i}"] = {
                "expected_wait": self.expected_wait[i - 1],
                "expected_inventory": self.expected_inventory[i - 1],
                "expected_backlog": self.expected_backlog[i - 1],
                "stockout_prob": self.stockout_prob[i - 1],
            }
        out["total_utilization"] = self.total_utilization
        return out


def report(rates: EffectiveRates, policy: InventoryPolicy, params: MarketParams) -> PerformanceReport:
    mu = params.mu
    check_stable(rates.lambda1, rates.lambda2, mu)

    def both(fn):
        return tuple(fn(i, rates, policy, mu) for i in (1, 2))

    return PerformanceReport(
        expected_wait=both(expected_wait),
        expected_inventory=both(expected_inventory),
        expected_backlog=both(expected_backlog),
        stockout_prob=both(stockout_prob),
        total_utilization=rates.total / mu,
    )
