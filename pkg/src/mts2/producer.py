"""Producer (Stackelberg leader) profit and base-stock optimization.

The producer commits to (S1, S2); customers then play the joining game. Profit
is sales revenue less holding cost at the equilibrium rates:

    Pi(S) = sum_i p_i Lambda_i q_i - h_i E[I_i].

When the game has a continuum of equilibria (S = (0, 0) only, so no holding
cost) the worst equilibrium for the producer is used. Revenue is linear on the
segment, so one of its endpoints attains the minimum.
"""

from __future__ import annotations

from dataclasses import dataclass

from .equilibrium import Continuum, Unique, solve_equilibrium
from .errors import StabilityViolation
from .model import InventoryPolicy, JoiningProfile, MarketParams, effective_rates, validate
from .performance import _inventory, _wait

# The threshold search stops here; only reachable with absurd parameters.
_THRESHOLD_CAP = 100_000
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class ProducerSolution:
    policy: InventoryPolicy
    equilibrium: Unique | Continuum
    profit: float
    thresholds: tuple[int, int]
    # Set when the chosen policy's equilibrium is a continuum; profit is then
    # the worst case over the segment.
    worst_case_continuum: bool = False

    def to_dict(self) -> dict:
        return {
            "policy": {"S1": self.policy.S1, "S2": self.policy.S2},
            "equilibrium": self.equilibrium.to_dict(),
            "profit": self.profit,
            "thresholds": list(self.thresholds),
            "worst_case_continuum": self.worst_case_continuum,
        }


def joining_threshold(i: int, params: MarketParams) -> int:
    """Smallest S_i at which type i joins for sure even when everyone joins.

    That is the least S with U_i^S(1, 1) >= 0; the wait factor r^S falls
    geometrically in S, so the search is short.
    """
    validate(params)
    L_i = params.Lambda(i)
    if L_i == 0.0:
        return 0
    mu, L1, L2 = params.mu, params.Lambda1, params.Lambda2
    j = 3 - i
    m, c = params.margin(i), params.c(i)
    for S in range(_THRESHOLD_CAP):
        if m - c * _wait(L_i, params.Lambda(j), S, mu) >= 0.0:
            return S
    raise StabilityViolation(f"no joining threshold below {_THRESHOLD_CAP} (load {L1 + L2!r} vs mu {mu!r})")


def profile_profit(profile: JoiningProfile, policy: InventoryPolicy, params: MarketParams) -> float:
    """Producer profit at a given joining profile."""
    lam = effective_rates(profile, params)
    total = 0.0
    for i, j in ((1, 2), (2, 1)):
        revenue = params.p(i) * lam.lam(i)
        holding = params.h(i) * _inventory(lam.lam(i), lam.lam(j), policy.S(i), params.mu)
        total += revenue - holding
    return total


def _evaluate(policy: InventoryPolicy, params: MarketParams):
    eq = solve_equilibrium(params, policy)
    if isinstance(eq, Continuum):
        return min(profile_profit(e, policy, params) for e in eq.endpoints), eq
    return profile_profit(eq.profile, policy, params), eq


def expected_profit(policy: InventoryPolicy, params: MarketParams) -> float:
    """Profit at the equilibrium induced by ``policy`` (worst case on a continuum)."""
    validate(params, require_stability=False)
    return _evaluate(policy, params)[0]


def optimize_policy(params: MarketParams) -> ProducerSolution:
    """Exhaustive search over {0..S1_bar} x {0..S2_bar}.

    Beyond the thresholds both types already join for sure, so extra stock only
    adds holding cost. Ties go to the lexicographically smallest policy, which
    makes the result independent of the scan order.
    """
    validate(params)
    bars = (joining_threshold(1, params), joining_threshold(2, params))
    results = {}
    for S1 in range(bars[0] + 1):
        for S2 in range(bars[1] + 1):
            policy = InventoryPolicy(S1, S2)
            results[(S1, S2)] = (*_evaluate(policy, params), policy)
    top = max(r[0] for r in results.values())
    # profits that agree to rounding count as ties
    tie = TIE_RTOL * max(1.0, abs(top))
    key = min(k for k, r in results.items() if r[0] >= top - tie)
    profit, eq, policy = results[key]
    return ProducerSolution(policy, eq, profit, bars, isinstance(eq, Continuum))
