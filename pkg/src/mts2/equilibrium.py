"""Customer joining game: utilities, best responses and Nash equilibria.

A type-i customer joins with utility U_i = R_i - p_i - c_i E[W_i] (less an
optional admission toll). U_i falls strictly in both joining probabilities,
so for fixed q_j the best-response fixed point f_i(q_j) is unique. It is 0 if
U_i(0, q_j) <= 0, 1 if U_i(1, q_j) >= 0, and otherwise the root of U_i.

With both base-stock levels at zero, equilibria follow from closed forms, and
equal patience ratios c_i / (R_i - p_i) give a whole segment of equilibria.
Otherwise the equilibrium is unique: it is the fixed point of
psi(q1) = f1(f2(q1)), whose slope lies in [0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.optimize import brentq

from .errors import NoConvergence, NotAnEquilibrium, SolverError
from .model import InventoryPolicy, JoiningProfile, MarketParams, other, validate
from .performance import _wait

EQ_TOL = 1e-8
RATIO_RTOL = 1e-12
FP_TOL = 1e-10
MAX_ITER = 10_000

CASE_LABELS = (
    "(0,0)", "(0,q2*)", "(0,1)",
    "(q1*,0)", "(q1*,q2*)", "(q1*,1)",
    "(1,0)", "(1,q2*)", "(1,1)",
)


@dataclass(frozen=True)
class Unique:
    profile: JoiningProfile
    case_label: str
    residuals: tuple[float, float] = (math.nan, math.nan)
    # Corner coordinates where the customer is exactly indifferent.
    indifferent: tuple[bool, bool] = (False, False)

    kind = "unique"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "q1": self.profile.q1,
            "q2": self.profile.q2,
            "case_label": self.case_label,
            "residuals": {"U1": self.residuals[0], "U2": self.residuals[1]},
            "indifferent": list(self.indifferent),
        }


@dataclass(frozen=True)
class Continuum:
    """Segment q1 * Lambda1 + q2 * Lambda2 = rate_sum clipped to the unit square."""

    rate_sum: float
    endpoints: tuple[JoiningProfile, JoiningProfile]
    residuals: tuple[tuple[float, float], tuple[float, float]] = field(default=((0.0, 0.0), (0.0, 0.0)))

    kind = "continuum"
    case_label = "(q1*,q2*)"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "case_label": self.case_label,
            "rate_sum": self.rate_sum,
            "endpoints": [{"q1": e.q1, "q2": e.q2} for e in self.endpoints],
            "residuals": [{"U1": r[0], "U2": r[1]} for r in self.residuals],
        }


@dataclass(frozen=True)
class Classification:
    case_label: str
    residuals: tuple[float, float]
    indifferent: tuple[bool, bool]


# ---------------------------------------------------------------------------
# utilities and best responses


def _margin(params: MarketParams, i: int, tolls) -> float:
    return params.margin(i) - tolls[i - 1]


def utility(i: int, profile: JoiningProfile, params: MarketParams, policy: InventoryPolicy,
            tolls: tuple[float, float] = (0.0, 0.0)) -> float:
    """Expected utility of joining for a type-i customer, net of any toll."""
    j = other(i)
    x_i, x_j = profile.q(i) * params.Lambda(i), profile.q(j) * params.Lambda(j)
    return _utility(_margin(params, i, tolls), params.c(i), x_i, x_j, policy.S(i), params.mu)


def _utility(m, c, x_i, x_j, S, mu):
    # an unstable profile means an unbounded wait
    if x_i + x_j >= mu:
        return -math.inf
    return m - c * _wait(x_i, x_j, S, mu)


def _solve_ratio(S: int, T: float, hi: float) -> float:
    """Root y in (0, hi) of y**S / (1 - y) = T, for S >= 1.

    Newton on F(y) = S log y - log(1 - y) - log T, safeguarded by bisection.
    F is strictly increasing; the caller guarantees F(hi) > 0.
    """
    log_T = math.log(T)
    lo = 0.0
    y = min(0.5 * hi, T ** (1.0 / S))
    if not 0.0 < y < hi:
        y = 0.5 * hi
    for _ in range(200):
        F = S * math.log(y) - math.log1p(-y) - log_T
        if F == 0.0:
            return y
        if F < 0.0:
            lo = y
        else:
            hi = y
        step = F / (S / y + 1.0 / (1.0 - y))
        nxt = y - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - y) <= 4e-16 * y:
            return nxt
        y = nxt
    return y


def best_response_fixed_point(i: int, q_other: float, params: MarketParams, policy: InventoryPolicy,
                              tolls: tuple[float, float] = (0.0, 0.0)) -> float:
    """The unique fixed point of BR_i(., q_other), corner cases first."""
    j = other(i)
    mu = params.mu
    L_i = params.Lambda(i)
    c = params.c(i)
    m = _margin(params, i, tolls)
    S = policy.S(i)
    x_j = q_other * params.Lambda(j)

    if _utility(m, c, 0.0, x_j, S, mu) <= 0.0:
        return 0.0
    if _utility(m, c, L_i, x_j, S, mu) >= 0.0:
        return 1.0
    d = mu - x_j
    if S == 0:
        # 1/(d - x) = m/c
        q = (d - c / m) / L_i
    else:
        # wait = y^S / (d (1 - y)) with y = x / d
        q = _solve_ratio(S, m * d / c, min(1.0, L_i / d)) * d / L_i
    return min(1.0, max(0.0, q))


def interior_response(i: int, q_other: float, params: MarketParams, policy: InventoryPolicy) -> float:
    """q_i solving U_i(q_i, q_other) = 0 with no clipping to [0, 1].

    Used to study the composed map q1 -> g1(g2(q1)) away from the corners. The
    root is taken in the effective-rate scale and may exceed 1 or fall below 0.
    """
    j = other(i)
    mu = params.mu
    L_i = params.Lambda(i)
    c, m, S = params.c(i), params.margin(i), policy.S(i)
    d = mu - q_other * params.Lambda(j)
    if S == 0:
        return (d - c / m) / L_i
    # the bracket must cover (0, 1) in y; 1 - 1e-15 keeps the log finite
    return _solve_ratio(S, m * d / c, 1.0 - 1e-15) * d / L_i


def composed_interior_map(q1: float, params: MarketParams, policy: InventoryPolicy) -> float:
    """phi(q1) = g1(g2(q1)) built from the unclipped zero-utility curves."""
    return interior_response(1, interior_response(2, q1, params, policy), params, policy)


# ---------------------------------------------------------------------------
# classification


def _coordinate_class(q: float) -> str:
    if q == 0.0:
        return "0"
    if q == 1.0:
        return "1"
    return "interior"


def classify(profile: JoiningProfile, params: MarketParams, policy: InventoryPolicy,
             tolls: tuple[float, float] = (0.0, 0.0), eq_tol: float = EQ_TOL,
             slack: float = EQ_TOL) -> Classification:
    """Locate ``profile`` among the nine equilibrium cases, or raise.

    Interior coordinates need |U_i| <= eq_tol; a coordinate at 0 needs
    U_i <= slack and one at 1 needs U_i >= -slack.
    """
    U = tuple(utility(i, profile, params, policy, tolls) for i in (1, 2))
    classes = tuple(_coordinate_class(profile.q(i)) for i in (1, 2))
    failures = []
    for i in (1, 2):
        u, cls = U[i - 1], classes[i - 1]
        if cls == "0" and u > slack:
            failures.append(f"U{i} = {u:.3e} > 0 at q{i} = 0")
        elif cls == "1" and u < -slack:
            failures.append(f"U{i} = {u:.3e} < 0 at q{i} = 1")
        elif cls == "interior" and abs(u) > eq_tol:
            failures.append(f"|U{i}| = {abs(u):.3e} at interior q{i} = {profile.q(i)!r}")
    if failures:
        raise NotAnEquilibrium("; ".join(failures), residuals=U)

    names = []
    for i in (1, 2):
        cls = classes[i - 1]
        names.append(f"q{i}*" if cls == "interior" else cls)
    indifferent = tuple(classes[k] != "interior" and abs(U[k]) <= 1e-12 for k in (0, 1))
    return Classification(f"({names[0]},{names[1]})", U, indifferent)


# ---------------------------------------------------------------------------
# zero-inventory closed forms


def _ratios_equal(a1: float, a2: float) -> bool:
    if math.isinf(a1) or math.isinf(a2):
        return a1 == a2
    return abs(a1 - a2) <= RATIO_RTOL * max(abs(a1), abs(a2))


def _continuum_endpoints(K: float, L1: float, L2: float) -> tuple[JoiningProfile, JoiningProfile]:
    if L1 == 0.0:
        q2 = min(1.0, K / L2)
        return JoiningProfile(0.0, q2), JoiningProfile(1.0, q2)
    if L2 == 0.0:
        q1 = min(1.0, K / L1)
        return JoiningProfile(q1, 0.0), JoiningProfile(q1, 1.0)
    q1_hi = min(1.0, K / L1)
    q2_hi = min(1.0, K / L2)
    first = JoiningProfile(q1_hi, min(1.0, max(0.0, (K - q1_hi * L1) / L2)))
    second = JoiningProfile(min(1.0, max(0.0, (K - q2_hi * L2) / L1)), q2_hi)
    return first, second


def _zero_inventory_cells(mu, a1, a2, L1, L2):
    """(label, holds, profile-builder) rows of the zero-inventory outcome table."""
    return (
        ("(0,0)", mu <= a1 and mu <= a2, lambda: (0.0, 0.0)),
        ("(0,q2*)", mu > a2 and mu < a2 + L2 and a1 >= a2, lambda: (0.0, (mu - a2) / L2)),
        ("(0,1)", mu >= a2 + L2 and mu <= a1 + L2, lambda: (0.0, 1.0)),
        ("(q1*,0)", mu > a1 and mu < a1 + L1 and a1 <= a2, lambda: ((mu - a1) / L1, 0.0)),
        ("(q1*,1)", mu > a1 + L2 and mu < a1 + L1 + L2 and a1 >= a2,
         lambda: ((mu - L2 - a1) / L1, 1.0)),
        ("(1,0)", mu >= a1 + L1 and mu <= a2 + L1, lambda: (1.0, 0.0)),
        ("(1,q2*)", mu > a2 + L1 and mu < a2 + L1 + L2 and a1 <= a2,
         lambda: (1.0, (mu - L1 - a2) / L2)),
        ("(1,1)", mu >= a1 + L1 + L2 and mu >= a2 + L1 + L2, lambda: (1.0, 1.0)),
    )


def _solve_zero_inventory(params: MarketParams, tolls):
    mu, L1, L2 = params.mu, params.Lambda1, params.Lambda2
    m1, m2 = _margin(params, 1, tolls), _margin(params, 2, tolls)
    a1 = params.c1 / m1 if m1 > 0 else math.inf
    a2 = params.c2 / m2 if m2 > 0 else math.inf

    if _ratios_equal(a1, a2) and a1 < mu < a1 + L1 + L2:
        K = mu - a1
        return Continuum(rate_sum=K, endpoints=_continuum_endpoints(K, L1, L2))

    for label, holds, build in _zero_inventory_cells(mu, a1, a2, L1, L2):
        if holds:
            q1, q2 = build()
            return label, JoiningProfile(min(1.0, max(0.0, q1)), min(1.0, max(0.0, q2)))
    raise SolverError(f"no zero-inventory equilibrium cell matched (a1={a1!r}, a2={a2!r}, mu={mu!r})")


# ---------------------------------------------------------------------------
# solver


def _psi(q1, params, policy, tolls):
    return best_response_fixed_point(
        1, best_response_fixed_point(2, q1, params, policy, tolls), params, policy, tolls)


def _fixed_point_root(params, policy, tolls):
    def h(q1):
        return _psi(q1, params, policy, tolls) - q1

    h0 = h(0.0)
    if h0 <= 0.0:
        return 0.0
    h1 = h(1.0)
    if h1 >= 0.0:
        return 1.0
    return brentq(h, 0.0, 1.0, xtol=1e-15, rtol=4 * 2.2205e-16, maxiter=500)


def _fixed_point_iterate(params, policy, tolls, start):
    q1 = start
    step_prev = math.inf
    damping = 1.0
    for _ in range(MAX_ITER):
        target = _psi(q1, params, policy, tolls)
        step = target - q1
        # with contraction rate L the remaining error is about |step| L / (1 - L)
        rate = abs(step / step_prev) if step_prev not in (0.0, math.inf) else 0.0
        if abs(step) <= FP_TOL and (rate < 1.0 and abs(step) * rate / (1.0 - rate) <= FP_TOL):
            return target
        if step == 0.0:
            return target
        # psi is increasing, so plain iteration cannot oscillate; this damping
        # is purely defensive
        if damping == 1.0 and step_prev != math.inf and step * step_prev < 0 and abs(step) >= abs(step_prev):
            damping = 0.5
        q1 = q1 + damping * step
        step_prev = step
    raise NoConvergence(f"fixed-point iteration exceeded {MAX_ITER} steps")


def solve_equilibrium(params: MarketParams, policy: InventoryPolicy,
                      tolls: tuple[float, float] = (0.0, 0.0), method: str = "auto",
                      start: float = 1.0):
    """Nash equilibrium of the joining game at base-stock ``policy``.

    ``method`` selects the route for the positive-inventory case: "root"
    brackets the fixed point of psi (the default through "auto"), and "iterate"
    runs q1 <- psi(q1) from ``start``. With S1 = S2 = 0, "auto" uses the closed
    forms, which can return a :class:`Continuum`.
    """
    validate(params, require_stability=False)
    tolls = (float(tolls[0]), float(tolls[1]))
    if method not in ("auto", "root", "iterate"):
        raise ValueError(f"unknown method {method!r}")

    if method == "auto" and policy.S1 == 0 and policy.S2 == 0:
        result = _solve_zero_inventory(params, tolls)
        if isinstance(result, Continuum):
            res = tuple(
                tuple(utility(i, e, params, policy, tolls) for i in (1, 2)) for e in result.endpoints)
            return Continuum(result.rate_sum, result.endpoints, res)
        label, profile = result
        cls = classify(profile, params, policy, tolls)
        if cls.case_label != label:
            raise SolverError(f"closed-form cell {label} classified as {cls.case_label}")
        return Unique(profile, label, cls.residuals, cls.indifferent)

    if method == "iterate":
        q1 = _fixed_point_iterate(params, policy, tolls, start)
    else:
        q1 = _fixed_point_root(params, policy, tolls)
    q2 = best_response_fixed_point(2, q1, params, policy, tolls)
    q1 = best_response_fixed_point(1, q2, params, policy, tolls)
    profile = JoiningProfile(q1, q2)
    cls = classify(profile, params, policy, tolls)
    return Unique(profile, cls.case_label, cls.residuals, cls.indifferent)
