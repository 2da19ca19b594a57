"""Social planner: optimal stock for given rates, welfare maximization, tolls.

For fixed effective rates the total cost separates by type, and the cost
difference C_i(S + 1) - C_i(S) = h_i - (h_i + c_i) r_i^(S+1) increases in S.
The optimal stock S_i*(lambda) is therefore the smallest S with
r_i^(S+1) <= beta_i, beta_i = h_i / (h_i + c_i).

Each label s_i picks out the rates with beta_i^(1/s_i) < r_i <= beta_i^(1/(s_i+1)).
Because r_i = lambda_i / (mu - lambda_j), both bounds are straight lines
in the (lambda1, lambda2) plane, so every subdomain closure is a convex polygon.
Welfare with the stock held at s is smooth on that polygon. The planner
maximizes it on each polygon by multi-start projected gradient ascent and keeps
the best. On a closure the label need not be optimal, but ``SW(lambda, s) <=
SW(lambda, S*(lambda))``, so no polygon can overshoot the true optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyFeasibleRegion
from .model import (
    STAB_EPS,
    EffectiveRates,
    InventoryPolicy,
    MarketParams,
    check_stable,
    validate,
)
from .performance import _inventory, _wait

# Halfplanes are stored as rows (a1, a2, b) meaning a1*lam1 + a2*lam2 <= b.
_ALWAYS = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class PlannerConfig:
    random_starts: int = 4
    seed: int = 0
    max_iter: int = 400
    step_tol: float = 1e-13
    refine_sweeps: int = 30


@dataclass(frozen=True)
class Subdomain:
    """Closure of the rate set whose optimal stock is (s1, s2)."""

    s: tuple[int, int]
    halfplanes: tuple[tuple[float, float, float], ...]
    vertices: tuple[tuple[float, float], ...]
    # (lower, upper) bounds on r_i = lambda_i / (mu - lambda_j); lower is None for s_i = 0.
    ratio_bounds: tuple[tuple[float | None, float], tuple[float | None, float]]
    mu: float

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    def contains(self, rates: EffectiveRates) -> bool:
        """Half-open membership: lower ratio bound strict, upper bound weak."""
        mu = self.mu
        for i, (lam_i, lam_j) in ((0, rates.as_tuple()), (1, rates.as_tuple()[::-1])):
            lower, upper = self.ratio_bounds[i]
            room = mu - lam_j
            if lam_i > upper * room:
                return False
            if lower is not None and not lam_i > lower * room:
                return False
        return True

    def to_dict(self) -> dict:
        return {
            "s": list(self.s),
            "vertices": [list(v) for v in self.vertices],
            "ratio_bounds": [list(b) for b in self.ratio_bounds],
        }


@dataclass(frozen=True)
class PlannerSolution:
    rates: EffectiveRates
    policy: InventoryPolicy
    welfare: float
    subdomain: tuple[int, int]
    tolls: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "rates": {"lambda1": self.rates.lambda1, "lambda2": self.rates.lambda2},
            "policy": {"S1": self.policy.S1, "S2": self.policy.S2},
            "welfare": self.welfare,
            "subdomain": list(self.subdomain),
            "tolls": list(self.tolls),
        }


# ---------------------------------------------------------------------------
# cost and welfare


def _beta(params: MarketParams, i: int) -> float:
    return params.h(i) / (params.h(i) + params.c(i))


def total_cost(rates: EffectiveRates, policy: InventoryPolicy, params: MarketParams) -> float:
    """Holding plus waiting cost per unit time."""
    mu = params.mu
    l1, l2 = rates.as_tuple()
    check_stable(l1, l2, mu)
    total = 0.0
    for i, lam_i, lam_j in ((1, l1, l2), (2, l2, l1)):
        S = policy.S(i)
        total += params.h(i) * _inventory(lam_i, lam_j, S, mu)
        total += params.c(i) * lam_i * _wait(lam_i, lam_j, S, mu)
    return total


def social_welfare(rates: EffectiveRates, policy: InventoryPolicy, params: MarketParams) -> float:
    """Customer rewards less total cost; prices are transfers and drop out."""
    return params.R1 * rates.lambda1 + params.R2 * rates.lambda2 - total_cost(rates, policy, params)


def sw_gradient(rates: EffectiveRates, policy: InventoryPolicy,
                params: MarketParams) -> tuple[float, float]:
    """Partial derivatives of social welfare in (lambda1, lambda2) at fixed stock."""
    check_stable(rates.lambda1, rates.lambda2, params.mu)
    X = np.array([rates.as_tuple()], dtype=float)
    S = np.array([policy.as_tuple()], dtype=float)
    g = _Welfare(params).gradient(X, S)[0]
    return float(g[0]), float(g[1])


class _Welfare:
    """Vectorized welfare and gradient over rows of rates and stock levels."""

    def __init__(self, params: MarketParams):
        self.mu = params.mu
        self.R = (params.R1, params.R2)
        self.c = (params.c1, params.c2)
        self.h = (params.h1, params.h2)

    def _parts(self, X, S):
        mu = self.mu
        l1, l2 = X[:, 0], X[:, 1]
        A = mu - l1 - l2
        d1, d2 = mu - l2, mu - l1
        r1, r2 = l1 / d1, l2 / d2
        p1, p2 = np.power(r1, S[:, 0]), np.power(r2, S[:, 1])
        return l1, l2, A, d1, d2, r1, r2, p1, p2

    def value(self, X, S):
        (c1, c2), (h1, h2), (R1, R2) = self.c, self.h, self.R
        l1, l2, A, _, _, _, _, p1, p2 = self._parts(X, S)
        cost = (h1 * (S[:, 0] - l1 / A * (1.0 - p1)) + c1 * l1 * p1 / A
                + h2 * (S[:, 1] - l2 / A * (1.0 - p2)) + c2 * l2 * p2 / A)
        return R1 * l1 + R2 * l2 - cost

    def gradient(self, X, S):
        (c1, c2), (h1, h2), (R1, R2) = self.c, self.h, self.R
        l1, l2, A, d1, d2, r1, r2, p1, p2 = self._parts(X, S)
        A2 = A * A
        w1 = (c1 + h1) * (d1 + S[:, 0] * A) * p1
        w2 = (c2 + h2) * (d2 + S[:, 1] * A) * p2
        g1 = R1 + (h1 * d1 + h2 * l2 - w1 - w2 * r2) / A2
        g2 = R2 + (h2 * d2 + h1 * l1 - w2 - w1 * r1) / A2
        return np.stack([g1, g2], axis=1)


# ---------------------------------------------------------------------------
# optimal stock and the subdomain partition


def _optimal_stock(lam_i: float, lam_j: float, mu: float, beta: float) -> int:
    if lam_i == 0.0:
        return 0
    r = lam_i / (mu - lam_j)
    S = max(0, math.ceil(math.log(beta) / math.log(r)) - 1)
    # the log ratio can land a hair off an integer; settle on the defining
    # inequality r^(S+1) <= beta < r^S directly
    while r ** (S + 1) > beta:
        S += 1
    while S > 0 and r ** S <= beta:
        S -= 1
    return S


def optimal_inventory_for_rates(rates: EffectiveRates, params: MarketParams) -> InventoryPolicy:
    """Cost-minimizing base-stock pair for fixed effective rates."""
    mu = params.mu
    l1, l2 = rates.as_tuple()
    check_stable(l1, l2, mu)
    return InventoryPolicy(_optimal_stock(l1, l2, mu, _beta(params, 1)),
                           _optimal_stock(l2, l1, mu, _beta(params, 2)))


def inventory_upper_bound(i: int, params: MarketParams) -> int:
    """ceil(log beta_i / log(Lambda_i / mu)), the bound built on Lambda_i / mu.

    This does not bound S_i* over the whole rate region, because r_i =
    lambda_i / (mu - lambda_j) can exceed Lambda_i / mu.
    :func:`rate_region_bound` gives the bound the optimizer actually uses.
    """
    L = params.Lambda(i)
    if L == 0.0:
        return 0
    return max(0, math.ceil(math.log(_beta(params, i)) / math.log(L / params.mu)))


def _feasible_halfplanes(params: MarketParams):
    cap = params.mu * (1.0 - STAB_EPS)
    return [
        (-1.0, 0.0, 0.0), (1.0, 0.0, params.Lambda1),
        (0.0, -1.0, 0.0), (0.0, 1.0, params.Lambda2),
        (1.0, 1.0, cap),
    ]


def rate_region_bound(i: int, params: MarketParams) -> int:
    """Largest S_i* over the feasible rate region, box and stability margin included."""
    if params.Lambda(i) == 0.0:
        return 0
    mu = params.mu
    j = 3 - i
    cap = mu * (1.0 - STAB_EPS)
    # r_i grows in both rates, so it peaks at the far corner or, if that is
    # cut off by the stability line, where the line meets lambda_i = Lambda_i
    lam_i = min(params.Lambda(i), cap)
    lam_j = min(params.Lambda(j), cap - lam_i)
    return _optimal_stock(lam_i, lam_j, mu, _beta(params, i))


def _clip(poly, a1, a2, b):
    """Sutherland-Hodgman step: keep the part of ``poly`` with a.x <= b."""
    out = []
    n = len(poly)
    for k in range(n):
        P, Q = poly[k], poly[(k + 1) % n]
        fP = a1 * P[0] + a2 * P[1] - b
        fQ = a1 * Q[0] + a2 * Q[1] - b
        if fP <= 0.0:
            out.append(P)
        if (fP < 0.0 < fQ) or (fQ < 0.0 < fP):
            t = fP / (fP - fQ)
            out.append((P[0] + t * (Q[0] - P[0]), P[1] + t * (Q[1] - P[1])))
    # drop repeated vertices
    dedup = []
    for v in out:
        if not dedup or abs(v[0] - dedup[-1][0]) > 1e-15 or abs(v[1] - dedup[-1][1]) > 1e-15:
            dedup.append(v)
    if len(dedup) > 1 and abs(dedup[0][0] - dedup[-1][0]) <= 1e-15 and abs(dedup[0][1] - dedup[-1][1]) <= 1e-15:
        dedup.pop()
    return dedup


def _polygon(halfplanes, params: MarketParams):
    poly = [(0.0, 0.0), (params.Lambda1, 0.0), (params.Lambda1, params.Lambda2), (0.0, params.Lambda2)]
    for a1, a2, b in halfplanes:
        poly = _clip(poly, a1, a2, b)
        if not poly:
            break
    return tuple(poly)


def subdomain_bounds(s1: int, s2: int, params: MarketParams) -> Subdomain:
    """The (closed) polygon of rates whose optimal stock is (s1, s2)."""
    mu = params.mu
    planes = _feasible_halfplanes(params)
    bounds = []
    for i, s in ((1, s1), (2, s2)):
        beta = _beta(params, i)
        upper = beta ** (1.0 / (s + 1))
        lower = beta ** (1.0 / s) if s > 0 else None
        # r_i <= upper  <=>  lam_i + upper * lam_j <= upper * mu
        if i == 1:
            planes.append((1.0, upper, upper * mu))
            if lower is not None:
                planes.append((-1.0, -lower, -lower * mu))
        else:
            planes.append((upper, 1.0, upper * mu))
            if lower is not None:
                planes.append((-lower, -1.0, -lower * mu))
        bounds.append((lower, upper))
    if (s1 > 0 and params.Lambda1 == 0.0) or (s2 > 0 and params.Lambda2 == 0.0):
        vertices = ()
    else:
        vertices = _polygon(planes, params)
    return Subdomain((s1, s2), tuple(planes), vertices, tuple(bounds), mu)


def subdomain_of(rates: EffectiveRates, params: MarketParams) -> tuple[int, int]:
    return optimal_inventory_for_rates(rates, params).as_tuple()


# ---------------------------------------------------------------------------
# batched projected gradient ascent


class _Batch:
    """Rows of (start point, polygon, stock level) ascended together."""

    def __init__(self, V, H, S):
        self.V = V          # (n, K, 2) vertices, padded by repeating the last one
        self.H = H          # (n, M, 3) halfplanes, padded with always-true rows
        self.S = S          # (n, 2)
        P0 = V
        P1 = np.roll(V, -1, axis=1)
        self.P0 = P0
        self.E = P1 - P0
        L2 = np.einsum("nkd,nkd->nk", self.E, self.E)
        self.L2 = np.where(L2 > 0.0, L2, 1.0)
        self.degenerate = L2 == 0.0

    def project(self, X, rows=slice(None)):
        H = self.H[rows]
        viol = H[:, :, 0] * X[:, None, 0] + H[:, :, 1] * X[:, None, 1] - H[:, :, 2]
        inside = np.all(viol <= 0.0, axis=1)
        if inside.all():
            return X
        P0, E, L2 = self.P0[rows], self.E[rows], self.L2[rows]
        D = X[:, None, :] - P0
        t = np.clip(np.einsum("nkd,nkd->nk", D, E) / L2, 0.0, 1.0)
        t = np.where(self.degenerate[rows], 0.0, t)
        Q = P0 + t[:, :, None] * E
        dist = np.einsum("nkd,nkd->nk", Q - X[:, None, :], Q - X[:, None, :])
        best = Q[np.arange(len(X)), np.argmin(dist, axis=1)]
        return np.where(inside[:, None], X, best)


def _pad(seq, width, fill):
    seq = list(seq)
    return seq + [seq[-1] if fill is None else fill] * (width - len(seq))


def _starts(vertices, rng, n_random):
    V = np.asarray(vertices, dtype=float)
    centroid = V.mean(axis=0)
    pts = [centroid]
    pts.extend(0.5 * (v + centroid) for v in V)
    if len(V) >= 2:
        w = rng.dirichlet(np.ones(len(V)), size=n_random)
        pts.extend(w @ V)
    return pts


def _ascend(W: _Welfare, batch: _Batch, X, cfg: PlannerConfig):
    """Projected gradient ascent with Barzilai-Borwein steps and Armijo backtracking.

    Returns final points, values and a mask of rows that hit the iteration cap.
    """
    S = batch.S
    X = batch.project(X)
    f = W.value(X, S)
    g = W.gradient(X, S)
    n = len(X)
    t = np.full(n, 1e-2)
    active = np.ones(n, dtype=bool)
    for _ in range(cfg.max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Xa, fa, ga, ta = X[idx], f[idx], g[idx], t[idx]
        Sa = S[idx]
        accepted = np.zeros(idx.size, dtype=bool)
        Xn = Xa.copy()
        fn = fa.copy()
        for _ in range(60):
            todo = ~accepted
            if not todo.any():
                break
            rows = idx[todo]
            trial = batch.project(Xa[todo] + ta[todo, None] * ga[todo], rows)
            with np.errstate(all="ignore"):
                ft = W.value(trial, Sa[todo])
            gain = np.einsum("nd,nd->n", ga[todo], trial - Xa[todo])
            ok = np.isfinite(ft) & (ft >= fa[todo] + 1e-4 * gain)
            sel = np.flatnonzero(todo)
            Xn[sel[ok]] = trial[ok]
            fn[sel[ok]] = ft[ok]
            accepted[sel[ok]] = True
            ta[sel[~ok]] *= 0.25
        step = Xn - Xa
        moved = np.max(np.abs(step), axis=1)
        gn = W.gradient(Xn, Sa)
        # BB1 step for the ascent problem; fall back to growth on negative curvature
        sy = -np.einsum("nd,nd->n", step, gn - ga)
        ss = np.einsum("nd,nd->n", step, step)
        with np.errstate(all="ignore"):
            bb = np.where(sy > 0.0, ss / sy, 4.0 * ta)
        t[idx] = np.clip(bb, 1e-12, 1e3)
        X[idx], f[idx], g[idx] = Xn, fn, gn
        done = (moved <= cfg.step_tol) | ~accepted
        active[idx[done]] = False
    return X, f, active


def _coordinate_refine(W: _Welfare, x, s, halfplanes, cfg: PlannerConfig):
    """Alternate 1-D maximizations along each axis, bisecting the partial derivative."""
    S = np.array([s], dtype=float)

    def val(p):
        return float(W.value(np.array([p]), S)[0])

    def grad(p, k):
        return float(W.gradient(np.array([p]), S)[0, k])

    x = np.array(x, dtype=float)
    fx = val(x)
    for _ in range(cfg.refine_sweeps):
        start = fx
        for k in (0, 1):
            other = x[1 - k]
            lo, hi = -math.inf, math.inf
            for h in halfplanes:
                a, rest = h[k], h[2] - h[1 - k] * other
                if a > 0:
                    hi = min(hi, rest / a)
                elif a < 0:
                    lo = max(lo, rest / a)
                elif rest < 0:
                    lo, hi = 1.0, 0.0
            if not lo <= hi:
                continue

            def at(v):
                p = x.copy()
                p[k] = v
                return p

            candidates = [lo, hi]
            a, b = lo, hi
            ga, gb = grad(at(a), k), grad(at(b), k)
            if ga > 0 > gb:
                for _ in range(200):
                    m = 0.5 * (a + b)
                    if m <= a or m >= b:
                        break
                    if grad(at(m), k) > 0:
                        a = m
                    else:
                        b = m
                candidates.append(0.5 * (a + b))
            for v in candidates:
                p = at(v)
                fp = val(p)
                if fp > fx:
                    x, fx = p, fp
        if fx - start <= 1e-15 * max(1.0, abs(fx)):
            break
    return x, fx


def _newton_polish(W: _Welfare, x, s, halfplanes, steps: int = 6):
    """Newton steps on the gradient for an interior maximizer.

    The Jacobian is a central difference of the analytic gradient. A step is
    kept only if it stays inside the polygon and shrinks the gradient.
    """
    S = np.array([s], dtype=float)
    H = np.asarray(halfplanes, dtype=float)

    def grad(p):
        return W.gradient(p[None, :], S)[0]

    def inside(p, margin):
        return bool(np.all(H[:, 0] * p[0] + H[:, 1] * p[1] - H[:, 2] <= -margin))

    x = np.array(x, dtype=float)
    if not inside(x, 1e-9):
        return x
    g = grad(x)
    for _ in range(steps):
        eps = 1e-6
        J = np.empty((2, 2))
        for k in (0, 1):
            e = np.zeros(2)
            e[k] = eps
            J[:, k] = (grad(x + e) - grad(x - e)) / (2 * eps)
        try:
            step = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError:
            break
        # only a maximizer: the Hessian must be negative definite
        if not (J[0, 0] < 0 and np.linalg.det(J) > 0):
            break
        trial = x + step
        if not inside(trial, 0.0):
            break
        gt = grad(trial)
        if not np.linalg.norm(gt) < np.linalg.norm(g):
            break
        x, g = trial, gt
    return x


def _maximize_on(params: MarketParams, domains, cfg: PlannerConfig):
    """Best (value, point, s) per entry of ``domains`` (a list of Subdomain-like pairs).

    ``domains`` holds (s, halfplanes, vertices) triples with nonempty vertices.
    """
    W = _Welfare(params)
    rng = np.random.default_rng(cfg.seed)
    K = max(len(d[2]) for d in domains)
    M = max(len(d[1]) for d in domains)
    V_rows, H_rows, S_rows, X_rows, owner = [], [], [], [], []
    for k, (s, planes, verts) in enumerate(domains):
        Vp = _pad(verts, K, None)
        Hp = _pad(planes, M, _ALWAYS)
        for p in _starts(verts, rng, cfg.random_starts):
            V_rows.append(Vp)
            H_rows.append(Hp)
            S_rows.append(s)
            X_rows.append(p)
            owner.append(k)
    batch = _Batch(np.array(V_rows, dtype=float), np.array(H_rows, dtype=float),
                   np.array(S_rows, dtype=float))
    X, f, stalled = _ascend(W, batch, np.array(X_rows, dtype=float), cfg)
    owner = np.array(owner)

    results = []
    for k, (s, planes, verts) in enumerate(domains):
        rows = np.flatnonzero(owner == k)
        vals = np.where(np.isfinite(f[rows]), f[rows], -np.inf)
        best = rows[int(np.argmax(vals))]
        x, fx = X[best], float(f[best])
        if stalled[rows].any():
            x, fx = _coordinate_refine(W, x, s, planes, cfg)
        polished = _newton_polish(W, x, s, planes)
        fp = float(W.value(polished[None, :], np.array([s], dtype=float))[0])
        if fp >= fx:
            x, fx = polished, fp
        results.append((fx, (float(x[0]), float(x[1])), s))
    return results


def _clean(x, params: MarketParams):
    # projection can leave a coordinate a rounding error outside the box
    l1 = min(max(x[0], 0.0), params.Lambda1)
    l2 = min(max(x[1], 0.0), params.Lambda2)
    cap = params.mu * (1.0 - STAB_EPS)
    if l1 + l2 > cap:
        l2 = max(0.0, cap - l1)
    return EffectiveRates(l1, l2)


def compute_tolls(rates_star: EffectiveRates, params: MarketParams,
                  policy: InventoryPolicy) -> tuple[float, float]:
    """Per-type toll (positive) or subsidy (negative) that makes q* an equilibrium.

    tau_i = R_i - p_i - c_i E[W_i(lambda*)], so a type-i customer facing the toll
    is exactly indifferent at the planner's rates.
    """
    mu = params.mu
    l1, l2 = rates_star.as_tuple()
    check_stable(l1, l2, mu)
    return (
        params.margin(1) - params.c1 * _wait(l1, l2, policy.S1, mu),
        params.margin(2) - params.c2 * _wait(l2, l1, policy.S2, mu),
    )


def _pick_best(results, params: MarketParams):
    top = max(r[0] for r in results)
    tie = 1e-12 * max(1.0, abs(top))
    return min((r for r in results if r[0] >= top - tie), key=lambda r: (r[2], r[1]))


def optimize_welfare(params: MarketParams, config: PlannerConfig = PlannerConfig()) -> PlannerSolution:
    """Global welfare optimum over rates, with stock set optimally for those rates."""
    validate(params)
    if params.Lambda1 == 0.0 and params.Lambda2 == 0.0:
        raise EmptyFeasibleRegion("both potential arrival rates are zero")
    domains = []
    for s1 in range(rate_region_bound(1, params) + 1):
        for s2 in range(rate_region_bound(2, params) + 1):
            sub = subdomain_bounds(s1, s2, params)
            if not sub.is_empty:
                domains.append(((s1, s2), sub.halfplanes, sub.vertices))
    if not domains:
        raise EmptyFeasibleRegion("no subdomain intersects the feasible region")
    _, x, _ = _pick_best(_maximize_on(params, domains, config), params)
    rates = _clean(x, params)
    # relabel with the optimal stock at the returned point; on a shared
    # boundary this can only raise welfare
    policy = optimal_inventory_for_rates(rates, params)
    welfare = social_welfare(rates, policy, params)
    return PlannerSolution(rates, policy, welfare, policy.as_tuple(),
                           compute_tolls(rates, params, policy))


def optimize_rates_for_policy(policy: InventoryPolicy, params: MarketParams,
                              config: PlannerConfig = PlannerConfig()) -> PlannerSolution:
    """Welfare-maximizing rates with the stock held fixed at ``policy``."""
    validate(params)
    if params.Lambda1 == 0.0 and params.Lambda2 == 0.0:
        raise EmptyFeasibleRegion("both potential arrival rates are zero")
    planes = _feasible_halfplanes(params)
    verts = _polygon(planes, params)
    _, x, _ = _pick_best(_maximize_on(params, [(policy.as_tuple(), planes, verts)], config), params)
    rates = _clean(x, params)
    welfare = social_welfare(rates, policy, params)
    return PlannerSolution(rates, policy, welfare, subdomain_of(rates, params),
                           compute_tolls(rates, params, policy))
