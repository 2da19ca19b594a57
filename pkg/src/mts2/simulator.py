"""Discrete-event simulation of the two-product make-to-stock system.

This is the independent check on the closed forms in :mod:`mts2.performance`.
It shares no formulas with that module, only the event logic of the system:

* type-i customers join as a Poisson stream at rate q_i * Lambda_i;
* an arrival takes a unit from stock if one is on hand, otherwise it joins the
  type-i backlog; either way one type-i job goes to the tail of a single FCFS
  production queue;
* the server works the head job for an exponential(mu) time; a finished type-i
  job serves the oldest backlogged type-i customer, or else goes into stock.

Random numbers come from NumPy's PCG64 bit generator (permuted congruential
generator, 128-bit state, 64-bit output). Replication ``r`` is seeded with
``seed + r``, and each of the three exponential streams (two arrival streams,
one service stream) draws from its own child generator.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateConfig, ValidationError
from .model import (
    InventoryPolicy,
    JoiningProfile,
    MarketParams,
    check_stable,
    effective_rates,
    validate,
)
from .performance import PerformanceReport

_CHUNK = 1 << 15


@dataclass(frozen=True)
class SimConfig:
    num_arrivals: int = 100_000
    warmup_fraction: float = 0.2
    replications: int = 10
    seed: int = 12345

    def __post_init__(self):
        if self.num_arrivals < 1000:
            raise ValidationError("num_arrivals must be at least 1000")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValidationError("warmup_fraction must lie in [0, 1)")
        if self.replications < 1:
            raise ValidationError("replications must be at least 1")


@dataclass(frozen=True)
class Estimate:
    """Mean over replications with a Student-t 95% half-width.

    ``mean`` is None when the quantity was never observed (no arrivals of that
    type). ``half_width`` is None with fewer than two replications.
    """

    mean: float | None
    half_width: float | None

    def covers(self, value: float) -> bool:
        if self.mean is None or self.half_width is None:
            return False
        return abs(self.mean - value) <= self.half_width

    def to_dict(self) -> dict:
        return {"mean": self.mean, "half_width": self.half_width}


@dataclass(frozen=True)
class SimEstimates:
    mean_wait: tuple[Estimate, Estimate]
    time_avg_inventory: tuple[Estimate, Estimate]
    time_avg_backlog: tuple[Estimate, Estimate]
    stockout_fraction: tuple[Estimate, Estimate]
    realized_utilization: Estimate
    replications: int
    num_arrivals: int

    MEASURES = ("mean_wait", "time_avg_inventory", "time_avg_backlog", "stockout_fraction")

    def to_dict(self) -> dict:
        out = {}
        for i in (1, 2):
            out[f"type{i}"] = {m: getattr(self, m)[i - 1].to_dict() for m in self.MEASURES}
        out["realized_utilization"] = self.realized_utilization.to_dict()
        out["replications"] = self.replications
        out["num_arrivals"] = self.num_arrivals
        return out


class _Stream:
    """Exponential variates drawn in blocks; scale is fixed per stream."""

    __slots__ = ("rng", "scale", "buf", "pos")

    def __init__(self, rng, rate):
        self.rng = rng
        self.scale = 1.0 / rate
        self.buf = []
        self.pos = 0

    def refill(self):
        self.buf = (self.rng.standard_exponential(_CHUNK) * self.scale).tolist()
        self.pos = 0


def _run_replication(args):
    """One independent event loop; returns the per-replication statistics."""
    lam1, lam2, mu, S1, S2, num_arrivals, warmup_fraction, seed, check = args
    children = np.random.SeedSequence(seed).spawn(3)
    gens = [np.random.Generator(np.random.PCG64(s)) for s in children]
    inf = math.inf

    def stream(k, rate):
        return _Stream(gens[k], rate) if rate > 0 else None

    arr1, arr2, svc = stream(0, lam1), stream(1, lam2), stream(2, mu)

    def draw(s):
        if s.pos >= len(s.buf):
            s.refill()
        v = s.buf[s.pos]
        s.pos += 1
        return v

    I1, I2, B1, B2 = S1, S2, 0, 0
    jobs = deque()
    backlog1, backlog2 = deque(), deque()
    warm_n = int(warmup_fraction * num_arrivals)

    t = 0.0
    t_prev = 0.0
    t_warm = 0.0 if warm_n == 0 else inf
    recording = warm_n == 0
    area_I1 = area_I2 = area_B1 = area_B2 = busy = 0.0
    n1 = n2 = out1 = out2 = 0
    wsum1 = wsum2 = 0.0
    arrivals = 0

    next1 = draw(arr1) if arr1 else inf
    next2 = draw(arr2) if arr2 else inf
    done = inf
    t_end = None

    while True:
        if done <= next1 and done <= next2:
            if done == inf:
                break
            t = done
            kind = 0
        elif next1 <= next2:
            t = next1
            kind = 1
        else:
            t = next2
            kind = 2

        if recording:
            dt = t - t_prev
            area_I1 += I1 * dt
            area_I2 += I2 * dt
            area_B1 += B1 * dt
            area_B2 += B2 * dt
            if jobs:
                busy += dt
        t_prev = t

        if kind == 0:
            typ = jobs.popleft()
            if typ == 1:
                if B1:
                    B1 -= 1
                    a = backlog1.popleft()
                    if a >= t_warm:
                        wsum1 += t - a
                else:
                    I1 += 1
            else:
                if B2:
                    B2 -= 1
                    a = backlog2.popleft()
                    if a >= t_warm:
                        wsum2 += t - a
                else:
                    I2 += 1
            done = t + draw(svc) if jobs else inf
        else:
            if arrivals == warm_n and not recording:
                recording = True
                t_warm = t
            arrivals += 1
            if kind == 1:
                if recording:
                    n1 += 1
                if I1:
                    I1 -= 1
                else:
                    B1 += 1
                    backlog1.append(t)
                    if recording:
                        out1 += 1
                next1 = t + draw(arr1)
            else:
                if recording:
                    n2 += 1
                if I2:
                    I2 -= 1
                else:
                    B2 += 1
                    backlog2.append(t)
                    if recording:
                        out2 += 1
                next2 = t + draw(arr2)
            jobs.append(kind)
            if len(jobs) == 1:
                done = t + draw(svc)
            if arrivals == num_arrivals:
                # No new arrivals: time averages stop here, and the remaining
                # backlog drains (their waits depend only on jobs already queued).
                t_end = t
                recording = False
                next1 = next2 = inf

        if check:
            _check_state(jobs, I1, I2, B1, B2, S1, S2)

    span = t_end - t_warm
    nan = math.nan
    return {
        "wait": (wsum1 / n1 if n1 else nan, wsum2 / n2 if n2 else nan),
        "stockout": (out1 / n1 if n1 else nan, out2 / n2 if n2 else nan),
        "inventory": (area_I1 / span, area_I2 / span),
        "backlog": (area_B1 / span, area_B2 / span),
        "utilization": busy / span,
    }


def _check_state(jobs, I1, I2, B1, B2, S1, S2):
    N1 = sum(1 for j in jobs if j == 1)
    N2 = len(jobs) - N1
    for N, S, I, B in ((N1, S1, I1, B1), (N2, S2, I2, B2)):
        assert N == S - I + B, (N, S, I, B)
        assert 0 <= I <= S and B >= 0
        assert not (I > 0 and B > 0)


def _estimate(values) -> Estimate:
    x = np.asarray(values, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        return Estimate(None, None)
    mean = float(x.mean())
    if x.size < 2:
        return Estimate(mean, None)
    t_crit = stats.t.ppf(0.975, x.size - 1)
    return Estimate(mean, float(t_crit * x.std(ddof=1) / math.sqrt(x.size)))


def simulate(params: MarketParams, policy: InventoryPolicy, profile: JoiningProfile,
             config: SimConfig = SimConfig(), workers: int = 1,
             check_invariants: bool = False) -> SimEstimates:
    """Run ``config.replications`` independent replications and pool them."""
    validate(params)
    rates = effective_rates(profile, params)
    lam1, lam2 = rates.as_tuple()
    check_stable(lam1, lam2, params.mu)
    if lam1 == 0 and lam2 == 0:
        raise DegenerateConfig("both effective arrival rates are zero; nothing to simulate")

    jobs = [
        (lam1, lam2, params.mu, policy.S1, policy.S2, config.num_arrivals,
         config.warmup_fraction, config.seed + r, check_invariants)
        for r in range(config.replications)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_replication, jobs))
    else:
        runs = [_run_replication(j) for j in jobs]

    def per_type(key):
        return tuple(_estimate([run[key][i] for run in runs]) for i in (0, 1))

    return SimEstimates(
        mean_wait=per_type("wait"),
        time_avg_inventory=per_type("inventory"),
        time_avg_backlog=per_type("backlog"),
        stockout_fraction=per_type("stockout"),
        realized_utilization=_estimate([run["utilization"] for run in runs]),
        replications=config.replications,
        num_arrivals=config.num_arrivals,
    )


_REPORT_FIELDS = {
    "mean_wait": "expected_wait",
    "time_avg_inventory": "expected_inventory",
    "time_avg_backlog": "expected_backlog",
    "stockout_fraction": "stockout_prob",
}


def compare(est: SimEstimates, exact: PerformanceReport) -> dict:
    """z-scores of each simulated measure against its closed form.

    The standard error is recovered from the half-width, so z is on the same
    Student-t scale as the interval. Unobserved measures map to None.
    """
    t_crit = stats.t.ppf(0.975, est.replications - 1) if est.replications > 1 else math.nan
    out = {}
    for i in (1, 2):
        row = {}
        for sim_name, exact_name in _REPORT_FIELDS.items():
            e = getattr(est, sim_name)[i - 1]
            value = getattr(exact, exact_name)[i - 1]
            if e.mean is None or e.half_width is None:
                z = None
            elif e.half_width == 0:
                z = 0.0 if e.mean == value else math.copysign(math.inf, e.mean - value)
            else:
                z = float((e.mean - value) / (e.half_width / t_crit))
            row[sim_name] = {"exact": value, "simulated": e.mean, "z": z}
        out[f"type{i}"] = row
    return out
