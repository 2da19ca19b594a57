"""Decentralized versus centralized comparisons over (kappa, rho) grids.

Each cell takes the symmetric base market, sets c2 = kappa * c1,
Lambda1 = Lambda2 = rho * mu / 2 and h2 = ratio * h1, then solves both the
producer's problem and the planner's problem.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .equilibrium import Continuum
from .errors import MTSError
from .model import EffectiveRates, MarketParams, baseline, effective_rates, validate
from .performance import _wait
from .planner import PlannerConfig, optimize_welfare, social_welfare
from .producer import optimize_policy, profile_profit

CSV_HEADER = (
    "kappa", "rho", "h2_ratio",
    "S1_dec", "S2_dec", "q1_dec", "q2_dec", "profit_dec", "sw_dec",
    "S1_cen", "S2_cen", "lam1_cen", "lam2_cen", "sw_cen",
    "efficiency", "rho_eff_dec", "rho_eff_cen", "share1_dec", "share1_cen",
    "EW1_dec", "EW2_dec", "EW1_cen", "EW2_cen", "status",
)

DESK_KAPPA = (1.0, 20.0, 0.5)
DESK_RHO = (0.65, 0.90, 0.01)
FULL_KAPPA = (1.0, 20.0, 0.01)
FULL_RHO = (0.65, 0.90, 0.001)


def metrics(params: MarketParams) -> tuple[float, float, float, float]:
    """Delay tolerances nu_i = mu (R_i - p_i) / c_i, their ratio kappa, and rho."""
    validate(params)
    nu1 = params.mu * params.margin(1) / params.c1
    nu2 = params.mu * params.margin(2) / params.c2
    return nu1, nu2, nu1 / nu2, params.rho


def grid(lo: float, hi: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, rounded so that 0.65 + k * 0.01 prints cleanly."""
    if not (step > 0 and hi >= lo):
        raise ValueError(f"bad range {lo}:{hi}:{step}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + k * step, 12) for k in range(n)]


@dataclass(frozen=True)
class SweepSpec:
    kappa_range: tuple[float, float, float] = DESK_KAPPA
    rho_range: tuple[float, float, float] = DESK_RHO
    h2_over_h1: tuple[float, ...] = (1.0,)
    base: MarketParams = field(default_factory=baseline)
    cross_section_rho: float | None = None

    def __post_init__(self):
        for name in ("kappa_range", "rho_range"):
            lo, hi, step = getattr(self, name)
            if not (lo > 0 and hi >= lo and step > 0):
                raise ValueError(f"{name} must satisfy 0 < min <= max and step > 0")
        if self.rho_range[1] >= 1.0:
            raise ValueError("rho must stay below 1")
        if any(not r > 0 for r in self.h2_over_h1):
            raise ValueError("holding-cost ratios must be positive")

    def cell_params(self, kappa: float, rho: float, h_ratio: float) -> MarketParams:
        b = self.base
        lam = rho * b.mu / 2.0
        return b.replace(c2=kappa * b.c1, Lambda1=lam, Lambda2=lam, h2=h_ratio * b.h1)

    def cells(self, rhos: Sequence[float] | None = None) -> list[tuple[float, float, float]]:
        rhos = grid(*self.rho_range) if rhos is None else list(rhos)
        return [(k, r, h) for k in grid(*self.kappa_range) for r in rhos for h in self.h2_over_h1]


@dataclass(frozen=True)
class SweepCell:
    kappa: float
    rho: float
    h2_ratio: float
    status: str = "ok"
    S1_dec: int | None = None
    S2_dec: int | None = None
    q1_dec: float | None = None
    q2_dec: float | None = None
    profit_dec: float | None = None
    sw_dec: float | None = None
    S1_cen: int | None = None
    S2_cen: int | None = None
    lam1_cen: float | None = None
    lam2_cen: float | None = None
    sw_cen: float | None = None
    efficiency: float | None = None
    rho_eff_dec: float | None = None
    rho_eff_cen: float | None = None
    share1_dec: float | None = None
    share1_cen: float | None = None
    EW1_dec: float | None = None
    EW2_dec: float | None = None
    EW1_cen: float | None = None
    EW2_cen: float | None = None
    # the decentralized side hit a continuum and took its worst endpoint
    dec_continuum: bool = False

    def row(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in CSV_HEADER]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    if not math.isfinite(value):
        return ""
    return f"{value:.9g}"


def _share(q1: float, q2: float) -> float | None:
    return q1 / (q1 + q2) if q1 + q2 > 0 else None


def _waits(rates: EffectiveRates, policy, mu: float) -> tuple[float, float]:
    l1, l2 = rates.as_tuple()
    return _wait(l1, l2, policy.S1, mu), _wait(l2, l1, policy.S2, mu)


def solve_cell(spec: SweepSpec, kappa: float, rho: float, h_ratio: float,
               planner_config: PlannerConfig = PlannerConfig()) -> SweepCell:
    """Both solutions for one grid cell; solver failures are recorded, not raised."""
    try:
        params = validate(spec.cell_params(kappa, rho, h_ratio))
        dec = optimize_policy(params)
        eq = dec.equilibrium
        if isinstance(eq, Continuum):
            profile = min(eq.endpoints, key=lambda e: profile_profit(e, dec.policy, params))
        else:
            profile = eq.profile
        rates_dec = effective_rates(profile, params)
        sw_dec = social_welfare(rates_dec, dec.policy, params)
        cen = optimize_welfare(params, planner_config)
    except MTSError as exc:
        return SweepCell(kappa, rho, h_ratio, status=f"error:{exc.code}")

    mu = params.mu
    q1c, q2c = (cen.rates.lambda1 / params.Lambda1 if params.Lambda1 else 0.0,
                cen.rates.lambda2 / params.Lambda2 if params.Lambda2 else 0.0)
    ew_dec, ew_cen = _waits(rates_dec, dec.policy, mu), _waits(cen.rates, cen.policy, mu)
    return SweepCell(
        kappa, rho, h_ratio,
        S1_dec=dec.policy.S1, S2_dec=dec.policy.S2,
        q1_dec=profile.q1, q2_dec=profile.q2,
        profit_dec=dec.profit, sw_dec=sw_dec,
        S1_cen=cen.policy.S1, S2_cen=cen.policy.S2,
        lam1_cen=cen.rates.lambda1, lam2_cen=cen.rates.lambda2, sw_cen=cen.welfare,
        efficiency=sw_dec / cen.welfare if cen.welfare > 0 else None,
        rho_eff_dec=rates_dec.total / mu, rho_eff_cen=cen.rates.total / mu,
        share1_dec=_share(profile.q1, profile.q2), share1_cen=_share(q1c, q2c),
        EW1_dec=ew_dec[0], EW2_dec=ew_dec[1], EW1_cen=ew_cen[0], EW2_cen=ew_cen[1],
        dec_continuum=isinstance(eq, Continuum),
    )


def _solve_packed(args):
    return solve_cell(*args)


def _run_cells(spec: SweepSpec, cells, workers, planner_config) -> list[SweepCell]:
    jobs = [(spec, k, r, h, planner_config) for k, r, h in cells]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves input order, so the output is sorted by construction
            return list(pool.map(_solve_packed, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    return [_solve_packed(j) for j in jobs]


def run_sweep(spec: SweepSpec, workers: int | None = None,
              planner_config: PlannerConfig = PlannerConfig()) -> list[SweepCell]:
    """Every (kappa, rho, h-ratio) cell, ordered by kappa, then rho, then ratio."""
    return _run_cells(spec, spec.cells(), workers, planner_config)


def cross_section(spec: SweepSpec, workers: int | None = None,
                  planner_config: PlannerConfig = PlannerConfig()) -> list[SweepCell]:
    """The kappa series at the single potential utilization ``spec.cross_section_rho``."""
    if spec.cross_section_rho is None:
        raise ValueError("cross_section needs spec.cross_section_rho")
    return _run_cells(spec, spec.cells([spec.cross_section_rho]), workers, planner_config)


def write_csv(cells: Iterable[SweepCell], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for cell in cells:
        writer.writerow(cell.row())
