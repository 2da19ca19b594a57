"""Exogenous parameters of the two-product make-to-stock system.

Types are immutable dataclasses. Product types are indexed 1 and 2 throughout
the package, matching the usual notation for this model.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Mapping

from .errors import (
    IndexOutOfRange,
    NonpositiveMargin,
    NonpositiveRate,
    StabilityViolation,
    ValidationError,
)

# Every closed form divides by mu - lambda1 - lambda2.
STAB_EPS = 1e-9

CONFIG_KEYS = ("mu", "lambda_cap", "reward", "price", "wait_cost", "hold_cost")


def _pick(i: int, first, second):
    if i == 1:
        return first
    if i == 2:
        return second
    raise IndexOutOfRange(f"product type must be 1 or 2, got {i!r}")


def other(i: int) -> int:
    if i == 1:
        return 2
    if i == 2:
        return 1
    raise IndexOutOfRange(f"product type must be 1 or 2, got {i!r}")


@dataclass(frozen=True)
class MarketParams:
    mu: float
    Lambda1: float
    Lambda2: float
    R1: float
    R2: float
    p1: float
    p2: float
    c1: float
    c2: float
    h1: float
    h2: float

    def Lambda(self, i: int) -> float:
        return _pick(i, self.Lambda1, self.Lambda2)

    def R(self, i: int) -> float:
        return _pick(i, self.R1, self.R2)

    def p(self, i: int) -> float:
        return _pick(i, self.p1, self.p2)

    def c(self, i: int) -> float:
        return _pick(i, self.c1, self.c2)

    def h(self, i: int) -> float:
        return _pick(i, self.h1, self.h2)

    def margin(self, i: int) -> float:
        """Purchase surplus R_i - p_i."""
        return self.R(i) - self.p(i)

    def patience_ratio(self, i: int) -> float:
        """Waiting cost per unit of surplus, c_i / (R_i - p_i)."""
        return self.c(i) / self.margin(i)

    @property
    def rho(self) -> float:
        """Potential utilization (Lambda1 + Lambda2) / mu."""
        return (self.Lambda1 + self.Lambda2) / self.mu

    def swapped(self) -> MarketParams:
        """The same market with the two product labels exchanged."""
        return MarketParams(
            mu=self.mu,
            Lambda1=self.Lambda2, Lambda2=self.Lambda1,
            R1=self.R2, R2=self.R1,
            p1=self.p2, p2=self.p1,
            c1=self.c2, c2=self.c1,
            h1=self.h2, h2=self.h1,
        )

    def replace(self, **changes) -> MarketParams:
        return replace(self, **changes)

    def to_config(self) -> dict:
        return {
            "mu": self.mu,
            "lambda_cap": [self.Lambda1, self.Lambda2],
            "reward": [self.R1, self.R2],
            "price": [self.p1, self.p2],
            "wait_cost": [self.c1, self.c2],
            "hold_cost": [self.h1, self.h2],
        }

    @classmethod
    def from_config(cls, doc: Mapping[str, Any]) -> MarketParams:
        """Build from the JSON configuration layout (no validation)."""
        missing = [k for k in CONFIG_KEYS if k not in doc]
        if missing:
            raise ValidationError(f"config is missing keys: {', '.join(missing)}")
        unknown = sorted(set(doc) - set(CONFIG_KEYS))
        if unknown:
            raise ValidationError(f"config has unknown keys: {', '.join(unknown)}")

        def pair(key):
            value = doc[key]
            if not isinstance(value, (list, tuple)) or len(value) != 2:
                raise ValidationError(f"config key {key!r} must be a list of two numbers")
            return tuple(_number(key, v) for v in value)

        (L1, L2), (R1, R2), (p1, p2) = pair("lambda_cap"), pair("reward"), pair("price")
        (c1, c2), (h1, h2) = pair("wait_cost"), pair("hold_cost")
        return cls(_number("mu", doc["mu"]), L1, L2, R1, R2, p1, p2, c1, c2, h1, h2)


def _number(key, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"config key {key!r} must be numeric, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class InventoryPolicy:
    """Base-stock targets (S1, S2)."""

    S1: int = 0
    S2: int = 0

    def __post_init__(self):
        for name in ("S1", "S2"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ValidationError(f"{name} must be a nonnegative integer, got {value!r}")

    def S(self, i: int) -> int:
        return _pick(i, self.S1, self.S2)

    def as_tuple(self) -> tuple[int, int]:
        return (self.S1, self.S2)

    def swapped(self) -> InventoryPolicy:
        return InventoryPolicy(self.S2, self.S1)


@dataclass(frozen=True)
class JoiningProfile:
    """Per-type joining probabilities."""

    q1: float
    q2: float

    def __post_init__(self):
        for name in ("q1", "q2"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1], got {value!r}")

    def q(self, i: int) -> float:
        return _pick(i, self.q1, self.q2)

    def as_tuple(self) -> tuple[float, float]:
        return (self.q1, self.q2)


@dataclass(frozen=True)
class EffectiveRates:
    """Arrival rates of customers who actually join."""

    lambda1: float
    lambda2: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = getattr(self, name)
            if not (value >= 0.0 and math.isfinite(value)):
                raise ValidationError(f"{name} must be finite and nonnegative, got {value!r}")

    def lam(self, i: int) -> float:
        return _pick(i, self.lambda1, self.lambda2)

    @property
    def total(self) -> float:
        return self.lambda1 + self.lambda2

    def as_tuple(self) -> tuple[float, float]:
        return (self.lambda1, self.lambda2)

    def swapped(self) -> EffectiveRates:
        return EffectiveRates(self.lambda2, self.lambda1)


def validate(params: MarketParams, require_stability: bool = True) -> MarketParams:
    """Check the model assumptions; return ``params`` unchanged if they hold.

    The joining game itself only needs stability at the equilibrium rates, so
    its solvers pass ``require_stability=False`` and accept a potential load
    Lambda1 + Lambda2 at or above mu.
    """
    values = asdict(params)
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValidationError(f"{name} must be finite, got {value!r}")
    for name in ("mu", "c1", "c2", "h1", "h2"):
        if values[name] <= 0:
            raise NonpositiveRate(f"{name} must be strictly positive, got {values[name]!r}")
    for name in ("Lambda1", "Lambda2", "p1", "p2"):
        if values[name] < 0:
            raise ValidationError(f"{name} must be nonnegative, got {values[name]!r}")
    if require_stability and params.Lambda1 + params.Lambda2 >= params.mu:
        raise StabilityViolation(
            f"Lambda1 + Lambda2 = {params.Lambda1 + params.Lambda2!r} must be below mu = {params.mu!r}"
        )
    for i in (1, 2):
        if params.margin(i) <= 0:
            raise NonpositiveMargin(f"R{i} must exceed p{i} (R{i}={params.R(i)!r}, p{i}={params.p(i)!r})")
    return params


def effective_rates(profile: JoiningProfile, params: MarketParams) -> EffectiveRates:
    return EffectiveRates(profile.q1 * params.Lambda1, profile.q2 * params.Lambda2)


def check_stable(lam1: float, lam2: float, mu: float) -> None:
    if lam1 < 0 or lam2 < 0:
        raise StabilityViolation(f"effective rates must be nonnegative, got ({lam1!r}, {lam2!r})")
    if not lam1 + lam2 <= mu * (1.0 - STAB_EPS):
        raise StabilityViolation(
            f"lambda1 + lambda2 = {lam1 + lam2!r} violates the stability margin for mu = {mu!r}"
        )


def load_params(path: str | Path) -> MarketParams:
    """Read and validate a JSON configuration file."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read config {str(path)!r}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {str(path)!r} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    return validate(MarketParams.from_config(doc))


def baseline(kappa: float = 1.0, rho: float = 0.9, h_ratio: float = 1.0,
             c1: float = 3.0, h1: float = 0.4) -> MarketParams:
    """The symmetric experimental configuration: mu=1, R=10, p=5.

    Type 2 differs only through c2 = kappa * c1 and h2 = h_ratio * h1.
    """
    lam = rho / 2.0
    return MarketParams(
        mu=1.0, Lambda1=lam, Lambda2=lam, R1=10.0, R2=10.0, p1=5.0, p2=5.0,
        c1=c1, c2=kappa * c1, h1=h1, h2=h_ratio * h1,
    )
