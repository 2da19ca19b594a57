import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mts2.errors import (
    IndexOutOfRange,
    NonpositiveMargin,
    NonpositiveRate,
    StabilityViolation,
    ValidationError,
)
from mts2.model import (
    EffectiveRates,
    InventoryPolicy,
    JoiningProfile,
    MarketParams,
    baseline,
    check_stable,
    effective_rates,
    load_params,
    validate,
)


def test_baseline_is_valid(base):
    assert validate(base) is base
    assert base.Lambda1 == base.Lambda2 == 0.45
    assert base.rho == pytest.approx(0.9)


def test_low_cost_variant_valid():
    validate(baseline(c1=1.0, h1=0.05))
    validate(baseline(kappa=20.0, c1=1.0, h1=0.05))


def test_stability_violation(base):
    with pytest.raises(StabilityViolation):
        validate(base.replace(Lambda1=0.6, Lambda2=0.5))
    with pytest.raises(StabilityViolation):
        validate(base.replace(Lambda1=0.5, Lambda2=0.5))


def test_relaxed_stability_still_checks_the_rest(base):
    loaded = base.replace(Lambda1=0.5, Lambda2=0.5)
    assert validate(loaded, require_stability=False) is loaded
    with pytest.raises(NonpositiveMargin):
        validate(loaded.replace(p1=10.0), require_stability=False)


def test_nonpositive_margin(base):
    with pytest.raises(NonpositiveMargin):
        validate(base.replace(R1=5.0, p1=5.0))


@pytest.mark.parametrize("field", ["mu", "c1", "c2", "h1", "h2"])
def test_nonpositive_rate(base, field):
    with pytest.raises(NonpositiveRate):
        validate(base.replace(**{field: 0.0}))


def test_nonfinite_rejected(base):
    with pytest.raises(ValidationError):
        validate(base.replace(R1=float("nan")))


def test_effective_rates_examples():
    params = baseline()
    assert effective_rates(JoiningProfile(1, 1), params).as_tuple() == (0.45, 0.45)
    assert effective_rates(JoiningProfile(0, 0), params).as_tuple() == (0.0, 0.0)
    p = params.replace(Lambda1=0.5, Lambda2=0.5)
    assert effective_rates(JoiningProfile(0.8, 0), p).as_tuple() == (0.4, 0.0)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_effective_rates_monotone_and_exact(q1, q1b, q2):
    params = baseline()
    lo, hi = sorted((q1, q1b))
    a = effective_rates(JoiningProfile(lo, q2), params)
    b = effective_rates(JoiningProfile(hi, q2), params)
    assert a.lambda1 <= b.lambda1
    assert a.lambda1 == lo * params.Lambda1
    assert a.lambda2 == b.lambda2 == q2 * params.Lambda2


def test_type_guards():
    with pytest.raises(ValidationError):
        InventoryPolicy(-1, 0)
    with pytest.raises(ValidationError):
        InventoryPolicy(1.5, 0)
    with pytest.raises(ValidationError):
        JoiningProfile(1.2, 0)
    with pytest.raises(ValidationError):
        EffectiveRates(-0.1, 0)
    with pytest.raises(IndexOutOfRange):
        baseline().c(3)


def test_check_stable_margin():
    check_stable(0.5, 0.5 - 2e-9, 1.0)
    with pytest.raises(StabilityViolation):
        check_stable(0.5, 0.5 - 1e-10, 1.0)


def test_swapped_round_trip(kappa20):
    assert kappa20.swapped().swapped() == kappa20
    assert kappa20.swapped().c1 == 60.0


def test_config_round_trip(tmp_path, kappa20):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(kappa20.to_config()))
    assert load_params(path) == kappa20


def test_config_errors(tmp_path, base):
    doc = base.to_config()
    bad = dict(doc)
    del bad["mu"]
    with pytest.raises(ValidationError, match="missing"):
        MarketParams.from_config(bad)
    with pytest.raises(ValidationError, match="unknown"):
        MarketParams.from_config({**doc, "extra": 1})
    with pytest.raises(ValidationError, match="two numbers"):
        MarketParams.from_config({**doc, "reward": [1, 2, 3]})
    with pytest.raises(ValidationError, match="numeric"):
        MarketParams.from_config({**doc, "mu": "1"})
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(ValidationError):
        load_params(tmp_path / "x.json")
    with pytest.raises(ValidationError):
        load_params(tmp_path / "missing.json")
