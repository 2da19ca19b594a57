import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import sparse
from scipy.sparse.linalg import spsolve

from mts2.errors import IndexOutOfRange, StabilityViolation
from mts2.model import EffectiveRates, InventoryPolicy, baseline
from mts2.performance import (
    backlog_pmf,
    expected_backlog,
    expected_inventory,
    expected_wait,
    inventory_pmf,
    position_moments,
    position_pmf,
    queue_length_pmf,
    report,
    stockout_prob,
)

R = EffectiveRates
P = InventoryPolicy


# ---------------------------------------------------------------------------
# worked values


def test_queue_length_examples():
    assert queue_length_pmf(0, R(0, 0), 1.0) == 1.0
    assert queue_length_pmf(0, R(0.25, 0.25), 1.0) == pytest.approx(0.5)
    assert queue_length_pmf(2, R(0.3, 0.3), 1.0) == pytest.approx(0.144)
    with pytest.raises(StabilityViolation):
        queue_length_pmf(0, R(0.6, 0.5), 1.0)


def test_inventory_pmf_examples():
    assert inventory_pmf(0, 1, R(0.3, 0.2), P(0, 0), 1.0) == 1.0
    assert inventory_pmf(0, 1, R(0.45, 0), P(2, 0), 1.0) == pytest.approx(0.2025)
    assert inventory_pmf(1, 1, R(0.45, 0.45), P(1, 0), 1.0) == pytest.approx(1 - 0.45 / 0.55)
    with pytest.raises(IndexOutOfRange):
        inventory_pmf(3, 1, R(0.3, 0.2), P(2, 0), 1.0)


def test_backlog_pmf_examples():
    assert backlog_pmf(0, 1, R(0.3, 0.2), P(0, 0), 1.0) == pytest.approx(0.625)
    assert backlog_pmf(0, 1, R(0.0, 0.4), P(3, 0), 1.0) == 1.0
    assert backlog_pmf(1, 1, R(0.45, 0), P(1, 0), 1.0) == pytest.approx(0.55 * 0.45 ** 2)


def test_position_pmf_examples():
    assert position_pmf(1, 0, 1, R(0.45, 0), P(1, 0), 1.0) == pytest.approx(0.2475)
    assert position_pmf(3, 0, 1, R(0.3, 0.3), P(2, 0), 1.0) == 0.0
    with pytest.raises(IndexOutOfRange):
        position_pmf(1, 0, 1, R(0.3, 0.3), P(0, 0), 1.0)
    mass, _ = position_moments(1, R(0.3, 0.3), P(2, 2), 1.0)
    assert mass == pytest.approx(0.18367, abs=1e-5)


def test_measure_examples():
    assert expected_wait(1, R(0.3, 0.2), P(0, 0), 1.0) == pytest.approx(2.0)
    assert expected_wait(1, R(0.3, 0.3), P(2, 0), 1.0) == pytest.approx(0.45918, abs=1e-5)
    assert expected_wait(1, R(0.0, 0.4), P(1, 0), 1.0) == 0.0
    assert expected_inventory(1, R(0.45, 0), P(0, 0), 1.0) == 0.0
    assert expected_inventory(1, R(0.45, 0), P(1, 0), 1.0) == pytest.approx(0.55)
    assert expected_inventory(1, R(0.45, 0), P(2, 0), 1.0) == pytest.approx(1.3475)
    assert expected_backlog(1, R(0, 0.3), P(2, 0), 1.0) == 0.0
    assert expected_backlog(1, R(0.45, 0), P(1, 0), 1.0) == pytest.approx(0.36818, abs=1e-5)
    assert expected_backlog(1, R(0.3, 0.2), P(0, 0), 1.0) == pytest.approx(0.6)


def test_zero_power_convention():
    # S = 0 with no demand degenerates to the M/M/1 sojourn time
    assert expected_wait(1, R(0.0, 0.3), P(0, 0), 1.0) == pytest.approx(1 / 0.7)
    assert stockout_prob(1, R(0.0, 0.3), P(0, 0), 1.0) == 1.0


def test_report_examples():
    rep = report(R(0.45, 0), P(1, 0), baseline())
    assert rep.expected_wait[0] == pytest.approx(0.81818, abs=1e-5)
    assert rep.expected_inventory[0] == pytest.approx(0.55)
    assert rep.expected_backlog[0] == pytest.approx(0.36818, abs=1e-5)
    assert rep.stockout_prob[0] == pytest.approx(0.45)
    empty = report(R(0, 0), P(2, 1), baseline())
    assert empty.expected_inventory == (2.0, 1.0)
    assert empty.expected_backlog == (0.0, 0.0)
    assert empty.total_utilization == 0.0
    sym = report(R(0.3, 0.3), P(2, 2), baseline())
    assert sym.expected_wait[0] == sym.expected_wait[1]
    assert set(sym.to_dict()) == {"type1", "type2", "total_utilization"}


# ---------------------------------------------------------------------------
# independent oracle: the CTMC over the ordered sequence of job types


def _ctmc_measures(lam1, lam2, mu, S1, S2, max_len):
    """Stationary means from a numerically solved, truncated FCFS chain.

    The state is the tuple of job types in the production queue, head first.
    This knows nothing about the geometric product form.
    """
    states = [()]
    for n in range(1, max_len + 1):
        states.extend(itertools.product((1, 2), repeat=n))
    index = {s: k for k, s in enumerate(states)}
    rows, cols, vals = [], [], []
    for s, k in index.items():
        out = 0.0
        if len(s) < max_len:
            for typ, rate in ((1, lam1), (2, lam2)):
                if rate > 0:
                    rows.append(k)
                    cols.append(index[s + (typ,)])
                    vals.append(rate)
                    out += rate
        if s:
            rows.append(k)
            cols.append(index[s[1:]])
            vals.append(mu)
            out += mu
        rows.append(k)
        cols.append(k)
        vals.append(-out)
    n = len(states)
    Q = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n)).T.tolil()
    Q[0, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[0] = 1.0
    pi = spsolve(Q.tocsr(), rhs)
    N1 = np.array([s.count(1) for s in states])
    N2 = np.array([s.count(2) for s in states])
    out = {}
    for i, N, S, lam in ((1, N1, S1, lam1), (2, N2, S2, lam2)):
        inv = pi @ np.maximum(S - N, 0)
        back = pi @ np.maximum(N - S, 0)
        out[i] = {
            "inventory": inv,
            "backlog": back,
            "stockout": pi @ (N >= S),
            "wait": back / lam if lam > 0 else math.nan,
        }
    return out


@pytest.mark.parametrize("lam,S", [
    ((0.2, 0.1), (1, 2)),
    ((0.25, 0.05), (2, 0)),
    ((0.05, 0.25), (0, 3)),
])
def test_closed_forms_match_numerical_ctmc(lam, S):
    # at load 0.3 truncation moves the tail means by about 1e-7 absolute
    oracle = _ctmc_measures(*lam, 1.0, *S, max_len=14)
    rep = report(R(*lam), P(*S), baseline())
    for i in (1, 2):
        assert rep.expected_inventory[i - 1] == pytest.approx(oracle[i]["inventory"], rel=1e-4, abs=1e-6)
        assert rep.expected_backlog[i - 1] == pytest.approx(oracle[i]["backlog"], rel=1e-4, abs=1e-6)
        assert rep.stockout_prob[i - 1] == pytest.approx(oracle[i]["stockout"], rel=1e-4, abs=1e-6)
        assert rep.expected_wait[i - 1] == pytest.approx(oracle[i]["wait"], rel=1e-4)


# ---------------------------------------------------------------------------
# properties

rates_strategy = st.tuples(st.floats(0.0, 0.98), st.floats(0.0, 1.0)).map(
    lambda t: (t[0] * t[1], t[0] * (1 - t[1])))
stock = st.integers(0, 25)


@given(rates_strategy, stock, stock)
def test_inventory_pmf_normalizes(lam, S1, S2):
    assume(sum(lam) <= 0.98)
    total = math.fsum(inventory_pmf(k, 1, R(*lam), P(S1, S2), 1.0) for k in range(S1 + 1))
    assert total == pytest.approx(1.0, abs=1e-12)


@given(rates_strategy, stock)
def test_backlog_pmf_normalizes(lam, S1):
    lam1, lam2 = lam
    r = lam1 / (1.0 - lam2)
    assume(r < 0.95)
    # truncate where the remaining geometric tail r^(S+K+1) is below 1e-12
    K = 1 if r == 0 else max(1, math.ceil(math.log(1e-12) / math.log(r)) - S1)
    total = math.fsum(backlog_pmf(k, 1, R(*lam), P(S1, 0), 1.0) for k in range(K + 1))
    assert total == pytest.approx(1.0, abs=1e-10)


@given(rates_strategy, stock, stock)
def test_little_and_flow_identity(lam, S1, S2):
    rates, policy = R(*lam), P(S1, S2)
    rep = report(rates, policy, baseline())
    A = 1.0 - sum(lam)
    for i in (1, 2):
        lam_i, S = rates.lam(i), policy.S(i)
        assert rep.expected_backlog[i - 1] == pytest.approx(lam_i * rep.expected_wait[i - 1], rel=1e-12, abs=1e-12)
        lhs = S - rep.expected_inventory[i - 1] + rep.expected_backlog[i - 1]
        assert lhs == pytest.approx(lam_i / A, rel=1e-12, abs=1e-12)
        assert 0.0 <= rep.stockout_prob[i - 1] <= 1.0
        assert -1e-12 <= rep.expected_inventory[i - 1] <= S + 1e-12


@given(rates_strategy, st.integers(0, 20), stock)
def test_wait_decreases_in_own_stock_only(lam, S1, S2):
    rates = R(*lam)
    assume(rates.lambda1 > 1e-3)
    w = expected_wait(1, rates, P(S1, S2), 1.0)
    assert expected_wait(1, rates, P(S1 + 1, S2), 1.0) < w
    assert expected_wait(1, rates, P(S1, S2 + 3), 1.0) == w


@given(rates_strategy, stock, stock)
def test_swap_symmetry(lam, S1, S2):
    a = report(R(*lam), P(S1, S2), baseline())
    b = report(R(*lam).swapped(), P(S1, S2).swapped(), baseline())
    for field in ("expected_wait", "expected_inventory", "expected_backlog", "stockout_prob"):
        assert getattr(a, field) == getattr(b, field)[::-1]


@given(rates_strategy, st.integers(1, 4))
def test_position_law_consistency(lam, S1):
    lam1, lam2 = lam
    assume(lam1 > 1e-3 and sum(lam) <= 0.9)
    rates, policy = R(lam1, lam2), P(S1, 0)
    mass, first = position_moments(1, rates, policy, 1.0)
    assert mass == pytest.approx(stockout_prob(1, rates, policy, 1.0), abs=1e-8)
    assert first / 1.0 == pytest.approx(expected_wait(1, rates, policy, 1.0), abs=1e-8)
