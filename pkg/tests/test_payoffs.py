import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import markets, spread_market
from multibinom.errors import BudgetExceeded, DimensionMismatch, KindMismatch, WeightError
from multibinom.market_core import (
    Column,
    NodeId,
    Scenario,
    enumerate_level,
    level_grid,
    scenario_bits,
    scenario_of_index,
)
from multibinom.payoffs import (
    Certificate,
    Kind,
    PayoffFn,
    certify,
    evaluate,
    geometric_asian_call,
    tabulate_path,
    tabulate_terminal,
)

UP, DOWN = 1, 0
COLS = [Column((1, 1)), Column((1, 0)), Column((0, 1)), Column((0, 0))]
SPREAD = PayoffFn.spread([0.5, 0.5], 100, 110)


@pytest.mark.parametrize("first,expected", [
    (Column((1, 1)), [10, 10, 7.5125, 0]),
    (Column((1, 0)), [10, 8.45, 0, 0]),
])
def test_spread_completions(first, expected):
    p = spread_market()
    got = [evaluate(SPREAD, Scenario((first, c)), p) for c in COLS]
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


def test_zero_strike_call_is_basket():
    p = spread_market()
    call = PayoffFn.basket_call([0.3, 0.7], 0.0)
    for node in enumerate_level(p, 2):
        prices = p.initial_prices * p.up ** np.array(node.up_counts) * p.down ** np.array(node.down_counts)
        assert evaluate(call, node, p) == pytest.approx(0.3 * prices[0] + 0.7 * prices[1], rel=1e-15)


def test_put_and_asian_by_hand():
    p = spread_market(2)
    put = PayoffFn.basket_put([0.5, 0.5], 100)
    assert evaluate(put, NodeId(2, (0, 0)), p) == pytest.approx(100 - 0.5 * (64 + 72.9))
    asian = PayoffFn.asian_call([0.5, 0.5], 90)
    scn = Scenario((Column((1, 0)), Column((0, 1))))
    s1 = 0.5 * (120 + 81)
    s2 = 0.5 * (96 + 81 * 1.15)
    assert evaluate(asian, scn, p) == pytest.approx(0.5 * (s1 + s2) - 90)
    # per-step weights: asset 0 at step 1, asset 1 at step 2
    aput = PayoffFn.asian_put([[1.0, 0.0], [0.0, 1.0]], 110)
    assert evaluate(aput, scn, p) == pytest.approx(110 - 0.5 * (120 + 81 * 1.15))


def test_kind_mismatch_and_shapes():
    p = spread_market(2)
    asian = PayoffFn.asian_call([0.5, 0.5], 90)
    with pytest.raises(KindMismatch):
        evaluate(asian, NodeId(2, (1, 1)), p)
    with pytest.raises(KindMismatch):
        evaluate(PayoffFn.basket_call([0.5, 0.5], 90), NodeId(1, (1, 1)), p)
    with pytest.raises(DimensionMismatch):
        PayoffFn.table_terminal(np.zeros(5)).terminal_values(p, level_grid(2, 2))
    with pytest.raises(DimensionMismatch):
        PayoffFn.asian_call(np.full((3, 2), 0.5), 90).path_values(p, scenario_bits(np.arange(16), 2, 2))


def test_weight_validation():
    with pytest.raises(WeightError):
        PayoffFn.basket_call([0.6, 0.6], 100)
    with pytest.raises(WeightError):
        PayoffFn.basket_call([1.5, -0.5], 100)
    with pytest.raises(WeightError):
        PayoffFn.basket_call(np.full((2, 2), 0.5), 100)
    with pytest.raises(ValueError):
        PayoffFn.spread([0.5, 0.5], 110, 100)


def test_from_mapping():
    pay = PayoffFn.from_mapping({"kind": "spread", "weights": [0.5, 0.5], "strikes": [100, 110]})
    assert pay.kind is Kind.SPREAD and pay.strike_high == 110
    tab = PayoffFn.from_mapping({"kind": "table_terminal", "values": [1, 2, 3]})
    assert tab.table.tolist() == [1.0, 2.0, 3.0]


@given(markets(m_max=3, n_max=3), st.integers(0, 2**32 - 1))
def test_spread_is_difference_of_calls(p, seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(p.num_assets))
    K1 = float(p.initial_prices @ w) * rng.uniform(0.7, 1.1)
    K2 = K1 * rng.uniform(1.01, 1.4)
    ups = level_grid(p.num_assets, p.num_steps)
    lhs = PayoffFn.spread(w, K1, K2).terminal_values(p, ups)
    rhs = PayoffFn.basket_call(w, K1).terminal_values(p, ups) - PayoffFn.basket_call(w, K2).terminal_values(p, ups)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@given(markets(m_max=3, n_max=3), st.integers(0, 2**32 - 1))
def test_table_round_trip(p, seed):
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(p.num_assets))
    put = PayoffFn.basket_put(w, float(p.initial_prices @ w))
    table = tabulate_terminal(put, p)
    for node in enumerate_level(p, p.num_steps):
        assert evaluate(table, node, p) == evaluate(put, node, p)
    m, n = p.num_assets, p.num_steps
    asian = PayoffFn.asian_call(w, float(p.initial_prices @ w))
    path_table = tabulate_path(lambda bits: asian.path_values(p, bits), p)
    for idx in rng.integers(0, (1 << m) ** n, size=10):
        scn = scenario_of_index(int(idx), m, n)
        assert evaluate(path_table, scn, p) == evaluate(asian, scn, p)


def test_tabulate_budget():
    p = spread_market(13)
    with pytest.raises(BudgetExceeded):
        tabulate_path(lambda bits: bits.sum(axis=(1, 2)), p)


def test_certify_examples():
    p = spread_market()
    asian = certify(PayoffFn.asian_call([0.5, 0.5], 95), p)
    assert asian.certificate is Certificate.SUPERMODULAR and asian.structural
    spread = certify(SPREAD, p)
    assert spread.certificate is Certificate.NEITHER
    assert spread.witness.fixed == (1, 1)
    const = certify(PayoffFn.table_terminal(np.full(9, 2.5)), p)
    assert const.certificate is Certificate.MODULAR
    neg = certify(PayoffFn.table_terminal(-PayoffFn.basket_call([0.5, 0.5], 100).terminal_values(p, level_grid(2, 2))), p)
    assert neg.certificate is Certificate.SUBMODULAR
    assert certify(geometric_asian_call(p.with_steps(3), [0.5, 0.5], 100), p.with_steps(3)).certificate is Certificate.NEITHER


def test_certify_unknown_on_budget():
    p = spread_market(12)
    table = PayoffFn.table_path(np.zeros(4**12))
    res = certify(table, p, max_bits=20)
    assert res.certificate is Certificate.UNKNOWN and "exceeds" in res.reason
    assert not res.certificate.closed_form_legal


STRUCTURAL_FACTORIES = [PayoffFn.basket_call, PayoffFn.basket_put, PayoffFn.asian_call, PayoffFn.asian_put]


@given(markets(m_max=4, n_max=4), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_structural_certificates_agree_with_exhaustive(p, which, seed):
    m = p.num_assets
    if m * p.num_steps > 12:
        p = p.with_steps(12 // m)
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(m))
    K = float(p.initial_prices @ w) * rng.uniform(0.0, 1.3)
    pay = STRUCTURAL_FACTORIES[which](w, K)
    quick = certify(pay, p)
    full = certify(pay, p, exhaustive=True)
    assert quick.certificate is Certificate.SUPERMODULAR
    # a claim can be modular too (e.g. a call that is always in the money)
    assert full.certificate in (Certificate.SUPERMODULAR, Certificate.MODULAR)
