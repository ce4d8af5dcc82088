import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invlab import autodiff as ad
from invlab.envs import (
    EconStatics,
    EnvSpec,
    init_endogenous,
    sell,
    step,
    step_dual,
    step_lead_time,
    step_lost_sales,
    step_perishable,
    step_returns,
    terminal_reward,
)
from helpers import central_diff, rel_err

ECON = EconStatics(p=10.0, c=1.0, h=0.5, b=2.0)


def test_lost_sales_example():
    y, r, info = step_lost_sales(5.0, 3.0, 6.0, ECON)
    assert y == 2.0 and r == 56.0
    assert info.sales == 6.0 and info.shortage == 0.0


def test_lost_sales_no_demand_and_stockout():
    y, r, _ = step_lost_sales(4.0, 0.0, 0.0, ECON)
    assert y == 4.0 and r == -0.5 * 4.0
    y, r, _ = step_lost_sales(0.0, 0.0, 4.0, ECON)
    assert y == 0.0 and r == -4 * 2.0


def test_negative_order_rejected():
    with pytest.raises(ValueError):
        step_lost_sales(1.0, -1.0, 1.0, ECON)
    with pytest.raises(ValueError):
        step_dual([1.0], 0.0, -2.0, 1.0, ECON, 0)


def test_lead_time_example():
    new, _, info = step_lead_time([2.0, 3.0, 4.0], 5.0, 6.0, ECON)
    assert [float(v) for v in new] == [3.0, 4.0, 5.0]
    assert info.sales == 2.0


def test_lead_time_one_is_lost_sales_with_delayed_arrivals():
    rng = np.random.default_rng(0)
    d = rng.gamma(2.0, 5.0, size=30)
    q = rng.uniform(0, 15, size=30)
    y_lt = [3.0]
    y_ls = 3.0
    for t in range(30):
        y_lt, r_lt, i_lt = step_lead_time(y_lt, q[t], d[t], ECON)
        arrival = 0.0 if t == 0 else q[t - 1]
        y_ls, r_ls, i_ls = step_lost_sales(y_ls, arrival, d[t], ECON)
        assert i_lt.sales == i_ls.sales
        # identical except for when the purchase cost is booked
        assert r_lt + ECON.c * q[t] == pytest.approx(r_ls + ECON.c * arrival, abs=1e-12)
    assert float(y_lt[0]) == pytest.approx(y_ls + q[-1], abs=1e-12)


def test_perishable_examples():
    new, _, info = step_perishable([2.0, 5.0], 3.0, 4.0, ECON)
    assert [float(v) for v in new] == [1.0, 4.0]
    assert info.sales == 4.0 and info.perished == 0.0
    new, _, info = step_perishable([2.0, 5.0], 1.0, 0.0, ECON)
    assert info.perished == 2.0 and info.sales == 0.0
    assert [float(v) for v in new] == [3.0, 4.0]


def test_perishable_rejects_decreasing_state():
    with pytest.raises(ValueError):
        step_perishable([5.0, 2.0], 0.0, 1.0, ECON)
    with pytest.raises(ValueError):
        step_perishable([np.array([1.0, 5.0]), np.array([2.0, 2.0])], 0.0, 1.0, ECON)


def test_perishable_long_shelf_life_matches_lost_sales():
    rng = np.random.default_rng(1)
    T = 12
    d = rng.gamma(2.0, 5.0, size=T)
    q = rng.uniform(0, 15, size=T)
    w = [0.0] * T  # shelf life T+1: nothing expires within T periods
    y = 0.0
    for t in range(T):
        w, r_p, i_p = step_perishable(w, q[t], d[t], ECON)
        y, r_l, _ = step_lost_sales(y, q[t], d[t], ECON)
        assert i_p.perished == 0.0
        assert r_p == pytest.approx(r_l, abs=1e-12)
        assert float(w[-1]) == pytest.approx(float(y), abs=1e-12)


def test_dual_slot_semantics():
    new, _, info = step_dual([4.0], 2.0, 1.0, 3.0, ECON, L_e=0)
    assert info.available == 6.0
    assert float(new[0]) == 3.0 + 1.0
    new, _, _ = step_dual([1.0, 1.0, 1.0, 1.0], 2.0, 3.0, 0.0, ECON, L_e=2)
    assert [float(v) for v in new] == [2.0, 3.0, 1.0, 3.0]


def test_dual_backlog_goes_negative():
    econ = EconStatics(p=10.0, c=0.0, h=0.5, b=2.0, c_e=3.0, c_r=1.0)
    new, r, _ = step_dual([1.0], 0.0, 0.0, 3.0, econ, L_e=0, demand_mode="backlog")
    assert float(new[0]) == -2.0
    assert r == 10.0 * 3.0 - 2 * 2.0


def test_returns_example():
    econ = EconStatics(p=10.0, c=5.0, h=1.0, b=2.0, r=3.0)
    y, r, info = step_returns(100.0, 0.0, 60.0, 10.0, econ)
    assert y == 30.0 and r == 250.0 and info.sales == 10.0


def test_returns_capped_at_stock():
    econ = EconStatics(p=10.0, c=5.0, h=1.0, b=2.0, r=3.0)
    y, r, info = step_returns(20.0, 0.0, 50.0, 0.0, econ)
    assert y == 0.0 and info.extra["returned"] == 20.0 and r == 60.0


def test_returns_without_returns_is_lost_sales():
    econ = EconStatics(p=10.0, c=5.0, h=1.0, b=2.0, r=3.0)
    rng = np.random.default_rng(2)
    for _ in range(50):
        y, q, d = rng.uniform(0, 20, size=3)
        a = step_returns(y, q, 0.0, d, econ)
        b = step_lost_sales(y, q, d, econ)
        assert a[0] == b[0] and a[1] == pytest.approx(b[1], abs=1e-12)


def test_ordering_and_returning_together_is_dominated():
    # netting the two actions never loses when r < c
    econ = EconStatics(p=10.0, c=5.0, h=1.0, b=2.0, r=3.0)
    grid = np.linspace(0, 12, 13)
    for y in (0.0, 4.0, 10.0):
        for d in (0.0, 5.0, 12.0):
            for q in grid[1:]:
                for qr in grid[1:]:
                    qr_eff = min(qr, y)
                    if qr_eff == 0:
                        continue
                    both = step_returns(y, q, qr, d, econ)[1]
                    net = q - qr_eff
                    alt = step_returns(y, max(net, 0.0), max(-net, 0.0), d, econ)[1]
                    assert alt >= both - 1e-12


def test_init_rules():
    window = np.full((4, 8), 10.0)
    window[:, -1] = 50.0
    rng = np.random.default_rng(3)
    zero = init_endogenous(EnvSpec("lead_time", L=3), window, None, "zero")
    assert all(np.all(s == 0) for s in zero) and len(zero) == 3
    for _ in range(20):
        slots = init_endogenous(EnvSpec("lead_time", L=3), window, rng, "uniform_demand_scaled")
        assert all(np.all((s >= 0) & (s <= 100)) for s in slots)
    w = init_endogenous(EnvSpec("perishable", m=4), window, rng, "uniform_demand_scaled")
    assert np.all(np.diff(np.stack(w), axis=0) >= 0)
    window[:] = 10.0
    for _ in range(20):
        (y,) = init_endogenous(EnvSpec("returns"), window, rng, "returns_overstock")
        assert np.all((y >= 0) & (y <= 200))
    with pytest.raises(ValueError):
        init_endogenous(EnvSpec(), window, rng, "bogus")


def test_terminal_reward():
    econ = EconStatics(p=10.0, c=4.0, h=1.0, b=1.0)
    assert terminal_reward(EnvSpec(), [np.array([7.0])], econ)[0] == 28.0
    assert terminal_reward(EnvSpec(), [np.zeros(1)], econ)[0] == 0.0
    assert terminal_reward(EnvSpec(terminal="none"), [np.array([7.0])], econ)[0] == 0.0
    lt = EnvSpec("lead_time", L=2)
    assert terminal_reward(lt, [np.array([1.0]), np.array([2.0])], econ)[0] == 12.0
    per = EnvSpec("perishable", m=3)
    assert terminal_reward(per, [np.array([1.0]), np.array([3.0])], econ)[0] == 12.0


def test_envspec_validation():
    for bad in (dict(kind="x"), dict(L=0), dict(m=1), dict(L_e=1, L_r=1),
                dict(kind="lead_time", demand_mode="backlog"), dict(gamma=0.0)):
        with pytest.raises(ValueError):
            EnvSpec(**bad)
    assert EnvSpec("dual_sourcing", L_r=3).endo_dim == 3
    assert EnvSpec("perishable", m=5).endo_dim == 4
    assert EnvSpec("returns").action_dim == 2


nonneg = st.floats(0, 50, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(nonneg, min_size=4, max_size=4), nonneg, nonneg)
def test_lead_time_conservation(y, q, d):
    new, _, info = step_lead_time(y, q, d, ECON)
    assert sum(map(float, new)) == pytest.approx(sum(y) + q - float(info.sales), abs=1e-9)
    assert all(float(v) >= 0 for v in new)


@settings(max_examples=200, deadline=None)
@given(st.lists(nonneg, min_size=3, max_size=3), nonneg, nonneg)
def test_perishable_conservation_and_monotonicity(inc, q, d):
    w = list(np.cumsum(inc))
    new, _, info = step_perishable(w, q, d, ECON)
    assert float(new[-1]) == pytest.approx(w[-1] + q - float(info.sales) - float(info.perished), abs=1e-9)
    assert all(float(b) >= float(a) for a, b in zip(new, new[1:]))
    assert all(float(v) >= 0 for v in new)


@settings(max_examples=200, deadline=None)
@given(st.lists(nonneg, min_size=3, max_size=3), nonneg, nonneg, nonneg, st.integers(0, 2))
def test_dual_conservation(y, qe, qr, d, L_e):
    new, _, info = step_dual(y, qe, qr, d, ECON, L_e)
    assert sum(map(float, new)) == pytest.approx(sum(y) + qe + qr - float(info.sales), abs=1e-9)
    new, _, _ = step_dual(y, qe, qr, d, ECON, L_e, "backlog")
    assert sum(map(float, new)) == pytest.approx(sum(y) + qe + qr - d, abs=1e-9)


def test_sell_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    a = rng.uniform(0, 10, 6)
    d = rng.uniform(0, 10, 6)
    p, b, h = 3.0, 2.0, 0.5
    wl, wr = rng.normal(size=6), rng.normal(size=6)
    x = ad.Array(a, requires_grad=True)
    with ad.Tape() as tape:
        left, reward = sell(x, d, p, b, h)
        loss = ad.add(ad.sum(ad.mul(left, wl)), ad.sum(ad.mul(reward, wr)))
    (g,) = tape.backward(loss, [x])

    def plain(v):
        left = np.maximum(v - d, 0)
        rew = p * np.minimum(v, d) - b * np.maximum(d - v, 0) - h * np.maximum(v - d, 0)
        return float((left * wl + rew * wr).sum())

    assert rel_err(g, central_diff(plain, a)) < 1e-8


@pytest.mark.parametrize("kind", ["lost_sales", "lead_time", "perishable", "dual_sourcing", "dual_backlog", "returns"])
def test_two_period_rollout_gradient(kind):
    spec = {"lead_time": EnvSpec("lead_time", L=2), "perishable": EnvSpec("perishable", m=3),
            "dual_sourcing": EnvSpec("dual_sourcing", L_r=2),
            "dual_backlog": EnvSpec("dual_sourcing", L_e=0, L_r=1, demand_mode="backlog")}.get(kind)
    spec = spec or EnvSpec(kind)
    rng = np.random.default_rng(5)
    B = 5
    econ = EconStatics(p=rng.uniform(5, 10, B), c=rng.uniform(1, 3, B), h=rng.uniform(0, 1, B),
                       b=rng.uniform(0, 3, B), c_e=rng.uniform(2, 3, B), c_r=rng.uniform(1, 2, B),
                       r=rng.uniform(0, 1, B))
    d = rng.uniform(0, 10, (2, B))
    init = rng.uniform(0, 6, (spec.endo_dim, B))
    if kind == "perishable":
        init = np.cumsum(init, axis=0)
    acts = rng.uniform(0.5, 8, (2, spec.action_dim, B))

    def total(a, traced):
        state = [s for s in init]
        out = 0.0
        for t in range(2):
            action = [ad.getitem(a, (t, k)) if traced else a[t, k] for k in range(spec.action_dim)]
            state, r, _ = step(spec, state, action, d[t], econ)
            out = ad.add(out, ad.sum(r))
        return out

    x = ad.Array(acts, requires_grad=True)
    with ad.Tape() as tape:
        loss = total(x, True)
    (g,) = tape.backward(loss, [x])
    assert rel_err(g, central_diff(lambda v: float(total(v, False)), acts)) < 1e-4
