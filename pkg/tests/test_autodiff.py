import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from invlab import autodiff as ad
from helpers import central_diff, rel_err, tape_grad


def test_max_routes_gradient_to_selected_operand():
    a = ad.Array([3.0, -1.0], requires_grad=True)
    with ad.Tape() as tape:
        out = ad.elementwise("max", a, np.zeros(2))
        loss = ad.sum(out)
    np.testing.assert_array_equal(out.value, [3.0, 0.0])
    (g,) = tape.backward(loss, [a])
    np.testing.assert_array_equal(g, [1.0, 0.0])


def test_ties_go_to_first_operand():
    a = ad.Array([2.0], requires_grad=True)
    b = ad.Array([2.0], requires_grad=True)
    for op in ("max", "min"):
        with ad.Tape() as tape:
            loss = ad.sum(ad.elementwise(op, a, b))
        ga, gb = tape.backward(loss, [a, b])
        assert ga[0] == 1.0 and gb[0] == 0.0


def test_product_rule():
    _, (dx, dy) = tape_grad(lambda x, y: ad.mul(x, y), np.array(3.0), np.array(4.0))
    assert dx == 4.0 and dy == 3.0


def test_add_broadcasts_batch_column():
    out = ad.add(np.ones((3, 1)), np.arange(12.0).reshape(3, 4))
    assert out.shape == (3, 4)
    _, (g,) = tape_grad(lambda c: ad.sum(ad.add(c, np.ones((3, 4)))), np.zeros((3, 1)))
    np.testing.assert_array_equal(g, np.full((3, 1), 4.0))


def test_elementwise_shape_mismatch():
    with pytest.raises(ad.ShapeError):
        ad.add(np.ones(3), np.ones(4))
    with pytest.raises(ValueError):
        ad.elementwise("pow", 1.0, 2.0)


def test_matmul_values_and_identity():
    out = ad.matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[1.0], [1.0]]))
    np.testing.assert_array_equal(out, [[3.0], [7.0]])
    A = np.random.default_rng(0).normal(size=(3, 3))
    np.testing.assert_array_equal(ad.matmul(np.eye(3), A), A)
    with pytest.raises(ad.ShapeError):
        ad.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_gradient_finite_difference():
    rng = np.random.default_rng(1)
    a, b, w = rng.normal(size=(4, 4)), rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
    f = lambda x, y: ad.sum(ad.mul(ad.matmul(x, y), w))  # noqa: E731
    _, (ga, gb) = tape_grad(f, a, b)
    np.testing.assert_allclose(ga, central_diff(lambda x: float((x @ b * w).sum()), a), rtol=1e-8)
    np.testing.assert_allclose(gb, central_diff(lambda y: float((a @ y * w).sum()), b), rtol=1e-8)


def test_conv_identity_kernel():
    x = np.random.default_rng(2).normal(size=(2, 1, 7))
    kernel = np.array([[[1.0, 0.0]]])
    np.testing.assert_allclose(ad.causal_dilated_conv1d(x, kernel, np.zeros(1), 1), x)
    out = ad.causal_conv_channels_last(x.transpose(0, 2, 1), kernel, np.zeros(1), 3)
    np.testing.assert_allclose(out.transpose(0, 2, 1), x)


def _np_conv(x, w, b, dil):
    # direct loop oracle
    B, cin, T = x.shape
    cout, _, K = w.shape
    out = np.zeros((B, cout, T)) + b[None, :, None]
    for t in range(T):
        for k in range(K):
            s = t - k * dil
            if s >= 0:
                out[:, :, t] += x[:, :, s] @ w[:, :, k].T
    return out


@pytest.mark.parametrize("dil,K", [(1, 2), (4, 2), (2, 3), (16, 2)])
def test_conv_matches_loop_oracle_both_layouts(dil, K):
    rng = np.random.default_rng(dil)
    x, w, b = rng.normal(size=(3, 2, 8)), rng.normal(size=(4, 2, K)), rng.normal(size=4)
    want = _np_conv(x, w, b, dil)
    np.testing.assert_allclose(ad.causal_dilated_conv1d(x, w, b, dil), want, atol=1e-12)
    got = ad.causal_conv_channels_last(x.transpose(0, 2, 1), w, b, dil)
    np.testing.assert_allclose(got.transpose(0, 2, 1), want, atol=1e-12)


def test_conv_is_causal():
    rng = np.random.default_rng(3)
    x, w, b = rng.normal(size=(1, 2, 10)), rng.normal(size=(2, 2, 2)), rng.normal(size=2)
    base = ad.causal_dilated_conv1d(x, w, b, 2)
    for t in range(9):
        x2 = x.copy()
        x2[:, :, t + 1 :] = rng.normal(size=x2[:, :, t + 1 :].shape)
        np.testing.assert_array_equal(ad.causal_dilated_conv1d(x2, w, b, 2)[:, :, : t + 1], base[:, :, : t + 1])


@pytest.mark.parametrize("layout", ["channels_first", "channels_last"])
def test_conv_gradient_finite_difference(layout):
    rng = np.random.default_rng(4)
    x, w, b = rng.normal(size=(1, 2, 8)), rng.normal(size=(2, 2, 2)), rng.normal(size=2)
    wt = rng.normal(size=(1, 2, 8))
    if layout == "channels_last":
        x, wt = x.transpose(0, 2, 1).copy(), wt.transpose(0, 2, 1).copy()
        conv = ad.causal_conv_channels_last
    else:
        conv = ad.causal_dilated_conv1d

    def f(xx, ww, bb):
        return ad.sum(ad.mul(conv(xx, ww, bb, 4), wt))

    def plain(xx, ww, bb):
        return float((ad.value(conv(xx, ww, bb, 4)) * wt).sum())

    _, (gx, gw, gb) = tape_grad(f, x, w, b)
    assert rel_err(gx, central_diff(lambda v: plain(v, w, b), x)) < 1e-6
    assert rel_err(gw, central_diff(lambda v: plain(x, v, b), w)) < 1e-6
    assert rel_err(gb, central_diff(lambda v: plain(x, w, v), b)) < 1e-6


def test_activation_values_and_kinks():
    assert ad.activation("elu", np.array(-1.0)) == pytest.approx(np.exp(-1.0) - 1.0, abs=1e-12)
    assert ad.activation("elu", np.array(-1.0)) == pytest.approx(-0.63212, abs=1e-5)
    v, (g,) = tape_grad(lambda x: ad.elu(x), np.array(0.0))
    assert v == 0.0 and g == 1.0
    v, (g,) = tape_grad(lambda x: ad.relu(x), np.array(-2.0))
    assert v == 0.0 and g == 0.0
    _, (g,) = tape_grad(lambda x: ad.relu(x), np.array(0.0))
    assert g == 0.0
    with pytest.raises(ValueError):
        ad.activation("tanh", 1.0)


@pytest.mark.parametrize("op", ["elu", "relu", "softplus"])
def test_activation_gradients_away_from_kinks(op):
    x = np.array([-2.3, -0.7, 0.4, 1.9])
    fn = {"elu": lambda v: np.where(v >= 0, v, np.expm1(np.minimum(v, 0))),
          "relu": lambda v: np.maximum(v, 0.0),
          "softplus": lambda v: np.log1p(np.exp(v))}[op]
    _, (g,) = tape_grad(lambda v: ad.sum(ad.activation(op, v)), x)
    assert rel_err(g, central_diff(lambda v: float(fn(v).sum()), x)) < 1e-6


def test_elu_grad_is_differentiable():
    x = np.array([-1.5, -0.2, 0.3])
    _, (g,) = tape_grad(lambda v: ad.sum(ad.elu_grad(v)), x)
    want = central_diff(lambda v: float(np.where(v >= 0, 1.0, np.exp(v)).sum()), x)
    assert rel_err(g, want) < 1e-6


def test_reductions():
    assert ad.reduce("sum", np.array([1.0, 2.0, 3.0])) == 6.0
    _, (g,) = tape_grad(lambda v: ad.reduce("mean", v), np.arange(4.0))
    np.testing.assert_array_equal(g, [0.25] * 4)
    assert ad.sum(np.zeros((0, 3)), axes=0).tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(ad.ShapeError):
        ad.sum(np.ones(3), axes=2)


def test_backward_basics():
    _, (g,) = tape_grad(lambda x: ad.mul(x, x), np.array(3.0))
    assert g == 6.0
    x = ad.Array(2.0, requires_grad=True)
    z = ad.Array(5.0, requires_grad=True)
    with ad.Tape() as tape:
        loss = ad.mul(x, 3.0)
    gx, gz = tape.backward(loss, [x, z])
    assert gx == 3.0 and gz == 0.0


def test_backward_rejects_nonscalar_loss():
    x = ad.Array(np.ones(3), requires_grad=True)
    with ad.Tape() as tape:
        y = ad.mul(x, 2.0)
    with pytest.raises(ValueError):
        tape.backward(y, [x])


def test_untraced_ops_return_plain_arrays():
    out = ad.add(np.ones(2), 1.0)
    assert isinstance(out, np.ndarray)
    x = ad.Array(np.ones(2), requires_grad=True)
    assert isinstance(ad.add(x, 1.0), np.ndarray)  # no active tape


def test_tape_is_topological():
    x = ad.Array(np.ones(3), requires_grad=True)
    with ad.Tape() as tape:
        ad.sum(ad.elu(ad.mul(ad.add(x, 1.0), x)))
    made = set()
    for node in tape.nodes:
        for p in node.parents:
            if isinstance(p, ad.Array) and p is not x:
                assert id(p) in made
        made.add(id(node.out))


def test_structure_ops_gradients():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 2))
    w = rng.normal(size=(5, 2))

    def f(x, y):
        c = ad.concat([x, y], axis=1)
        t = ad.transpose(c)
        r = ad.reshape(t, (5, 2))
        return ad.sum(ad.mul(ad.getitem(r, (slice(None), 0)), w[:, 0]))

    def plain(x, y):
        return float((np.concatenate([x, y], 1).T.reshape(5, 2)[:, 0] * w[:, 0]).sum())

    _, (ga, gb) = tape_grad(f, a, b)
    assert rel_err(ga, central_diff(lambda v: plain(v, b), a)) < 1e-8
    assert rel_err(gb, central_diff(lambda v: plain(a, v), b)) < 1e-8


def test_getitem_with_repeated_indices_accumulates():
    _, (g,) = tape_grad(lambda x: ad.sum(ad.getitem(x, np.array([0, 0, 2]))), np.zeros(3))
    np.testing.assert_array_equal(g, [2.0, 0.0, 1.0])


def test_dense_matches_composition():
    rng = np.random.default_rng(6)
    x, w, b = rng.normal(size=(5, 3)), rng.normal(size=(3, 4)), rng.normal(size=4)
    for act in (None, "elu", "relu"):
        f1 = lambda xx, ww, bb: ad.sum(ad.dense(xx, ww, bb, act))  # noqa: E731

        def f2(xx, ww, bb):
            z = ad.add(ad.matmul(xx, ww), bb)
            return ad.sum(z if act is None else ad.activation(act, z))

        v1, g1 = tape_grad(f1, x, w, b)
        v2, g2 = tape_grad(f2, x, w, b)
        assert v1 == pytest.approx(v2, rel=1e-14)
        for p, q in zip(g1, g2):
            np.testing.assert_allclose(p, q, rtol=1e-12, atol=1e-14)


def test_gradients_are_deterministic():
    rng = np.random.default_rng(7)
    x, w = rng.normal(size=(6, 4)), rng.normal(size=(4, 4))
    f = lambda xx, ww: ad.sum(ad.elu(ad.matmul(xx, ww)))  # noqa: E731
    v1, g1 = tape_grad(f, x, w)
    v2, g2 = tape_grad(f, x, w)
    assert v1 == v2
    for p, q in zip(g1, g2):
        assert np.array_equal(p, q)


finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 5, elements=finite), arrays(np.float64, 5, elements=finite))
def test_mul_sub_div_gradient_property(a, b):
    b = np.where(np.abs(b) < 0.5, 0.5 + np.abs(b), b)
    f = lambda x, y: ad.sum(ad.div(ad.sub(ad.mul(x, y), x), y))  # noqa: E731
    plain = lambda x, y: float(((x * y - x) / y).sum())  # noqa: E731
    _, (ga, gb) = tape_grad(f, a, b)
    assert rel_err(ga, central_diff(lambda v: plain(v, b), a)) < 1e-6
    assert rel_err(gb, central_diff(lambda v: plain(a, v), b)) < 1e-6
