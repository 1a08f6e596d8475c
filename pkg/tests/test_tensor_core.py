import numpy as np
import pytest

from semnet import functional as F
from semnet.gradcheck import gradcheck
from semnet.tensor import Graph, Tensor, backward, make_node, no_grad


# -- conv2d ------------------------------------------------------------------

def test_conv1x1_identity_weight_is_identity(randt):
    x = randt(2, 3, 4, 5)
    w = Tensor(np.eye(3).reshape(3, 3, 1, 1))
    out = F.conv2d(x, w, Tensor(np.zeros(3)))
    np.testing.assert_array_equal(out.data, x.data)


def test_depthwise_3x3_ones_on_constant_map():
    x = Tensor(np.ones((1, 1, 5, 5)))
    out = F.conv2d(x, Tensor(np.ones((1, 1, 3, 3))), depthwise=True).data[0, 0]
    # hand convolution with zero padding
    expected = np.array([[4, 6, 6, 6, 4],
                         [6, 9, 9, 9, 6],
                         [6, 9, 9, 9, 6],
                         [6, 9, 9, 9, 6],
                         [4, 6, 6, 6, 4]], dtype=float)
    np.testing.assert_array_equal(out, expected)


def test_dense_conv_matches_direct_loop(randt):
    x, w, b = randt(2, 3, 5, 4), randt(2, 3, 3, 3), randt(2)
    out = F.conv2d(x, w, b).data
    xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros_like(out)
    for n in range(2):
        for o in range(2):
            for i in range(5):
                for j in range(4):
                    ref[n, o, i, j] = np.sum(xp[n, :, i:i + 3, j:j + 3] * w.data[o]) + b.data[o]
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("kernel,depthwise", [(1, False), (3, False), (3, True)])
def test_conv_gradient_matches_finite_differences(randt, kernel, depthwise):
    x = randt(2, 3, 4, 4)
    w = randt(3, 1 if depthwise else 3, kernel, kernel)
    b = randt(3)
    rep = gradcheck(lambda x, w, b: F.conv2d(x, w, b, depthwise=depthwise), [x, w, b], tolerance=1e-6)
    assert rep.passed, rep


def test_conv_shape_mismatch_names_both_shapes(randt):
    with pytest.raises(ValueError, match=r"\(4, 2, 3, 3\).*\(1, 3, 4, 4\)"):
        F.conv2d(randt(1, 3, 4, 4), randt(4, 2, 3, 3))


# -- layer norm --------------------------------------------------------------

def test_layer_norm_constant_input_gives_zero():
    x = Tensor(np.full((1, 4, 2, 2), 3.7))
    out = F.layer_norm(x, Tensor(np.ones(4)), Tensor(np.zeros(4)))
    np.testing.assert_allclose(out.data, 0.0, atol=1e-12)


def test_layer_norm_two_channel_closed_form():
    x = Tensor(np.array([1.0, 3.0]).reshape(1, 2, 1, 1))
    out = F.layer_norm(x, Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-14)
    np.testing.assert_allclose(out.data.ravel(), [-1.0, 1.0], rtol=1e-12)


def test_layer_norm_zero_mean_unit_variance(randt):
    x = randt(2, 5, 3, 3)
    out = F.layer_norm(x, Tensor(np.ones(5)), Tensor(np.zeros(5)), eps=1e-12).data
    np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.var(axis=1), 1.0, rtol=1e-9)


def test_layer_norm_gradcheck(randt):
    rep = gradcheck(lambda x, g, o: F.layer_norm(x, g, o), [randt(2, 3, 4, 4), randt(3), randt(3)], tolerance=1e-6)
    assert rep.passed, rep


def test_layer_norm_rejects_nonpositive_eps(randt):
    with pytest.raises(ValueError):
        F.layer_norm(randt(1, 2, 1, 1), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=0.0)


# -- activations -------------------------------------------------------------

def test_activation_values():
    assert F.activation(Tensor(np.zeros(1)), "gelu").item() == 0.0
    assert F.activation(Tensor(np.zeros(1)), "softplus").item() == pytest.approx(np.log(2.0), abs=1e-15)
    np.testing.assert_array_equal(F.activation(Tensor([-2.0, 2.0]), "relu").data, [0.0, 2.0])
    assert F.activation(Tensor(np.zeros(1)), "silu").item() == 0.0


def test_softplus_is_stable_for_large_inputs():
    out = F.softplus(Tensor([-800.0, 800.0])).data
    assert np.all(np.isfinite(out))
    assert out[1] == 800.0


@pytest.mark.parametrize("kind", ["gelu", "silu", "softplus", "relu"])
def test_activation_gradcheck(randt, kind):
    rep = gradcheck(lambda x: F.activation(x, kind), [randt(2, 3, 4)], tolerance=1e-6)
    assert rep.passed, rep


def test_unknown_activation_rejected(randt):
    with pytest.raises(ValueError, match="unknown activation"):
        F.activation(randt(2), "tanh")


# -- pixel shuffle pair, pooling -------------------------------------------------

def test_pixel_shuffle_round_trip_exact(randt):
    x = randt(2, 3, 4, 6)
    down = F.pixel_shuffle_pair(x, 2, "unshuffle")
    assert down.shape == (2, 12, 2, 3)
    back = F.pixel_shuffle_pair(down, 2, "shuffle")
    np.testing.assert_array_equal(back.data, x.data)
    assert down.data.sum() == pytest.approx(x.data.sum(), rel=1e-14)
    np.testing.assert_array_equal(np.sort(down.data.ravel()), np.sort(x.data.ravel()))


def test_unshuffle_2x2_holds_all_values():
    x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
    out = F.pixel_unshuffle(x)
    assert out.shape == (1, 4, 1, 1)
    assert sorted(out.data.ravel()) == [1.0, 2.0, 3.0, 4.0]


def test_pixel_shuffle_divisibility(randt):
    with pytest.raises(ValueError):
        F.pixel_unshuffle(randt(1, 1, 3, 4))
    with pytest.raises(ValueError):
        F.pixel_shuffle(randt(1, 6, 2, 2))


def test_pool_and_upsample_examples():
    x = Tensor(np.array([[1.0, 1.0], [3.0, 3.0]]).reshape(1, 1, 2, 2))
    assert F.pool_and_upsample(x, 2, "average-pool").data.ravel().tolist() == [2.0]
    up = F.pool_and_upsample(Tensor(np.full((1, 1, 1, 1), 5.0)), 2, "nearest-upsample")
    np.testing.assert_array_equal(up.data, np.full((1, 1, 2, 2), 5.0))
    c = Tensor(np.full((1, 2, 4, 4), 0.3))
    np.testing.assert_array_equal(F.upsample_nearest(F.avg_pool2d(c, 2), 2).data, c.data)


def test_pool_then_upsample_preserves_block_means(randt):
    x = randt(1, 2, 8, 8)
    y = F.upsample_nearest(F.avg_pool2d(x, 4), 4).data
    bm = lambda a: a.reshape(1, 2, 2, 4, 2, 4).mean(axis=(3, 5))  # noqa: E731
    np.testing.assert_allclose(bm(y), bm(x.data), rtol=1e-12)


def test_pool_divisibility(randt):
    with pytest.raises(ValueError):
        F.avg_pool2d(randt(1, 1, 6, 6), 4)


# -- every differentiable op up to (2, 8, 8, 8) ----------------------------------

SHAPES = [(1, 1, 2, 2), (2, 3, 4, 6), (2, 8, 8, 8)]

OPS = {
    "conv1x1": lambda r, s: (lambda x, w: F.conv2d(x, w), [r(*s), r(s[1], s[1], 1, 1)]),
    "conv3x3": lambda r, s: (lambda x, w: F.conv2d(x, w), [r(*s), r(2, s[1], 3, 3)]),
    "dwconv3x3": lambda r, s: (lambda x, w: F.conv2d(x, w, depthwise=True), [r(*s), r(s[1], 1, 3, 3)]),
    "layer_norm": lambda r, s: (lambda x, g, o: F.layer_norm(x, g, o), [r(*s), r(s[1]), r(s[1])]),
    "gelu": lambda r, s: (F.gelu, [r(*s)]),
    "silu": lambda r, s: (F.silu, [r(*s)]),
    "softplus": lambda r, s: (F.softplus, [r(*s)]),
    "unshuffle": lambda r, s: (F.pixel_unshuffle, [r(*s)]),
    "shuffle": lambda r, s: (F.pixel_shuffle, [r(s[0], 4 * s[1], s[2] // 2, s[3] // 2)]),
    "avg_pool": lambda r, s: (lambda x: F.avg_pool2d(x, 2), [r(*s)]),
    "upsample": lambda r, s: (lambda x: F.upsample_nearest(x, 2), [r(*s)]),
    "mul": lambda r, s: (F.mul, [r(*s), r(*s)]),
    "concat": lambda r, s: (lambda a, b: F.concat([a, b], axis=1), [r(*s), r(*s)]),
}


@pytest.mark.parametrize("shape", SHAPES, ids=str)
@pytest.mark.parametrize("op", sorted(OPS))
def test_op_gradcheck_over_shapes(randt, op, shape):
    fn, inputs = OPS[op](randt, shape)
    rep = gradcheck(fn, inputs, max_coords=48)
    assert rep.passed, rep


# -- backward / graph -------------------------------------------------------------

def test_backward_linear_and_quadratic(randt):
    x = randt(2, 3, 2, 2, requires_grad=True)
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, np.ones(x.shape))
    x.zero_grad()
    (x * x).sum().backward()
    np.testing.assert_allclose(x.grad, 2 * x.data)


def test_backward_accumulates_without_reset(randt):
    x = randt(3, requires_grad=True)
    x.sum().backward()
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, 2 * np.ones(3))


def test_backward_rejects_non_scalar(randt):
    x = randt(3, requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        backward(x * 2.0)


def test_graph_is_topological_and_visits_once(randt):
    x = randt(2, requires_grad=True)
    y = x * x
    z = y + y  # diamond
    g = Graph(z.sum())
    pos = {id(n): i for i, n in enumerate(g.nodes)}
    assert len(pos) == len(g.nodes)
    for n in g.nodes:
        for p in n._parents:
            if p.requires_grad:
                assert pos[id(p)] < pos[id(n)]
    z.sum().backward()
    np.testing.assert_allclose(x.grad, 4 * x.data)


def test_no_grad_records_nothing(randt):
    x = randt(2, requires_grad=True)
    with no_grad():
        y = x * 3.0
    assert not y.requires_grad and y.is_leaf


def test_forward_is_bitwise_deterministic(randt):
    x, w = randt(2, 4, 8, 8), randt(4, 4, 3, 3)
    a = F.layer_norm(F.conv2d(x, w), Tensor(np.ones(4)), Tensor(np.zeros(4))).data
    b = F.layer_norm(F.conv2d(x, w), Tensor(np.ones(4)), Tensor(np.zeros(4))).data
    assert a.tobytes() == b.tobytes()


# -- gradcheck itself -------------------------------------------------------------

def test_gradcheck_identity_is_exact(randt):
    rep = gradcheck(lambda x: x * 1.0, [randt(2, 3)])
    assert rep.passed and rep.worst_error < 1e-9


def test_gradcheck_catches_sign_flipped_backward(randt):
    def bad_square(x):
        return make_node(x.data ** 2, (x,), lambda g: (-2.0 * x.data * g,))

    rep = gradcheck(bad_square, [randt(4, low=0.5, high=1.5)])
    assert not rep.passed


def test_gradcheck_aborts_on_nonfinite(randt):
    def blowup(x):
        return make_node(np.where(x.data > 10, np.inf, x.data), (x,), lambda g: (g,))

    x = Tensor(np.array([10.0 - 1e-6, 0.0]))
    with pytest.raises(FloatingPointError, match="coordinate"):
        gradcheck(blowup, [x])
