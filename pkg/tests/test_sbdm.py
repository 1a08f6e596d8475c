import numpy as np
import pytest

from semnet import oracles
from semnet.gradcheck import gradcheck
from semnet.sbdm import (PositionalEmbedding, SnakeSequence, naive_order, pe_apply, sbdm_fuse,
                         snake_flatten, snake_order, snake_unflatten)
from semnet.tensor import Tensor

GRID = [(H, W) for H in range(1, 17) for W in range(1, 17)]


def _map(values, H, W, C=1):
    return Tensor(np.asarray(values, dtype=float).reshape(1, C, H, W))


def test_horizontal_3x3_order():
    s = snake_flatten(_map(range(9), 3, 3), "horizontal")
    assert s.values.data.ravel().tolist() == [0, 1, 2, 5, 4, 3, 6, 7, 8]


def test_single_row_is_identity():
    s = snake_flatten(_map(range(5), 1, 5), "horizontal")
    assert s.values.data.ravel().tolist() == [0, 1, 2, 3, 4]


def test_vertical_2x2_order():
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    s = snake_flatten(_map([a, b, c, d], 2, 2), "vertical")
    assert s.values.data.ravel().tolist() == [a, c, d, b]


def test_unflatten_3x3_inverse():
    seq = SnakeSequence(Tensor(np.array([0, 1, 2, 5, 4, 3, 6, 7, 8], float).reshape(1, 9, 1)), "horizontal", (3, 3))
    assert snake_unflatten(seq).data.ravel().tolist() == list(range(9))


def test_flatten_layout_is_batch_length_channel(rng):
    x = Tensor(rng.standard_normal((2, 3, 4, 5)))
    s = snake_flatten(x, "horizontal")
    assert s.values.shape == (2, 20, 3)
    np.testing.assert_array_equal(s.values.data[:, 5], x.data[:, :, 1, 4])


@pytest.mark.parametrize("direction", ["horizontal", "vertical"])
def test_round_trip_exhaustive(rng, direction):
    for H, W in [(h, w) for h in range(1, 9) for w in range(1, 9)]:
        x = Tensor(rng.standard_normal((1, 3, H, W)))
        back = snake_unflatten(snake_flatten(x, direction))
        assert back.data.tobytes() == x.data.tobytes()


@pytest.mark.parametrize("direction", ["horizontal", "vertical"])
def test_bijective_and_adjacent_up_to_16(direction):
    for H, W in GRID:
        order = snake_order(H, W, direction)
        assert sorted(order.tolist()) == list(range(H * W))
        assert all(d == 1 for d in oracles.manhattan_steps(order.tolist(), W))


def test_naive_flattening_has_row_jumps():
    for H, W in GRID:
        if H < 2 or W < 2:
            continue
        order = naive_order(H, W).tolist()
        steps = oracles.manhattan_steps(order, W)
        # each row end -> next row start: one row down, W-1 columns back
        jumps = [(p, q) for (p, q), s in zip(zip(order, order[1:]), steps) if s > 1]
        assert len(jumps) == H - 1
        assert all(abs(p % W - q % W) == W - 1 and s == W for (p, q), s in
                   zip(jumps, [s for s in steps if s > 1]))
        assert all(s == 1 for s in oracles.manhattan_steps(snake_order(H, W, "horizontal").tolist(), W))


def test_empty_map_and_bad_inputs_rejected(rng):
    with pytest.raises(ValueError):
        snake_order(0, 3, "horizontal")
    with pytest.raises(ValueError):
        snake_order(2, 2, "diagonal")
    bad = SnakeSequence(Tensor(np.zeros((1, 5, 1))), "horizontal", (2, 3))
    with pytest.raises(ValueError):
        snake_unflatten(bad)


@pytest.mark.parametrize("direction", ["horizontal", "vertical"])
def test_flatten_gradient_is_inverse_permutation(rng, direction):
    x = Tensor(rng.standard_normal((1, 2, 3, 4)))
    rep = gradcheck(lambda x: snake_flatten(x, direction).values, [x])
    assert rep.passed, rep
    seq = Tensor(rng.standard_normal((1, 12, 2)))
    rep = gradcheck(lambda s: snake_unflatten(SnakeSequence(s, direction, (3, 4))), [seq])
    assert rep.passed, rep


# -- positional embedding ------------------------------------------------------------

def test_pe_on_zero_sequence_is_table_prefix():
    pe = PositionalEmbedding(20, 6)
    s = SnakeSequence(Tensor(np.zeros((1, 12, 6))), "horizontal", (3, 4))
    np.testing.assert_array_equal(pe_apply(s, pe).values.data[0], pe.table[:12])


def test_pe_first_row_is_sin0_cos0():
    t = PositionalEmbedding(4, 8).table
    np.testing.assert_array_equal(t[0, 0::2], 0.0)
    np.testing.assert_array_equal(t[0, 1::2], 1.0)


@pytest.mark.parametrize("width", [1, 5, 16])
def test_pe_bounded_and_deterministic(width):
    t = PositionalEmbedding(300, width).table
    assert np.all(np.abs(t) <= 1.0)
    from semnet.sbdm import _pe_table
    _pe_table.cache_clear()
    np.testing.assert_array_equal(PositionalEmbedding(300, width).table, t)


def test_pe_matches_sinusoid_formula():
    t = PositionalEmbedding(10, 4).table
    n = 7
    assert t[n, 2] == pytest.approx(np.sin(n / 10000 ** (2 / 4)), abs=1e-15)
    assert t[n, 3] == pytest.approx(np.cos(n / 10000 ** (2 / 4)), abs=1e-15)


def test_pe_twice_adds_twice(rng):
    pe = PositionalEmbedding(6, 3)
    v = rng.standard_normal((1, 6, 3))
    s = SnakeSequence(Tensor(v), "vertical", (2, 3))
    np.testing.assert_allclose(pe_apply(pe_apply(s, pe), pe).values.data[0], v[0] + 2 * pe.table)


def test_pe_width_and_length_checked():
    s = SnakeSequence(Tensor(np.zeros((1, 6, 3))), "vertical", (2, 3))
    with pytest.raises(ValueError):
        pe_apply(s, PositionalEmbedding(6, 4))
    with pytest.raises(ValueError):
        pe_apply(s, PositionalEmbedding(5, 3))


# -- fusion ---------------------------------------------------------------------------

def test_fuse_identities(rng):
    a = Tensor(rng.standard_normal((1, 2, 3, 3)))
    b = Tensor(rng.standard_normal((1, 2, 3, 3)))
    np.testing.assert_array_equal(sbdm_fuse(a, Tensor(np.zeros(a.shape))).data, a.data)
    np.testing.assert_array_equal(sbdm_fuse(a, b).data, sbdm_fuse(b, a).data)
    np.testing.assert_array_equal(sbdm_fuse(a, a).data, 2 * a.data)
    with pytest.raises(ValueError):
        sbdm_fuse(a, Tensor(np.zeros((1, 2, 3, 4))))
