import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from notegen.errors import BadProbability, ShapeMismatch
from notegen.numerics import (
    Rng,
    add,
    as_tensor,
    bernoulli_mask,
    glorot_uniform,
    matmul,
    mul,
    scale,
    sigmoid,
    sub,
    tanh,
)


class TestRng:
    def test_same_seed_same_stream(self):
        assert np.array_equal(Rng(99).uniform((100,)), Rng(99).uniform((100,)))

    def test_different_seeds_differ(self):
        assert not np.array_equal(Rng(1).uniform((10,)), Rng(2).uniform((10,)))

    def test_block_splitting_equals_one_block(self):
        r = Rng(5)
        split = np.concatenate([r.uniform((7,)), r.uniform((3,))])
        assert np.array_equal(split, Rng(5).uniform((10,)))

    def test_state_round_trip(self):
        r = Rng(123)
        r.uniform((17,))
        saved = r.state
        expected = r.uniform((5,))
        r2 = Rng(0)
        r2.set_state(saved)
        assert np.array_equal(r2.uniform((5,)), expected)

    def test_unit_interval(self):
        draws = Rng(3).uniform((10000,))
        assert draws.min() >= 0.0 and draws.max() < 1.0

    def test_permutation(self):
        perm = Rng(11).permutation(50)
        assert sorted(perm.tolist()) == list(range(50))
        assert np.array_equal(perm, Rng(11).permutation(50))


class TestMatmul:
    def test_identity(self):
        a = as_tensor([[1.0, 2, 3], [4, 5, 6], [7, 8, 9]])
        assert np.array_equal(matmul(np.eye(3), a), a)

    def test_hand_case(self):
        out = matmul(as_tensor([[1, 2], [3, 4]]), as_tensor([[5], [6]]))
        assert np.array_equal(out, [[17], [39]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            matmul(np.zeros((2, 3)), np.zeros((2, 3)))

    @given(st.integers(0, 2**32 - 1))
    def test_transpose_property(self, seed):
        rng = Rng(seed)
        a = rng.uniform((4, 3)) - 0.5
        b = rng.uniform((3, 5)) - 0.5
        assert np.allclose(matmul(a, b).T, matmul(b.T, a.T), atol=1e-12)


class TestElementwise:
    def test_fixed_points(self):
        assert sigmoid(np.zeros(1))[0] == 0.5
        assert tanh(np.zeros(1))[0] == 0.0

    def test_add_hand_case(self):
        assert np.array_equal(add(as_tensor([1, 2]), as_tensor([3, 4])), [4, 6])

    def test_sub_mul_scale(self):
        a, b = as_tensor([5.0, 7.0]), as_tensor([2.0, 3.0])
        assert np.array_equal(sub(a, b), [3, 4])
        assert np.array_equal(mul(a, b), [10, 21])
        assert np.array_equal(scale(a, 2.0), [10, 14])

    @pytest.mark.parametrize("op", [add, sub, mul])
    def test_shape_mismatch(self, op):
        with pytest.raises(ShapeMismatch):
            op(np.zeros(3), np.zeros(4))

    def test_sigmoid_extremes_stable(self):
        out = sigmoid(as_tensor([-1000.0, 1000.0]))
        assert np.array_equal(out, [0.0, 1.0])

    @given(st.floats(-30, 30))
    def test_sigmoid_symmetry(self, x):
        pair = sigmoid(as_tensor([x, -x]))
        assert abs(pair.sum() - 1.0) <= 1e-15


class TestGlorot:
    def test_limit_for_equal_fans(self):
        # sqrt(6/(3+3)) = 1
        t = glorot_uniform(Rng(0), 3, 3, (1000,))
        assert t.min() >= -1.0 and t.max() <= 1.0
        assert t.max() > 0.9 and t.min() < -0.9  # actually fills the range

    def test_support_bound(self):
        limit = np.sqrt(6.0 / (7 + 13))
        t = glorot_uniform(Rng(1), 7, 13, (50, 20))
        assert np.abs(t).max() <= limit

    def test_deterministic(self):
        a = glorot_uniform(Rng(42), 4, 8, (4, 8))
        b = glorot_uniform(Rng(42), 4, 8, (4, 8))
        assert np.array_equal(a, b)

    def test_bad_fans(self):
        with pytest.raises(ValueError):
            glorot_uniform(Rng(0), 0, 3, (3,))


class TestBernoulliMask:
    def test_keep_all(self):
        assert np.array_equal(bernoulli_mask(Rng(0), (100,), 1.0),
                              np.ones(100))

    def test_monte_carlo_mean(self):
        mask = bernoulli_mask(Rng(2024), (100000,), 0.25)
        assert set(np.unique(mask)) <= {0.0, 1.0}
        assert mask.mean() == pytest.approx(0.25, abs=0.01)

    def test_zero_keep_rejected(self):
        with pytest.raises(BadProbability):
            bernoulli_mask(Rng(0), (3,), 0.0)
        with pytest.raises(BadProbability):
            bernoulli_mask(Rng(0), (3,), 1.5)
