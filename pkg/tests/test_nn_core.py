"""Tensor ops, layers and their gradients."""

import numpy as np
import pytest

from coverage_twin import nn
from coverage_twin.nn import Tensor

from conftest import check_gradients


class TestArithmetic:
    def test_chain(self):
        x = Tensor(3.0, requires_grad=True)
        y = x * x
        t = y * y  # x^4
        t.backward()
        assert t.data == 81.0
        assert x.grad == 4 * 27.0

    def test_broadcast_add(self):
        a = Tensor(np.ones((3, 4)), requires_grad=True)
        b = Tensor(np.ones(4), requires_grad=True)
        (a + b).sum().backward()
        assert np.array_equal(a.grad, np.ones((3, 4)))
        assert np.array_equal(b.grad, 3 * np.ones(4))

    def test_matmul(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
        b = Tensor([[1.0], [1.0]], requires_grad=True)
        out = (a @ b).sum()
        out.backward()
        assert out.data == 10.0
        assert np.array_equal(b.grad, [[4.0], [6.0]])

    def test_diamond_accumulation(self):
        x = Tensor(2.0, requires_grad=True)
        y = x * x
        (y + y).backward()
        assert x.grad == 8.0

    @pytest.mark.parametrize("seed", range(5))
    def test_elementwise_gradcheck(self, seed):
        rng = np.random.default_rng(seed)
        a = Tensor(rng.standard_normal((3, 4)) + 3.0, requires_grad=True)
        b = Tensor(rng.standard_normal((3, 4)) + 3.0, requires_grad=True)
        check_gradients(lambda: ((a * b + a / b - nn.log(a) + nn.exp(b * 0.1))
                                 ** 2).sum(), [a, b])


class TestConv2d:
    def test_identity_kernel(self, rng):
        x = Tensor(rng.standard_normal((1, 5, 5)))
        w = Tensor(np.ones((1, 1, 1, 1)))
        b = Tensor(np.zeros(1))
        out = nn.conv2d(x, w, b, "same")
        assert np.allclose(out.data, x.data)

    def test_even_kernel_rejected(self):
        x = Tensor(np.ones((1, 2, 2)))
        w = Tensor(np.ones((1, 1, 2, 2)))
        with pytest.raises(ValueError):
            nn.conv2d(x, w, Tensor(np.zeros(1)), "same")

    def test_all_ones_3x3_same(self):
        # brute-force sliding window over [[1,2],[3,4]] with zero padding
        x = Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        w = Tensor(np.ones((1, 1, 3, 3)))
        out = nn.conv2d(x, w, Tensor(np.zeros(1)), "same")
        assert np.array_equal(out.data, [[[10.0, 10.0], [10.0, 10.0]]])

    def test_matches_bruteforce_oracle(self, rng):
        x = rng.standard_normal((2, 6, 6))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        out = nn.conv2d(Tensor(x), Tensor(w), Tensor(b), "valid").data
        expect = np.zeros((3, 4, 4))
        for o in range(3):
            for i in range(4):
                for j in range(4):
                    expect[o, i, j] = np.sum(x[:, i:i + 3, j:j + 3] * w[o]) + b[o]
        assert np.allclose(out, expect, atol=1e-12)

    @pytest.mark.parametrize("k", [1, 3, 5, 7, 9])
    def test_same_padding_preserves_shape(self, k, rng):
        x = Tensor(rng.standard_normal((2, 12, 12)))
        w = Tensor(rng.standard_normal((4, 2, k, k)))
        out = nn.conv2d(x, w, Tensor(np.zeros(4)), "same")
        assert out.data.shape == (4, 12, 12)

    @pytest.mark.parametrize("padding", ["same", "valid"])
    def test_gradcheck(self, padding, rng):
        x = Tensor(rng.standard_normal((2, 2, 5, 5)), requires_grad=True)
        w = Tensor(rng.standard_normal((3, 2, 3, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal(3), requires_grad=True)
        check_gradients(lambda: (nn.conv2d(x, w, b, padding) ** 2).sum(),
                        [x, w, b])


class TestMaxpool:
    def test_hand_max(self):
        out = nn.maxpool2(Tensor([[[1.0, 2.0], [3.0, 4.0]]]))
        assert np.array_equal(out.data, [[[4.0]]])

    def test_constant(self):
        out = nn.maxpool2(Tensor(np.full((2, 4, 4), 7.0)))
        assert np.array_equal(out.data, np.full((2, 2, 2), 7.0))

    def test_odd_dims_rejected(self):
        with pytest.raises(ValueError):
            nn.maxpool2(Tensor(np.zeros((1, 3, 4))))

    def test_tie_routes_to_first(self):
        x = Tensor(np.full((1, 2, 2), 5.0), requires_grad=True)
        nn.maxpool2(x).sum().backward()
        assert x.grad.sum() == 1.0
        assert x.grad[0, 0, 0] == 1.0

    def test_gradcheck(self, rng):
        x = Tensor(rng.standard_normal((1, 4, 4)), requires_grad=True)
        check_gradients(lambda: (nn.maxpool2(x) ** 2).sum(), [x], rtol=1e-6)


class TestDense:
    def test_identity(self):
        x = Tensor([1.0, 2.0, 3.0])
        out = nn.dense(x, Tensor(np.eye(3)), Tensor(np.zeros(3)))
        assert np.array_equal(out.data, x.data)

    def test_hand_product(self):
        out = nn.dense(Tensor([1.0, 1.0]),
                       Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor(np.zeros(2)))
        assert np.array_equal(out.data, [3.0, 7.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nn.dense(Tensor(np.zeros(3)), Tensor(np.zeros((2, 4))),
                     Tensor(np.zeros(2)))

    def test_gradcheck(self, rng):
        x = Tensor(rng.standard_normal((8, 8)), requires_grad=True)
        w = Tensor(rng.standard_normal((8, 8)), requires_grad=True)
        b = Tensor(rng.standard_normal(8), requires_grad=True)
        check_gradients(lambda: (nn.dense(x, w, b) ** 2).sum(), [x, w, b],
                        rtol=1e-6)


class TestUpsample:
    def test_nearest(self):
        out = nn.upsample2(Tensor([[[1.0, 2.0], [3.0, 4.0]]]))
        assert np.array_equal(out.data[0, :2, :2], [[1.0, 1.0], [1.0, 1.0]])

    def test_gradcheck(self, rng):
        x = Tensor(rng.standard_normal((1, 3, 3)), requires_grad=True)
        check_gradients(lambda: (nn.upsample2(x) ** 2).sum(), [x], rtol=1e-6)


class TestDropout:
    def test_rate_zero_identity(self, rng):
        x = Tensor(rng.standard_normal(10))
        for mode in ("train", "eval"):
            out = nn.dropout(x, 0.0, mode, rng)
            assert np.array_equal(out.data, x.data)

    def test_eval_identity(self, rng):
        x = Tensor(rng.standard_normal(10))
        assert np.array_equal(nn.dropout(x, 0.25, "eval").data, x.data)

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            nn.dropout(Tensor(np.zeros(3)), 1.0, "train",
                       np.random.default_rng(0))

    def test_inverted_scaling_mean(self):
        rng = np.random.default_rng(7)
        x = Tensor(np.ones(10 ** 6))
        out = nn.dropout(x, 0.25, "train", rng)
        assert abs(out.data.mean() - 1.0) < 0.01

    def test_deterministic_per_seed(self):
        x = Tensor(np.ones(100))
        a = nn.dropout(x, 0.25, "train", np.random.default_rng(3)).data
        b = nn.dropout(x, 0.25, "train", np.random.default_rng(3)).data
        assert np.array_equal(a, b)


class TestClip:
    def test_passthrough_gradient(self):
        x = Tensor(np.array([-20.0, 0.5, 20.0]), requires_grad=True)
        nn.clip(x, -10.0, 10.0).sum().backward()
        assert np.array_equal(x.grad, [0.0, 1.0, 0.0])
