import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nirspain.numerics import (
    ShapeMismatchError,
    activation,
    activation_grad,
    finite_diff_check,
    matmul,
    one_hot,
    softmax,
    softmax_crossentropy,
)


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), a), a)

    def test_hand_product(self):
        out = matmul([[1.0, 2.0]], [[3.0], [4.0]])
        np.testing.assert_array_equal(out, [[11.0]])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeMismatchError, match=r"\(2, 3\).*\(2, 3\)"):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_associativity(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            a, b, c = (rng.standard_normal((4, 4)) for _ in range(3))
            left = matmul(matmul(a, b), c)
            right = matmul(a, matmul(b, c))
            np.testing.assert_allclose(left, right, rtol=1e-9)


class TestActivations:
    def test_fixed_points(self):
        assert activation("sigmoid", 0.0) == 0.5
        assert activation("tanh", 0.0) == 0.0
        assert activation("relu", -1.0) == 0.0

    def test_sigmoid_symmetry(self):
        x = np.linspace(-8, 8, 33)
        np.testing.assert_array_equal(
            activation("sigmoid", -x), 1.0 - activation("sigmoid", x)
        )

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown activation"):
            activation("softplus", 1.0)
        with pytest.raises(ValueError, match="unknown activation"):
            activation_grad("softplus", 1.0)

    def test_relu_grad_at_zero_is_zero(self):
        assert activation_grad("relu", 0.0) == 0.0

    @pytest.mark.parametrize("kind", ["sigmoid", "tanh", "relu"])
    def test_grad_matches_finite_differences(self, kind):
        for seed in range(5):
            rng = np.random.default_rng(seed)
            x = rng.uniform(-3, 3, size=7)
            if kind == "relu":
                x = x[np.abs(x) > 1e-3]  # stay off the kink
            err = finite_diff_check(
                lambda v: float(np.sum(activation(kind, v))),
                x,
                activation_grad(kind, x),
            )
            assert err < 1e-7


class TestSoftmaxCrossentropy:
    def test_uniform_logits_give_log4(self):
        logits = np.zeros((3, 4))
        onehot = one_hot([0, 1, 3], 4)
        loss, _ = softmax_crossentropy(logits, onehot)
        assert abs(loss - np.log(4.0)) < 1e-12

    def test_confident_correct_loss_tends_to_zero(self):
        logits = np.array([[50.0, 0.0, 0.0, 0.0]])
        loss, _ = softmax_crossentropy(logits, one_hot([0], 4))
        assert loss < 1e-15

    def test_confident_wrong_stays_finite(self):
        logits = np.array([[1000.0, 0.0]])
        loss, _ = softmax_crossentropy(logits, one_hot([1], 2))
        assert np.isfinite(loss)

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        logits = rng.standard_normal((3, 4))
        onehot = one_hot(rng.integers(0, 4, 3), 4)
        _, grad = softmax_crossentropy(logits, onehot)
        err = finite_diff_check(
            lambda v: softmax_crossentropy(v, onehot)[0], logits, grad, eps=1e-6
        )
        assert err < 1e-6

    def test_rows_must_be_one_hot(self):
        logits = np.zeros((2, 4))
        bad = np.array([[0.5, 0.5, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
        with pytest.raises(ValueError, match="one-hot row at index 0"):
            softmax_crossentropy(logits, bad)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(2)
        p = softmax(rng.standard_normal((20, 5)) * 30)
        assert (p >= 0).all()
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


class TestFiniteDiffCheck:
    def test_linear_function(self):
        x = np.array([1.0, 2.0, 3.0])
        err = finite_diff_check(lambda v: float(v.sum()), x, np.ones(3))
        assert err < 1e-10

    def test_quadratic(self):
        x = np.array([1.0, 2.0, 3.0])
        err = finite_diff_check(lambda v: float((v**2).sum()), x, 2 * x)
        assert err < 1e-8

    def test_wrong_gradient_detected(self):
        x = np.array([1.0, 2.0, 3.0])
        err = finite_diff_check(lambda v: float((v**2).sum()), x, 4 * x)
        assert abs(err - 1.0 / 3.0) < 1e-6

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            finite_diff_check(lambda v: 0.0, np.ones(2), np.ones(2), eps=0.0)

    def test_nan_propagates(self):
        with pytest.raises(FloatingPointError):
            finite_diff_check(
                lambda v: float("nan"), np.ones(2), np.ones(2)
            )


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_softmax_rows_sum_to_one_property(rows, cols, seed):
    rng = np.random.default_rng(seed)
    p = softmax(rng.standard_normal((rows, cols)) * 10)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
