import numpy as np
import pytest

from ckgrec.numeric import (
    AdamState,
    adam_step,
    finite_diff_grad,
    leaky_relu,
    relu,
    sigmoid,
    softplus,
    tanh,
    xavier_init,
)


class TestXavierInit:
    def test_1x5_bound_is_one(self):
        m = xavier_init(1, 5, seed=7)
        assert m.shape == (1, 5)
        assert np.all(np.abs(m) <= 1.0)  # sqrt(6/6) = 1

    def test_64x64_bound(self):
        m = xavier_init(64, 64, seed=1)
        bound = np.sqrt(6.0 / 128.0)  # ~0.2165
        assert np.all(np.abs(m) <= bound)
        # draws should actually use the range, not collapse near zero
        assert np.abs(m).max() > 0.9 * bound

    def test_deterministic_per_seed(self):
        a = xavier_init(9, 4, seed=42)
        b = xavier_init(9, 4, seed=42)
        assert np.array_equal(a, b)
        c = xavier_init(9, 4, seed=43)
        assert not np.array_equal(a, c)

    @pytest.mark.parametrize("rows,cols", [(0, 3), (3, 0), (-1, 2)])
    def test_rejects_bad_dims(self, rows, cols):
        with pytest.raises(ValueError):
            xavier_init(rows, cols, seed=0)

    def test_bound_respected_across_shapes(self):
        for rows, cols in [(2, 3), (10, 1), (5, 17), (128, 8)]:
            m = xavier_init(rows, cols, seed=rows * 31 + cols)
            assert np.all(np.abs(m) <= np.sqrt(6.0 / (rows + cols)))


class TestActivations:
    def test_sigmoid_center(self):
        assert sigmoid(0.0) == 0.5

    def test_sigmoid_extremes_stable(self):
        assert sigmoid(1000.0) == pytest.approx(1.0)
        assert sigmoid(-1000.0) == pytest.approx(0.0)

    def test_tanh_saturates(self):
        assert tanh(500.0) == pytest.approx(1.0)

    def test_relu(self):
        assert np.array_equal(relu(np.array([-2.0, 0.0, 3.0])), [0.0, 0.0, 3.0])

    def test_leaky_relu(self):
        assert leaky_relu(-1.0, 0.01) == pytest.approx(-0.01)
        assert leaky_relu(2.0, 0.01) == pytest.approx(2.0)

    def test_softplus_matches_log_sigmoid(self):
        x = np.linspace(-30, 30, 101)
        np.testing.assert_allclose(softplus(-x), -np.log(sigmoid(x)), atol=1e-12)

    def test_softplus_no_overflow(self):
        assert softplus(-800.0) == 0.0
        assert softplus(800.0) == 800.0


class TestAdam:
    def test_zero_gradient_is_identity_from_fresh_state(self):
        state = AdamState(learning_rate=0.1)
        params = {"w": np.array([1.0, -2.0, 3.0])}
        adam_step(state, params, {"w": np.zeros(3)})
        assert np.array_equal(params["w"], [1.0, -2.0, 3.0])

    def test_first_step_moves_by_learning_rate(self):
        # m_hat = 1, v_hat = 1 at step 1, so the update is ~lr * 1
        state = AdamState(learning_rate=0.1)
        params = {"w": np.array([1.0])}
        adam_step(state, params, {"w": np.array([1.0])})
        assert params["w"][0] == pytest.approx(0.9, abs=1e-6)

    def test_two_steps_differ_from_one_doubled_step(self):
        # gradients follow the quadratic loss w^2/2 so grad = current w
        def scripted_two_steps(lr):
            b1, b2, eps = 0.9, 0.999, 1e-8
            w, m, v = 1.0, 0.0, 0.0
            for t in (1, 2):
                g = w
                m = b1 * m + (1 - b1) * g
                v = b2 * v + (1 - b2) * g * g
                w -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
            return w

        state = AdamState(learning_rate=0.05)
        params = {"w": np.array([1.0])}
        adam_step(state, params, {"w": params["w"].copy()})
        adam_step(state, params, {"w": params["w"].copy()})
        assert params["w"][0] == pytest.approx(scripted_two_steps(0.05), abs=1e-12)

        single = AdamState(learning_rate=0.1)
        params2 = {"w": np.array([1.0])}
        adam_step(single, params2, {"w": params2["w"].copy()})
        assert params2["w"][0] != pytest.approx(params["w"][0], abs=1e-6)

    def test_shape_mismatch_rejected(self):
        state = AdamState(learning_rate=0.1)
        with pytest.raises(ValueError, match="shape mismatch"):
            adam_step(state, {"w": np.zeros(3)}, {"w": np.zeros(4)})

    def test_nan_gradient_names_the_group(self):
        state = AdamState(learning_rate=0.1)
        with pytest.raises(ValueError, match="bad_group"):
            adam_step(state, {"bad_group": np.zeros(2)}, {"bad_group": np.array([1.0, np.nan])})

    def test_step_counter_increments(self):
        state = AdamState(learning_rate=0.1)
        params = {"w": np.zeros(2)}
        for expected in (1, 2, 3):
            adam_step(state, params, {"w": np.ones(2)})
            assert state.step == expected


class TestFiniteDiff:
    def test_sum_of_squares(self):
        grad = finite_diff_grad(lambda x: float(np.sum(x**2)), np.array([3.0]), 1e-5)
        assert grad[0] == pytest.approx(6.0, abs=1e-6)

    def test_constant_loss(self):
        grad = finite_diff_grad(lambda x: 4.2, np.array([1.0, -2.0]), 1e-5)
        assert np.array_equal(grad, np.zeros(2))

    def test_restores_params(self):
        params = np.array([1.0, 2.0])
        finite_diff_grad(lambda x: float(x.sum()), params, 1e-5)
        assert np.array_equal(params, [1.0, 2.0])

    def test_nonfinite_loss_rejected(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda x: float("nan"), np.array([1.0]), 1e-5)

    def test_epsilon_must_be_positive(self):
        with pytest.raises(ValueError):
            finite_diff_grad(lambda x: 0.0, np.array([1.0]), 0.0)
