import numpy as np
import pytest

from sevpred import (
    Dense,
    Dropout,
    NetworkSpec,
    adam_step,
    backward,
    forward,
    gradient_check,
    init_optimizer,
    init_params,
    load_model,
    loss_mse,
    loss_weighted_ce,
    save_model,
)
from sevpred.errors import (
    CacheMismatch,
    DataError,
    LabelOutOfRange,
    NonFiniteActivation,
    ShapeMismatch,
)
from sevpred.neural import l2_term, softmax, total_loss


class TestSpecValidation:
    def test_chain_must_be_consistent(self):
        with pytest.raises(ShapeMismatch):
            NetworkSpec((Dense(4, 8), Dense(9, 2, "softmax")))

    def test_softmax_only_final(self):
        with pytest.raises(DataError):
            NetworkSpec((Dense(4, 8, "softmax"), Dense(8, 2, "linear")))

    def test_needs_dense_layer(self):
        with pytest.raises(DataError):
            NetworkSpec((Dropout(0.2),))

    def test_dropout_rate_range(self):
        with pytest.raises(DataError):
            Dropout(1.0)
        with pytest.raises(DataError):
            Dropout(-0.1)


class TestInit:
    def test_deterministic(self):
        spec = NetworkSpec((Dense(10, 6), Dense(6, 3, "softmax")))
        a = init_params(spec, seed=5)
        b = init_params(spec, seed=5)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_biases_zero(self):
        spec = NetworkSpec((Dense(10, 6), Dense(6, 3, "softmax")))
        params = init_params(spec, seed=1)
        for b in params.biases:
            assert (b == 0).all()

    def test_he_uniform_bound(self):
        spec = NetworkSpec((Dense(100, 100, "relu"),))
        params = init_params(spec, seed=2)
        assert np.abs(params.weights[0]).max() <= np.sqrt(6 / 100)

    def test_glorot_bound_for_linear(self):
        spec = NetworkSpec((Dense(50, 150, "linear"),))
        params = init_params(spec, seed=3)
        assert np.abs(params.weights[0]).max() <= np.sqrt(6 / 200)


class TestForward:
    def test_softmax_symmetry(self):
        spec = NetworkSpec((Dense(4, 4, "softmax"),))
        params = init_params(spec, seed=0)
        params.weights[0][:] = 0.0
        out, _ = forward(spec, params, np.ones((1, 4)))
        np.testing.assert_allclose(out, [[0.25, 0.25, 0.25, 0.25]])

    def test_dropout_identity_in_infer(self):
        # identity dense layers around the dropout, so infer output == input
        spec = NetworkSpec((Dense(3, 3, "linear"), Dropout(0.5), Dense(3, 3, "linear")))
        params = init_params(spec, seed=1)
        params.weights[0][:] = np.eye(3)
        params.weights[1][:] = np.eye(3)
        x = np.random.default_rng(0).normal(size=(5, 3))
        out, _ = forward(spec, params, x, mode="infer")
        np.testing.assert_array_equal(out, x)

    def test_relu_definition(self):
        spec = NetworkSpec((Dense(2, 2, "relu"),))
        params = init_params(spec, seed=0)
        params.weights[0][:] = np.eye(2)
        out, _ = forward(spec, params, np.array([[-1.0, 2.0]]))
        np.testing.assert_array_equal(out, [[0.0, 2.0]])

    def test_width_mismatch(self):
        spec = NetworkSpec((Dense(4, 2, "linear"),))
        params = init_params(spec, seed=0)
        with pytest.raises(ShapeMismatch):
            forward(spec, params, np.zeros((3, 5)))

    def test_non_finite_detected(self):
        spec = NetworkSpec((Dense(2, 2, "linear"),))
        params = init_params(spec, seed=0)
        params.weights[0][0, 0] = np.inf
        with pytest.raises(NonFiniteActivation):
            forward(spec, params, np.ones((1, 2)))

    def test_softmax_rows_sum_to_one_even_for_huge_logits(self):
        rng = np.random.default_rng(4)
        logits = rng.normal(scale=1e4, size=(50, 6))
        probs = softmax(logits)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert np.isfinite(probs).all()

    def test_inverted_dropout_preserves_expectation(self):
        # one big batch of identical rows = many seeded trials
        n = 100_000
        spec = NetworkSpec((Dense(4, 4, "linear"), Dropout(0.3), Dense(4, 4, "linear")))
        params = init_params(spec, seed=0)
        params.weights[0][:] = np.eye(4)
        params.weights[1][:] = np.eye(4)
        x = np.ones((n, 4))
        out, _ = forward(spec, params, x, mode="train", dropout_seed=123)
        np.testing.assert_allclose(out.mean(axis=0), 1.0, rtol=0.01)


class TestLosses:
    def test_perfect_prediction_zero_loss(self):
        probs = np.array([[1.0, 0.0, 0.0, 0.0]])
        assert loss_weighted_ce(probs, np.array([1]), np.ones(4)) == 0.0

    def test_uniform_probs_ln4(self):
        probs = np.full((3, 4), 0.25)
        value = loss_weighted_ce(probs, np.array([1, 2, 3]), np.ones(4))
        assert value == pytest.approx(np.log(4), abs=1e-6)

    def test_weighted_hand_value(self):
        probs = np.full((2, 2), 0.5)
        value = loss_weighted_ce(probs, np.array([1, 2]), np.array([2.0, 1.0]))
        assert value == pytest.approx(1.5 * np.log(2), abs=1e-6)

    def test_all_ones_weights_equal_unweighted(self):
        rng = np.random.default_rng(9)
        logits = rng.normal(size=(40, 4))
        probs = softmax(logits)
        labels = rng.integers(1, 5, size=40)
        weighted = loss_weighted_ce(probs, labels, np.ones(4))
        unweighted = float(np.mean(-np.log(probs[np.arange(40), labels - 1])))
        assert weighted == pytest.approx(unweighted, abs=1e-12)

    def test_label_out_of_range(self):
        probs = np.full((1, 4), 0.25)
        with pytest.raises(LabelOutOfRange):
            loss_weighted_ce(probs, np.array([5]), np.ones(4))

    def test_mse_values(self):
        assert loss_mse(np.array([[1.0, 1.0]]), np.array([[1.0, 1.0]])) == 0.0
        assert loss_mse(np.array([[0.0]]), np.array([[2.0]])) == 4.0
        assert loss_mse(np.array([[1.0, 1.0]]), np.array([[0.0, 2.0]])) == 1.0

    def test_mse_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            loss_mse(np.zeros((2, 2)), np.zeros((2, 3)))


class TestBackward:
    def test_zero_weight_network_finite_gradients(self):
        spec = NetworkSpec((Dense(4, 4, "relu"), Dense(4, 3, "softmax")))
        params = init_params(spec, seed=0)
        for w in params.weights:
            w[:] = 0.0
        x = np.ones((6, 4))
        _, cache = forward(spec, params, x, mode="train")
        grads = backward(spec, params, cache, "weighted_ce", np.array([1, 2, 3, 1, 2, 3]))
        for g in grads.weights + grads.biases:
            assert np.isfinite(g).all()

    def test_zero_class_weights_leave_only_l2(self):
        spec = NetworkSpec((Dense(3, 5, "relu"), Dense(5, 2, "softmax")), l2_penalty=0.01)
        params = init_params(spec, seed=1)
        x = np.random.default_rng(1).normal(size=(8, 3))
        _, cache = forward(spec, params, x, mode="train")
        grads = backward(
            spec, params, cache, "weighted_ce", np.ones(8, dtype=int),
            class_weights=np.zeros(2),
        )
        for g, w in zip(grads.weights, params.weights):
            np.testing.assert_allclose(g, 0.01 * w, atol=1e-15)
        for g in grads.biases:
            np.testing.assert_allclose(g, 0.0, atol=1e-15)

    def test_requires_train_cache(self):
        spec = NetworkSpec((Dense(2, 2, "softmax"),))
        params = init_params(spec, seed=0)
        _, cache = forward(spec, params, np.ones((1, 2)), mode="infer")
        with pytest.raises(CacheMismatch):
            backward(spec, params, cache, "weighted_ce", np.array([1]))


class TestGradientCheck:
    def test_linear_mse_is_essentially_exact(self):
        spec = NetworkSpec((Dense(6, 4, "linear"),))
        params = init_params(spec, seed=3)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(10, 6))
        t = rng.normal(size=(10, 4))
        assert gradient_check(spec, params, x, "mse", t, seed=0) < 1e-7

    def test_three_layer_relu_weighted_ce(self):
        spec = NetworkSpec(
            (Dense(8, 16, "relu"), Dense(16, 8, "relu"), Dense(8, 4, "softmax")),
            l2_penalty=0.001,
        )
        params = init_params(spec, seed=4)
        rng = np.random.default_rng(4)
        x = rng.normal(size=(16, 8))
        y = rng.integers(1, 5, size=16)
        w = np.array([2.0, 0.5, 1.0, 3.0])
        assert gradient_check(spec, params, x, "weighted_ce", y, w, seed=1) < 1e-5

    def test_active_dropout_with_replayed_masks(self):
        spec = NetworkSpec((Dense(5, 8, "relu"), Dropout(0.4), Dense(8, 5, "linear")))
        params = init_params(spec, seed=5)
        rng = np.random.default_rng(5)
        x = rng.normal(size=(12, 5))
        assert gradient_check(spec, params, x, "mse", x, seed=2) < 1e-5

    def test_corrupted_gradient_detected(self):
        spec = NetworkSpec((Dense(4, 6, "relu"), Dense(6, 3, "softmax")))
        params = init_params(spec, seed=6)
        rng = np.random.default_rng(6)
        x = rng.normal(size=(10, 4))
        y = rng.integers(1, 4, size=10)
        _, cache = forward(spec, params, x, mode="train", dropout_seed=9)
        grads = backward(spec, params, cache, "weighted_ce", y)

        # recompute the checker's comparison with a corrupted analytic gradient
        corrupted = [g * 1.01 for g in grads.arrays()]
        arrays = params.arrays()
        worst = 0.0
        h = 1e-5
        for arr_idx, arr in enumerate(arrays):
            flat = arr.size // 2
            original = arr.flat[flat]
            arr.flat[flat] = original + h
            plus = total_loss(spec, params, x, "weighted_ce", y, dropout_seed=9)
            arr.flat[flat] = original - h
            minus = total_loss(spec, params, x, "weighted_ce", y, dropout_seed=9)
            arr.flat[flat] = original
            numeric = (plus - minus) / (2 * h)
            bad = corrupted[arr_idx].flat[flat]
            worst = max(worst, abs(bad - numeric) / max(abs(bad), abs(numeric), 1e-8))
        assert worst > 1e-3


class TestAdam:
    def make(self):
        spec = NetworkSpec((Dense(3, 2, "linear"),))
        params = init_params(spec, seed=7)
        state = init_optimizer(params, learning_rate=0.001)
        return spec, params, state

    def test_zero_gradient_fixed_point(self):
        _, params, state = self.make()
        zero = type(params)([np.zeros_like(w) for w in params.weights],
                            [np.zeros_like(b) for b in params.biases])
        new_params, new_state = adam_step(params, zero, state)
        for old, new in zip(params.weights, new_params.weights):
            np.testing.assert_array_equal(old, new)
        assert new_state.step == 1

    def test_first_step_is_signed_learning_rate(self):
        _, params, state = self.make()
        rng = np.random.default_rng(8)
        grads = type(params)(
            [rng.normal(size=w.shape) for w in params.weights],
            [rng.normal(size=b.shape) for b in params.biases],
        )
        new_params, _ = adam_step(params, grads, state)
        # bias-corrected first step: delta = lr * g / (|g| + eps) ~ lr * sign(g)
        delta = new_params.weights[0] - params.weights[0]
        np.testing.assert_allclose(delta, -0.001 * np.sign(grads.weights[0]), rtol=1e-4)

    def test_deterministic(self):
        _, params, state = self.make()
        grads = type(params)([np.ones_like(w) for w in params.weights],
                             [np.ones_like(b) for b in params.biases])
        a_params, a_state = adam_step(params, grads, state)
        b_params, b_state = adam_step(params, grads, state)
        for wa, wb in zip(a_params.weights, b_params.weights):
            np.testing.assert_array_equal(wa, wb)
        assert a_state.step == b_state.step


class TestModelFile:
    def test_round_trip(self, tmp_path):
        spec = NetworkSpec(
            (Dense(5, 7, "relu"), Dropout(0.2), Dense(7, 3, "softmax")), l2_penalty=0.01
        )
        params = init_params(spec, seed=11)
        path = tmp_path / "net.model"
        save_model(path, spec, params, {"kind": "test"})
        spec2, params2, meta = load_model(path)
        assert spec2 == spec
        assert meta == {"kind": "test"}
        for a, b in zip(params.weights + params.biases, params2.weights + params2.biases):
            np.testing.assert_array_equal(a, b)

    def test_l2_term_formula(self):
        spec = NetworkSpec((Dense(2, 2, "linear"),), l2_penalty=0.5)
        params = init_params(spec, seed=0)
        params.weights[0][:] = [[1.0, 2.0], [3.0, 4.0]]
        params.biases[0][:] = [10.0, 10.0]  # biases are exempt
        assert l2_term(spec, params) == pytest.approx(0.5 * 30 / 2)
