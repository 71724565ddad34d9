import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softdtw.core import dtw, sdtw
from softdtw.prediction import (
    AdamState,
    MlpParams,
    TrainingConfig,
    TrainingDiverged,
    adam_step,
    evaluate_predictor,
    init_params,
    load_params,
    make_pairs,
    mlp_forward,
    save_params,
    split_series,
    train_predictor,
    training_grad,
    training_loss,
    training_value_and_grad,
)
from softdtw.synthetic import spike_task
from softdtw.verify import numerical_gradient, relative_error


def _zero_params(d_in, d_out, hidden=4):
    return MlpParams(np.zeros((hidden, d_in)), np.zeros(hidden), np.zeros((d_out, hidden)), np.zeros(d_out))


class TestSplit:
    def test_sixty_percent(self):
        head, tail = split_series(np.arange(10.0), 0.6)
        assert head.shape == (1, 6) and tail.shape == (1, 4)

    def test_halves(self):
        head, tail = split_series([1.0, 2.0], 0.5)
        assert head.shape == (1, 1) and tail.shape == (1, 1)

    @given(n=st.integers(2, 40), p=st.integers(1, 3), fraction=st.floats(0.05, 0.95), seed=st.integers(0, 1000))
    @settings(max_examples=50, deadline=None)
    def test_partition_identity(self, n, p, fraction, seed):
        x = np.random.default_rng(seed).standard_normal((p, n))
        t = math.floor(fraction * n)
        if not 1 <= t < n:
            with pytest.raises(ValueError):
                split_series(x, fraction)
            return
        np.testing.assert_array_equal(np.concatenate(split_series(x, fraction), axis=1), x)

    @pytest.mark.parametrize("fraction", [0.0, 0.05, 1.0])
    def test_degenerate(self, fraction):
        with pytest.raises(ValueError):
            split_series(np.arange(10.0), fraction)

    def test_make_pairs_shapes(self, rng):
        heads, tails = make_pairs(rng.standard_normal((5, 2, 10)), 0.6)
        assert heads.shape == (5, 2, 6) and tails.shape == (5, 2, 4)


class TestForward:
    def test_zero_params(self):
        np.testing.assert_array_equal(mlp_forward(_zero_params(6, 4), np.ones((1, 6))), np.zeros((1, 4)))

    def test_constant_output(self, rng):
        params = _zero_params(6, 4)
        params.w1[:] = rng.standard_normal(params.w1.shape)
        params.b2[:] = 2.5
        np.testing.assert_array_equal(mlp_forward(params, rng.standard_normal((1, 6))), np.full((1, 4), 2.5))

    def test_shapes_and_time_major_layout(self, rng):
        params = init_params(2 * 6, 2 * 4, hidden=5, seed=0)
        out = mlp_forward(params, rng.standard_normal((3, 2, 6)))
        assert out.shape == (3, 2, 4) and np.all(np.isfinite(out))
        # output entry k of the flat vector is feature k % p at time k // p
        params.b2[:] = np.arange(8.0)
        params.w2[:] = 0.0
        np.testing.assert_array_equal(mlp_forward(params, np.zeros((2, 6))), [[0, 2, 4, 6], [1, 3, 5, 7]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mlp_forward(init_params(6, 4, seed=0), np.zeros((1, 5)))

    def test_inconsistent_params(self):
        with pytest.raises(ValueError):
            MlpParams(np.zeros((3, 2)), np.zeros(4), np.zeros((1, 3)), np.zeros(1))


class TestLoss:
    def test_perfect_prediction_euclidean(self):
        params = _zero_params(3, 2)
        params.b2[:] = [1.0, -1.0]
        targets = np.tile([[1.0, -1.0]], (4, 1, 1))
        assert training_loss(params, np.zeros((4, 1, 3)), targets) == 0.0

    def test_zero_pair_sdtw(self):
        value = training_loss(_zero_params(3, 2), np.zeros((1, 1, 3)), np.zeros((1, 1, 2)), "sdtw", 1.0)
        assert value == pytest.approx(-math.log(3), abs=1e-15)

    def test_hand_summed(self, rng):
        params = init_params(5, 3, hidden=4, seed=1)
        x, y = rng.standard_normal((4, 1, 5)), rng.standard_normal((4, 1, 3))
        pred = mlp_forward(params, x)
        assert training_loss(params, x, y) == pytest.approx(np.mean([np.sum((a - b) ** 2) for a, b in zip(pred, y)]), rel=1e-14)
        assert training_loss(params, x, y, "sdtw", 0.3) == pytest.approx(np.mean([sdtw(a, b, 0.3) for a, b in zip(pred, y)]), rel=1e-14)

    @pytest.mark.parametrize("gamma", [None, 0.0])
    def test_sdtw_needs_positive_gamma(self, gamma):
        with pytest.raises(ValueError):
            training_loss(_zero_params(3, 2), np.zeros((1, 1, 3)), np.zeros((1, 1, 2)), "sdtw", gamma)

    def test_unknown_loss(self):
        with pytest.raises(ValueError):
            training_loss(_zero_params(3, 2), np.zeros((1, 1, 3)), np.zeros((1, 1, 2)), "l1")


class TestGradient:
    def test_zero_at_perfect_euclidean_fit(self, rng):
        params = init_params(4, 3, hidden=5, seed=2)
        x = rng.standard_normal((3, 1, 4))
        y = mlp_forward(params, x)
        grad = training_grad(params, x, y)
        for arr in grad.arrays().values():
            np.testing.assert_array_equal(arr, 0.0)

    @pytest.mark.parametrize("loss, gamma", [("euclidean", None), ("sdtw", 0.1), ("sdtw", 1.0)])
    @pytest.mark.parametrize("p", [1, 2])
    def test_finite_differences(self, rng, loss, gamma, p):
        params = init_params(p * 5, p * 4, hidden=6, seed=3)
        x, y = rng.standard_normal((3, p, 5)), rng.standard_normal((3, p, 4))
        grad = training_grad(params, x, y, loss, gamma)
        for name, arr in params.arrays().items():

            def f(w, name=name):
                trial = params.copy()
                getattr(trial, name)[...] = w
                return training_loss(trial, x, y, loss, gamma)

            num = numerical_gradient(f, arr.copy())
            assert relative_error(grad.arrays()[name], num) < 1e-4, name

    def test_batch_is_mean_of_examples(self, rng):
        params = init_params(5, 3, hidden=4, seed=4)
        x, y = rng.standard_normal((2, 1, 5)), rng.standard_normal((2, 1, 3))
        both = training_grad(params, x, y, "sdtw", 0.5)
        g0 = training_grad(params, x[:1], y[:1], "sdtw", 0.5)
        g1 = training_grad(params, x[1:], y[1:], "sdtw", 0.5)
        for name in both.arrays():
            np.testing.assert_allclose(both.arrays()[name], 0.5 * (g0.arrays()[name] + g1.arrays()[name]), rtol=1e-12, atol=1e-15)

    def test_value_matches_loss(self, rng):
        params = init_params(5, 3, hidden=4, seed=5)
        x, y = rng.standard_normal((3, 1, 5)), rng.standard_normal((3, 1, 3))
        value, _ = training_value_and_grad(params, x, y, "sdtw", 0.2)
        assert value == training_loss(params, x, y, "sdtw", 0.2)


class TestAdam:
    def test_zero_gradient(self):
        params = init_params(3, 2, hidden=4, seed=0)
        state = AdamState.zeros_like(params)
        _, new = adam_step(state, params, params.map(np.zeros_like))
        for a, b in zip(params.arrays().values(), new.arrays().values()):
            np.testing.assert_array_equal(a, b)

    def test_first_step_closed_form(self, rng):
        params = init_params(3, 2, hidden=4, seed=0)
        grad = params.map(lambda w: rng.standard_normal(w.shape))
        state = AdamState.zeros_like(params, lr=0.01)
        new_state, new = adam_step(state, params, grad)
        assert new_state.step == 1
        for name, g in grad.arrays().items():
            step = params.arrays()[name] - new.arrays()[name]
            # m_hat = g and v_hat = g^2 after bias correction
            np.testing.assert_allclose(step, 0.01 * g / (np.abs(g) + 1e-8), rtol=1e-12)
            np.testing.assert_allclose(np.abs(step), 0.01, rtol=1e-6)

    def test_two_equal_steps(self):
        params = MlpParams(np.zeros((1, 1)), np.zeros(1), np.zeros((1, 1)), np.zeros(1))
        grad = params.map(lambda w: np.full_like(w, 2.0))
        state = AdamState.zeros_like(params, lr=0.1)
        state, params = adam_step(state, params, grad)
        state, params = adam_step(state, params, grad)
        # a constant gradient gives m_hat = g and v_hat = g^2 at every step
        np.testing.assert_allclose(params.w1, -2 * 0.1 * 2.0 / (2.0 + 1e-8), rtol=1e-12)

    def test_inputs_not_mutated(self):
        params = init_params(3, 2, hidden=4, seed=0)
        before = params.copy()
        state = AdamState.zeros_like(params)
        adam_step(state, params, params.map(np.ones_like))
        np.testing.assert_array_equal(params.w1, before.w1)
        assert state.step == 0


class TestTraining:
    @pytest.fixture
    def task(self):
        series = spike_task(np.random.default_rng(0), n_series=30, length=20)
        return make_pairs(series, 0.6)

    def test_zero_learning_rate(self, task):
        x, y = task
        start = init_params(x.shape[2], y.shape[2], hidden=8, seed=0)
        res = train_predictor(x, y, TrainingConfig(epochs=1, lr=0.0, hidden=8), params=start.copy())
        for a, b in zip(start.arrays().values(), res.params.arrays().values()):
            np.testing.assert_array_equal(a, b)

    def test_loss_decreases(self, task):
        x, y = task
        res = train_predictor(x, y, TrainingConfig(epochs=30, hidden=16, lr=1e-2))
        assert res.history[-1] <= res.history[0]

    def test_deterministic(self, task):
        x, y = task
        cfg = TrainingConfig(loss="sdtw", gamma=0.1, epochs=3, hidden=8, seed=5)
        a, b = train_predictor(x, y, cfg), train_predictor(x, y, cfg)
        for u, v in zip(a.params.arrays().values(), b.params.arrays().values()):
            np.testing.assert_array_equal(u, v)
        assert a.history == b.history

    def test_warm_start_phases(self, task):
        x, y = task
        cfg = TrainingConfig(loss="sdtw", gamma=0.1, epochs=2, hidden=8, init="euclidean-warm-start")
        res = train_predictor(x, y, cfg)
        assert res.phases == ["euclidean", "euclidean", "sdtw", "sdtw"]

    def test_warm_start_prefix_is_euclidean_run(self, task):
        x, y = task
        euc = train_predictor(x, y, TrainingConfig(epochs=2, hidden=8))
        warm = train_predictor(x, y, TrainingConfig(loss="sdtw", gamma=0.1, epochs=2, hidden=8, init="euclidean-warm-start"))
        assert warm.history[:2] == euc.history

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
    def test_divergence_aborts_with_history(self, task):
        x, y = task
        with pytest.raises(TrainingDiverged) as info:
            train_predictor(x, 1e200 * y, TrainingConfig(epochs=2, hidden=4))
        assert isinstance(info.value.history, list)

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            train_predictor(np.zeros((3, 1, 4)), np.zeros((2, 1, 2)))


class TestEvaluate:
    def test_perfect(self, rng):
        params = init_params(4, 3, hidden=5, seed=0)
        x = rng.standard_normal((3, 1, 4))
        assert evaluate_predictor(params, x, mlp_forward(params, x)) == (0.0, 0.0)

    def test_single_pair(self, rng):
        params = init_params(4, 3, hidden=5, seed=0)
        x, y = rng.standard_normal((1, 1, 4)), rng.standard_normal((1, 1, 3))
        pred = mlp_forward(params, x)[0]
        d, e = evaluate_predictor(params, x, y)
        assert d == dtw(pred, y[0]) and e == pytest.approx(np.sum((pred - y[0]) ** 2), rel=1e-14)

    def test_nonnegative(self, rng):
        params = init_params(4, 3, hidden=5, seed=1)
        d, e = evaluate_predictor(params, rng.standard_normal((5, 1, 4)), rng.standard_normal((5, 1, 3)))
        assert 0 <= d <= e and np.isfinite(e)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        params = init_params(6, 4, hidden=5, seed=7)
        path = tmp_path / "mlp.bin"
        save_params(params, path, {"loss": "sdtw"})
        loaded = load_params(path)
        for a, b in zip(params.arrays().values(), loaded.arrays().values()):
            np.testing.assert_array_equal(a, b)
        assert (tmp_path / "mlp.bin.json").exists()

    def test_header(self, tmp_path):
        path = tmp_path / "mlp.bin"
        save_params(init_params(2, 1, hidden=3, seed=0), path)
        data = path.read_bytes()
        assert data[:8] == b"SDTWMLP\x00"
        assert int.from_bytes(data[8:12], "little") == 1

    def test_rejects_other_files(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a model at all")
        with pytest.raises(ValueError):
            load_params(path)
