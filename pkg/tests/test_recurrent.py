import math

import numpy as np
import numpy.testing as npt
import pytest

from scorecast.errors import UsageError
from scorecast.nn.core import TrainConfig, grad_check, mse_loss
from scorecast.nn.recurrent import (
    GruParams,
    LstmParams,
    RecurrentRegressor,
    gru_cell_forward,
    lstm_cell_forward,
    sequence_order_for,
    train_recurrent,
)
from scorecast.records import DatasetView


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def lstm_oracle_step(p: LstmParams, x, z_prev, s_prev):
    """Straight-line transcription of the gate equations, scalar math."""
    hidden = p.hidden_size
    concat = list(z_prev) + list(x)
    z_new, s_new = [], []
    for row in range(hidden):
        a_i = sum(p.w_i[row][col] * concat[col] for col in range(len(concat))) + p.b_i[row]
        a_f = sum(p.w_f[row][col] * concat[col] for col in range(len(concat))) + p.b_f[row]
        a_o = sum(p.w_o[row][col] * concat[col] for col in range(len(concat))) + p.b_o[row]
        a_g = sum(p.w_g[row][col] * concat[col] for col in range(len(concat))) + p.b_g[row]
        i, f, o, g = _sig(a_i), _sig(a_f), _sig(a_o), math.tanh(a_g)
        s = f * s_prev[row] + i * g
        s_new.append(s)
        z_new.append(o * math.tanh(s))
    return z_new, s_new


def gru_oracle_step(p: GruParams, x, z_prev):
    hidden = p.hidden_size
    z_new = []
    for row in range(hidden):
        a_h = (sum(p.a_h[row][col] * x[col] for col in range(len(x)))
               + sum(p.g_h[row][col] * z_prev[col] for col in range(hidden)))
        a_r = (sum(p.a_r[row][col] * x[col] for col in range(len(x)))
               + sum(p.g_r[row][col] * z_prev[col] for col in range(hidden)))
        h, r = _sig(a_h), _sig(a_r)
        u = sum(p.g_c[row][col] * z_prev[col] for col in range(hidden))
        c = math.tanh(sum(p.a_c[row][col] * x[col] for col in range(len(x))) + r * u)
        z_new.append(h * z_prev[row] + (1.0 - h) * c)
    return z_new


def zero_lstm(hidden=1, inputs=1) -> LstmParams:
    fan = hidden + inputs
    return LstmParams(*(np.zeros((hidden, fan)) for _ in range(4)),
                      *(np.zeros(hidden) for _ in range(4)))


def zero_gru(hidden=1, inputs=1) -> GruParams:
    return GruParams(np.zeros((hidden, inputs)), np.zeros((hidden, inputs)),
                     np.zeros((hidden, inputs)), np.zeros((hidden, hidden)),
                     np.zeros((hidden, hidden)), np.zeros((hidden, hidden)))


class TestLstmCell:
    def test_zero_everything_stays_zero(self):
        z, s, _ = lstm_cell_forward(zero_lstm(), np.zeros((1, 1)),
                                    np.zeros((1, 1)), np.zeros((1, 1)))
        npt.assert_array_equal(z, 0.0)
        npt.assert_array_equal(s, 0.0)

    def test_zero_weights_with_carried_state(self):
        # gates all sigmoid(0) = 0.5, candidate tanh(0) = 0:
        # s = 0.5 * 1 = 0.5, z = 0.5 * tanh(0.5)
        z, s, _ = lstm_cell_forward(zero_lstm(), np.zeros((1, 1)),
                                    np.zeros((1, 1)), np.ones((1, 1)))
        assert s[0, 0] == pytest.approx(0.5, abs=1e-15)
        assert z[0, 0] == pytest.approx(0.5 * math.tanh(0.5), abs=1e-15)
        assert z[0, 0] == pytest.approx(0.23105857863000487, abs=1e-12)

    def test_matches_straight_line_oracle(self):
        rng = np.random.default_rng(17)
        for trial in range(100):
            hidden = int(rng.integers(1, 5))
            inputs = int(rng.integers(1, 4))
            p = LstmParams(*(rng.normal(size=(hidden, hidden + inputs)) for _ in range(4)),
                           *(rng.normal(size=hidden) for _ in range(4)))
            x = rng.normal(size=(1, inputs))
            z_prev = rng.uniform(-1, 1, size=(1, hidden))
            s_prev = rng.normal(size=(1, hidden))
            z, s, _ = lstm_cell_forward(p, x, z_prev, s_prev)
            z_ref, s_ref = lstm_oracle_step(p, x[0], z_prev[0], s_prev[0])
            npt.assert_allclose(z[0], z_ref, rtol=0, atol=1e-12)
            npt.assert_allclose(s[0], s_ref, rtol=0, atol=1e-12)

    def test_hidden_state_bounded(self):
        rng = np.random.default_rng(23)
        p = LstmParams(*(rng.normal(scale=3.0, size=(4, 5)) for _ in range(4)),
                       *(rng.normal(scale=3.0, size=4) for _ in range(4)))
        z = np.zeros((8, 4))
        s = np.zeros((8, 4))
        for _ in range(50):
            z, s, _ = lstm_cell_forward(p, rng.normal(scale=10.0, size=(8, 1)), z, s)
            assert np.all(np.abs(z) < 1.0)


class TestGruCell:
    def test_zero_everything_stays_zero(self):
        z, _ = gru_cell_forward(zero_gru(), np.zeros((1, 1)), np.zeros((1, 1)))
        npt.assert_array_equal(z, 0.0)

    def test_zero_weights_keep_half_of_state(self):
        # h = sigmoid(0) = 0.5, candidate tanh(0) = 0 -> z = 0.5 * z_prev
        z, _ = gru_cell_forward(zero_gru(), np.zeros((1, 1)), np.ones((1, 1)))
        assert z[0, 0] == pytest.approx(0.5, abs=1e-15)

    def test_matches_straight_line_oracle(self):
        rng = np.random.default_rng(29)
        for trial in range(100):
            hidden = int(rng.integers(1, 5))
            inputs = int(rng.integers(1, 4))
            p = GruParams(rng.normal(size=(hidden, inputs)),
                          rng.normal(size=(hidden, inputs)),
                          rng.normal(size=(hidden, inputs)),
                          rng.normal(size=(hidden, hidden)),
                          rng.normal(size=(hidden, hidden)),
                          rng.normal(size=(hidden, hidden)))
            x = rng.normal(size=(1, inputs))
            z_prev = rng.uniform(-1, 1, size=(1, hidden))
            z, _ = gru_cell_forward(p, x, z_prev)
            npt.assert_allclose(z[0], gru_oracle_step(p, x[0], z_prev[0]),
                                rtol=0, atol=1e-12)

    def test_hidden_state_bounded(self):
        rng = np.random.default_rng(31)
        p = GruParams(*(rng.normal(scale=3.0, size=(4, 1)) for _ in range(3)),
                      *(rng.normal(scale=3.0, size=(4, 4)) for _ in range(3)))
        z = np.zeros((8, 4))
        for _ in range(50):
            z, _ = gru_cell_forward(p, rng.normal(scale=10.0, size=(8, 1)), z)
            # convex mix of state and tanh candidate; saturation can touch 1.0
            assert np.all(np.abs(z) <= 1.0)


def model_loss_fn(model: RecurrentRegressor, sequences: np.ndarray, y: np.ndarray):
    def f(params):
        pred, cache = model.forward(sequences)
        loss, dpred = mse_loss(pred, y)
        return loss, model.backward(cache, dpred)
    return f


class TestBptt:
    @pytest.mark.parametrize("arch", ["lstm", "gru"])
    @pytest.mark.parametrize("hidden,seq_len", [(2, 2), (2, 3), (8, 2), (8, 3)])
    def test_gradients_match_central_differences(self, arch, hidden, seq_len):
        rng = np.random.default_rng(hidden * 10 + seq_len)
        order = tuple(f"f{i}" for i in range(seq_len))
        model = RecurrentRegressor.init(arch, order, hidden, rng)
        sequences = rng.normal(size=(4, seq_len, 1))
        y = rng.normal(size=4)
        worst = grad_check(model_loss_fn(model, sequences, y), model.params())
        assert worst < 1e-6, (arch, hidden, seq_len, worst)

    @pytest.mark.parametrize("arch", ["lstm", "gru"])
    def test_zero_residual_gives_zero_gradients(self, arch):
        rng = np.random.default_rng(41)
        model = RecurrentRegressor.init(arch, ("a", "b"), 3, rng)
        sequences = rng.normal(size=(5, 2, 1))
        pred, cache = model.forward(sequences)
        _, dpred = mse_loss(pred, pred.copy())
        for g in model.backward(cache, dpred):
            npt.assert_array_equal(g, 0.0)

    @pytest.mark.parametrize("arch", ["lstm", "gru"])
    def test_batch_permutation_leaves_gradients_unchanged(self, arch):
        rng = np.random.default_rng(43)
        model = RecurrentRegressor.init(arch, ("a", "b", "c"), 4, rng)
        sequences = rng.normal(size=(16, 3, 1))
        y = rng.normal(size=16)

        def grads_for(seq, t):
            pred, cache = model.forward(seq)
            _, dpred = mse_loss(pred, t)
            return model.backward(cache, dpred)

        perm = rng.permutation(16)
        for a, b in zip(grads_for(sequences, y),
                        grads_for(sequences[perm], y[perm])):
            npt.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def make_view(n=120, seed=0, noise=0.0) -> DatasetView:
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(20, 95, size=(n, 2))
    targets = (0.4 * matrix[:, 0] + 0.6 * matrix[:, 1]
               + noise * rng.standard_normal(n))
    return DatasetView("D2-ETE", ("ete", "cw"), matrix, targets)


class TestTraining:
    def test_constant_targets_converge(self):
        view = make_view(n=60, seed=1)
        view = DatasetView(view.name, view.feature_names, view.matrix,
                           np.full(60, 64.0))
        _, trace = train_recurrent(view, "gru", TrainConfig(epochs=10, seed=0))
        assert trace[-1] <= 1e-2

    def test_gru_fits_noiseless_linear_cohort(self):
        view = make_view(n=200, seed=5)
        config = TrainConfig(learning_rate=0.02, epochs=400, batch_size=32, seed=3)
        model, _ = train_recurrent(view, "gru", config, hidden_size=8)
        pred = model.predict(view.matrix, view.feature_names)
        ss_res = float(np.sum((view.targets - pred) ** 2))
        ss_tot = float(np.sum((view.targets - view.targets.mean()) ** 2))
        assert 1.0 - ss_res / ss_tot >= 0.99

    def test_lstm_learns_signal(self):
        view = make_view(n=200, seed=6)
        config = TrainConfig(learning_rate=0.02, epochs=200, batch_size=32, seed=4)
        model, trace = train_recurrent(view, "lstm", config, hidden_size=8)
        assert trace[-1] < trace[0] * 0.2

    @pytest.mark.parametrize("arch", ["lstm", "gru"])
    def test_same_seed_bitwise_identical(self, arch):
        view = make_view(n=50, seed=2)
        config = TrainConfig(epochs=4, seed=11)
        m1, _ = train_recurrent(view, arch, config, hidden_size=4)
        m2, _ = train_recurrent(view, arch, config, hidden_size=4)
        for a, b in zip(m1.params(), m2.params()):
            npt.assert_array_equal(a, b)

    def test_sequence_orders(self):
        assert sequence_order_for("D1") == ("t1", "t2", "cw")
        assert sequence_order_for("D2-MTE") == ("cw", "mte")
        assert sequence_order_for("D2-ETE") == ("cw", "ete")
        with pytest.raises(UsageError):
            sequence_order_for("D9")

    def test_predict_reorders_features_chronologically(self):
        view = make_view(n=80, seed=8)
        model, _ = train_recurrent(view, "gru", TrainConfig(epochs=3, seed=1))
        # (ete, cw) columns swapped plus swapped names must give identical output
        swapped = view.matrix[:, [1, 0]]
        npt.assert_allclose(model.predict(view.matrix, ("ete", "cw")),
                            model.predict(swapped, ("cw", "ete")),
                            rtol=0, atol=0)

    def test_empty_view_rejected(self):
        view = DatasetView("D1", ("t1", "t2", "cw"), np.zeros((0, 3)), np.zeros(0))
        with pytest.raises(UsageError):
            train_recurrent(view, "gru", TrainConfig(epochs=1))
