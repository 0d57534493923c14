import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deep_eda.errors import ConfigError, ParseError, ShapeError, TrainingDivergenceError
from deep_eda.rbm import (
    RbmParams,
    TrainConfig,
    _apply,
    cd_gradient,
    cd_update,
    hidden_probs,
    load_rbm,
    save_rbm,
    sigmoid,
    train_rbm,
    visible_probs,
)

from . import oracles


def random_params(rng, n, m, scale=1.0):
    return RbmParams(rng.normal(0, scale, (n, m)), rng.normal(0, scale, n), rng.normal(0, scale, m))


def all_rows(n):
    return np.array(list(oracles.genomes(n)), dtype=float)


class TestConditionals:
    def test_zero_params_half(self):
        p = RbmParams.zeros(4, 3)
        np.testing.assert_array_equal(hidden_probs(np.ones((2, 4)), p), 0.5)
        np.testing.assert_array_equal(visible_probs(np.ones((2, 3)), p), 0.5)

    def test_hand_evaluated_hidden(self):
        p = RbmParams([[1.0], [1.0]], [0.0, 0.0], [0.0])
        assert hidden_probs([[1, 1]], p)[0, 0] == pytest.approx(0.880797, abs=1e-6)

    def test_hand_evaluated_visible(self):
        p = RbmParams([[2.0], [-2.0]], [0.0, 0.0], [0.0])
        np.testing.assert_allclose(visible_probs([[1]], p)[0], [0.8808, 0.1192], atol=1e-4)

    def test_transpose_symmetry(self):
        rng = np.random.default_rng(0)
        p = random_params(rng, 5, 3)
        q = RbmParams(p.W.T, p.c, p.b)
        H = rng.integers(0, 2, (7, 3))
        np.testing.assert_array_equal(visible_probs(H, p), hidden_probs(H, q))

    def test_scale_multiplies_weights_only(self):
        rng = np.random.default_rng(1)
        p = random_params(rng, 4, 3)
        V = rng.integers(0, 2, (5, 4))
        doubled = RbmParams(2 * p.W, p.b, p.c)
        np.testing.assert_allclose(hidden_probs(V, p, 2.0), hidden_probs(V, doubled), rtol=1e-15)

    @settings(max_examples=30)
    @given(st.integers(0, 10_000))
    def test_strictly_inside_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        p = random_params(rng, 6, 4, scale=3.0)
        probs = hidden_probs(rng.integers(0, 2, (10, 6)), p)
        assert np.all((probs > 0) & (probs < 1))

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            hidden_probs(np.ones((2, 3)), RbmParams.zeros(4, 2))
        with pytest.raises(ShapeError):
            RbmParams(np.zeros((3, 2)), np.zeros(2), np.zeros(2))

    def test_sigmoid_extremes(self):
        with np.errstate(over="raise"):
            assert sigmoid(np.array([-1000.0]))[0] == 0.0
            assert sigmoid(np.array([1000.0]))[0] == 1.0


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs", [{"learning_rate": 1.0}, {"learning_rate": -0.1}, {"cd_steps": 0}, {"batch_size": 0},
                   {"epochs": -1}, {"momentum": 1.0}, {"weight_decay": -1e-3}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)

    def test_momentum_schedule(self):
        cfg = TrainConfig()
        assert [cfg.momentum_at(e) for e in (0, 4, 5, 40)] == [0.5, 0.5, 0.9, 0.9]


class TestCdUpdate:
    def test_zero_learning_rate_is_noop(self):
        rng = np.random.default_rng(0)
        p = random_params(rng, 5, 4)
        batch = rng.integers(0, 2, (20, 5))
        new = cd_update(batch, p, TrainConfig(learning_rate=0.0), rng)
        assert new == p

    def test_does_not_modify_input(self):
        rng = np.random.default_rng(0)
        p = random_params(rng, 5, 4)
        before = p.copy()
        cd_update(rng.integers(0, 2, (8, 5)), p, TrainConfig(), rng)
        assert p == before

    def test_divergence_raises(self):
        p = RbmParams.zeros(3, 2)
        huge = RbmParams(np.full((3, 2), np.inf), np.zeros(3), np.zeros(2))
        with pytest.raises(TrainingDivergenceError):
            _apply(p, huge, None, 0.1, 0.0, 0.0)

    def test_weight_decay_shrinks_without_signal(self):
        rng = np.random.default_rng(3)
        p = random_params(rng, 6, 4)
        zero = RbmParams.zeros(6, 4)
        velocity = RbmParams.zeros(6, 4)
        norms = [np.abs(p.W).sum()]
        for _ in range(200):
            p = _apply(p, zero, velocity, 0.1, 0.9, 0.01)
            norms.append(np.abs(p.W).sum())
        assert all(b <= a for a, b in zip(norms, norms[1:]))
        assert norms[-1] < norms[0]

    @pytest.mark.parametrize("seed", range(20))
    def test_cd1_aligns_with_exact_gradient(self, seed):
        rng = np.random.default_rng(seed)
        n, m = 4, 3
        p = random_params(rng, n, m, scale=0.5)
        data = all_rows(n)[rng.random(16) < 0.5]
        if len(data) == 0:
            data = all_rows(n)[:1]
        exact = np.array(oracles.rbm_exact_gradient(data.astype(int).tolist(), p.W.tolist(), p.b.tolist(), p.c.tolist()))
        # average over many CD chains to make the test deterministic in practice
        cd = cd_gradient(np.repeat(data, 400, axis=0), p, rng).W
        cos = (cd * exact).sum() / (np.linalg.norm(cd) * np.linalg.norm(exact))
        assert cos > 0

    def test_all_ones_training_reconstructs(self):
        data = np.ones((100, 8))
        p = train_rbm(data, (8, 4), TrainConfig(epochs=30, seed=2))
        recon = visible_probs(hidden_probs(np.ones((1, 8)), p), p)
        assert np.all(recon > 0.9)


class TestTrain:
    def test_zero_epochs_is_initialization(self):
        data = np.tile([[1, 0, 1, 1]], (10, 1))
        p = train_rbm(data, (4, 3), TrainConfig(epochs=0, seed=5))
        assert np.abs(p.W).max() < 0.05
        np.testing.assert_array_equal(p.c, 0.0)
        np.testing.assert_allclose(p.b, np.log(np.array([0.99, 0.01, 0.99, 0.99]) / np.array([0.01, 0.99, 0.01, 0.01])))

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        data = rng.integers(0, 2, (50, 6))
        cfg = TrainConfig(epochs=5, batch_size=16, seed=11)
        assert train_rbm(data, (6, 4), cfg) == train_rbm(data, (6, 4), cfg)
        assert train_rbm(data, (6, 4), cfg) != train_rbm(data, (6, 4), cfg.with_seed(12))

    def test_learns_two_modes(self):
        data = np.repeat([[0] * 6, [1] * 6], 50, axis=0)
        p = train_rbm(data, (6, 4), TrainConfig(epochs=100, seed=0))
        dist = oracles.rbm_visible_distribution(p.W.tolist(), p.b.tolist(), p.c.tolist())
        assert dist[(0,) * 6] > dist[(0, 1) * 3]
        assert dist[(1,) * 6] > dist[(0, 1) * 3]

    def test_rejects_empty_hidden_layer(self):
        with pytest.raises(ConfigError):
            train_rbm(np.ones((3, 3)), (3, 0), TrainConfig())


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        p = random_params(np.random.default_rng(4), 5, 3)
        save_rbm(p, tmp_path / "r.txt")
        assert load_rbm(tmp_path / "r.txt") == p

    def test_bad_header(self, tmp_path):
        path = tmp_path / "r.txt"
        path.write_text("dbm 2 1\n0\n0\n0 0\n0\n")
        with pytest.raises(ParseError) as err:
            load_rbm(path)
        assert err.value.lineno == 1

    def test_truncated(self, tmp_path):
        path = tmp_path / "r.txt"
        path.write_text("rbm 2 1\n0\n0\n0 0\n")
        with pytest.raises(ParseError):
            load_rbm(path)
