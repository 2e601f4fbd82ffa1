import json

import numpy as np
import pytest

from sandshape import learner
from sandshape.dataset import PushTriplet
from sandshape.learner import (
    MlpModel,
    ModelFormatError,
    TrainConfig,
    evaluate,
    forward,
    init_model,
    load,
    loss_and_grads,
    save,
    train,
)


def small_model(seed=0, dims=(6, 8, 8, 8, 3)):
    return init_model(list(dims), np.random.default_rng(seed))


def make_triplets(n, rng, mapping=None):
    triplets = []
    for _ in range(n):
        x_m = rng.uniform(0, 300, (10, 2))
        x_n = rng.uniform(0, 300, (10, 2))
        if mapping is None:
            p = tuple(rng.uniform(0, 300, 4))
        else:
            p = mapping(x_m, x_n)
        triplets.append(PushTriplet(p=p, x_m=x_m, x_n=x_n))
    return triplets


class TestForward:
    def test_all_zero_model(self):
        model = small_model()
        for w in model.weights:
            w[:] = 0.0
        assert np.array_equal(forward(model, np.ones(6)), np.zeros(3))

    def test_single_path_hand_computed(self):
        model = MlpModel(
            [2, 2, 1],
            weights=[np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[2.0], [0.0]])],
            biases=[np.array([0.5, 0.0]), np.array([-1.0])],
            in_min=np.zeros(2), in_max=np.ones(2),
            out_min=np.zeros(1), out_max=np.ones(1),
        )
        # x = (3, 7): hidden = relu(3*1 + 0.5) = 3.5 ; out = 3.5*2 - 1 = 6
        assert forward(model, np.array([3.0, 7.0]))[0] == pytest.approx(6.0)

    def test_matches_matrix_oracle(self):
        rng = np.random.default_rng(1)
        model = small_model(1)
        x = rng.uniform(-1, 1, 6)
        a = x
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            a = a @ w + b
            if i < len(model.weights) - 1:
                a = np.where(a > 0, a, 0.0)
        assert np.allclose(forward(model, x), a, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            forward(small_model(), np.ones(5))

    def test_small_input_perturbations_bounded(self):
        model = small_model(2)
        rng = np.random.default_rng(3)
        x = rng.uniform(-1, 1, 6)
        bound = np.prod([np.linalg.norm(w, 2) for w in model.weights])
        for _ in range(20):
            dx = rng.normal(0, 1e-6, 6)
            dy = forward(model, x + dx) - forward(model, x)
            assert np.linalg.norm(dy) <= bound * np.linalg.norm(dx) * (1 + 1e-6)


class TestGradients:
    def test_matches_central_differences(self):
        rng = np.random.default_rng(4)
        model = small_model(4)
        x = rng.uniform(0, 1, (5, 6))
        y = rng.uniform(0, 1, (5, 3))
        _, grad_w, grad_b = loss_and_grads(model, x, y)
        eps = 1e-5
        for li in range(len(model.weights)):
            w = model.weights[li]
            for idx in [(0, 0), (2, 1), (w.shape[0] - 1, w.shape[1] - 1)]:
                orig = w[idx]
                w[idx] = orig + eps
                lp, _, _ = loss_and_grads(model, x, y)
                w[idx] = orig - eps
                lm, _, _ = loss_and_grads(model, x, y)
                w[idx] = orig
                numeric = (lp - lm) / (2 * eps)
                analytic = grad_w[li][idx]
                denom = max(abs(numeric), abs(analytic), 1e-8)
                assert abs(numeric - analytic) / denom <= 1e-4
            b = model.biases[li]
            orig = b[0]
            b[0] = orig + eps
            lp, _, _ = loss_and_grads(model, x, y)
            b[0] = orig - eps
            lm, _, _ = loss_and_grads(model, x, y)
            b[0] = orig
            numeric = (lp - lm) / (2 * eps)
            assert abs(numeric - grad_b[li][0]) / max(abs(numeric), 1e-8) <= 1e-4


class TestTrain:
    def test_loss_decreases(self):
        rng = np.random.default_rng(5)
        mapping = lambda x_m, x_n: tuple(np.concatenate([x_m.mean(0), x_n.mean(0)]))
        triplets = make_triplets(300, rng, mapping)
        _, report = train(triplets, TrainConfig(episodes=800, seed=0))
        assert report.loss_final < report.loss_first

    def test_duplicate_triplet_corpus_memorized(self):
        rng = np.random.default_rng(6)
        x_m = rng.uniform(0, 300, (10, 2))
        x_n = rng.uniform(0, 300, (10, 2))
        one = PushTriplet(p=(120.0, 80.0, 150.0, 90.0), x_m=x_m, x_n=x_n)
        triplets = [one] * 200
        model, report = train(triplets, TrainConfig(episodes=1500, seed=0))
        assert all(v < 1.0 for v in report.mae.values())

    def test_seed_determinism(self):
        rng = np.random.default_rng(7)
        triplets = make_triplets(100, rng)
        m1, _ = train(triplets, TrainConfig(episodes=300, seed=3))
        m2, _ = train(triplets, TrainConfig(episodes=300, seed=3))
        for w1, w2 in zip(m1.weights, m2.weights):
            assert np.array_equal(w1, w2)
        for b1, b2 in zip(m1.biases, m2.biases):
            assert np.array_equal(b1, b2)

    def test_loss_non_increasing_over_trailing_window(self):
        rng = np.random.default_rng(8)
        mapping = lambda x_m, x_n: tuple(np.concatenate([x_m.mean(0), x_n.mean(0)]))
        triplets = make_triplets(400, rng, mapping)
        _, report = train(triplets, TrainConfig(episodes=2000, seed=0, learning_rate=5e-4))
        curve = [loss for _, loss in report.loss_curve]
        head = np.mean(curve[: len(curve) // 4])
        tail = np.mean(curve[-len(curve) // 8 :])
        assert tail <= head

    def test_too_few_samples(self):
        rng = np.random.default_rng(9)
        with pytest.raises(ValueError):
            train(make_triplets(5, rng), TrainConfig(episodes=10))


class TestEvaluate:
    def test_constant_output_on_constant_targets(self):
        rng = np.random.default_rng(10)
        x_m = rng.uniform(0, 300, (10, 2))
        one = PushTriplet(p=(10.0, 20.0, 30.0, 40.0), x_m=x_m, x_n=x_m + 1)
        model = init_model([40, 4], np.random.default_rng(0))
        model.weights[0][:] = 0.0
        model.out_min = np.array([10.0, 20.0, 30.0, 40.0])
        model.out_max = model.out_min + 1.0
        report = evaluate(model, [one] * 5)
        assert all(v == 0.0 for v in report.mae.values())

    def test_matches_direct_mae_oracle(self):
        rng = np.random.default_rng(11)
        triplets = make_triplets(30, rng)
        model = init_model([40, 100, 4], np.random.default_rng(1))
        report = evaluate(model, triplets)
        x, y = learner.triplets_to_arrays(triplets)
        pred = model.descale_out(forward(model, model.scale_in(x)))
        oracle = np.abs(pred - y).mean(axis=0)
        for name, value in zip(learner.OUTPUT_NAMES, oracle):
            assert report.mae[name] == pytest.approx(value, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            evaluate(small_model(), [])


class TestPersistence:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(12)
        triplets = make_triplets(50, rng)
        model, _ = train(triplets, TrainConfig(episodes=100, seed=1))
        path = tmp_path / "model.json"
        save(model, path)
        loaded = load(path)
        x = rng.uniform(0, 300, 40)
        assert np.array_equal(model.predict_pixels(x), loaded.predict_pixels(x))
        for w1, w2 in zip(model.weights, loaded.weights):
            assert np.array_equal(w1, w2)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "model.json"
        save(small_model(), path)
        path.write_text(path.read_text()[:100])
        with pytest.raises(ModelFormatError):
            load(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "model.json"
        save(small_model(), path)
        doc = json.loads(path.read_text())
        doc["version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelFormatError):
            load(path)

    def test_independent_reader(self, tmp_path):
        """Second reader of the documented format: plain json + asserts."""
        model = small_model(13)
        path = tmp_path / "model.json"
        save(model, path)
        doc = json.loads(path.read_text())
        assert doc["format"] == "sandshape-mlp" and doc["version"] == 1
        dims = doc["layer_dims"]
        weights = [np.array(w) for w in doc["weights"]]
        for i, w in enumerate(weights):
            assert w.shape == (dims[i], dims[i + 1])
            assert np.array_equal(w, model.weights[i])
        assert np.array_equal(np.array(doc["in_min"]), model.in_min)


class TestDeskModel:
    def test_corpus_size_and_quality(self, desk_triplets, desk_model):
        model, report = desk_model
        assert len(desk_triplets) >= 3000
        # end pixels are predicted better than start pixels, as on the
        # human data
        assert report.mae["u_e"] <= report.mae["u_s"]
        assert report.mae["u_e"] <= 10.0 and report.mae["v_e"] <= 10.0
