"""Layers, gradients, the training loop, persistence, and input prep."""

import json

import numpy as np
import pytest

from cpwt.cnn import (
    CnnModel,
    ConvLayer,
    DenseLayer,
    MaxPool,
    Network,
    TrainConfig,
    cross_entropy,
    prepare_input,
    softmax,
    train_model,
)
from cpwt.errors import DataError
from cpwt.gwo import FeatureMask
from cpwt.pattern import haar_reduce


def _relative_error(analytic, numeric):
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if scale == 0.0:
        return 0.0
    return np.linalg.norm(analytic - numeric) / scale


def _numeric_grad(loss_fn, array, eps=1e-6):
    grad = np.zeros_like(array)
    flat = array.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        up = loss_fn()
        flat[i] = original - eps
        down = loss_fn()
        flat[i] = original
        gflat[i] = (up - down) / (2.0 * eps)
    return grad


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        assert np.array_equal(softmax(np.zeros((1, 4))), np.full((1, 4), 0.25))

    def test_known_ratio(self):
        probs = softmax(np.array([[0.0, np.log(3.0)]]))
        assert probs[0] == pytest.approx([0.25, 0.75])

    def test_shift_invariance_and_stability(self):
        logits = np.array([[1.0, 2.0, 3.0]])
        assert np.allclose(softmax(logits), softmax(logits + 1000.0))
        huge = softmax(np.array([[1000.0, 1000.0]]))
        assert np.array_equal(huge, [[0.5, 0.5]])

    def test_cross_entropy_values(self):
        assert cross_entropy(np.array([[0.5, 0.5]]), np.array([0])) == pytest.approx(
            np.log(2.0)
        )
        assert cross_entropy(np.array([[1.0, 0.0]]), np.array([0])) == 0.0
        assert cross_entropy(np.array([[0.0, 1.0]]), np.array([0])) == np.inf

    def test_cross_entropy_averages_the_batch(self):
        probs = np.array([[0.5, 0.5], [0.25, 0.75]])
        expected = -(np.log(0.5) + np.log(0.75)) / 2.0
        assert cross_entropy(probs, np.array([0, 1])) == pytest.approx(expected)


class TestConvLayer:
    def test_output_shape_and_relu(self):
        rng = np.random.default_rng(0)
        layer = ConvLayer(3, 4, rng)
        out, _ = layer.forward(rng.uniform(-1.0, 1.0, (2, 3, 8, 8)))
        assert out.shape == (2, 4, 6, 6)
        assert out.min() >= 0.0

    def test_all_ones_filter_sums_the_window(self):
        rng = np.random.default_rng(0)
        layer = ConvLayer(1, 1, rng)
        layer.weights[:] = 1.0
        layer.biases[:] = 0.0
        out, _ = layer.forward(np.ones((1, 1, 3, 3)))
        assert out.shape == (1, 1, 1, 1)
        assert out[0, 0, 0, 0] == 9.0

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(1)
        layer = ConvLayer(2, 3, rng)
        x = rng.uniform(-1.0, 1.0, (2, 2, 6, 6))
        out, cache = layer.forward(x)
        direction = rng.uniform(-1.0, 1.0, out.shape)

        def loss():
            value, _ = layer.forward(x)
            return float((value * direction).sum())

        dx, grads = layer.backward(direction, cache)
        assert _relative_error(dx, _numeric_grad(loss, x)) < 1e-6
        assert (
            _relative_error(grads["weights"], _numeric_grad(loss, layer.weights))
            < 1e-6
        )
        assert (
            _relative_error(grads["biases"], _numeric_grad(loss, layer.biases))
            < 1e-6
        )


class TestMaxPool:
    def test_forward_picks_block_maxima(self):
        x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        out, _ = MaxPool().forward(x)
        assert np.array_equal(out[0, 0], [[5.0, 7.0], [13.0, 15.0]])

    def test_odd_rows_and_columns_are_dropped(self):
        x = np.zeros((1, 1, 5, 5))
        x[0, 0, 4, 4] = 99.0
        out, _ = MaxPool().forward(x)
        assert out.shape == (1, 1, 2, 2)
        assert out.max() == 0.0

    def test_tie_routes_to_the_first_cell(self):
        pool = MaxPool()
        x = np.ones((1, 1, 2, 2))
        out, cache = pool.forward(x)
        assert out[0, 0, 0, 0] == 1.0
        dx, _ = pool.backward(np.array([[[[3.0]]]]), cache)
        assert np.array_equal(dx[0, 0], [[3.0, 0.0], [0.0, 0.0]])

    def test_gradient_mass_is_conserved(self):
        rng = np.random.default_rng(2)
        pool = MaxPool()
        x = rng.uniform(0.0, 1.0, (2, 3, 6, 6))
        out, cache = pool.forward(x)
        dout = rng.uniform(0.0, 1.0, out.shape)
        dx, _ = pool.backward(dout, cache)
        assert dx.sum() == pytest.approx(dout.sum())

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(3)
        pool = MaxPool()
        x = rng.uniform(-1.0, 1.0, (2, 2, 4, 4))
        out, cache = pool.forward(x)
        direction = rng.uniform(-1.0, 1.0, out.shape)

        def loss():
            value, _ = pool.forward(x)
            return float((value * direction).sum())

        dx, _ = pool.backward(direction, cache)
        assert _relative_error(dx, _numeric_grad(loss, x)) < 1e-6


class TestDenseLayer:
    def test_forward_is_affine(self):
        rng = np.random.default_rng(4)
        layer = DenseLayer(3, 2, rng)
        layer.weights[:] = [[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]]
        layer.biases[:] = [10.0, 20.0]
        out, _ = layer.forward(np.array([[1.0, 2.0, 3.0]]))
        assert np.array_equal(out, [[11.0, 25.0]])

    def test_flattens_higher_rank_inputs(self):
        rng = np.random.default_rng(5)
        layer = DenseLayer(12, 2, rng)
        out, _ = layer.forward(rng.uniform(size=(4, 3, 2, 2)))
        assert out.shape == (4, 2)

    def test_width_mismatch_is_rejected(self):
        rng = np.random.default_rng(6)
        layer = DenseLayer(4, 2, rng)
        with pytest.raises(DataError, match="expects 4 inputs"):
            layer.forward(np.zeros((1, 5)))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(7)
        layer = DenseLayer(5, 3, rng)
        x = rng.uniform(-1.0, 1.0, (4, 5))
        out, cache = layer.forward(x)
        direction = rng.uniform(-1.0, 1.0, out.shape)

        def loss():
            value, _ = layer.forward(x)
            return float((value * direction).sum())

        dx, grads = layer.backward(direction, cache)
        assert _relative_error(dx, _numeric_grad(loss, x)) < 1e-6
        assert (
            _relative_error(grads["weights"], _numeric_grad(loss, layer.weights))
            < 1e-6
        )
        assert (
            _relative_error(grads["biases"], _numeric_grad(loss, layer.biases))
            < 1e-6
        )


class TestNetwork:
    def _toy_stack(self, seed=8):
        rng = np.random.default_rng(seed)
        return Network(
            [ConvLayer(1, 2, rng), MaxPool(), DenseLayer(2 * 3 * 3, 2, rng)]
        )

    def test_loss_gradients_match_finite_differences(self):
        rng = np.random.default_rng(9)
        net = self._toy_stack()
        x = rng.uniform(0.0, 1.0, (3, 1, 8, 8))
        y = np.array([0, 1, 0])

        def loss():
            value, _ = net.loss_and_gradients(x, y)
            return value

        _, grads = net.loss_and_gradients(x, y)
        for layer, layer_grads in zip(net.layers, grads):
            for name, param in layer.params().items():
                numeric = _numeric_grad(loss, param)
                assert _relative_error(layer_grads[name], numeric) < 1e-5

    def test_one_descent_step_reduces_the_loss(self):
        rng = np.random.default_rng(10)
        net = self._toy_stack(seed=11)
        x = rng.uniform(0.0, 1.0, (4, 1, 8, 8))
        y = np.array([0, 1, 1, 0])
        before, grads = net.loss_and_gradients(x, y)
        net.apply_gradients(grads, 0.05)
        after, _ = net.loss_and_gradients(x, y)
        assert after < before

    def test_predict_proba_rows_sum_to_one(self):
        rng = np.random.default_rng(12)
        net = self._toy_stack(seed=13)
        probs = net.predict_proba(rng.uniform(0.0, 1.0, (5, 1, 8, 8)))
        assert probs.shape == (5, 2)
        assert np.allclose(probs.sum(axis=1), 1.0)


class TestCnnModel:
    def test_layer_stack_and_geometry(self):
        model = CnnModel(["a", "b", "c"], input_shape=(1, 20, 20), conv_filters=(3, 5))
        kinds = [layer.kind for layer in model.net.layers]
        assert kinds == ["conv", "pool", "conv", "pool", "dense"]
        assert model.net.layers[0].weights.shape == (3, 1, 3, 3)
        assert model.net.layers[2].weights.shape == (5, 3, 3, 3)
        # 20 -> conv 18 -> pool 9 -> conv 7 -> pool 3
        assert model.net.layers[4].weights.shape == (3, 5 * 3 * 3)

    def test_needs_two_classes(self):
        with pytest.raises(ValueError, match="two classes"):
            CnnModel(["only"])

    def test_rejects_tiny_inputs(self):
        with pytest.raises(ValueError, match="too small"):
            CnnModel(["a", "b"], input_shape=(1, 8, 8))

    def test_predict_shapes_and_tie_break(self):
        model = CnnModel(["a", "b", "c"], input_shape=(1, 16, 16), conv_filters=(2, 2))
        dense = model.net.layers[4]
        dense.weights[:] = 0.0
        dense.biases[:] = 0.0
        label, probs = model.predict(np.zeros((16, 16)))
        assert label == 0  # equal posteriors resolve to the lowest index
        assert probs == pytest.approx(np.full(3, 1.0 / 3.0))
        labels, batch_probs = model.predict_batch(np.zeros((4, 16, 16)))
        assert labels.tolist() == [0, 0, 0, 0]
        assert batch_probs.shape == (4, 3)

    def test_input_shape_is_enforced(self):
        model = CnnModel(["a", "b"], input_shape=(1, 16, 16), conv_filters=(2, 2))
        with pytest.raises(DataError, match="expected inputs"):
            model.predict(np.zeros((8, 8)))
        with pytest.raises(DataError, match="cannot interpret"):
            model.predict_proba(np.zeros((1, 1, 1, 16, 16)))

    def test_save_load_roundtrip_is_exact(self, tmp_path):
        rng = np.random.default_rng(14)
        model = CnnModel(
            ["x", "y"], input_shape=(1, 16, 16), conv_filters=(2, 3), seed=21
        )
        path = tmp_path / "model.json"
        model.save(path)
        loaded = CnnModel.load(path)
        assert loaded.class_names == model.class_names
        assert loaded.input_shape == model.input_shape
        for ours, theirs in zip(model.net.layers, loaded.net.layers):
            for name, param in ours.params().items():
                assert np.array_equal(param, theirs.params()[name])
        probe = rng.uniform(0.0, 1.0, (3, 16, 16))
        assert np.array_equal(model.predict_proba(probe), loaded.predict_proba(probe))

    def test_from_dict_rejects_a_wrong_stack(self):
        model = CnnModel(["x", "y"], input_shape=(1, 16, 16), conv_filters=(2, 2))
        data = model.to_dict()
        data["layers"] = data["layers"][:3]
        with pytest.raises(DataError, match="layer stack"):
            CnnModel.from_dict(data)

    def test_from_dict_rejects_shape_drift(self):
        model = CnnModel(["x", "y"], input_shape=(1, 16, 16), conv_filters=(2, 2))
        data = model.to_dict()
        data["layers"][0]["weights"] = [[[[0.0]]]]
        with pytest.raises(DataError, match="shape"):
            CnnModel.from_dict(data)

    def test_from_dict_rejects_non_finite_weights(self):
        model = CnnModel(["x", "y"], input_shape=(1, 16, 16), conv_filters=(2, 2))
        data = model.to_dict()
        data["layers"][4]["weights"][0][0] = float("nan")
        with pytest.raises(DataError, match="non-finite"):
            CnnModel.from_dict(data)

    def test_load_errors(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            CnnModel.load(tmp_path / "model.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        with pytest.raises(DataError, match="JSON"):
            CnnModel.load(bad)
        wrong = tmp_path / "wrong.json"
        wrong.write_text(json.dumps({"version": 1}))
        with pytest.raises(DataError, match="structure"):
            CnnModel.load(wrong)


def _two_blob_images(n_per_class=6, size=12, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], n_per_class)
    images = rng.uniform(0.0, 0.1, size=(labels.size, size, size))
    images[labels == 1] += 0.8
    return images, labels


class TestTrainModel:
    def test_memorizes_a_separable_toy_set(self):
        images, labels = _two_blob_images()
        model = train_model(
            images,
            labels,
            ["dark", "bright"],
            TrainConfig(lr=0.05, epochs=40, batch=4, seed=0),
            conv_filters=(2, 3),
        )
        predicted, _ = model.predict_batch(images)
        assert np.array_equal(predicted, labels)
        assert len(model.loss_history) == 40
        assert model.loss_history[-1] < model.loss_history[0]
        assert model.train_config is not None

    def test_same_seed_reproduces_training(self):
        images, labels = _two_blob_images()
        config = TrainConfig(lr=0.05, epochs=3, batch=4, seed=9)
        a = train_model(images, labels, ["d", "b"], config, conv_filters=(2, 2))
        b = train_model(images, labels, ["d", "b"], config, conv_filters=(2, 2))
        assert a.loss_history == b.loss_history
        for la, lb in zip(a.net.layers, b.net.layers):
            for name, param in la.params().items():
                assert np.array_equal(param, lb.params()[name])

    def test_different_seeds_differ(self):
        images, labels = _two_blob_images()
        a = train_model(
            images, labels, ["d", "b"], TrainConfig(epochs=1, seed=0), (2, 2)
        )
        b = train_model(
            images, labels, ["d", "b"], TrainConfig(epochs=1, seed=1), (2, 2)
        )
        assert a.loss_history != b.loss_history

    def test_every_class_must_appear(self):
        images, _ = _two_blob_images()
        with pytest.raises(DataError, match="missing classes \\[1\\]"):
            train_model(images, np.zeros(images.shape[0]), ["d", "b"])

    def test_count_mismatch(self):
        images, _ = _two_blob_images()
        with pytest.raises(DataError, match="sample count"):
            train_model(images, [0, 1], ["d", "b"])

    def test_rank_validation(self):
        with pytest.raises(DataError, match="images"):
            train_model(np.zeros((2, 1, 1, 12, 12)), [0, 1], ["d", "b"])


def _mask_from_bins(bins):
    mask = np.zeros(256, dtype=bool)
    mask[list(bins)] = True
    return FeatureMask(mask=mask, position=mask.astype(np.float64))


class TestPrepareInput:
    def test_full_mask_only_reduces_and_scales(self):
        rng = np.random.default_rng(15)
        pattern = rng.integers(0, 256, size=(8, 8)).astype(np.uint8)
        out = prepare_input(pattern, _mask_from_bins(range(256)), size=4)
        assert np.array_equal(out, haar_reduce(pattern.astype(np.float64)) / 255.0)

    def test_unselected_codes_are_zeroed(self):
        pattern = np.full((8, 8), 7, dtype=np.uint8)
        out = prepare_input(pattern, _mask_from_bins([0]), size=4)
        assert np.array_equal(out, np.zeros((4, 4)))

    def test_selected_constant_code_scales_to_unit_range(self):
        pattern = np.full((8, 8), 40, dtype=np.uint8)
        out = prepare_input(pattern, _mask_from_bins([40]), size=4)
        assert np.array_equal(out, np.full((4, 4), 40.0 / 255.0))

    def test_small_patterns_are_centered_on_a_zero_canvas(self):
        pattern = np.full((4, 4), 255, dtype=np.uint8)
        out = prepare_input(pattern, _mask_from_bins(range(256)), size=6)
        expected = np.zeros((6, 6))
        expected[2:4, 2:4] = 1.0
        assert np.array_equal(out, expected)

    def test_large_patterns_are_center_cropped(self):
        rng = np.random.default_rng(16)
        pattern = rng.integers(0, 256, size=(20, 20)).astype(np.uint8)
        reduced = haar_reduce(pattern.astype(np.float64))
        out = prepare_input(pattern, _mask_from_bins(range(256)), size=4)
        assert np.array_equal(out, reduced[3:7, 3:7] / 255.0)

    def test_float_patterns_are_rounded(self):
        pattern = np.full((8, 8), 3.6)
        out = prepare_input(pattern, _mask_from_bins([4]), size=4)
        assert np.array_equal(out, np.full((4, 4), 4.0 / 255.0))

    def test_validation(self):
        full = _mask_from_bins(range(256))
        with pytest.raises(DataError, match="2-D"):
            prepare_input(np.zeros(16), full)
        with pytest.raises(DataError, match="outside"):
            prepare_input(np.full((8, 8), 300.0), full)
        short = FeatureMask(mask=np.ones(16, dtype=bool), position=np.ones(16))
        with pytest.raises(DataError, match="expected 256"):
            prepare_input(np.zeros((8, 8), dtype=np.uint8), short)
