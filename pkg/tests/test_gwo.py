"""Pack-search optimizer and the wrapper feature selector built on it."""

import numpy as np
import pytest

import cpwt.gwo as gwo_module
from cpwt.errors import DataError, NumericError
from cpwt.gwo import (
    FeatureMask,
    GwoConfig,
    coefficient_schedule,
    init_pack,
    nearest_centroid_accuracy,
    optimize,
    select_features,
    step,
)


def sphere(x):
    return float(np.sum(x * x))


class TestCoefficientSchedule:
    def test_linear_decay(self):
        assert coefficient_schedule(0, 100) == 2.0
        assert coefficient_schedule(50, 100) == 1.0
        assert coefficient_schedule(100, 100) == 0.0
        assert coefficient_schedule(25, 100) == 1.5

    def test_bounds(self):
        with pytest.raises(ValueError, match="max_iters"):
            coefficient_schedule(0, 0)
        with pytest.raises(ValueError, match="outside"):
            coefficient_schedule(-1, 10)
        with pytest.raises(ValueError, match="outside"):
            coefficient_schedule(11, 10)


class TestInitPack:
    def test_same_seed_same_pack(self):
        a = init_pack(6, 3, 9, sphere)
        b = init_pack(6, 3, 9, sphere)
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.fitness, b.fitness)
        assert np.array_equal(a.alpha.position, b.alpha.position)

    def test_leaders_are_the_three_best(self):
        pack = init_pack(10, 4, 0, sphere)
        ordered = np.sort(pack.fitness)
        assert pack.alpha.fitness == ordered[0]
        assert pack.beta.fitness == ordered[1]
        assert pack.delta.fitness == ordered[2]
        assert pack.alpha.fitness <= pack.beta.fitness <= pack.delta.fitness

    def test_leader_positions_are_copies(self):
        pack = init_pack(5, 2, 1, sphere)
        saved = pack.alpha.position.copy()
        pack.positions[:] = 0.0
        assert np.array_equal(pack.alpha.position, saved)

    def test_constant_fitness_breaks_ties_by_index(self):
        pack = init_pack(6, 2, 3, lambda x: 1.0)
        assert np.array_equal(pack.alpha.position, pack.positions[0])
        assert np.array_equal(pack.beta.position, pack.positions[1])
        assert np.array_equal(pack.delta.position, pack.positions[2])

    def test_initial_counters(self):
        pack = init_pack(4, 1, 0, sphere, max_iters=50)
        assert pack.t == 0
        assert pack.a == 2.0
        assert pack.max_iters == 50

    def test_pack_size_validation(self):
        with pytest.raises(ValueError, match="at least 4"):
            init_pack(3, 2, 0, sphere)
        with pytest.raises(ValueError, match="dimension"):
            init_pack(4, 0, 0, sphere)


class TestStep:
    def test_alpha_never_worsens(self):
        rng = np.random.default_rng(0)
        pack = init_pack(8, 3, rng, sphere, max_iters=20)
        best = pack.alpha.fitness
        for _ in range(20):
            step(pack, sphere, rng)
            assert pack.alpha.fitness <= best
            best = pack.alpha.fitness

    def test_counters_advance(self):
        rng = np.random.default_rng(1)
        pack = init_pack(4, 2, rng, sphere, max_iters=10)
        step(pack, sphere, rng)
        assert pack.t == 1
        assert pack.a == coefficient_schedule(1, 10)

    def test_positions_stay_in_the_unit_box(self):
        rng = np.random.default_rng(2)
        pack = init_pack(6, 4, rng, sphere, max_iters=30)
        for _ in range(30):
            step(pack, sphere, rng)
            assert pack.positions.min() >= 0.0
            assert pack.positions.max() <= 1.0

    def test_exhausted_pack_refuses_to_step(self):
        rng = np.random.default_rng(3)
        pack = init_pack(4, 2, rng, sphere, max_iters=1)
        step(pack, sphere, rng)
        with pytest.raises(ValueError, match="max_iters"):
            step(pack, sphere, rng)

    def test_ties_keep_the_incumbent_leaders(self):
        rng = np.random.default_rng(4)
        pack = init_pack(5, 2, rng, lambda x: 1.0, max_iters=5)
        alpha_before = pack.alpha.position.copy()
        for _ in range(5):
            step(pack, lambda x: 1.0, rng)
        assert pack.alpha.fitness == 1.0
        assert np.array_equal(pack.alpha.position, alpha_before)

    def test_non_finite_fitness_is_an_error(self):
        rng = np.random.default_rng(5)
        pack = init_pack(4, 2, rng, sphere, max_iters=5)
        with pytest.raises(NumericError, match="non-finite"):
            step(pack, lambda x: float("nan"), rng)


class TestOptimize:
    def test_sphere_converges(self):
        position, value, history = optimize(sphere, 30, 5, 200, seed=0)
        assert value < 1e-3
        assert sphere(position) == value

    def test_history_is_complete_and_non_increasing(self):
        _, _, history = optimize(sphere, 8, 3, 40, seed=1)
        assert len(history) == 40
        assert all(b <= a for a, b in zip(history, history[1:]))

    def test_same_seed_same_result(self):
        a = optimize(sphere, 6, 4, 25, seed=7)
        b = optimize(sphere, 6, 4, 25, seed=7)
        assert np.array_equal(a[0], b[0])
        assert a[1] == b[1]
        assert a[2] == b[2]

    def test_one_dimensional_quadratic(self):
        position, _, _ = optimize(
            lambda x: (float(x[0]) - 0.3) ** 2, 8, 1, 60, seed=0
        )
        assert abs(position[0] - 0.3) < 0.01

    def test_non_finite_fitness_at_init(self):
        with pytest.raises(NumericError, match="non-finite"):
            optimize(lambda x: float("inf"), 4, 2, 5, seed=0)


class TestFeatureMask:
    def test_threshold_example(self):
        position = np.array([0.9, 0.1, 0.7])
        mask = FeatureMask(mask=position > 0.5, position=position)
        assert mask.dim == 3
        assert mask.n_selected == 2
        assert mask.selected.tolist() == [0, 2]

    def test_apply_picks_columns(self):
        position = np.array([0.9, 0.1, 0.7])
        mask = FeatureMask(mask=position > 0.5, position=position)
        features = np.arange(12, dtype=np.float64).reshape(4, 3)
        out = mask.apply(features)
        assert out.shape == (4, 2)
        assert np.array_equal(out, features[:, [0, 2]])

    def test_json_roundtrip(self, tmp_path):
        position = np.array([0.9, 0.1, 0.7, 0.8])
        mask = FeatureMask(mask=position > 0.5, position=position)
        path = tmp_path / "mask.json"
        mask.save(path)
        loaded = FeatureMask.load(path)
        assert np.array_equal(loaded.mask, mask.mask)
        assert np.array_equal(loaded.position, mask.position)

    def test_from_dict_validates_indices(self):
        with pytest.raises(DataError, match="outside"):
            FeatureMask.from_dict(
                {"dim": 3, "selected": [5], "position": [0.1, 0.2, 0.3]}
            )

    def test_from_dict_validates_position_length(self):
        with pytest.raises(DataError, match="length"):
            FeatureMask.from_dict({"dim": 3, "selected": [0], "position": [0.1]})

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            FeatureMask.load(tmp_path / "mask.json")

    def test_load_invalid_json(self, tmp_path):
        path = tmp_path / "mask.json"
        path.write_text("[broken")
        with pytest.raises(DataError, match="JSON"):
            FeatureMask.load(path)


class TestNearestCentroid:
    def test_separable_validation_set(self):
        train_x = np.array([[0.0], [0.0], [10.0], [10.0]])
        train_y = np.array([0, 0, 1, 1])
        val_x = np.array([[1.0], [9.0]])
        assert nearest_centroid_accuracy(train_x, train_y, val_x, [0, 1]) == 1.0
        assert nearest_centroid_accuracy(train_x, train_y, val_x, [1, 0]) == 0.0

    def test_distance_tie_picks_the_lower_class(self):
        train_x = np.array([[0.0], [2.0]])
        train_y = np.array([0, 1])
        val_x = np.array([[1.0]])
        assert nearest_centroid_accuracy(train_x, train_y, val_x, [0]) == 1.0
        assert nearest_centroid_accuracy(train_x, train_y, val_x, [1]) == 0.0


def _informative_features(n_per_class=20, d=16, seed=0):
    """Two classes separable only through bins 3 and 7."""
    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], n_per_class)
    features = rng.uniform(0.0, 1.0, size=(labels.size, d))
    features[:, 3] = labels + rng.uniform(-0.05, 0.05, size=labels.size)
    features[:, 7] = 1.0 - labels + rng.uniform(-0.05, 0.05, size=labels.size)
    return features, labels


class TestSelectFeatures:
    def test_finds_the_informative_bins(self):
        features, labels = _informative_features()
        mask = select_features(
            features, labels, GwoConfig(wolves=10, iters=40, seed=0)
        )
        assert mask.n_selected >= 1
        assert set(mask.selected.tolist()) & {3, 7}
        assert mask.n_selected <= 4  # sparsity pressure prunes noise bins

    def test_same_config_same_mask(self):
        features, labels = _informative_features()
        config = GwoConfig(wolves=8, iters=20, seed=5)
        a = select_features(features, labels, config)
        b = select_features(features, labels, config)
        assert np.array_equal(a.mask, b.mask)
        assert np.array_equal(a.position, b.position)

    def test_empty_selection_keeps_the_strongest_coordinate(self, monkeypatch):
        position = np.array([0.2, 0.4, 0.1, 0.3])
        monkeypatch.setattr(
            gwo_module, "optimize", lambda *a, **k: (position, 0.5, [0.5])
        )
        features = np.random.default_rng(0).uniform(0.0, 1.0, size=(10, 4))
        labels = np.repeat([0, 1], 5)
        mask = select_features(features, labels, GwoConfig(seed=0))
        assert mask.selected.tolist() == [1]
        assert np.array_equal(mask.position, position)

    def test_input_validation(self):
        with pytest.raises(DataError, match="2-D"):
            select_features(np.zeros(8), [0, 1])
        with pytest.raises(DataError, match="sample count"):
            select_features(np.zeros((4, 2)), [0, 1])
        with pytest.raises(DataError, match="two classes"):
            select_features(np.zeros((4, 2)), [1, 1, 1, 1])

    def test_needs_enough_samples_for_a_holdout(self):
        with pytest.raises(DataError, match="validation"):
            select_features(np.zeros((2, 3)), [0, 1])
