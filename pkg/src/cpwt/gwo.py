"""Grey-wolf optimization and the wrapper feature selector built on it.

The pack keeps three best-so-far leaders (alpha, beta, delta by ascending
fitness; lower is better).  Each iteration every wolf moves to the mean of
three pulls, one per leader:

    X' = X_leader - A * |C * X_leader - X|

with A = 2*a*r1 - a and C = 2*r2 drawn fresh per wolf, per leader, per
dimension, and a decaying linearly from 2 to 0 over the run.  Moves are
unconditional; only the leader records are greedy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, NumericError

FitnessFn = Callable[[np.ndarray], float]

N_LEADERS = 3


@dataclass
class Wolf:
    """A recorded solution: position in [0, 1]^d and its fitness."""

    position: np.ndarray
    fitness: float


@dataclass
class PackState:
    """Positions and fitness of the whole pack plus the leader records.

    `t` counts completed iterations; `a` mirrors coefficient_schedule(t).
    """

    positions: np.ndarray
    fitness: np.ndarray
    alpha: Wolf
    beta: Wolf
    delta: Wolf
    t: int
    max_iters: int
    a: float

    @property
    def leaders(self) -> tuple[Wolf, Wolf, Wolf]:
        return (self.alpha, self.beta, self.delta)


def coefficient_schedule(t: int, max_iters: int) -> float:
    """Linear decay 2 -> 0 of the exploration coefficient."""
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not 0 <= t <= max_iters:
        raise ValueError(f"iteration {t} outside [0, {max_iters}]")
    return 2.0 * (1.0 - t / max_iters)


def _evaluate(fitness: FitnessFn, positions: np.ndarray) -> np.ndarray:
    values = np.empty(positions.shape[0])
    for i, position in enumerate(positions):
        value = float(fitness(position))
        if not np.isfinite(value):
            raise NumericError(f"fitness returned non-finite value {value!r}")
        values[i] = value
    return values


def init_pack(
    n_wolves: int,
    d: int,
    seed: int | np.random.Generator,
    fitness: FitnessFn,
    max_iters: int = 100,
) -> PackState:
    """Uniform positions in [0, 1]^d, evaluated, with leaders picked.

    Leader order is by ascending fitness with index as tiebreaker, so the
    same seed always yields the same pack.
    """
    if n_wolves < N_LEADERS + 1:
        raise ValueError(f"need at least {N_LEADERS + 1} wolves, got {n_wolves}")
    if d < 1:
        raise ValueError("dimension must be >= 1")
    rng = np.random.default_rng(seed)
    positions = rng.random((n_wolves, d))
    values = _evaluate(fitness, positions)
    order = np.argsort(values, kind="stable")
    leaders = [Wolf(positions[i].copy(), float(values[i])) for i in order[:N_LEADERS]]
    return PackState(
        positions=positions,
        fitness=values,
        alpha=leaders[0],
        beta=leaders[1],
        delta=leaders[2],
        t=0,
        max_iters=max_iters,
        a=coefficient_schedule(0, max_iters),
    )


def _offer(pack: PackState, position: np.ndarray, value: float) -> None:
    # Strictly-better cascade: ties keep the incumbent leader.
    if value < pack.alpha.fitness:
        pack.delta = pack.beta
        pack.beta = pack.alpha
        pack.alpha = Wolf(position.copy(), value)
    elif value < pack.beta.fitness:
        pack.delta = pack.beta
        pack.beta = Wolf(position.copy(), value)
    elif value < pack.delta.fitness:
        pack.delta = Wolf(position.copy(), value)


def step(pack: PackState, fitness: FitnessFn, rng: np.random.Generator) -> PackState:
    """Advance the pack one iteration in place (and return it)."""
    if pack.t >= pack.max_iters:
        raise ValueError("pack already ran for max_iters iterations")
    n, d = pack.positions.shape
    a = coefficient_schedule(pack.t, pack.max_iters)
    draws = rng.random((n, N_LEADERS, d, 2))
    big_a = 2.0 * a * draws[..., 0] - a
    big_c = 2.0 * draws[..., 1]
    leaders = np.stack([w.position for w in pack.leaders])  # (3, d)
    distance = np.abs(big_c * leaders[None, :, :] - pack.positions[:, None, :])
    pulls = leaders[None, :, :] - big_a * distance
    pack.positions = np.clip(pulls.mean(axis=1), 0.0, 1.0)
    pack.fitness = _evaluate(fitness, pack.positions)
    for i in range(n):
        _offer(pack, pack.positions[i], float(pack.fitness[i]))
    pack.t += 1
    pack.a = coefficient_schedule(pack.t, pack.max_iters)
    return pack


def optimize(
    fitness: FitnessFn,
    n_wolves: int,
    d: int,
    max_iters: int,
    seed: int | np.random.Generator,
) -> tuple[np.ndarray, float, list[float]]:
    """Run a full pack search; returns best position, fitness, history.

    history[i] is the alpha fitness after iteration i+1 and is
    non-increasing because leaders only improve.
    """
    rng = np.random.default_rng(seed)
    pack = init_pack(n_wolves, d, rng, fitness, max_iters)
    history: list[float] = []
    for _ in range(max_iters):
        step(pack, fitness, rng)
        history.append(pack.alpha.fitness)
    return pack.alpha.position.copy(), pack.alpha.fitness, history


@dataclass
class GwoConfig:
    """Wrapper-selection settings."""

    wolves: int = 20
    iters: int = 150
    seed: int = 0
    threshold: float = 0.5
    sparsity_weight: float = 0.01
    val_fraction: float = 0.2


@dataclass
class FeatureMask:
    """Boolean keep/drop mask over feature bins plus the raw position."""

    mask: np.ndarray
    position: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.mask.size)

    @property
    def selected(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def n_selected(self) -> int:
        return int(self.mask.sum())

    def apply(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        return features[..., self.mask]

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "selected": [int(i) for i in self.selected],
            "position": [float(x) for x in self.position],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureMask":
        dim = int(data["dim"])
        mask = np.zeros(dim, dtype=bool)
        selected = np.asarray(data["selected"], dtype=np.int64)
        if selected.size:
            if selected.min() < 0 or selected.max() >= dim:
                raise DataError("mask indices outside [0, dim)")
            mask[selected] = True
        position = np.asarray(data["position"], dtype=np.float64)
        if position.size != dim:
            raise DataError("mask position length does not match dim")
        return cls(mask=mask, position=position)

    @classmethod
    def load(cls, path: str | Path) -> "FeatureMask":
        path = Path(path)
        if not path.exists():
            raise DataError(f"feature mask not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"mask {path} is not valid JSON: {exc}") from exc
        try:
            return cls.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"mask {path} has unexpected structure: {exc}") from exc


def nearest_centroid_accuracy(
    train_x: np.ndarray,
    train_y: np.ndarray,
    val_x: np.ndarray,
    val_y: np.ndarray,
) -> float:
    """Accuracy of a per-class-mean classifier; ties pick the lower class."""
    train_x = np.asarray(train_x, dtype=np.float64)
    val_x = np.asarray(val_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    classes = np.unique(train_y)
    centroids = np.stack([train_x[train_y == c].mean(axis=0) for c in classes])
    distances = np.linalg.norm(val_x[:, None, :] - centroids[None, :, :], axis=2)
    predicted = classes[np.argmin(distances, axis=1)]
    return float(np.mean(predicted == np.asarray(val_y)))


def _stratified_indices(
    labels: np.ndarray, val_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    train_idx: list[int] = []
    val_idx: list[int] = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(members.size)]
        n_train = round((1.0 - val_fraction) * members.size)
        n_train = min(max(n_train, 1), members.size)
        if members.size >= 2:
            n_train = min(n_train, members.size - 1)
        train_idx.extend(members[:n_train])
        val_idx.extend(members[n_train:])
    return np.sort(np.asarray(train_idx)), np.sort(np.asarray(val_idx))


def select_features(
    features: np.ndarray,
    labels: Sequence[int] | np.ndarray,
    config: GwoConfig | None = None,
) -> FeatureMask:
    """Pick feature bins with a pack search over soft selection vectors.

    A position is a point in [0, 1]^d; coordinates above the threshold
    select their bin.  Fitness is validation error of a nearest-centroid
    classifier on an internal stratified split, plus a small penalty
    proportional to the selected fraction.  An empty candidate scores
    worst-possible; if the final position selects nothing, the single
    strongest coordinate is kept.
    """
    cfg = config if config is not None else GwoConfig()
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2:
        raise DataError("features must be a 2-D (samples, bins) array")
    if features.shape[0] != labels.size:
        raise DataError("features and labels disagree on sample count")
    if np.unique(labels).size < 2:
        raise DataError("feature selection needs at least two classes")
    d = features.shape[1]
    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = _stratified_indices(labels, cfg.val_fraction, rng)
    if val_idx.size == 0:
        raise DataError("not enough samples to hold out a validation part")
    train_x, train_y = features[train_idx], labels[train_idx]
    val_x, val_y = features[val_idx], labels[val_idx]

    def fitness(position: np.ndarray) -> float:
        chosen = position > cfg.threshold
        k = int(chosen.sum())
        if k == 0:
            return 2.0
        accuracy = nearest_centroid_accuracy(
            train_x[:, chosen], train_y, val_x[:, chosen], val_y
        )
        return (1.0 - accuracy) + cfg.sparsity_weight * (k / d)

    best, _, _ = optimize(fitness, cfg.wolves, d, cfg.iters, rng)
    mask = best > cfg.threshold
    if not mask.any():
        mask[int(np.argmax(best))] = True
    return FeatureMask(mask=mask, position=best)
