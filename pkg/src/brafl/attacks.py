"""Adversarial client behaviours and the schedule deciding who attacks when.

Model-poisoning attacks (sign flip, random update) act on the update delta
``w_local - w_global``; the submitted vector is ``w_global + malicious_delta``.
Data-poisoning attacks (label flip, backdoor) transform the local training set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import keyed_generator
from .data import Dataset

ATTACK_KINDS = ("sign_flip", "random_update", "label_flip", "backdoor")


@dataclass(frozen=True)
class TriggerSpec:
    """Backdoor trigger.

    Images: a "==" mark, i.e. two equals signs side by side, each made of two
    horizontal strokes ``stroke_width`` x ``stroke_height`` pixels separated
    by ``vertical_gap`` rows; the signs are ``horizontal_gap`` columns apart
    and the mark starts at ``offset`` (row, col). Pixels are set to the
    dataset's brightest value.

    Vectors: coordinate ``coordinate`` (default: the last one) set to ``magnitude``.
    """

    stroke_width: int = 7
    stroke_height: int = 1
    horizontal_gap: int = 1
    vertical_gap: int = 1
    offset: tuple[int, int] = (2, 2)
    coordinate: int | None = None
    magnitude: float = 5.0

    def image_mask(self, shape: tuple[int, int]) -> np.ndarray:
        rows, cols = shape
        r0, c0 = self.offset
        height = 2 * self.stroke_height + self.vertical_gap
        width = 2 * self.stroke_width + self.horizontal_gap
        if r0 + height > rows or c0 + width > cols:
            raise ValueError(f"trigger of size {height}x{width} at {self.offset} does not fit {shape} images")
        mask = np.zeros(shape, dtype=bool)
        for dr in (0, self.stroke_height + self.vertical_gap):
            for dc in (0, self.stroke_width + self.horizontal_gap):
                mask[r0 + dr:r0 + dr + self.stroke_height, c0 + dc:c0 + dc + self.stroke_width] = True
        return mask

    def stamp(self, dataset: Dataset, features: np.ndarray) -> np.ndarray:
        out = features.copy()
        if dataset.image_shape is not None:
            mask = self.image_mask(dataset.image_shape).reshape(-1)
            out[:, mask] = dataset.max_value
        else:
            j = dataset.dim - 1 if self.coordinate is None else self.coordinate
            if not 0 <= j < dataset.dim:
                raise ValueError(f"trigger coordinate {j} outside dim {dataset.dim}")
            out[:, j] = self.magnitude
        return out


@dataclass(frozen=True)
class AttackConfig:
    kind: str
    gamma: float = 4.0
    source_class: int = 0
    target_class: int = 8
    trigger: TriggerSpec = field(default_factory=TriggerSpec)
    start_round: int = 0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack {self.kind!r}; expected one of {ATTACK_KINDS}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.source_class == self.target_class:
            raise ValueError("source_class and target_class must differ")
        if self.start_round < 0:
            raise ValueError("start_round must be nonnegative")


@dataclass(frozen=True)
class AdversarySchedule:
    malicious_ids: frozenset[int]
    mode: str = "static"
    active_probability: float = 0.5
    schedule_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "malicious_ids", frozenset(int(i) for i in self.malicious_ids))
        if self.mode not in ("static", "dynamic"):
            raise ValueError("mode must be 'static' or 'dynamic'")
        if not 0.0 < self.active_probability <= 1.0:
            raise ValueError("active_probability must lie in (0, 1]")


def sign_flip(delta, gamma: float = 4.0) -> np.ndarray:
    """``-gamma * delta``."""
    return -gamma * np.asarray(delta, dtype=np.float64)


def random_update(delta, gamma: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian noise with per-coordinate variance ``gamma * ||delta||^2 / d``.

    The expected squared norm of the output is therefore ``gamma * ||delta||^2``.
    """
    g = np.asarray(delta, dtype=np.float64)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    scale = np.sqrt(gamma * float(g @ g) / g.size)
    return scale * rng.standard_normal(g.size)


def flip_labels(labels, num_classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")
    return (y + 1) % num_classes


@dataclass
class BackdoorData:
    train: Dataset  # source-class samples triggered and relabelled, others untouched
    poisoned_mask: np.ndarray
    build_eval: Callable[[Dataset], Dataset]

    @property
    def poisoned_only(self) -> Dataset:
        return self.train.subset(np.flatnonzero(self.poisoned_mask))


def triggered_testset(testset: Dataset, config: AttackConfig) -> Dataset:
    """All source-class test samples with the trigger stamped, labelled as the target class."""
    idx = np.flatnonzero(testset.labels == config.source_class)
    if idx.size == 0:
        raise ValueError(f"test set has no samples of source class {config.source_class}")
    sub = testset.subset(idx)
    return Dataset(config.trigger.stamp(sub, sub.features), np.full(idx.size, config.target_class),
                   sub.num_classes, sub.image_shape, sub.max_value)


def apply_backdoor(dataset: Dataset, config: AttackConfig) -> BackdoorData:
    mask = dataset.labels == config.source_class
    if not mask.any():
        raise ValueError(f"dataset has no samples of source class {config.source_class}")
    features = dataset.features.copy()
    features[mask] = config.trigger.stamp(dataset, dataset.features[mask])
    labels = dataset.labels.copy()
    labels[mask] = config.target_class
    poisoned = Dataset(features, labels, dataset.num_classes, dataset.image_shape, dataset.max_value)
    return BackdoorData(poisoned, mask, lambda testset: triggered_testset(testset, config))


def active_malicious(round_index: int, schedule: AdversarySchedule | None) -> frozenset[int]:
    """Clients attacking in ``round_index``.

    Dynamic mode draws an independent Bernoulli per (round, client) from a
    generator keyed by ``(schedule_seed, round, client)``.
    """
    if round_index < 0:
        raise ValueError("round must be nonnegative")
    if schedule is None:
        return frozenset()
    if schedule.mode == "static" or schedule.active_probability >= 1.0:
        return schedule.malicious_ids
    active = set()
    for k in sorted(schedule.malicious_ids):
        if keyed_generator(schedule.schedule_seed, round_index, k).random() < schedule.active_probability:
            active.add(k)
    return frozenset(active)
