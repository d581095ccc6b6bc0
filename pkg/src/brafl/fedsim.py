"""Single-process federated learning loop with attacks and pluggable aggregation.

All randomness is drawn from generators keyed by ``(master_seed, purpose, ...)``
so a run is reproducible and independent of client execution order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .attacks import (
    AdversarySchedule,
    AttackConfig,
    active_malicious,
    apply_backdoor,
    flip_labels,
    random_update,
    sign_flip,
    triggered_testset,
)
from .baselines import BaselineSpec, aggregate_baseline
from .bra import BraSettings, aggregate_bra
from .core import ClientUpdate, keyed_generator
from .data import Dataset, dirichlet_partition, load_idx_dataset, make_synthetic_dataset
from .model import LogisticModel, evaluate_acc, evaluate_asr, model_for

log = logging.getLogger(__name__)

# stream tags for keyed_generator
_DATA, _PARTITION, _TRAIN, _ATTACK = 1, 2, 3, 4


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 10
    dim: int = 12
    train_per_class: int = 100
    test_per_class: int = 100
    spread: float = 0.5


@dataclass(frozen=True)
class IdxSpec:
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str
    num_classes: int = 10
    normalization: str = "none"
    pad_to: int | None = None
    train_limit: int | None = None
    test_limit: int | None = None


@dataclass(frozen=True)
class PartitionConfig:
    num_clients: int = 20
    alpha: float = 1.0

    def __post_init__(self):
        if self.num_clients < 2:
            raise ValueError("partition needs at least 2 clients")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


@dataclass(frozen=True)
class TrainingHyperparams:
    learning_rate: float = 0.01
    batch_size: int = 128
    local_epochs: int = 10
    momentum: float = 0.9
    weight_decay: float = 1e-4

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.batch_size < 1 or self.local_epochs < 1:
            raise ValueError("batch_size and local_epochs must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")


Aggregator = Union[BraSettings, BaselineSpec]


@dataclass(frozen=True)
class FedRunConfig:
    dataset: SyntheticSpec | IdxSpec = field(default_factory=SyntheticSpec)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    training: TrainingHyperparams = field(default_factory=TrainingHyperparams)
    aggregator: Aggregator = field(default_factory=BraSettings)
    attack: AttackConfig | None = None
    schedule: AdversarySchedule | None = None
    rounds: int = 30
    eval_every: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1 or self.eval_every < 1:
            raise ValueError("rounds and eval_every must be positive")
        N = self.partition.num_clients
        if self.schedule is not None:
            bad = [k for k in self.schedule.malicious_ids if not 0 <= k < N]
            if bad:
                raise ValueError(f"malicious ids {sorted(bad)} outside 0..{N - 1}")
            if 2 * len(self.schedule.malicious_ids) >= N:
                raise ValueError(f"{len(self.schedule.malicious_ids)} of {N} malicious: requires M < K/2")
        if self.attack is None and self.schedule is not None and self.schedule.malicious_ids:
            raise ValueError("malicious clients configured without an attack")

    @property
    def aggregator_name(self) -> str:
        return "bra" if isinstance(self.aggregator, BraSettings) else self.aggregator.kind


@dataclass
class RoundRecord:
    round: int
    acc: float | None
    asr: float | None
    pi: np.ndarray | None
    epsilon_hat: float | None
    actual_malicious: frozenset[int]
    aggregate_norm: float

    @property
    def evaluated(self) -> bool:
        return self.acc is not None


def _sgd(model: LogisticModel, params: np.ndarray, data: Dataset, hp: TrainingHyperparams, epochs: int,
         rng: np.random.Generator, buf: np.ndarray) -> np.ndarray:
    n = len(data)
    bs = min(hp.batch_size, n)
    mu, lr = hp.momentum, hp.learning_rate
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            _, g = model.loss_and_grad(params, data.features[idx], data.labels[idx], hp.weight_decay)
            # Nesterov momentum in the torch.optim.SGD formulation
            buf *= mu
            buf += g
            params = params - lr * (g + mu * buf)
    return params


def local_train(global_params: np.ndarray, partition: Dataset, hp: TrainingHyperparams, rng: np.random.Generator,
                *, client_id: int = 0, poisoned_warmup: Dataset | None = None) -> ClientUpdate:
    """Mini-batch SGD with Nesterov momentum from the global parameters.

    With ``poisoned_warmup`` the first half of the epochs (rounded down) runs on
    that set alone and the rest on ``partition``; the momentum buffer carries over.
    """
    if len(partition) == 0:
        raise ValueError(f"client {client_id} has no data")
    model = model_for(partition)
    params = np.array(global_params, dtype=np.float64, copy=True)
    buf = np.zeros_like(params)
    epochs = hp.local_epochs
    if poisoned_warmup is not None and len(poisoned_warmup):
        first = epochs // 2
        params = _sgd(model, params, poisoned_warmup, hp, first, rng, buf)
        epochs -= first
    params = _sgd(model, params, partition, hp, epochs, rng, buf)
    return ClientUpdate(client_id, params, len(partition))


def load_datasets(spec: SyntheticSpec | IdxSpec, seed: int) -> tuple[Dataset, Dataset]:
    if isinstance(spec, SyntheticSpec):
        rng = keyed_generator(seed, _DATA)
        train = make_synthetic_dataset(spec.num_classes, spec.dim, spec.train_per_class, spec.spread, rng)
        test = make_synthetic_dataset(spec.num_classes, spec.dim, spec.test_per_class, spec.spread, rng)
        return train, test
    train = load_idx_dataset(spec.train_images, spec.train_labels, spec.num_classes, spec.normalization,
                             spec.pad_to, spec.train_limit)
    test = load_idx_dataset(spec.test_images, spec.test_labels, spec.num_classes, spec.normalization,
                            spec.pad_to, spec.test_limit)
    return train, test


def aggregate(updates: list[ClientUpdate], aggregator: Aggregator):
    if isinstance(aggregator, BraSettings):
        return aggregate_bra(updates, aggregator)
    return aggregate_baseline(updates, aggregator)


def _client_update(k: int, t: int, global_params: np.ndarray, part: Dataset, config: FedRunConfig,
                   attacking: bool) -> ClientUpdate:
    hp = config.training
    rng = keyed_generator(config.seed, _TRAIN, t, k)
    attack = config.attack
    if not attacking:
        return local_train(global_params, part, hp, rng, client_id=k)
    if attack.kind == "label_flip":
        return local_train(global_params, part.with_labels(flip_labels(part.labels, part.num_classes)), hp, rng,
                           client_id=k)
    if attack.kind == "backdoor":
        if not np.any(part.labels == attack.source_class):
            log.debug("round %d: client %d holds no source-class samples, training honestly", t, k)
            return local_train(global_params, part, hp, rng, client_id=k)
        poisoned = apply_backdoor(part, attack)
        return local_train(global_params, poisoned.train, hp, rng, client_id=k,
                           poisoned_warmup=poisoned.poisoned_only)
    honest = local_train(global_params, part, hp, rng, client_id=k)
    delta = honest.params - global_params
    if attack.kind == "sign_flip":
        bad = sign_flip(delta, attack.gamma)
    else:
        bad = random_update(delta, attack.gamma, keyed_generator(config.seed, _ATTACK, t, k))
    return ClientUpdate(k, global_params + bad, honest.sample_count)


def run_federated(config: FedRunConfig, *, progress=None) -> list[RoundRecord]:
    """Run all rounds and return one record per round (``acc`` is None on rounds not evaluated)."""
    train, test = load_datasets(config.dataset, config.seed)
    N = config.partition.num_clients
    parts = [train.subset(idx) for idx in
             dirichlet_partition(train, N, config.partition.alpha, keyed_generator(config.seed, _PARTITION))]
    model = model_for(train)
    attack = config.attack
    triggered = triggered_testset(test, attack) if attack is not None and attack.kind == "backdoor" else None
    global_params = model.init_params()
    records: list[RoundRecord] = []
    for t in range(config.rounds):
        try:
            active = (active_malicious(t, config.schedule)
                      if attack is not None and t >= attack.start_round else frozenset())
            updates = [_client_update(k, t, global_params, parts[k], config, k in active) for k in range(N)]
            result = aggregate(updates, config.aggregator)
        except Exception as exc:
            raise RuntimeError(f"round {t}: {exc}") from exc
        global_params = result.mean
        evaluate = (t + 1) % config.eval_every == 0 or t == config.rounds - 1
        acc = evaluate_acc(model, global_params, test) if evaluate else None
        asr = evaluate_asr(model, global_params, triggered, attack.target_class) if evaluate and triggered else None
        is_bra = isinstance(config.aggregator, BraSettings)
        records.append(RoundRecord(
            round=t,
            acc=acc,
            asr=asr,
            pi=result.pi.copy() if is_bra else None,
            epsilon_hat=result.epsilon_hat if is_bra else None,
            actual_malicious=active,
            aggregate_norm=float(np.linalg.norm(global_params)),
        ))
        if progress is not None:
            progress(records[-1])
    return records


def final_window(records: list[RoundRecord], window: int, metric: str = "acc") -> float | None:
    """Mean of ``metric`` over the last ``window`` evaluated rounds (None if never measured)."""
    vals = [getattr(r, metric) for r in records if r.evaluated and getattr(r, metric) is not None]
    if not vals:
        return None
    return float(np.mean(vals[-window:]))
