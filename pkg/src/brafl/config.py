"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment. Section prefixes are
dotted (``partition.alpha = 0.5``). Every accepted key is listed in ``KEYS``
with its default; anything else is rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .attacks import ATTACK_KINDS, AdversarySchedule, AttackConfig, TriggerSpec
from .baselines import KINDS as BASELINE_KINDS
from .baselines import BaselineSpec
from .bra import BraSettings
from .fedsim import FedRunConfig, IdxSpec, PartitionConfig, SyntheticSpec, TrainingHyperparams


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


# key -> (type, default); None default means "no default"
KEYS: dict[str, tuple[type, object]] = {
    "dataset": (str, "synthetic"),
    "aggregator": (str, "bra"),
    "attack": (str, "none"),
    "rounds": (int, 30),
    "eval_every": (int, 1),
    "seed": (int, 0),
    "dataset.classes": (int, 10),
    "dataset.dims": (int, 12),
    "dataset.train_per_class": (int, 100),
    "dataset.test_per_class": (int, 100),
    "dataset.spread": (float, 0.5),
    "dataset.train_images": (str, None),
    "dataset.train_labels": (str, None),
    "dataset.test_images": (str, None),
    "dataset.test_labels": (str, None),
    "dataset.normalization": (str, "none"),
    "dataset.pad_to": (int, None),
    "dataset.train_limit": (int, None),
    "dataset.test_limit": (int, None),
    "partition.clients": (int, 20),
    "partition.alpha": (float, 1.0),
    "training.learning_rate": (float, 0.01),
    "training.batch_size": (int, 128),
    "training.local_epochs": (int, 10),
    "training.momentum": (float, 0.9),
    "training.weight_decay": (float, 1e-4),
    "aggregator.max_iterations": (int, 100),
    "aggregator.pi_tolerance": (float, 1e-8),
    "aggregator.sigma2_floor": (float, 1e-12),
    "aggregator.pi_init": (float, 0.5),
    "aggregator.epsilon_lo": (float, None),
    "aggregator.epsilon_hi": (float, None),
    "aggregator.beta": (float, None),
    "aggregator.krum_l": (int, None),
    "aggregator.geomed_tolerance": (float, 1e-10),
    "aggregator.geomed_max_iters": (int, 1000),
    "attack.gamma": (float, 4.0),
    "attack.source_class": (int, 0),
    "attack.target_class": (int, 8),
    "attack.trigger_magnitude": (float, 5.0),
    "attack.trigger_coordinate": (int, None),
    "attack.start_round": (int, 0),
    "adversary.fraction": (float, 0.0),
    "adversary.ids": (str, None),
    "adversary.mode": (str, "static"),
    "adversary.active_probability": (float, 0.5),
    "adversary.seed": (int, 0),
    "output.window": (int, 20),
    "oracle.instances": (int, 200),
    "oracle.seed": (int, 0),
    "oracle.k_min": (int, 4),
    "oracle.k_max": (int, 10),
    "oracle.d_max": (int, 5),
}


@dataclass(frozen=True)
class OracleOptions:
    instances: int = 200
    seed: int = 0
    k_min: int = 4
    k_max: int = 10
    d_max: int = 5


@dataclass(frozen=True)
class Experiment:
    run: FedRunConfig
    window: int = 20
    oracle: OracleOptions = field(default_factory=OracleOptions)
    raw: dict = field(default_factory=dict)


def _convert(key: str, typ: type, text: str):
    if typ is str:
        return text
    try:
        if typ is int:
            return int(text)
        value = float(text)
    except ValueError:
        raise ConfigError(key, f"expected {typ.__name__}, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(key, "must be finite")
    return value


def parse_pairs(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(key, "unknown key")
        if key in pairs:
            raise ConfigError(key, "given twice")
        pairs[key] = value
    return pairs


def _values(pairs: dict[str, str]) -> dict[str, object]:
    out = {}
    for key, (typ, default) in KEYS.items():
        out[key] = _convert(key, typ, pairs[key]) if key in pairs else default
    return out


def _positive(v: dict, *keys: str) -> None:
    for key in keys:
        if v[key] is not None and not v[key] > 0:
            raise ConfigError(key, "must be positive")


def _dataset(v: dict):
    kind = v["dataset"]
    if kind == "synthetic":
        _positive(v, "dataset.classes", "dataset.dims", "dataset.train_per_class", "dataset.test_per_class")
        if v["dataset.classes"] < 2:
            raise ConfigError("dataset.classes", "need at least 2 classes")
        if v["dataset.spread"] < 0:
            raise ConfigError("dataset.spread", "must be nonnegative")
        return SyntheticSpec(v["dataset.classes"], v["dataset.dims"], v["dataset.train_per_class"],
                             v["dataset.test_per_class"], v["dataset.spread"])
    if kind == "idx":
        for key in ("dataset.train_images", "dataset.train_labels", "dataset.test_images", "dataset.test_labels"):
            if not v[key]:
                raise ConfigError(key, "required when dataset = idx")
        if v["dataset.normalization"] not in ("none", "mnist", "fmnist"):
            raise ConfigError("dataset.normalization", "must be one of none, mnist, fmnist")
        return IdxSpec(v["dataset.train_images"], v["dataset.train_labels"], v["dataset.test_images"],
                       v["dataset.test_labels"], v["dataset.classes"], v["dataset.normalization"],
                       v["dataset.pad_to"], v["dataset.train_limit"], v["dataset.test_limit"])
    raise ConfigError("dataset", "must be 'synthetic' or 'idx'")


def _aggregator(v: dict):
    kind = v["aggregator"]
    if kind == "bra":
        lo, hi = v["aggregator.epsilon_lo"], v["aggregator.epsilon_hi"]
        clamp = None
        if lo is not None or hi is not None:
            if lo is None or hi is None:
                raise ConfigError("aggregator.epsilon_lo", "epsilon_lo and epsilon_hi must be given together")
            clamp = (lo, hi)
        try:
            return BraSettings(v["aggregator.max_iterations"], v["aggregator.pi_tolerance"],
                               v["aggregator.sigma2_floor"], clamp, v["aggregator.pi_init"])
        except ValueError as exc:
            raise ConfigError("aggregator", str(exc)) from None
    if kind not in BASELINE_KINDS:
        raise ConfigError("aggregator", f"must be one of bra, {', '.join(BASELINE_KINDS)}")
    if kind == "trimmed_mean" and v["aggregator.beta"] is None:
        raise ConfigError("aggregator.beta", "beta required for trimmed_mean")
    if kind == "multi_krum" and v["aggregator.krum_l"] is None:
        raise ConfigError("aggregator.krum_l", "krum_l required for multi_krum")
    try:
        return BaselineSpec(kind, v["aggregator.beta"], v["aggregator.krum_l"], v["aggregator.geomed_tolerance"],
                            v["aggregator.geomed_max_iters"])
    except ValueError as exc:
        raise ConfigError("aggregator", str(exc)) from None


def _adversary(v: dict, N: int):
    frac = v["adversary.fraction"]
    if not 0.0 <= frac < 1.0:
        raise ConfigError("adversary.fraction", "must lie in [0, 1)")
    if v["adversary.ids"]:
        try:
            ids = frozenset(int(s) for s in v["adversary.ids"].replace(";", ",").split(",") if s.strip())
        except ValueError:
            raise ConfigError("adversary.ids", "expected comma-separated client ids") from None
        if any(not 0 <= i < N for i in ids):
            raise ConfigError("adversary.ids", f"ids must lie in 0..{N - 1}")
    else:
        ids = frozenset(range(int(math.floor(frac * N + 1e-9))))
    if 2 * len(ids) >= N:
        raise ConfigError("adversary.fraction", f"{len(ids)} malicious of {N} clients: requires M < K/2")
    if v["adversary.mode"] not in ("static", "dynamic"):
        raise ConfigError("adversary.mode", "must be 'static' or 'dynamic'")
    if not 0.0 < v["adversary.active_probability"] <= 1.0:
        raise ConfigError("adversary.active_probability", "must lie in (0, 1]")
    if not ids:
        return None
    return AdversarySchedule(ids, v["adversary.mode"], v["adversary.active_probability"], v["adversary.seed"])


def _attack(v: dict):
    kind = v["attack"]
    if kind == "none":
        return None
    if kind not in ATTACK_KINDS:
        raise ConfigError("attack", f"must be one of none, {', '.join(ATTACK_KINDS)}")
    trigger = TriggerSpec(coordinate=v["attack.trigger_coordinate"], magnitude=v["attack.trigger_magnitude"])
    try:
        return AttackConfig(kind, v["attack.gamma"], v["attack.source_class"], v["attack.target_class"], trigger,
                            v["attack.start_round"])
    except ValueError as exc:
        raise ConfigError("attack", str(exc)) from None


def parse_experiment(text: str) -> Experiment:
    pairs = parse_pairs(text)
    v = _values(pairs)
    _positive(v, "rounds", "eval_every", "partition.clients", "partition.alpha", "training.batch_size",
              "training.local_epochs", "output.window", "oracle.instances")
    if v["partition.clients"] < 2:
        raise ConfigError("partition.clients", "need at least 2 clients")
    dataset = _dataset(v)
    attack = _attack(v)
    schedule = _adversary(v, v["partition.clients"])
    if schedule is not None and attack is None:
        raise ConfigError("attack", "adversary.fraction > 0 needs an attack")
    if attack is not None and attack.kind == "backdoor" and isinstance(dataset, SyntheticSpec):
        for key in ("attack.source_class", "attack.target_class"):
            if not 0 <= v[key] < dataset.num_classes:
                raise ConfigError(key, f"must lie in 0..{dataset.num_classes - 1}")
    try:
        training = TrainingHyperparams(v["training.learning_rate"], v["training.batch_size"],
                                       v["training.local_epochs"], v["training.momentum"],
                                       v["training.weight_decay"])
    except ValueError as exc:
        raise ConfigError("training", str(exc)) from None
    run = FedRunConfig(
        dataset=dataset,
        partition=PartitionConfig(v["partition.clients"], v["partition.alpha"]),
        training=training,
        aggregator=_aggregator(v),
        attack=attack,
        schedule=schedule,
        rounds=v["rounds"],
        eval_every=v["eval_every"],
        seed=v["seed"],
    )
    oracle = OracleOptions(v["oracle.instances"], v["oracle.seed"], v["oracle.k_min"], v["oracle.k_max"],
                           v["oracle.d_max"])
    if not 2 <= oracle.k_min <= oracle.k_max:
        raise ConfigError("oracle.k_min", "need 2 <= k_min <= k_max")
    return Experiment(run, v["output.window"], oracle, pairs)


def parse_config(text: str) -> FedRunConfig:
    """Parse and validate a run configuration, applying defaults."""
    return parse_experiment(text).run


def with_overrides(text: str, **overrides) -> str:
    """Return ``text`` with keys replaced (dotted keys passed with ``__`` for ``.``)."""
    pairs = parse_pairs(text)
    for key, value in overrides.items():
        pairs[key.replace("__", ".")] = str(value)
    return "".join(f"{k} = {v}\n" for k, v in pairs.items())
