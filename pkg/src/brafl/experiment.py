"""Batch drivers behind the CLI: single runs, epsilon sweeps, the certificate suite."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bra import aggregate_bra
from .config import Experiment, OracleOptions, parse_experiment, with_overrides
from .core import keyed_generator
from .fedsim import final_window, run_federated
from .oracle import brute_force_subset, check_robust_bound, jensen_gap
from .report import RunManifest, heatmap_svg, metrics_csv

log = logging.getLogger(__name__)


def _summary(exp: Experiment, records) -> dict:
    run = exp.run
    last = records[-1]
    out = {
        "aggregator": run.aggregator_name,
        "attack": run.attack.kind if run.attack else "none",
        "rounds": run.rounds,
        "window": exp.window,
        "acc_window_mean": final_window(records, exp.window, "acc"),
        "acc_final": last.acc,
    }
    if run.attack is not None and run.attack.kind == "backdoor":
        out["asr_window_mean"] = final_window(records, exp.window, "asr")
    if last.epsilon_hat is not None:
        eps = [r.epsilon_hat for r in records if r.evaluated][-exp.window:]
        out["epsilon_hat_window_mean"] = float(np.mean(eps))
    return out


def run_experiment(config: str | Experiment, output_dir, config_path: str | None = None) -> RunManifest:
    """Run one simulation; write ``metrics.csv``, ``summary.json``, ``heatmap.svg`` (BRA only) and ``manifest.json``."""
    exp = parse_experiment(config) if isinstance(config, str) else config
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = run_federated(exp.run)
    N = exp.run.partition.num_clients
    manifest = RunManifest(config_path, str(out))
    metrics = out / "metrics.csv"
    metrics.write_text(metrics_csv(records, N))
    manifest.add(metrics)
    summary = out / "summary.json"
    summary.write_text(json.dumps(_summary(exp, records), indent=2, sort_keys=True) + "\n")
    manifest.add(summary)
    if exp.run.aggregator_name == "bra":
        heat = out / "heatmap.svg"
        heat.write_text(heatmap_svg(records, N))
        manifest.add(heat)
    manifest.write()
    return manifest


def _sweep_entry(args):
    text, eps, sub, config_path = args
    run_experiment(with_overrides(text, adversary__fraction=eps), sub, config_path)
    return json.loads((Path(sub) / "summary.json").read_text())


def sweep(config_text: str, epsilons: Sequence[float], output_dir, config_path: str | None = None,
          jobs: int = 1) -> RunManifest:
    """Run the template once per malicious fraction and tabulate final-window means in ``summary.csv``."""
    exp = parse_experiment(config_text)
    for eps in epsilons:
        if not 0.0 <= eps < 0.5:
            raise ValueError(f"epsilon {eps} must lie in [0, 0.5): requires M < K/2")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(config_text, eps, out / f"eps_{eps:.2f}", config_path) for eps in epsilons]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_sweep_entry, tasks))
    else:
        summaries = [_sweep_entry(t) for t in tasks]

    backdoor = exp.run.attack is not None and exp.run.attack.kind == "backdoor"
    bra = exp.run.aggregator_name == "bra"
    header = ["epsilon", "acc"] + (["asr"] if backdoor else []) + (["epsilon_hat"] if bra else [])
    lines = [",".join(header)]
    for eps, s in zip(epsilons, summaries):
        row = [repr(float(eps)), repr(s["acc_window_mean"])]
        if backdoor:
            # undefined without attackers
            row.append("" if eps == 0 or s.get("asr_window_mean") is None else repr(s["asr_window_mean"]))
        if bra:
            row.append(repr(s["epsilon_hat_window_mean"]))
        lines.append(",".join(row))
    table = out / "summary.csv"
    table.write_text("\n".join(lines) + "\n")

    manifest = RunManifest(config_path, str(out))
    for path in sorted(out.rglob("*")):
        if path.is_file() and path != out / "manifest.json":
            manifest.add(path)
    manifest.write()
    return manifest


@dataclass
class CertificateOutcome:
    instance: int
    K: int
    M: int
    d: int
    worst_ratio: float
    satisfied: bool
    bra_ratio: float
    jensen_ok: bool


def random_instance(rng: np.random.Generator, K: int, M: int, d: int) -> np.ndarray:
    """Gaussian honest cloud plus M planted outliers at random radii."""
    X = rng.standard_normal((K, d))
    if M:
        dirs = rng.standard_normal((M, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        X[K - M:] = dirs * rng.uniform(3.0, 30.0, size=(M, 1))
    return X[rng.permutation(K)]


def oracle_check(options: OracleOptions) -> list[CertificateOutcome]:
    """Check the robustness bound of the exact subset solution on random instances.

    BRA's relaxed output is measured against the same bound for information only.
    """
    outcomes = []
    for i in range(options.instances):
        rng = keyed_generator(options.seed, i)
        K = int(rng.integers(options.k_min, options.k_max + 1))
        M = int(rng.integers(0, math.ceil(K / 2)))
        d = int(rng.integers(1, options.d_max + 1))
        X = random_instance(rng, K, M, d)
        sol = brute_force_subset(X, M)
        rep = check_robust_bound(sol.centroid, X, M)
        bra_rep = check_robust_bound(aggregate_bra(X).mean, X, M)
        jensen = all(jensen_gap(X, sol.subset, B) >= -1e-9 for B in [sol.subset, tuple(range(K - M))])
        outcomes.append(CertificateOutcome(i, K, M, d, rep.worst_ratio, rep.satisfied, bra_rep.worst_ratio, jensen))
    return outcomes
