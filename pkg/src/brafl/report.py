"""Emitted artifacts: metrics CSV, posterior heatmap SVG, run manifest.

Everything is written deterministically (no timestamps, fixed float
formatting) so identical runs give identical bytes.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .fedsim import RoundRecord


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def metrics_header(num_clients: int) -> list[str]:
    return ["round", "acc", "asr", "epsilon_hat", *(f"pi_{k}" for k in range(num_clients)), "malicious_actual"]


def metrics_csv(records: Sequence[RoundRecord], num_clients: int) -> str:
    """One row per evaluated round; ``malicious_actual`` lists ids separated by ``;``."""
    lines = [",".join(metrics_header(num_clients))]
    for r in records:
        if not r.evaluated:
            continue
        pis = [_fmt(p) for p in r.pi] if r.pi is not None else [""] * num_clients
        mal = ";".join(str(k) for k in sorted(r.actual_malicious))
        lines.append(",".join([str(r.round), _fmt(r.acc), _fmt(r.asr), _fmt(r.epsilon_hat), *pis, mal]))
    return "\n".join(lines) + "\n"


def heatmap_svg(records: Sequence[RoundRecord], num_clients: int, cell: int = 16) -> str:
    """Grid with one column per client and one row per round.

    Cell (t, k) is filled with gray level ``round(255 * pi_k)`` at round t:
    white = surely benign, black = surely malicious. Clients that actually
    attacked in round t get a red outline.
    """
    rows = [r for r in records if r.pi is not None]
    left, top = 48, 36
    width = left + num_clients * cell + 8
    height = top + len(rows) * cell + 24
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        "<!-- color scale: cell gray level = round(255 * pi_k), pi_k = posterior probability client k is benign; "
        "white (255) = benign, black (0) = malicious; red outline = client actually attacked that round -->",
        f'<text x="{left}" y="14" font-family="monospace" font-size="11">posterior benign probability '
        f'(columns: clients 0..{num_clients - 1}, rows: rounds)</text>',
    ]
    for k in range(num_clients):
        out.append(f'<text x="{left + k * cell + cell // 2}" y="{top - 4}" font-family="monospace" '
                   f'font-size="9" text-anchor="middle">{k}</text>')
    for i, r in enumerate(rows):
        y = top + i * cell
        out.append(f'<text x="{left - 4}" y="{y + cell - 4}" font-family="monospace" font-size="9" '
                   f'text-anchor="end">{r.round}</text>')
        for k, p in enumerate(r.pi):
            g = int(round(255 * float(p)))
            stroke = ' stroke="#d62728" stroke-width="2"' if k in r.actual_malicious else ""
            out.append(f'<rect x="{left + k * cell}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="rgb({g},{g},{g})"{stroke}><title>round {r.round} client {k} pi={float(p):.4f}'
                       f'</title></rect>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config_path: str | None
    output_dir: str
    files: list[dict] = field(default_factory=list)

    def add(self, path: Path) -> None:
        path = Path(path)
        rel = path.relative_to(self.output_dir).as_posix()
        self.files.append({"path": rel, "sha256": sha256_file(path), "bytes": path.stat().st_size})

    def hashes(self) -> dict[str, str]:
        return {f["path"]: f["sha256"] for f in self.files}

    def write(self) -> Path:
        path = Path(self.output_dir) / "manifest.json"
        payload = {"config_path": self.config_path, "files": sorted(self.files, key=lambda f: f["path"])}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path
