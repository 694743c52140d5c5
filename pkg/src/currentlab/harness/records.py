"""Result persistence: CSV records, JSON manifests, and replay.

Every record row carries the input hash of its resolved configuration, so a
results directory is self-describing and bit-identical reproduction can be
checked by rerunning the stored config.
"""

from __future__ import annotations

import hashlib
import json
import csv
from dataclasses import dataclass, asdict
from pathlib import Path

from .. import __version__

CSV_FIELDS = ["experiment_id", "kind", "observable", "value", "error",
              "L", "beta", "seed", "input_hash"]


@dataclass(frozen=True)
class ResultRecord:
    experiment_id: str
    kind: str
    observable: str
    value: float
    error: float | None = None
    L: int | None = None
    beta: float | None = None
    seed: int | None = None
    input_hash: str = ""

    def row(self) -> list[str]:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, float):
                return repr(x)
            return str(x)

        return [fmt(getattr(self, f)) for f in CSV_FIELDS]


def input_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class ResultSink:
    """Serialized writer for one experiment directory."""

    def __init__(self, out_dir: str | Path, kind: str, config: dict):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.kind = kind
        self.config = dict(config)
        self.hash = input_hash(self.config)
        self.experiment_id = f"{kind}-{self.hash[:8]}"
        self.records: list[ResultRecord] = []
        self.figures: list[str] = []
        (self.dir / "config.json").write_text(
            json.dumps(self.config, indent=1, sort_keys=True)
        )

    def add(self, observable: str, value: float, error: float | None = None,
            L: int | None = None, beta: float | None = None,
            seed: int | None = None) -> None:
        self.records.append(ResultRecord(
            experiment_id=self.experiment_id, kind=self.kind,
            observable=observable, value=float(value),
            error=None if error is None else float(error),
            L=L, beta=beta, seed=seed, input_hash=self.hash,
        ))

    def figure_path(self, name: str) -> Path:
        fig_dir = self.dir / "figures"
        fig_dir.mkdir(exist_ok=True)
        self.figures.append(f"figures/{name}")
        return fig_dir / name

    def flush(self, status: str, summary: dict | None = None,
              elapsed: float | None = None) -> None:
        with open(self.dir / "records.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_FIELDS)
            for rec in self.records:
                writer.writerow(rec.row())
        manifest = {
            "experiment_id": self.experiment_id,
            "kind": self.kind,
            "input_hash": self.hash,
            "version": __version__,
            "status": status,
            "records": len(self.records),
            "figures": self.figures,
            "summary": summary or {},
        }
        if elapsed is not None:
            manifest["elapsed_seconds"] = round(elapsed, 3)
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=1))


def load_records(path: str | Path) -> list[dict]:
    with open(Path(path) / "records.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def replay(result_dir: str | Path, run_fn) -> tuple[bool, str]:
    """Re-execute a persisted experiment and demand bit-identical records.

    ``run_fn(config, out_dir)`` must rerun the experiment.  Returns (ok,
    message); on mismatch the message names the first divergent record.
    """
    result_dir = Path(result_dir)
    config = json.loads((result_dir / "config.json").read_text())
    fresh = result_dir / ".replay"
    run_fn(config, fresh)
    old = load_records(result_dir)
    new = load_records(fresh)
    if len(old) != len(new):
        return False, f"record count changed: {len(old)} -> {len(new)}"
    for i, (a, b) in enumerate(zip(old, new)):
        if a != b:
            diff_keys = [k for k in a if a[k] != b[k]]
            return False, (
                f"record {i} ({a['observable']}) diverged in {diff_keys}: "
                f"{[(a[k], b[k]) for k in diff_keys]}"
            )
    return True, f"{len(old)} records identical"
