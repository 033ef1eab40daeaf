"""Resumable experiment stages: simulate, ingest, analyze.

Every stage reads and writes plain files under one output directory::

    out/
      datasets/quad_<a>-<b>.json   one tomography dataset per quad
      reports/                     negativity.csv, witness.csv, summary.json
      reports/plotdata/            x/y/error tables behind each figure
      figures/                     PNGs rendered by ``report``
      manifest.json                config snapshot, artifact hashes, timings

Artifacts are written atomically and the manifest is written last, so an
interrupted run never leaves a manifest describing files that do not exist.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__
from .analysis import PathAnalysis, QuadSelection, analyze_path, select_quads
from .config import ExperimentConfig
from .errors import ValidationError
from .graphstate import build_graph_state_circuit, reduce_to_cnot
from .simulator import PauliFrameSampler, ShotPlan
from .tomography import TomographyDataset, collect_dataset

SIMULATE_STREAM = 1


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_atomic(path: Path, data: bytes | str) -> str:
    """Write via a temporary sibling and rename; returns the sha256 of the bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return sha256_bytes(data)


def dataset_filename(quad: QuadSelection | None, ds: TomographyDataset) -> str:
    if quad is not None:
        return f"quad_{quad.label}.json"
    return "targets_" + "-".join(str(q) for q in ds.targets) + ".json"


# -- manifest ----------------------------------------------------------------


def read_manifest(out: Path) -> dict:
    p = Path(out) / "manifest.json"
    if not p.exists():
        return {"toolkit": "graphent", "version": __version__, "stages": {}}
    return json.loads(p.read_text())


def write_manifest(out: Path, cfg: ExperimentConfig, stage: str, artifacts: dict, seconds: float) -> None:
    man = read_manifest(out)
    man["version"] = __version__
    man["config"] = cfg.snapshot()
    man.setdefault("stages", {})[stage] = {
        "artifacts": [{"path": k, "sha256": v} for k, v in sorted(artifacts.items())],
        "seconds": round(seconds, 3),
    }
    write_atomic(Path(out) / "manifest.json", json.dumps(man, indent=2) + "\n")


# -- stages ------------------------------------------------------------------


def prepare_circuit(cfg: ExperimentConfig):
    c = build_graph_state_circuit(cfg.graph)
    return reduce_to_cnot(c) if cfg.circuit == "cnot" else c


def simulate_datasets(cfg: ExperimentConfig) -> list[tuple[QuadSelection, TomographyDataset]]:
    """One sampled dataset per quad; quad ``i`` setting ``s`` uses stream ``(seed, 1, i, s)``."""
    sampler = PauliFrameSampler(prepare_circuit(cfg), cfg.noise)
    plan = ShotPlan(cfg.shots, cfg.seed)
    quads = select_quads(cfg.graph)

    def work(qi: int) -> TomographyDataset:
        return collect_dataset(sampler, quads[qi].targets, plan, stream=(SIMULATE_STREAM, qi))

    # every quad owns its random streams, so scheduling order cannot matter
    with ThreadPoolExecutor(max_workers=min(len(quads), os.cpu_count() or 1)) as pool:
        return list(zip(quads, pool.map(work, range(len(quads)))))


def run_simulate(cfg: ExperimentConfig, out: Path) -> dict:
    t0 = time.perf_counter()
    out = Path(out)
    artifacts = {}
    for quad, ds in simulate_datasets(cfg):
        rel = f"datasets/{dataset_filename(quad, ds)}"
        artifacts[rel] = write_atomic(out / rel, ds.to_json())
    write_manifest(out, cfg, "simulate", artifacts, time.perf_counter() - t0)
    return artifacts


def run_ingest(cfg: ExperimentConfig, files: Sequence[Path], out: Path) -> dict:
    """Validate external datasets and store them in normalised form.

    Every file is parsed before anything is written, so one malformed file
    rejects the whole batch.
    """
    t0 = time.perf_counter()
    out = Path(out)
    by_targets = {tuple(q.targets): q for q in select_quads(cfg.graph)}
    parsed = []
    for f in files:
        f = Path(f)
        if not f.exists():
            raise ValidationError(f"{f}: file not found")
        ds = TomographyDataset.load(f)
        parsed.append((by_targets.get(tuple(ds.targets)), ds))
    names = [dataset_filename(q, ds) for q, ds in parsed]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValidationError(f"more than one input dataset maps to {dupes[0]}")
    artifacts = {}
    for name, (_, ds) in zip(names, parsed):
        rel = f"datasets/{name}"
        artifacts[rel] = write_atomic(out / rel, ds.to_json())
    write_manifest(out, cfg, "ingest", artifacts, time.perf_counter() - t0)
    return artifacts


def load_datasets(out: Path) -> list[tuple[str, str, TomographyDataset]]:
    """``(relative path, sha256, dataset)`` for every stored dataset, sorted by name."""
    d = Path(out) / "datasets"
    if not d.is_dir():
        return []
    rows = []
    for p in sorted(d.glob("*.json")):
        data = p.read_bytes()
        rows.append((f"datasets/{p.name}", sha256_bytes(data), TomographyDataset.load(p)))
    return rows


def run_analyze(cfg: ExperimentConfig, out: Path) -> PathAnalysis:
    from .report import write_reports

    t0 = time.perf_counter()
    out = Path(out)
    stored = load_datasets(out)
    result = analyze_path(cfg.graph, [ds for _, _, ds in stored], cfg.bootstrap, cfg.verdict_aggregate)
    by_targets = {tuple(ds.targets): (rel, h) for rel, h, ds in stored}
    used = [
        {"quad": q.label, "path": by_targets[tuple(q.targets)][0], "sha256": by_targets[tuple(q.targets)][1]}
        for q in select_quads(cfg.graph)
    ]
    artifacts = write_reports(result, cfg, used, out / "reports")
    write_manifest(out, cfg, "analyze", {f"reports/{k}": v for k, v in artifacts.items()}, time.perf_counter() - t0)
    return result


def run_all(cfg: ExperimentConfig, out: Path, figures: bool = True) -> PathAnalysis:
    """Fused simulate, analyze and (optionally) report."""
    run_simulate(cfg, out)
    result = run_analyze(cfg, out)
    if figures:
        from .report import run_report

        run_report(cfg, out)
    return result
