"""Experiment configuration: one YAML document, validated up front."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .analysis import AGGREGATES, BootstrapConfig
from .errors import ContractViolation, ValidationError
from .graphstate import QubitGraph, default_path_graph, load_graph
from .simulator import NoiseModel

CONFIG_TEMPLATE = """\
# graphent experiment configuration
#
# graph: "default" is the 20-qubit Poughkeepsie path (15-16-...-1-0).
#   Alternatives: {{path: [0, 1, 2]}}, {{vertices: [...], edges: [[a, b], ...]}},
#   or {{file: graph.json}} (same JSON shape, path relative to this file).
graph: default

# Gate and readout noise.  These rates are assumed, not measured on any
# device: they are chosen so the default run shows the qualitative pattern
# of pairwise entanglement everywhere and witness detection on short chains.
noise:
  p1: {p1}            # assumed: single-qubit depolarizing probability per gate
  p2: {p2}            # assumed: two-qubit depolarizing probability per gate
  readout_flip: [{ro0}, {ro1}]   # assumed: P(read 1 | 0), P(read 0 | 1)

# Shots per measurement setting (2048 in the hardware experiment).
shots: {shots}

# Master seed for every random stream (simulation and bootstrap).
seed: {seed}

# Circuit executed by `simulate`: "cnot" (CZ rewritten as H-CNOT-H with
# cancelled Hadamard pairs) or "cz".
circuit: {circuit}

bootstrap:
  resamples: {resamples}     # assumed; at least 100
  confidence: {confidence}    # 95% intervals as in the hardware experiment

# Aggregate whose confidence interval decides the fully-entangled verdict:
# zero_state, largest or mean.
verdict_aggregate: {verdict_aggregate}

# Directory for datasets, reports, figures and the run manifest.
output_dir: {output_dir}
"""


@dataclass(frozen=True)
class ExperimentConfig:
    graph: QubitGraph = field(default_factory=default_path_graph)
    noise: NoiseModel = field(default_factory=NoiseModel.default)
    shots: int = 2048
    seed: int = 0
    circuit: str = "cnot"
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    verdict_aggregate: str = "zero_state"
    output_dir: str = "out"

    def with_overrides(self, seed=None, shots=None, resamples=None, noise=None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=_check_seed(seed, "--seed"))
        if shots is not None:
            if shots < 1:
                raise ValidationError("--shots: must be a positive integer")
            cfg = replace(cfg, shots=int(shots))
        if resamples is not None:
            cfg = replace(cfg, bootstrap=_bootstrap(resamples, cfg.bootstrap.confidence, "--resamples"))
        if noise is not None:
            cfg = replace(cfg, noise=parse_noise_flag(noise))
        return replace(cfg, bootstrap=replace(cfg.bootstrap, seed=cfg.seed))

    def snapshot(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "noise": {"p1": self.noise.p1, "p2": self.noise.p2, "readout_flip": list(self.noise.readout_flip)},
            "shots": self.shots,
            "seed": self.seed,
            "circuit": self.circuit,
            "bootstrap": {"resamples": self.bootstrap.resamples, "confidence": self.bootstrap.confidence},
            "verdict_aggregate": self.verdict_aggregate,
            "output_dir": self.output_dir,
        }


def _check_seed(v, where: str) -> int:
    if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v < 2**64:
        raise ValidationError(f"{where}: must be an integer in [0, 2^64)")
    return v


def _bootstrap(resamples, confidence, where: str) -> BootstrapConfig:
    try:
        return BootstrapConfig(int(resamples), float(confidence))
    except (ContractViolation, TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: {exc}") from None


def parse_noise_flag(text: str) -> NoiseModel:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValidationError("--noise: expected four comma-separated values p1,p2,ro0,ro1")
    try:
        p1, p2, ro0, ro1 = (float(p) for p in parts)
    except ValueError:
        raise ValidationError(f"--noise: could not parse {text!r} as numbers") from None
    return _noise({"p1": p1, "p2": p2, "readout_flip": [ro0, ro1]}, "--noise")


def _noise(doc, where: str) -> NoiseModel:
    if not isinstance(doc, dict):
        raise ValidationError(f"{where}: must be a mapping with p1, p2, readout_flip")
    unknown = set(doc) - {"p1", "p2", "readout_flip"}
    if unknown:
        raise ValidationError(f"{where}.{sorted(unknown)[0]}: unknown field")
    base = NoiseModel.default()
    vals = {"p1": doc.get("p1", base.p1), "p2": doc.get("p2", base.p2)}
    ro = doc.get("readout_flip", list(base.readout_flip))
    for k, v in vals.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not 0.0 <= v <= 1.0:
            raise ValidationError(f"{where}.{k}: must be a probability in [0, 1]")
    if not isinstance(ro, (list, tuple)) or len(ro) != 2:
        raise ValidationError(f"{where}.readout_flip: must be a list of two probabilities")
    for i, v in enumerate(ro):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not 0.0 <= v <= 1.0:
            raise ValidationError(f"{where}.readout_flip[{i}]: must be a probability in [0, 1]")
    return NoiseModel(vals["p1"], vals["p2"], tuple(ro))


def _graph(doc, base_dir: Path) -> QubitGraph:
    if doc in (None, "default"):
        return default_path_graph()
    if isinstance(doc, dict) and "file" in doc:
        return load_graph(base_dir / doc["file"])
    if isinstance(doc, list):
        return QubitGraph.path(doc)
    try:
        return QubitGraph.from_dict(doc)
    except ValidationError as exc:
        raise ValidationError(f"graph: {exc}") from None


def config_from_dict(doc: dict, base_dir: Path | str = ".") -> ExperimentConfig:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ValidationError("config: top level must be a mapping")
    known = {"graph", "noise", "shots", "seed", "circuit", "bootstrap", "verdict_aggregate", "output_dir"}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValidationError(f"{unknown[0]}: unknown config field")
    base_dir = Path(base_dir)
    graph = _graph(doc.get("graph", "default"), base_dir)
    if len(graph.vertices) < 2 or not graph.is_path():
        raise ValidationError("graph: must be a simple path with at least two qubits")
    if len(graph.vertices) > 20:
        raise ValidationError("graph: at most 20 qubits can be simulated")
    noise = _noise(doc.get("noise", {}), "noise")
    shots = doc.get("shots", 2048)
    if not isinstance(shots, int) or isinstance(shots, bool) or shots < 1:
        raise ValidationError("shots: must be a positive integer")
    seed = _check_seed(doc.get("seed", 0), "seed")
    circuit = doc.get("circuit", "cnot")
    if circuit not in ("cnot", "cz"):
        raise ValidationError("circuit: must be 'cnot' or 'cz'")
    bdoc = doc.get("bootstrap", {}) or {}
    if not isinstance(bdoc, dict):
        raise ValidationError("bootstrap: must be a mapping")
    boot = _bootstrap(bdoc.get("resamples", 1000), bdoc.get("confidence", 0.95), "bootstrap")
    agg = doc.get("verdict_aggregate", "zero_state")
    if agg not in AGGREGATES:
        raise ValidationError(f"verdict_aggregate: must be one of {', '.join(AGGREGATES)}")
    out = doc.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ValidationError("output_dir: must be a nonempty path string")
    return ExperimentConfig(graph, noise, shots, seed, circuit, BootstrapConfig(boot.resamples, boot.confidence, seed),
                            agg, str(base_dir / out) if not Path(out).is_absolute() else out)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file {path} not found") from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}" if mark else ""
        raise ValidationError(f"{path}:{where}: {exc}") from None
    return config_from_dict(doc, path.parent)


def default_config_text() -> str:
    nm = NoiseModel.default()
    b = BootstrapConfig()
    return CONFIG_TEMPLATE.format(
        p1=nm.p1, p2=nm.p2, ro0=nm.readout_flip[0], ro1=nm.readout_flip[1], shots=2048, seed=0,
        circuit="cnot", resamples=b.resamples, confidence=b.confidence, verdict_aggregate="zero_state",
        output_dir="out",
    )
