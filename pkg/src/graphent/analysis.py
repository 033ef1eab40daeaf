"""Entanglement verdicts for a graph state prepared along a qubit path.

Pairs are certified with the negativity of the two-qubit state left after
projecting the pair's path neighbours onto the Z basis.  Chains are tested
with the stabilizer witness ``(n - 1) - sum_i <K_i>``, where ``K_i`` are the
path-graph generators of the chain's vertices.  At a chain end the
generator still carries a Z on the outside neighbour; this equals the
chain's own generator with its sign corrected by the neighbour's Z outcome,
so the witness evaluates to -1 on the ideal state for every chain.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ContractViolation, CoverageError
from .graphstate import PauliString, QubitGraph, stabilizer_generators
from .linalg import (
    BRANCH_TOL,
    Bipartition,
    DensityMatrix,
    eig_hermitian,
    partial_transpose,
    partial_transpose_array,
    project_array,
)
from .simulator import make_rng
from .tomography import (
    TomographyDataset,
    expectations_array,
    linear_inversion_array,
    pauli_labels,
    project_to_physical_array,
)

# ---------------------------------------------------------------------------
# Quads
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadSelection:
    pair: tuple
    neighbors: tuple
    targets: tuple

    def __post_init__(self):
        if len(self.targets) > 4:
            raise ContractViolation("a quad has at most four targets")
        if not set(self.pair) <= set(self.targets) or not set(self.neighbors) <= set(self.targets):
            raise ContractViolation("quad targets must contain the pair and its neighbours")

    @property
    def label(self) -> str:
        return f"{self.pair[0]}-{self.pair[1]}"

    @property
    def pair_positions(self) -> tuple[int, int]:
        return tuple(self.targets.index(q) for q in self.pair)

    @property
    def neighbor_positions(self) -> tuple[int, ...]:
        return tuple(self.targets.index(q) for q in self.neighbors)

    def outcomes(self) -> list[tuple[int, ...]]:
        """Neighbour projection outcomes, all-zeros first."""
        return list(itertools.product((0, 1), repeat=len(self.neighbors)))


def select_quads(path: QubitGraph) -> list[QuadSelection]:
    """One quad per edge: the pair plus its path neighbours, in path order."""
    if not path.is_path():
        raise ContractViolation("quad selection needs a simple path graph")
    order = path.path_order()
    quads = []
    for i in range(len(order) - 1):
        lo, hi = max(i - 1, 0), min(i + 2, len(order) - 1)
        targets = tuple(order[lo:hi + 1])
        pair = (order[i], order[i + 1])
        neighbors = tuple(q for q in targets if q not in pair)
        quads.append(QuadSelection(pair, neighbors, targets))
    return quads


def path_chains(path: QubitGraph, min_length: int = 2) -> list[tuple]:
    """Every contiguous sub-path with at least ``min_length`` vertices."""
    order = path.path_order()
    n = len(order)
    return [tuple(order[i:i + size]) for size in range(min_length, n + 1) for i in range(n - size + 1)]


def chain_label(chain: Sequence) -> str:
    return "-".join(str(q) for q in chain)


# ---------------------------------------------------------------------------
# Negativity
# ---------------------------------------------------------------------------

def negativity_array(m: np.ndarray, n_qubits: int, side_b: Sequence[int]) -> np.ndarray:
    """Negativity of a stack ``(..., d, d)`` across ``side_b`` | rest."""
    pt = partial_transpose_array(m, n_qubits, side_b)
    w = eig_hermitian(pt)[0]
    return np.sum((np.abs(w) - w) / 2.0, axis=-1)


def negativity(rho: DensityMatrix, part: Bipartition) -> float:
    """Sum of ``(|l| - l)/2`` over eigenvalues ``l`` of the partial transpose."""
    w = eig_hermitian(partial_transpose(rho, part))[0]
    return float(max(np.sum((np.abs(w) - w) / 2.0), 0.0))


def _branch_negativities(mats: np.ndarray, quad: QuadSelection) -> tuple[np.ndarray, np.ndarray]:
    """Per-outcome pair negativity and branch probability for stacked quad states.

    Returns arrays of shape ``(..., n_outcomes)``; unreachable branches are NaN.
    """
    k = len(quad.targets)
    outcomes = quad.outcomes()
    negs, probs = [], []
    for m in outcomes:
        block = mats
        n = k
        # project neighbours from the highest position down so lower positions stay valid
        for pos, bit in sorted(zip(quad.neighbor_positions, m), reverse=True):
            block = project_array(block, n, pos, bit)
            n -= 1
        p = np.real(np.trace(block, axis1=-2, axis2=-1))
        live = p >= BRANCH_TOL
        safe = np.where(live, p, 1.0)
        pair = block / safe[..., None, None]
        # the two pair qubits are the remaining positions 0 and 1 in path order
        neg = negativity_array(pair, 2, [1])
        negs.append(np.where(live, np.clip(neg, 0.0, 0.5), np.nan))
        probs.append(np.clip(p, 0.0, 1.0))
    return np.stack(negs, axis=-1), np.stack(probs, axis=-1)


def projected_pair_negativities(rho_quad: DensityMatrix, quad: QuadSelection) -> dict[tuple, tuple[float, float]]:
    """Map each reachable neighbour outcome to ``(negativity, probability)``."""
    if tuple(rho_quad.qubit_labels) != tuple(quad.targets):
        raise ContractViolation(f"state is on {rho_quad.qubit_labels}, quad needs {quad.targets}")
    negs, probs = _branch_negativities(rho_quad.matrix, quad)
    out = {}
    for m, nv, pv in zip(quad.outcomes(), negs, probs):
        if not np.isnan(nv):
            out[m] = (float(nv), float(pv))
    return out


def aggregate_negativity(per_outcome: Mapping) -> tuple[float, float, float]:
    """``(zero_state, largest, mean)`` over outcome branches.

    Values may be bare negativities or ``(negativity, probability)`` pairs.
    The mean is unweighted over the reachable branches.
    """
    if not per_outcome:
        raise ContractViolation("no projection outcomes to aggregate")
    vals = {m: (v[0] if isinstance(v, tuple) else v) for m, v in per_outcome.items()}
    width = len(next(iter(vals)))
    zero = (0,) * width
    if zero not in vals:
        raise ContractViolation("per-outcome map lacks the all-zeros branch")
    arr = np.array(list(vals.values()), dtype=float)
    return float(vals[zero]), float(arr.max()), float(arr.mean())


# ---------------------------------------------------------------------------
# Witness
# ---------------------------------------------------------------------------

def path_generators(path: QubitGraph) -> dict:
    """Vertex -> its stabilizer generator, letters in path order."""
    order = path.path_order()
    gens = stabilizer_generators(QubitGraph(tuple(order), path.edges))
    return dict(zip(order, gens))


def witness_expectation(chain: Sequence, path: QubitGraph, source: Callable) -> float:
    """``(n - 1) - sum <K_v>`` over the chain's vertices.

    ``source(v, generator)`` returns the expectation of vertex ``v``'s
    path-graph generator.  Negative values detect genuine multipartite
    entanglement.
    """
    chain = tuple(chain)
    if len(chain) < 2:
        raise ContractViolation("witness chains need at least two qubits")
    order = path.path_order()
    start = order.index(chain[0])
    if tuple(order[start:start + len(chain)]) != chain:
        raise ContractViolation(f"chain {chain_label(chain)} is not a contiguous sub-path")
    gens = path_generators(path)
    return float((len(chain) - 1) - sum(source(v, gens[v]) for v in chain))


def state_stabilizer_source(rho: DensityMatrix, path: QubitGraph) -> Callable:
    """Exact generator expectations ``tr(rho K)`` from a state on the path's qubits."""
    order = path.path_order()
    pos = [rho.position(q) for q in order]

    def source(v, gen: PauliString) -> float:
        letters = ["I"] * rho.n_qubits
        for i, c in enumerate(gen.letters):
            letters[pos[i]] = c
        op = PauliString(gen.phase, "".join(letters)).matrix()
        return float(np.real(np.trace(rho.matrix @ op)))

    return source


class _StabilizerIndex:
    """Where each path generator can be read off the quad expectation tables."""

    def __init__(self, path: QubitGraph, quads: Sequence[QuadSelection]):
        order = path.path_order()
        self.order = order
        gens = path_generators(path)
        self.entries: dict = {}
        for v in order:
            g = gens[v]
            support = {order[i]: g.letters[i] for i in g.support}
            hits = []
            for qi, quad in enumerate(quads):
                if set(support) <= set(quad.targets):
                    label = "".join(support.get(q, "I") for q in quad.targets)
                    hits.append((qi, pauli_labels(len(quad.targets)).index(label)))
            self.entries[v] = (g.phase, hits)

    def values(self, exps: Sequence[np.ndarray], vertices: Sequence | None = None) -> np.ndarray:
        """Stack ``(..., n_vertices)`` of averaged generator expectations."""
        cols = []
        for v in vertices or self.order:
            phase, hits = self.entries[v]
            if not hits:
                raise CoverageError(f"no quad covers the stabilizer support of qubit {v}")
            cols.append(phase * np.mean([exps[qi][..., li] for qi, li in hits], axis=0))
        return np.stack(cols, axis=-1)


def table_stabilizer_source(tables: Sequence, quads: Sequence[QuadSelection], path: QubitGraph) -> Callable:
    """Generator expectations averaged over every quad table that covers them."""
    index = _StabilizerIndex(path, quads)
    exps = [np.asarray(t.values) for t in tables]

    def source(v, gen=None) -> float:
        return float(index.values(exps, [v])[0])

    return source


# ---------------------------------------------------------------------------
# Bootstrap
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapConfig:
    resamples: int = 1000
    confidence: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if int(self.resamples) < 100:
            raise ContractViolation(f"bootstrap needs at least 100 resamples, got {self.resamples}")
        if not 0.0 < float(self.confidence) < 1.0:
            raise ContractViolation(f"confidence must lie in (0, 1), got {self.confidence}")


def resample_counts(ds: TomographyDataset, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` multinomial resamples of every histogram, shape ``(n, S, O)``."""
    freqs = ds.frequencies()
    freqs = freqs / freqs.sum(axis=1, keepdims=True)
    return rng.multinomial(ds.shots, freqs, size=(n, freqs.shape[0]))


def percentile_interval(samples: np.ndarray, confidence: float) -> tuple[np.ndarray, np.ndarray]:
    alpha = 1.0 - confidence
    with warnings.catch_warnings():
        # padded outcome slots of end quads are NaN in every resample
        warnings.simplefilter("ignore", RuntimeWarning)
        lo, hi = np.nanquantile(samples, [alpha / 2.0, 1.0 - alpha / 2.0], axis=0)
    return lo, hi


def bootstrap_ci(
    raw_counts,
    statistic: Callable,
    cfg: BootstrapConfig,
    chunk: int = 250,
) -> tuple:
    """Percentile bootstrap over multinomially resampled counts.

    ``statistic`` receives a list with one ``(B, S, O)`` frequency stack per
    dataset and returns an array whose first axis is ``B``.  Returns
    ``(point, low, high)`` with the point estimate taken from the original
    counts.
    """
    datasets = [raw_counts] if isinstance(raw_counts, TomographyDataset) else list(raw_counts)
    if not datasets:
        raise ContractViolation("bootstrap needs at least one dataset")
    cfg = cfg if isinstance(cfg, BootstrapConfig) else BootstrapConfig(**cfg)
    point = np.asarray(statistic([ds.frequencies()[None] for ds in datasets]))[0]
    rng = make_rng(cfg.seed, 0xB007)
    draws = []
    done = 0
    while done < cfg.resamples:
        b = min(chunk, cfg.resamples - done)
        freqs = [resample_counts(ds, b, rng) / float(ds.shots) for ds in datasets]
        draws.append(np.asarray(statistic(freqs)))
        done += b
    samples = np.concatenate(draws, axis=0)
    lo, hi = percentile_interval(samples, cfg.confidence)
    if np.ndim(point) == 0:
        return float(point), float(lo), float(hi)
    return point, lo, hi


# ---------------------------------------------------------------------------
# Path pipeline
# ---------------------------------------------------------------------------

AGGREGATES = ("zero_state", "largest", "mean")


@dataclass
class NegativityResult:
    pair: str
    outcomes: list  # (bits, negativity, probability, ci_low, ci_high)
    values: dict  # aggregate name -> value
    ci: dict  # aggregate name -> (low, high)

    def __post_init__(self):
        for v in self.values.values():
            if not (0.0 - 1e-12 <= v <= 0.5 + 1e-12):
                raise ContractViolation(f"negativity {v} outside [0, 0.5] for pair {self.pair}")
        z, lg, mn = (self.values[a] for a in AGGREGATES)
        if not (lg >= mn - 1e-12 and lg >= z - 1e-12 and mn >= 0.0):
            raise ContractViolation(f"inconsistent aggregates for pair {self.pair}")


@dataclass
class WitnessResult:
    chain: tuple
    value: float
    ci: tuple
    significant: bool = False
    redundant: bool = False

    @property
    def label(self) -> str:
        return chain_label(self.chain)

    @property
    def length(self) -> int:
        return len(self.chain)


@dataclass
class PathAnalysis:
    path: list
    negativities: list
    witnesses: list
    verdict_aggregate: str
    fully_entangled: bool
    stabilizers: dict = field(default_factory=dict)  # vertex -> (value, low, high)
    bootstrap: BootstrapConfig | None = None


class PathPipeline:
    """Vectorised statistic for all quads and chains of one path experiment."""

    def __init__(self, path: QubitGraph, quads: Sequence[QuadSelection] | None = None):
        self.path = path
        self.quads = list(quads) if quads is not None else select_quads(path)
        self.chains = path_chains(path)
        self.index = _StabilizerIndex(path, self.quads)
        order = path.path_order()
        self.order = order
        pos = {v: i for i, v in enumerate(order)}
        # chain membership matrix: witness = (n - 1) - membership @ stabilizers
        self.membership = np.zeros((len(self.chains), len(order)))
        for ci, chain in enumerate(self.chains):
            for v in chain:
                self.membership[ci, pos[v]] = 1.0
        self.chain_offsets = np.array([len(c) - 1 for c in self.chains], dtype=float)
        self.max_outcomes = max(len(q.outcomes()) for q in self.quads)

    def __call__(self, freqs: Sequence[np.ndarray]) -> np.ndarray:
        """Flat statistic vector per resample.

        Layout: branch negativities ``(n_quads * max_outcomes)``, then
        aggregates ``(n_quads * 3)``, stabilizers ``(n_vertices)``,
        witnesses ``(n_chains)``.
        """
        exps, branch, aggs = [], [], []
        for quad, f in zip(self.quads, freqs):
            e = expectations_array(f)
            exps.append(e)
            rho = project_to_physical_array(linear_inversion_array(e))
            negs, _ = _branch_negativities(rho, quad)
            with np.errstate(all="ignore"):
                zero = negs[..., 0]
                largest = np.nanmax(negs, axis=-1)
                mean = np.nanmean(negs, axis=-1)
            pad = self.max_outcomes - negs.shape[-1]
            if pad:
                negs = np.concatenate([negs, np.full(negs.shape[:-1] + (pad,), np.nan)], axis=-1)
            branch.append(negs)
            aggs.append(np.stack([zero, largest, mean], axis=-1))
        stabs = self.index.values(exps)
        wit = self.chain_offsets - stabs @ self.membership.T
        b = stabs.shape[0]
        return np.concatenate(
            [np.stack(branch, axis=1).reshape(b, -1), np.stack(aggs, axis=1).reshape(b, -1), stabs, wit], axis=1
        )

    def branch_probabilities(self, datasets: Sequence[TomographyDataset]) -> list[np.ndarray]:
        out = []
        for quad, ds in zip(self.quads, datasets):
            rho = project_to_physical_array(linear_inversion_array(expectations_array(ds.frequencies())))
            out.append(_branch_negativities(rho, quad)[1])
        return out

    def split(self, flat: np.ndarray):
        nq, mo = len(self.quads), self.max_outcomes
        i = 0
        branch = flat[..., i:i + nq * mo].reshape(flat.shape[:-1] + (nq, mo))
        i += nq * mo
        aggs = flat[..., i:i + nq * 3].reshape(flat.shape[:-1] + (nq, 3))
        i += nq * 3
        stabs = flat[..., i:i + len(self.order)]
        i += len(self.order)
        wit = flat[..., i:]
        return branch, aggs, stabs, wit


def match_datasets(quads: Sequence[QuadSelection], datasets: Sequence[TomographyDataset]) -> list[TomographyDataset]:
    """Order datasets by quad; raises :class:`CoverageError` naming missing quads."""
    by_targets = {tuple(ds.targets): ds for ds in datasets}
    missing = [q.label for q in quads if tuple(q.targets) not in by_targets]
    if missing:
        raise CoverageError("no dataset for quad(s) " + ", ".join(missing))
    return [by_targets[tuple(q.targets)] for q in quads]


def mark_redundant(witnesses: Sequence[WitnessResult]) -> None:
    """Flag every proper sub-chain of a significantly negative chain."""
    sig = [set(w.chain) for w in witnesses if w.significant]
    for w in witnesses:
        s = set(w.chain)
        w.redundant = any(s < other for other in sig)


def analyze_path(
    path: QubitGraph,
    datasets: Sequence[TomographyDataset],
    cfg: BootstrapConfig | None = None,
    verdict_aggregate: str = "zero_state",
) -> PathAnalysis:
    """Negativities, witnesses and bootstrap intervals for a path experiment."""
    if verdict_aggregate not in AGGREGATES:
        raise ContractViolation(f"verdict aggregate must be one of {AGGREGATES}")
    cfg = cfg or BootstrapConfig()
    pipe = PathPipeline(path)
    datasets = match_datasets(pipe.quads, datasets)
    point, lo, hi = bootstrap_ci(datasets, pipe, cfg)
    pb, pa, ps, pw = pipe.split(point)
    lb, la, ls, lw = pipe.split(lo)
    hb, ha, hs, hw = pipe.split(hi)
    probs = pipe.branch_probabilities(datasets)

    negs = []
    for qi, quad in enumerate(pipe.quads):
        outs = []
        for oi, m in enumerate(quad.outcomes()):
            if np.isnan(pb[qi, oi]):
                continue
            outs.append(("".join(map(str, m)), float(pb[qi, oi]), float(probs[qi][oi]),
                         float(lb[qi, oi]), float(hb[qi, oi])))
        values = {a: float(pa[qi, j]) for j, a in enumerate(AGGREGATES)}
        ci = {a: (float(la[qi, j]), float(ha[qi, j])) for j, a in enumerate(AGGREGATES)}
        negs.append(NegativityResult(quad.label, outs, values, ci))

    wits = []
    for ci_, chain in enumerate(pipe.chains):
        w = WitnessResult(chain, float(pw[ci_]), (float(lw[ci_]), float(hw[ci_])))
        w.significant = bool(w.ci[1] < 0.0)
        wits.append(w)
    mark_redundant(wits)

    stabs = {v: (float(ps[i]), float(ls[i]), float(hs[i])) for i, v in enumerate(pipe.order)}
    verdict = all(n.ci[verdict_aggregate][0] > 0.0 for n in negs)
    return PathAnalysis(pipe.order, negs, wits, verdict_aggregate, verdict, stabs, cfg)
