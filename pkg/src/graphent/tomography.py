"""Pauli-basis state tomography of small qubit groups.

Data flow::

    generate_settings -> counts per setting -> estimate_expectations
        -> linear_inversion -> project_to_physical

The ``*_array`` kernels operate on stacked inputs so the bootstrap can push
hundreds of resamples through the pipeline at once.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractViolation, CoverageError, ValidationError
from .graphstate import pauli_matrix
from .linalg import DensityMatrix, eig_hermitian, max_asymmetry
from .simulator import (
    OutcomeHistogram,
    ShotPlan,
    make_rng,
    measurement_probabilities,
)

MAX_TOMOGRAPHY_QUBITS = 6
_VALUE_TOL = 1e-9


def _check_k(k: int):
    if not 1 <= k <= MAX_TOMOGRAPHY_QUBITS:
        raise ContractViolation(f"tomography supports 1..{MAX_TOMOGRAPHY_QUBITS} qubits, got {k}")


@lru_cache(maxsize=None)
def _settings(k: int) -> tuple[str, ...]:
    return tuple("".join(s) for s in itertools.product("XYZ", repeat=k))


def generate_settings(k: int) -> list[str]:
    """All ``3**k`` X/Y/Z measurement settings in lexicographic order."""
    _check_k(k)
    return list(_settings(k))


@lru_cache(maxsize=None)
def pauli_labels(k: int) -> tuple[str, ...]:
    """Non-identity k-letter Pauli strings, lexicographic over I < X < Y < Z."""
    return tuple("".join(s) for s in itertools.product("IXYZ", repeat=k))[1:]


@lru_cache(maxsize=None)
def _estimator(k: int) -> np.ndarray:
    """Weights ``W[p, s, o]`` with ``<P_p> = sum_{s,o} W[p,s,o] * freq[s,o]``."""
    settings = _settings(k)
    labels = pauli_labels(k)
    d = 1 << k
    outcomes = np.arange(d)
    w = np.zeros((len(labels), len(settings), d))
    for pi, lab in enumerate(labels):
        live = [j for j, c in enumerate(lab) if c != "I"]
        mask = sum(1 << (k - 1 - j) for j in live)
        parity = np.array([bin(o & mask).count("1") & 1 for o in outcomes])
        sign = 1.0 - 2.0 * parity
        match = [si for si, s in enumerate(settings) if all(s[j] == lab[j] for j in live)]
        for si in match:
            w[pi, si] = sign / len(match)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def _pauli_stack(k: int) -> np.ndarray:
    """Matrices of ``I..I`` followed by :func:`pauli_labels` order."""
    mats = np.stack([pauli_matrix("I" * k)] + [pauli_matrix(lab) for lab in pauli_labels(k)])
    mats.setflags(write=False)
    return mats


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TomographyDataset:
    """Counts for every measurement setting of a k-qubit tomography job.

    ``counts[s, o]`` is indexed by setting (``generate_settings`` order) and
    outcome (targets[0] is the leftmost bit).  ``exact=True`` datasets hold
    expected counts ``shots * probability`` and cannot be serialised.
    """

    targets: tuple
    shots: int
    counts: np.ndarray = field(repr=False)
    exact: bool = False

    def __post_init__(self):
        targets = tuple(self.targets)
        k = len(targets)
        _check_k(k)
        if len(set(targets)) != k:
            raise ValidationError("dataset targets must be distinct")
        shots = int(self.shots)
        if shots < 1:
            raise ValidationError("dataset shots must be positive")
        c = np.asarray(self.counts, dtype=float if self.exact else np.int64)
        if c.shape != (3 ** k, 1 << k):
            raise ValidationError(f"counts must have shape {(3 ** k, 1 << k)}, got {c.shape}")
        if np.any(c < 0):
            raise ValidationError("counts must be non-negative")
        sums = c.sum(axis=1)
        if self.exact:
            bad = np.flatnonzero(np.abs(sums - shots) > 1e-9 * shots)
        else:
            bad = np.flatnonzero(sums != shots)
        if bad.size:
            s = generate_settings(k)[bad[0]]
            raise ValidationError(f"setting {s}: histogram sums to {sums[bad[0]]:g}, expected {shots}")
        c.setflags(write=False)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "shots", shots)
        object.__setattr__(self, "counts", c)

    @property
    def k(self) -> int:
        return len(self.targets)

    @property
    def settings(self) -> list[str]:
        return generate_settings(self.k)

    def frequencies(self) -> np.ndarray:
        return self.counts / float(self.shots)

    def histogram(self, setting: str) -> dict[str, int]:
        row = self.counts[self.settings.index(setting)]
        return {format(o, f"0{self.k}b"): int(v) for o, v in enumerate(row) if v}

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        if self.exact:
            raise ValidationError("exact-probability datasets have no count serialisation")
        return {
            "targets": list(self.targets),
            "shots": self.shots,
            "counts": {s: self.histogram(s) for s in self.settings},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False, separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, doc, source: str = "<dataset>") -> "TomographyDataset":
        if not isinstance(doc, dict):
            raise ValidationError(f"{source}: top level must be an object")
        for key in ("targets", "shots", "counts"):
            if key not in doc:
                raise ValidationError(f"{source}: missing field '{key}'")
        targets = doc["targets"]
        if not isinstance(targets, list) or not targets:
            raise ValidationError(f"{source}: field 'targets' must be a nonempty list")
        k = len(targets)
        if not 1 <= k <= MAX_TOMOGRAPHY_QUBITS:
            raise ValidationError(f"{source}: field 'targets' has {k} qubits (1..{MAX_TOMOGRAPHY_QUBITS} allowed)")
        shots = doc["shots"]
        if not isinstance(shots, int) or isinstance(shots, bool) or shots < 1:
            raise ValidationError(f"{source}: field 'shots' must be a positive integer")
        counts = doc["counts"]
        if not isinstance(counts, dict):
            raise ValidationError(f"{source}: field 'counts' must be an object")
        settings = generate_settings(k)
        unknown = sorted(set(counts) - set(settings))
        if unknown:
            raise ValidationError(f"{source}: counts.{unknown[0]}: not a {k}-qubit X/Y/Z setting")
        missing = [s for s in settings if s not in counts]
        if missing:
            shown = ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else "")
            raise ValidationError(f"{source}: missing setting(s) {shown}")
        arr = np.zeros((len(settings), 1 << k), dtype=np.int64)
        for si, s in enumerate(settings):
            hist = counts[s]
            if not isinstance(hist, dict) or not hist:
                raise ValidationError(f"{source}: counts.{s}: histogram must be a nonempty object")
            for bits, v in hist.items():
                if len(bits) != k or set(bits) - {"0", "1"}:
                    raise ValidationError(f"{source}: counts.{s}.{bits}: bitstring must have {k} binary digits")
                if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                    raise ValidationError(f"{source}: counts.{s}.{bits}: count must be a non-negative integer")
                arr[si, int(bits, 2)] += v
            total = int(arr[si].sum())
            if total != shots:
                raise ValidationError(f"{source}: counts.{s}: histogram sums to {total}, expected shots={shots}")
        return cls(tuple(targets), shots, arr)

    @classmethod
    def load(cls, path) -> "TomographyDataset":
        text = Path(path).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(doc, str(path))


@dataclass(frozen=True, eq=False)
class ExpectationTable:
    """Estimated ``<P>`` for every non-identity Pauli string on the targets."""

    targets: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        k = len(self.targets)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (4 ** k - 1,):
            raise ContractViolation(f"expectation table for {k} qubits needs {4 ** k - 1} entries")
        if np.any(np.abs(v) > 1.0 + _VALUE_TOL):
            bad = int(np.argmax(np.abs(v)))
            raise ContractViolation(f"<{pauli_labels(k)[bad]}> = {v[bad]} outside [-1, 1]")
        v = np.clip(v, -1.0, 1.0)
        v.setflags(write=False)
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "values", v)

    @property
    def labels(self) -> tuple[str, ...]:
        return pauli_labels(len(self.targets))

    def __getitem__(self, label: str) -> float:
        return float(self.values[self.labels.index(label)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.values.tolist()))

    @classmethod
    def from_dict(cls, targets: Sequence, values: Mapping[str, float]) -> "ExpectationTable":
        labels = pauli_labels(len(targets))
        missing = [lab for lab in labels if lab not in values]
        if missing:
            raise CoverageError(f"expectation table missing {missing[0]}")
        return cls(tuple(targets), np.array([values[lab] for lab in labels]))


# ---------------------------------------------------------------------------
# Batched kernels
# ---------------------------------------------------------------------------

def expectations_array(freqs: np.ndarray) -> np.ndarray:
    """``(..., 3**k, 2**k)`` frequencies -> ``(..., 4**k - 1)`` expectations."""
    freqs = np.asarray(freqs, dtype=float)
    k = freqs.shape[-1].bit_length() - 1
    w = _estimator(k)
    return np.tensordot(freqs, w, axes=([-2, -1], [1, 2]))


def linear_inversion_array(values: np.ndarray) -> np.ndarray:
    """``(..., 4**k - 1)`` expectations -> ``(..., 2**k, 2**k)`` raw estimates."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1] + 1
    k = (n.bit_length() - 1) // 2
    coeff = np.concatenate([np.ones(values.shape[:-1] + (1,)), values], axis=-1)
    return np.tensordot(coeff, _pauli_stack(k), axes=([-1], [0])) / float(1 << k)


def project_eigenvalues(mu: np.ndarray, target_trace: float = 1.0) -> np.ndarray:
    """Closest non-negative spectrum summing to ``target_trace`` (ascending input).

    Walks the eigenvalues from the smallest, zeroing any that would stay
    negative after the accumulated deficit is shared evenly among the
    larger ones, and then adds that share to the survivors.
    """
    mu = np.asarray(mu, dtype=float)
    d = mu.shape[-1]
    acc = target_trace - mu.sum(axis=-1)
    scanning = np.ones(mu.shape[:-1], dtype=bool)
    first = np.zeros(mu.shape[:-1], dtype=int)
    for j in range(d - 1):
        drop = scanning & (mu[..., j] + acc / (d - j) < 0.0)
        acc = np.where(drop, acc + mu[..., j], acc)
        first = np.where(drop, j + 1, first)
        scanning &= drop
    share = acc / (d - first)
    idx = np.arange(d)
    return np.where(idx >= first[..., None], mu + share[..., None], 0.0)


def project_to_physical_array(m: np.ndarray) -> np.ndarray:
    """Nearest (Frobenius) PSD trace-one matrices to a stack of Hermitian inputs."""
    w, v = eig_hermitian(m)
    lam = project_eigenvalues(w)
    out = (v * lam[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def estimate_expectations(ds: TomographyDataset) -> ExpectationTable:
    """Pauli expectations from counts, averaging every compatible setting.

    A string with identities on some targets is estimated from the
    marginal parity of each setting that agrees on the remaining targets.
    """
    if np.any(ds.counts.sum(axis=1) == 0):
        raise ValidationError("empty histogram in dataset")
    return ExpectationTable(ds.targets, expectations_array(ds.frequencies()))


def linear_inversion(et: ExpectationTable) -> np.ndarray:
    """``2**-k (I + sum_P <P> P)``: Hermitian, trace one, possibly not PSD."""
    return linear_inversion_array(et.values)


def project_to_physical(m, labels: Sequence | None = None) -> DensityMatrix:
    """Closest density matrix to ``m`` in Frobenius norm."""
    m = np.asarray(m, dtype=complex)
    asym = max_asymmetry(m)
    if asym > 1e-8:
        raise ContractViolation(f"project_to_physical needs a Hermitian input (max asymmetry {asym:.3e})")
    tr = np.trace(m)
    if abs(tr - 1.0) > 1e-6:
        raise ContractViolation(f"project_to_physical needs trace 1 within 1e-6, got {tr.real:.9f}")
    return DensityMatrix(project_to_physical_array(m), tuple(labels) if labels else ())


class StateSource:
    """Measurement source backed by a known density matrix on the targets."""

    def __init__(self, rho: DensityMatrix, readout_flip: tuple = (0.0, 0.0)):
        self.rho = rho
        self.readout_flip = tuple(readout_flip)

    def probabilities(self, targets: Sequence, basis: str) -> np.ndarray:
        if tuple(targets) != self.rho.qubit_labels:
            pos = [self.rho.position(q) for q in targets]
            if sorted(pos) != list(range(self.rho.n_qubits)):
                raise ContractViolation("StateSource targets must cover the state's qubits")
            n = self.rho.n_qubits
            t = self.rho.matrix.reshape((2,) * (2 * n)).transpose(pos + [n + p for p in pos])
            m = t.reshape(self.rho.dim, self.rho.dim)
        else:
            m = self.rho.matrix
        return measurement_probabilities(m, basis, self.readout_flip)

    def sample(self, targets, basis, shots, rng) -> OutcomeHistogram:
        p = self.probabilities(targets, basis)
        cdf = np.cumsum(p)
        cdf /= cdf[-1]
        idx = np.minimum(np.searchsorted(cdf, rng.random(shots), side="right"), p.size - 1)
        return OutcomeHistogram(tuple(targets), np.bincount(idx, minlength=p.size))


def collect_dataset(
    source,
    targets: Sequence,
    plan: ShotPlan,
    exact: bool = False,
    stream: Sequence[int] = (),
) -> TomographyDataset:
    """Acquire counts for every setting on ``targets``.

    ``source`` is a :class:`PauliFrameSampler` (circuit-level noisy
    sampling) or a :class:`StateSource`.  Setting ``s`` draws from the
    generator named ``(plan.seed, *stream, s)``.  With ``exact=True`` the
    dataset holds expected counts instead of samples.
    """
    targets = tuple(targets)
    rows = []
    for si, s in enumerate(generate_settings(len(targets))):
        if exact:
            rows.append(plan.shots * source.probabilities(targets, s))
        else:
            rows.append(source.sample(targets, s, plan.shots, make_rng(plan.seed, *stream, si)).counts)
    return TomographyDataset(targets, plan.shots, np.array(rows), exact=exact)


def reconstruct(ds: TomographyDataset) -> DensityMatrix:
    raw = linear_inversion(estimate_expectations(ds))
    return project_to_physical(raw, ds.targets)


def tomograph(source, targets: Sequence, plan: ShotPlan, exact: bool = False) -> DensityMatrix:
    """Full tomography of ``targets``: counts, expectations, inversion, projection."""
    if len(targets) > MAX_TOMOGRAPHY_QUBITS:
        raise ContractViolation(f"at most {MAX_TOMOGRAPHY_QUBITS} tomography targets")
    return reconstruct(collect_dataset(source, targets, plan, exact=exact))
