"""Exact and noisy execution of graph-state circuits.

Three routes are provided:

* :func:`run_statevector` - exact pure-state evolution, up to 20 qubits.
* :func:`run_density` - exact mixed-state evolution with depolarizing
  channels after every gate, up to 10 qubits.
* :func:`run_trajectories` - shot sampling.  Every supported gate is
  Clifford, so a sampled Pauli error can be pushed to the end of the
  circuit and turned into bit flips on the ideal outcome distribution.
  This is exact for Pauli channels and costs one statevector per circuit
  instead of one per shot.

Depolarizing convention: with probability ``p`` the gate's support is
replaced by the maximally mixed state, i.e. a uniformly random Pauli from
all ``4**k`` (identity included) is applied.  ``p = 1`` therefore fully
depolarizes the support.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ContractViolation
from .graphstate import Circuit, Gate
from .linalg import DensityMatrix, StateVector

MAX_STATEVECTOR_QUBITS = 20
MAX_DENSITY_QUBITS = 10

_SQ2 = 1.0 / np.sqrt(2.0)
GATE_MATRICES = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.diag([1.0, 1j]),
    "SDG": np.diag([1.0, -1j]),
    "CZ": np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}
# readout rotations: measuring X is H then Z; measuring Y is S-dagger, then H, then Z
BASIS_ROTATIONS = {
    "Z": np.eye(2, dtype=complex),
    "X": GATE_MATRICES["H"],
    "Y": GATE_MATRICES["H"] @ GATE_MATRICES["SDG"],
}


@dataclass(frozen=True)
class NoiseModel:
    """Phenomenological hardware noise: per-gate depolarizing plus readout flips.

    ``readout_flip`` is ``(P(read 1 | state 0), P(read 0 | state 1))``.
    """

    p1: float = 0.0
    p2: float = 0.0
    readout_flip: tuple = (0.0, 0.0)

    def __post_init__(self):
        ro = tuple(float(r) for r in self.readout_flip)
        object.__setattr__(self, "readout_flip", ro)
        object.__setattr__(self, "p1", float(self.p1))
        object.__setattr__(self, "p2", float(self.p2))
        if len(ro) != 2:
            raise ContractViolation("readout_flip needs exactly two probabilities")
        for name, v in (("p1", self.p1), ("p2", self.p2), ("readout P(1|0)", ro[0]), ("readout P(0|1)", ro[1])):
            if not 0.0 <= v <= 1.0:
                raise ContractViolation(f"noise probability {name}={v} outside [0, 1]")

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def default(cls) -> "NoiseModel":
        # illustrative values, not a device characterisation
        return cls(p1=0.001, p2=0.032, readout_flip=(0.03, 0.03))

    @property
    def is_ideal(self) -> bool:
        return self.p1 == 0 and self.p2 == 0 and self.readout_flip == (0.0, 0.0)

    def gate_probability(self, gate: Gate) -> float:
        return self.p1 if len(gate.qubits) == 1 else self.p2


@dataclass(frozen=True)
class ShotPlan:
    shots: int = 2048
    seed: int = 0

    def __post_init__(self):
        if int(self.shots) < 1:
            raise ContractViolation(f"shots must be >= 1, got {self.shots}")
        if not 0 <= int(self.seed) < 2**64:
            raise ContractViolation("seed must be a non-negative 64-bit integer")


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the stream named by ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass(frozen=True, eq=False)
class OutcomeHistogram:
    """Counts over bitstrings of ``qubits`` (first qubit = leftmost bit)."""

    qubits: tuple
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (1 << len(self.qubits),):
            raise ContractViolation(f"histogram over {len(self.qubits)} qubits needs {1 << len(self.qubits)} bins")
        if np.any(c < 0):
            raise ContractViolation("negative counts")
        object.__setattr__(self, "qubits", tuple(self.qubits))
        object.__setattr__(self, "counts", c)

    @property
    def shots(self) -> int:
        return int(round(float(np.sum(self.counts))))

    def as_dict(self) -> dict[str, int]:
        k = len(self.qubits)
        return {format(i, f"0{k}b"): int(v) for i, v in enumerate(self.counts) if v}

    @classmethod
    def from_dict(cls, qubits: Sequence, counts: dict) -> "OutcomeHistogram":
        k = len(qubits)
        arr = np.zeros(1 << k, dtype=np.int64)
        for bits, v in counts.items():
            if len(bits) != k or set(bits) - {"0", "1"}:
                raise ContractViolation(f"bitstring {bits!r} does not match {k} qubits")
            arr[int(bits, 2)] += int(v)
        return cls(tuple(qubits), arr)

    def marginal(self, keep: Sequence) -> "OutcomeHistogram":
        pos = [self.qubits.index(q) for q in keep]
        k = len(self.qubits)
        t = self.counts.reshape((2,) * k)
        drop = tuple(i for i in range(k) if i not in pos)
        m = t.sum(axis=drop) if drop else t
        order = np.argsort(np.argsort(pos)) if pos else []
        m = np.transpose(m, order) if len(pos) > 1 else m
        return OutcomeHistogram(tuple(keep), np.asarray(m).reshape(-1))


# ---------------------------------------------------------------------------
# Exact evolution
# ---------------------------------------------------------------------------

def _apply(t: np.ndarray, u: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _check_clifford(c: Circuit):
    for g in c.unitary_gates():
        if g.name not in GATE_MATRICES:
            raise ContractViolation(f"unsupported gate {g.name}")


def run_statevector(c: Circuit) -> StateVector:
    """Evolve ``|0...0>`` through the unitary part of ``c``."""
    n = c.n_qubits
    if n > MAX_STATEVECTOR_QUBITS:
        raise ContractViolation(f"{n} qubits exceeds the statevector limit of {MAX_STATEVECTOR_QUBITS}")
    _check_clifford(c)
    pos = {q: i for i, q in enumerate(c.qubits)}
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for g in c.unitary_gates():
        psi = _apply(psi, GATE_MATRICES[g.name], [pos[q] for q in g.qubits])
    psi = psi.reshape(-1)
    return StateVector(psi / np.linalg.norm(psi), c.qubits)


def _depolarize(t: np.ndarray, n: int, axes: Sequence[int], p: float) -> np.ndarray:
    if p == 0.0:
        return t
    k = len(axes)
    rows = list(axes)
    cols = [n + a for a in axes]
    moved = np.moveaxis(t, rows + cols, list(range(2 * n - 2 * k, 2 * n)))
    shape = moved.shape
    d = 1 << k
    flat = moved.reshape(shape[: 2 * n - 2 * k] + (d, d))
    tr = np.trace(flat, axis1=-2, axis2=-1)
    mixed = tr[..., None, None] * (np.eye(d) / d)
    flat = (1.0 - p) * flat + p * mixed
    return np.moveaxis(flat.reshape(shape), list(range(2 * n - 2 * k, 2 * n)), rows + cols)


def run_density(c: Circuit, nm: NoiseModel | None = None) -> DensityMatrix:
    """Mixed-state evolution from ``|0...0>`` with a depolarizing channel after each gate."""
    nm = nm or NoiseModel()
    n = c.n_qubits
    if n > MAX_DENSITY_QUBITS:
        raise ContractViolation(f"{n} qubits exceeds the density-matrix limit of {MAX_DENSITY_QUBITS}")
    _check_clifford(c)
    pos = {q: i for i, q in enumerate(c.qubits)}
    rho = np.zeros((2,) * (2 * n), dtype=complex)
    rho[(0,) * (2 * n)] = 1.0
    for g in c.unitary_gates():
        u = GATE_MATRICES[g.name]
        axes = [pos[q] for q in g.qubits]
        rho = _apply(rho, u, axes)
        rho = _apply(rho, u.conj(), [n + a for a in axes])
        rho = _depolarize(rho, n, axes, nm.gate_probability(g))
    m = rho.reshape(1 << n, 1 << n)
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(m / np.trace(m).real, c.qubits)


def measurement_probabilities(rho, basis: str, readout_flip: tuple = (0.0, 0.0)) -> np.ndarray:
    """Outcome distribution of measuring every qubit of ``rho`` in ``basis``.

    ``rho`` may be a :class:`DensityMatrix` or a stack ``(..., d, d)``.
    Readout flips are applied independently per qubit after the ideal
    measurement.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    k = len(basis)
    u = np.ones((1, 1), dtype=complex)
    for b in basis:
        u = np.kron(u, BASIS_ROTATIONS[b])
    rot = u @ m @ u.conj().T
    probs = np.real(np.diagonal(rot, axis1=-2, axis2=-1)).copy()
    ro0, ro1 = readout_flip
    if ro0 or ro1:
        conf = np.array([[1.0 - ro0, ro1], [ro0, 1.0 - ro1]])
        batch = probs.shape[:-1]
        t = probs.reshape(batch + (2,) * k)
        nb = len(batch)
        for q in range(k):
            t = np.moveaxis(np.tensordot(conf, t, axes=([1], [nb + q])), 0, nb + q)
        probs = t.reshape(batch + (1 << k,))
    return np.clip(probs, 0.0, None)


# ---------------------------------------------------------------------------
# Pauli-frame sampling
# ---------------------------------------------------------------------------

def _propagate(x: int, z: int, gates: Sequence[tuple]) -> tuple[int, int]:
    """Conjugate the Pauli X^x Z^z (bitmasks over qubit positions) through gates."""
    for name, qs in gates:
        if name == "H":
            (a,) = qs
            xa, za = (x >> a) & 1, (z >> a) & 1
            if xa != za:
                x ^= 1 << a
                z ^= 1 << a
        elif name in ("S", "SDG"):
            (a,) = qs
            if (x >> a) & 1:
                z ^= 1 << a
        elif name == "CNOT":
            c, t = qs
            if (x >> c) & 1:
                x ^= 1 << t
            if (z >> t) & 1:
                z ^= 1 << c
        elif name == "CZ":
            a, b = qs
            xa, xb = (x >> a) & 1, (x >> b) & 1
            if xb:
                z ^= 1 << a
            if xa:
                z ^= 1 << b
    return x, z


class PauliFrameSampler:
    """Noisy shot sampler for Clifford circuits.

    Precomputes the ideal output state and, for every noise location, the
    end-of-circuit image of each Pauli error on that gate's support.
    """

    def __init__(self, circuit: Circuit, noise: NoiseModel | None = None):
        self.circuit = circuit
        self.noise = noise or NoiseModel()
        n = circuit.n_qubits
        if n > MAX_STATEVECTOR_QUBITS:
            raise ContractViolation(f"{n} qubits exceeds the statevector limit of {MAX_STATEVECTOR_QUBITS}")
        _check_clifford(circuit)
        self._pos = {q: i for i, q in enumerate(circuit.qubits)}
        gates = [(g.name, tuple(self._pos[q] for q in g.qubits)) for g in circuit.unitary_gates()]
        probs, tx, tz = [], [], []
        for i, (gate, (name, qs)) in enumerate(zip(circuit.unitary_gates(), gates)):
            p = self.noise.gate_probability(gate)
            if p == 0.0:
                continue
            rest = gates[i + 1:]
            k = len(qs)
            xs, zs = [], []
            for idx in range(4 ** k):
                x = z = 0
                for j, a in enumerate(qs):
                    code = (idx >> (2 * (k - 1 - j))) & 3  # 0=I 1=X 2=Z 3=Y
                    if code & 1:
                        x |= 1 << a
                    if code & 2:
                        z |= 1 << a
                px, pz = _propagate(x, z, rest)
                xs.append(px)
                zs.append(pz)
            probs.append(p)
            tx.append(np.array(xs, dtype=np.int64))
            tz.append(np.array(zs, dtype=np.int64))
        self._loc_p = probs
        self._loc_x = tx
        self._loc_z = tz
        self._reduced: dict[tuple, np.ndarray] = {}
        self._noisy_reduced: dict[tuple, DensityMatrix] = {}

    @property
    def n_locations(self) -> int:
        return len(self._loc_p)

    @cached_property
    def ideal_state(self) -> StateVector:
        return run_statevector(self.circuit)

    def ideal_reduced(self, targets: Sequence) -> np.ndarray:
        key = tuple(targets)
        if key not in self._reduced:
            self._reduced[key] = self.ideal_state.reduced(key).matrix
        return self._reduced[key]

    def sample_frames(self, shots: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Accumulated end-of-circuit Pauli frame (x, z bitmasks) for each shot."""
        fx = np.zeros(shots, dtype=np.int64)
        fz = np.zeros(shots, dtype=np.int64)
        for p, tx, tz in zip(self._loc_p, self._loc_x, self._loc_z):
            hit = rng.random(shots) < p
            rows = np.flatnonzero(hit)
            if rows.size == 0:
                continue
            idx = rng.integers(0, tx.size, size=rows.size)
            fx[rows] ^= tx[idx]
            fz[rows] ^= tz[idx]
        return fx, fz

    def sample(self, targets: Sequence, basis: str, shots: int, rng: np.random.Generator) -> OutcomeHistogram:
        """Histogram of ``shots`` noisy measurements of ``targets`` in ``basis``."""
        targets = tuple(targets)
        k = len(targets)
        if len(basis) != k or set(basis) - set("XYZ"):
            raise ContractViolation(f"basis {basis!r} does not match {k} targets")
        probs = measurement_probabilities(self.ideal_reduced(targets), basis)
        cdf = np.cumsum(probs)
        cdf /= cdf[-1]
        ideal = np.minimum(np.searchsorted(cdf, rng.random(shots), side="right"), probs.size - 1)
        fx, fz = self.sample_frames(shots, rng)
        flips = np.zeros(shots, dtype=np.int64)
        for j, (q, b) in enumerate(zip(targets, basis)):
            a = self._pos[q]
            xb = (fx >> a) & 1
            zb = (fz >> a) & 1
            bit = {"Z": xb, "X": zb, "Y": xb ^ zb}[b]
            flips |= bit << (k - 1 - j)
        outcome = ideal ^ flips
        ro0, ro1 = self.noise.readout_flip
        if ro0 or ro1:
            u = rng.random((shots, k))
            ro = np.zeros(shots, dtype=np.int64)
            for j in range(k):
                sh = k - 1 - j
                bit = (outcome >> sh) & 1
                thresh = np.where(bit == 1, ro1, ro0)
                ro |= (u[:, j] < thresh).astype(np.int64) << sh
            outcome ^= ro
        return OutcomeHistogram(targets, np.bincount(outcome, minlength=1 << k).astype(np.int64))

    def probabilities(self, targets: Sequence, basis: str) -> np.ndarray:
        """Exact outcome distribution, readout flips included."""
        if self.n_locations == 0:
            rho = self.ideal_reduced(targets)
        else:
            rho = self.reduced_state(targets).matrix
        return measurement_probabilities(rho, basis, self.noise.readout_flip)

    def reduced_state(self, targets: Sequence) -> DensityMatrix:
        """Exact noisy reduced state of ``targets`` (readout excluded).

        Mixes the ideal reduced state over the exact distribution of the
        Pauli frame restricted to the targets.
        """
        targets = tuple(targets)
        if targets in self._noisy_reduced:
            return self._noisy_reduced[targets]
        k = len(targets)
        apos = [self._pos[q] for q in targets]

        def restrict(x, z):
            code = 0
            for j, a in enumerate(apos):
                code |= ((x >> a) & 1) << (2 * (k - 1 - j))
                code |= ((z >> a) & 1) << (2 * (k - 1 - j) + 1)
            return code

        dist = np.zeros(4 ** k)
        dist[0] = 1.0
        codes_all = np.arange(4 ** k)
        for p, tx, tz in zip(self._loc_p, self._loc_x, self._loc_z):
            new = (1.0 - p) * dist
            w = p / tx.size
            for x, z in zip(tx, tz):
                new += w * dist[codes_all ^ restrict(int(x), int(z))]
            dist = new
        rho_t = self.ideal_reduced(targets)
        out = np.zeros_like(rho_t)
        for code in np.flatnonzero(dist > 0):
            pm = _frame_matrix(int(code), k)
            out += dist[code] * (pm @ rho_t @ pm.conj().T)
        out = 0.5 * (out + out.conj().T)
        rho = DensityMatrix(out / np.trace(out).real, targets)
        self._noisy_reduced[targets] = rho
        return rho


def _frame_matrix(code: int, k: int) -> np.ndarray:
    x1 = np.array([[0, 1], [1, 0]], dtype=complex)
    z1 = np.diag([1.0, -1.0]).astype(complex)
    m = np.ones((1, 1), dtype=complex)
    for j in range(k):
        c = (code >> (2 * (k - 1 - j))) & 3
        op = np.eye(2, dtype=complex)
        if c & 1:
            op = x1 @ op
        if c & 2:
            op = z1 @ op
        m = np.kron(m, op)
    return m


def run_trajectories(
    c: Circuit,
    nm: NoiseModel | None,
    plan: ShotPlan,
    basis: str | dict,
    targets: Sequence | None = None,
) -> OutcomeHistogram:
    """Sample ``plan.shots`` noisy shots measuring ``targets`` (default: all qubits).

    ``basis`` is one letter per target, as a string or a ``{qubit: letter}``
    mapping.  Deterministic for a fixed ``plan.seed``.
    """
    targets = tuple(c.qubits if targets is None else targets)
    if isinstance(basis, dict):
        basis = "".join(basis[q] for q in targets)
    sampler = PauliFrameSampler(c, nm)
    return sampler.sample(targets, basis, int(plan.shots), make_rng(plan.seed))
