"""Dense complex linear algebra for small qubit registers.

Conventions used throughout the package:

* A k-qubit operator is a ``(2**k, 2**k)`` complex ndarray.  Batched kernels
  accept any leading shape ``(..., d, d)``.
* Qubit position 0 is the most-significant bit of a basis-state index, so
  ``tensor(a, b)`` puts ``a`` on qubit 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation, UnreachableBranch

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-8
EIG_INPUT_TOL = 1e-8
BRANCH_TOL = 1e-12

_JACOBI_RTOL = 1e-12
_JACOBI_SKIP = 1e-15
_JACOBI_MAX_SWEEPS = 60


def n_qubits_of(dim: int) -> int:
    k = int(dim).bit_length() - 1
    if dim < 1 or 1 << k != dim:
        raise ContractViolation(f"dimension {dim} is not a power of two")
    return k


def max_asymmetry(m: np.ndarray) -> float:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2)))))


# ---------------------------------------------------------------------------
# Hermitian eigensolver
# ---------------------------------------------------------------------------

def _round_robin(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: m-1 rounds of m/2 disjoint index pairs."""
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        half = m // 2
        p = np.array([min(players[i], players[m - 1 - i]) for i in range(half)])
        q = np.array([max(players[i], players[m - 1 - i]) for i in range(half)])
        rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def eig_hermitian(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix (or a stack of them).

    Cyclic complex Jacobi: each sweep visits every off-diagonal pair once,
    in round-robin order so that the d/2 rotations of a round are disjoint
    and can be applied together.  Iterates until the off-diagonal Frobenius
    mass of every matrix in the batch is below ``1e-12 * ||M||_F``.

    Parameters
    ----------
    m : array_like, shape (..., d, d)
        Hermitian to within ``1e-8`` (entrywise).

    Returns
    -------
    eigenvalues : ndarray, shape (..., d)
        Real, ascending.
    eigenvectors : ndarray, shape (..., d, d)
        Unitary; column ``i`` pairs with ``eigenvalues[..., i]``.
    """
    a = np.array(m, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ContractViolation(f"expected square matrices, got shape {a.shape}")
    asym = max_asymmetry(a)
    if asym > EIG_INPUT_TOL:
        raise ContractViolation(f"matrix is not Hermitian: max |M - M^H| = {asym:.3e}")

    batch_shape = a.shape[:-2]
    d = a.shape[-1]
    a = a.reshape((-1, d, d))
    a = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    nb = a.shape[0]
    v = np.broadcast_to(np.eye(d, dtype=complex), (nb, d, d)).copy()

    if d > 1 and nb > 0:
        # odd sizes get a phantom index that never rotates
        mm = d + (d % 2)
        rounds = []
        for p, q in _round_robin(mm):
            keep = q < d
            rounds.append((p[keep], q[keep]))
        scale = np.linalg.norm(a, axis=(1, 2))
        off_mask = ~np.eye(d, dtype=bool)
        rows = np.arange(nb)[:, None]
        for _sweep in range(_JACOBI_MAX_SWEEPS):
            off = np.sqrt(np.sum(np.abs(a[:, off_mask]) ** 2, axis=1))
            if np.all(off <= _JACOBI_RTOL * scale):
                break
            for p, q in rounds:
                app = a[:, p, p].real
                aqq = a[:, q, q].real
                apq = a[:, p, q]
                r = np.abs(apq)
                # entries this small are below the stopping test anyway; rotating
                # them would overflow tau, so they are simply dropped
                live = r > _JACOBI_SKIP * scale[:, None]
                r_safe = np.where(live, r, 1.0)
                tau = (aqq - app) / (2.0 * r_safe)
                sgn = np.where(tau >= 0.0, 1.0, -1.0)
                t = np.where(live, sgn / (np.abs(tau) + np.hypot(1.0, tau)), 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ph = np.where(live, apq / r_safe, 1.0)
                # U = [[c, s], [-s conj(ph), c conj(ph)]] on the (p, q) block
                u_pp = c
                u_pq = s
                u_qp = -s * np.conj(ph)
                u_qq = c * np.conj(ph)

                col_p = a[:, :, p]
                col_q = a[:, :, q]
                a[:, :, p] = col_p * u_pp[:, None, :] + col_q * u_qp[:, None, :]
                a[:, :, q] = col_p * u_pq[:, None, :] + col_q * u_qq[:, None, :]
                row_p = a[:, p, :]
                row_q = a[:, q, :]
                a[:, p, :] = np.conj(u_pp)[:, :, None] * row_p + np.conj(u_qp)[:, :, None] * row_q
                a[:, q, :] = np.conj(u_pq)[:, :, None] * row_p + np.conj(u_qq)[:, :, None] * row_q
                # clean the annihilated entries and keep the diagonal real
                a[rows, p, q] = 0.0
                a[rows, q, p] = 0.0
                a[rows, p, p] = a[rows, p, p].real
                a[rows, q, q] = a[rows, q, q].real

                vp = v[:, :, p]
                vq = v[:, :, q]
                v[:, :, p] = vp * u_pp[:, None, :] + vq * u_qp[:, None, :]
                v[:, :, q] = vp * u_pq[:, None, :] + vq * u_qq[:, None, :]
        else:
            off = np.sqrt(np.sum(np.abs(a[:, off_mask]) ** 2, axis=1))
            if not np.all(off <= _JACOBI_RTOL * scale):
                raise ContractViolation("Jacobi iteration failed to converge")

    w = np.real(np.diagonal(a, axis1=1, axis2=2)).copy()
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w.reshape(batch_shape + (d,)), v.reshape(batch_shape + (d, d))


def eigvals_hermitian(m: np.ndarray) -> np.ndarray:
    return eig_hermitian(m)[0]


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bipartition:
    """Split of qubit positions ``0..n-1`` into two nonempty disjoint sides."""

    side_a: frozenset[int]
    side_b: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "side_a", frozenset(int(i) for i in self.side_a))
        object.__setattr__(self, "side_b", frozenset(int(i) for i in self.side_b))
        if self.side_a & self.side_b:
            raise ContractViolation("bipartition sides overlap")
        if not self.side_a or not self.side_b:
            raise ContractViolation("bipartition sides must both be nonempty")

    @classmethod
    def from_side_b(cls, n_qubits: int, side_b: Iterable[int]) -> "Bipartition":
        b = frozenset(side_b)
        return cls(frozenset(range(n_qubits)) - b, b)

    @property
    def n_qubits(self) -> int:
        return len(self.side_a) + len(self.side_b)

    def swapped(self) -> "Bipartition":
        return Bipartition(self.side_b, self.side_a)

    def check(self, n_qubits: int) -> None:
        if self.side_a | self.side_b != frozenset(range(n_qubits)):
            raise ContractViolation(
                f"bipartition {sorted(self.side_a)}|{sorted(self.side_b)} does not "
                f"cover qubit positions 0..{n_qubits - 1}"
            )


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, trace-one, positive semidefinite operator on labelled qubits."""

    matrix: np.ndarray
    qubit_labels: tuple = field(default=())

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ContractViolation(f"density matrix must be square, got {m.shape}")
        k = n_qubits_of(m.shape[0])
        labels = tuple(self.qubit_labels) if self.qubit_labels else tuple(range(k))
        if len(labels) != k:
            raise ContractViolation(f"{len(labels)} labels for a {k}-qubit matrix")
        asym = max_asymmetry(m)
        if asym > HERMITIAN_TOL:
            raise ContractViolation(f"density matrix not Hermitian (max asymmetry {asym:.3e})")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ContractViolation(f"density matrix trace {tr.real:.12f} != 1")
        # invariant check only; analysis code goes through eig_hermitian
        lo = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
        if lo < -PSD_TOL:
            raise ContractViolation(f"density matrix has negative eigenvalue {lo:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "qubit_labels", labels)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_labels)

    def position(self, label) -> int:
        return self.qubit_labels.index(label)

    def __repr__(self):
        return f"DensityMatrix(qubits={list(self.qubit_labels)})"


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    qubit_labels: tuple = field(default=())

    def __post_init__(self):
        psi = np.array(self.amplitudes, dtype=complex).reshape(-1)
        k = n_qubits_of(psi.size)
        if k > 20:
            raise ContractViolation(f"state vectors are limited to 20 qubits, got {k}")
        labels = tuple(self.qubit_labels) if self.qubit_labels else tuple(range(k))
        if len(labels) != k:
            raise ContractViolation(f"{len(labels)} labels for a {k}-qubit vector")
        norm2 = float(np.vdot(psi, psi).real)
        if abs(norm2 - 1.0) > 1e-10:
            raise ContractViolation(f"state vector squared norm {norm2:.12f} != 1")
        psi.setflags(write=False)
        object.__setattr__(self, "amplitudes", psi)
        object.__setattr__(self, "qubit_labels", labels)

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_labels)

    def density_matrix(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.qubit_labels)

    def reduced(self, labels: Sequence) -> DensityMatrix:
        """Reduced state on ``labels`` (kept in the order given)."""
        pos = [self.qubit_labels.index(q) for q in labels]
        n = self.n_qubits
        rest = [i for i in range(n) if i not in pos]
        psi = self.amplitudes.reshape((2,) * n).transpose(pos + rest)
        psi = psi.reshape(1 << len(pos), -1)
        return DensityMatrix(psi @ psi.conj().T, tuple(labels))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def _as_matrix(m) -> np.ndarray:
    if isinstance(m, DensityMatrix):
        return m.matrix
    return np.asarray(m, dtype=complex)


def tensor(a, b) -> np.ndarray:
    """Kronecker product with ``a`` on the most-significant qubits."""
    return np.kron(_as_matrix(a), _as_matrix(b))


def partial_transpose_array(m: np.ndarray, n_qubits: int, side_b: Iterable[int]) -> np.ndarray:
    """Partial transpose of ``(..., 2**n, 2**n)`` over qubit positions ``side_b``."""
    m = np.asarray(m)
    batch = m.shape[:-2]
    nb = len(batch)
    t = m.reshape(batch + (2,) * (2 * n_qubits))
    perm = list(range(nb + 2 * n_qubits))
    for q in side_b:
        r, c = nb + q, nb + n_qubits + q
        perm[r], perm[c] = perm[c], perm[r]
    return t.transpose(perm).reshape(m.shape)


def partial_transpose(rho: DensityMatrix, part: Bipartition) -> np.ndarray:
    """Transpose the indices of ``part.side_b``; exact index permutation."""
    part.check(rho.n_qubits)
    return partial_transpose_array(rho.matrix, rho.n_qubits, sorted(part.side_b))


def partial_trace_array(m: np.ndarray, n_qubits: int, traced: Iterable[int]) -> np.ndarray:
    """Trace out qubit positions ``traced`` from ``(..., 2**n, 2**n)``."""
    m = np.asarray(m)
    batch = m.shape[:-2]
    nb = len(batch)
    traced = sorted(set(traced))
    keep = [q for q in range(n_qubits) if q not in traced]
    t = m.reshape(batch + (2,) * (2 * n_qubits))
    perm = (
        list(range(nb))
        + [nb + q for q in keep]
        + [nb + n_qubits + q for q in keep]
        + [nb + q for q in traced]
        + [nb + n_qubits + q for q in traced]
    )
    t = t.transpose(perm)
    dk, dt = 1 << len(keep), 1 << len(traced)
    t = t.reshape(batch + (dk, dk, dt, dt))
    return np.trace(t, axis1=-2, axis2=-1)


def partial_trace(rho: DensityMatrix, traced_labels: Iterable) -> DensityMatrix:
    traced_labels = list(traced_labels)
    pos = [rho.position(q) for q in traced_labels]
    kept = tuple(q for q in rho.qubit_labels if q not in traced_labels)
    return DensityMatrix(partial_trace_array(rho.matrix, rho.n_qubits, pos), kept)


def project_array(m: np.ndarray, n_qubits: int, qubit: int, outcome: int) -> np.ndarray:
    """Unnormalised block ``<m|rho|m>`` on ``qubit``; shape ``(..., d/2, d/2)``."""
    m = np.asarray(m)
    batch = m.shape[:-2]
    nb = len(batch)
    t = m.reshape(batch + (2,) * (2 * n_qubits))
    idx = [slice(None)] * (nb + 2 * n_qubits)
    idx[nb + qubit] = outcome
    idx[nb + n_qubits + qubit] = outcome
    h = 1 << (n_qubits - 1)
    return t[tuple(idx)].reshape(batch + (h, h))


def project_and_normalize(rho: DensityMatrix, qubit: int, outcome: int) -> tuple[DensityMatrix, float]:
    """Measure qubit position ``qubit`` in the Z basis and keep ``outcome``.

    Returns the post-measurement state of the remaining qubits and the
    outcome probability.  Outcomes with probability below ``1e-12`` raise
    :class:`UnreachableBranch`.
    """
    if outcome not in (0, 1):
        raise ContractViolation(f"outcome must be 0 or 1, got {outcome!r}")
    if not 0 <= qubit < rho.n_qubits:
        raise ContractViolation(f"qubit position {qubit} out of range for {rho.n_qubits} qubits")
    block = project_array(rho.matrix, rho.n_qubits, qubit, outcome)
    prob = float(np.trace(block).real)
    if prob < BRANCH_TOL:
        raise UnreachableBranch(
            f"outcome {outcome} on qubit {rho.qubit_labels[qubit]} has probability {prob:.3e}"
        )
    labels = rho.qubit_labels[:qubit] + rho.qubit_labels[qubit + 1:]
    return DensityMatrix(block / prob, labels), min(prob, 1.0)


def frobenius_distance(a, b) -> float:
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape != b.shape:
        raise ContractViolation(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2)))


def sqrt_psd(m: np.ndarray) -> np.ndarray:
    w, v = eig_hermitian(m)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    a, b = _as_matrix(rho), _as_matrix(sigma)
    s = sqrt_psd(a)
    inner = s @ b @ s
    inner = 0.5 * (inner + inner.conj().T)
    w = np.clip(eig_hermitian(inner)[0], 0.0, None)
    return float(np.sum(np.sqrt(w)) ** 2)


def ket(bits: str) -> np.ndarray:
    """Computational-basis ket for a bitstring like ``"01"``."""
    v = np.zeros(1 << len(bits), dtype=complex)
    v[int(bits, 2) if bits else 0] = 1.0
    return v


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())
