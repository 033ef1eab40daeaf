"""Graphs, graph-state circuits and stabilizer algebra.

Pauli strings use the symplectic (x|z) representation with a +/-1 sign.
Graph-state generators and their products under Z-projection never pick up
an imaginary phase; :meth:`PauliString.__mul__` asserts this instead of
tracking a four-valued phase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation, ValidationError

# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QubitGraph:
    vertices: tuple
    edges: frozenset

    def __post_init__(self):
        verts = tuple(self.vertices)
        if len(set(verts)) != len(verts):
            raise ValidationError("graph vertices must be unique")
        vs = set(verts)
        norm = set()
        for e in self.edges:
            a, b = tuple(e)
            if a == b:
                raise ValidationError(f"self-loop on vertex {a}")
            if a not in vs or b not in vs:
                raise ValidationError(f"edge {a}-{b} references an unknown vertex")
            norm.add(frozenset((a, b)))
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def path(cls, order: Sequence) -> "QubitGraph":
        order = tuple(order)
        return cls(order, frozenset(frozenset(p) for p in zip(order, order[1:])))

    def neighbors(self, v) -> list:
        """Neighbors of ``v`` in vertex order."""
        out = set()
        for e in self.edges:
            if v in e:
                (w,) = e - {v}
                out.add(w)
        return [w for w in self.vertices if w in out]

    def ordered_edges(self) -> list[tuple]:
        """Edges as (a, b) with a before b in vertex order, sorted by (a, b) position."""
        pos = {v: i for i, v in enumerate(self.vertices)}
        pairs = [tuple(sorted(e, key=pos.__getitem__)) for e in self.edges]
        return sorted(pairs, key=lambda p: (pos[p[0]], pos[p[1]]))

    def path_order(self) -> list:
        """Vertices in walk order if the graph is a simple connected path.

        The walk starts from the endpoint listed first in ``vertices``.
        """
        n = len(self.vertices)
        if n == 1:
            return list(self.vertices)
        deg = {v: len(self.neighbors(v)) for v in self.vertices}
        ends = [v for v in self.vertices if deg[v] == 1]
        if any(d > 2 for d in deg.values()) or len(ends) != 2 or len(self.edges) != n - 1:
            raise ValidationError("graph is not a simple path")
        order = [ends[0]]
        prev = None
        while len(order) < n:
            nxt = [w for w in self.neighbors(order[-1]) if w != prev]
            if not nxt:
                raise ValidationError("graph is not connected")
            prev = order[-1]
            order.append(nxt[0])
        return order

    def is_path(self) -> bool:
        try:
            self.path_order()
        except ValidationError:
            return False
        return True

    def to_dict(self) -> dict:
        return {"vertices": list(self.vertices), "edges": [list(e) for e in self.ordered_edges()]}

    @classmethod
    def from_dict(cls, doc) -> "QubitGraph":
        if isinstance(doc, dict) and "path" in doc and "edges" not in doc:
            return cls.path(doc["path"])
        try:
            verts = doc["vertices"]
            edges = doc["edges"]
        except (KeyError, TypeError):
            raise ValidationError("graph document needs 'vertices' and 'edges' (or 'path')") from None
        for e in edges:
            if len(e) != 2:
                raise ValidationError(f"edge {e!r} must list exactly two vertices")
        return cls(tuple(verts), frozenset(frozenset(e) for e in edges))


def load_graph(path) -> QubitGraph:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return QubitGraph.from_dict(doc)


def default_path_graph() -> QubitGraph:
    """The 20-qubit path embedded on the Poughkeepsie layout."""
    doc = json.loads(resources.files("graphent.data").joinpath("poughkeepsie_path.json").read_text())
    return QubitGraph.from_dict(doc)


# ---------------------------------------------------------------------------
# Pauli strings
# ---------------------------------------------------------------------------

_LETTER_TO_XZ = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_XZ_TO_LETTER = {v: k for k, v in _LETTER_TO_XZ.items()}
# exponent e of i^e in the single-qubit product P * Q
_PRODUCT_PHASE = {("X", "Y"): 1, ("Y", "Z"): 1, ("Z", "X"): 1, ("Y", "X"): 3, ("Z", "Y"): 3, ("X", "Z"): 3}


@dataclass(frozen=True)
class PauliString:
    phase: int
    letters: str

    def __post_init__(self):
        if self.phase not in (1, -1):
            raise ContractViolation(f"Pauli phase must be +1 or -1, got {self.phase}")
        if set(self.letters) - set("IXYZ"):
            raise ContractViolation(f"bad Pauli letters {self.letters!r}")

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        text = text.strip()
        phase = -1 if text.startswith("-") else 1
        return cls(phase, text.lstrip("+-"))

    @classmethod
    def single(cls, n: int, pos: int, letter: str, phase: int = 1) -> "PauliString":
        s = ["I"] * n
        s[pos] = letter
        return cls(phase, "".join(s))

    def __len__(self):
        return len(self.letters)

    def __str__(self):
        return ("-" if self.phase < 0 else "+") + self.letters

    @property
    def x(self) -> np.ndarray:
        return np.array([_LETTER_TO_XZ[c][0] for c in self.letters], dtype=np.uint8)

    @property
    def z(self) -> np.ndarray:
        return np.array([_LETTER_TO_XZ[c][1] for c in self.letters], dtype=np.uint8)

    @property
    def support(self) -> list[int]:
        return [i for i, c in enumerate(self.letters) if c != "I"]

    def commutes_with(self, other: "PauliString") -> bool:
        return symplectic_product(self, other) == 0

    def __mul__(self, other: "PauliString") -> "PauliString":
        if len(self) != len(other):
            raise ContractViolation("Pauli strings of different length")
        exp = 0
        out = []
        for a, b in zip(self.letters, other.letters):
            if a == "I":
                out.append(b)
            elif b == "I" or a == b:
                out.append("I" if a == b else a)
            else:
                exp += _PRODUCT_PHASE[(a, b)]
                xa, za = _LETTER_TO_XZ[a]
                xb, zb = _LETTER_TO_XZ[b]
                out.append(_XZ_TO_LETTER[(xa ^ xb, za ^ zb)])
        exp %= 4
        if exp % 2:
            raise ContractViolation(f"product {self} * {other} has an imaginary phase")
        sign = self.phase * other.phase * (-1 if exp == 2 else 1)
        return PauliString(sign, "".join(out))

    def matrix(self) -> np.ndarray:
        return self.phase * pauli_matrix(self.letters)

    def restrict(self, keep: Sequence[int]) -> "PauliString":
        return PauliString(self.phase, "".join(self.letters[i] for i in keep))


_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(letters: str) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for c in letters:
        m = np.kron(m, _PAULI_1Q[c])
    return m


def symplectic_product(a: PauliString, b: PauliString) -> int:
    return int((a.x @ b.z + a.z @ b.x) % 2)


def all_commute(gens: Sequence[PauliString]) -> bool:
    return all(gens[i].commutes_with(gens[j]) for i in range(len(gens)) for j in range(i + 1, len(gens)))


def stabilizer_generators(g: QubitGraph) -> list[PauliString]:
    """One generator per vertex: X on the vertex, Z on each neighbor."""
    pos = {v: i for i, v in enumerate(g.vertices)}
    n = len(g.vertices)
    gens = []
    for v in g.vertices:
        s = ["I"] * n
        s[pos[v]] = "X"
        for w in g.neighbors(v):
            s[pos[w]] = "Z"
        gens.append(PauliString(1, "".join(s)))
    return gens


def project_generators(gens: Sequence[PauliString], qubit: int, outcome: int) -> list[PauliString]:
    """Update a stabilizer generator set for a Z-basis outcome on ``qubit``.

    The first generator with X or Y at ``qubit`` becomes ``(-1)**outcome Z``;
    the other anti-commuting generators are multiplied by it.  Every
    remaining generator carrying a Z at ``qubit`` is then multiplied by the
    new Z generator, so that afterwards only the replaced generator acts on
    the measured qubit.
    """
    if outcome not in (0, 1):
        raise ContractViolation(f"outcome must be 0 or 1, got {outcome!r}")
    gens = list(gens)
    anti = [i for i, g in enumerate(gens) if g.letters[qubit] in "XY"]
    if not anti:
        raise ContractViolation(
            f"no generator anti-commutes with Z on qubit {qubit}; it is already in a Z eigenstate"
        )
    first = anti[0]
    for i in anti[1:]:
        gens[i] = gens[i] * gens[first]
    zq = PauliString.single(len(gens[first]), qubit, "Z", -1 if outcome else 1)
    gens[first] = zq
    for i, g in enumerate(gens):
        if i != first and g.letters[qubit] == "Z":
            gens[i] = g * zq
    return gens


def residual_generators(gens: Sequence[PauliString], measured: Sequence[int]) -> list[PauliString]:
    """Drop measured qubits from a projected generator set.

    Expects every measured qubit to be carried only by its own single-qubit
    Z generator (the output form of :func:`project_generators`).
    """
    measured = set(measured)
    n = len(gens[0])
    keep = [i for i in range(n) if i not in measured]
    out = []
    for g in gens:
        if g.support and set(g.support) <= measured:
            continue
        if set(g.support) & measured:
            raise ContractViolation(f"generator {g} still acts on a measured qubit")
        out.append(g.restrict(keep))
    return out


def stabilizer_state(gens: Sequence[PauliString]) -> np.ndarray:
    """State vector stabilised by ``n`` independent commuting generators."""
    n = len(gens[0])
    if len(gens) != n:
        raise ContractViolation(f"need {n} generators, got {len(gens)}")
    proj = np.eye(1 << n, dtype=complex)
    for g in gens:
        proj = proj @ (np.eye(1 << n) + g.matrix()) / 2
    col = int(np.argmax(np.linalg.norm(proj, axis=0)))
    psi = proj[:, col]
    return psi / np.linalg.norm(psi)


# ---------------------------------------------------------------------------
# Circuits
# ---------------------------------------------------------------------------

UNITARY_GATES = ("H", "S", "SDG", "CZ", "CNOT")


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple
    basis: str | None = None  # MEASURE only

    def __str__(self):
        args = ",".join(str(q) for q in self.qubits)
        return f"{self.name}({args}{',' + self.basis if self.basis else ''})"


@dataclass(frozen=True)
class Circuit:
    qubits: tuple
    gates: tuple

    def __post_init__(self):
        qs = tuple(self.qubits)
        gates = tuple(self.gates)
        known = set(qs)
        measured = False
        for g in gates:
            if g.name not in UNITARY_GATES + ("MEASURE",):
                raise ContractViolation(f"unknown gate {g.name}")
            if not set(g.qubits) <= known:
                raise ContractViolation(f"gate {g} references an undeclared qubit")
            arity = 2 if g.name in ("CZ", "CNOT") else 1
            if len(g.qubits) != arity or len(set(g.qubits)) != arity:
                raise ContractViolation(f"gate {g} has the wrong number of qubits")
            if g.name == "MEASURE":
                if g.basis not in ("X", "Y", "Z"):
                    raise ContractViolation(f"measurement basis must be X, Y or Z, got {g.basis!r}")
                measured = True
            elif measured:
                raise ContractViolation("unitary gate after a measurement")
        object.__setattr__(self, "qubits", qs)
        object.__setattr__(self, "gates", gates)

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def unitary_gates(self) -> list[Gate]:
        return [g for g in self.gates if g.name != "MEASURE"]

    def count(self, name: str) -> int:
        return sum(1 for g in self.gates if g.name == name)

    def with_measurements(self, basis: dict) -> "Circuit":
        extra = tuple(Gate("MEASURE", (q,), basis[q]) for q in self.qubits if q in basis)
        return Circuit(self.qubits, tuple(self.unitary_gates()) + extra)


def H(q) -> Gate:
    return Gate("H", (q,))


def CZ(a, b) -> Gate:
    return Gate("CZ", (a, b))


def CNOT(control, target) -> Gate:
    return Gate("CNOT", (control, target))


def build_graph_state_circuit(g: QubitGraph) -> Circuit:
    """Hadamard on every vertex, then one CZ per edge in vertex order."""
    gates = [H(v) for v in g.vertices]
    gates += [CZ(a, b) for a, b in g.ordered_edges()]
    return Circuit(g.vertices, tuple(gates))


def reduce_to_cnot(c: Circuit) -> Circuit:
    """Rewrite CZ(a, b) as H(b) CNOT(a, b) H(b) and cancel adjacent H pairs."""
    out: list[Gate | None] = []
    last: dict = {}

    def push(gate: Gate):
        if gate.name == "H":
            (q,) = gate.qubits
            i = last.get(q)
            if i is not None and out[i] is not None and out[i].name == "H":
                out[i] = None
                last[q] = _previous_on(out, q, i)
                return
        out.append(gate)
        for q in gate.qubits:
            last[q] = len(out) - 1

    for g in c.gates:
        if g.name == "CZ":
            a, b = g.qubits
            push(H(b))
            push(CNOT(a, b))
            push(H(b))
        elif g.name in ("H", "CNOT"):
            push(g)
        else:
            raise ContractViolation(f"reduce_to_cnot supports only H/CZ/CNOT, got {g.name}")
    return Circuit(c.qubits, tuple(g for g in out if g is not None))


def _previous_on(gates: list, q, before: int):
    for j in range(before - 1, -1, -1):
        if gates[j] is not None and q in gates[j].qubits:
            return j
    return None
