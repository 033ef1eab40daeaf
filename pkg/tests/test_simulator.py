import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphent.analysis import negativity_array
from graphent.errors import ContractViolation
from graphent.graphstate import CNOT, Circuit, Gate, H, QubitGraph, build_graph_state_circuit, default_path_graph
from graphent.graphstate import reduce_to_cnot, stabilizer_generators
from graphent.linalg import partial_trace_array
from graphent.simulator import (
    NoiseModel,
    OutcomeHistogram,
    PauliFrameSampler,
    ShotPlan,
    measurement_probabilities,
    run_density,
    run_statevector,
    run_trajectories,
)

PAULIS = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]


def tv(p, q):
    return 0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum()


def random_clifford(n, depth, rng):
    gates = []
    for _ in range(depth):
        r = rng.random()
        if n > 1 and r < 0.4:
            a, b = rng.choice(n, 2, replace=False)
            gates.append(Gate(rng.choice(["CZ", "CNOT"]), (int(a), int(b))))
        else:
            gates.append(Gate(str(rng.choice(["H", "S", "SDG"])), (int(rng.integers(n)),)))
    return Circuit(tuple(range(n)), tuple(gates))


# -- statevector ------------------------------------------------------------------


def test_single_hadamard():
    psi = run_statevector(Circuit((0,), (H(0),))).amplitudes
    assert np.allclose(psi, [1 / np.sqrt(2), 1 / np.sqrt(2)])


def test_twenty_qubit_graph_state_stabilizers():
    g = default_path_graph()
    psi = run_statevector(build_graph_state_circuit(g)).amplitudes
    n = 20
    idx = np.arange(1 << n)
    for k in stabilizer_generators(g):
        # apply the Pauli string through bit operations instead of a 2^20 matrix
        xmask = sum(1 << (n - 1 - i) for i, c in enumerate(k.letters) if c in "XY")
        zmask = sum(1 << (n - 1 - i) for i, c in enumerate(k.letters) if c in "ZY")
        parity = np.array([bin(v).count("1") & 1 for v in (idx & zmask)])
        out = np.zeros_like(psi)
        out[idx ^ xmask] = psi * (-1.0) ** parity
        assert abs(np.vdot(psi, out).real - 1.0) < 1e-9


# -- density evolution ------------------------------------------------------------------


def test_density_single_qubit_limits():
    c = Circuit((0,), (H(0),))
    assert np.allclose(run_density(c, NoiseModel()).matrix, np.full((2, 2), 0.5))
    assert np.allclose(run_density(c, NoiseModel(p1=1.0)).matrix, np.eye(2) / 2)


def _kraus_two_qubit_graph(p2: float) -> np.ndarray:
    # H on both, CZ, then the two-qubit channel as 16 Pauli Kraus operators plus identity
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    psi = np.diag([1, 1, 1, -1]) @ np.kron(h, h) @ np.array([1, 0, 0, 0])
    rho = np.outer(psi, psi.conj())
    kraus = [np.sqrt(1 - p2) * np.eye(4)] + [np.sqrt(p2 / 16) * np.kron(a, b) for a in PAULIS for b in PAULIS]
    return sum(k @ rho @ k.conj().T for k in kraus)


def test_two_qubit_graph_state_matches_kraus_oracle():
    c = build_graph_state_circuit(QubitGraph.path([0, 1]))
    rho = run_density(c, NoiseModel(p2=0.1)).matrix
    oracle = _kraus_two_qubit_graph(0.1)
    assert np.abs(rho - oracle).max() < 1e-10
    neg = negativity_array(rho, 2, [1])
    assert 0.0 < neg < 0.5
    assert abs(neg - (3 * 0.9 - 1) / 4) < 1e-10


def test_negativity_monotone_in_two_qubit_noise():
    c = build_graph_state_circuit(QubitGraph.path([0, 1]))
    negs = [negativity_array(run_density(c, NoiseModel(p2=p)).matrix, 2, [1]) for p in np.arange(0, 0.55, 0.05)]
    assert all(b <= a + 1e-12 for a, b in zip(negs, negs[1:]))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_noiseless_density_equals_statevector(n, seed):
    c = random_clifford(n, 4 * n, np.random.default_rng(seed))
    psi = run_statevector(c).amplitudes
    assert np.abs(run_density(c).matrix - np.outer(psi, psi.conj())).max() < 1e-10


def test_density_qubit_limit():
    c = Circuit(tuple(range(11)), ())
    with pytest.raises(ContractViolation):
        run_density(c)


# -- measurement -------------------------------------------------------------------


def test_y_basis_convention():
    # H then S prepares |+i>, which reads 0 in the Y basis
    c = Circuit((0,), (H(0), Gate("S", (0,))))
    assert np.allclose(measurement_probabilities(run_density(c), "Y"), [1, 0])
    c = Circuit((0,), (H(0), Gate("SDG", (0,))))
    assert np.allclose(measurement_probabilities(run_density(c), "Y"), [0, 1])


def test_readout_flip_commutes_with_marginal():
    rng = np.random.default_rng(3)
    p = rng.dirichlet(np.ones(8))
    rho = np.diag(p)
    flips = (0.1, 0.03)
    joint = measurement_probabilities(rho, "ZZZ", flips).reshape(2, 2, 2)
    marg_then_flip = measurement_probabilities(partial_trace_array(rho, 3, [1]), "ZZ", flips)
    assert np.allclose(joint.sum(axis=1).ravel(), marg_then_flip, atol=1e-14)
    # the same on sampled histograms
    sampler = PauliFrameSampler(Circuit((0, 1, 2), (H(0), CNOT(0, 1), H(2))), NoiseModel(readout_flip=flips))
    h = sampler.sample((0, 1, 2), "ZZZ", 5000, np.random.default_rng(1))
    assert h.marginal((0, 2)).shots == 5000
    assert h.marginal((2, 0)).counts.tolist() == h.marginal((0, 2)).counts.reshape(2, 2).T.ravel().tolist()


# -- trajectories ---------------------------------------------------------------------


def test_noiseless_bell_is_perfectly_correlated():
    c = Circuit((0, 1), (H(0), CNOT(0, 1)))
    h = run_trajectories(c, NoiseModel(), ShotPlan(2048, 5), "ZZ")
    assert set(h.as_dict()) <= {"00", "11"} and h.shots == 2048


def test_trajectories_are_deterministic_per_seed():
    c = Circuit((0,), (H(0),))
    a = run_trajectories(c, NoiseModel(), ShotPlan(1000, 11), "Z")
    b = run_trajectories(c, NoiseModel(), ShotPlan(1000, 11), "Z")
    d = run_trajectories(c, NoiseModel(), ShotPlan(1000, 12), "Z")
    assert a.counts.tolist() == b.counts.tolist()
    assert a.counts.tolist() != d.counts.tolist()
    assert 400 < a.counts[0] < 600


def test_trajectories_match_density_two_qubit():
    c = build_graph_state_circuit(QubitGraph.path([0, 1]))
    nm = NoiseModel(p2=0.05)
    rho = run_density(c, nm)
    for basis in ("XZ", "ZX", "YY", "ZZ"):
        h = run_trajectories(c, nm, ShotPlan(2048, 2), basis)
        assert tv(h.counts / 2048, measurement_probabilities(rho, basis)) < 0.05


def test_frame_sampler_exact_state_matches_density():
    c = reduce_to_cnot(build_graph_state_circuit(QubitGraph.path(range(6))))
    nm = NoiseModel(0.01, 0.05, (0.02, 0.04))
    full = run_density(c, nm)
    sampler = PauliFrameSampler(c, nm)
    for targets in ((0, 1, 2, 3), (2, 4), (5,)):
        drop = [q for q in range(6) if q not in targets]
        ref = partial_trace_array(full.matrix, 6, drop)
        assert np.abs(sampler.reduced_state(targets).matrix - ref).max() < 1e-12
        for basis in ("".join(b) for b in itertools.islice(itertools.product("XYZ", repeat=len(targets)), 5)):
            assert np.allclose(sampler.probabilities(targets, basis),
                               measurement_probabilities(ref, basis, nm.readout_flip), atol=1e-12)


def test_histogram_round_trip_and_validation():
    h = OutcomeHistogram.from_dict(("a", "b"), {"01": 3, "10": 2})
    assert h.as_dict() == {"01": 3, "10": 2} and h.shots == 5
    with pytest.raises(Exception):
        OutcomeHistogram.from_dict(("a",), {"01": 1})


def test_noise_model_validation():
    with pytest.raises(ContractViolation):
        NoiseModel(p1=1.5)
    with pytest.raises(ContractViolation):
        NoiseModel(readout_flip=(0.1,))
    assert NoiseModel().is_ideal and not NoiseModel.default().is_ideal
