import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphent.errors import ContractViolation, ValidationError
from graphent.graphstate import QubitGraph, build_graph_state_circuit, pauli_matrix, reduce_to_cnot
from graphent.linalg import DensityMatrix, fidelity, ket, projector
from graphent.simulator import NoiseModel, PauliFrameSampler, ShotPlan
from graphent.tomography import (
    ExpectationTable,
    StateSource,
    TomographyDataset,
    collect_dataset,
    estimate_expectations,
    generate_settings,
    linear_inversion,
    pauli_labels,
    project_eigenvalues,
    project_to_physical,
    reconstruct,
    tomograph,
)

BELL = DensityMatrix(projector((ket("00") + ket("11")) / np.sqrt(2)), ("a", "b"))


def random_density(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = g @ g.conj().T
    return r / np.trace(r).real


def bell_dataset(exact=True, shots=2048, seed=0):
    return collect_dataset(StateSource(BELL), ("a", "b"), ShotPlan(shots, seed), exact=exact)


# -- settings and labels -------------------------------------------------------------


def test_setting_enumeration():
    assert generate_settings(1) == ["X", "Y", "Z"]
    two = generate_settings(2)
    assert len(two) == 9 and two[0] == "XX" and two[-1] == "ZZ"
    assert len(generate_settings(4)) == 81
    assert len(pauli_labels(2)) == 15 and "II" not in pauli_labels(2)


# -- expectations -------------------------------------------------------------------


def test_exact_bell_expectations():
    et = estimate_expectations(bell_dataset())
    assert np.isclose(et["XX"], 1) and np.isclose(et["ZZ"], 1) and np.isclose(et["YY"], -1)
    assert np.isclose(et["XZ"], 0) and np.isclose(et["IZ"], 0)


def test_sampled_bell_correlation_within_binomial_interval():
    et = estimate_expectations(bell_dataset(exact=False))
    assert 0.93 <= et["XX"] <= 1.0


def test_identity_strings_agree_across_settings():
    # exact data: every setting that ends in Z gives the same <IZ>
    rho = DensityMatrix(random_density(np.random.default_rng(1), 4), ("a", "b"))
    ds = collect_dataset(StateSource(rho), ("a", "b"), ShotPlan(1), exact=True)
    f = ds.frequencies()
    z_parity = np.array([1, -1, 1, -1])
    per_setting = [f[i] @ z_parity for i, s in enumerate(ds.settings) if s[1] == "Z"]
    assert np.ptp(per_setting) < 1e-12
    assert np.isclose(estimate_expectations(ds)["IZ"], np.trace(rho.matrix @ np.kron(np.eye(2), np.diag([1, -1]))).real)


def test_expectation_table_rejects_out_of_range():
    values = np.zeros(15)
    values[pauli_labels(2).index("ZZ")] = 1.05
    with pytest.raises(ContractViolation, match="ZZ"):
        ExpectationTable(("a", "b"), values)


# -- inversion and projection -------------------------------------------------------------


def test_linear_inversion_limits():
    et = ExpectationTable(("a", "b"), np.zeros(15))
    assert np.allclose(linear_inversion(et), np.eye(4) / 4)
    raw = linear_inversion(estimate_expectations(bell_dataset()))
    assert np.abs(raw - BELL.matrix).max() < 1e-12


def test_projection_of_two_level_example():
    out = project_to_physical(np.diag([1.1, -0.1]))
    assert np.allclose(out.matrix, np.diag([1.0, 0.0]), atol=1e-12)
    # grid oracle over physical diagonals (t, 1 - t)
    t = np.linspace(0, 1, 10001)
    best = t[np.argmin((1.1 - t) ** 2 + (-0.1 - (1 - t)) ** 2)]
    assert np.isclose(out.matrix[0, 0].real, best, atol=1e-4)


def test_projection_fixed_point_and_idempotence():
    rng = np.random.default_rng(2)
    rho = random_density(rng, 16)
    assert np.abs(project_to_physical(rho).matrix - rho).max() < 1e-12
    h = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    m = rho + 0.05 * (h + h.conj().T)
    m = m - (np.trace(m) - 1) * np.eye(16) / 16
    once = project_to_physical(m).matrix
    assert np.abs(project_to_physical(once).matrix - once).max() < 1e-12


def test_projection_beats_random_physical_states():
    rng = np.random.default_rng(3)
    rho = random_density(rng, 16)
    h = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    m = rho + 0.1 * (h + h.conj().T)
    m = m - (np.trace(m) - 1) * np.eye(16) / 16
    d0 = np.linalg.norm(project_to_physical(m).matrix - m)
    g = rng.normal(size=(10_000, 16, 4)) + 1j * rng.normal(size=(10_000, 16, 4))
    sig = g @ np.conj(np.swapaxes(g, 1, 2))
    sig /= np.trace(sig, axis1=1, axis2=2).real[:, None, None]
    assert np.all(np.linalg.norm(sig - m, axis=(1, 2)) >= d0 - 1e-6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=16))
def test_eigenvalue_projection_is_simplex_projection(xs):
    mu = np.sort(np.array(xs))
    lam = project_eigenvalues(mu)
    assert np.all(lam >= 0) and np.isclose(lam.sum(), 1.0)
    # KKT: survivors share one shift, dropped entries sit below it
    pos = lam > 0
    shift = (lam - mu)[pos]
    assert np.ptp(shift) < 1e-9
    assert np.all(mu[~pos] + shift[0] <= 1e-9)


def test_projection_contract():
    with pytest.raises(ContractViolation):
        project_to_physical(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(ContractViolation):
        project_to_physical(np.eye(2))


# -- pipeline -------------------------------------------------------------------------------


def test_exact_reconstruction_of_graph_state():
    c = build_graph_state_circuit(QubitGraph.path([0, 1]))
    sampler = PauliFrameSampler(c)
    rho = tomograph(sampler, (0, 1), ShotPlan(2048), exact=True)
    assert np.abs(rho.matrix - sampler.reduced_state((0, 1)).matrix).max() < 1e-10


def test_reconstruction_reproduces_exact_expectations():
    rho = DensityMatrix(random_density(np.random.default_rng(4), 8), (0, 1, 2))
    ds = collect_dataset(StateSource(rho), (0, 1, 2), ShotPlan(1), exact=True)
    et = estimate_expectations(ds)
    rec = reconstruct(ds).matrix
    for lab in et.labels:
        assert abs(np.trace(rec @ pauli_matrix(lab)).real - et[lab]) < 1e-10


def test_noiseless_quad_fidelity_at_hardware_shot_count():
    c = reduce_to_cnot(build_graph_state_circuit(QubitGraph.path(range(6))))
    sampler = PauliFrameSampler(c)
    rho = tomograph(sampler, (1, 2, 3, 4), ShotPlan(2048, 7))
    assert fidelity(rho.matrix, sampler.reduced_state((1, 2, 3, 4)).matrix) >= 0.95


def test_noisy_quad_is_always_physical():
    c = reduce_to_cnot(build_graph_state_circuit(QubitGraph.path(range(5))))
    sampler = PauliFrameSampler(c, NoiseModel.default())
    for seed in range(3):
        rho = tomograph(sampler, (0, 1, 2, 3), ShotPlan(2048, seed))
        assert np.linalg.eigvalsh(rho.matrix).min() > -1e-12
        assert abs(np.trace(rho.matrix) - 1) < 1e-12


def test_target_limit():
    with pytest.raises(ContractViolation):
        tomograph(StateSource(BELL), tuple(range(7)), ShotPlan(1))


# -- dataset format -------------------------------------------------------------------------


def test_dataset_round_trip():
    ds = bell_dataset(exact=False)
    back = TomographyDataset.from_dict(json.loads(ds.to_json()))
    assert back.targets == ds.targets and np.array_equal(back.counts, ds.counts)


def test_dataset_errors_name_the_problem():
    doc = json.loads(bell_dataset(exact=False).to_json())
    broken = dict(doc, counts={k: v for k, v in doc["counts"].items() if k != "ZZ"})
    with pytest.raises(ValidationError, match="ZZ"):
        TomographyDataset.from_dict(broken)
    bad = json.loads(json.dumps(doc))
    first = next(iter(bad["counts"]["XY"]))
    bad["counts"]["XY"][first] += 1
    with pytest.raises(ValidationError, match="sums to"):
        TomographyDataset.from_dict(bad)
    bad = json.loads(json.dumps(doc))
    bad["counts"]["XX"] = {"0a": 2048}
    with pytest.raises(ValidationError, match="bitstring"):
        TomographyDataset.from_dict(bad)
    with pytest.raises(ValidationError, match="shots"):
        TomographyDataset.from_dict(dict(doc, shots=0))
    with pytest.raises(ValidationError):
        bell_dataset().to_dict()  # exact datasets have no integer counts


def test_dataset_load_reports_line(tmp_path):
    p = tmp_path / "d.json"
    p.write_text('{"targets": [0],\n"shots": 1,\n"counts": {')
    with pytest.raises(ValidationError, match="line 3"):
        TomographyDataset.load(p)
