import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as P

from graphent.errors import ContractViolation, UnreachableBranch
from graphent.linalg import (
    Bipartition,
    DensityMatrix,
    StateVector,
    eig_hermitian,
    eigvals_hermitian,
    fidelity,
    ket,
    partial_trace,
    frobenius_distance,
    partial_transpose,
    partial_transpose_array,
    project_and_normalize,
    projector,
    tensor,
)


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def random_density(rng, d, rank=None):
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


BELL = (ket("00") + ket("11")) / np.sqrt(2)


# -- eigensolver ---------------------------------------------------------------


def test_eigenvalues_match_characteristic_polynomial_roots():
    # oracle: roots of det(xI - A) built from the Faddeev-LeVerrier recursion
    rng = np.random.default_rng(1)
    for d in (2, 3, 4, 5):
        a = random_hermitian(rng, d)
        coeffs = [1.0 + 0j]
        m = np.zeros_like(a)
        for k in range(1, d + 1):
            m = a @ m + coeffs[-1] * np.eye(d)
            coeffs.append(-np.trace(a @ m) / k)
        roots = np.sort(np.roots(coeffs).real)
        assert np.allclose(eigvals_hermitian(a), roots, atol=1e-8)


def test_eigendecomposition_reconstructs():
    rng = np.random.default_rng(2)
    for d in (1, 2, 7, 16, 32):
        a = random_hermitian(rng, d)
        w, v = eig_hermitian(a)
        assert np.all(np.diff(w) >= 0)
        assert np.allclose(v @ np.diag(w) @ v.conj().T, a, atol=1e-11)
        assert np.allclose(v.conj().T @ v, np.eye(d), atol=1e-11)


def test_batched_matches_individual():
    rng = np.random.default_rng(3)
    stack = np.array([random_hermitian(rng, 4) for _ in range(6)]).reshape(2, 3, 4, 4)
    w, _ = eig_hermitian(stack)
    assert w.shape == (2, 3, 4)
    for i in range(2):
        for j in range(3):
            assert np.allclose(w[i, j], eigvals_hermitian(stack[i, j]), atol=1e-12)


def test_degenerate_and_tiny_offdiagonal():
    a = np.diag([1.0, 1.0, 2.0, 2.0]).astype(complex)
    a[0, 3] = a[3, 0] = 1e-310  # denormal coupling must not break a rotation
    assert np.allclose(eigvals_hermitian(a), [1, 1, 2, 2])
    assert np.allclose(eigvals_hermitian(np.zeros((4, 4))), 0)


def test_non_hermitian_rejected_with_asymmetry():
    a = np.array([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ContractViolation, match="max"):
        eig_hermitian(a)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_trace_equals_eigenvalue_sum(d, seed):
    a = random_hermitian(np.random.default_rng(seed), d)
    assert np.isclose(eigvals_hermitian(a).sum(), np.trace(a).real, atol=1e-10)


# -- value types -----------------------------------------------------------------


def test_density_matrix_validation():
    with pytest.raises(ContractViolation):
        DensityMatrix(np.array([[1.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ContractViolation):
        DensityMatrix(np.eye(2))
    with pytest.raises(ContractViolation):
        DensityMatrix(np.diag([1.2, -0.2]))
    rho = DensityMatrix(np.eye(4) / 4, ("a", "b"))
    assert rho.n_qubits == 2 and rho.position("b") == 1


def test_bipartition_rules():
    with pytest.raises(ContractViolation):
        Bipartition({0}, {0, 1})
    with pytest.raises(ContractViolation):
        Bipartition(set(), {0})
    b = Bipartition.from_side_b(3, [2])
    assert b.side_a == {0, 1} and b.swapped().side_b == {0, 1}


# -- partial operations ------------------------------------------------------------


def test_bell_partial_transpose_spectrum():
    rho = DensityMatrix(projector(BELL))
    w = eigvals_hermitian(partial_transpose(rho, Bipartition({0}, {1})))
    assert np.allclose(w, [-0.5, 0.5, 0.5, 0.5])


def test_partial_transpose_of_product_is_local_transpose():
    rng = np.random.default_rng(4)
    a, b = random_density(rng, 2), random_density(rng, 4)
    rho = DensityMatrix(np.kron(a, b))
    assert np.allclose(partial_transpose(rho, Bipartition({0}, {1, 2})), np.kron(a, b.T))
    assert np.allclose(partial_transpose(rho, Bipartition({1, 2}, {0})), np.kron(a.T, b))


def test_partial_trace_of_product():
    rng = np.random.default_rng(5)
    a, b, c = (random_density(rng, 2) for _ in range(3))
    rho = DensityMatrix(np.kron(np.kron(a, b), c), ("p", "q", "r"))
    red = partial_trace(rho, ["q"])
    assert red.qubit_labels == ("p", "r")
    assert np.allclose(red.matrix, np.kron(a, c))


def test_statevector_reduced_order_follows_request():
    psi = np.kron(ket("0"), ket("1"))
    sv = StateVector(psi, ("a", "b"))
    assert np.allclose(sv.reduced(["b", "a"]).matrix, projector(np.kron(ket("1"), ket("0"))))


def test_project_and_normalize():
    rho = DensityMatrix(projector(BELL))
    post, p = project_and_normalize(rho, 0, 1)
    assert np.isclose(p, 0.5)
    assert np.allclose(post.matrix, projector(ket("1")))
    with pytest.raises(UnreachableBranch):
        project_and_normalize(DensityMatrix(projector(ket("00"))), 1, 1)


def test_fidelity_properties():
    rng = np.random.default_rng(6)
    a, b = random_density(rng, 4), random_density(rng, 4)
    assert np.isclose(fidelity(a, a), 1.0, atol=1e-9)
    assert 0.0 <= fidelity(a, b) <= 1.0
    assert np.isclose(fidelity(a, b), fidelity(b, a), atol=1e-9)
    assert np.isclose(fidelity(projector(ket("00")), np.eye(4) / 4), 0.25)


def test_eigenvalue_product_is_determinant():
    rng = np.random.default_rng(7)
    for d in (2, 4, 8, 16):
        a = random_hermitian(rng, d) / np.sqrt(d)
        det = np.linalg.det(a).real
        assert np.isclose(np.prod(eigvals_hermitian(a)), det, rtol=1e-6, atol=1e-300)


def _charpoly(a):
    # Faddeev-LeVerrier: coefficients of det(xI - A), highest power first
    d = a.shape[0]
    coeffs = [1.0 + 0j]
    m = np.zeros_like(a)
    for k in range(1, d + 1):
        m = a @ m + coeffs[-1] * np.eye(d)
        coeffs.append(-np.trace(a @ m) / k)
    return np.array(coeffs).real


def test_identity_and_pauli_spectra():
    assert np.allclose(eigvals_hermitian(np.eye(2)), [1, 1])
    assert np.allclose(eigvals_hermitian(np.array([[0, 1], [1, 0]])), [-1, 1])


def test_eight_by_eight_matches_companion_matrix_roots():
    a = random_hermitian(np.random.default_rng(8), 8)
    c = _charpoly(a)
    comp = np.zeros((8, 8))
    comp[1:, :-1] = np.eye(7)
    comp[:, -1] = -c[::-1][:-1]
    roots = np.sort(np.linalg.eigvals(comp).real)
    assert np.allclose(eigvals_hermitian(a), roots, atol=1e-8)
    assert np.allclose(roots, np.sort(P.polyroots(c[::-1]).real), atol=1e-8)


def test_double_partial_transpose_is_exact_identity():
    rho = random_density(np.random.default_rng(9), 8)
    once = partial_transpose(DensityMatrix(rho), Bipartition({0, 2}, {1}))
    assert np.array_equal(partial_transpose_array(once, 3, [1]), rho)


def test_transposing_every_qubit_is_full_transpose():
    rho = random_density(np.random.default_rng(10), 8)
    assert np.array_equal(partial_transpose_array(rho, 3, [0, 1, 2]), rho.T)


def test_product_with_plus_state_is_invariant():
    plus = projector(np.array([1, 1]) / np.sqrt(2))
    rho = DensityMatrix(np.kron(projector(ket("0")), plus))
    assert np.allclose(partial_transpose(rho, Bipartition({0}, {1})), rho.matrix)


def test_tensor_conventions():
    z = np.diag([1.0, -1.0])
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.array_equal(tensor(np.eye(2), np.eye(2)), np.eye(4))
    assert np.array_equal(tensor(projector(ket("0")), projector(ket("1"))), np.diag([0, 1, 0, 0]).astype(complex))
    oracle = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    oracle[2 * i + k, 2 * j + l] = z[i, j] * x[k, l]
    assert np.array_equal(tensor(z, x), oracle)
    # integer entries keep every product exact, so equality is bitwise
    rng = np.random.default_rng(11)
    a, b, c = (rng.integers(-9, 10, (2, 2)) + 1j * rng.integers(-9, 10, (2, 2)) for _ in range(3))
    assert np.array_equal(tensor(tensor(a, b), c), tensor(a, tensor(b, c)))


def test_frobenius_distance():
    rng = np.random.default_rng(12)
    a, b = random_hermitian(rng, 4), random_hermitian(rng, 4)
    assert frobenius_distance(a, a) == 0.0
    assert np.isclose(frobenius_distance(np.eye(2), np.zeros((2, 2))), np.sqrt(2))
    assert np.isclose(frobenius_distance(a, b), np.sqrt(sum(abs(a[i, j] - b[i, j]) ** 2
                                                            for i in range(4) for j in range(4))))
    with pytest.raises(ContractViolation):
        frobenius_distance(np.eye(2), np.eye(4))


def test_projection_branches_recombine_to_partial_trace():
    rho = DensityMatrix(random_density(np.random.default_rng(13), 8))
    for q in range(3):
        total = 0
        for bit in (0, 1):
            post, p = project_and_normalize(rho, q, bit)
            total = total + p * post.matrix
        assert np.allclose(total, partial_trace(rho, [q]).matrix, atol=1e-10)


def test_single_qubit_projection_leaves_scalar():
    plus = DensityMatrix(projector(np.array([1, 1]) / np.sqrt(2)))
    post, p = project_and_normalize(plus, 0, 0)
    assert np.isclose(p, 0.5) and post.dim == 1
