import numpy as np
import pytest

from jointtomo import (
    StateCoordinates,
    ValidationError,
    build_basis,
    change_of_basis,
    coords_to_povm_element,
    coords_to_state,
    devectorize,
    povm_element_to_coords,
    state_to_coords,
    vectorize,
)
from jointtomo.basis import PovmCoordinates

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def random_complex(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def random_hermitian(rng, d):
    a = random_complex(rng, d)
    return (a + a.conj().T) / 2


def test_qubit_basis_is_normalized_paulis():
    b = build_basis(2)
    expected = [np.eye(2), SX, SY, SZ]
    for om, pauli in zip(b.omegas, expected):
        assert np.allclose(om, pauli / np.sqrt(2), atol=1e-14)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_basis_orthonormality(d):
    b = build_basis(d)
    gram = np.einsum("aij,bij->ab", b.omegas.conj(), b.omegas)
    assert np.max(np.abs(gram - np.eye(d * d))) < 1e-12


def test_basis_trace_structure():
    for d in (2, 3, 4):
        b = build_basis(d)
        assert np.allclose(b.omegas[0], np.eye(d) / np.sqrt(d))
        for om in b.omegas[1:]:
            assert abs(np.trace(om)) < 1e-14
            assert np.allclose(om, om.conj().T)


def test_basis_rejects_small_dimension():
    with pytest.raises(ValidationError):
        build_basis(1)


def test_vectorize_is_column_major():
    a = np.array([[1, 2], [3, 4]])
    assert np.array_equal(vectorize(a), [1, 3, 2, 4])
    v = vectorize(np.eye(3))
    assert np.array_equal(np.nonzero(v)[0], [0, 4, 8])


def test_vec_kronecker_identity():
    rng = np.random.default_rng(0)
    for _ in range(10):
        a, b, c = (random_complex(rng, 2) for _ in range(3))
        lhs = vectorize(a @ b @ c)
        rhs = np.kron(c.T, a) @ vectorize(b)
        assert np.linalg.norm(lhs - rhs) < 1e-12


def test_devectorize_roundtrip_and_errors():
    rng = np.random.default_rng(1)
    a = random_complex(rng, 3)
    assert np.allclose(devectorize(vectorize(a)), a)
    v = rng.normal(size=9)
    assert np.allclose(vectorize(devectorize(v)), v)
    with pytest.raises(ValidationError):
        devectorize(np.arange(5))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_change_of_basis_unitary(d):
    u = change_of_basis(build_basis(d))
    assert np.max(np.abs(u @ u.conj().T - np.eye(d * d))) < 1e-12


def test_hermitian_coordinates_are_real():
    rng = np.random.default_rng(2)
    u = change_of_basis(build_basis(2))
    for _ in range(20):
        a = random_hermitian(rng, 2)
        assert np.max(np.abs((u @ vectorize(a)).imag)) < 1e-12


@pytest.mark.parametrize("d", [2, 3])
def test_conjugation_superoperator_is_real(d):
    # U (A* kron A) U^dag stays real for arbitrary complex A.
    rng = np.random.default_rng(3)
    u = change_of_basis(build_basis(d))
    for _ in range(100):
        a = random_complex(rng, d)
        m = u @ np.kron(a.conj(), a) @ u.conj().T
        assert np.max(np.abs(m.imag)) < 1e-10


def test_state_coords_maximally_mixed():
    b = build_basis(2)
    coords = state_to_coords(np.eye(2) / 2, b)
    assert abs(coords.trace_component - 1 / np.sqrt(2)) < 1e-14
    assert np.allclose(coords.x, 0)


def test_state_coords_ground_state():
    b = build_basis(2)
    ket0 = np.array([[1, 0], [0, 0]], dtype=complex)
    coords = state_to_coords(ket0, b)
    # direct inner products: Tr(sigma_k |0><0|)/sqrt(2)
    expected = [np.trace(s @ ket0).real / np.sqrt(2) for s in (SX, SY, SZ)]
    assert np.allclose(coords.x, expected)
    assert np.allclose(coords.x, [0, 0, 1 / np.sqrt(2)])


def test_state_coords_roundtrip_d3():
    rng = np.random.default_rng(4)
    b = build_basis(3)
    rho = random_hermitian(rng, 3)
    back = coords_to_state(state_to_coords(rho, b), b)
    assert np.linalg.norm(back - rho) < 1e-12


def test_state_coords_linearity():
    rng = np.random.default_rng(5)
    b = build_basis(3)
    r1, r2 = random_hermitian(rng, 3), random_hermitian(rng, 3)
    a, be = 0.3, -1.7
    c1, c2 = state_to_coords(r1, b), state_to_coords(r2, b)
    c12 = state_to_coords(a * r1 + be * r2, b)
    assert np.allclose(c12.x, a * c1.x + be * c2.x)
    assert np.isclose(c12.trace_component, a * c1.trace_component + be * c2.trace_component)


def test_non_hermitian_input_rejected():
    b = build_basis(2)
    with pytest.raises(ValidationError):
        state_to_coords(np.array([[0, 1], [0, 0]], dtype=complex), b)
    with pytest.raises(ValidationError):
        povm_element_to_coords(np.array([[0, 1j], [1j, 0]]), b)


def test_povm_coords_identity_and_projector():
    b = build_basis(2)
    c = povm_element_to_coords(np.eye(2), b)
    assert abs(c.c0 - np.sqrt(2)) < 1e-14
    assert np.allclose(c.c, 0)
    c = povm_element_to_coords(np.array([[1, 0], [0, 0]], dtype=complex), b)
    assert abs(c.c0 - 1 / np.sqrt(2)) < 1e-14
    assert np.allclose(c.c, [0, 0, 1 / np.sqrt(2)])
    back = coords_to_povm_element(PovmCoordinates(c.c0, c.c), b)
    assert np.allclose(back, [[1, 0], [0, 0]])


def test_povm_coords_completeness_sums():
    rng = np.random.default_rng(6)
    b = build_basis(2)
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    p1 = g @ g.conj().T
    p1 = 0.6 * p1 / np.linalg.eigvalsh(p1)[-1]
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    p2 = g @ g.conj().T
    p2 = 0.3 * p2 / np.linalg.eigvalsh(p2)[-1]
    elements = [p1, p2, np.eye(2) - p1 - p2]
    coords = [povm_element_to_coords(p, b) for p in elements]
    assert abs(sum(c.c0 for c in coords) - np.sqrt(2)) < 1e-12
    assert np.linalg.norm(sum(c.c for c in coords)) < 1e-12


def test_coords_to_state_shape_check():
    b = build_basis(2)
    with pytest.raises(ValidationError):
        coords_to_state(StateCoordinates(1.0, np.zeros(5)), b)
