import numpy as np
import pytest
from scipy.linalg import expm

from jointtomo import (
    KrausChannel,
    ProcessEnsemble,
    ValidationError,
    amplitude_damping,
    build_basis,
    build_regression_matrices,
    change_of_basis,
    devectorize,
    discretize_hamiltonian,
    hamiltonian_generator,
    haar_unitary,
    is_generalized_unital,
    make_named_channel,
    min_hamiltonian_count,
    mixed_unitary_transfer,
    numerical_rank,
    pauli,
    pauli_sandwich_processes,
    rank_bound,
    state_to_coords,
    superoperator,
    transfer_matrix,
    vectorize,
)


def random_density(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_mixed_channel(rng, d):
    """Random channel drawn from unital, scaled-unitary, and generic CP kinds."""
    kind = rng.integers(3)
    if kind == 0:  # mixed-unitary: unital
        u1, u2 = haar_unitary(d, rng), haar_unitary(d, rng)
        w = rng.uniform(0.2, 0.8)
        kraus = np.stack([np.sqrt(w) * u1, np.sqrt(1 - w) * u2])
        return KrausChannel(d, kraus)
    if kind == 1:  # scaled unitary: generalized-unital, non-TP
        alpha = rng.uniform(0.3, 1.0)
        return make_named_channel("scaled", alpha=alpha,
                                  channel=make_named_channel("unitary", u=haar_unitary(d, rng)))
    return make_named_channel("random_cp", d=d, rank=d * d, seed=int(rng.integers(2 ** 32)))


def test_superoperator_identity_and_unitary():
    b = superoperator(KrausChannel(2, np.eye(2)[None]))
    assert np.allclose(b, np.eye(4))
    rng = np.random.default_rng(0)
    u = haar_unitary(3, rng)
    assert np.allclose(superoperator(make_named_channel("unitary", u=u)), np.kron(u.conj(), u))


def test_superoperator_preserves_identity_row_for_tp():
    # vec(I)^dag B = vec(I)^dag whenever the channel is trace preserving
    rng = np.random.default_rng(20)
    for d in (2, 3):
        ch = make_named_channel("random_cp", d=d, rank=d * d,
                                seed=int(rng.integers(2 ** 32)), tp=True)
        vec_i = vectorize(np.eye(d)).conj()
        assert np.linalg.norm(vec_i @ superoperator(ch) - vec_i) < 1e-10


def test_superoperator_matches_kraus_action():
    rng = np.random.default_rng(1)
    ch = make_named_channel("random_cp", d=4, rank=6, seed=11, tp=True)
    b = superoperator(ch)
    for _ in range(20):
        rho = random_density(rng, 4)
        direct = ch.apply(rho)
        via_vec = devectorize(b @ vectorize(rho))
        assert np.linalg.norm(direct - via_vec) < 1e-12


def test_transfer_identity_channel():
    tm = transfer_matrix(KrausChannel(2, np.eye(2)[None]), build_basis(2))
    assert abs(tm.r - 1) < 1e-12
    assert np.allclose(tm.t, 0) and np.allclose(tm.h, 0)
    assert np.allclose(tm.e, np.eye(3))


def test_transfer_bit_flip_bloch_action():
    # hand oracle: x -> x, y -> (2p-1) y, z -> (2p-1) z
    basis = build_basis(2)
    for p in (0.0, 0.25, 0.7, 1.0):
        tm = transfer_matrix(make_named_channel("bit_flip", p=p), basis)
        assert np.allclose(tm.e, np.diag([1.0, 2 * p - 1, 2 * p - 1]), atol=1e-12)
        assert np.allclose(tm.h, 0, atol=1e-12)


def test_transfer_amplitude_damping_not_unital():
    tm = transfer_matrix(amplitude_damping(0.3), build_basis(2))
    assert np.linalg.norm(tm.h) > 0.1


def test_transfer_consistent_with_superoperator():
    rng = np.random.default_rng(2)
    for d in (2, 3):
        basis = build_basis(d)
        u = change_of_basis(basis)
        for _ in range(10):
            ch = random_mixed_channel(rng, d)
            tm = transfer_matrix(ch, basis)
            assert np.max(np.abs(tm.full - (u @ superoperator(ch) @ u.conj().T).real)) < 1e-10


def test_generalized_unital_flags():
    rng = np.random.default_rng(3)
    flag, alpha = is_generalized_unital(make_named_channel("unitary", u=haar_unitary(2, rng)))
    assert flag and abs(alpha - 1) < 1e-10
    scaled = make_named_channel("scaled", alpha=0.6,
                                channel=make_named_channel("unitary", u=haar_unitary(2, rng)))
    flag, alpha = is_generalized_unital(scaled)
    assert flag and abs(alpha - 0.6) < 1e-10
    flag, alpha = is_generalized_unital(amplitude_damping(0.3))
    assert not flag and alpha is None


@pytest.mark.parametrize("d", [2, 3])
def test_generalized_unital_matches_direct_definition(d):
    # h-block verdict must agree with sum_i A_i A_i^dag = alpha I at the same tol.
    rng = np.random.default_rng(4 + d)
    for _ in range(200):
        ch = random_mixed_channel(rng, d)
        flag, _ = is_generalized_unital(ch, tol=1e-8)
        image = np.einsum("kij,klj->il", ch.kraus, ch.kraus.conj())
        alpha = np.trace(image).real / d
        direct = np.linalg.norm(image - alpha * np.eye(d)) <= 1e-8
        assert flag == direct


def test_generator_zero_hamiltonian():
    assert np.allclose(hamiltonian_generator(np.zeros((2, 2)), build_basis(2)), 0)


def test_generator_antisymmetric_and_matches_unitary_transfer():
    rng = np.random.default_rng(5)
    for d, t in ((2, 0.37), (3, 0.7)):
        basis = build_basis(d)
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        h = (g + g.conj().T) / 2
        h -= np.trace(h) / d * np.eye(d)
        r = hamiltonian_generator(h, basis)
        assert np.max(np.abs(r + r.T)) < 1e-12
        ch = make_named_channel("unitary", u=expm(-1j * h * t))
        assert np.max(np.abs(expm(r * t) - transfer_matrix(ch, basis).e)) < 1e-10


def test_generator_z_rotation_in_xy_plane():
    basis = build_basis(2)
    r = hamiltonian_generator(pauli("z") / 2, basis)
    dt = 0.9
    q = expm(r * dt)
    expected = np.array([
        [np.cos(dt), np.sin(dt), 0.0],
        [-np.sin(dt), np.cos(dt), 0.0],
        [0.0, 0.0, 1.0],
    ])
    # orientation fixed by the unitary-channel transfer matrix itself
    ch = make_named_channel("unitary", u=expm(-1j * pauli("z") / 2 * dt))
    assert np.allclose(q, transfer_matrix(ch, basis).e, atol=1e-12)
    assert np.allclose(np.abs(q), np.abs(expected), atol=1e-12)
    assert abs(q[2, 2] - 1) < 1e-12


def test_generator_validation():
    basis = build_basis(2)
    with pytest.raises(ValidationError):
        hamiltonian_generator(np.array([[0, 1], [0, 0]]), basis)
    with pytest.raises(ValidationError):
        hamiltonian_generator(np.eye(2), basis)


def test_discretize_powers():
    qs = discretize_hamiltonian(np.zeros((3, 3)), 1.0, 4)
    assert all(np.allclose(q, np.eye(3)) for q in qs)
    r = hamiltonian_generator(pauli("z") / 2, build_basis(2))
    qs = discretize_hamiltonian(r, 0.5, 3)
    assert np.allclose(qs[1], qs[0] @ qs[0])
    assert np.allclose(qs[2], qs[0] @ qs[0] @ qs[0])
    for q in qs:
        assert np.allclose(q @ q.T, np.eye(3), atol=1e-12)
    with pytest.raises(ValidationError):
        discretize_hamiltonian(r, 0.5, 0)
    with pytest.raises(ValidationError):
        discretize_hamiltonian(r, -1.0, 2)


def test_mixed_unitary_transfer_cases():
    rng = np.random.default_rng(6)
    basis = build_basis(2)
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h1 = (g + g.conj().T) / 2
    h1 -= np.trace(h1) / 2 * np.eye(2)
    r1 = hamiltonian_generator(h1, basis)
    assert np.allclose(mixed_unitary_transfer([1.0], [h1], 0.8, basis), expm(r1 * 0.8))
    assert np.allclose(mixed_unitary_transfer([0.5, 0.5], [h1, h1], 0.8, basis), expm(r1 * 0.8))
    with pytest.raises(ValidationError):
        mixed_unitary_transfer([0.5, -0.1], [h1, h1], 0.8, basis)
    with pytest.raises(ValidationError):
        mixed_unitary_transfer([0.8, 0.4], [h1, h1], 0.8, basis)


def test_mixed_unitary_transfer_matches_kraus_dynamics():
    # E(t) x0 must agree with the coherence vector of the mixed-unitary output.
    rng = np.random.default_rng(7)
    basis = build_basis(4)
    hams = []
    for _ in range(2):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = (g + g.conj().T) / 2
        hams.append(h - np.trace(h) / 4 * np.eye(4))
    t = 0.6
    e = mixed_unitary_transfer([0.3, 0.7], hams, t, basis)
    rho = random_density(rng, 4)
    x0 = state_to_coords(rho, basis).x
    out = sum(w * expm(-1j * h * t) @ rho @ expm(-1j * h * t).conj().T
              for w, h in zip((0.3, 0.7), hams))
    assert np.linalg.norm(e @ x0 - state_to_coords(out, basis).x) < 1e-10


def test_named_channels():
    assert np.allclose(superoperator(make_named_channel("bit_flip", p=1.0)), np.eye(4))
    ch1 = make_named_channel("random_cp", d=2, rank=4, seed=7)
    ch2 = make_named_channel("random_cp", d=2, rank=4, seed=7)
    assert np.array_equal(ch1.kraus, ch2.kraus)
    with pytest.raises(ValidationError):
        make_named_channel("bit_flip", p=1.5)
    with pytest.raises(ValidationError):
        make_named_channel("scaled", alpha=0.0, channel=ch1)
    with pytest.raises(ValidationError):
        make_named_channel("unitary", u=np.ones((2, 2)))
    with pytest.raises(ValidationError):
        make_named_channel("warp", p=1)


def test_kraus_inequality_enforced():
    with pytest.raises(ValidationError):
        KrausChannel(2, 1.2 * np.eye(2)[None])


def test_generalized_unital_coherence_pathway():
    # for generalized-unital processes the e-block alone propagates x.
    rng = np.random.default_rng(8)
    basis = build_basis(2)
    ch = make_named_channel("scaled", alpha=0.8,
                            channel=make_named_channel("unitary", u=haar_unitary(2, rng)))
    tm = transfer_matrix(ch, basis)
    for _ in range(50):
        rho = random_density(rng, 2)
        out = ch.apply(rho)
        assert np.linalg.norm(tm.e @ state_to_coords(rho, basis).x
                              - state_to_coords(out, basis).x) < 1e-10


def test_regression_matrices_single_identity():
    ens = ProcessEnsemble((KrausChannel(2, np.eye(2)[None]),))
    reg = build_regression_matrices(ens, build_basis(2))
    assert reg.rank_b == 1
    assert reg.b.shape == (1, 9)
    assert not reg.complete_v1 and not reg.complete_v2


def test_tp_ensemble_rank_ceiling():
    rng = np.random.default_rng(9)
    chans = tuple(make_named_channel("random_cp", d=2, rank=4, seed=int(rng.integers(2 ** 32)),
                                     tp=True) for _ in range(20))
    ens = ProcessEnsemble(chans)
    reg = build_regression_matrices(ens, build_basis(2))
    assert reg.rank_b_natural <= 13
    assert rank_bound(ens) == 13
    assert not reg.complete_v2


def test_flip_ensembles_are_rank_two():
    basis = build_basis(2)
    for kind in ("bit_flip", "phase_flip"):
        ens = ProcessEnsemble(tuple(make_named_channel(kind, p=p)
                                    for p in (0.1, 0.3, 0.5, 0.7, 0.9)))
        reg = build_regression_matrices(ens, basis)
        assert reg.rank_b == 2
        assert reg.rank_b_natural == 2


def test_mixed_dimension_ensemble_rejected():
    with pytest.raises(ValidationError):
        ProcessEnsemble((KrausChannel(2, np.eye(2)[None]), KrausChannel(3, np.eye(3)[None])))


def test_rank_bound_grouping():
    rng = np.random.default_rng(10)
    unitaries = [make_named_channel("unitary", u=haar_unitary(2, rng)) for _ in range(10)]
    # one group: 10 TP channels
    assert rank_bound(ProcessEnsemble(tuple(unitaries))) == 10
    # two groups of 5 with distinct Kraus sums (I and 0.8 I)
    scaled = [make_named_channel("scaled", alpha=0.8, channel=c) for c in unitaries[5:]]
    ens = ProcessEnsemble(tuple(unitaries[:5] + scaled))
    assert rank_bound(ens) == 10
    assert rank_bound(ProcessEnsemble((unitaries[0],))) == 1


def test_min_hamiltonian_count_values():
    assert min_hamiltonian_count(2) == (3, 3)
    assert min_hamiltonian_count(3) == (10, 7)
    assert min_hamiltonian_count(4) == (18, 13)


@pytest.mark.parametrize("d", [2, 3])
def test_single_hamiltonian_sampling_rank_ceiling(d):
    # the stacked powers of one discretized generator never exceed d^2-d+1.
    rng = np.random.default_rng(11 + d)
    basis = build_basis(d)
    for _ in range(5):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        h = (g + g.conj().T) / 2
        h -= np.trace(h) / d * np.eye(d)
        r = hamiltonian_generator(h, basis)
        qs = discretize_hamiltonian(r, 0.7, 10)
        stack = np.stack([vectorize(q) for q in qs])
        assert numerical_rank(stack) <= d * d - d + 1


def choi_matrix(ch):
    d = ch.d
    j = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1.0
            j += np.kron(e, ch.apply(e))
    return j


def test_pauli_sandwich_identity_case():
    chs = pauli_sandwich_processes(np.eye(2), np.eye(2), 0.1)
    rng = np.random.default_rng(12)
    rho = random_density(rng, 2)
    assert np.linalg.norm(chs[0].apply(rho) - 0.1 * rho) < 1e-12
    assert np.linalg.norm(chs[1].apply(rho)) < 1e-12
    assert np.linalg.norm(chs[2].apply(rho)) < 1e-12
    assert np.linalg.norm(chs[3].apply(rho)) < 1e-12


def test_pauli_sandwich_reconstruction():
    rng = np.random.default_rng(13)
    for names, g in ((("x", "z"), 0.05), (("xy", "zi"), 0.04)):
        v1, v2 = pauli(names[0]), pauli(names[1])
        chs = pauli_sandwich_processes(v1, v2, g)
        rho = random_density(rng, v1.shape[0])
        rec = (chs[0].apply(rho) - chs[1].apply(rho)
               - 1j * (chs[2].apply(rho) - chs[3].apply(rho)))
        assert np.linalg.norm(rec - g * v1 @ rho @ v2.conj()) < 1e-10
        for ch in chs:
            assert np.linalg.eigvalsh(choi_matrix(ch))[0] > -1e-10


def test_pauli_sandwich_rejects_large_coupling():
    with pytest.raises(ValidationError) as err:
        pauli_sandwich_processes(pauli("x"), pauli("z"), 3.0)
    assert "admissible" in str(err.value)


def test_pauli_sandwich_input_validation():
    with pytest.raises(ValidationError):
        pauli_sandwich_processes(np.array([[0, 1], [0, 0]]), np.eye(2), 0.1)
    with pytest.raises(ValidationError):
        pauli_sandwich_processes(np.eye(2), np.eye(2), -0.1)
