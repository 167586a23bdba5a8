"""Quantum processes: Kraus channels, transfer matrices, probe families.

A process is stored as a list of Kraus matrices ``A_i`` acting as
``rho -> sum_i A_i rho A_i^dag`` with ``sum_i A_i^dag A_i <= I``.  Two derived
representations drive the estimation pipeline:

* the natural superoperator ``sum_i conj(A_i) kron A_i`` acting on ``vec(rho)``,
* the real transfer matrix ``U (sum_i conj(A_i) kron A_i) U^dag`` in the
  orthonormal Hermitian basis, partitioned into a scalar ``r``, a row ``t``, a
  column ``h`` and the block ``e`` that maps coherence vectors.

A process maps the identity to a multiple of itself exactly when ``h = 0``
("generalized-unital"), which is the regime where the coherence-vector
regression applies.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .basis import OperatorBasis, build_basis, change_of_basis, vectorize
from .errors import ValidationError

# Tolerance on the Kraus inequality max eig(sum A^dag A) <= 1.
KRAUS_TOL = 1e-8
# Singular values below RANK_RTOL * sigma_max count as zero in rank claims.
RANK_RTOL = 1e-8
# Imaginary residue allowed when casting a superoperator to its real transfer form.
TRANSFER_IMAG_TOL = 1e-10


@dataclass(frozen=True)
class KrausChannel:
    """A completely positive, trace-non-increasing map given by Kraus matrices."""

    d: int
    kraus: np.ndarray
    label: str = ""

    def __post_init__(self):
        kraus = np.asarray(self.kraus, dtype=complex)
        if kraus.ndim != 3 or kraus.shape[0] < 1 or kraus.shape[1:] != (self.d, self.d):
            raise ValidationError(
                f"kraus must have shape (k, {self.d}, {self.d}) with k >= 1, got {kraus.shape}"
            )
        object.__setattr__(self, "kraus", kraus)
        gram = self.kraus_gram()
        top = float(np.linalg.eigvalsh(gram)[-1])
        if top > 1.0 + KRAUS_TOL:
            raise ValidationError(
                f"Kraus inequality violated: max eig(sum A^dag A) = {top:.6g} > 1"
            )

    def kraus_gram(self) -> np.ndarray:
        """``sum_i A_i^dag A_i``; equals I exactly for trace-preserving maps."""
        return np.einsum("kij,kil->jl", self.kraus.conj(), self.kraus)

    @property
    def is_trace_preserving(self) -> bool:
        return bool(np.linalg.norm(self.kraus_gram() - np.eye(self.d)) <= KRAUS_TOL * self.d)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Evolve a matrix through the channel by direct Kraus application."""
        rho = np.asarray(rho, dtype=complex)
        return np.einsum("kij,jl,kml->im", self.kraus, rho, self.kraus.conj())


@dataclass(frozen=True)
class TransferMatrix:
    """Real matrix form of a channel in the orthonormal Hermitian basis."""

    full: np.ndarray
    r: float
    t: np.ndarray
    h: np.ndarray
    e: np.ndarray


@dataclass(frozen=True)
class ProcessEnsemble:
    """An ordered family of channels sharing one dimension."""

    channels: tuple

    def __post_init__(self):
        channels = tuple(self.channels)
        if not channels:
            raise ValidationError("ensemble must contain at least one channel")
        d = channels[0].d
        if any(ch.d != d for ch in channels):
            raise ValidationError("all channels in an ensemble must share the dimension")
        object.__setattr__(self, "channels", channels)

    @property
    def d(self) -> int:
        return self.channels[0].d

    def __len__(self) -> int:
        return len(self.channels)

    @property
    def labels(self) -> tuple:
        return tuple(ch.label for ch in self.channels)


def superoperator(channel: KrausChannel) -> np.ndarray:
    """Natural-basis superoperator ``sum_i conj(A_i) kron A_i``."""
    b = np.zeros((channel.d ** 2, channel.d ** 2), dtype=complex)
    for a in channel.kraus:
        b += np.kron(a.conj(), a)
    return b


def transfer_matrix(channel: KrausChannel, basis: OperatorBasis) -> TransferMatrix:
    """Transfer matrix ``U B U^dag`` with its (r, t, h, e) partition."""
    if channel.d != basis.d:
        raise ValidationError(f"dimension mismatch: channel {channel.d}, basis {basis.d}")
    u = change_of_basis(basis)
    full_c = u @ superoperator(channel) @ u.conj().T
    imag = float(np.max(np.abs(full_c.imag)))
    if imag > TRANSFER_IMAG_TOL * max(1.0, float(np.max(np.abs(full_c.real)))):
        raise ValidationError(f"transfer matrix has imaginary residue {imag:.3e}")
    full = full_c.real
    return TransferMatrix(
        full=full,
        r=float(full[0, 0]),
        t=full[0, 1:].copy(),
        h=full[1:, 0].copy(),
        e=full[1:, 1:].copy(),
    )


def is_generalized_unital(channel: KrausChannel, tol: float = 1e-8):
    """Whether the channel maps I to alpha*I, and that alpha when it does.

    Decided through the transfer-matrix column block: the map is
    generalized-unital exactly when ``h = 0``, in which case alpha equals the
    scalar block ``r``.
    """
    tm = transfer_matrix(channel, build_basis(channel.d))
    if np.linalg.norm(tm.h) <= tol:
        return True, tm.r
    return False, None


def hamiltonian_generator(h: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Antisymmetric generator of coherence-vector dynamics for Hamiltonian h.

    Entries are ``R[a, b] = i Tr([h, Omega_a] Omega_b)`` over the traceless
    part of the basis, so that ``exp(R t)`` equals the e-block of the transfer
    matrix of the unitary channel ``exp(-i h t)``.
    """
    h = np.asarray(h, dtype=complex)
    scale = max(np.linalg.norm(h), 1e-30)
    if np.linalg.norm(h - h.conj().T) > 1e-9 * scale:
        raise ValidationError("Hamiltonian must be Hermitian")
    if abs(np.trace(h)) > 1e-9 * scale:
        raise ValidationError("Hamiltonian must be traceless")
    if h.shape != (basis.d, basis.d):
        raise ValidationError(f"dimension mismatch: H {h.shape}, basis {basis.d}")
    n = basis.n_traceless
    omegas = basis.omegas[1:]
    comms = np.einsum("ij,ajk->aik", h, omegas) - np.einsum("aij,jk->aik", omegas, h)
    r = 1j * np.einsum("aij,bji->ab", comms, omegas)
    if np.max(np.abs(r.imag)) > 1e-12 * max(1.0, float(np.max(np.abs(r.real)))):
        raise ValidationError("generator has unexpected imaginary part")
    r = r.real
    return (r - r.T) / 2.0  # kill roundoff asymmetry; exact antisymmetry by construction


def discretize_hamiltonian(r: np.ndarray, dt: float, n: int) -> list:
    """Powers ``Q^1 .. Q^n`` of the one-step map ``Q = exp(r dt)``."""
    if n < 1:
        raise ValidationError(f"need at least one sampling point, got n={n}")
    if dt <= 0:
        raise ValidationError(f"sampling interval must be positive, got {dt}")
    q = expm(np.asarray(r, dtype=float) * dt)
    out = []
    acc = np.eye(q.shape[0])
    for _ in range(n):
        acc = acc @ q
        out.append(acc.copy())
    return out


def mixed_unitary_transfer(weights, hamiltonians, t: float, basis: OperatorBasis) -> np.ndarray:
    """Coherence-vector map ``sum_i w_i exp(R_i t)`` of a mixed-unitary process."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or len(weights) != len(hamiltonians):
        raise ValidationError("need one weight per Hamiltonian")
    if np.any(weights <= 0):
        raise ValidationError("mixture weights must be positive")
    if weights.sum() > 1.0 + 1e-12:
        raise ValidationError(f"mixture weights sum to {weights.sum():.6g} > 1")
    n = basis.n_traceless
    out = np.zeros((n, n))
    for w, h in zip(weights, hamiltonians):
        out += w * expm(hamiltonian_generator(h, basis) * t)
    return out


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with phase fixing."""
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


_PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(name: str) -> np.ndarray:
    """Pauli matrix or Pauli-string unitary, e.g. ``"x"`` or ``"xz"``."""
    mats = [_PAULI[c] for c in name.lower()]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def make_named_channel(kind: str, **params) -> KrausChannel:
    """Factory for the probe-channel families used throughout.

    Kinds: ``bit_flip(p)``, ``phase_flip(p)``, ``unitary(u)``,
    ``scaled(alpha, channel)``, ``random_cp(d, rank, seed, tp=False)``.
    ``random_cp`` draws Ginibre Kraus matrices and rescales them so the Kraus
    sum is I (tp=True) or strictly below I with a seed-dependent margin.
    """
    if kind == "bit_flip":
        p = params["p"]
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"flip probability must be in [0, 1], got {p}")
        kraus = np.stack([np.sqrt(p) * _PAULI["i"], np.sqrt(1.0 - p) * _PAULI["x"]])
        return KrausChannel(2, kraus, label=params.get("label", f"bit_flip({p})"))
    if kind == "phase_flip":
        p = params["p"]
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"flip probability must be in [0, 1], got {p}")
        kraus = np.stack([np.sqrt(p) * _PAULI["i"], np.sqrt(1.0 - p) * _PAULI["z"]])
        return KrausChannel(2, kraus, label=params.get("label", f"phase_flip({p})"))
    if kind == "unitary":
        u = np.asarray(params["u"], dtype=complex)
        if np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0])) > 1e-9 * u.shape[0]:
            raise ValidationError("matrix is not unitary")
        return KrausChannel(u.shape[0], u[None, :, :], label=params.get("label", "unitary"))
    if kind == "scaled":
        alpha = params["alpha"]
        ch = params["channel"]
        if not 0.0 < alpha <= 1.0:
            raise ValidationError(f"scale must be in (0, 1], got {alpha}")
        return KrausChannel(ch.d, np.sqrt(alpha) * ch.kraus,
                            label=params.get("label", f"scaled({alpha},{ch.label})"))
    if kind == "random_cp":
        d, rank, seed = params["d"], params["rank"], params["seed"]
        if rank < 1:
            raise ValidationError(f"rank must be >= 1, got {rank}")
        rng = np.random.default_rng(seed)
        g = rng.normal(size=(rank, d, d)) + 1j * rng.normal(size=(rank, d, d))
        gram = np.einsum("kij,kil->jl", g.conj(), g)
        if params.get("tp", False):
            w, v = np.linalg.eigh(gram)
            inv_sqrt = v @ np.diag(1.0 / np.sqrt(w)) @ v.conj().T
            kraus = np.einsum("kij,jl->kil", g, inv_sqrt)
        else:
            beta = rng.uniform(0.5, 0.95)
            top = float(np.linalg.eigvalsh(gram)[-1])
            kraus = g * np.sqrt(beta / top)
        return KrausChannel(d, kraus, label=params.get("label", f"random_cp({d},{rank},{seed})"))
    raise ValidationError(f"unknown channel kind {kind!r}")


def amplitude_damping(gamma: float) -> KrausChannel:
    """Qubit amplitude damping; non-unital for gamma > 0."""
    if not 0.0 <= gamma <= 1.0:
        raise ValidationError(f"damping rate must be in [0, 1], got {gamma}")
    kraus = np.stack([
        np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - gamma)]], dtype=complex),
        np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]], dtype=complex),
    ])
    return KrausChannel(2, kraus, label=f"amplitude_damping({gamma})")


def _choi_matrix(pair_maps) -> np.ndarray:
    """Choi matrix of ``rho -> sum_k X_k rho Y_k`` given (X_k, Y_k) pairs."""
    d = pair_maps[0][0].shape[0]
    j = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1.0
            out = sum(x @ e @ y for x, y in pair_maps)
            j += np.kron(e, out)
    return j


def _kraus_from_choi(j: np.ndarray, d: int, scale: float, sign: float) -> np.ndarray:
    """Kraus matrices of the positive (sign=+1) or negative part of a Choi matrix."""
    vals, vecs = np.linalg.eigh(j)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(vals))))
    kraus = []
    for lam, vec in zip(vals, vecs.T):
        if sign * lam > tol:
            kraus.append(np.sqrt(sign * lam * scale) * vec.reshape((d, d), order="F"))
    if not kraus:
        kraus = [np.zeros((d, d), dtype=complex)]
    return np.stack(kraus)


def pauli_sandwich_processes(v1: np.ndarray, v2: np.ndarray, g: float):
    """Four CP channels whose signed combination realizes ``rho -> g V1 rho V2*``.

    ``V1`` and ``V2`` must be Hermitian Pauli-string unitaries.  The returned
    channels ``(phi1p, phi1m, phi2p, phi2m)`` satisfy, as maps,
    ``(phi1p - phi1m) - i (phi2p - phi2m) = g V1 rho V2*``.  Each channel comes
    from the signed eigendecomposition of the Choi matrix of one
    Hermitian-preserving half, scaled by g; if g is too large for all four to
    stay trace-non-increasing, the maximal admissible g is reported.
    """
    v1 = np.asarray(v1, dtype=complex)
    v2 = np.asarray(v2, dtype=complex)
    d = v1.shape[0]
    for name, v in (("V1", v1), ("V2", v2)):
        if np.linalg.norm(v - v.conj().T) > 1e-9 * d:
            raise ValidationError(f"{name} must be Hermitian")
        if np.linalg.norm(v @ v.conj().T - np.eye(d)) > 1e-9 * d:
            raise ValidationError(f"{name} must be unitary")
    if g <= 0:
        raise ValidationError(f"coupling must be positive, got {g}")
    v2c = v2.conj()
    # Hermitian-preserving halves of rho -> V1 rho V2*, each divided by g.
    map1 = [(v1 / 2.0, v2c), (v2c / 2.0, v1)]
    map2 = [(1j * v1 / 2.0, v2c), (-1j * v2c / 2.0, v1)]
    channels = []
    worst = 0.0
    for pair in (map1, map2):
        j = _choi_matrix(pair)
        for sign in (1.0, -1.0):
            kraus = _kraus_from_choi(j, d, g, sign)
            gram = np.einsum("kij,kil->jl", kraus.conj(), kraus)
            worst = max(worst, float(np.linalg.eigvalsh(gram)[-1]))
            channels.append(kraus)
    if worst > 1.0 + KRAUS_TOL:
        raise ValidationError(
            f"coupling g={g} makes a component unphysical; maximal admissible g = {g / worst:.6g}"
        )
    labels = ("sandwich_1p", "sandwich_1m", "sandwich_2p", "sandwich_2m")
    return tuple(KrausChannel(d, k, label=l) for k, l in zip(channels, labels))


def numerical_rank(m: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Rank by counting singular values above ``rtol * sigma_max``."""
    s = np.linalg.svd(np.asarray(m), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True)
class RegressionMatrices:
    """Stacked regression matrices of an ensemble plus completeness verdicts."""

    b: np.ndarray
    b_natural: np.ndarray
    rank_b: int
    rank_b_natural: int
    complete_v1: bool
    complete_v2: bool
    transfers: tuple = field(repr=False, default=())


def build_regression_matrices(ens: ProcessEnsemble, basis: OperatorBasis) -> RegressionMatrices:
    """Rows ``vec(E_a)^T`` (real) and ``vec(B_a)^T`` (complex) for every channel.

    The coherence-vector problem is informationally complete when the real
    matrix has full column rank (d^2-1)^2; the natural-basis problem when the
    complex matrix reaches rank d^4.
    """
    if ens.d != basis.d:
        raise ValidationError(f"dimension mismatch: ensemble {ens.d}, basis {basis.d}")
    transfers = tuple(transfer_matrix(ch, basis) for ch in ens.channels)
    b = np.stack([vectorize(tm.e) for tm in transfers]).astype(float)
    b_nat = np.stack([vectorize(superoperator(ch)) for ch in ens.channels])
    rank_b = numerical_rank(b)
    rank_b_nat = numerical_rank(b_nat)
    n = basis.n_traceless
    return RegressionMatrices(
        b=b,
        b_natural=b_nat,
        rank_b=rank_b,
        rank_b_natural=rank_b_nat,
        complete_v1=rank_b == n * n,
        complete_v2=rank_b_nat == basis.d ** 4,
        transfers=transfers,
    )


def rank_bound(ens: ProcessEnsemble, tol: float = 1e-8) -> int:
    """Upper bound on the natural-basis regression rank.

    Channels are grouped by equal Kraus sums ``sum A^dag A``; each group of
    size L_j contributes at most ``min(L_j, d^4 - d^2 + 1)`` and the total is
    capped at d^4.
    """
    d = ens.d
    groups = []
    for ch in ens.channels:
        gram = ch.kraus_gram()
        for rep, count in groups:
            if np.linalg.norm(gram - rep) < tol:
                count[0] += 1
                break
        else:
            groups.append((gram, [1]))
    per_group = d ** 4 - d ** 2 + 1
    total = sum(min(count[0], per_group) for _, count in groups)
    return int(min(total, d ** 4))


def min_hamiltonian_count(d: int):
    """Minimum number of distinct Hamiltonians (and sampling points each)
    required for a complete closed-system probe family in dimension d."""
    if d < 2:
        raise ValidationError(f"dimension must be >= 2, got {d}")
    n_min = d * d - d + 1
    count = int(np.ceil((d * d - 1) ** 2 / n_min))
    return count, n_min
