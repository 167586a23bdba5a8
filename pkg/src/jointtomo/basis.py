"""Orthonormal Hermitian operator basis and real coordinate maps.

Every d-dimensional Hilbert space gets the basis ``Omega_0 .. Omega_{d^2-1}``
built from generalized Gell-Mann matrices:

* ``Omega_0 = I / sqrt(d)``,
* the symmetric off-diagonal elements ``(|j><k| + |k><j|) / sqrt(2)``,
* the antisymmetric elements ``-i (|j><k| - |k><j|) / sqrt(2)``,
* the diagonal elements ``diag(1, .., 1, -l, 0, ..) / sqrt(l (l+1))``.

All elements are Hermitian, mutually orthonormal under the Hilbert-Schmidt
inner product ``Tr(X^dag Y)``, and traceless except ``Omega_0``.  Expanding a
Hermitian matrix in this basis gives real coordinates, which is what turns the
tomography regressions in the rest of the package into real least-squares
problems.

Vectorization is column-major throughout: ``vec(A)`` stacks the columns of
``A``, so ``vec(A B C) = (C^T kron A) vec(B)``.  Every Kronecker identity in
this package assumes that convention.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError

# Relative Frobenius defect accepted before an input is rejected as
# non-Hermitian instead of being silently symmetrized.
HERMITICITY_RTOL = 1e-9


def vectorize(a: np.ndarray) -> np.ndarray:
    """Stack the columns of a matrix into a single vector."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValidationError(f"vectorize expects a matrix, got ndim={a.ndim}")
    return a.reshape(-1, order="F")


def devectorize(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize` for square matrices."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValidationError(f"devectorize expects a vector, got ndim={v.ndim}")
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValidationError(f"devectorize needs a perfect-square length, got {v.size}")
    return v.reshape((d, d), order="F")


@dataclass(frozen=True)
class OperatorBasis:
    """Orthonormal Hermitian basis for d x d matrices.

    ``omegas`` has shape ``(d^2, d, d)``; ``omegas[0]`` is ``I/sqrt(d)`` and
    the remaining elements are traceless.
    """

    d: int
    omegas: np.ndarray

    @property
    def n_traceless(self) -> int:
        return self.d * self.d - 1


@lru_cache(maxsize=16)
def build_basis(d: int) -> OperatorBasis:
    """Construct the generalized Gell-Mann basis for dimension ``d``.

    Ordering is fixed: identity component first, then all symmetric
    off-diagonal pairs in lexicographic (j, k) order, then all antisymmetric
    pairs, then the diagonal elements.  For d=2 this reproduces the Pauli
    ordering (x, y, z) up to the 1/sqrt(2) normalization.
    """
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise ValidationError(f"basis dimension must be an integer >= 2, got {d!r}")
    d = int(d)
    mats = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1.0 / np.sqrt(2.0)
            mats.append(m)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j / np.sqrt(2.0)
            m[k, j] = 1j / np.sqrt(2.0)
            mats.append(m)
    for l in range(1, d):
        diag = np.zeros(d, dtype=complex)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag) / np.sqrt(l * (l + 1)))
    omegas = np.stack(mats)
    omegas.setflags(write=False)
    return OperatorBasis(d=d, omegas=omegas)


def change_of_basis(basis: OperatorBasis) -> np.ndarray:
    """Unitary matrix whose j-th row is ``vec(Omega_j)^dag``.

    Multiplying ``vec(A)`` by this matrix yields the coordinates of ``A`` in
    the operator basis; for Hermitian ``A`` those coordinates are real.
    """
    return np.stack([vectorize(om).conj() for om in basis.omegas])


@dataclass(frozen=True)
class StateCoordinates:
    """Real coordinates of a state: trace component plus traceless vector."""

    trace_component: float
    x: np.ndarray


@dataclass(frozen=True)
class PovmCoordinates:
    """Real coordinates of a detector element: trace component plus vector."""

    c0: float
    c: np.ndarray


def _require_hermitian(a: np.ndarray, what: str) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{what} must be a square matrix, got shape {a.shape}")
    defect = np.linalg.norm(a - a.conj().T)
    scale = max(np.linalg.norm(a), 1e-30)
    if defect > HERMITICITY_RTOL * scale:
        raise ValidationError(
            f"{what} is not Hermitian: relative defect {defect / scale:.3e}"
        )
    return (a + a.conj().T) / 2.0


def _coords(a: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    # Tr(Omega_k A) for every basis element; real by Hermiticity of both.
    return np.real(np.einsum("kij,ji->k", basis.omegas, a))


def state_to_coords(rho: np.ndarray, basis: OperatorBasis) -> StateCoordinates:
    """Expand a Hermitian matrix as trace component plus coherence vector."""
    rho = _require_hermitian(rho, "state")
    if rho.shape[0] != basis.d:
        raise ValidationError(f"dimension mismatch: state {rho.shape[0]}, basis {basis.d}")
    full = _coords(rho, basis)
    return StateCoordinates(trace_component=float(full[0]), x=full[1:])


def coords_to_state(coords: StateCoordinates, basis: OperatorBasis) -> np.ndarray:
    """Rebuild the matrix from its coordinates (inverse of state_to_coords)."""
    x = np.asarray(coords.x, dtype=float)
    if x.size != basis.n_traceless:
        raise ValidationError(f"coordinate vector must have length {basis.n_traceless}")
    full = np.concatenate(([coords.trace_component], x))
    return np.tensordot(full, basis.omegas, axes=(0, 0))


def coherence_to_state(x: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Unit-trace matrix with the given traceless coordinates (the map h)."""
    return coords_to_state(StateCoordinates(1.0 / np.sqrt(basis.d), np.asarray(x, float)), basis)


def povm_element_to_coords(p: np.ndarray, basis: OperatorBasis) -> PovmCoordinates:
    """Expand a Hermitian detector element in the operator basis."""
    p = _require_hermitian(p, "POVM element")
    if p.shape[0] != basis.d:
        raise ValidationError(f"dimension mismatch: element {p.shape[0]}, basis {basis.d}")
    full = _coords(p, basis)
    return PovmCoordinates(c0=float(full[0]), c=full[1:])


def coords_to_povm_element(coords: PovmCoordinates, basis: OperatorBasis) -> np.ndarray:
    """Rebuild a detector element from its coordinates."""
    c = np.asarray(coords.c, dtype=float)
    if c.size != basis.n_traceless:
        raise ValidationError(f"coordinate vector must have length {basis.n_traceless}")
    full = np.concatenate(([coords.c0], c))
    return np.tensordot(full, basis.omegas, axes=(0, 0))
