"""States, detectors, Born statistics, and the finite-shot data protocol.

A full dataset for one experiment holds, per process a and outcome j, the
empirical frequencies ``y_hat[a, j]`` of applying the unknown detector to the
evolved unknown state, plus three auxiliary calibrations:

* ``x_a0_hat[a]``: trace of the output state over sqrt(d), measured with the
  identity operator on non-trace-preserving processes and fixed to exactly
  1/sqrt(d) otherwise,
* ``c_j0_hat[j]``: detector trace components, measured on the maximally mixed
  state,
* ``x01_bar``: one coherence coordinate of the input state, measured directly
  through the matching basis observable to pin the scale of the bilinear
  reconstruction.

Every configuration consumes ``n0`` state copies; the grand total is
``(2L+2) n0`` when any process loses trace and ``(L+2) n0`` otherwise.
"""

from dataclasses import dataclass, field

import numpy as np

from .basis import OperatorBasis, build_basis
from .channels import ProcessEnsemble
from .errors import ValidationError

PSD_TOL = 1e-10


@dataclass(frozen=True)
class DensityMatrix:
    """A valid quantum state: Hermitian, PSD, unit trace (to tolerance)."""

    d: int
    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (self.d, self.d):
            raise ValidationError(f"state must be {self.d}x{self.d}, got {rho.shape}")
        if np.linalg.norm(rho - rho.conj().T) > 1e-9 * max(1.0, np.linalg.norm(rho)):
            raise ValidationError("state is not Hermitian")
        rho = (rho + rho.conj().T) / 2.0
        if float(np.linalg.eigvalsh(rho)[0]) < -PSD_TOL:
            raise ValidationError("state has a negative eigenvalue beyond tolerance")
        if abs(float(np.real(np.trace(rho))) - 1.0) > PSD_TOL:
            raise ValidationError(f"state trace is {np.real(np.trace(rho)):.12g}, not 1")
        object.__setattr__(self, "rho", rho)


@dataclass(frozen=True)
class Povm:
    """A detector: Hermitian PSD elements summing to the identity."""

    d: int
    elements: np.ndarray

    def __post_init__(self):
        elements = np.asarray(self.elements, dtype=complex)
        if elements.ndim != 3 or elements.shape[1:] != (self.d, self.d):
            raise ValidationError(
                f"elements must have shape (M, {self.d}, {self.d}), got {elements.shape}"
            )
        for k, p in enumerate(elements):
            if np.linalg.norm(p - p.conj().T) > 1e-9 * max(1.0, np.linalg.norm(p)):
                raise ValidationError(f"element {k} is not Hermitian")
        elements = (elements + elements.conj().transpose(0, 2, 1)) / 2.0
        for k, p in enumerate(elements):
            if float(np.linalg.eigvalsh(p)[0]) < -PSD_TOL:
                raise ValidationError(f"element {k} has a negative eigenvalue beyond tolerance")
        if np.linalg.norm(elements.sum(axis=0) - np.eye(self.d)) > 1e-10 * self.d:
            raise ValidationError("elements do not sum to the identity")
        object.__setattr__(self, "elements", elements)

    @property
    def m(self) -> int:
        return len(self.elements)


def born_probabilities(state, povm: Povm) -> np.ndarray:
    """Outcome probabilities ``Tr(P_j rho)``.

    Accepts a DensityMatrix or a raw (possibly sub-normalized) matrix, so it
    also serves for outputs of trace-decreasing processes.
    """
    rho = state.rho if isinstance(state, DensityMatrix) else np.asarray(state, dtype=complex)
    if rho.shape != (povm.d, povm.d):
        raise ValidationError(f"dimension mismatch: state {rho.shape}, detector d={povm.d}")
    p = np.real(np.einsum("jik,ki->j", povm.elements, rho))
    if np.min(p) < -1e-12:
        raise ValidationError(f"negative Born probability {np.min(p):.3e}")
    return np.clip(p, 0.0, None)


def sample_frequencies(p: np.ndarray, n0: int, rng) -> np.ndarray:
    """One multinomial draw of ``n0`` shots over the given outcomes.

    Probability mass missing from ``sum(p) < 1`` goes to an implicit loss
    outcome that is dropped from the returned frequency vector.
    """
    p = np.asarray(p, dtype=float)
    if np.min(p) < -1e-12:
        raise ValidationError(f"negative probability {np.min(p):.3e}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if total > 1.0 + 1e-9:
        raise ValidationError(f"probabilities sum to {total:.12g} > 1")
    rng = np.random.default_rng(rng)
    full = np.append(p, max(1.0 - total, 0.0))
    counts = rng.multinomial(int(n0), full / full.sum())
    return counts[:-1] / float(n0)


@dataclass(frozen=True)
class MeasurementDataset:
    """Frequencies and calibration estimates from one experiment run."""

    y_hat: np.ndarray
    x_a0_hat: np.ndarray
    c_j0_hat: np.ndarray
    x01_bar: float
    n0: int
    tp_flags: np.ndarray
    anchor_index: int = 1
    exact: bool = field(default=False, compare=False)

    def __post_init__(self):
        y = np.asarray(self.y_hat, dtype=float)
        object.__setattr__(self, "y_hat", y)
        object.__setattr__(self, "x_a0_hat", np.asarray(self.x_a0_hat, dtype=float))
        object.__setattr__(self, "c_j0_hat", np.asarray(self.c_j0_hat, dtype=float))
        object.__setattr__(self, "tp_flags", np.asarray(self.tp_flags, dtype=bool))
        if y.ndim != 2:
            raise ValidationError("y_hat must be an L x M matrix")
        if len(self.x_a0_hat) != y.shape[0] or len(self.tp_flags) != y.shape[0]:
            raise ValidationError("per-process fields must have length L")
        if len(self.c_j0_hat) != y.shape[1]:
            raise ValidationError("c_j0_hat must have length M")
        if np.any(y.sum(axis=1) > 1.0 + 1e-9):
            raise ValidationError("a frequency row sums above 1")

    @property
    def n_processes(self) -> int:
        return self.y_hat.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.y_hat.shape[1]

    @property
    def total_copies(self) -> int:
        l = self.n_processes
        factor = (2 * l + 2) if not np.all(self.tp_flags) else (l + 2)
        return int(factor * self.n0)

    def subset(self, indices) -> "MeasurementDataset":
        """Restrict to a subset of processes (used for paired comparisons)."""
        idx = np.asarray(indices, dtype=int)
        return MeasurementDataset(
            y_hat=self.y_hat[idx],
            x_a0_hat=self.x_a0_hat[idx],
            c_j0_hat=self.c_j0_hat,
            x01_bar=self.x01_bar,
            n0=self.n0,
            tp_flags=self.tp_flags[idx],
            anchor_index=self.anchor_index,
            exact=self.exact,
        )


def simulate_dataset(
    ens: ProcessEnsemble,
    truth_state: DensityMatrix,
    truth_povm: Povm,
    n0: int,
    seed=0,
    scale_observable: int = 1,
    exact: bool = False,
    basis: OperatorBasis = None,
) -> MeasurementDataset:
    """Simulate the full data-collection protocol with ``n0`` shots per setup.

    ``scale_observable`` selects which basis operator Omega_k is measured on
    the input state to pin the reconstruction scale; its eigenbasis statistics
    are sampled with ``n0`` shots like every other configuration.  ``exact``
    bypasses all sampling and records the ideal values (a simulation switch
    for pipeline-exactness checks, not a physical claim).
    """
    if ens.d != truth_state.d or ens.d != truth_povm.d:
        raise ValidationError("ensemble, state and detector dimensions must agree")
    if n0 < 1:
        raise ValidationError(f"need at least one shot, got n0={n0}")
    if basis is None:
        basis = build_basis(ens.d)
    if not 1 <= scale_observable <= basis.n_traceless:
        raise ValidationError(
            f"scale observable index must be in 1..{basis.n_traceless}, got {scale_observable}"
        )
    d = ens.d
    rng = np.random.default_rng(seed)
    sqd = np.sqrt(d)

    tp_flags = np.array([ch.is_trace_preserving for ch in ens.channels])
    y_rows, x_a0 = [], []
    for ch, tp in zip(ens.channels, tp_flags):
        rho_a = ch.apply(truth_state.rho)
        p = born_probabilities(rho_a, truth_povm)
        y_rows.append(p if exact else sample_frequencies(p, n0, rng))
        if tp:
            x_a0.append(1.0 / sqd)
        else:
            survival = float(np.clip(np.real(np.trace(rho_a)), 0.0, 1.0))
            if exact:
                x_a0.append(survival / sqd)
            else:
                x_a0.append(rng.binomial(int(n0), survival) / float(n0) / sqd)

    # Detector trace components from the maximally mixed probe state.
    q = np.real(np.einsum("jii->j", truth_povm.elements)) / d
    c_j0 = sqd * (q if exact else sample_frequencies(q, n0, rng))

    # Scale observable measured projectively in its own eigenbasis.
    omega = basis.omegas[scale_observable]
    lam, vecs = np.linalg.eigh(omega)
    probs = np.clip(np.real(np.einsum("ik,ij,jk->k", vecs.conj(), truth_state.rho, vecs)), 0.0, None)
    probs = probs / probs.sum()
    weights = probs if exact else sample_frequencies(probs, n0, rng)
    x01 = float(np.dot(lam, weights))

    return MeasurementDataset(
        y_hat=np.stack(y_rows),
        x_a0_hat=np.array(x_a0),
        c_j0_hat=c_j0,
        x01_bar=x01,
        n0=int(n0),
        tp_flags=tp_flags,
        anchor_index=int(scale_observable),
        exact=exact,
    )


def random_density_matrix(d: int, rng) -> DensityMatrix:
    """Full-rank random state from a Ginibre matrix."""
    rng = np.random.default_rng(rng)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return DensityMatrix(d, rho / np.real(np.trace(rho)))
