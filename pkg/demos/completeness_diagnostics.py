"""When can the joint reconstruction succeed at all?

Informational completeness is a rank condition on the stacked process
representations.  This script reproduces the structural facts: flip-channel
families are stuck at rank 2, trace-preserving families cap below d^4, one
Hamiltonian can never probe more than d^2-d+1 directions, and the minimum
number of distinct Hamiltonians follows from those two numbers.
"""

import numpy as np

import jointtomo as jt
from jointtomo import (
    ProcessEnsemble,
    build_basis,
    build_regression_matrices,
    discretize_hamiltonian,
    hamiltonian_generator,
    make_named_channel,
    min_hamiltonian_count,
    numerical_rank,
    rank_bound,
    vectorize,
)

basis = build_basis(2)

print("bit-flip and phase-flip families (any size):")
for kind in ("bit_flip", "phase_flip"):
    ens = ProcessEnsemble(tuple(make_named_channel(kind, p=p)
                                for p in np.linspace(0.05, 0.95, 12)))
    reg = build_regression_matrices(ens, basis)
    print(f"  {kind:>10s}: rank(B) = {reg.rank_b}, rank(B_natural) = {reg.rank_b_natural}"
          "  (informationally incomplete however many you add)")

print("\n20 random trace-preserving channels, d = 2:")
rng = np.random.default_rng(0)
tp = ProcessEnsemble(tuple(
    make_named_channel("random_cp", d=2, rank=4, seed=int(rng.integers(2 ** 32)), tp=True)
    for _ in range(20)))
reg = build_regression_matrices(tp, basis)
print(f"  rank(B_natural) = {reg.rank_b_natural} <= bound {rank_bound(tp)} < 16: "
      "TP families can never be complete in the natural basis")

print("\nsingle-Hamiltonian sampling stack, d = 2 and 3:")
for d in (2, 3):
    bd = build_basis(d)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = (g + g.conj().T) / 2
    h -= np.trace(h) / d * np.eye(d)
    qs = discretize_hamiltonian(hamiltonian_generator(h, bd), 0.8, 12)
    stack = np.stack([vectorize(q) for q in qs])
    print(f"  d={d}: rank of 12 stacked sampling maps = {numerical_rank(stack)} "
          f"(ceiling d^2-d+1 = {d * d - d + 1})")

print("\nminimum Hamiltonian counts for a complete closed-system family:")
for d in (2, 3, 4):
    count, n_min = min_hamiltonian_count(d)
    print(f"  d={d}: at least {count} Hamiltonians, each sampled at >= {n_min} times")

print("\nthe five-Hamiltonian preset meets the d=2 bound (3) with margin:")
sc = jt.preset("one_qubit_closed_complete")
reg = build_regression_matrices(sc.ensemble, sc.basis)
print(f"  rank(B) = {reg.rank_b} of 9 -> complete: {reg.complete_v1}")
