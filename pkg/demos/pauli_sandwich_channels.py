"""Physically realizable channels whose combination acts as rho -> g V1 rho V2*.

A sandwich by two different Pauli strings is not completely positive, but any
Hermitian-preserving map splits into a difference of CP maps.  Splitting the
two Hermitian-preserving halves through their Choi eigendecompositions yields
four genuine channels; running all four and recombining the statistics with
signs +, -, -i, +i reproduces the sandwich exactly.  These are the process
families used for randomized, compressed-sensing style probing.
"""

import numpy as np

import jointtomo as jt

rng = np.random.default_rng(0)

for names, g in ((("x", "z"), 0.05), (("xy", "zx"), 0.03)):
    v1, v2 = jt.pauli(names[0]), jt.pauli(names[1])
    d = v1.shape[0]
    phi1p, phi1m, phi2p, phi2m = jt.pauli_sandwich_processes(v1, v2, g)
    print(f"V1 = {names[0]}, V2 = {names[1]}, g = {g}  (d = {d})")
    for label, ch in (("phi1+", phi1p), ("phi1-", phi1m),
                      ("phi2+", phi2p), ("phi2-", phi2m)):
        gram_top = np.linalg.eigvalsh(ch.kraus_gram())[-1]
        print(f"  {label}: {len(ch.kraus)} Kraus terms, max eig(sum A^dag A) = {gram_top:.4f}")
    goo = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = goo @ goo.conj().T
    rho /= np.trace(rho).real
    recombined = (phi1p.apply(rho) - phi1m.apply(rho)
                  - 1j * (phi2p.apply(rho) - phi2m.apply(rho)))
    target = g * v1 @ rho @ v2.conj()
    print(f"  recombination error on a random state: "
          f"{np.linalg.norm(recombined - target):.2e}\n")

# The coupling has a hard ceiling: past it, a component would have to
# increase trace, which no physical process can.
try:
    jt.pauli_sandwich_processes(jt.pauli("x"), jt.pauli("z"), 2.0)
except jt.ValidationError as err:
    print(f"over-strong coupling rejected: {err}")
