"""Electronic H2 in STO-6G: from Gaussian integrals to a one-qubit Hamiltonian and its VQE ground state."""

from neovqe.basis import MolecularFrame, ParticleSpecies, electronic_basis
from neovqe.circuits import Circuit, Gate
from neovqe.fci import fci_solve
from neovqe.fermion import build_neo_hamiltonian
from neovqe.integrals import build_integral_set
from neovqe.mapping import parity_map
from neovqe.pipeline import layout_for, reduction_ladder
from neovqe.scf import electronic_rhf, mo_transform
from neovqe.vqe import vqe

SEPARATION = 0.73  # angstrom

frame = MolecularFrame.from_atoms([("H", (0, 0, 0), False), ("H", (0, 0, SEPARATION), False)])
ints = build_integral_set(frame, {"e": electronic_basis(frame, "sto-6g")}, {"e": ParticleSpecies.electrons(2)})
hf = electronic_rhf(ints)
mo = mo_transform(ints, hf)
layout = layout_for(mo)
op = build_neo_hamiltonian(mo, layout)
e_fci = fci_solve(op, layout)[0][0]
print(f"RHF energy {hf.total_energy:.8f}   FCI energy {e_fci:.8f}")

stages, record = reduction_ladder(parity_map(op, layout), layout, {})
for name, h in stages:
    print(f"{name:>8}: {h.n_qubits} qubits, {len(h)} terms")
h1 = stages[-1][1]
for word, c in h1.words():
    print(f"    {c.real:+.6f} {word}")

circ = Circuit(1).add(Gate("ry", (0,), "theta"))
res = vqe(h1, circ, "slsqp", initial=[0.1], tol=1e-10)
print(f"VQE energy {res.energy:.8f} after {res.iterations} iterations (error {res.energy - e_fci:.1e})")
