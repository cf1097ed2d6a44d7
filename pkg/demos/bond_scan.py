"""Electronic STO-6G H2 potential curve: RHF, FCI and tapered one-qubit VQE on a grid of separations."""

import csv
import sys

import numpy as np

from neovqe.basis import MolecularFrame, ParticleSpecies, electronic_basis
from neovqe.circuits import Circuit, Gate
from neovqe.fci import fci_solve
from neovqe.fermion import build_neo_hamiltonian
from neovqe.integrals import build_integral_set
from neovqe.mapping import parity_map
from neovqe.pipeline import layout_for, reduction_ladder
from neovqe.scf import electronic_rhf, mo_transform
from neovqe.vqe import vqe


def energies(separation: float) -> tuple[float, float, float]:
    frame = MolecularFrame.from_atoms([("H", (0, 0, 0), False), ("H", (0, 0, separation), False)])
    ints = build_integral_set(frame, {"e": electronic_basis(frame, "sto-6g")}, {"e": ParticleSpecies.electrons(2)})
    hf = electronic_rhf(ints)
    mo = mo_transform(ints, hf)
    layout = layout_for(mo)
    op = build_neo_hamiltonian(mo, layout)
    stages, _ = reduction_ladder(parity_map(op, layout), layout, {})
    circ = Circuit(1).add(Gate("ry", (0,), "theta"))
    res = vqe(stages[-1][1], circ, "slsqp", initial=[0.1], tol=1e-10)
    return hf.total_energy, fci_solve(op, layout)[0][0], res.energy


out = sys.argv[1] if len(sys.argv) > 1 else "bond_scan.csv"
with open(out, "w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow(["separation_angstrom", "rhf", "fci", "vqe"])
    for r in np.linspace(0.4, 2.4, 11):
        row = energies(float(r))
        writer.writerow([f"{r:.2f}"] + [f"{e:.8f}" for e in row])
        print(f"R = {r:.2f}  RHF {row[0]:.6f}  FCI {row[1]:.6f}  VQE {row[2]:.6f}")
print(f"written {out}")
