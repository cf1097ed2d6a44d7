"""Entanglement diagnostics on optimized states and static resource estimates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .circuits import Circuit
from .fci import FockVector, single_orbital_entropies, subsystem_entropy_fci, von_neumann
from .fermion import SpeciesBlock, SpinOrbitalLayout
from .mapping import decode_array
from .pauli import PauliSum
from .tapering import ReductionRecord


def full_layout(layout: SpinOrbitalLayout) -> tuple[SpinOrbitalLayout, list[int]]:
    """Layout with dropped spin blocks restored, and the new index of every current mode."""
    blocks, index = [], []
    off_new = 0
    for b in layout.blocks:
        spins = list(b.spins)
        for sp, spin, _ in layout.dropped:
            if sp == b.name and spin not in spins:
                spins.append(spin)
        spins.sort(key=("alpha", "beta").index)
        nb = SpeciesBlock(b.name, b.n_spatial, b.n_alpha, b.n_beta, b.charge, tuple(spins))
        for s in b.spins:
            start = off_new + spins.index(s) * b.n_spatial
            index.extend(range(start, start + b.n_spatial))
        blocks.append(nb)
        off_new += nb.n_modes
    return SpinOrbitalLayout(tuple(blocks)), index


def reconstruct_fock_state(psi: np.ndarray, record: ReductionRecord | None,
                           layout: SpinOrbitalLayout, tol: float = 1e-14) -> FockVector:
    """Occupation-basis vector of a reduced-register statevector.

    Re-inserts fixed and tapered qubits (undoing each Clifford), inverts the
    per-species parity encoding, and re-embeds dropped spin blocks as empty.
    """
    psi = np.asarray(psi, dtype=complex)
    if record is not None:
        if psi.shape[0] != 1 << record.n_final:
            raise ValueError(f"state has {psi.shape[0]} amplitudes, record expects {record.n_final} qubits")
        if record.n_original != layout.n_modes:
            raise ValueError("record does not start from the layout's register")
        psi = record.expand_state(psi)
    elif psi.shape[0] != 1 << layout.n_modes:
        raise ValueError("state size does not match the layout")
    nz = np.nonzero(np.abs(psi) > tol)[0]
    occ = decode_array(nz, layout)
    amps = psi[nz]
    if layout.dropped:
        big, index = full_layout(layout)
        moved = np.zeros_like(occ)
        for old, new in enumerate(index):
            moved |= ((occ >> old) & 1) << new
        occ, layout = moved, big
    order = np.argsort(occ)
    fv = FockVector(occ[order].astype(np.int64), amps[order], layout)
    return fv.normalized()


def subsystem_entropy(psi: np.ndarray, record: ReductionRecord | None, layout: SpinOrbitalLayout) -> float:
    return subsystem_entropy_fci(reconstruct_fock_state(psi, record, layout))


def orbital_entropies(psi: np.ndarray, record: ReductionRecord | None, layout: SpinOrbitalLayout) -> dict:
    return single_orbital_entropies(reconstruct_fock_state(psi, record, layout))


def qubit_partition_entropy(psi: np.ndarray, subsystem: tuple[int, ...], n_qubits: int) -> float:
    """Entropy of the reduced state on ``subsystem`` qubits, computed in the encoded register."""
    rest = [q for q in range(n_qubits) if q not in subsystem]
    t = np.asarray(psi).reshape((2,) * n_qubits)
    # tensor axis k corresponds to qubit n-1-k
    axes_a = [n_qubits - 1 - q for q in subsystem]
    axes_b = [n_qubits - 1 - q for q in rest]
    m = np.transpose(t, axes_a + axes_b).reshape(1 << len(subsystem), -1)
    s = np.linalg.svd(m, compute_uv=False)
    return von_neumann(s ** 2 / np.sum(s ** 2))


# -- resources -----------------------------------------------------------------

# expected TwoLocal two-qubit gate counts per stage for H2 with 6-31G electrons and DZSNB nuclei
TARGET_TWOLOCAL_CZ = {"none": 968, "parity": 558, "taper": 465, "project": 255}


@dataclass
class ResourceReport:
    rows: list[dict] = field(default_factory=list)

    def add(self, stage: str, h: PauliSum, circuits: dict[str, Circuit] | None = None) -> None:
        row = {"stage": stage, "qubits": h.n_qubits, "terms": len(h)}
        for name, c in (circuits or {}).items():
            if c.n_qubits != h.n_qubits:
                raise ValueError(f"circuit {name} has {c.n_qubits} qubits, stage {stage} has {h.n_qubits}")
            row[name] = c.two_qubit_count()
        self.rows.append(row)

    def to_dict(self) -> dict:
        return {"stages": self.rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def table(self) -> str:
        keys = ["stage", "qubits", "terms"] + sorted({k for r in self.rows for k in r} - {"stage", "qubits", "terms"})
        lines = ["\t".join(keys)]
        for r in self.rows:
            lines.append("\t".join(str(r.get(k, "")) for k in keys))
        return "\n".join(lines)


def resource_estimate(stages: list[tuple[str, PauliSum]], circuits: dict[str, dict[str, Circuit]] | None = None) -> ResourceReport:
    """Qubit, term and two-qubit-gate counts per reduction stage."""
    rep = ResourceReport()
    for name, h in stages:
        rep.add(name, h, (circuits or {}).get(name))
    return rep
