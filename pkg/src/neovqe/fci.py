"""Occupation-basis exact diagonalization (NEOFCI / NEOCASCI) and entropy oracles."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fermion import SecondQuantizedOp, SpinOrbitalLayout

MAX_FCI_DIM = 1 << 24
DENSE_LIMIT = 4096


class DimensionOverflow(ValueError):
    pass


@dataclass(frozen=True)
class FockVector:
    """Amplitudes over occupation bitstrings (bit ``m`` set = mode ``m`` occupied)."""

    basis: np.ndarray  # sorted int64 bitstrings
    amplitudes: np.ndarray
    layout: SpinOrbitalLayout

    def __post_init__(self):
        if self.basis.shape != self.amplitudes.shape:
            raise ValueError("basis and amplitudes differ in length")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "FockVector":
        return FockVector(self.basis, self.amplitudes / self.norm, self.layout)

    def amplitude(self, bits: int) -> complex:
        i = np.searchsorted(self.basis, bits)
        if i < len(self.basis) and self.basis[i] == bits:
            return complex(self.amplitudes[i])
        return 0j

    def overlap(self, other: "FockVector") -> complex:
        common, ia, ib = np.intersect1d(self.basis, other.basis, return_indices=True)
        return complex(np.vdot(self.amplitudes[ia], other.amplitudes[ib]))

    def dominant(self) -> int:
        return int(self.basis[np.argmax(np.abs(self.amplitudes))])

    def to_dict(self) -> dict:
        keep = np.abs(self.amplitudes) > 1e-14
        return {
            "layout": self.layout.to_dict(),
            "basis": [int(b) for b in self.basis[keep]],
            "re": self.amplitudes[keep].real.tolist(),
            "im": self.amplitudes[keep].imag.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "FockVector":
        amps = np.asarray(d["re"]) + 1j * np.asarray(d["im"])
        return cls(np.asarray(d["basis"], dtype=np.int64), amps,
                   SpinOrbitalLayout.from_dict(d["layout"]))

    @classmethod
    def basis_state(cls, bits: int, layout: SpinOrbitalLayout) -> "FockVector":
        return cls(np.array([bits], dtype=np.int64), np.array([1.0 + 0j]), layout)


def sector_basis(layout: SpinOrbitalLayout, counts: dict[tuple[str, str], int] | None = None) -> np.ndarray:
    """All bitstrings with fixed particle number in every spin block, sorted."""
    blocks = []
    for name, spin, modes, n in layout.spin_ranges():
        n = counts.get((name, spin), n) if counts else n
        if n > len(modes):
            raise ValueError(f"{n} particles do not fit in {len(modes)} {name}-{spin} orbitals")
        blocks.append((modes, n))
    dim = math.prod(math.comb(len(modes), n) for modes, n in blocks)
    if dim > MAX_FCI_DIM:
        raise DimensionOverflow(
            f"FCI dimension {dim} exceeds {MAX_FCI_DIM}; reduce the active space")
    per_block = [[sum(1 << m for m in c) for c in itertools.combinations(modes, n)] for modes, n in blocks]
    out = np.zeros(1, dtype=np.int64)
    for block in per_block:
        out = (out[:, None] | np.asarray(block, dtype=np.int64)[None, :]).ravel()
    return np.sort(out)


def _species_masks(layout: SpinOrbitalLayout) -> list[int]:
    """For every mode, the mask of same-species modes strictly below it."""
    masks = []
    for name, rng in layout.species_ranges().items():
        for m in rng:
            masks.append(sum(1 << k for k in range(rng.start, m)))
    return masks


def apply_term(term, bits: np.ndarray, below: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Apply one ladder-operator product to many bitstrings.

    Returns ``(new_bits, signs)``; ``signs`` is 0 where the result vanishes.
    Same-species modes below the target each contribute a factor -1.
    """
    b = bits.copy()
    sign = np.ones(len(b), dtype=np.int8)
    for m, creation in reversed(term):
        bit = np.int64(1) << m
        occ = (b & bit) != 0
        sign[occ == creation] = 0
        parity = np.bitwise_count(b & below[m]) & 1
        sign = sign * (1 - 2 * parity.astype(np.int8))
        b = b ^ bit
    return b, sign


def hamiltonian_matrix(op: SecondQuantizedOp, layout: SpinOrbitalLayout,
                       basis: np.ndarray | None = None) -> sp.csr_matrix:
    """Sparse matrix of ``op`` in a particle-number sector basis."""
    if op.n_modes > layout.n_modes:
        raise ValueError("operator acts on more modes than the layout holds")
    if basis is None:
        basis = sector_basis(layout)
    below = _species_masks(layout)
    dim = len(basis)
    rows, cols, vals = [], [], []
    col_idx = np.arange(dim)
    for term, c in op.terms.items():
        if not term:
            rows.append(col_idx)
            cols.append(col_idx)
            vals.append(np.full(dim, c, dtype=complex))
            continue
        nb, sign = apply_term(term, basis, below)
        ok = sign != 0
        if not ok.any():
            continue
        r = np.searchsorted(basis, nb[ok])
        r = np.minimum(r, dim - 1)
        inside = basis[r] == nb[ok]
        if not inside.all():
            raise ValueError("operator leaves the particle-number sector")
        rows.append(r)
        cols.append(col_idx[ok])
        vals.append(c * sign[ok])
    if not rows:
        return sp.csr_matrix((dim, dim), dtype=complex)
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim)).tocsr()
    m.sum_duplicates()
    return m


def _lowest_eigenpairs(m: sp.spmatrix, n_roots: int):
    dim = m.shape[0]
    n_roots = min(n_roots, dim)
    real = np.abs(m.data.imag).max(initial=0.0) < 1e-14
    if real:
        m = m.real
    if dim <= DENSE_LIMIT or n_roots >= dim - 1:
        w, v = np.linalg.eigh(m.toarray())
        return w[:n_roots], v[:, :n_roots]
    # Lanczos; ARPACK keeps the Krylov basis orthogonal (implicit restarts)
    w, v = spla.eigsh(m, k=n_roots, which="SA", tol=1e-12)
    order = np.argsort(w)
    return w[order], v[:, order]


def fci_solve(op: SecondQuantizedOp, layout: SpinOrbitalLayout, n_roots: int = 1,
              counts: dict[tuple[str, str], int] | None = None):
    """Lowest eigenpairs of ``op`` in the sector fixed by the layout particle counts."""
    basis = sector_basis(layout, counts)
    m = hamiltonian_matrix(op, layout, basis)
    w, v = _lowest_eigenpairs(m, n_roots)
    states = []
    for k in range(v.shape[1]):
        amps = v[:, k].astype(complex)
        # fix the global phase so the largest amplitude is real positive
        j = np.argmax(np.abs(amps))
        amps = amps * (abs(amps[j]) / amps[j])
        states.append(FockVector(basis, amps, layout))
    return np.asarray(w, dtype=float), states


def energy(op: SecondQuantizedOp, state: FockVector) -> float:
    """Expectation value of a number-conserving operator in a (possibly sparse) Fock vector."""
    basis = sector_basis(state.layout)
    idx = np.searchsorted(basis, state.basis)
    idx = np.minimum(idx, len(basis) - 1)
    if not np.all(basis[idx] == state.basis):
        raise ValueError("state has components outside the layout particle-number sector")
    v = np.zeros(len(basis), dtype=complex)
    v[idx] = state.amplitudes
    m = hamiltonian_matrix(op, state.layout, basis)
    return float(np.real(np.vdot(v, m @ v)) / np.vdot(v, v).real)


# -- entanglement ------------------------------------------------------------

def _split(state: FockVector):
    rng = state.layout.species_ranges()
    e_mask = sum(1 << m for m in rng.get("e", ()))
    p_mask = sum(1 << m for m in rng.get("p", ()))
    return state.basis & e_mask, state.basis & p_mask


def coefficient_matrix(state: FockVector) -> np.ndarray:
    """Amplitudes arranged as (electronic configuration, nuclear configuration)."""
    e, p = _split(state)
    ue, ie = np.unique(e, return_inverse=True)
    up, ip = np.unique(p, return_inverse=True)
    C = np.zeros((len(ue), len(up)), dtype=complex)
    C[ie, ip] = state.amplitudes
    return C


def von_neumann(probabilities: np.ndarray) -> float:
    p = np.asarray(probabilities, dtype=float)
    p = p[p > 1e-16]
    return float(-np.sum(p * np.log(p)))


def subsystem_entropy_fci(state: FockVector) -> float:
    """Electron-nuclear entanglement entropy (natural log) from the Schmidt spectrum."""
    C = coefficient_matrix(state)
    s = np.linalg.svd(C, compute_uv=False)
    w = s ** 2
    return von_neumann(w / w.sum())


def single_orbital_entropies(state: FockVector) -> dict:
    """One-orbital entropies from diagonal occupation marginals.

    Returns per-species arrays and the QI sums (``"e"``, ``"p"``, ``"total"``).
    """
    layout = state.layout
    prob = np.abs(state.amplitudes) ** 2
    prob = prob / prob.sum()
    out: dict = {}
    total = 0.0
    for b in layout.blocks:
        ent = np.zeros(b.n_spatial)
        for i in range(b.n_spatial):
            bits = [np.int64(1) << layout.mode(b.name, i, s) for s in b.spins]
            label = np.zeros(len(state.basis), dtype=np.int64)
            for k, bit in enumerate(bits):
                label |= ((state.basis & bit) != 0).astype(np.int64) << k
            omega = np.bincount(label, weights=prob, minlength=1 << len(bits))
            ent[i] = von_neumann(omega)
        out[b.name] = ent
        out[f"QI_{b.name}"] = float(ent.sum())
        total += float(ent.sum())
    out["QI_total"] = total
    return out
