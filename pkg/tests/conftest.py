"""Shared builders for the test suite: small random NEO systems and cached H2 problems."""

from __future__ import annotations

import functools
import itertools

import numpy as np
import pytest

from neovqe.basis import MolecularFrame, ParticleSpecies, electronic_basis, nuclear_basis
from neovqe.fermion import SecondQuantizedOp, SpinOrbitalLayout, build_neo_hamiltonian, number_operator
from neovqe.integrals import IntegralSet, build_integral_set
from neovqe.scf import electronic_rhf, mo_transform, neo_hf

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# -- random integrals ------------------------------------------------------------------

def random_eri(rng, n, m=None, scale=0.3):
    """Two-body tensor with chemists' index symmetry (8-fold when ``m`` is None)."""
    if m is None:
        a = rng.normal(size=(n * n, n * n)) * scale
        a = a.reshape(n, n, n, n)
        a = a + a.transpose(1, 0, 2, 3)
        a = a + a.transpose(0, 1, 3, 2)
        return 0.5 * (a + a.transpose(2, 3, 0, 1))
    a = rng.normal(size=(n, n, m, m)) * scale
    a = a + a.transpose(1, 0, 2, 3)
    return a + a.transpose(0, 1, 3, 2)


def random_sym(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) * scale
    return 0.5 * (a + a.T)


def random_mo_integrals(rng, n_e, n_p, ne_alpha=1, ne_beta=1, np_alpha=1, np_beta=0, coupling=0.3):
    s = {"e": np.eye(n_e)}
    h = {"e": random_sym(rng, n_e) - 1.0 * np.diag(np.arange(n_e, 0, -1))}
    eri = {("e", "e"): random_eri(rng, n_e)}
    n_particles = {"e": (ne_alpha, ne_beta)}
    if n_p:
        s["p"] = np.eye(n_p)
        h["p"] = random_sym(rng, n_p)
        eri[("p", "p")] = random_eri(rng, n_p)
        eri[("e", "p")] = random_eri(rng, n_e, n_p, scale=coupling)
        n_particles["p"] = (np_alpha, np_beta)
    return IntegralSet(s, h, eri, float(rng.normal()), n_particles)


def layout_for(ints: IntegralSet) -> SpinOrbitalLayout:
    blocks = []
    for k in ints.species:
        na, nb = ints.n_particles[k]
        blocks.append((k, ints.norb(k), na, nb, -1.0 if k == "e" else 1.0))
    return SpinOrbitalLayout.build(blocks)


def random_neo_system(seed: int):
    """Random NEO Hamiltonian with at most 6 electronic and 4 nuclear modes."""
    rng = np.random.default_rng(seed)
    n_e = int(rng.integers(2, 4))
    n_p = int(rng.integers(1, 3))
    np_alpha = 1 if n_p == 1 else int(rng.integers(1, 3))
    ints = random_mo_integrals(rng, n_e, n_p, 1, 1, np_alpha, 0)
    lay = layout_for(ints)
    return ints, lay, build_neo_hamiltonian(ints, lay)


def sector_penalty(layout: SpinOrbitalLayout, weight: float = 20.0) -> SecondQuantizedOp:
    """``weight * sum (N_block - n_block)^2`` over every spin block; zero on the target sector."""
    out = SecondQuantizedOp({}, layout.n_modes)
    for name, spin, _, n in layout.spin_ranges():
        N = number_operator(layout, name, spin)
        shifted = N + SecondQuantizedOp({(): -float(n)}, layout.n_modes)
        out = out + (shifted * shifted) * weight
    return out.normal_ordered(layout)


# -- H2 problems (cached) ------------------------------------------------------------

def h2_frame(separation=0.7414, quantum=False):
    return MolecularFrame.from_atoms([("H", (0, 0, 0), quantum), ("H", (0, 0, separation), quantum)])


def electronic_h2(basis="sto-6g", separation=0.7414):
    f = h2_frame(separation)
    ints = build_integral_set(f, {"e": electronic_basis(f, basis)}, {"e": ParticleSpecies.electrons(2)})
    res = electronic_rhf(ints)
    mo = mo_transform(ints, res)
    lay = layout_for(mo)
    return ints, res, mo, lay, build_neo_hamiltonian(mo, lay)


def neo_h2(e_basis="6-31g", p_basis="nuc-2s", separation=0.7414):
    f = h2_frame(separation, quantum=True)
    sp = {"e": ParticleSpecies.electrons(2), "p": ParticleSpecies.protons(2, 0)}
    ints = build_integral_set(f, {"e": electronic_basis(f, e_basis), "p": nuclear_basis(f, p_basis)}, sp)
    res = neo_hf(ints)
    mo = mo_transform(ints, res)
    lay = layout_for(mo)
    return ints, res, mo, lay, build_neo_hamiltonian(mo, lay)


@pytest.fixture(scope="session")
def h2_sto6g():
    return electronic_h2("sto-6g")


@pytest.fixture(scope="session")
def h2_631g():
    return electronic_h2("6-31g")


@pytest.fixture(scope="session")
def h2_neo_minimal():
    return neo_h2("sto-6g", "nuc-2s")


@pytest.fixture(scope="session")
def h2_neo_631g():
    return neo_h2("6-31g", "nuc-2s")


# -- dense Pauli oracle ---------------------------------------------------------------

SINGLE_QUBIT = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def kron_word(word: str) -> np.ndarray:
    """Dense matrix of a printed word; the leftmost letter is the most significant qubit."""
    return functools.reduce(np.kron, [SINGLE_QUBIT[c] for c in word])


def on_qubit(m: np.ndarray, q: int, n: int) -> np.ndarray:
    """Embed a one-qubit matrix on qubit ``q`` of ``n`` (qubit 0 least significant)."""
    return np.kron(np.kron(np.eye(1 << (n - q - 1)), m), np.eye(1 << q))


# -- dense Fock-space oracle ---------------------------------------------------------

def dense_annihilator(layout: SpinOrbitalLayout, m: int):
    """Sparse matrix of a_m on the full 2^n Fock space (index = occupation bitstring).

    Same-species modes below ``m`` contribute a -1 when occupied; other species commute.
    """
    import scipy.sparse as sp
    n = layout.n_modes
    species = layout.species_of_modes()
    below = sum(1 << k for k in range(m) if species[k] == species[m])
    idx = np.arange(1 << n)
    occ = (idx >> m) & 1 == 1
    src = idx[occ]
    sign = 1 - 2 * (np.bitwise_count(src & below).astype(int) & 1)
    return sp.csr_matrix((sign.astype(float), (src ^ (1 << m), src)), shape=(1 << n, 1 << n))


def dense_neo_hamiltonian(ints: IntegralSet, layout: SpinOrbitalLayout):
    """Full Fock-space Hamiltonian assembled from excitation matrices E_pq = a+_p a_q.

    Same-species repulsion uses 1/2 sum (pq|rs)(E_pq E_rs - delta_qr E_ps); the
    electron-proton attraction is -sum (pq|rs) E_pq E_rs.
    """
    import scipy.sparse as sp
    dim = 1 << layout.n_modes
    a = [dense_annihilator(layout, m) for m in range(layout.n_modes)]
    E = {}

    def exc(p, q):
        if (p, q) not in E:
            E[p, q] = (a[p].T @ a[q]).tocsr()
        return E[p, q]

    H = sp.identity(dim, format="csr") * ints.e_core
    blocks = {b.name: b for b in layout.blocks}
    for name, b in blocks.items():
        n = b.n_spatial
        h, g = ints.h[name], ints.eri[(name, name)]
        for s in b.spins:
            for p in range(n):
                for q in range(n):
                    H = H + h[p, q] * exc(layout.mode(name, p, s), layout.mode(name, q, s))
        for s1 in b.spins:
            for s2 in b.spins:
                for p, q, r, t in itertools.product(range(n), repeat=4):
                    if g[p, q, r, t] == 0:
                        continue
                    P, Q = layout.mode(name, p, s1), layout.mode(name, q, s1)
                    R, T = layout.mode(name, r, s2), layout.mode(name, t, s2)
                    term = exc(P, Q) @ exc(R, T)
                    if Q == R:
                        term = term - exc(P, T)
                    H = H + 0.5 * g[p, q, r, t] * term
    if "e" in blocks and "p" in blocks:
        g = ints.eri[("e", "p")]
        be, bp = blocks["e"], blocks["p"]
        for se in be.spins:
            for sp_ in bp.spins:
                for p, q, r, t in itertools.product(range(be.n_spatial), range(be.n_spatial),
                                                    range(bp.n_spatial), range(bp.n_spatial)):
                    P, Q = layout.mode("e", p, se), layout.mode("e", q, se)
                    R, T = layout.mode("p", r, sp_), layout.mode("p", t, sp_)
                    H = H - g[p, q, r, t] * (exc(P, Q) @ exc(R, T))
    return H.tocsr()


def sector_indices(layout: SpinOrbitalLayout) -> np.ndarray:
    """Occupation bitstrings with the layout particle count in every spin block (oracle version)."""
    idx = np.arange(1 << layout.n_modes)
    keep = np.ones(len(idx), dtype=bool)
    for _, _, modes, n in layout.spin_ranges():
        mask = sum(1 << m for m in modes)
        keep &= np.bitwise_count(idx & mask) == n
    return idx[keep]
