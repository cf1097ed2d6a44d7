"""Blockwise parity encoding of fermionic operators and occupation bitstrings.

Qubit ``j`` stores the parity of all modes of the same species with index
``<= j``.  The update string of a ladder operator therefore stops at the end
of its species block, and operators of different species act on disjoint
qubits, so they commute as distinguishable particles should.
"""

from __future__ import annotations

import numpy as np

from .fermion import SecondQuantizedOp, SpinOrbitalLayout
from .pauli import CUTOFF, PauliSum, pauli_product


def qubit_labels(layout: SpinOrbitalLayout) -> tuple[str, ...]:
    return tuple(layout.species_of_modes())


def ladder_image(mode: int, creation: bool, layout: SpinOrbitalLayout) -> list[tuple[int, int, complex]]:
    """Pauli terms ``(x, z, coeff)`` representing one ladder operator.

    ``a+_j = 1/2 X_{j+1..end} (X_j Z_{j-1} - i Y_j)``; the ``Z_{j-1}`` factor is
    absent when ``j`` opens its species block.
    """
    if not 0 <= mode < layout.n_modes:
        raise IndexError(f"mode {mode} outside layout of {layout.n_modes} modes")
    rng = next(r for r in layout.species_ranges().values() if mode in r)
    update = sum(1 << k for k in range(mode + 1, rng.stop))
    prev = (1 << (mode - 1)) if mode > rng.start else 0
    x = update | (1 << mode)
    # coefficients are on Pauli words: (x, prev) is X..X_j Z_{j-1}, (x, bit j) is X..Y_j
    return [(x, prev, 0.5), (x, 1 << mode, -0.5j if creation else 0.5j)]


def parity_map(op: SecondQuantizedOp, layout: SpinOrbitalLayout, cutoff: float = CUTOFF) -> PauliSum:
    """Qubit image of ``op`` under the per-species parity encoding."""
    if op.n_modes > layout.n_modes:
        raise IndexError(f"operator uses {op.n_modes} modes, layout has {layout.n_modes}")
    n = layout.n_modes
    cache: dict[tuple[int, bool], list] = {}
    out: dict[tuple[int, int], complex] = {}
    for term, c in op.terms.items():
        acc = {(0, 0): complex(c)}
        for m, cr in term:
            img = cache.get((m, cr))
            if img is None:
                img = cache[(m, cr)] = ladder_image(m, cr, layout)
            nxt: dict[tuple[int, int], complex] = {}
            for (x1, z1), c1 in acc.items():
                for x2, z2, c2 in img:
                    ph, x, z = pauli_product(x1, z1, x2, z2)
                    nxt[(x, z)] = nxt.get((x, z), 0) + ph * c1 * c2
            acc = nxt
        for k, v in acc.items():
            out[k] = out.get(k, 0) + v
    return PauliSum(out, n, qubit_labels(layout), cutoff=cutoff)


# -- bitstring encoding ------------------------------------------------------

def encode_occupation(bits: int, layout: SpinOrbitalLayout) -> int:
    """Occupation bitstring -> parity-encoded qubit bitstring."""
    out = 0
    for rng in layout.species_ranges().values():
        parity = 0
        for m in rng:
            parity ^= (bits >> m) & 1
            out |= parity << m
    return out


def decode_occupation(qbits: int, layout: SpinOrbitalLayout) -> int:
    out = 0
    for rng in layout.species_ranges().values():
        prev = 0
        for m in rng:
            p = (qbits >> m) & 1
            out |= (p ^ prev) << m
            prev = p
    return out


def decode_array(qbits: np.ndarray, layout: SpinOrbitalLayout) -> np.ndarray:
    """Vectorized :func:`decode_occupation`."""
    qbits = np.asarray(qbits, dtype=np.int64)
    out = np.zeros_like(qbits)
    for rng in layout.species_ranges().values():
        for m in rng:
            cur = (qbits >> m) & 1
            prev = (qbits >> (m - 1)) & 1 if m > rng.start else 0
            out |= (cur ^ prev) << m
    return out


def encode_array(bits: np.ndarray, layout: SpinOrbitalLayout) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    out = np.zeros_like(bits)
    for rng in layout.species_ranges().values():
        parity = np.zeros_like(bits)
        for m in rng:
            parity ^= (bits >> m) & 1
            out |= parity << m
    return out
