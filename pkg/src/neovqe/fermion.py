"""Second-quantized operators over a mixed electron/proton spin-orbital layout."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

CUTOFF = 1e-12
SPINS = ("alpha", "beta")


@dataclass(frozen=True)
class SpeciesBlock:
    """Spin orbitals of one particle species inside a layout."""

    name: str  # "e" or "p"
    n_spatial: int
    n_alpha: int
    n_beta: int
    charge: float
    spins: tuple[str, ...] = SPINS

    @property
    def n_modes(self) -> int:
        return self.n_spatial * len(self.spins)

    def count(self, spin: str) -> int:
        return self.n_alpha if spin == "alpha" else self.n_beta


@dataclass(frozen=True)
class SpinOrbitalLayout:
    """Ordered mode list in particle-spin block order.

    Modes run electron-alpha, electron-beta, proton-alpha, proton-beta; a spin
    block removed by :func:`restrict_spin_sector` is listed in ``dropped`` so
    that states can be re-embedded in the full layout.
    """

    blocks: tuple[SpeciesBlock, ...]
    dropped: tuple[tuple[str, str, int], ...] = ()

    @classmethod
    def build(cls, species: Iterable[tuple[str, int, int, int, float]]) -> "SpinOrbitalLayout":
        """``species`` items are ``(name, n_spatial, n_alpha, n_beta, charge)``."""
        return cls(tuple(SpeciesBlock(*s) for s in species))

    @property
    def n_modes(self) -> int:
        return sum(b.n_modes for b in self.blocks)

    def block_offset(self, name: str) -> int:
        off = 0
        for b in self.blocks:
            if b.name == name:
                return off
            off += b.n_modes
        raise KeyError(name)

    def block(self, name: str) -> SpeciesBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def has(self, name: str) -> bool:
        return any(b.name == name for b in self.blocks)

    def mode(self, species: str, orbital: int, spin: str) -> int:
        b = self.block(species)
        if spin not in b.spins:
            raise KeyError(f"{species} has no {spin} block")
        if not 0 <= orbital < b.n_spatial:
            raise IndexError(orbital)
        return self.block_offset(species) + b.spins.index(spin) * b.n_spatial + orbital

    def mode_info(self, m: int) -> tuple[str, int, str]:
        off = 0
        for b in self.blocks:
            if m < off + b.n_modes:
                k = m - off
                return b.name, k % b.n_spatial, b.spins[k // b.n_spatial]
            off += b.n_modes
        raise IndexError(f"mode {m} outside layout of {self.n_modes} modes")

    def species_of_modes(self) -> list[str]:
        return [self.mode_info(m)[0] for m in range(self.n_modes)]

    def species_ranges(self) -> dict[str, range]:
        out, off = {}, 0
        for b in self.blocks:
            out[b.name] = range(off, off + b.n_modes)
            off += b.n_modes
        return out

    def spin_ranges(self) -> list[tuple[str, str, range, int]]:
        """``(species, spin, modes, particle count)`` for every spin block."""
        out, off = [], 0
        for b in self.blocks:
            for s in b.spins:
                out.append((b.name, s, range(off, off + b.n_spatial), b.count(s)))
                off += b.n_spatial
        return out

    def reference_occupation(self) -> int:
        """Aufbau bitstring: lowest orbitals filled in every spin block."""
        bits = 0
        for _, _, modes, n in self.spin_ranges():
            for m in list(modes)[:n]:
                bits |= 1 << m
        return bits

    def to_dict(self) -> dict:
        return {
            "blocks": [
                {"name": b.name, "n_spatial": b.n_spatial, "n_alpha": b.n_alpha,
                 "n_beta": b.n_beta, "charge": b.charge, "spins": list(b.spins)}
                for b in self.blocks
            ],
            "dropped": [list(d) for d in self.dropped],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SpinOrbitalLayout":
        blocks = tuple(
            SpeciesBlock(b["name"], b["n_spatial"], b["n_alpha"], b["n_beta"], b["charge"],
                         tuple(b["spins"]))
            for b in d["blocks"]
        )
        return cls(blocks, tuple(tuple(x) for x in d.get("dropped", ())))


# An operator term is a tuple of (mode, is_creation) pairs, applied right to left.
Term = tuple[tuple[int, bool], ...]


class SecondQuantizedOp:
    """Sum of products of ladder operators with complex coefficients."""

    def __init__(self, terms: Mapping[Term, complex] | Iterable[tuple[Term, complex]] = (),
                 n_modes: int | None = None):
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[Term, complex] = {}
        for t, c in items:
            t = tuple((int(m), bool(cr)) for m, cr in t)
            merged[t] = merged.get(t, 0) + complex(c)
        self.terms = merged
        if n_modes is None:
            n_modes = 1 + max((m for t in merged for m, _ in t), default=-1)
        self.n_modes = n_modes

    def __len__(self):
        return len(self.terms)

    def __add__(self, other: "SecondQuantizedOp") -> "SecondQuantizedOp":
        return SecondQuantizedOp(list(self.terms.items()) + list(other.terms.items()),
                                 max(self.n_modes, other.n_modes))

    def __sub__(self, other):
        return self + other * -1

    def __mul__(self, other):
        if isinstance(other, SecondQuantizedOp):
            out = []
            for t1, c1 in self.terms.items():
                for t2, c2 in other.terms.items():
                    out.append((t1 + t2, c1 * c2))
            return SecondQuantizedOp(out, max(self.n_modes, other.n_modes))
        return SecondQuantizedOp({t: c * other for t, c in self.terms.items()}, self.n_modes)

    __rmul__ = __mul__

    def adjoint(self) -> "SecondQuantizedOp":
        return SecondQuantizedOp(
            {tuple((m, not cr) for m, cr in reversed(t)): np.conj(c) for t, c in self.terms.items()},
            self.n_modes,
        )

    def constant(self) -> complex:
        return self.terms.get((), 0.0)

    def modes(self) -> set[int]:
        return {m for t in self.terms for m, _ in t}

    def normal_ordered(self, layout: SpinOrbitalLayout | None = None,
                       cutoff: float = CUTOFF) -> "SecondQuantizedOp":
        """Canonical form: species block, then creators before annihilators.

        Creators are sorted by ascending mode and annihilators by descending
        mode.  Operators of different species commute; those of one species
        anticommute.  Coefficients below ``cutoff`` are dropped.
        """
        species = (layout.species_of_modes() if layout is not None
                   else ["f"] * self.n_modes)
        rank = {name: i for i, name in enumerate(dict.fromkeys(species))}
        out: dict[Term, complex] = {}
        for t, c in self.terms.items():
            for nt, nc in _normal_order_term(t, c, species, rank):
                out[nt] = out.get(nt, 0) + nc
        return SecondQuantizedOp({t: c for t, c in sorted(out.items(), key=_term_sort_key)
                                  if abs(c) >= cutoff}, self.n_modes)

    def is_hermitian(self, layout: SpinOrbitalLayout | None = None, atol: float = 1e-10) -> bool:
        diff = (self - self.adjoint()).normal_ordered(layout, cutoff=atol)
        return len(diff.terms) == 0


def _key(op, species, rank):
    m, cr = op
    return (rank[species[m]], 0 if cr else 1, m if cr else -m)


def _term_sort_key(item):
    t, _ = item
    return (len(t), [(0 if cr else 1, m) for m, cr in t])


def _normal_order_term(term, coeff, species, rank):
    """Bubble sort ``term`` into canonical order, emitting contraction terms."""
    results = []
    stack = [(list(term), coeff)]
    while stack:
        ops, c = stack.pop()
        if c == 0:
            continue
        zero = False
        changed = True
        while changed and not zero:
            changed = False
            for i in range(len(ops) - 1):
                a, b = ops[i], ops[i + 1]
                if _key(a, species, rank) <= _key(b, species, rank):
                    if a == b and species[a[0]] == species[b[0]]:
                        zero = True  # a_p a_p = a+_p a+_p = 0
                        break
                    continue
                same = species[a[0]] == species[b[0]]
                if same and a[0] == b[0] and (not a[1]) and b[1]:
                    # a_p a+_p = 1 - a+_p a_p
                    stack.append((ops[:i] + ops[i + 2:], c))
                ops[i], ops[i + 1] = b, a
                if same:
                    c = -c
                changed = True
        if not zero:
            results.append((tuple(ops), c))
    return results


def ladder(mode: int, creation: bool) -> SecondQuantizedOp:
    return SecondQuantizedOp({((mode, creation),): 1.0})


def number_operator(layout: SpinOrbitalLayout, species: str, spin: str | None = None) -> SecondQuantizedOp:
    terms = {}
    for name, s, modes, _ in layout.spin_ranges():
        if name == species and (spin is None or s == spin):
            for m in modes:
                terms[((m, True), (m, False))] = 1.0
    return SecondQuantizedOp(terms, layout.n_modes)


def build_neo_hamiltonian(mo_integrals, layout: SpinOrbitalLayout) -> SecondQuantizedOp:
    """Second-quantized NEO Hamiltonian from spin-free MO integrals.

    Same-species repulsion carries the 1/2 prefactor; the electron-proton
    attraction enters once with the charge product (-1) as its sign.
    Spin-orbital coefficients are non-zero only for matching spins.
    """
    ints = mo_integrals
    terms: dict[Term, complex] = {(): ints.e_core}
    present = {b.name: b for b in layout.blocks}
    for name, b in present.items():
        h = ints.h[name]
        if h.shape != (b.n_spatial, b.n_spatial):
            raise ValueError(f"{name}: one-body shape {h.shape} does not match {b.n_spatial} orbitals")
        for s in b.spins:
            for p, q in zip(*np.nonzero(np.abs(h) > CUTOFF)):
                mp, mq = layout.mode(name, p, s), layout.mode(name, q, s)
                _acc(terms, ((mp, True), (mq, False)), h[p, q])
        eri = ints.eri[(name, name)]
        if eri.shape != (b.n_spatial,) * 4:
            raise ValueError(f"{name}{name}: two-body shape {eri.shape} mismatch")
        pref = 0.5 * b.charge * b.charge
        idx = np.argwhere(np.abs(eri) > CUTOFF)
        for s1 in b.spins:
            for s2 in b.spins:
                for p, q, r, s in idx:
                    mp, mq = layout.mode(name, p, s1), layout.mode(name, q, s1)
                    mr, ms = layout.mode(name, r, s2), layout.mode(name, s, s2)
                    if mp == mr or mq == ms:
                        continue
                    _acc(terms, ((mp, True), (mr, True), (ms, False), (mq, False)),
                         pref * eri[p, q, r, s])
    names = [b.name for b in layout.blocks]
    for n1, n2 in itertools.combinations(names, 2):
        key = (n1, n2) if (n1, n2) in ints.eri else (n2, n1)
        eri = ints.eri[key]
        if key != (n1, n2):
            eri = eri.transpose(2, 3, 0, 1)
        b1, b2 = present[n1], present[n2]
        if eri.shape != (b1.n_spatial, b1.n_spatial, b2.n_spatial, b2.n_spatial):
            raise ValueError(f"{n1}{n2}: two-body shape {eri.shape} mismatch")
        pref = b1.charge * b2.charge
        idx = np.argwhere(np.abs(eri) > CUTOFF)
        for s1 in b1.spins:
            for s2 in b2.spins:
                for p, q, r, s in idx:
                    mp, mq = layout.mode(n1, p, s1), layout.mode(n1, q, s1)
                    mr, ms = layout.mode(n2, r, s2), layout.mode(n2, s, s2)
                    _acc(terms, ((mp, True), (mr, True), (ms, False), (mq, False)),
                         pref * eri[p, q, r, s])
    return SecondQuantizedOp(terms, layout.n_modes)


def _acc(terms, key, val):
    terms[key] = terms.get(key, 0) + val


def restrict_spin_sector(op: SecondQuantizedOp, layout: SpinOrbitalLayout, species: str,
                         drop_spin: str = "beta") -> tuple[SecondQuantizedOp, SpinOrbitalLayout]:
    """Remove every term touching the dropped spin block and renumber modes.

    Valid when the dropped block is empty in the target sector; equivalent to
    projecting onto the sector with that block unoccupied.
    """
    b = layout.block(species)
    if drop_spin not in b.spins:
        return op, layout
    if b.count(drop_spin) != 0:
        raise ValueError(f"cannot drop {species}-{drop_spin}: block holds {b.count(drop_spin)} particles")
    dropped_modes = {layout.mode(species, i, drop_spin) for i in range(b.n_spatial)}
    old_to_new = {}
    for m in range(layout.n_modes):
        if m not in dropped_modes:
            old_to_new[m] = len(old_to_new)
    new_blocks = tuple(
        SpeciesBlock(x.name, x.n_spatial, x.n_alpha, x.n_beta, x.charge,
                     tuple(s for s in x.spins if s != drop_spin)) if x.name == species else x
        for x in layout.blocks
    )
    new_layout = SpinOrbitalLayout(new_blocks, layout.dropped + ((species, drop_spin, b.n_spatial),))
    terms = {}
    for t, c in op.terms.items():
        if any(m in dropped_modes for m, _ in t):
            continue
        terms[tuple((old_to_new[m], cr) for m, cr in t)] = c
    return SecondQuantizedOp(terms, new_layout.n_modes), new_layout


def excitation_operator(creators: Iterable[int], annihilators: Iterable[int]) -> SecondQuantizedOp:
    """``prod_k a+_{c_k} a_{a_k}`` in pair order."""
    ops: list[tuple[int, bool]] = []
    for c, a in zip(creators, annihilators, strict=True):
        ops += [(c, True), (a, False)]
    return SecondQuantizedOp({tuple(ops): 1.0})
