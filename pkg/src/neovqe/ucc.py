"""NEO unitary coupled cluster: excitation pools, Trotterized circuits, parameter transfer."""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, Gate, pauli_rotation
from .fermion import SecondQuantizedOp, SpinOrbitalLayout
from .mapping import encode_occupation, parity_map
from .pauli import PauliSum, paulis_commute
from .tapering import FixStep, ReductionRecord, SymmetryViolation, TaperStep

log = logging.getLogger(__name__)

ORDER_LETTERS = {"S": 1, "D": 2, "T": 3, "Q": 4}
_TOKEN = re.compile(r"([SDTQ])(\^\{?\((\d+),(\d+)\)\}?)?")


class OrderSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ExcitationOp:
    """``T - T^dagger`` for ``T = a+_{v1}..a+_{vk} a_{ok}..a_{o1}`` over mixed species."""

    e: int
    p: int
    occupied: tuple[int, ...]
    virtual: tuple[int, ...]
    name: str

    @property
    def order(self) -> int:
        return self.e + self.p

    def operator(self, n_modes: int) -> SecondQuantizedOp:
        ops = tuple((v, True) for v in self.virtual) + tuple((o, False) for o in reversed(self.occupied))
        t = SecondQuantizedOp({ops: 1.0}, n_modes)
        return t - t.adjoint()


def parse_order_spec(spec: str) -> list[tuple[str, tuple[int, int] | None]]:
    """``"SDT^{(2,1)}"`` -> ``[("S", None), ("D", None), ("T", (2, 1))]``."""
    s = spec.replace(" ", "")
    if not s:
        raise OrderSpecError("empty order specification")
    out, pos = [], 0
    while pos < len(s):
        m = _TOKEN.match(s, pos)
        if not m:
            raise OrderSpecError(f"cannot parse order spec {spec!r} at position {pos}: {s[pos:]!r}")
        letter = m.group(1)
        split = (int(m.group(3)), int(m.group(4))) if m.group(2) else None
        if split is not None and sum(split) != ORDER_LETTERS[letter]:
            raise OrderSpecError(f"{letter}^{split}: split does not add up to order {ORDER_LETTERS[letter]}")
        out.append((letter, split))
        pos = m.end()
    return out


def _mode_label(layout: SpinOrbitalLayout, m: int) -> str:
    sp, orb, spin = layout.mode_info(m)
    return f"{sp}{orb}{spin[0]}"


def _species_excitations(layout: SpinOrbitalLayout, species: str, k: int, occ_bits: int):
    """Spin-conserving k-fold excitations within one species: ``(occupied, virtual)`` tuples."""
    if k == 0:
        return [((), ())]
    if not layout.has(species):
        return []
    modes = list(layout.species_ranges()[species])
    occ = [m for m in modes if (occ_bits >> m) & 1]
    vir = [m for m in modes if not (occ_bits >> m) & 1]
    spin = {m: layout.mode_info(m)[2] for m in modes}
    out = []
    for o in itertools.combinations(occ, k):
        so = sorted(spin[m] for m in o)
        for v in itertools.combinations(vir, k):
            if sorted(spin[m] for m in v) == so:
                out.append((o, v))
    return out


def generate_excitations(layout: SpinOrbitalLayout, spec: str, reference: int | None = None) -> list[ExcitationOp]:
    """Deterministic, duplicate-free excitation pool for an order spec.

    Bare letters expand to every electron/proton split of that order that the
    particle counts allow.  Ordering: by total order, then electronic-only,
    nuclear-only, mixed (electron-heavier first), then by mode indices.
    """
    ref = layout.reference_occupation() if reference is None else reference
    counts = {b.name: b.n_alpha + b.n_beta for b in layout.blocks}
    ne, npr = counts.get("e", 0), counts.get("p", 0)
    splits: list[tuple[int, int]] = []
    for letter, split in parse_order_spec(spec):
        k = ORDER_LETTERS[letter]
        cand = [split] if split else [(e, k - e) for e in range(k, -1, -1)]
        for e, p in cand:
            if e <= ne and p <= npr and (e, p) not in splits:
                splits.append((e, p))
    pool = []
    for e, p in splits:
        for eo, ev in _species_excitations(layout, "e", e, ref):
            for po, pv in _species_excitations(layout, "p", p, ref):
                occ, vir = eo + po, ev + pv
                if not occ:
                    continue
                label = ",".join(_mode_label(layout, m) for m in occ) + "->" + \
                        ",".join(_mode_label(layout, m) for m in vir)
                pool.append(ExcitationOp(e, p, occ, vir, f"t({e},{p})[{label}]"))

    def key(x: ExcitationOp):
        cat = 0 if x.p == 0 else (1 if x.e == 0 else 2)
        return (x.order, cat, -x.e, x.occupied, x.virtual)

    pool.sort(key=key)
    return pool


def map_generator(exc: ExcitationOp, layout: SpinOrbitalLayout, record: ReductionRecord | None) -> PauliSum:
    """Qubit image of an excitation generator in the reduced register."""
    g = parity_map(exc.operator(layout.n_modes).normal_ordered(layout), layout)
    if record is None:
        return g
    for step in record.steps:
        if isinstance(step, FixStep) and not step.strict:
            pmask = sum(1 << q for q in step.positions)
            if any(x & pmask for (x, _), _ in g):
                raise SymmetryViolation(f"{exc.name} moves particles on projected-out qubits")
        if isinstance(step, TaperStep):
            gen = step.generator
            if not all(paulis_commute(x, z, gen.x, gen.z) for (x, z), _ in g):
                raise SymmetryViolation(f"{exc.name} breaks the tapered symmetry {gen.word}")
        g = step.apply(g)
    return g


def build_neoucc_circuit(excitations: list[ExcitationOp], layout: SpinOrbitalLayout,
                         record: ReductionRecord | None = None, drop_symmetry_breaking: bool = True,
                         electronic_qubits: tuple[int, ...] | None = None) -> Circuit:
    """HF preparation followed by one Trotter step over the excitation pool.

    The pool is read as the written product ``U = prod_k exp(theta_k tau_k)``
    in canonical order, so the rightmost factor (the highest excitation)
    acts on the reference first and the singles act last.  Parameters keep
    the canonical pool order.

    The mapped generator ``sum_k i c_k P_k`` of each excitation becomes
    rotations ``exp(-i w theta/2 P_k)`` with ``w = -2 c_k``, so ``theta`` is
    the cluster amplitude.  Excitations that break a tapered symmetry are
    skipped (they vanish in the chosen sector); those touching projected-out
    spin blocks raise.
    """
    n = record.n_final if record is not None else layout.n_modes
    labels = (record.final_labels if record is not None else None) or tuple(layout.species_of_modes())
    el = tuple(q for q in range(n) if labels[q] == "e") if electronic_qubits is None else electronic_qubits
    circ = Circuit(n, el, tuple(q for q in range(n) if q not in el))
    ref = encode_occupation(layout.reference_occupation(), layout)
    if record is not None:
        ref = record.reduce_bits(ref)
    for q in range(n):
        if (ref >> q) & 1:
            circ.add(Gate("x", (q,)))
    circ.parameters.extend(exc.name for exc in excitations)
    kept = []
    for exc in reversed(excitations):
        try:
            g = map_generator(exc, layout, record)
        except SymmetryViolation as err:
            if drop_symmetry_breaking and "tapered symmetry" in str(err):
                log.info("skipping %s: %s", exc.name, err)
                continue
            raise
        for (x, z), c in g:
            if abs(c.real) > 1e-10:
                raise ValueError(f"{exc.name}: generator is not anti-Hermitian")
            circ.add(pauli_rotation(x, z, exc.name, -2.0 * c.imag))
        kept.append(exc.name)
    # skipped excitations have no parameter; a generator that vanished in this sector keeps its name
    circ.parameters[:] = [name for name in circ.parameters if name in kept]
    return circ


# -- parameter transfer ------------------------------------------------------------

def transfer_parameters(source: dict[str, float], target: Circuit, variant: str = "ucc",
                        nuclear_reference: dict[int, int] | None = None, strict: bool = True) -> np.ndarray:
    """Initial parameters for ``target`` from an electronic solution.

    Electronic parameters are copied by name and all others start at zero.
    For TwoLocal targets, nuclear qubits whose reference bit is 1 get a pi
    rotation: on the last-layer Ry for ``expanded`` and on the initial
    nuclear Ry for ``stacked``.
    """
    vals = {p: 0.0 for p in target.parameters}
    unmatched = [k for k in source if k not in vals]
    if unmatched and strict:
        raise KeyError(f"electronic parameters without a target: {unmatched[:5]}")
    for k, v in source.items():
        if k in vals:
            vals[k] = float(v)
    if variant in ("expanded", "stacked"):
        layers = [int(p.split(",L")[1].rstrip("]")) for p in target.parameters if ",L" in p and p.startswith("ry[n")]
        for q, bit in (nuclear_reference or {}).items():
            if not bit:
                continue
            local = target.nuclear.index(q)
            layer = max(layers) if variant == "expanded" else 0
            name = f"ry[n{local},L{layer}]"
            if name not in vals:
                raise KeyError(f"target circuit has no parameter {name}")
            vals[name] = np.pi
    elif variant != "ucc":
        raise ValueError(f"unknown transfer variant {variant!r}")
    return target.bind(vals)
