"""Qubit-reduction ladder: species parity removal, Z2 tapering, fixed-qubit projection.

Every step is stored in a :class:`ReductionRecord` so that operators can be
reduced and statevectors re-expanded to the full register later.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .fermion import SpinOrbitalLayout
from .pauli import PauliSum, _popcount, masks_to_word, multiply, paulis_commute, word_to_masks

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SYMMETRY_TOL = 1e-8  # terms below this size are treated as round-off when testing symmetries


class SymmetryViolation(ValueError):
    pass


class NoSignatureMatch(ValueError):
    pass


def _compress(mask: int, keep: list[int]) -> int:
    out = 0
    for new, old in enumerate(keep):
        out |= ((mask >> old) & 1) << new
    return out


def _expand(mask: int, keep: list[int]) -> int:
    out = 0
    for new, old in enumerate(keep):
        out |= ((mask >> new) & 1) << old
    return out


@dataclass(frozen=True)
class SymmetryGenerator:
    """Pauli word commuting with the Hamiltonian, with its single-qubit X partner."""

    x: int
    z: int
    n_qubits: int
    position: int
    eigenvalue: int = 1

    @property
    def word(self) -> str:
        return masks_to_word(self.x, self.z, self.n_qubits)

    @property
    def is_z_type(self) -> bool:
        return self.x == 0

    def with_eigenvalue(self, value: int) -> "SymmetryGenerator":
        if value not in (1, -1):
            raise ValueError("eigenvalue must be +1 or -1")
        return SymmetryGenerator(self.x, self.z, self.n_qubits, self.position, value)

    def as_sum(self) -> PauliSum:
        return PauliSum({(self.x, self.z): 1.0}, self.n_qubits)


# -- reduction steps -----------------------------------------------------------

@dataclass(frozen=True)
class FixStep:
    """Replace qubits by computational-basis values and delete them.

    ``strict`` steps require every term to be diagonal on the fixed qubits
    (a conserved-parity removal); non-strict steps drop off-diagonal terms,
    i.e. project onto the fixed bit values.
    """

    kind: str  # "parity" | "project"
    positions: tuple[int, ...]
    bits: tuple[int, ...]
    n_before: int
    strict: bool = True

    @property
    def n_after(self) -> int:
        return self.n_before - len(self.positions)

    @property
    def keep(self) -> list[int]:
        return [q for q in range(self.n_before) if q not in self.positions]

    @property
    def fixed_mask(self) -> int:
        return sum(b << q for q, b in zip(self.positions, self.bits))

    def apply(self, op: PauliSum) -> PauliSum:
        pmask = sum(1 << q for q in self.positions)
        fixed = self.fixed_mask
        keep = self.keep
        out = []
        for (x, z), c in op:
            if x & pmask:
                if self.strict:
                    raise SymmetryViolation(
                        f"term {masks_to_word(x, z, op.n_qubits)} flips a conserved-parity qubit")
                continue
            if _popcount(z & fixed) % 2:
                c = -c
            out.append(((_compress(x, keep), _compress(z, keep)), c))
        labels = tuple(op.labels[q] for q in keep) if op.labels else None
        return PauliSum(out, self.n_after, labels)

    def reduce_state(self, psi: np.ndarray) -> np.ndarray:
        idx = np.arange(1 << self.n_after)
        full = _expand_indices(idx, self.keep) | self.fixed_mask
        return psi[full]

    def expand_state(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros(1 << self.n_before, dtype=complex)
        idx = np.arange(1 << self.n_after)
        out[_expand_indices(idx, self.keep) | self.fixed_mask] = psi
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "positions": list(self.positions), "bits": list(self.bits),
                "n_before": self.n_before, "strict": self.strict}


@dataclass(frozen=True)
class TaperStep:
    """Clifford rotation ``U = (X_q + tau)/sqrt(2)`` followed by fixing ``X_q``."""

    generator: SymmetryGenerator
    tol: float = SYMMETRY_TOL

    kind = "taper"

    @property
    def n_before(self) -> int:
        return self.generator.n_qubits

    @property
    def n_after(self) -> int:
        return self.n_before - 1

    @property
    def positions(self) -> tuple[int, ...]:
        return (self.generator.position,)

    @property
    def keep(self) -> list[int]:
        q = self.generator.position
        return [k for k in range(self.n_before) if k != q]

    def clifford(self) -> PauliSum:
        g = self.generator
        s = 2 ** -0.5
        return PauliSum({(1 << g.position, 0): s, (g.x, g.z): s}, self.n_before)

    def apply(self, op: PauliSum) -> PauliSum:
        g = self.generator
        q = g.position
        odd = [(abs(c), masks_to_word(x, z, op.n_qubits)) for (x, z), c in op
               if not paulis_commute(x, z, g.x, g.z)]
        if odd and max(odd)[0] >= self.tol:
            raise SymmetryViolation(f"{len(odd)} terms do not commute with {g.word}, e.g. {max(odd)[1]}")
        if odd:
            log.info("dropping %d round-off terms (max %.2e) that break %s", len(odd), max(odd)[0], g.word)
            op = PauliSum([(k, c) for k, c in op if paulis_commute(*k, g.x, g.z)], op.n_qubits, op.labels)
        U = self.clifford()
        rotated = multiply(U, multiply(op, U))
        keep = self.keep
        out = []
        for (x, z), c in rotated:
            if (z >> q) & 1:
                raise SymmetryViolation(f"residual Y/Z on tapered qubit {q}")
            if (x >> q) & 1:
                c = c * g.eigenvalue
            out.append(((_compress(x, keep), _compress(z, keep)), c))
        labels = tuple(op.labels[k] for k in keep) if op.labels else None
        return PauliSum(out, self.n_after, labels)

    def reduce_state(self, psi: np.ndarray) -> np.ndarray:
        q = self.generator.position
        rotated = self.clifford().apply(psi)
        idx = _expand_indices(np.arange(1 << self.n_after), self.keep)
        a0, a1 = rotated[idx], rotated[idx | (1 << q)]
        return (a0 + self.generator.eigenvalue * a1) / np.sqrt(2)

    def expand_state(self, psi: np.ndarray) -> np.ndarray:
        q = self.generator.position
        full = np.zeros(1 << self.n_before, dtype=complex)
        idx = _expand_indices(np.arange(1 << self.n_after), self.keep)
        full[idx] = psi / np.sqrt(2)
        full[idx | (1 << q)] = self.generator.eigenvalue * psi / np.sqrt(2)
        return self.clifford().apply(full)

    def to_dict(self) -> dict:
        g = self.generator
        return {"kind": "taper", "word": g.word, "position": g.position,
                "eigenvalue": g.eigenvalue, "n_before": g.n_qubits, "tol": self.tol}


def _expand_indices(idx: np.ndarray, keep: list[int]) -> np.ndarray:
    out = np.zeros_like(idx)
    for new, old in enumerate(keep):
        out |= ((idx >> new) & 1) << old
    return out


def _step_from_dict(d):
    if d["kind"] == "taper":
        x, z = word_to_masks(d["word"])
        return TaperStep(SymmetryGenerator(x, z, d["n_before"], d["position"], d["eigenvalue"]),
                         d.get("tol", SYMMETRY_TOL))
    return FixStep(d["kind"], tuple(d["positions"]), tuple(d["bits"]), d["n_before"], d["strict"])


@dataclass
class ReductionRecord:
    """Ordered, replayable list of reduction steps starting from ``n_original`` qubits."""

    n_original: int
    steps: list = field(default_factory=list)
    labels: tuple[str, ...] | None = None
    extras: list[str] = field(default_factory=list)  # symmetries found but not tapered

    @property
    def n_final(self) -> int:
        return self.steps[-1].n_after if self.steps else self.n_original

    @property
    def final_labels(self) -> tuple[str, ...] | None:
        if self.labels is None:
            return None
        lab = list(self.labels)
        for s in self.steps:
            lab = [lab[k] for k in s.keep]
        return tuple(lab)

    def original_positions(self) -> list[int]:
        """Original qubit index of every qubit in the final register."""
        pos = list(range(self.n_original))
        for s in self.steps:
            pos = [pos[k] for k in s.keep]
        return pos

    def stage_counts(self) -> list[tuple[str, int]]:
        out = [("none", self.n_original)]
        for s in self.steps:
            out.append((s.kind, s.n_after))
        return out

    def extend(self, other: "ReductionRecord") -> "ReductionRecord":
        if other.n_original != self.n_final:
            raise ValueError("records do not chain")
        return ReductionRecord(self.n_original, self.steps + other.steps, self.labels,
                               self.extras + other.extras)

    def apply(self, op: PauliSum) -> PauliSum:
        if op.n_qubits != self.n_original:
            raise ValueError(f"operator has {op.n_qubits} qubits, record starts at {self.n_original}")
        for s in self.steps:
            op = s.apply(op)
        return op

    def reduce_state(self, psi: np.ndarray) -> np.ndarray:
        for s in self.steps:
            psi = s.reduce_state(psi)
        return psi

    def expand_state(self, psi: np.ndarray) -> np.ndarray:
        if psi.shape[0] != 1 << self.n_final:
            raise ValueError(f"state has {psi.shape[0]} amplitudes, record ends at {self.n_final} qubits")
        for s in reversed(self.steps):
            psi = s.expand_state(psi)
        return psi

    def reduce_bits(self, bits: int) -> int:
        """Push a computational basis state through the record.

        Fails when a Clifford turns it into a superposition (non-Z generators)
        or when it is outside the recorded symmetry sectors.
        """
        for s in self.steps:
            if isinstance(s, FixStep):
                for q, b in zip(s.positions, s.bits):
                    if (bits >> q) & 1 != b:
                        raise SymmetryViolation(f"reference bit {q} differs from fixed value {b}")
                bits = _compress(bits, s.keep)
            else:
                g = s.generator
                if not g.is_z_type:
                    raise SymmetryViolation("reference bits undefined through a non-Z generator")
                if (-1) ** _popcount(g.z & bits) != g.eigenvalue:
                    raise SymmetryViolation(f"reference lies outside sector {g.eigenvalue} of {g.word}")
                bits = _compress(bits, s.keep)
        return bits

    def to_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "n_original": self.n_original,
                "labels": list(self.labels) if self.labels else None,
                "steps": [s.to_dict() for s in self.steps], "extras": list(self.extras)}

    @classmethod
    def from_dict(cls, d) -> "ReductionRecord":
        if d.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ValueError(f"reduction record schema {d.get('schema')} not supported")
        labels = tuple(d["labels"]) if d.get("labels") else None
        return cls(d["n_original"], [_step_from_dict(s) for s in d["steps"]], labels,
                   list(d.get("extras", [])))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


# -- operations ------------------------------------------------------------------

def species_parity_positions(layout: SpinOrbitalLayout) -> list[tuple[int, int]]:
    """``(qubit, bit)`` pairs carrying conserved parities in the parity encoding."""
    out = []
    for b in layout.blocks:
        off = layout.block_offset(b.name)
        if len(b.spins) == 2:
            na = b.count(b.spins[0])
            out.append((off + b.n_spatial - 1, na % 2))
            out.append((off + b.n_modes - 1, (b.n_alpha + b.n_beta) % 2))
        else:
            out.append((off + b.n_modes - 1, b.count(b.spins[0]) % 2))
    return out


def species_parity_reduction(h: PauliSum, layout: SpinOrbitalLayout,
                             record: ReductionRecord | None = None) -> tuple[PauliSum, ReductionRecord]:
    if h.n_qubits != layout.n_modes:
        raise ValueError("operator and layout sizes differ")
    pairs = species_parity_positions(layout)
    step = FixStep("parity", tuple(q for q, _ in pairs), tuple(b for _, b in pairs), h.n_qubits, True)
    rec = record or ReductionRecord(h.n_qubits, [], h.labels)
    rec = ReductionRecord(rec.n_original, rec.steps + [step], rec.labels, rec.extras)
    return step.apply(h), rec


def _gf2_kernel(rows: list[int], n_bits: int) -> list[int]:
    """Basis of ``{g : popcount(r & g) even for all rows r}`` in reduced echelon form."""
    pivots: dict[int, int] = {}  # pivot bit -> row
    for r in rows:
        for bit, pr in pivots.items():
            if (r >> bit) & 1:
                r ^= pr
        if r == 0:
            continue
        bit = r.bit_length() - 1
        for b2 in list(pivots):
            if (pivots[b2] >> bit) & 1:
                pivots[b2] ^= r
        pivots[bit] = r
    free = [b for b in range(n_bits) if b not in pivots]
    basis = []
    for f in free:
        g = 1 << f
        for bit, pr in pivots.items():
            if (pr >> f) & 1:
                g |= 1 << bit
        basis.append(g)
    return basis


def find_z2_symmetries(h: PauliSum, consumed: tuple[int, ...] = (),
                       tol: float = SYMMETRY_TOL) -> list[SymmetryGenerator]:
    """Independent Pauli words commuting with every term of ``h``, each with an X position.

    ``consumed`` lists qubits whose single-qubit Z is a symmetry already used
    by an earlier reduction; those Z factors are divided out of every
    generator and the resulting duplicates discarded.  The kernel basis is
    brought to a form where every generator owns one qubit (its X position)
    on which no other generator has a Z or Y; positions are chosen
    lowest-index first.  Eigenvalues default to +1.  Terms smaller than
    ``tol`` are ignored: near-degenerate orbitals mix at round-off level and
    would otherwise hide exact symmetries.
    """
    n = h.n_qubits
    cmask = 0
    for q in consumed:
        if any(abs(c) >= tol and (x >> q) & 1 for (x, _), c in h):
            raise SymmetryViolation(f"Z on consumed qubit {q} is not a symmetry")
        cmask |= 1 << q
    # generator g = gx | gz << n commutes with term (x, z) iff popcount(z & gx ^ x & gz) even
    rows = [z | (x << n) for (x, z), c in h if (x, z) != (0, 0) and abs(c) >= tol]
    kernel = _gf2_kernel(rows, 2 * n)
    gens = [(g & ((1 << n) - 1), (g >> n) & ~cmask) for g in kernel]
    gens = [(gx, gz) for gx, gz in gens if gx or gz]
    out: list[SymmetryGenerator] = []
    remaining = list(gens)
    chosen: list[tuple[int, int, int]] = []
    # Gaussian elimination on the z-part so each generator has a private pivot qubit
    while remaining:
        remaining.sort(key=lambda g: (_lowest_z_bit(g, n), g[1], g[0]))
        gx, gz = remaining.pop(0)
        q = _lowest_z_bit((gx, gz), n)
        if q >= n:
            log.info("skipping symmetry without Z/Y support: %s", masks_to_word(gx, gz, n))
            continue
        bit = 1 << q
        remaining = [pauli_mul_masks(g, (gx, gz)) if g[1] & bit else g for g in remaining]
        chosen = [(cx, cz, cq) if not cz & bit else (*pauli_mul_masks((cx, cz), (gx, gz)), cq)
                  for cx, cz, cq in chosen]
        chosen.append((gx, gz, q))
    for gx, gz, q in sorted(chosen, key=lambda c: c[2]):
        out.append(SymmetryGenerator(gx, gz, n, q, 1))
    return out


def _lowest_z_bit(g, n):
    gz = g[1]
    return (gz & -gz).bit_length() - 1 if gz else n


def pauli_mul_masks(a, b):
    return a[0] ^ b[0], a[1] ^ b[1]


def sector_from_reference(gen: SymmetryGenerator, reference: int) -> int:
    """Eigenvalue of a Z-type generator on a computational basis state."""
    if not gen.is_z_type:
        raise ValueError(f"{gen.word} is not diagonal; its sector is not fixed by a bitstring")
    return -1 if _popcount(gen.z & reference) % 2 else 1


def taper(h: PauliSum, generators: list[SymmetryGenerator],
          record: ReductionRecord | None = None, tol: float = SYMMETRY_TOL) -> tuple[PauliSum, ReductionRecord]:
    """Taper one qubit per generator, in order; later generators are re-indexed."""
    rec = record or ReductionRecord(h.n_qubits, [], h.labels)
    steps = list(rec.steps)
    # validate mutual commutation and X-position structure before touching anything
    for a, b in itertools.combinations(generators, 2):
        if not paulis_commute(a.x, a.z, b.x, b.z):
            raise SymmetryViolation(f"generators {a.word} and {b.word} do not commute")
        for g, o in ((a, b), (b, a)):
            if (o.z >> g.position) & 1:
                raise SymmetryViolation(f"X position {g.position} of {g.word} clashes with {o.word}")
    pending = list(generators)
    while pending:
        g = pending.pop(0)
        step = TaperStep(g, tol)
        h = step.apply(h)
        steps.append(step)
        keep = step.keep
        pending = [SymmetryGenerator(_compress(o.x, keep), _compress(o.z, keep), o.n_qubits - 1,
                                     keep.index(o.position), o.eigenvalue) for o in pending]
    return h, ReductionRecord(rec.n_original, steps, rec.labels, rec.extras)


def project_fixed_qubits(h: PauliSum, fixed: dict[int, int],
                         record: ReductionRecord | None = None) -> tuple[PauliSum, ReductionRecord]:
    """Project onto computational-basis values of ``fixed`` qubits and delete them."""
    rec = record or ReductionRecord(h.n_qubits, [], h.labels)
    if not fixed:
        return h, rec
    positions = tuple(sorted(fixed))
    for q in positions:
        if not 0 <= q < h.n_qubits or fixed[q] not in (0, 1):
            raise ValueError(f"invalid fixed qubit {q}: {fixed[q]}")
    step = FixStep("project", positions, tuple(fixed[q] for q in positions), h.n_qubits, False)
    return step.apply(h), ReductionRecord(rec.n_original, rec.steps + [step], rec.labels, rec.extras)


def spin_projection(h: PauliSum, layout: SpinOrbitalLayout, record: ReductionRecord,
                    species: str = "p", spin: str = "beta") -> tuple[PauliSum, ReductionRecord]:
    """Project the surviving qubits of an empty spin block onto their parity values.

    With the block unoccupied, every parity qubit inside it equals the parity
    of the species' alpha count.  Valid only for records whose first steps act
    on the full parity-encoded register of ``layout``.
    """
    b = layout.block(species)
    if spin not in b.spins or b.count(spin) != 0:
        raise ValueError(f"{species}-{spin} is not an empty spin block of the layout")
    if record.n_original != layout.n_modes:
        raise ValueError("record does not start from the layout's full register")
    modes = {layout.mode(species, i, spin) for i in range(b.n_spatial)}
    before = sum(b.count(s) for s in b.spins[:b.spins.index(spin)]) % 2
    fixed = {k: before for k, orig in enumerate(record.original_positions()) if orig in modes}
    return project_fixed_qubits(h, fixed, record)


def signature_fix(h_el: PauliSum, h_target: PauliSum) -> tuple[PauliSum, int]:
    """Find a product of single-qubit Z conjugations aligning signs of shared off-diagonal words.

    Returns the conjugated ``h_el`` and the Z mask.  Conjugation by ``Z_s``
    flips every word with an odd number of X/Y letters on ``s``, so the
    spectrum is unchanged.
    """
    if h_el.n_qubits != h_target.n_qubits:
        raise ValueError("operands differ in qubit count")
    tgt = h_target.terms
    shared = [((x, z), c, tgt[(x, z)]) for (x, z), c in h_el if x and (x, z) in tgt]
    if not shared:
        raise NoSignatureMatch("no shared off-diagonal Pauli words")
    n = h_el.n_qubits
    for s in sorted(range(1 << n), key=lambda v: (_popcount(v), v)):
        ok = True
        for (x, _), c, t in shared:
            flip = -1 if _popcount(x & s) % 2 else 1
            if np.sign((flip * c).real) != np.sign(t.real):
                ok = False
                break
        if ok:
            out = PauliSum([((x, z), (-c if _popcount(x & s) % 2 else c)) for (x, z), c in h_el],
                           n, h_el.labels)
            return out, s
    raise NoSignatureMatch("no Z-type conjugation reproduces the target sign pattern")
