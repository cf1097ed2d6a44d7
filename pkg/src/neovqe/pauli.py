"""Sparse Pauli sums in the symplectic (x|z) bit representation.

A Pauli word on ``n`` qubits is stored as a pair of integer bit masks
``(x, z)``.  Bit ``q`` of each mask refers to qubit ``q``; the letter on a
qubit is ``I`` (0,0), ``X`` (1,0), ``Z`` (0,1) or ``Y`` (1,1), where ``Y``
is the proper Pauli-Y (no hidden phase).  Printed words are written with the
highest qubit first, so qubit 0 is the rightmost letter.  Matrices are
assembled little-endian: basis index bit ``q`` is the state of qubit ``q``.
"""

from __future__ import annotations

import numbers
from typing import Iterable, Iterator, Mapping

import numpy as np
import scipy.sparse as sp

CUTOFF = 1e-12
MAX_DENSE_QUBITS = 14

_LETTER_TO_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_TO_LETTER = {v: k for k, v in _LETTER_TO_BITS.items()}
_I_POWERS = (1.0 + 0j, 1j, -1.0 + 0j, -1j)


def _popcount(v: int) -> int:
    return bin(v).count("1")


def word_to_masks(word: str) -> tuple[int, int]:
    """Return ``(x, z)`` masks for a printed Pauli word (qubit 0 rightmost)."""
    x = z = 0
    for q, letter in enumerate(reversed(word.strip().upper())):
        try:
            bx, bz = _LETTER_TO_BITS[letter]
        except KeyError:
            raise ValueError(f"invalid Pauli letter {letter!r} in {word!r}") from None
        x |= bx << q
        z |= bz << q
    return x, z


def masks_to_word(x: int, z: int, n_qubits: int) -> str:
    return "".join(
        _BITS_TO_LETTER[((x >> q) & 1, (z >> q) & 1)] for q in reversed(range(n_qubits))
    )


def pauli_product(x1: int, z1: int, x2: int, z2: int) -> tuple[complex, int, int]:
    """Multiply two Pauli words; returns ``(phase, x, z)`` with phase in {±1, ±i}."""
    x, z = x1 ^ x2, z1 ^ z2
    k = _popcount(x1 & z1) + _popcount(x2 & z2) + 2 * _popcount(z1 & x2) - _popcount(x & z)
    return _I_POWERS[k % 4], x, z


def paulis_commute(x1: int, z1: int, x2: int, z2: int) -> bool:
    return (_popcount(x1 & z2) + _popcount(z1 & x2)) % 2 == 0


class PauliSum:
    """Immutable weighted sum of Pauli words.

    ``terms`` maps ``(x, z)`` masks to complex coefficients.  Construction
    merges duplicates and drops coefficients with modulus below ``cutoff``.
    ``labels`` optionally tags every qubit (e.g. ``"e"`` / ``"p"``).
    """

    __slots__ = ("_terms", "n_qubits", "labels", "_sparse")

    def __init__(
        self,
        terms: Mapping[tuple[int, int], complex] | Iterable[tuple[tuple[int, int], complex]] = (),
        n_qubits: int = 0,
        labels: tuple[str, ...] | None = None,
        cutoff: float = CUTOFF,
    ):
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[tuple[int, int], complex] = {}
        limit = 1 << n_qubits
        for key, c in items:
            x, z = key
            if x >= limit or z >= limit or x < 0 or z < 0:
                raise ValueError(f"Pauli masks {key} exceed {n_qubits} qubits")
            merged[(x, z)] = merged.get((x, z), 0.0) + complex(c)
        self._terms = {
            k: v for k, v in sorted(merged.items()) if abs(v) >= cutoff
        }
        self.n_qubits = n_qubits
        if labels is not None and len(labels) != n_qubits:
            raise ValueError("labels must name every qubit")
        self.labels = tuple(labels) if labels is not None else None
        self._sparse = None

    # -- construction ------------------------------------------------------
    @classmethod
    def from_list(cls, pairs: Iterable[tuple[str, complex]], labels=None) -> "PauliSum":
        pairs = list(pairs)
        if not pairs:
            raise ValueError("from_list needs at least one term to infer the qubit count")
        n = len(pairs[0][0].strip())
        terms = []
        for word, c in pairs:
            if len(word.strip()) != n:
                raise ValueError("all Pauli words must have the same length")
            terms.append((word_to_masks(word), c))
        return cls(terms, n, labels)

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0, labels=None) -> "PauliSum":
        return cls({(0, 0): coeff}, n_qubits, labels)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str, coeff: complex = 1.0) -> "PauliSum":
        bx, bz = _LETTER_TO_BITS[letter.upper()]
        return cls({(bx << qubit, bz << qubit): coeff}, n_qubits)

    # -- container protocol ------------------------------------------------
    @property
    def terms(self) -> dict[tuple[int, int], complex]:
        return dict(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[tuple[int, int], complex]]:
        return iter(self._terms.items())

    def coeff(self, word: str) -> complex:
        return self._terms.get(word_to_masks(word), 0.0)

    def words(self) -> list[tuple[str, complex]]:
        return [(masks_to_word(x, z, self.n_qubits), c) for (x, z), c in self._terms.items()]

    def __repr__(self) -> str:
        body = " ".join(f"{c.real:+.6f}*{w}" if abs(c.imag) < CUTOFF else f"({c:.6f})*{w}"
                        for w, c in self.words()[:8])
        more = "" if len(self) <= 8 else f" ... ({len(self)} terms)"
        return f"PauliSum({self.n_qubits}q: {body}{more})"

    # -- algebra -----------------------------------------------------------
    def _check(self, other: "PauliSum") -> None:
        if other.n_qubits != self.n_qubits:
            raise ValueError(f"qubit count mismatch: {self.n_qubits} vs {other.n_qubits}")

    def __add__(self, other):
        if isinstance(other, numbers.Number):
            other = PauliSum.identity(self.n_qubits, other)
        self._check(other)
        return PauliSum(list(self._terms.items()) + list(other._terms.items()),
                        self.n_qubits, self.labels or other.labels)

    __radd__ = __add__

    def __neg__(self):
        return PauliSum({k: -v for k, v in self._terms.items()}, self.n_qubits, self.labels)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return PauliSum({k: v * other for k, v in self._terms.items()}, self.n_qubits, self.labels)
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, numbers.Number):
            return self * other
        return NotImplemented

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self.equals(other, 0.0)

    __hash__ = None

    def equals(self, other: "PauliSum", atol: float = 1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0) - other._terms.get(k, 0)) <= atol for k in keys)

    def adjoint(self) -> "PauliSum":
        return PauliSum({k: np.conj(v) for k, v in self._terms.items()}, self.n_qubits, self.labels)

    def is_hermitian(self, atol: float = 1e-10) -> bool:
        return all(abs(c.imag) <= atol for c in self._terms.values())

    def real(self) -> "PauliSum":
        """Drop imaginary parts (use only on Hermitian sums)."""
        return PauliSum({k: v.real for k, v in self._terms.items()}, self.n_qubits, self.labels)

    def chop(self, cutoff: float) -> "PauliSum":
        return PauliSum(self._terms, self.n_qubits, self.labels, cutoff=cutoff)

    def with_labels(self, labels) -> "PauliSum":
        return PauliSum(self._terms, self.n_qubits, labels)

    def commutes_with(self, x: int, z: int) -> bool:
        return all(paulis_commute(tx, tz, x, z) for tx, tz in self._terms)

    def identity_coeff(self) -> complex:
        return self._terms.get((0, 0), 0.0)

    # -- numerics ----------------------------------------------------------
    def apply(self, state: np.ndarray) -> np.ndarray:
        """Return ``H @ state`` without building a matrix."""
        state = np.asarray(state, dtype=complex)
        out = np.zeros_like(state)
        idx = np.arange(state.shape[0])
        for (x, z), c in self._terms.items():
            out += c * _pauli_phase(idx, x, z) * state[idx ^ x]
        return out

    def to_sparse(self) -> sp.csr_matrix:
        if self._sparse is None:
            dim = 1 << self.n_qubits
            cols = np.arange(dim)
            data, rows, cs = [], [], []
            for (x, z), c in self._terms.items():
                # P|b> = phase(b) |b^x>; row = b^x, col = b
                data.append(c * _pauli_phase(cols, x, z, acting_on_col=True))
                rows.append(cols ^ x)
                cs.append(cols)
            if data:
                m = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cs))),
                                  shape=(dim, dim)).tocsr()
            else:
                m = sp.csr_matrix((dim, dim), dtype=complex)
            m.sum_duplicates()
            self._sparse = m
        return self._sparse

    def to_matrix(self) -> np.ndarray:
        return to_matrix(self)


def _pauli_phase(idx: np.ndarray, x: int, z: int, acting_on_col: bool = False) -> np.ndarray:
    """Phase of ``P|b>`` where ``P = i^{|x&z|} X^x Z^z``.

    With ``acting_on_col`` the phase is indexed by the input basis state ``b``;
    otherwise by the output row ``r`` (input ``b = r ^ x``).
    """
    b = idx if acting_on_col else idx ^ x
    parity = np.bitwise_count(b & z) & 1
    base = _I_POWERS[_popcount(x & z) % 4]
    return base * (1 - 2 * parity.astype(np.int8))


def multiply(a: PauliSum, b: PauliSum) -> PauliSum:
    a._check(b)
    out: dict[tuple[int, int], complex] = {}
    for (x1, z1), c1 in a._terms.items():
        for (x2, z2), c2 in b._terms.items():
            ph, x, z = pauli_product(x1, z1, x2, z2)
            out[(x, z)] = out.get((x, z), 0.0) + ph * c1 * c2
    return PauliSum(out, a.n_qubits, a.labels or b.labels)


def to_matrix(op: PauliSum) -> np.ndarray:
    if op.n_qubits > MAX_DENSE_QUBITS:
        raise ValueError(f"dense matrix limited to {MAX_DENSE_QUBITS} qubits, got {op.n_qubits}")
    return op.to_sparse().toarray()


def commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    return multiply(a, b) - multiply(b, a)


def anticommutator(a: PauliSum, b: PauliSum) -> PauliSum:
    return multiply(a, b) + multiply(b, a)


def remove_qubits(op: PauliSum, positions: Iterable[int]) -> PauliSum:
    """Delete qubits that carry only ``I`` in every term; higher qubits shift down."""
    positions = sorted(set(positions))
    keep = [q for q in range(op.n_qubits) if q not in positions]
    mask = sum(1 << q for q in positions)
    terms = []
    for (x, z), c in op:
        if (x | z) & mask:
            raise ValueError("cannot remove a qubit that carries a non-identity Pauli")
        terms.append(((_compress(x, keep), _compress(z, keep)), c))
    labels = tuple(op.labels[q] for q in keep) if op.labels else None
    return PauliSum(terms, len(keep), labels)


def _compress(mask: int, keep: list[int]) -> int:
    out = 0
    for new, old in enumerate(keep):
        out |= ((mask >> old) & 1) << new
    return out


def expand_mask(mask: int, keep: list[int]) -> int:
    out = 0
    for new, old in enumerate(keep):
        out |= ((mask >> new) & 1) << old
    return out


# -- text serialization ------------------------------------------------------

def dumps(op: PauliSum) -> str:
    """One term per line; optional ``# qubits:`` and ``# labels:`` (qubit 0 first) header comments."""
    lines = [f"# qubits: {op.n_qubits}"]
    if op.labels:
        lines.append("# labels: " + " ".join(op.labels))
    for word, c in op.words():
        lines.append(f"{c.real:.17g} {c.imag:.17g} {word}")
    return "\n".join(lines) + "\n"


def loads(text: str, labels=None) -> PauliSum:
    pairs = []
    n_qubits = None
    for lineno, line in enumerate(text.splitlines(), 1):
        head = line.strip()
        if head.startswith("# qubits:"):
            n_qubits = int(head.split(":", 1)[1])
        elif head.startswith("# labels:") and labels is None:
            labels = tuple(head.split(":", 1)[1].split())
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected '<re> <im> <word>', got {line!r}")
        try:
            c = complex(float(parts[0]), float(parts[1]))
        except ValueError:
            raise ValueError(f"line {lineno}: bad coefficient in {line!r}") from None
        pairs.append((parts[2], c))
    if not pairs and n_qubits is not None:
        return PauliSum({}, n_qubits, labels)
    op = PauliSum.from_list(pairs, labels)
    if n_qubits is not None and op.n_qubits != n_qubits:
        raise ValueError(f"header declares {n_qubits} qubits, terms have {op.n_qubits}")
    return op


def save(op: PauliSum, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(op))


def load(path, labels=None) -> PauliSum:
    with open(path) as fh:
        return loads(fh.read(), labels)
