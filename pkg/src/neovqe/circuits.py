"""Circuit representation and hardware-efficient TwoLocal builders."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .pauli import _popcount, masks_to_word, word_to_masks

GATES = ("ry", "rz", "cz", "x", "pauli")
PARAMETRIC = ("ry", "rz", "pauli")


@dataclass(frozen=True)
class Gate:
    """One gate.  Rotations implement ``exp(-i * prefactor * theta / 2 * P)``."""

    name: str
    qubits: tuple[int, ...]
    param: str | None = None
    prefactor: float = 1.0
    pauli: tuple[int, int] | None = None  # (x, z) masks for "pauli" rotations

    def __post_init__(self):
        if self.name not in GATES:
            raise ValueError(f"unknown gate {self.name!r}")
        if (self.name in PARAMETRIC) != (self.param is not None):
            raise ValueError(f"gate {self.name} parameter mismatch")
        if self.name == "pauli" and self.pauli is None:
            raise ValueError("pauli rotation needs its Pauli masks")
        if self.name == "cz" and len(set(self.qubits)) != 2:
            raise ValueError("cz acts on two distinct qubits")

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) >= 2

    def to_dict(self, n_qubits: int) -> dict:
        d = {"gate": self.name, "qubits": list(self.qubits)}
        if self.param is not None:
            d["param"] = self.param
            d["prefactor"] = self.prefactor
        if self.pauli is not None:
            d["pauli"] = masks_to_word(*self.pauli, n_qubits)
        return d

    @classmethod
    def from_dict(cls, d) -> "Gate":
        pauli = word_to_masks(d["pauli"]) if "pauli" in d else None
        return cls(d["gate"], tuple(d["qubits"]), d.get("param"), d.get("prefactor", 1.0), pauli)


def pauli_rotation(x: int, z: int, param: str, prefactor: float) -> Gate:
    support = x | z
    qubits = tuple(q for q in range(support.bit_length()) if (support >> q) & 1)
    return Gate("pauli", qubits, param, prefactor, (x, z))


@dataclass
class Circuit:
    """Ordered gate list with named parameters and an electronic/nuclear qubit partition."""

    n_qubits: int
    electronic: tuple[int, ...] = ()
    nuclear: tuple[int, ...] = ()
    gates: list[Gate] = field(default_factory=list)
    parameters: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.electronic and not self.nuclear:
            self.electronic = tuple(range(self.n_qubits))
        part = set(self.electronic) | set(self.nuclear)
        if part != set(range(self.n_qubits)) or set(self.electronic) & set(self.nuclear):
            raise ValueError("partition must cover every qubit exactly once")

    def add(self, gate: Gate) -> "Circuit":
        if any(not 0 <= q < self.n_qubits for q in gate.qubits):
            raise IndexError(f"gate {gate.name} on {gate.qubits} outside {self.n_qubits} qubits")
        if gate.param is not None and gate.param not in self._index:
            self.parameters.append(gate.param)
            self._index_cache = None
        self.gates.append(gate)
        return self

    @property
    def _index(self) -> dict[str, int]:
        key = tuple(self.parameters)
        cache = getattr(self, "_index_cache", None)
        if cache is None or cache[0] != key:
            cache = (key, {p: i for i, p in enumerate(key)})
            self._index_cache = cache
        return cache[1]

    def parameter_index(self, name: str) -> int:
        return self._index[name]

    @property
    def n_parameters(self) -> int:
        return len(self.parameters)

    def bind(self, values) -> np.ndarray:
        """Parameter vector from an array or a name -> value mapping (all names required)."""
        if isinstance(values, dict):
            missing = [p for p in self.parameters if p not in values]
            if missing:
                raise KeyError(f"unbound parameters: {missing[:5]}{'...' if len(missing) > 5 else ''}")
            return np.array([values[p] for p in self.parameters], dtype=float)
        v = np.asarray(values, dtype=float).ravel()
        if v.shape[0] != self.n_parameters:
            raise ValueError(f"expected {self.n_parameters} parameters, got {v.shape[0]}")
        return v

    def two_qubit_count(self) -> int:
        """CZ gates plus the CX-ladder cost 2(w-1) of each weight-w Pauli rotation."""
        n = 0
        for g in self.gates:
            if g.name == "cz":
                n += 1
            elif g.name == "pauli":
                w = _popcount(g.pauli[0] | g.pauli[1])
                n += 2 * (w - 1) if w >= 2 else 0
        return n

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "electronic": list(self.electronic),
                "nuclear": list(self.nuclear), "parameters": list(self.parameters),
                "gates": [g.to_dict(self.n_qubits) for g in self.gates]}

    @classmethod
    def from_dict(cls, d) -> "Circuit":
        c = cls(d["n_qubits"], tuple(d["electronic"]), tuple(d["nuclear"]))
        for g in d["gates"]:
            c.add(Gate.from_dict(g))
        if list(d.get("parameters", c.parameters)) != c.parameters:
            c.parameters = list(d["parameters"])
        return c

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


# -- TwoLocal -------------------------------------------------------------------

def _role(circ: Circuit, q: int) -> str:
    if q in circ.electronic:
        return f"e{circ.electronic.index(q)}"
    return f"n{circ.nuclear.index(q)}"


def _rotation_layer(circ: Circuit, qubits, layer: str) -> None:
    for q in qubits:
        r = _role(circ, q)
        circ.add(Gate("ry", (q,), f"ry[{r},{layer}]"))
        circ.add(Gate("rz", (q,), f"rz[{r},{layer}]"))


def build_twolocal(electronic: tuple[int, ...], nuclear: tuple[int, ...] = (), variant: str = "expanded",
                   d: int = 1, electronic_layers: int | None = None) -> Circuit:
    """Ry/Rz rotation layers interleaved with CZ entanglers.

    ``expanded``: an initial rotation layer, then ``d`` times [all-to-all CZ,
    rotation layer]; ``2 n (d + 1)`` parameters.  ``stacked``: an expanded
    sub-circuit with ``electronic_layers`` layers on the electronic qubits,
    initial rotations on the nuclear qubits, then ``d`` times [CZ between
    every electronic-nuclear pair, rotation layer on all qubits].

    Parameter names encode register role, local qubit index and layer, e.g.
    ``ry[e0,L1]`` or ``rz[n2,S3]``, so electronic solutions transfer by name.
    """
    if d < 1:
        raise ValueError("TwoLocal needs d >= 1 layers")
    n = len(electronic) + len(nuclear)
    circ = Circuit(n, tuple(electronic), tuple(nuclear))
    if variant == "expanded":
        qubits = sorted(electronic + nuclear)
        _rotation_layer(circ, qubits, "L0")
        for layer in range(1, d + 1):
            for a, b in itertools.combinations(qubits, 2):
                circ.add(Gate("cz", (a, b)))
            _rotation_layer(circ, qubits, f"L{layer}")
    elif variant == "stacked":
        de = d if electronic_layers is None else electronic_layers
        if de < 1:
            raise ValueError("electronic sub-circuit needs >= 1 layer")
        el = sorted(electronic)
        _rotation_layer(circ, el, "L0")
        for layer in range(1, de + 1):
            for a, b in itertools.combinations(el, 2):
                circ.add(Gate("cz", (a, b)))
            _rotation_layer(circ, el, f"L{layer}")
        _rotation_layer(circ, sorted(nuclear), "L0")
        for layer in range(1, d + 1):
            for a in el:
                for b in sorted(nuclear):
                    circ.add(Gate("cz", (a, b)))
            _rotation_layer(circ, sorted(electronic + nuclear), f"S{layer}")
    else:
        raise ValueError(f"unknown TwoLocal variant {variant!r}")
    return circ


def twolocal_cz_count(n_e: int, n_n: int, variant: str, d: int, electronic_layers: int | None = None) -> int:
    """Closed-form CZ count of :func:`build_twolocal` (used to audit the builder)."""
    n = n_e + n_n
    if variant == "expanded":
        return d * n * (n - 1) // 2
    de = d if electronic_layers is None else electronic_layers
    return de * n_e * (n_e - 1) // 2 + d * n_e * n_n
