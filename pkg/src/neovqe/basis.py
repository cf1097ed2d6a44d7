"""Particle species, molecular frames and s-type Gaussian basis sets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

BOHR_ANGSTROM = 0.52917721067  # Angstrom per Bohr
PROTON_MASS = 1874.0  # electron masses, as used for the quantum protons

ELEMENT_CHARGES = {"H": 1, "He": 2, "Li": 3, "Be": 4, "B": 5, "C": 6, "N": 7, "O": 8, "F": 9, "Ne": 10}


class UnsupportedAngularMomentum(ValueError):
    """Native integrals cover s shells only; import integrals for anything else."""


class BasisNotAvailable(LookupError):
    pass


@dataclass(frozen=True)
class ParticleSpecies:
    kind: str  # "electron" | "proton"
    mass: float
    charge: float
    n_alpha: int
    n_beta: int

    def __post_init__(self):
        if self.kind not in ("electron", "proton"):
            raise ValueError(f"unknown species kind {self.kind!r}")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if not self.n_alpha >= self.n_beta >= 0:
            raise ValueError("need n_alpha >= n_beta >= 0")

    @property
    def key(self) -> str:
        return "e" if self.kind == "electron" else "p"

    @property
    def n_particles(self) -> int:
        return self.n_alpha + self.n_beta

    @classmethod
    def electrons(cls, n: int, multiplicity: int = 1) -> "ParticleSpecies":
        n_open = multiplicity - 1
        if (n - n_open) % 2 or n_open > n:
            raise ValueError(f"{n} electrons cannot have multiplicity {multiplicity}")
        nb = (n - n_open) // 2
        return cls("electron", 1.0, -1.0, nb + n_open, nb)

    @classmethod
    def protons(cls, n_alpha: int, n_beta: int = 0) -> "ParticleSpecies":
        return cls("proton", PROTON_MASS, 1.0, n_alpha, n_beta)


@dataclass(frozen=True)
class MolecularFrame:
    """Classical point-charge nuclei plus centres hosting quantum-particle basis functions.

    Positions are in Bohr.  ``quantum_centers`` items are ``(position, element)``:
    the element selects the electronic basis placed there and the centre also
    carries the nuclear basis.
    """

    classical_nuclei: tuple[tuple[tuple[float, float, float], float], ...] = ()
    quantum_centers: tuple[tuple[tuple[float, float, float], str], ...] = ()
    classical_elements: tuple[str, ...] = ()

    def __post_init__(self):
        pos = [np.asarray(p, float) for p, _ in self.classical_nuclei]
        for i in range(len(pos)):
            for j in range(i):
                if np.linalg.norm(pos[i] - pos[j]) < 1e-8:
                    raise ValueError(f"classical nuclei {j} and {i} coincide")

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[str, Sequence[float], bool]], unit: str = "angstrom"):
        """``atoms`` items are ``(element, xyz, quantum)``."""
        scale = 1.0 / BOHR_ANGSTROM if unit.lower().startswith("ang") else 1.0
        cl, qc, els = [], [], []
        for el, xyz, quantum in atoms:
            el = el.capitalize()
            p = tuple(float(v) * scale for v in xyz)
            if quantum:
                if el != "H":
                    raise ValueError("only hydrogen nuclei can be treated as quantum protons")
                qc.append((p, el))
            else:
                cl.append((p, float(ELEMENT_CHARGES[el])))
                els.append(el)
        return cls(tuple(cl), tuple(qc), tuple(els))

    def nuclear_repulsion(self) -> float:
        e = 0.0
        for i, (ri, zi) in enumerate(self.classical_nuclei):
            for rj, zj in self.classical_nuclei[:i]:
                e += zi * zj / np.linalg.norm(np.subtract(ri, rj))
        return e

    def translated(self, shift) -> "MolecularFrame":
        s = np.asarray(shift, float)
        return MolecularFrame(
            tuple((tuple(np.add(p, s)), z) for p, z in self.classical_nuclei),
            tuple((tuple(np.add(p, s)), el) for p, el in self.quantum_centers),
            self.classical_elements,
        )

    def electron_count(self, charge: int = 0, n_quantum_protons: int | None = None) -> int:
        nq = len(self.quantum_centers) if n_quantum_protons is None else n_quantum_protons
        return int(round(sum(z for _, z in self.classical_nuclei))) + nq - charge


@dataclass(frozen=True)
class GaussianShell:
    center: tuple[float, float, float]
    exponents: tuple[float, ...]
    coefficients: tuple[float, ...]
    angular_momentum: int = 0

    def __post_init__(self):
        if len(self.exponents) != len(self.coefficients):
            raise ValueError("exponents and coefficients differ in length")
        if any(a <= 0 for a in self.exponents):
            raise ValueError("Gaussian exponents must be positive")

    def require_s(self) -> None:
        if self.angular_momentum != 0:
            raise UnsupportedAngularMomentum(
                f"shell with l={self.angular_momentum}: native integrals are s-only; "
                "supply integrals through the extended FCIDUMP importer instead")

    def normalized_coefficients(self) -> np.ndarray:
        """Contraction weights that make the contracted s function unit-normalized."""
        a = np.asarray(self.exponents)
        d = np.asarray(self.coefficients) * (2 * a / np.pi) ** 0.75
        pa = a[:, None] + a[None, :]
        norm = d @ ((np.pi / pa) ** 1.5) @ d
        return d / np.sqrt(norm)

    def translated(self, shift) -> "GaussianShell":
        return GaussianShell(tuple(np.add(self.center, shift)), self.exponents, self.coefficients,
                             self.angular_momentum)


# -- basis-set data files -----------------------------------------------------

def _data_path(name: str) -> Path:
    return Path(str(resources.files("neovqe") / "data" / "basis" / name))


def load_basis(name_or_path: str | Path) -> dict[str, list[dict]]:
    """Load a JSON basis file: ``{element: [{"l": 0, "exponents": [...], "coefficients": [...]}]}``."""
    p = Path(name_or_path)
    if not p.exists():
        p = _data_path(f"{str(name_or_path).lower()}.json")
    if not p.exists():
        raise BasisNotAvailable(f"basis {name_or_path!r} not found")
    with open(p) as fh:
        data = json.load(fh)
    shells = {k: v for k, v in data.items() if not k.startswith("_")}
    for el, lst in shells.items():
        for sh in lst:
            if sh.get("exponents") is None or any(e is None for e in sh["exponents"]):
                raise BasisNotAvailable(
                    f"basis file {p} has no exponents for {el}; "
                    + data.get("_note", "fill in the published values"))
    return shells


def place_shells(basis: dict[str, list[dict]], element: str, center) -> list[GaussianShell]:
    try:
        entries = basis[element]
    except KeyError:
        raise BasisNotAvailable(f"no {element} entry in basis") from None
    return [GaussianShell(tuple(map(float, center)), tuple(sh["exponents"]),
                          tuple(sh["coefficients"]), int(sh.get("l", 0))) for sh in entries]


def electronic_basis(frame: MolecularFrame, basis) -> list[GaussianShell]:
    """Electronic functions on every classical nucleus and quantum centre."""
    if not isinstance(basis, dict):
        basis = load_basis(basis)
    shells = []
    for (pos, _), el in zip(frame.classical_nuclei, frame.classical_elements):
        shells += place_shells(basis, el, pos)
    for pos, el in frame.quantum_centers:
        shells += place_shells(basis, el, pos)
    return shells


def nuclear_basis(frame: MolecularFrame, basis) -> list[GaussianShell]:
    if not isinstance(basis, dict):
        basis = load_basis(basis)
    shells = []
    for pos, el in frame.quantum_centers:
        shells += place_shells(basis, el, pos)
    return shells
