"""Restricted electronic HF, coupled NEO-HF and MO/active-space transformation."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .integrals import IntegralSet

log = logging.getLogger(__name__)

MAX_ITER = 200
DAMPING = 0.3
DAMPED_ITERS = 5
DIIS_SPACE = 8
OCCUPATION_ROUNDS = 5  # restarts from a lower-energy occupation before giving up
OCCUPATION_WINDOW = 4  # virtual orbitals considered per species when the full search is too large
MAX_OCCUPATIONS = 500
OCCUPATION_TOL = 1e-8


@dataclass(frozen=True)
class SCFResult:
    coefficients: dict[str, np.ndarray]
    orbital_energies: dict[str, np.ndarray]
    total_energy: float
    converged: bool
    iterations: int
    n_particles: dict[str, tuple[int, int]]
    history: tuple[float, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    def density(self, key: str) -> np.ndarray:
        """Total (alpha + beta) AO density of a species in the aufbau occupation."""
        C = self.coefficients[key]
        na, nb = self.n_particles[key]
        return C[:, :na] @ C[:, :na].T + C[:, :nb] @ C[:, :nb].T

    def to_dict(self) -> dict:
        return {
            "total_energy": self.total_energy,
            "converged": self.converged,
            "iterations": self.iterations,
            "coefficients": {k: v.tolist() for k, v in self.coefficients.items()},
            "orbital_energies": {k: v.tolist() for k, v in self.orbital_energies.items()},
            "n_particles": {k: list(v) for k, v in self.n_particles.items()},
        }

    @classmethod
    def from_dict(cls, d) -> "SCFResult":
        return cls({k: np.array(v) for k, v in d["coefficients"].items()},
                   {k: np.array(v) for k, v in d["orbital_energies"].items()},
                   d["total_energy"], d["converged"], d["iterations"],
                   {k: tuple(v) for k, v in d["n_particles"].items()})


@dataclass(frozen=True)
class ActiveSpaceSpec:
    """Per species: number of frozen (lowest, doubly occupied) orbitals and active indices."""

    frozen: dict[str, int] = field(default_factory=dict)
    active: dict[str, tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def full(cls, integrals: IntegralSet) -> "ActiveSpaceSpec":
        return cls({}, {k: tuple(range(integrals.norb(k))) for k in integrals.species})


class _DIIS:
    def __init__(self, size=DIIS_SPACE):
        self.size = size
        self.focks, self.errors = [], []

    def extrapolate(self, F, err):
        self.focks.append(F)
        self.errors.append(err)
        if len(self.focks) > self.size:
            self.focks.pop(0)
            self.errors.pop(0)
        n = len(self.focks)
        if n < 2:
            return F
        B = -np.ones((n + 1, n + 1))
        B[n, n] = 0.0
        for i in range(n):
            for j in range(n):
                B[i, j] = np.vdot(self.errors[i], self.errors[j])
        rhs = np.zeros(n + 1)
        rhs[n] = -1.0
        try:
            c = np.linalg.solve(B, rhs)[:n]
        except np.linalg.LinAlgError:
            return F
        return sum(ci * Fi for ci, Fi in zip(c, self.focks))


def _coulomb(eri, D):
    return np.einsum("pqrs,rs->pq", eri, D)


def _exchange(eri, D):
    return np.einsum("prqs,rs->pq", eri, D)


def _cross_coulomb(eri_ep, D, target: str):
    """Mean-field Coulomb potential on ``target`` from the other species' density."""
    if target == "e":
        return np.einsum("pqRS,RS->pq", eri_ep, D)
    return np.einsum("pqRS,pq->RS", eri_ep, D)


class _Species:
    """SCF bookkeeping for one species (closed-shell electrons or high-spin protons)."""

    def __init__(self, key, ints: IntegralSet):
        self.key = key
        self.S, self.h = ints.s[key], ints.h[key]
        self.eri = ints.eri[(key, key)]
        self.q = ints.charges[key]
        self.na, self.nb = ints.n_particles[key]
        self.X = _orthogonalizer(self.S)
        self.diis = _DIIS()
        self.D = None  # total density
        self.C = None
        self.eps = None

    @property
    def closed_shell(self):
        return self.na == self.nb

    def two_body(self, D):
        J = _coulomb(self.eri, D)
        if self.closed_shell:
            G = J - 0.5 * _exchange(self.eri, D)
        else:  # all particles alpha
            G = J - _exchange(self.eri, D)
        return self.q * self.q * G

    def solve(self, F):
        Fp = self.X.T @ F @ self.X
        eps, Cp = np.linalg.eigh(Fp)
        C = self.X @ Cp
        return eps, C

    def density_from(self, C):
        occ = C[:, :self.na]
        D = occ @ occ.T
        if self.closed_shell:
            D = 2.0 * D
        return D

    def energy(self, D, F_ext):
        """Energy of this species excluding interspecies terms (one-body + own two-body)."""
        G = self.two_body(D)
        return float(np.sum(D * (self.h + 0.5 * G)))


def _orthogonalizer(S):
    w, v = np.linalg.eigh(S)
    if w[0] < 1e-10:
        raise ValueError("overlap matrix is singular")
    return v @ np.diag(w ** -0.5) @ v.T


def electronic_rhf(integrals: IntegralSet, n_electrons: int | None = None,
                   threshold: float = 1e-10, max_iter: int = MAX_ITER) -> SCFResult:
    """Closed-shell RHF for the electrons alone (protons, if any, ignored)."""
    if n_electrons is None:
        n_electrons = sum(integrals.n_particles["e"])
    if n_electrons % 2:
        raise ValueError(f"RHF requires an even electron count, got {n_electrons}")
    sub = IntegralSet({"e": integrals.s["e"]}, {"e": integrals.h["e"]},
                      {("e", "e"): integrals.eri[("e", "e")]}, integrals.e_core,
                      {"e": (n_electrons // 2, n_electrons // 2)}, dict(integrals.charges))
    return neo_hf(sub, threshold=threshold, max_iter=max_iter)


def neo_hf(integrals: IntegralSet, threshold: float = 1e-10, max_iter: int = MAX_ITER,
           guess: dict[str, np.ndarray] | None = None, occupation_search: bool = True) -> SCFResult:
    """Coupled SCF for electrons (closed shell) and high-spin protons.

    Each macro-iteration updates electrons first, then protons, using the
    latest density of the other species in the interspecies Coulomb term.
    Converged when the total-energy change is below ``threshold`` and the
    orbital gradients (FDS - SDF) are below ``sqrt(threshold)``.

    Aufbau filling can settle on a stationary point that is not the lowest
    one: without classical nuclei the proton core guess is pure kinetic
    energy and favours diffuse functions, and the virtual orbital energies
    carry the full repulsion of the occupied protons.  With
    ``occupation_search`` every occupation of the converged canonical
    orbitals is scored with the other species held fixed, and the SCF is
    restarted from any that lies lower; the lowest converged solution wins.
    """
    res = _coupled_scf(integrals, threshold, max_iter, guess)
    if not occupation_search:
        return res
    iterations, restarts = res.iterations, 0
    for _ in range(OCCUPATION_ROUNDS):
        better = _lower_occupation(integrals, res)
        if better is None:
            break
        trial = _coupled_scf(integrals, threshold, max_iter, better)
        iterations += trial.iterations
        if trial.total_energy >= res.total_energy - OCCUPATION_TOL:
            break
        res, restarts = trial, restarts + 1
    if restarts:
        log.info("SCF restarted %d time(s) from a lower occupation", restarts)
    return replace(res, iterations=iterations, diagnostics={**res.diagnostics, "occupation_restarts": restarts})


def _occupations(n: int, k: int):
    if math.comb(n, k) <= MAX_OCCUPATIONS:
        return itertools.combinations(range(n), k)
    return itertools.combinations(range(min(n, k + OCCUPATION_WINDOW)), k)


def _lower_occupation(integrals: IntegralSet, res: SCFResult) -> dict[str, np.ndarray] | None:
    """Orbitals reordered so that the lowest-energy occupation comes first, or None if aufbau is lowest."""
    sp = {k: _Species(k, integrals) for k in integrals.species}
    D = {k: sp[k].density_from(res.coefficients[k]) for k in sp}
    eri_ep = integrals.eri.get(("e", "p"))
    qep = integrals.charges.get("e", -1.0) * integrals.charges.get("p", 1.0)

    def energy(dens):
        e = integrals.e_core + sum(sp[k].energy(dens[k], None) for k in sp)
        if eri_ep is not None:
            e += qep * float(np.einsum("pq,pqRS,RS->", dens["e"], eri_ep, dens["p"]))
        return e

    best, best_e = None, energy(D) - OCCUPATION_TOL
    for k, s in sp.items():
        C = res.coefficients[k]
        n = C.shape[1]
        if not 0 < s.na < n:
            continue
        for occ in _occupations(n, s.na):
            if occ == tuple(range(s.na)):
                continue
            order = list(occ) + [i for i in range(n) if i not in occ]
            e = energy({**D, k: s.density_from(C[:, order])})
            if e < best_e:
                best, best_e = (k, order), e
    if best is None:
        return None
    k, order = best
    return {**res.coefficients, k: res.coefficients[k][:, order]}


def _coupled_scf(integrals: IntegralSet, threshold: float, max_iter: int,
                 guess: dict[str, np.ndarray] | None) -> SCFResult:
    keys = integrals.species
    sp = {k: _Species(k, integrals) for k in keys}
    for k, s in sp.items():
        if k == "e" and not s.closed_shell:
            raise ValueError("electrons must be closed shell")
        if k == "p" and s.nb != 0:
            raise ValueError("protons must be high-spin (all alpha)")
        if s.na > s.h.shape[0]:
            raise ValueError(f"{k}: more particles than orbitals")
    eri_ep = integrals.eri.get(("e", "p"))
    qep = integrals.charges.get("e", -1.0) * integrals.charges.get("p", 1.0)

    for k, s in sp.items():
        if guess and k in guess:
            s.C = guess[k]
        else:
            s.eps, s.C = s.solve(s.h)
        s.D = s.density_from(s.C)

    def fock(k):
        s = sp[k]
        F = s.h + s.two_body(s.D)
        if eri_ep is not None:
            other = "p" if k == "e" else "e"
            F = F + qep * _cross_coulomb(eri_ep, sp[other].D, k)
        return F

    def total_energy():
        e = integrals.e_core + sum(s.energy(s.D, None) for s in sp.values())
        if eri_ep is not None:
            e += qep * float(np.einsum("pq,pqRS,RS->", sp["e"].D, eri_ep, sp["p"].D))
        return e

    history = []
    e_old = total_energy()
    converged = False
    it = 0
    grad = {}
    for it in range(1, max_iter + 1):
        for k in keys:
            s = sp[k]
            F = fock(k)
            err = F @ s.D @ s.S - s.S @ s.D @ F
            grad[k] = float(np.max(np.abs(err))) if s.na else 0.0
            F_use = s.diis.extrapolate(F, s.X.T @ err @ s.X) if it > DAMPED_ITERS else F
            s.eps, s.C = s.solve(F_use)
            D_new = s.density_from(s.C)
            if it <= DAMPED_ITERS:
                D_new = (1 - DAMPING) * D_new + DAMPING * s.D
            s.D = D_new
        e_new = total_energy()
        history.append(e_new)
        if abs(e_new - e_old) < threshold and max(grad.values(), default=0.0) < np.sqrt(threshold):
            converged = True
            e_old = e_new
            break
        e_old = e_new

    # canonical orbitals from the final densities
    for k in keys:
        s = sp[k]
        s.eps, s.C = s.solve(fock(k))
        s.D = s.density_from(s.C)
    e_final = total_energy()
    diagnostics = {"orbital_gradient": grad}
    if not converged:
        tail = np.diff(history[-10:]) if len(history) > 10 else np.array([])
        diagnostics["oscillating"] = bool(tail.size and np.any(tail > 0) and np.any(tail < 0))
        log.warning("SCF not converged after %d iterations (last energy %.10f)", it, e_final)
    return SCFResult(
        coefficients={k: sp[k].C for k in keys},
        orbital_energies={k: sp[k].eps for k in keys},
        total_energy=e_final, converged=converged, iterations=it,
        n_particles={k: (sp[k].na, sp[k].nb) for k in keys},
        history=tuple(history), diagnostics=diagnostics,
    )


def _transform_eri(g, C1, C2):
    g = np.einsum("pqrs,pi->iqrs", g, C1, optimize=True)
    g = np.einsum("iqrs,qj->ijrs", g, C1, optimize=True)
    g = np.einsum("ijrs,rk->ijks", g, C2, optimize=True)
    g = np.einsum("ijks,sl->ijkl", g, C2, optimize=True)
    # remove round-off asymmetry so that unique elements describe the tensor exactly
    g = 0.5 * (g + g.transpose(1, 0, 2, 3))
    g = 0.5 * (g + g.transpose(0, 1, 3, 2))
    if C1 is C2:
        g = 0.5 * (g + g.transpose(2, 3, 0, 1))
    return g


def _sym(m):
    return 0.5 * (m + m.T)


def mo_transform(integrals: IntegralSet, scf: SCFResult,
                 spec: ActiveSpaceSpec | None = None) -> IntegralSet:
    """Integrals in the active MO basis with frozen electrons folded in.

    Frozen orbitals are the lowest ``spec.frozen["e"]`` electronic MOs, doubly
    occupied.  Their mean field enters the active one-body terms of every
    species and their energy enters ``e_core``; then the active-space FCI
    energy plus ``e_core`` is the CASCI energy.
    """
    if spec is None:
        spec = ActiveSpaceSpec.full(integrals)
    if not scf.converged:
        log.warning("transforming with non-converged SCF orbitals")
    keys = integrals.species
    for k, nf in spec.frozen.items():
        if k != "e" and nf:
            raise ValueError("only electronic orbitals can be frozen")
    C_act, C_frz = {}, {}
    for k in keys:
        C = scf.coefficients[k]
        nf = spec.frozen.get(k, 0)
        act = spec.active.get(k, tuple(range(nf, C.shape[1])))
        if not act:
            raise ValueError(f"empty active space for {k}")
        bad = [i for i in act if not 0 <= i < C.shape[1]]
        if bad:
            raise IndexError(f"{k}: active orbitals {bad} out of range (n_mo={C.shape[1]})")
        if set(act) & set(range(nf)):
            raise ValueError(f"{k}: frozen and active orbitals overlap")
        C_act[k] = C[:, list(act)]
        C_frz[k] = C[:, :nf]

    e_core = integrals.e_core
    qep = integrals.charges.get("e", -1.0) * integrals.charges.get("p", 1.0)
    h_eff = {k: integrals.h[k].copy() for k in keys}
    if "e" in keys and C_frz["e"].shape[1]:
        Df = 2.0 * C_frz["e"] @ C_frz["e"].T
        g = integrals.eri[("e", "e")]
        G = _coulomb(g, Df) - 0.5 * _exchange(g, Df)
        e_core += float(np.sum(Df * (integrals.h["e"] + 0.5 * G)))
        h_eff["e"] = h_eff["e"] + G
        if "p" in keys:
            h_eff["p"] = h_eff["p"] + qep * _cross_coulomb(integrals.eri[("e", "p")], Df, "p")

    n_particles = dict(integrals.n_particles)
    if "e" in keys:
        nf = C_frz["e"].shape[1]
        na, nb = n_particles["e"]
        if na < nf or nb < nf:
            raise ValueError("more frozen orbitals than electron pairs")
        n_particles["e"] = (na - nf, nb - nf)

    s, h, eri = {}, {}, {}
    for k in keys:
        C = C_act[k]
        s[k] = _sym(C.T @ integrals.s[k] @ C)
        h[k] = _sym(C.T @ h_eff[k] @ C)
        eri[(k, k)] = _transform_eri(integrals.eri[(k, k)], C, C)
    if ("e", "p") in integrals.eri and "e" in keys and "p" in keys:
        eri[("e", "p")] = _transform_eri(integrals.eri[("e", "p")], C_act["e"], C_act["p"])
    return IntegralSet(s, h, eri, e_core, n_particles, dict(integrals.charges), dict(integrals.masses))
