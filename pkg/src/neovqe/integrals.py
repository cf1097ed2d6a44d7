"""Closed-form integrals over contracted s-type Gaussians and the NEO integral set."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .basis import GaussianShell, MolecularFrame, ParticleSpecies


class IllConditionedBasis(ValueError):
    pass


def boys0(x):
    """F0(x) = 1/2 sqrt(pi/x) erf(sqrt(x)), with a series below x = 1e-6."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-6
    xs = np.where(small, 1.0, x)
    big = 0.5 * np.sqrt(np.pi / xs) * erf(np.sqrt(xs))
    series = 1.0 - x / 3.0 + x * x / 10.0
    return np.where(small, series, big)


def _pair(a: GaussianShell, b: GaussianShell):
    """Gaussian product data for every primitive pair of two shells."""
    a.require_s()
    b.require_s()
    ea, eb = np.asarray(a.exponents), np.asarray(b.exponents)
    da, db = a.normalized_coefficients(), b.normalized_coefficients()
    A, B = np.asarray(a.center), np.asarray(b.center)
    p = ea[:, None] + eb[None, :]
    mu = ea[:, None] * eb[None, :] / p
    r2 = float(np.sum((A - B) ** 2))
    P = (ea[:, None, None] * A + eb[None, :, None] * B) / p[..., None]
    dd = da[:, None] * db[None, :]
    return p, mu, r2, P, dd


def one_body_integrals(shell_a: GaussianShell, shell_b: GaussianShell, frame: MolecularFrame,
                       species: ParticleSpecies) -> tuple[float, float, float]:
    """Overlap, kinetic energy (with 1/mass) and classical point-charge potential."""
    p, mu, r2, P, dd = _pair(shell_a, shell_b)
    s_prim = (np.pi / p) ** 1.5 * np.exp(-mu * r2)
    overlap = float(np.sum(dd * s_prim))
    kinetic = float(np.sum(dd * mu * (3.0 - 2.0 * mu * r2) * s_prim)) / species.mass
    potential = 0.0
    for C, Z in frame.classical_nuclei:
        pc2 = np.sum((P - np.asarray(C)) ** 2, axis=-1)
        v = 2.0 * np.pi / p * np.exp(-mu * r2) * boys0(p * pc2)
        potential += species.charge * Z * float(np.sum(dd * v))
    return overlap, kinetic, potential


def two_body_coulomb(a: GaussianShell, b: GaussianShell, c: GaussianShell, d: GaussianShell,
                     sign: float = 1.0) -> float:
    """Chemists' ``(ab|cd)`` Coulomb integral times ``sign`` (charge product)."""
    p, mu1, r1, P, d1 = _pair(a, b)
    q, mu2, r2, Q, d2 = _pair(c, d)
    p_ = p[:, :, None, None]
    q_ = q[None, None, :, :]
    pq = p_ * q_
    rho = pq / (p_ + q_)
    dPQ = np.sum((P[:, :, None, None, :] - Q[None, None, :, :, :]) ** 2, axis=-1)
    pref = 2.0 * np.pi ** 2.5 / (pq * np.sqrt(p_ + q_))
    expo = np.exp(-mu1 * r1)[:, :, None, None] * np.exp(-mu2 * r2)[None, None, :, :]
    val = np.sum(d1[:, :, None, None] * d2[None, None, :, :] * pref * expo * boys0(rho * dPQ))
    return sign * float(val)


@dataclass
class IntegralSet:
    """One- and two-body integrals per species (``"e"``, ``"p"``) and species pair.

    ``eri`` holds plain Coulomb integrals ``(pq|rs)``; the charge product of the
    pair is applied by consumers.  ``n_particles[k] = (n_alpha, n_beta)``.
    """

    s: dict[str, np.ndarray]
    h: dict[str, np.ndarray]
    eri: dict[tuple[str, str], np.ndarray]
    e_core: float
    n_particles: dict[str, tuple[int, int]]
    charges: dict[str, float] = field(default_factory=lambda: {"e": -1.0, "p": 1.0})
    masses: dict[str, float] = field(default_factory=dict)

    @property
    def species(self) -> list[str]:
        return [k for k in ("e", "p") if k in self.h]

    def norb(self, key: str) -> int:
        return self.h[key].shape[0] if key in self.h else 0

    def check(self, atol: float = 1e-10) -> None:
        for k in self.species:
            S, h = self.s[k], self.h[k]
            if not (np.allclose(S, S.T, atol=atol) and np.allclose(h, h.T, atol=atol)):
                raise ValueError(f"{k}: overlap/core matrices not symmetric")
            g = self.eri[(k, k)]
            for perm in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)]:
                if not np.allclose(g, g.transpose(perm), atol=atol):
                    raise ValueError(f"{k}{k}: two-body tensor lacks 8-fold symmetry")
        if ("e", "p") in self.eri:
            g = self.eri[("e", "p")]
            for perm in [(1, 0, 2, 3), (0, 1, 3, 2)]:
                if not np.allclose(g, g.transpose(perm), atol=atol):
                    raise ValueError("ep two-body tensor lacks pair symmetry")
        for arr in list(self.h.values()) + list(self.eri.values()):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite integral")

    def with_zero_coupling(self) -> "IntegralSet":
        eri = dict(self.eri)
        if ("e", "p") in eri:
            eri[("e", "p")] = np.zeros_like(eri[("e", "p")])
        return IntegralSet(dict(self.s), dict(self.h), eri, self.e_core, dict(self.n_particles),
                           dict(self.charges), dict(self.masses))


def _eri_tensor(shells_a, shells_b, symmetric: bool) -> np.ndarray:
    na, nb = len(shells_a), len(shells_b)
    out = np.empty((na, na, nb, nb))
    if symmetric:
        done = {}
        for i, j, k, l in itertools.product(range(na), repeat=4):
            key = (max(i, j), min(i, j), max(k, l), min(k, l))
            key = max(key, key[2:] + key[:2])
            if key not in done:
                done[key] = two_body_coulomb(shells_a[i], shells_a[j], shells_a[k], shells_a[l])
            out[i, j, k, l] = done[key]
        return out
    for i in range(na):
        for j in range(i + 1):
            for k in range(nb):
                for l in range(k + 1):
                    v = two_body_coulomb(shells_a[i], shells_a[j], shells_b[k], shells_b[l])
                    out[i, j, k, l] = out[j, i, k, l] = out[i, j, l, k] = out[j, i, l, k] = v
    return out


def build_integral_set(frame: MolecularFrame, bases: dict[str, list[GaussianShell]],
                       species: dict[str, ParticleSpecies]) -> IntegralSet:
    """Assemble every bracket of the NEO Hamiltonian in the AO basis.

    ``bases`` and ``species`` are keyed ``"e"`` / ``"p"``; a species with no
    entry is treated classically (or absent).
    """
    s, h, eri = {}, {}, {}
    for key, shells in bases.items():
        if not shells:
            raise ValueError(f"empty basis for species {key}")
        sp_ = species[key]
        n = len(shells)
        S, H = np.empty((n, n)), np.empty((n, n))
        for i in range(n):
            for j in range(i + 1):
                ov, kin, pot = one_body_integrals(shells[i], shells[j], frame, sp_)
                S[i, j] = S[j, i] = ov
                H[i, j] = H[j, i] = kin + pot
        w = np.linalg.eigvalsh(S)
        if w[0] < 1e-10:
            raise IllConditionedBasis(f"{key} basis nearly linearly dependent (min eig {w[0]:.2e})")
        s[key], h[key] = S, H
        eri[(key, key)] = _eri_tensor(shells, shells, symmetric=True)
    if "e" in bases and "p" in bases:
        eri[("e", "p")] = _eri_tensor(bases["e"], bases["p"], symmetric=False)
    return IntegralSet(
        s=s, h=h, eri=eri, e_core=frame.nuclear_repulsion(),
        n_particles={k: (species[k].n_alpha, species[k].n_beta) for k in bases},
        charges={k: species[k].charge for k in bases},
        masses={k: species[k].mass for k in bases},
    )
