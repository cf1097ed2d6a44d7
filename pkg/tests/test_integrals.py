"""Native s-Gaussian integrals against independent quadrature oracles."""

import numpy as np
import pytest
from scipy.integrate import quad

from neovqe.basis import (BOHR_ANGSTROM, PROTON_MASS, BasisNotAvailable, GaussianShell, MolecularFrame,
                          ParticleSpecies, UnsupportedAngularMomentum, electronic_basis, load_basis)
from neovqe.integrals import (IllConditionedBasis, boys0, build_integral_set, one_body_integrals,
                              two_body_coulomb)

from conftest import h2_frame

ELECTRON = ParticleSpecies.electrons(2)
PROTON = ParticleSpecies.protons(1)


def prim(alpha, center=(0.0, 0.0, 0.0)):
    return GaussianShell(tuple(center), (alpha,), (1.0,))


def norm(alpha):
    return (2 * alpha / np.pi) ** 0.75


# -- oracles --------------------------------------------------------------------------
# 1-D trapezoid grids are spectrally accurate for Gaussians; the Coulomb oracles
# use 1/r = 2/sqrt(pi) int_0^inf exp(-t^2 r^2) dt and integrate t numerically,
# so they never touch the Boys function.

GRID = np.linspace(-12.0, 12.0, 4801)


def _factor(a, A, b, B):
    return np.exp(-a * (GRID - A) ** 2 - b * (GRID - B) ** 2)


def overlap_oracle(a, A, b, B):
    val = norm(a) * norm(b)
    for d in range(3):
        val *= np.trapezoid(_factor(a, A[d], b, B[d]), GRID)
    return val


def kinetic_oracle(a, A, b, B, mass=1.0):
    """(1/2m) int grad(phi_a) . grad(phi_b), separable per Cartesian direction."""
    f = [_factor(a, A[d], b, B[d]) for d in range(3)]
    s = [np.trapezoid(fd, GRID) for fd in f]
    g = [np.trapezoid(4 * a * b * (GRID - A[d]) * (GRID - B[d]) * f[d], GRID) for d in range(3)]
    total = sum(g[d] * np.prod([s[k] for k in range(3) if k != d]) for d in range(3))
    return 0.5 * norm(a) * norm(b) * total / mass


def _product(a, A, b, B):
    p = a + b
    P = (a * np.asarray(A) + b * np.asarray(B)) / p
    K = norm(a) * norm(b) * np.exp(-a * b / p * np.sum((np.asarray(A) - np.asarray(B)) ** 2))
    return p, P, K


def attraction_oracle(a, A, b, B, C):
    p, P, K = _product(a, A, b, B)
    R2 = np.sum((P - np.asarray(C)) ** 2)
    f = lambda t: (np.pi / (p + t * t)) ** 1.5 * np.exp(-p * t * t * R2 / (p + t * t))
    return K * 2 / np.sqrt(np.pi) * quad(f, 0, np.inf, epsabs=1e-13, epsrel=1e-12)[0]


def coulomb_oracle(a, A, b, B, c, C, d, D):
    p, P, K1 = _product(a, A, b, B)
    q, Q, K2 = _product(c, C, d, D)
    mu = p * q / (p + q)
    R2 = np.sum((P - Q) ** 2)
    pref = K1 * K2 * (np.pi / p) ** 1.5 * (np.pi / q) ** 1.5
    f = lambda t: (mu / (mu + t * t)) ** 1.5 * np.exp(-mu * t * t * R2 / (mu + t * t))
    return pref * 2 / np.sqrt(np.pi) * quad(f, 0, np.inf, epsabs=1e-13, epsrel=1e-12)[0]


def random_configs(n, seed=7):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield rng.uniform(0.3, 2.5, size=4), rng.uniform(-1.5, 1.5, size=(4, 3))


class TestBoys:
    def test_zero_limit(self):
        assert boys0(0.0) == 1.0

    def test_series_matches_closed_form_at_switch(self):
        assert abs(boys0(1e-6 * 0.999) - boys0(1e-6 * 1.001)) < 1e-9


class TestOneBody:
    def test_normalized_primitive_overlap(self):
        f = MolecularFrame()
        s, _, _ = one_body_integrals(prim(0.7), prim(0.7), f, ELECTRON)
        assert s == pytest.approx(1.0, abs=1e-14)

    def test_kinetic_unit_exponent(self):
        """Kinetic energy of a normalized exponent-1 Gaussian is 3/2."""
        _, t, _ = one_body_integrals(prim(1.0), prim(1.0), MolecularFrame(), ELECTRON)
        assert t == pytest.approx(1.5, abs=1e-12)
        assert kinetic_oracle(1.0, (0, 0, 0), 1.0, (0, 0, 0)) == pytest.approx(1.5, abs=1e-10)

    def test_proton_kinetic_is_scaled_exactly(self):
        a, b = prim(0.8, (0, 0, 0.1)), prim(1.3, (0.2, 0, 0))
        _, te, _ = one_body_integrals(a, b, MolecularFrame(), ELECTRON)
        _, tp, _ = one_body_integrals(a, b, MolecularFrame(), PROTON)
        assert tp == te / PROTON_MASS

    def test_random_configs_vs_quadrature(self):
        """Overlap, kinetic and attraction agree with quadrature on 25 random configurations."""
        for alphas, centers in random_configs(25):
            a, b = alphas[:2]
            A, B, C = centers[:3]
            frame = MolecularFrame(((tuple(C), 1.0),), (), ("H",))
            s, t, v = one_body_integrals(prim(a, A), prim(b, B), frame, ELECTRON)
            assert s == pytest.approx(overlap_oracle(a, A, b, B), abs=1e-8)
            assert t == pytest.approx(kinetic_oracle(a, A, b, B), abs=1e-8)
            assert v == pytest.approx(-attraction_oracle(a, A, b, B, C), abs=1e-8)

    def test_proton_sign_is_repulsive(self):
        frame = MolecularFrame((((0.0, 0.0, 1.0), 6.0),), (), ("C",))
        _, _, ve = one_body_integrals(prim(1.0), prim(1.0), frame, ELECTRON)
        _, _, vp = one_body_integrals(prim(1.0), prim(1.0), frame, PROTON)
        assert ve < 0 < vp
        assert vp == pytest.approx(-ve, rel=1e-14)

    def test_non_s_shell_rejected(self):
        p_shell = GaussianShell((0.0, 0.0, 0.0), (1.0,), (1.0,), 1)
        with pytest.raises(UnsupportedAngularMomentum, match="import"):
            one_body_integrals(p_shell, prim(1.0), MolecularFrame(), ELECTRON)


class TestTwoBody:
    def test_same_centre_unit_exponent(self):
        """(aa|aa) for exponent 1 equals 2/sqrt(pi)."""
        a = prim(1.0)
        assert two_body_coulomb(a, a, a, a) == pytest.approx(1.1283791671, abs=1e-10)
        assert coulomb_oracle(1, (0, 0, 0), 1, (0, 0, 0), 1, (0, 0, 0), 1, (0, 0, 0)) == \
            pytest.approx(1.1283791671, abs=1e-9)

    def test_sign_rule(self):
        a = prim(1.0)
        assert two_body_coulomb(a, a, a, a, sign=-1) == -two_body_coulomb(a, a, a, a)

    def test_multipole_limit(self):
        a, b = prim(1.0), prim(1.2, (0, 0, 100.0))
        assert two_body_coulomb(a, a, b, b) == pytest.approx(0.01, abs=1e-12)

    def test_random_configs_vs_quadrature(self):
        for alphas, centers in random_configs(25, seed=11):
            sh = [prim(al, c) for al, c in zip(alphas, centers)]
            ref = coulomb_oracle(*(v for al, c in zip(alphas, centers) for v in (al, c)))
            assert two_body_coulomb(*sh) == pytest.approx(ref, abs=1e-8)

    def test_index_symmetry(self):
        rng = np.random.default_rng(3)
        sh = [prim(al, c) for al, c in zip(rng.uniform(0.5, 2, 4), rng.uniform(-1, 1, (4, 3)))]
        v = two_body_coulomb(*sh)
        for perm in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1), (3, 2, 1, 0)]:
            assert two_body_coulomb(*(sh[i] for i in perm)) == pytest.approx(v, abs=1e-14)


class TestIntegralSet:
    def test_quantum_h2_has_no_classical_repulsion(self):
        f = h2_frame(quantum=True)
        assert f.nuclear_repulsion() == 0.0

    def test_classical_h2_repulsion(self):
        f = h2_frame()
        assert f.nuclear_repulsion() == pytest.approx(1 / (0.7414 / BOHR_ANGSTROM), abs=1e-12)
        assert f.nuclear_repulsion() == pytest.approx(0.713754, abs=1e-6)

    def test_symmetries_hold(self, h2_neo_631g):
        ints = h2_neo_631g[0]
        ints.check(atol=1e-12)
        assert ints.eri[("e", "p")].shape == (4, 4, 4, 4)

    def test_translation_invariance(self):
        sp = {"e": ParticleSpecies.electrons(2), "p": ParticleSpecies.protons(2)}
        from neovqe.basis import nuclear_basis
        f = MolecularFrame.from_atoms([("H", (0, 0, 0), True), ("H", (0, 0, 0.74), True), ("H", (0.5, 1, 0), False)])
        g = f.translated((1.3, -0.4, 2.2))
        a = build_integral_set(f, {"e": electronic_basis(f, "sto-6g"), "p": nuclear_basis(f, "nuc-2s")}, sp)
        b = build_integral_set(g, {"e": electronic_basis(g, "sto-6g"), "p": nuclear_basis(g, "nuc-2s")}, sp)
        for k in ("e", "p"):
            assert np.max(np.abs(a.h[k] - b.h[k])) < 1e-12
            assert np.max(np.abs(a.s[k] - b.s[k])) < 1e-12
        for k in a.eri:
            assert np.max(np.abs(a.eri[k] - b.eri[k])) < 1e-12

    def test_linear_dependence_detected(self):
        f = MolecularFrame.from_atoms([("H", (0, 0, 0), False), ("H", (0, 0, 1e-6), False)])
        with pytest.raises(IllConditionedBasis):
            build_integral_set(f, {"e": electronic_basis(f, "sto-6g")}, {"e": ParticleSpecies.electrons(2)})

    def test_placeholder_basis_refuses(self):
        with pytest.raises(BasisNotAvailable, match="exponents"):
            load_basis("dzsnb")

    def test_unknown_basis(self):
        with pytest.raises(BasisNotAvailable):
            load_basis("no-such-basis")
