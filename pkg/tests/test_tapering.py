"""Qubit reduction: parity removal, Z2 tapering, projections and replayable records."""

import json

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from neovqe.fci import fci_solve, sector_basis
from neovqe.mapping import encode_array, parity_map
from neovqe.pauli import PauliSum, load, paulis_commute, word_to_masks
from neovqe.pipeline import fixture_path, load_mapping, minimal_h2_reduction, reduction_ladder
from neovqe.tapering import (NoSignatureMatch, ReductionRecord, SymmetryGenerator, SymmetryViolation,
                             find_z2_symmetries, project_fixed_qubits, sector_from_reference, signature_fix,
                             species_parity_positions, species_parity_reduction, taper)

from conftest import electronic_h2, random_neo_system, sector_penalty


def ground(op: PauliSum) -> float:
    if op.n_qubits <= 8:
        return float(np.linalg.eigvalsh(op.to_matrix())[0])
    return float(spla.eigsh(op.to_sparse(), k=1, which="SA", tol=1e-12)[0][0])


def spectrum(op: PauliSum) -> np.ndarray:
    return np.linalg.eigvalsh(op.to_matrix())


def symmetric_random_hamiltonian(rng, n, symmetry_word, n_terms=25):
    """Random Hermitian sum of words that all commute with ``symmetry_word``."""
    sx, sz = word_to_masks(symmetry_word)
    pairs = []
    while len(pairs) < n_terms:
        w = "".join(rng.choice(list("IXYZ"), size=n))
        if paulis_commute(*word_to_masks(w), sx, sz):
            pairs.append((w, rng.normal()))
    return PauliSum.from_list(pairs)


class TestSymmetrySearch:
    def test_generators_commute_with_every_term(self):
        rng = np.random.default_rng(0)
        h = symmetric_random_hamiltonian(rng, 5, "ZZIZI")
        gens = find_z2_symmetries(h)
        assert gens
        for g in gens:
            assert h.commutes_with(g.x, g.z)
        positions = [g.position for g in gens]
        for g in gens:
            for o in gens:
                if o is not g:
                    assert not (o.z >> g.position) & 1
        assert len(set(positions)) == len(positions)

    def test_full_weight_random_terms_have_no_symmetry(self):
        rng = np.random.default_rng(1)
        pairs = [("".join(rng.choice(list("XYZ"), size=4)), rng.normal()) for _ in range(40)]
        assert find_z2_symmetries(PauliSum.from_list(pairs)) == []

    def test_consumed_single_qubit_symmetries_are_divided_out(self):
        h = PauliSum.from_list([("IZIZ", 1.0), ("XIXI", 0.5), ("ZIZI", 0.2)])
        assert [g.word for g in find_z2_symmetries(h)] == ["IIIZ", "ZIZI", "IZII"]
        assert [g.word for g in find_z2_symmetries(h, consumed=(0, 2))] == ["ZIZI"]

    def test_consumed_qubit_must_be_symmetric(self):
        h = PauliSum.from_list([("IZIZ", 1.0), ("XIXI", 0.5)])
        with pytest.raises(SymmetryViolation):
            find_z2_symmetries(h, consumed=(1,))

    def test_roundoff_terms_ignored(self):
        h = PauliSum.from_list([("ZZ", 1.0), ("XX", 0.3), ("XI", 1e-12)])
        assert [g.word for g in find_z2_symmetries(h)] == ["ZZ"]

    def test_sector_from_reference(self):
        g = SymmetryGenerator(*word_to_masks("ZIZ"), 3, 0)
        assert sector_from_reference(g, 0b001) == -1
        assert sector_from_reference(g, 0b101) == 1
        with pytest.raises(ValueError):
            sector_from_reference(SymmetryGenerator(*word_to_masks("XIX"), 3, 0), 0)


class TestTaper:
    @pytest.mark.parametrize("word", ["ZZZ", "ZIZ", "YXI"])
    def test_union_of_sectors_is_full_spectrum(self, word):
        rng = np.random.default_rng(sum(map(ord, word)))
        h = symmetric_random_hamiltonian(rng, 3, word)
        x, z = word_to_masks(word)
        q = (z & -z).bit_length() - 1
        g = SymmetryGenerator(x, z, 3, q)
        plus, _ = taper(h, [g.with_eigenvalue(1)])
        minus, _ = taper(h, [g.with_eigenvalue(-1)])
        assert plus.n_qubits == 2
        assert np.allclose(np.sort(np.concatenate([spectrum(plus), spectrum(minus)])), spectrum(h), atol=1e-10)

    def test_no_generators_is_identity(self):
        h = PauliSum.from_list([("XY", 1.0), ("ZI", 0.5)])
        out, rec = taper(h, [])
        assert out == h and rec.steps == []

    def test_symmetry_breaking_term_rejected(self):
        h = PauliSum.from_list([("ZZ", 1.0), ("XI", 0.5)])
        with pytest.raises(SymmetryViolation):
            taper(h, [SymmetryGenerator(*word_to_masks("ZZ"), 2, 0)])

    def test_state_maps_are_isometries(self):
        rng = np.random.default_rng(3)
        h = symmetric_random_hamiltonian(rng, 4, "ZIZZ")
        gens = find_z2_symmetries(h)
        red, rec = taper(h, [g.with_eigenvalue(-1) for g in gens])
        phi = rng.normal(size=1 << red.n_qubits) + 1j * rng.normal(size=1 << red.n_qubits)
        phi /= np.linalg.norm(phi)
        psi = rec.expand_state(phi)
        assert np.linalg.norm(psi) == pytest.approx(1.0)
        assert np.allclose(rec.reduce_state(psi), phi)
        assert np.vdot(psi, h.apply(psi)).real == pytest.approx(np.vdot(phi, red.apply(phi)).real, abs=1e-12)


class TestProjection:
    def test_fixture_projection(self):
        h = load(fixture_path("h2_minimal_neo.pauli"))
        p, rec = project_fixed_qubits(h, {1: 1, 2: 0, 3: 0})
        assert p.n_qubits == 1
        assert p.coeff("I") == pytest.approx(-0.217313, abs=1e-6)
        assert p.coeff("Z") == pytest.approx(-0.816590, abs=1e-6)
        assert p.coeff("X") == pytest.approx(0.181576, abs=1e-6)
        assert ground(p) >= ground(h) - 1e-12
        assert ground(p) == pytest.approx(-1.0538469634, abs=1e-9)

    def test_fixing_nothing_is_noop(self):
        h = load(fixture_path("h2_minimal_neo.pauli"))
        p, rec = project_fixed_qubits(h, {})
        assert p == h and rec.steps == []

    def test_projected_ground_bounds_full_ground(self):
        rng = np.random.default_rng(4)
        pairs = [("".join(rng.choice(list("IXYZ"), size=4)), rng.normal()) for _ in range(30)]
        h = PauliSum.from_list(pairs)
        for fixed in ({0: 0}, {1: 1, 3: 0}, {0: 1, 1: 0, 2: 1}):
            assert ground(project_fixed_qubits(h, fixed)[0]) >= ground(h) - 1e-12

    def test_invalid_fixed_value(self):
        h = PauliSum.from_list([("ZZ", 1.0)])
        with pytest.raises(ValueError):
            project_fixed_qubits(h, {0: 2})
        with pytest.raises(ValueError):
            project_fixed_qubits(h, {5: 0})


class TestSignatureFix:
    def test_aligns_electronic_reduction_with_fixture(self):
        """A Z conjugation flips the X sign of the reduced electronic problem to match the fixture."""
        ints, res, mo, lay, op = electronic_h2("sto-6g", 0.73)
        stages, rec = reduction_ladder(parity_map(op, lay), lay, {})
        h_el = stages[-1][1]
        assert h_el.n_qubits == 1
        target = project_fixed_qubits(load(fixture_path("h2_minimal_neo.pauli")), {1: 1, 2: 0, 3: 0})[0]
        fixed, zmask = signature_fix(h_el, target)
        assert zmask == 1
        assert fixed.coeff("X") == pytest.approx(0.180939, abs=1e-6)
        assert np.allclose(spectrum(fixed), spectrum(h_el))

    def test_no_shared_words(self):
        with pytest.raises(NoSignatureMatch):
            signature_fix(PauliSum.from_list([("Z", 1.0)]), PauliSum.from_list([("X", 1.0)]))

    def test_impossible_pattern(self):
        a = PauliSum.from_list([("XI", 1.0), ("IX", 1.0), ("XX", 1.0)])
        b = PauliSum.from_list([("XI", -1.0), ("IX", -1.0), ("XX", -1.0)])
        with pytest.raises(NoSignatureMatch):
            signature_fix(a, b)


def inversion_characters(coeffs, overlap):
    """+1/-1 inversion character of each MO: <phi| S P |phi> with P swapping the two centres."""
    n = coeffs.shape[0]
    half = n // 2
    perm = np.r_[np.arange(half, n), np.arange(half)]
    P = np.eye(n)[perm]
    chars = np.einsum("pk,pq,qk->k", coeffs, overlap @ P, coeffs)
    assert np.allclose(np.abs(chars), 1.0, atol=1e-6)
    return np.sign(chars).astype(int)


@pytest.fixture(scope="module")
def minimal():
    return minimal_h2_reduction()


class TestNEOReduction:
    def test_qubit_counts(self, minimal):
        lay, rec, stages = minimal
        assert [op.n_qubits for _, op in stages] == [12, 8, 7, 4]
        assert [n for n, _ in stages] == ["none", "parity", "taper", "project"]

    def test_taper_generator_is_inversion_parity(self, minimal, h2_neo_minimal):
        """On the particle sector the tapered generator equals the product of inversion characters
        of the occupied electronic and nuclear orbitals, up to one sign fixed by the removed parities."""
        lay, rec, stages = minimal
        ints, res, mo, _, _ = h2_neo_minimal
        chars = {k: inversion_characters(res.coefficients[k], ints.s[k]) for k in ("e", "p")}
        # the reduction orders the nuclear virtuals to repeat the occupied characters
        assert sorted(chars["p"][2:]) == sorted(chars["p"][:2])
        chars["p"] = np.r_[chars["p"][:2], chars["p"][:2]]
        gen = rec.steps[1].generator
        parity_step = rec.steps[0]
        ratios = set()
        for bits in sector_basis(lay):
            q = int(encode_array(np.array([bits]), lay)[0])
            reduced = 0
            for new, old in enumerate(parity_step.keep):
                reduced |= ((q >> old) & 1) << new
            g_val = -1 if bin(gen.z & reduced).count("1") % 2 else 1
            ref = 1
            for m in range(lay.n_modes):
                if (bits >> m) & 1:
                    name, orb, _ = lay.mode_info(m)
                    ref *= chars[name][orb]
            ratios.add(g_val * ref)
        assert len(ratios) == 1

    def test_twelve_qubit_generator_word(self, minimal):
        lay, rec, stages = minimal
        consumed = tuple(p for p, _ in species_parity_positions(lay))
        assert [g.word for g in find_z2_symmetries(stages[0][1], consumed=consumed)] == ["IZZZIZZZIZIZ"]

    def test_each_stage_keeps_the_fci_ground_state(self, h2_neo_minimal):
        """With a number penalty, every reduction stage has the sector FCI energy as its ground."""
        ints, res, mo, lay, op = h2_neo_minimal
        e_fci = fci_solve(op, lay)[0][0]
        penalized = (op + sector_penalty(lay)).normal_ordered(lay)
        stages, rec = reduction_ladder(parity_map(penalized, lay), lay, {})
        assert len(stages) == 4
        for name, h in stages:
            assert ground(h) == pytest.approx(e_fci, abs=1e-8), name

    def test_electronic_631g_ladder(self, h2_631g):
        ints, res, mo, lay, op = h2_631g
        e_fci = fci_solve(op, lay)[0][0]
        penalized = (op + sector_penalty(lay)).normal_ordered(lay)
        stages, rec = reduction_ladder(parity_map(penalized, lay), lay, {})
        assert [h.n_qubits for _, h in stages] == [8, 6, 5]
        for name, h in stages:
            assert ground(h) == pytest.approx(e_fci, abs=1e-8), name

    def test_parity_reduction_rejects_number_breaking_terms(self):
        _, lay, op = random_neo_system(0)
        q = parity_map(op, lay) + PauliSum.single(lay.n_modes, lay.n_modes - 1, "X", 0.1)
        with pytest.raises(SymmetryViolation):
            species_parity_reduction(q, lay)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_systems_keep_sector_spectrum(self, seed):
        ints, lay, op = random_neo_system(seed)
        e_fci = fci_solve(op, lay)[0][0]
        penalized = (op + sector_penalty(lay)).normal_ordered(lay)
        stages, rec = reduction_ladder(parity_map(penalized, lay), lay, {"taper": False})
        for name, h in stages:
            assert ground(h) == pytest.approx(e_fci, abs=1e-8), name


class TestRecord:
    def test_json_round_trip_replays(self, h2_neo_minimal):
        ints, res, mo, lay, op = h2_neo_minimal
        q = parity_map(op, lay)
        stages, rec = reduction_ladder(q, lay, {})
        back = ReductionRecord.from_dict(json.loads(rec.dumps()))
        assert back.to_dict() == rec.to_dict()
        assert back.apply(q).equals(stages[-1][1], atol=1e-12)
        assert back.final_labels == ("e", "p", "p", "p")

    def test_schema_mismatch(self):
        with pytest.raises(ValueError, match="schema"):
            ReductionRecord.from_dict({"schema": 99, "n_original": 2, "steps": []})

    def test_wrong_operator_size(self):
        rec = ReductionRecord(4, [])
        with pytest.raises(ValueError):
            rec.apply(PauliSum.from_list([("ZZ", 1.0)]))

    def test_reference_bits_pass_through(self, h2_neo_minimal):
        ints, res, mo, lay, op = h2_neo_minimal
        stages, rec = reduction_ladder(parity_map(op, lay), lay, {})
        ref = int(encode_array(np.array([lay.reference_occupation()]), lay)[0])
        bits = rec.reduce_bits(ref)
        assert 0 <= bits < 16
        with pytest.raises(SymmetryViolation):
            rec.reduce_bits(ref ^ 0b10)

    def test_shipped_mapping_matches_regenerated(self):
        lay, rec, _ = minimal_h2_reduction()
        lay2, rec2 = load_mapping(fixture_path("h2_minimal_neo.mapping.json"))
        assert lay2 == lay
        assert rec2.to_dict() == rec.to_dict()
