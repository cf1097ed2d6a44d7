"""State reconstruction, entanglement on optimized states and resource reports."""

import json

import numpy as np
import pytest

from neovqe.analysis import (ResourceReport, full_layout, orbital_entropies, qubit_partition_entropy,
                             reconstruct_fock_state, resource_estimate, subsystem_entropy)
from neovqe.circuits import Circuit, Gate, build_twolocal
from neovqe.fci import FockVector, energy, fci_solve, subsystem_entropy_fci
from neovqe.fermion import restrict_spin_sector
from neovqe.mapping import encode_array, parity_map
from neovqe.pauli import PauliSum
from neovqe.pipeline import reduction_ladder
from neovqe.simulator import apply_circuit, expectation
from neovqe.tapering import species_parity_reduction
from neovqe.ucc import build_neoucc_circuit, generate_excitations


def encoded_statevector(fv: FockVector) -> np.ndarray:
    psi = np.zeros(1 << fv.layout.n_modes, dtype=complex)
    psi[encode_array(fv.basis, fv.layout)] = fv.amplitudes
    return psi


@pytest.fixture(scope="module")
def reduced_neo(h2_neo_minimal):
    ints, res, mo, lay, op = h2_neo_minimal
    q = parity_map(op, lay)
    stages, rec = reduction_ladder(q, lay, {})
    w, states = fci_solve(op, lay)
    return lay, op, stages, rec, states[0]


class TestReconstruction:
    def test_reference_state(self, reduced_neo):
        lay, op, stages, rec, _ = reduced_neo
        circ = build_neoucc_circuit([], lay, rec)
        fv = reconstruct_fock_state(apply_circuit(circ, []), rec, lay)
        assert list(fv.basis) == [lay.reference_occupation()]
        assert abs(fv.amplitudes[0]) == pytest.approx(1.0)

    def test_fci_state_round_trip(self, reduced_neo):
        lay, op, stages, rec, gs = reduced_neo
        small = rec.reduce_state(encoded_statevector(gs))
        assert np.linalg.norm(small) == pytest.approx(1.0, abs=1e-10)
        back = reconstruct_fock_state(small, rec, lay)
        assert abs(back.overlap(gs)) == pytest.approx(1.0, abs=1e-10)

    def test_fermionic_energy_matches_qubit_energy(self, reduced_neo):
        """A random reduced state has the same energy as a qubit vector and as a Fock vector."""
        lay, op, stages, rec, _ = reduced_neo
        h = stages[-1][1]
        circ = build_neoucc_circuit(generate_excitations(lay, "SD"), lay, rec)
        psi = apply_circuit(circ, np.random.default_rng(0).normal(size=circ.n_parameters) * 0.3)
        fv = reconstruct_fock_state(psi, rec, lay)
        assert energy(op, fv) == pytest.approx(expectation(h, psi), abs=1e-10)

    def test_dropped_spin_block_is_restored(self, h2_neo_minimal):
        ints, res, mo, lay, op = h2_neo_minimal
        red_op, red_lay = restrict_spin_sector(op, lay, "p", "beta")
        big, index = full_layout(red_lay)
        assert big.n_modes == lay.n_modes and len(index) == red_lay.n_modes
        _, states = fci_solve(red_op, red_lay)
        fv = reconstruct_fock_state(encoded_statevector(states[0]), None, red_lay)
        assert fv.layout.n_modes == lay.n_modes
        ref = fci_solve(op, lay)[1][0]
        assert abs(fv.overlap(ref)) == pytest.approx(1.0, abs=1e-8)

    def test_size_checks(self, reduced_neo):
        lay, op, stages, rec, _ = reduced_neo
        with pytest.raises(ValueError):
            reconstruct_fock_state(np.ones(8), rec, lay)
        with pytest.raises(ValueError):
            reconstruct_fock_state(np.ones(8), None, lay)


class TestEntanglement:
    def test_fci_entropy_survives_reduction(self, reduced_neo):
        lay, op, stages, rec, gs = reduced_neo
        small = rec.reduce_state(encoded_statevector(gs))
        assert subsystem_entropy(small, rec, lay) == pytest.approx(subsystem_entropy_fci(gs), abs=1e-10)
        ent = orbital_entropies(small, rec, lay)
        assert ent["QI_total"] == pytest.approx(ent["QI_e"] + ent["QI_p"])

    def test_partition_entropy_symmetric(self):
        rng = np.random.default_rng(1)
        psi = rng.normal(size=32) + 1j * rng.normal(size=32)
        psi /= np.linalg.norm(psi)
        assert qubit_partition_entropy(psi, (0, 3), 5) == pytest.approx(qubit_partition_entropy(psi, (1, 2, 4), 5))

    def test_partition_entropy_product_and_bell(self):
        bell = np.zeros(8, dtype=complex)
        bell[0b000] = bell[0b101] = 2 ** -0.5
        assert qubit_partition_entropy(bell, (0,), 3) == pytest.approx(np.log(2))
        assert qubit_partition_entropy(bell, (1,), 3) == pytest.approx(0.0, abs=1e-14)

    def test_register_partition_matches_fock_partition(self, h2_neo_minimal):
        """Without a cross-species Clifford the electronic/nuclear qubit split gives the Fock entropy."""
        ints, res, mo, lay, op = h2_neo_minimal
        gs = fci_solve(op, lay)[1][0]
        _, rec = species_parity_reduction(parity_map(op, lay), lay)
        small = rec.reduce_state(encoded_statevector(gs))
        labels = rec.final_labels
        el = tuple(q for q, l in enumerate(labels) if l == "e")
        assert qubit_partition_entropy(small, el, len(labels)) == pytest.approx(subsystem_entropy_fci(gs), abs=1e-10)


class TestResources:
    def test_single_cz(self):
        h = PauliSum.from_list([("ZZ", 1.0)])
        c = Circuit(2).add(Gate("cz", (0, 1)))
        rep = resource_estimate([("none", h)], {"none": {"c": c}})
        assert rep.rows == [{"stage": "none", "qubits": 2, "terms": 1, "c": 1}]
        assert json.loads(rep.to_json())["stages"][0]["c"] == 1
        assert rep.table().splitlines()[0].split("\t") == ["stage", "qubits", "terms", "c"]

    def test_circuit_size_mismatch(self):
        with pytest.raises(ValueError):
            ResourceReport().add("none", PauliSum.identity(3), {"c": Circuit(2)})

    def test_stage_counts_for_neo_ladder(self, reduced_neo):
        lay, op, stages, rec, _ = reduced_neo
        circuits = {}
        for name, h in stages:
            el = tuple(q for q, l in enumerate(h.labels) if l == "e")
            nu = tuple(q for q, l in enumerate(h.labels) if l != "e")
            circuits[name] = {"stacked": build_twolocal(el, nu, "stacked", 3)}
        rep = resource_estimate(stages, circuits)
        assert [r["qubits"] for r in rep.rows] == [12, 8, 7, 4]
        counts = [r["stacked"] for r in rep.rows]
        assert counts == sorted(counts, reverse=True)
        # 4 electronic x 8 nuclear qubits, 3 layers, plus 6 electronic pairs x 3 layers
        assert counts[0] == 3 * 6 + 3 * 32
