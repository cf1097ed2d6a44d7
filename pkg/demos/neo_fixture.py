"""Minimal H2 NEO problem from the shipped Pauli fixture: projection to 4 qubits and UCC VQE
with ordinary and advanced initialization."""

import sys
import tempfile

from neovqe.pipeline import Pipeline, load_config

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="neo_fixture_")
result = Pipeline(load_config("h2_sto6g_fixture"), out).run()

red, runs = result["reduce"], result["vqe"]["runs"]
print(f"qubits per stage {red['qubits']}")
print(f"ground with nuclear qubits fixed {red['exact_ground']:.8f}, 4-qubit ground {result['vqe']['exact_ground']:.8f}")
for mode, run in runs.items():
    print(f"{mode:>9}: start {run['initial_energy']:.8f}  final {run['energy']:.8f}  "
          f"iterations {run['iterations']}")
print(f"artifacts written to {out}")
