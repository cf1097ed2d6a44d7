"""Nuclear-electronic orbital Hamiltonians, qubit reductions and statevector VQE."""

__version__ = "0.1.0"
