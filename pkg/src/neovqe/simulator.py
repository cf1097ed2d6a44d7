"""Dense statevector simulation, expectation values and exact qubit diagonalization."""

from __future__ import annotations

import functools
import os

import numpy as np
import scipy.sparse.linalg as spla

from .circuits import Circuit, Gate
from .pauli import MAX_DENSE_QUBITS, PauliSum, _pauli_phase

DEFAULT_MAX_QUBITS = 24
SPARSE_NNZ_LIMIT = 5e7


class StatevectorTooLarge(MemoryError):
    pass


def max_qubits() -> int:
    return int(os.environ.get("NEOVQE_MAX_QUBITS", DEFAULT_MAX_QUBITS))


def zero_state(n: int) -> np.ndarray:
    if n > max_qubits():
        raise StatevectorTooLarge(
            f"{n} qubits exceed the statevector ceiling of {max_qubits()} (set NEOVQE_MAX_QUBITS)")
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    return psi


def basis_state(n: int, bits: int) -> np.ndarray:
    psi = zero_state(n)
    psi[0] = 0.0
    psi[bits] = 1.0
    return psi


def _single(psi: np.ndarray, q: int, m: np.ndarray) -> np.ndarray:
    v = psi.reshape(-1, 2, 1 << q)
    return np.einsum("ab,ibj->iaj", m, v).reshape(-1)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


@functools.lru_cache(maxsize=4096)
def _permutation(dim: int, x: int) -> np.ndarray:
    return np.arange(dim) ^ x


@functools.lru_cache(maxsize=4096)
def _signed_phase(dim: int, x: int, z: int) -> np.ndarray:
    return _pauli_phase(np.arange(dim), x, z)


def apply_gate(psi: np.ndarray, gate: Gate, angle: float = 0.0, n: int | None = None) -> np.ndarray:
    """Apply one gate; ``angle`` is the full rotation angle ``prefactor * theta``."""
    name = gate.name
    if name == "ry":
        return _single(psi, gate.qubits[0], ry_matrix(angle))
    if name == "rz":
        return _single(psi, gate.qubits[0], rz_matrix(angle))
    if name == "x":
        return psi[_permutation(psi.shape[0], 1 << gate.qubits[0])]
    if name == "cz":
        a, b = gate.qubits
        idx = np.arange(psi.shape[0])
        both = ((idx >> a) & 1) & ((idx >> b) & 1)
        return psi * (1 - 2 * both)
    if name == "pauli":
        x, z = gate.pauli
        ppsi = _signed_phase(psi.shape[0], x, z) * psi[_permutation(psi.shape[0], x)]
        return np.cos(angle / 2) * psi - 1j * np.sin(angle / 2) * ppsi
    raise ValueError(f"unsupported gate {name}")


_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.diag([1.0, -1.0]).astype(complex)


def apply_generator(psi: np.ndarray, gate: Gate) -> np.ndarray:
    """``P psi`` for the Pauli ``P`` of a rotation gate ``exp(-i angle/2 P)``."""
    if gate.name == "ry":
        return _single(psi, gate.qubits[0], _Y)
    if gate.name == "rz":
        return _single(psi, gate.qubits[0], _Z)
    if gate.name == "pauli":
        x, z = gate.pauli
        return _signed_phase(psi.shape[0], x, z) * psi[_permutation(psi.shape[0], x)]
    raise ValueError(f"gate {gate.name} has no rotation generator")


def undo_gate(psi: np.ndarray, gate: Gate, angle: float = 0.0) -> np.ndarray:
    """Apply the inverse of one gate (rotations reverse their angle; x and cz are involutions)."""
    return apply_gate(psi, gate, -angle)


def gate_angles(circuit: Circuit, params) -> np.ndarray:
    theta = circuit.bind(params)
    out = np.zeros(len(circuit.gates))
    for k, g in enumerate(circuit.gates):
        if g.param is not None:
            out[k] = g.prefactor * theta[circuit.parameter_index(g.param)]
    return out


def run_angles(circuit: Circuit, angles: np.ndarray, initial: np.ndarray | None = None,
               start: int = 0) -> np.ndarray:
    """Run gates ``start:`` with the given angles; ``initial`` is the state entering gate ``start``."""
    psi = zero_state(circuit.n_qubits) if initial is None else np.array(initial, dtype=complex)
    for g, a in zip(circuit.gates[start:], angles[start:]):
        psi = apply_gate(psi, g, a)
    return psi


def apply_circuit(circuit: Circuit, params=(), initial: np.ndarray | None = None) -> np.ndarray:
    """Statevector after running ``circuit`` from ``|0...0>`` (or ``initial``)."""
    if not np.all(np.isfinite(circuit.bind(params))):
        raise ValueError("non-finite circuit parameters")
    return run_angles(circuit, gate_angles(circuit, params), initial)


def circuit_unitary(circuit: Circuit, params=()) -> np.ndarray:
    """Dense unitary built column by column (testing aid, small circuits only)."""
    n = circuit.n_qubits
    if n > MAX_DENSE_QUBITS:
        raise StatevectorTooLarge("dense unitary limited to small circuits")
    angles = gate_angles(circuit, params)
    cols = [run_angles(circuit, angles, basis_state(n, b)) for b in range(1 << n)]
    return np.stack(cols, axis=1)


class Observable:
    """Pauli sum prepared for repeated expectation values."""

    def __init__(self, h: PauliSum, check_hermitian: bool = True):
        if check_hermitian and not h.is_hermitian():
            raise ValueError("observable is not Hermitian")
        self.h = h
        nnz = len(h) * (1 << h.n_qubits)
        self._matrix = h.to_sparse() if nnz <= SPARSE_NNZ_LIMIT else None

    def apply(self, psi: np.ndarray) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix @ psi
        return self.h.apply(psi)

    def expectation(self, psi: np.ndarray) -> float:
        if psi.shape[0] != 1 << self.h.n_qubits:
            raise ValueError("state and observable sizes differ")
        val = np.vdot(psi, self.apply(psi))
        if abs(val.imag) > 1e-10:
            raise ValueError(f"expectation has imaginary part {val.imag:.3e}")
        return float(val.real)


def expectation(h: PauliSum | Observable, psi: np.ndarray) -> float:
    obs = h if isinstance(h, Observable) else Observable(h)
    return obs.expectation(psi)


def exact_ground_state(h: PauliSum, n_roots: int = 1):
    """Lowest eigenpairs of a qubit Hamiltonian (dense up to 14 qubits, Lanczos to 24)."""
    n = h.n_qubits
    if n > DEFAULT_MAX_QUBITS:
        raise StatevectorTooLarge(f"{n} qubits exceed the diagonalization limit")
    dim = 1 << n
    if n <= 12 or n_roots >= dim - 1:
        w, v = np.linalg.eigh(h.to_matrix() if n <= MAX_DENSE_QUBITS else h.to_sparse().toarray())
        return w[:n_roots], v[:, :n_roots]
    op = spla.LinearOperator((dim, dim), matvec=Observable(h, check_hermitian=False).apply, dtype=complex)
    w, v = spla.eigsh(op, k=n_roots, which="SA", tol=1e-12)
    order = np.argsort(w)
    return w[order], v[:, order]
