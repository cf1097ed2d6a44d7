"""Variational driver: energy/gradient evaluation and scipy optimizers."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .circuits import Circuit
from .pauli import PauliSum
from .simulator import Observable, apply_gate, apply_generator, gate_angles, run_angles, undo_gate, zero_state

log = logging.getLogger(__name__)

OPTIMIZERS = ("cobyla", "cg", "slsqp")
GRADIENTS = ("parameter-shift", "adjoint")
MAX_EVALUATIONS = 5000
ENERGY_TOL = 1e-6


class NonFiniteEnergy(FloatingPointError):
    def __init__(self, params):
        super().__init__(f"energy evaluated to NaN/inf at parameters {np.array2string(params, precision=6)}")
        self.params = params


@dataclass
class VQEResult:
    energy: float
    parameters: np.ndarray
    iterations: int
    evaluations: int
    trace: list[float] = field(default_factory=list)
    converged: bool = False
    optimizer: str = ""
    initial_energy: float = float("nan")
    message: str = ""

    def to_dict(self, names: list[str] | None = None) -> dict:
        d = {"energy": self.energy, "iterations": self.iterations, "evaluations": self.evaluations,
             "converged": self.converged, "optimizer": self.optimizer,
             "initial_energy": self.initial_energy, "parameters": self.parameters.tolist(),
             "message": self.message}
        if names is not None:
            d["parameter_names"] = list(names)
        return d


class EnergyFunction:
    """Energy and parameter-shift gradient of a circuit against one observable."""

    def __init__(self, h: PauliSum | Observable, circuit: Circuit, initial_state=None):
        self.obs = h if isinstance(h, Observable) else Observable(h)
        if self.obs.h.n_qubits != circuit.n_qubits:
            raise ValueError("circuit and Hamiltonian qubit counts differ")
        self.circuit = circuit
        self.initial = initial_state
        self.n_evals = 0
        # gate occurrences of each parameter with their prefactors
        self._occ = [[] for _ in circuit.parameters]
        for k, g in enumerate(circuit.gates):
            if g.param is not None:
                if g.name not in ("ry", "rz", "pauli"):
                    raise ValueError(f"parameter-shift rule does not cover gate {g.name}")
                self._occ[circuit.parameter_index(g.param)].append((k, g.prefactor))

    def state(self, params) -> np.ndarray:
        return run_angles(self.circuit, gate_angles(self.circuit, params), self.initial)

    def _energy_angles(self, angles) -> float:
        self.n_evals += 1
        psi = run_angles(self.circuit, angles, self.initial)
        return self.obs.expectation(psi)

    def __call__(self, params) -> float:
        params = np.asarray(params, dtype=float)
        e = self._energy_angles(gate_angles(self.circuit, params))
        if not np.isfinite(e):
            raise NonFiniteEnergy(params)
        return e

    def gradient(self, params) -> np.ndarray:
        """Exact gradient: +-pi/2 shifts of every occurrence, scaled by its prefactor.

        The state entering each shifted gate is shared by both shifts, so it
        is computed once along a single forward sweep.
        """
        angles = gate_angles(self.circuit, params)
        gates = self.circuit.gates
        shifts: dict[int, tuple[int, float]] = {}
        for i, occ in enumerate(self._occ):
            for k, w in occ:
                shifts[k] = (i, w)
        grad = np.zeros(self.circuit.n_parameters)
        psi = zero_state(self.circuit.n_qubits) if self.initial is None else np.array(self.initial, dtype=complex)
        for k, g in enumerate(gates):
            if k in shifts:
                i, w = shifts[k]
                diff = 0.0
                for sign in (1.0, -1.0):
                    a = angles.copy()
                    a[k] += sign * np.pi / 2
                    self.n_evals += 1
                    diff += sign * self.obs.expectation(run_angles(self.circuit, a, psi, start=k))
                grad[i] += w * 0.5 * diff
            psi = apply_gate(psi, g, angles[k])
        return grad

    def adjoint_gradient(self, params) -> np.ndarray:
        """The same derivative from one forward and one backward sweep.

        For a rotation ``exp(-i a/2 P)`` the derivative of the energy with
        respect to ``a`` is ``Im <lam|P|psi>``, with ``psi`` the state after
        the gate and ``lam`` the observable applied to the final state and
        pulled back through the later gates.  Cost is linear in the gate
        count, against quadratic for the shift rule.
        """
        angles = gate_angles(self.circuit, params)
        psi = run_angles(self.circuit, angles, self.initial)
        self.n_evals += 1
        lam = self.obs.apply(psi)
        grad = np.zeros(self.circuit.n_parameters)
        for k in range(len(self.circuit.gates) - 1, -1, -1):
            g = self.circuit.gates[k]
            if g.param is not None:
                d = np.vdot(lam, apply_generator(psi, g)).imag
                grad[self.circuit.parameter_index(g.param)] += g.prefactor * d
            psi = undo_gate(psi, g, angles[k])
            lam = undo_gate(lam, g, angles[k])
        return grad


def parameter_shift_gradient(h: PauliSum, circuit: Circuit, params) -> np.ndarray:
    return EnergyFunction(h, circuit).gradient(params)


def vqe(h: PauliSum | Observable, circuit: Circuit, optimizer: str = "cobyla", initial=None,
        tol: float = ENERGY_TOL, max_evaluations: int = MAX_EVALUATIONS, initial_state=None,
        rhobeg: float = 0.1, active: list[str] | None = None,
        gradient: str = "parameter-shift") -> VQEResult:
    """Minimize the circuit energy.

    ``active`` optionally restricts optimization to a subset of parameter
    names (the rest stay at their initial values).  COBYLA stops when the
    trust region shrinks below ``tol``; CG and SLSQP use parameter-shift
    gradients (or the equivalent ``"adjoint"`` sweep, faster for long
    circuits) and stop on an energy change below ``tol``.
    """
    optimizer = optimizer.lower()
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
    if gradient not in GRADIENTS:
        raise ValueError(f"gradient must be one of {GRADIENTS}")
    f = EnergyFunction(h, circuit, initial_state)
    grad_fn = f.gradient if gradient == "parameter-shift" else f.adjoint_gradient
    x0 = np.zeros(circuit.n_parameters) if initial is None else circuit.bind(initial).copy()
    mask = np.ones(circuit.n_parameters, dtype=bool)
    if active is not None:
        mask[:] = False
        for name in active:
            mask[circuit.parameter_index(name)] = True
    trace: list[float] = []
    e0 = f(x0)
    if circuit.n_parameters == 0 or not mask.any():
        return VQEResult(e0, x0, 0, f.n_evals, [e0], True, optimizer, e0, "no free parameters")

    def full(y):
        x = x0.copy()
        x[mask] = y
        return x

    def fun(y):
        e = f(full(y))
        trace.append(e)
        return e

    def jac(y):
        return grad_fn(full(y))[mask]

    iters = {"n": 0}

    def callback(*_):
        iters["n"] += 1

    y0 = x0[mask]
    if optimizer == "cobyla":
        res = minimize(fun, y0, method="COBYLA",
                       options={"rhobeg": rhobeg, "tol": tol, "maxiter": max_evaluations})
        n_iter = res.nfev
    elif optimizer == "cg":
        res = minimize(fun, y0, jac=jac, method="CG", callback=callback,
                       options={"gtol": tol, "maxiter": max_evaluations})
        n_iter = iters["n"]
    else:
        res = minimize(fun, y0, jac=jac, method="SLSQP", callback=callback,
                       options={"ftol": tol * 1e-3, "maxiter": max_evaluations})
        n_iter = iters["n"]
    x = full(res.x)
    e = f(x)  # re-verify the reported optimum
    if trace and e > min(trace) + 1e-9:
        log.warning("optimizer returned a point above the best trace energy (%.3e)", e - min(trace))
    return VQEResult(e, x, int(n_iter), f.n_evals, trace, bool(res.success), optimizer, e0, str(res.message))
