"""Run configuration and the staged pipeline behind the command-line interface.

Every stage writes a versioned artifact into the output directory and the
next stage reads it back, so a run can be resumed from any stage.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import pauli as pauli_io
from .pauli import PauliSum
from .analysis import TARGET_TWOLOCAL_CZ, qubit_partition_entropy, reconstruct_fock_state, resource_estimate
from .basis import BasisNotAvailable, MolecularFrame, ParticleSpecies, electronic_basis, load_basis, nuclear_basis
from .circuits import Circuit, build_twolocal
from .fcidump import export_integrals, import_integrals
from .fci import FockVector, fci_solve, single_orbital_entropies, subsystem_entropy_fci
from .fermion import SpinOrbitalLayout, build_neo_hamiltonian
from .integrals import build_integral_set
from .mapping import encode_occupation, parity_map
from .scf import ActiveSpaceSpec, SCFResult, electronic_rhf, mo_transform, neo_hf
from .simulator import apply_circuit, exact_ground_state
from .tapering import (ReductionRecord, find_z2_symmetries, project_fixed_qubits, sector_from_reference,
                       species_parity_reduction, spin_projection, taper)
from .ucc import build_neoucc_circuit, generate_excitations, transfer_parameters
from .vqe import vqe

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STAGES = ("integrals", "scf", "hamiltonian", "reduce", "vqe", "entropy", "resources")
MODULE_OF_STAGE = {"config": "cli", "integrals": "basis-integrals", "scf": "neo-scf",
                   "hamiltonian": "fock-hamiltonian", "reduce": "tapering", "vqe": "statevector-vqe",
                   "entropy": "analysis", "resources": "analysis", "plotdata": "cli"}


class StageError(RuntimeError):
    """An error raised inside a pipeline stage, tagged with the module it came from."""

    def __init__(self, stage: str, err: BaseException | str):
        self.stage = MODULE_OF_STAGE.get(stage, stage)
        self.cause = err
        super().__init__(f"[{self.stage}] {err}")


# -- configuration -------------------------------------------------------------------

def read_xyz(path: str | Path) -> list[tuple[str, tuple[float, float, float], bool]]:
    """Annotated XYZ: count line, comment line, then ``El x y z [Q]`` (Q marks a quantum centre)."""
    lines = Path(path).read_text().splitlines()
    try:
        n = int(lines[0].split()[0])
    except (IndexError, ValueError):
        raise ValueError(f"{path}: first line must be the atom count") from None
    atoms = []
    for k, line in enumerate(lines[2:2 + n], start=3):
        f = line.split()
        if len(f) not in (4, 5) or (len(f) == 5 and f[4].upper() != "Q"):
            raise ValueError(f"{path}:{k}: expected 'El x y z [Q]'")
        atoms.append((f[0], tuple(float(v) for v in f[1:4]), len(f) == 5))
    if len(atoms) != n:
        raise ValueError(f"{path}: expected {n} atoms, found {len(atoms)}")
    return atoms


@dataclass
class RunConfig:
    """Resolved pipeline configuration (see ``data/configs`` for examples)."""

    name: str = "run"
    atoms: list = field(default_factory=list)  # [element, [x, y, z], quantum]
    unit: str = "angstrom"
    charge: int = 0
    multiplicity: int = 1
    protons: dict = field(default_factory=lambda: {"n_alpha": 0, "n_beta": 0})
    basis: dict = field(default_factory=dict)  # species -> name or path
    fcidump: str | None = None
    pauli: str | None = None  # qubit Hamiltonian loaded directly, skipping integrals
    mapping: str | None = None  # layout + reduction record for ``pauli`` inputs
    active: dict = field(default_factory=dict)  # frozen_e, active_e, active_p
    reduction: dict = field(default_factory=lambda: {"parity": True, "taper": True, "spin_projection": True,
                                                     "fixed": {}})
    ansatz: dict = field(default_factory=lambda: {"kind": "ucc", "order": "SD"})
    optimizer: dict = field(default_factory=lambda: {"name": "cobyla", "tol": 1e-6, "max_evaluations": 5000,
                                                     "rhobeg": 0.1})
    init: str = "ordinary"  # ordinary | advanced | both
    output: str = "neovqe-out"
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "RunConfig":
        d = dict(d)
        d.pop("schema_version", None)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known - {"geometry"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        geo = d.pop("geometry", None)
        if geo is not None:
            if "xyz" in geo:
                d["atoms"] = [[a, list(x), q] for a, x, q in read_xyz(_resolve(geo["xyz"], base))]
            else:
                d["atoms"] = [[a["element"], list(a["position"]), bool(a.get("quantum", False))]
                              for a in geo["atoms"]]
            d.setdefault("unit", geo.get("unit", "angstrom"))
        cfg = cls(**d)
        for key in ("fcidump", "pauli", "mapping"):
            v = getattr(cfg, key)
            if v is not None:
                setattr(cfg, key, str(_resolve(v, base)))
        cfg.basis = {k: (str(_resolve(v, base)) if base and (base / v).exists() else v)
                     for k, v in cfg.basis.items()}
        defaults = cls()
        cfg.reduction = {**defaults.reduction, **cfg.reduction}
        cfg.optimizer = {**defaults.optimizer, **cfg.optimizer}
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.init not in ("ordinary", "advanced", "both"):
            raise ValueError(f"init must be ordinary, advanced or both, not {self.init!r}")
        sources = [s for s in (self.pauli, self.fcidump) if s]
        if len(sources) > 1:
            raise ValueError("give at most one of 'pauli' and 'fcidump'")
        if not sources and not self.atoms:
            raise ValueError("config needs a geometry, an FCIDUMP file or a Pauli file")
        for key in ("fcidump", "pauli", "mapping"):
            v = getattr(self, key)
            if v is not None and not Path(v).exists():
                raise FileNotFoundError(f"{key} file {v} does not exist")
        kind = self.ansatz.get("kind", "ucc")
        if kind == "ucc":
            from .ucc import parse_order_spec
            parse_order_spec(self.ansatz.get("order", "SD"))
        elif kind == "twolocal":
            if int(self.ansatz.get("d", 1)) < 1:
                raise ValueError("TwoLocal needs d >= 1")
        elif kind != "none":
            raise ValueError(f"unknown ansatz kind {kind!r}")

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **asdict(self)}


def _resolve(path: str, base: Path | None) -> Path:
    if str(path).startswith("fixture:"):
        return fixture_path(str(path)[len("fixture:"):])
    p = Path(path)
    if not p.is_absolute() and base is not None and (base / p).exists():
        return base / p
    return p


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("neovqe") / "data" / "fixtures" / name))


def shipped_configs() -> list[str]:
    root = Path(str(resources.files("neovqe") / "data" / "configs"))
    return sorted(p.stem for p in root.glob("*.json"))


def load_config(path_or_name: str | Path) -> RunConfig:
    """Read a JSON config from a path, or a shipped config by name."""
    p = Path(path_or_name)
    if not p.exists():
        p = Path(str(resources.files("neovqe") / "data" / "configs" / f"{path_or_name}.json"))
    if not p.exists():
        raise FileNotFoundError(f"no config {path_or_name!r} (shipped: {', '.join(shipped_configs())})")
    with open(p) as fh:
        data = json.load(fh)
    if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ValueError(f"config schema {data.get('schema_version')} not supported")
    base = p.parent if not str(p).startswith(str(resources.files("neovqe"))) else None
    return RunConfig.from_dict(data, base)


# -- shared helpers -------------------------------------------------------------------

def dzsnb_override(name: str) -> str:
    """The DZSNB placeholder may be replaced by a user file named in ``NEOVQE_DZSNB``."""
    if str(name).lower() == "dzsnb" and os.environ.get("NEOVQE_DZSNB"):
        return os.environ["NEOVQE_DZSNB"]
    return name


def build_system(cfg: RunConfig):
    """Frame, species and AO integral set for a geometry config."""
    atoms = [(a, tuple(x), bool(q)) for a, x, q in cfg.atoms]
    frame = MolecularFrame.from_atoms(atoms, cfg.unit)
    n_q = len(frame.quantum_centers)
    species = {"e": ParticleSpecies.electrons(frame.electron_count(cfg.charge), cfg.multiplicity)}
    bases = {"e": electronic_basis(frame, load_basis(dzsnb_override(cfg.basis.get("e", "sto-6g"))))}
    if n_q:
        na, nb = int(cfg.protons.get("n_alpha", n_q)), int(cfg.protons.get("n_beta", 0))
        if na + nb != n_q:
            raise ValueError(f"{n_q} quantum centres but {na}+{nb} protons requested")
        if "p" not in cfg.basis:
            raise BasisNotAvailable("quantum protons present but no nuclear basis given")
        species["p"] = ParticleSpecies.protons(na, nb)
        bases["p"] = nuclear_basis(frame, load_basis(dzsnb_override(cfg.basis["p"])))
    return frame, species, build_integral_set(frame, bases, species)


def active_spec(cfg: RunConfig, ints) -> ActiveSpaceSpec:
    frozen = {"e": int(cfg.active.get("frozen_e", 0))}
    active = {}
    for k in ints.species:
        sel = cfg.active.get(f"active_{k}")
        if sel is not None:
            active[k] = tuple(int(i) for i in sel)
    return ActiveSpaceSpec(frozen, active)


def layout_for(mo) -> SpinOrbitalLayout:
    blocks = []
    for k in mo.species:
        na, nb = mo.n_particles[k]
        blocks.append((k, mo.norb(k), na, nb, mo.charges.get(k, -1.0 if k == "e" else 1.0)))
    return SpinOrbitalLayout.build(blocks)


def reduction_ladder(q: PauliSum, layout: SpinOrbitalLayout, options: dict):
    """Apply the configured reduction steps; returns (stages, record).

    ``stages`` lists ``(name, operator)`` after each step, starting with the
    unreduced operator.
    """
    stages = [("none", q)]
    rec = ReductionRecord(q.n_qubits, [], q.labels)
    h = q
    ref = encode_occupation(layout.reference_occupation(), layout)
    if options.get("parity", True):
        h, rec = species_parity_reduction(h, layout, rec)
        stages.append(("parity", h))
    if options.get("taper", True):
        gens = find_z2_symmetries(h)
        if gens:
            rr = rec.reduce_bits(ref)
            gens = [g.with_eigenvalue(sector_from_reference(g, rr)) for g in gens]
            h, rec = taper(h, gens, rec)
            stages.append(("taper", h))
    if options.get("spin_projection", True):
        for b in layout.blocks:
            if len(b.spins) == 2 and b.n_beta == 0 and b.name == "p":
                h, rec = spin_projection(h, layout, rec, b.name, "beta")
                stages.append(("project", h))
    fixed = {int(k): int(v) for k, v in (options.get("fixed") or {}).items()}
    if fixed:
        h, rec = project_fixed_qubits(h, fixed, rec)
        stages.append(("fixed", h))
    return stages, rec


def minimal_h2_reduction(separation: float = 0.7414):
    """Layout and record mapping the minimal H2 NEO problem (2 electronic, 4 nuclear
    orbitals, two alpha protons) onto 4 qubits: parity reduction, inversion
    tapering and beta-proton projection.  The steps depend only on the
    Hamiltonian's symmetry pattern, not on its coefficients.
    """
    cfg = RunConfig(atoms=[["H", [0, 0, 0], True], ["H", [0, 0, separation], True]],
                    protons={"n_alpha": 2, "n_beta": 0}, basis={"e": "sto-6g", "p": "nuc-2s"})
    _, _, ints = build_system(cfg)
    res = neo_hf(ints)
    spec = ActiveSpaceSpec.full(ints)
    spec.active["p"] = _repeat_inversion_pattern(res.coefficients["p"], ints.s["p"], 2)
    mo = mo_transform(ints, res, spec)
    layout = layout_for(mo)
    q = parity_map(build_neo_hamiltonian(mo, layout), layout)
    stages, rec = reduction_ladder(q, layout, {"parity": True, "taper": True, "spin_projection": True})
    return layout, rec, stages


def _repeat_inversion_pattern(coeffs: np.ndarray, overlap: np.ndarray, n_occ: int) -> tuple[int, ...]:
    """Orbital order whose virtual block repeats the inversion characters of the occupied block.

    The nuclear orbitals of H2 come in near-degenerate g/u pairs, so their energy order is
    arbitrary and depends on the basis.  Fixing the character sequence keeps the tapering
    generator of the shipped mapping independent of that choice.
    """
    n = coeffs.shape[0]
    swap = np.eye(n)[np.r_[np.arange(n // 2, n), np.arange(n // 2)]]
    chars = np.sign(np.einsum("pk,pq,qk->k", coeffs, overlap @ swap, coeffs)).astype(int)
    order = list(range(n_occ))
    virtual = list(range(n_occ, coeffs.shape[1]))
    for k in range(len(virtual)):
        want = chars[order[k % n_occ]]
        pick = next((v for v in virtual if chars[v] == want), virtual[0])
        virtual.remove(pick)
        order.append(pick)
    return tuple(order)


def load_mapping(path: str | Path) -> tuple[SpinOrbitalLayout, ReductionRecord]:
    with open(path) as fh:
        d = json.load(fh)
    return SpinOrbitalLayout.from_dict(d["layout"]), ReductionRecord.from_dict(d["record"])


def electronic_parameter_names(circ: Circuit) -> list[str]:
    """Parameters of the electronic sub-problem: T^(e,0) amplitudes or electronic-register rotations."""
    out = []
    for p in circ.parameters:
        if p.startswith("t(") and p.split(")")[0].endswith(",0"):
            out.append(p)
        elif p.startswith(("ry[e", "rz[e")) and ",L" in p:
            out.append(p)
    return out


def build_ansatz(cfg: RunConfig, layout: SpinOrbitalLayout | None, record: ReductionRecord | None,
                 n_qubits: int, labels) -> tuple[Circuit, dict[int, int]]:
    """Circuit for the configured ansatz plus the nuclear reference bits of the reduced register."""
    a = cfg.ansatz
    labels = labels or ("e",) * n_qubits
    el = tuple(i for i in range(n_qubits) if labels[i] == "e")
    nu = tuple(i for i in range(n_qubits) if labels[i] != "e")
    ref_bits = 0
    if layout is not None:
        ref_bits = encode_occupation(layout.reference_occupation(), layout)
        if record is not None and record.steps:
            ref_bits = record.reduce_bits(ref_bits)
    nuclear_ref = {q: (ref_bits >> q) & 1 for q in nu}
    if a.get("kind", "ucc") == "ucc":
        if layout is None:
            raise ValueError("UCC ansatz needs a fermionic layout (give 'mapping' for Pauli inputs)")
        pool = generate_excitations(layout, a.get("order", "SD"))
        circ = build_neoucc_circuit(pool, layout, record)
    else:
        circ = build_twolocal(el, nu, a.get("variant", "expanded"), int(a.get("d", 1)),
                              a.get("electronic_layers"))
    return circ, nuclear_ref


def run_vqe(h: PauliSum, circ: Circuit, cfg: RunConfig, mode: str, nuclear_ref: dict[int, int]):
    """VQE with ordinary (reference, all zero) or advanced (transfer) initialization.

    Advanced: nuclear parameters are set to reproduce the nuclear reference
    (pi rotations for TwoLocal), the electronic parameters are relaxed with
    the nuclear ones frozen, and then everything is optimized.  The reported
    iteration count is that of the final joint optimization.
    """
    opt = cfg.optimizer
    kw = dict(optimizer=opt["name"], tol=float(opt["tol"]), max_evaluations=int(opt["max_evaluations"]),
              rhobeg=float(opt.get("rhobeg", 0.1)), gradient=opt.get("gradient", "parameter-shift"))
    variant = "ucc" if cfg.ansatz.get("kind", "ucc") == "ucc" else cfg.ansatz.get("variant", "expanded")
    x0 = np.zeros(circ.n_parameters)
    if variant != "ucc" or mode == "advanced":
        x0 = transfer_parameters({}, circ, variant, nuclear_ref)
    noise = float(opt.get("init_noise", 0.0))
    if noise:
        x0 = x0 + noise * np.random.default_rng(cfg.seed).standard_normal(x0.shape)
    pre = None
    if mode == "advanced":
        names = electronic_parameter_names(circ)
        if names:
            pre = vqe(h, circ, initial=x0, active=names, **kw)
            x0 = pre.parameters
    res = vqe(h, circ, initial=x0, **kw)
    return res, pre


# -- artifacts ---------------------------------------------------------------------

def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _read(path: Path, stage: str) -> dict:
    if not path.exists():
        raise StageError(stage, f"missing artifact {path.name}; run the earlier stage first")
    with open(path) as fh:
        d = json.load(fh)
    if d.get("schema_version") != SCHEMA_VERSION:
        raise StageError(stage, f"{path.name} has schema {d.get('schema_version')}, expected {SCHEMA_VERSION}")
    return d


class Pipeline:
    """Stage runner writing artifacts into ``out``."""

    def __init__(self, cfg: RunConfig, out: str | Path | None = None):
        self.cfg = cfg
        self.out = Path(out or cfg.output)
        self.out.mkdir(parents=True, exist_ok=True)

    def _artifact(self, stage: str, **data) -> dict:
        return {"schema_version": SCHEMA_VERSION, "stage": stage, "code_version": __version__, **data}

    # integrals -----------------------------------------------------------------
    def integrals(self) -> dict:
        cfg = self.cfg
        if cfg.pauli:
            info = {"source": "pauli", "path": cfg.pauli}
        elif cfg.fcidump:
            ints = import_integrals(cfg.fcidump)
            export_integrals(ints, self.out / "integrals.fcidump")
            info = {"source": "fcidump", "path": cfg.fcidump}
        else:
            frame, _, ints = build_system(cfg)
            export_integrals(ints, self.out / "integrals.fcidump")
            info = {"source": "native", "e_nuclear_repulsion": frame.nuclear_repulsion(),
                    "n_quantum_centers": len(frame.quantum_centers)}
        if not cfg.pauli:
            info.update(norb={k: ints.norb(k) for k in ints.species},
                        n_particles={k: list(v) for k, v in ints.n_particles.items()}, e_core=ints.e_core)
        art = self._artifact("integrals", **info)
        _dump(self.out / "integrals.json", art)
        return art

    # scf -------------------------------------------------------------------------
    def scf(self) -> dict:
        meta = _read(self.out / "integrals.json", "scf")
        if meta["source"] == "pauli":
            art = self._artifact("scf", skipped=True)
        else:
            ints = import_integrals(self.out / "integrals.fcidump")
            res = neo_hf(ints) if "p" in ints.species else electronic_rhf(ints)
            if not res.converged:
                log.warning("SCF did not converge in %d iterations", res.iterations)
            art = self._artifact("scf", skipped=False, result=res.to_dict())
        _dump(self.out / "scf.json", art)
        return art

    # hamiltonian -------------------------------------------------------------------
    def hamiltonian(self) -> dict:
        meta = _read(self.out / "integrals.json", "hamiltonian")
        scf_art = _read(self.out / "scf.json", "hamiltonian")
        cfg = self.cfg
        if meta["source"] == "pauli":
            q = pauli_io.load(cfg.pauli)
            layout = None
            if cfg.mapping:
                layout, rec = load_mapping(cfg.mapping)
                q = q.with_labels(rec.final_labels)
            pauli_io.save(q, self.out / "hamiltonian.pauli")
            w, _ = exact_ground_state(q)
            art = self._artifact("hamiltonian", n_qubits=q.n_qubits, terms=len(q),
                                 exact_qubit_ground=float(w[0]), reference=None)
            _dump(self.out / "hamiltonian.json", art)
            return art
        ints = import_integrals(self.out / "integrals.fcidump")
        res = SCFResult.from_dict(scf_art["result"])
        mo = mo_transform(ints, res, active_spec(cfg, ints))
        layout = layout_for(mo)
        op = build_neo_hamiltonian(mo, layout)
        info = {"scf_energy": res.total_energy}
        fv = None
        try:
            e, vecs = fci_solve(op, layout)
            fv = vecs[0]
            info.update(fci_energy=float(e[0]), fci_state=fv.to_dict(),
                        fci_entropy=subsystem_entropy_fci(fv) if "p" in layout.species_ranges() else 0.0)
        except Exception as err:  # FCI is a reference only
            log.warning("FCI reference unavailable: %s", err)
        q = parity_map(op, layout)
        pauli_io.save(q, self.out / "hamiltonian.pauli")
        _dump(self.out / "layout.json", {"schema_version": SCHEMA_VERSION, "layout": layout.to_dict()})
        art = self._artifact("hamiltonian", n_qubits=q.n_qubits, terms=len(q), **info)
        _dump(self.out / "hamiltonian.json", art)
        return art

    def _layout(self) -> SpinOrbitalLayout | None:
        p = self.out / "layout.json"
        if p.exists():
            return SpinOrbitalLayout.from_dict(_read(p, "reduce")["layout"])
        if self.cfg.mapping:
            return load_mapping(self.cfg.mapping)[0]
        return None

    # reduce ----------------------------------------------------------------------
    def reduce(self) -> dict:
        _read(self.out / "hamiltonian.json", "reduce")
        cfg = self.cfg
        layout = self._layout()
        q = pauli_io.load(self.out / "hamiltonian.pauli")
        if layout is not None and cfg.pauli is None:
            q = q.with_labels(tuple(layout.species_of_modes()))
            stages, rec = reduction_ladder(q, layout, cfg.reduction)
        else:
            # a qubit Hamiltonian given directly: only explicit projections apply
            base = load_mapping(cfg.mapping)[1] if cfg.mapping else None
            q = q.with_labels(base.final_labels) if base else q
            fixed = {int(k): int(v) for k, v in (cfg.reduction.get("fixed") or {}).items()}
            stages = [("none", q)]
            rec = ReductionRecord(q.n_qubits, [], q.labels)
            if fixed:
                h, rec = project_fixed_qubits(q, fixed, rec)
                stages.append(("fixed", h))
            if base is not None:
                rec = base.extend(rec)
        for name, h in stages:
            pauli_io.save(h, self.out / f"stage_{name}.pauli")
        final = stages[-1][1]
        w, _ = exact_ground_state(final)
        art = self._artifact("reduce", record=rec.to_dict(), stage_names=[s for s, _ in stages],
                             qubits=[h.n_qubits for _, h in stages], terms=[len(h) for _, h in stages],
                             exact_ground=float(w[0]),
                             final_hamiltonian=[[word, c.real, c.imag] for word, c in final.words()])
        _dump(self.out / "reduce.json", art)
        return art

    # vqe -------------------------------------------------------------------------
    def _vqe_target(self, red: dict):
        """Operator and record the ansatz is built for.

        For a Pauli input with a shipped mapping the variational problem is
        the full input register (the fixed-qubit projection is the reference
        energy, not the optimization target).
        """
        rec = ReductionRecord.from_dict(red["record"])
        if self.cfg.pauli:
            h = pauli_io.load(self.out / "stage_none.pauli")
            base = load_mapping(self.cfg.mapping)[1] if self.cfg.mapping else None
            return h.with_labels(base.final_labels if base else None), base
        h = pauli_io.load(self.out / f"stage_{red['stage_names'][-1]}.pauli")
        return h.with_labels(rec.final_labels), rec

    def vqe(self) -> dict:
        red = _read(self.out / "reduce.json", "vqe")
        cfg = self.cfg
        if cfg.ansatz.get("kind") == "none":
            art = self._artifact("vqe", skipped=True)
            _dump(self.out / "vqe.json", art)
            return art
        h, rec = self._vqe_target(red)
        layout = self._layout()
        try:
            circ, nuclear_ref = build_ansatz(cfg, layout, rec, h.n_qubits, h.labels)
        except Exception as err:
            raise StageError("ansatz-circuits", err) from err
        modes = ["ordinary", "advanced"] if cfg.init == "both" else [cfg.init]
        runs, traces = {}, []
        for mode in modes:
            res, pre = run_vqe(h, circ, cfg, mode, nuclear_ref)
            runs[mode] = {**res.to_dict(circ.parameters),
                          "electronic_relaxation": pre.to_dict() if pre else None}
            traces += [(mode, k + 1, e) for k, e in enumerate(res.trace)]
        (self.out / "circuit.json").write_text(circ.dumps() + "\n")
        with open(self.out / "trace.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["init", "evaluation", "energy"])
            for mode, k, e in traces:
                wr.writerow([mode, k, repr(float(e))])
        w, _ = exact_ground_state(h)
        primary = modes[-1]
        art = self._artifact("vqe", skipped=False, primary=primary, runs=runs, exact_ground=float(w[0]),
                             n_qubits=h.n_qubits, n_parameters=circ.n_parameters,
                             two_qubit_gates=circ.two_qubit_count())
        _dump(self.out / "vqe.json", art)
        return art

    # entropy ---------------------------------------------------------------------
    def entropy(self) -> dict:
        v = _read(self.out / "vqe.json", "entropy")
        red = _read(self.out / "reduce.json", "entropy")
        layout = self._layout()
        info: dict = {}
        hpath = self.out / "hamiltonian.json"
        if hpath.exists():
            hd = json.loads(hpath.read_text())
            if hd.get("fci_state"):
                fv = FockVector.from_dict(hd["fci_state"])
                sub = subsystem_entropy_fci(fv) if "p" in fv.layout.species_ranges() else 0.0
                info["fci"] = {"subsystem": sub, **_qi(single_orbital_entropies(fv))}
        if not v.get("skipped") and layout is not None and "p" in layout.species_ranges():
            h, rec = self._vqe_target(red)
            circ = Circuit.from_dict(json.loads((self.out / "circuit.json").read_text()))
            psi = apply_circuit(circ, v["runs"][v["primary"]]["parameters"])
            fv = reconstruct_fock_state(psi, rec, layout)
            labels = h.labels or ()
            nuc = tuple(i for i, lab in enumerate(labels) if lab != "e")
            info["vqe"] = {"subsystem": subsystem_entropy_fci(fv), **_qi(single_orbital_entropies(fv)),
                           "qubit_partition": qubit_partition_entropy(psi, nuc, h.n_qubits) if nuc else 0.0}
        art = self._artifact("entropy", **info)
        _dump(self.out / "entropy.json", art)
        return art

    # resources ---------------------------------------------------------------------
    def resources(self) -> dict:
        red = _read(self.out / "reduce.json", "resources")
        layout = self._layout()
        rec = ReductionRecord.from_dict(red["record"])
        stages = [(name, pauli_io.load(self.out / f"stage_{name}.pauli")) for name in red["stage_names"]]
        d = int(self.cfg.ansatz.get("d", 1)) if self.cfg.ansatz.get("kind") == "twolocal" else 1
        circuits = {}
        for n_steps, (name, h) in enumerate(stages):
            labels = h.labels or ("e",) * h.n_qubits
            el = tuple(i for i in range(h.n_qubits) if labels[i] == "e")
            nu = tuple(i for i in range(h.n_qubits) if labels[i] != "e")
            entry = {"twolocal_expanded": build_twolocal(el, nu, "expanded", d)}
            if nu and el:
                entry["twolocal_stacked"] = build_twolocal(el, nu, "stacked", d)
            if layout is not None and self.cfg.pauli is None:
                sub = ReductionRecord(rec.n_original, rec.steps[:n_steps], rec.labels)
                try:
                    entry["neoucc_sd"] = build_neoucc_circuit(generate_excitations(layout, "SD"), layout,
                                                             sub if n_steps else None)
                except Exception as err:
                    log.info("no UCC count for stage %s: %s", name, err)
            circuits[name] = entry
        rep = resource_estimate(stages, circuits)
        art = self._artifact("resources", **rep.to_dict(), twolocal_layers=d,
                             reference_twolocal_counts=TARGET_TWOLOCAL_CZ)
        _dump(self.out / "resources.json", art)
        return art

    # all -------------------------------------------------------------------------
    def run(self, stages=STAGES) -> dict:
        for s in stages:
            try:
                getattr(self, s)()
            except StageError:
                raise
            except Exception as err:
                raise StageError(s, err) from err
        return self.collect()

    def collect(self) -> dict:
        result = {"schema_version": SCHEMA_VERSION, "code_version": __version__,
                  "config": self.cfg.to_dict(), "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}
        for s in STAGES:
            p = self.out / f"{s}.json"
            if p.exists():
                d = json.loads(p.read_text())
                for k in ("schema_version", "code_version", "stage"):
                    d.pop(k, None)
                result[s] = d
        _dump(self.out / "result.json", result)
        return result


def _qi(d: dict) -> dict:
    return {"qi_electronic": d.get("QI_e", 0.0), "qi_nuclear": d.get("QI_p", 0.0), "qi_total": d["QI_total"]}


def plotdata(result_dirs: list[str | Path], out: str | Path) -> Path:
    """Flatten traces and per-run summaries (separation, energies, entropies) into CSV files."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    scan_rows, trace_rows = [], []
    for d in map(Path, result_dirs):
        res = json.loads((d / "result.json").read_text())
        atoms = res["config"]["atoms"]
        sep = float(np.linalg.norm(np.subtract(atoms[1][1], atoms[0][1]))) if len(atoms) >= 2 else float("nan")
        ham = res.get("hamiltonian", {})
        vq = res.get("vqe", {})
        ent = res.get("entropy", {})
        run = vq.get("runs", {}).get(vq.get("primary"), {}) if not vq.get("skipped", True) else {}
        scan_rows.append([res["config"]["name"], sep, ham.get("scf_energy", ""), ham.get("fci_energy", ""),
                          run.get("energy", ""), ent.get("fci", {}).get("subsystem", ""),
                          ent.get("vqe", {}).get("subsystem", "")])
        tpath = d / "trace.csv"
        if tpath.exists():
            with open(tpath) as fh:
                for row in list(csv.reader(fh))[1:]:
                    trace_rows.append([res["config"]["name"], *row])
    scan_rows.sort(key=lambda r: r[1])
    with open(out / "scan.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["name", "separation_angstrom", "scf_energy", "fci_energy", "vqe_energy",
                     "entropy_fci", "entropy_vqe"])
        wr.writerows(scan_rows)
    with open(out / "traces.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["name", "init", "evaluation", "energy"])
        wr.writerows(trace_rows)
    return out
