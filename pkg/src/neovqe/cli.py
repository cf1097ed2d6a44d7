"""Command-line entry point: ``neovqe <subcommand> --config CFG [--output DIR] [--seed N]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .pipeline import STAGES, Pipeline, StageError, load_config, plotdata, shipped_configs

EXIT_STAGE_ERROR = 2

SUBCOMMANDS = STAGES + ("run", "plotdata", "configs")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neovqe", description="NEO Hamiltonians, qubit reduction and VQE.")
    p.add_argument("--version", action="version", version=f"neovqe {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in STAGES + ("run",):
        sp = sub.add_parser(name, help=f"run the {name} stage" if name != "run" else "run every stage")
        sp.add_argument("--config", required=True, help="config path or shipped config name")
        sp.add_argument("--output", help="output directory (overrides the config)")
        sp.add_argument("--seed", type=int, help="seed for randomized initial parameters")
        if name == "run":
            sp.add_argument("--stage", choices=STAGES, help="stop after this stage")
    sp = sub.add_parser("plotdata", help="collect result directories into CSV files")
    sp.add_argument("results", nargs="+", help="result directories")
    sp.add_argument("--output", required=True, help="directory for scan.csv and traces.csv")
    sub.add_parser("configs", help="list shipped configs")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "configs":
        print("\n".join(shipped_configs()))
        return 0
    try:
        if args.command == "plotdata":
            try:
                out = plotdata(args.results, args.output)
            except Exception as err:
                raise StageError("plotdata", err) from err
            print(out)
            return 0
        try:
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
            if args.output:
                cfg.output = args.output
        except Exception as err:
            raise StageError("config", err) from err
        pipe = Pipeline(cfg, args.output)
        if args.command == "run":
            stages = STAGES if not args.stage else STAGES[:STAGES.index(args.stage) + 1]
            pipe.run(stages)
        else:
            pipe.run((args.command,))
        print(json.dumps(_summary(pipe.collect()), indent=1))
        return 0
    except StageError as err:
        print(f"error in stage {err.stage}: {err.cause}", file=sys.stderr)
        return EXIT_STAGE_ERROR


def _summary(result: dict) -> dict:
    out = {"output": result["config"]["output"]}
    if "hamiltonian" in result:
        h = result["hamiltonian"]
        out.update({k: h[k] for k in ("scf_energy", "fci_energy", "exact_qubit_ground") if k in h})
    if "reduce" in result:
        r = result["reduce"]
        out["qubits"] = r["qubits"]
        out["terms"] = r["terms"]
        out["reduced_ground"] = r["exact_ground"]
    if "vqe" in result and not result["vqe"].get("skipped"):
        out["vqe"] = {m: {"energy": v["energy"], "iterations": v["iterations"]}
                      for m, v in result["vqe"]["runs"].items()}
    if "entropy" in result:
        out["entropy"] = {k: v.get("subsystem") for k, v in result["entropy"].items() if isinstance(v, dict)}
    return out


if __name__ == "__main__":
    sys.exit(main())
