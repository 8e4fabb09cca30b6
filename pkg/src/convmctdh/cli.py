"""``solver <relax|propagate|validate> --config <path> [--out <dir>] [--threads n]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .config import ConfigError, RunConfig, build_system, integrator_config, parse_config, resolve_path
from .output import (observable_columns, observable_row, state_from_json, state_to_json, write_csv,
                     write_density)
from .propagation import (PropagationError, PropagationState, RelaxationError, default_initial_state,
                          relax, run_real_time)
from .rdm import compute_rdms
from .validation import run_checks

log = logging.getLogger("convmctdh")


def initial_state(cfg: RunConfig, system) -> PropagationState:
    state = default_initial_state(system)
    ini = cfg.initial
    if "restart" not in (ini.orbitals, ini.coefficients):
        return state
    restart = state_from_json(resolve_path(cfg, ini.restart).read_text())
    orbitals = restart.orbitals if ini.orbitals == "restart" else state.orbitals
    C = restart.C if ini.coefficients == "restart" else state.C
    if C.shape != state.C.shape or orbitals.atomic.shape != state.orbitals.atomic.shape \
            or orbitals.molecular.shape != state.orbitals.molecular.shape:
        raise ConfigError("restart file does not match the configured basis or grid")
    return PropagationState(0.0, orbitals, C)


def _write_failure(out: Path, exc: Exception) -> None:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    last = getattr(exc, "last_good", None)
    if last is not None:
        doc["last_good_time"] = last.time
    (out / "failure.json").write_text(json.dumps(doc, indent=1) + "\n")


def run_relax(cfg: RunConfig, system, out: Path) -> int:
    it = cfg.integrator
    result = relax(initial_state(cfg, system), integrator_config(cfg), system,
                   tol_energy=it.tol_energy, tol_orbital=it.tol_orbital, max_iter=it.max_iter)
    header = cfg.header_lines()
    write_csv(out / "convergence.csv", header,
              ["iteration", "tau", "energy", "delta_energy", "orbital_residual", "eigen_residual"],
              result.log)
    (out / "final_state.json").write_text(state_to_json(result.state, result.energy, cfg.as_dict()))
    if cfg.output.dump_matrices:
        _dump_matrices(system, result.state, out)
    print(f"converged after {result.iterations} steps ({result.rejected_steps} rejected): "
          f"energy = {result.energy:.12f}")
    print(f"orbital residual {result.report.orbital_residual:.3e}, "
          f"eigen residual {result.report.eigen_residual:.3e}")
    return 0


def run_propagate(cfg: RunConfig, system, out: Path) -> int:
    header = cfg.header_lines()
    x = system.grid.points
    every = cfg.output.density_every
    record_every = cfg.integrator.record_every

    def snapshot(index, state, rec):
        if every and index % every == 0:
            step = index * record_every
            write_density(out / f"density_a_{step}.csv", header, x, rec.density_a)
            write_density(out / f"density_m_{step}.csv", header, x, rec.density_m)

    records, final = run_real_time(initial_state(cfg, system), integrator_config(cfg), system,
                                   record_every, snapshot)
    b = system.basis
    write_csv(out / "observables.csv", header, observable_columns(b.M, b.M_mol),
              (observable_row(r) for r in records))
    (out / "final_state.json").write_text(state_to_json(final, records[-1].energy, cfg.as_dict()))
    if cfg.output.dump_matrices:
        _dump_matrices(system, final, out)
    print(f"propagated to t = {final.time:g}; energy {records[0].energy:.12f} -> {records[-1].energy:.12f}")
    return 0


def _dump_matrices(system, state, out: Path) -> None:
    (out / "basis.txt").write_text(system.basis.dump())
    (out / "hamiltonian.txt").write_text(system.hamiltonian(state.orbitals, check=False).dump())
    (out / "rdms.json").write_text(compute_rdms(system.basis, state.C, check=False).to_json() + "\n")


def run_validate(cfg: RunConfig, system, out: Path) -> int:
    results = run_checks(system, dt=cfg.integrator.dt)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("all checks passed" if ok else "some checks FAILED")
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="solver", description=__doc__)
    parser.add_argument("mode", choices=["relax", "propagate", "validate"])
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--out", type=Path, default=None, help="output directory (overrides [output] dir)")
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")

    try:
        cfg = parse_config(args.config).with_mode(args.mode)
        system = build_system(cfg)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    threads = args.threads
    if os.environ.get("SOLVER_REFERENCE_MODE") == "1":
        threads = 1
    out = args.out if args.out is not None else resolve_path(cfg, cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = {"relax": run_relax, "propagate": run_propagate, "validate": run_validate}[args.mode]
    with threadpool_limits(limits=threads):
        try:
            return runner(cfg, system, out)
        except (PropagationError, RelaxationError, ConfigError, FloatingPointError) as exc:
            _write_failure(out, exc)
            print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
            return 3


if __name__ == "__main__":
    sys.exit(main())
