"""Ground-state energy and molecular fraction versus conversion strength.

Relaxes in imaginary time for a range of conversion couplings, once with a
single orbital per species and once with two atomic orbitals.

    python3 scripts/relax_scan.py --out out/relax_scan.csv
"""

import argparse
from pathlib import Path

import numpy as np

from convmctdh import IntegratorConfig, compute_rdms, default_initial_state, relax

from conversion_dynamics import build


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--N", type=int, default=4)
    parser.add_argument("--couplings", type=float, nargs="+", default=[0.0, 0.1, 0.2, 0.4])
    parser.add_argument("--dt", type=float, default=0.02)
    parser.add_argument("--out", type=Path, default=Path("out/relax_scan.csv"))
    args = parser.parse_args()

    rows = []
    for lam in args.couplings:
        row = [lam]
        for M in (1, 2):
            system = build(args.N, M, 1, lam)
            result = relax(default_initial_state(system), IntegratorConfig(dt=args.dt), system)
            fraction = 2 * compute_rdms(system.basis, result.state.C).n_molecules / args.N
            row += [result.energy, fraction]
            print(f"lambda_con = {lam:<5} M = {M}: energy {result.energy:.10f}, "
                  f"molecular fraction {fraction:.4f} ({result.iterations} steps)")
        rows.append(row)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(args.out, np.array(rows), delimiter=",",
               header="lambda_con,energy_M1,fraction_M1,energy_M2,fraction_M2", comments="")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
