#!/usr/bin/env python3
"""Full tomography chain for one prepared state.

Scans the displaced parity over the phase-space grid (pulsed displacements,
calibrated drive scale), reconstructs the density matrix by maximum
likelihood, and reports the fidelity to the ideal target.  Pass a
preparation label ('fock:1', 'fock:2', 'superposition') as the first
argument; defaults to fock:1.  Expect a few minutes of runtime per state.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from qadsim.config import config_from_mapping
from qadsim.io import export_bundle
from qadsim.pipelines import run_experiment


def main():
    prep = sys.argv[1] if len(sys.argv) > 1 else "fock:1"
    root = pathlib.Path(__file__).resolve().parents[1]
    label = prep.replace(":", "")
    out = root / "out" / f"wigner_{label}"

    scan = run_experiment(
        config_from_mapping(
            {
                "experiment": "wigner",
                "seed": 1,
                "workers": 2,
                "system": {},
                "wigner": {"preparation": prep},
            }
        )
    )
    export_bundle(scan, out)
    print(f"scan: {scan.summary['n_points']} points, "
          f"central parity {scan.summary['central_parity']:+.4f}")

    recon = run_experiment(
        config_from_mapping(
            {
                "experiment": "reconstruct",
                "seed": 1,
                "system": {},
                "reconstruct": {
                    "data_path": str(out / "wigner_data.csv"),
                    "preparation": prep,
                },
            }
        )
    )
    for path in export_bundle(recon, root / "out" / f"reconstruct_{label}"):
        print(f"wrote {path}")
    print(f"fidelity to ideal {prep}: {recon.summary['fidelity']:.4f}")
    print(f"minimum Wigner value: {recon.summary['min_wigner']:.4f}")


if __name__ == "__main__":
    main()
