"""Best achievable steady-state ||z|| under a known sinusoidal disturbance.

For each tone the controller that knows the disturbance exactly picks
``u = argmin ||G11 w + G12 u||``; no causal feedback law can do better. The
script reports that floor next to the open-loop value for the 5-bus network,
under both self-stiffness conventions, together with the energies of any
controllers found in a case-study output directory.

    python3 scripts/control_authority_bound.py [RUN_DIR]
"""

import csv
import sys
from pathlib import Path

import numpy as np

from spatialregret.lti import PowerGridParams, assemble_networked, build_power_grid, frequency_response

TONES = (8.0, 38.0)
CHANNEL = 0


def floor_for(params: PowerGridParams) -> tuple[float, float]:
    model = assemble_networked(build_power_grid(params))
    nz, nw = model.n_z, model.n_w
    ol = best = 0.0
    for om in TONES:
        G = frequency_response(model, [om])[0]
        w = G[:nz, CHANNEL]
        G12 = G[:nz, nw:]
        u, *_ = np.linalg.lstsq(G12, -w, rcond=None)
        ol += np.linalg.norm(w) ** 2 / 2
        best += np.linalg.norm(w + G12 @ u) ** 2 / 2
    return ol, best


def main(run_dir=None):
    for label, gc in (("k_i with self term (default)", None), ("pure Laplacian k_i", 0.0)):
        ol, best = floor_for(PowerGridParams(ground_coupling=gc))
        print(f"{label}: open-loop <|z|^2> = {ol:.6f}, floor = {best:.6f}, "
              f"max ||z|| reduction {100 * (1 - np.sqrt(best / ol)):.4f}%")
    if run_dir is None:
        return
    summary = Path(run_dir) / "evaluation" / "summary.csv"
    with open(summary) as fh:
        rows = list(csv.DictReader(fh))
    ol, best = floor_for(PowerGridParams())
    print(f"\ncontrollers in {run_dir}:")
    for r in rows:
        e = float(r["avg_z_norm_sq"])
        print(f"  {r['controller']:<8} <|z|^2> = {e:.6f}  ({100 * (1 - np.sqrt(e / ol)):+.2f}% vs open loop)")
    print(f"\na 10% cut below a baseline with <|z|^2> = E needs E >= {best / 0.81:.6f}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
