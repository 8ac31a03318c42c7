"""Error of the impulse-response FRF estimate of the 5-bus G22 versus record length.

The truncated Fourier sum misses the tail of the impulse response, which
decays like rho^N_s with rho the open-loop spectral radius.

    python3 scripts/frf_truncation.py
"""

import numpy as np

from spatialregret.frf import estimate_frf, impulse_experiments
from spatialregret.grid import make_log_grid
from spatialregret.lti import PowerGridParams, assemble_networked, build_power_grid, frequency_response

TS = 0.02


def main():
    grid = make_log_grid(1e-2, np.pi / TS, 150, TS)
    for label, gc in (("k_i with self term (default)", None), ("pure Laplacian k_i", 0.0)):
        model = assemble_networked(build_power_grid(PowerGridParams(ground_coupling=gc)))
        G22 = frequency_response(model, grid)[:, model.n_z :, model.n_w :]
        rho = model.spectral_radius()
        print(f"{label}: open-loop spectral radius {rho:.6f}")
        for N_s in (1000, 4000, 10000, 20000, 30000, 40000):
            est = estimate_frf(impulse_experiments(model, N_s), grid)
            err = np.max(np.abs(est.data - G22))
            print(f"  N_s = {N_s:6d}: max |G22_hat - G22| = {err:.3e}   rho^N_s = {rho**N_s:.3e}")


if __name__ == "__main__":
    main()
