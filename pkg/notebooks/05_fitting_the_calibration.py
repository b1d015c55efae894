"""
Fitting the latency calibration
===============================

The shipped calibration is fitted to six measured end-to-end totals. Totals
are affine in the parameters, so one probe per parameter gives the design
matrix and a bounded least-squares solve does the rest.
"""

from civsim.calibration import PARAMETERS, data_path
from civsim.harness.fit import design_matrix, fit_calibration, load_bounds, load_targets
from civsim.simnet import default_topology

topology = default_topology()
targets = load_targets(data_path("targets.json"))
bounds = load_bounds(data_path("bounds.json"))

# which parameters each target depends on
c0, A = design_matrix(topology, targets, bounds.prior_calibration())
for tg, row in zip(targets, A):
    used = [p for p, a in zip(PARAMETERS, row) if a]
    print(f"{tg.name:20s} {len(used):2d} parameters, e.g. {used[:3]}")

cal, residuals = fit_calibration(topology, targets, bounds)
for tg, sim, r in residuals:
    print(f"{tg.name:20s} target {tg.total_ms:8.0f}  simulated {sim:9.1f}  residual {r:.1e}")
print("noise SNR", cal.noise_snr_db, "dB")
