"""
Response time against code length
=================================

How long an n-digit DTMF response takes to cross each platform pair, with a
straight-line fit per pair.
"""

from civsim.calibration import default_calibration
from civsim.harness.sweeps import sweep_n
from civsim.simnet import default_topology

rep = sweep_n(default_topology(), default_calibration(), n_values=range(1, 9))

fits = {}
for row in rep.rows:
    fits[(row["caller"], row["callee"])] = (row["slope_ms_per_digit"], row["intercept_ms"], row["r_squared"])

for (caller, callee), (slope, intercept, r2) in fits.items():
    print(f"{caller:>10s} -> {callee:10s} {slope:7.1f} ms/digit  + {intercept:6.1f} ms   R^2 {r2:.5f}")

# digital events (sip to sip) pay no mark+space on the wire, hence the flat slope
