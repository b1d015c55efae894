"""
Honest calls across platforms
=============================

Run one verified call for every caller/callee platform pair and look at
where the time goes.
"""

from civsim.calibration import default_calibration
from civsim.harness.sweeps import PAIRS
from civsim.simnet import Scenario, default_topology, run_scenario

topology = default_topology()
cal = default_calibration()

# each row: which variant the callee picked, total added latency, and the four parts
print(f"{'pair':28s} {'variant':18s} {'total s':>8s}  setup / challenge / response setup / response")
for caller, callee in PAIRS:
    m, _ = run_scenario(topology, Scenario(caller, callee), cal)
    b = m.breakdown
    print(f"{caller + ' -> ' + callee:28s} {m.variant:18s} {m.total_ms / 1000:8.2f}  "
          f"{b.verification_setup_ms:7.0f} {b.challenge_transmit_ms:7.0f} "
          f"{b.response_setup_ms:7.0f} {b.response_transmit_ms:7.0f}")

# SIP phones can use every variant, so compare them head to head
from civsim.civ import Variant

for v in (Variant.CLI_DTMF, Variant.DTMF_2SETUP, Variant.CLI_CLI, Variant.DTMF_3SETUP):
    m, _ = run_scenario(topology, Scenario("sip-a", "sip-b", variant=v), cal)
    print(f"sip -> sip  {v.value:18s} {m.total_ms / 1000:.2f} s")

# the event trace of a single run, as written by `civsim run --out`
m, trace = run_scenario(topology, Scenario("cellular-a", "landline-b"), cal)
for t_us, endpoint, event, payload in trace:
    print(f"{t_us / 1000:10.1f} ms  {endpoint:12s} {event:14s} {payload}")
