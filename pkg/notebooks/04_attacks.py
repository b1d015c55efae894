"""
Adversary campaigns
===================

Guessing the challenge, dropping the CIV flag, and bouncing verification
calls off innocent phones.
"""

from civsim.calibration import default_calibration
from civsim.simnet import default_topology, run_attack

topology = default_topology()
cal = default_calibration()

# 1. spoof the victim's number and guess the 4-digit response blind
st = run_attack(topology, {"strategy": "spoof-and-guess", "n_guess_digits": 4}, 50_000, seed=1, calibration=cal)
lo, hi = st.interval()
print(f"guess: {st.verified}/{st.trials} verified, rate {st.rate:.2e} in [{lo:.2e}, {hi:.2e}]")

# shorter codes are proportionally easier to guess
st2 = run_attack(topology, {"strategy": "spoof-and-guess", "n_guess_digits": 2}, 2_000, seed=1, calibration=cal)
print(f"2-digit guess rate {st2.rate:.3f} (expected 0.01)")

# 2. present the victim's number without the flag: no verification, but a warning
st = run_attack(topology, "downgrade", 1_000, seed=1, calibration=cal)
print(f"downgrade: verified {st.verified}, warned {st.warnings}/{st.rang}")

# 3. reflected DoS: spoofed calls make reflectors challenge the victim
st = run_attack(topology, {"strategy": "reflected-dos", "calls": 100}, 1, seed=1, calibration=cal)
print(f"reflection: victim filtered {st.victim_filtered}/{st.victim_missed_calls}, "
      f"CDR pairs {st.cdr_pairs}, traced to attacker {st.cdr_attributed_to_attacker}")
