"""
The linear-optics implementation
=================================

The code states come out of a pair source; the parity check is a
polarising beam splitter that keeps only coincidences.  This script follows
one code state through the setup and then checks the whole model against
the abstract decoding.
"""

import math

from qpferqkd.optics import (click_distribution, click_to_record, equivalence_report, mass_balance, pbs_route,
                             pump_state)
from qpferqkd.qpfer import JointError

# pump rotated by pi/4, no phase shift: the Z-basis code state for bit 0
state = pump_state(math.pi / 4)
print("source amplitudes:", state.amplitudes.round(4))

# a bit flip on one photon sends both photons into the same output beam
flipped = state.apply(JointError.parse("X", "I"))
print("after X on photon 1, coincidence probability:", pbs_route(flipped).coincidence_probability)

# a phase flip passes the PBS and becomes a bit error on the record
noisy = state.apply(JointError.parse("Z", "I"))
for outcome, p in sorted(click_distribution(noisy).items(), key=lambda kv: kv[0].label()):
    rec = click_to_record(outcome)
    print(f"  {outcome.label():>10}  p={p:.3f}  ->  {rec.record_basis.value if rec.accepted else '-'}"
          f" {rec.bit if rec.accepted else ''}")
print("mass balance:", {k: round(v, 12) for k, v in mass_balance(noisy).items()})

# all code states and all 16 two-photon Pauli errors at once
for protocol in ("four-state", "six-state"):
    print(equivalence_report(protocol).summary())
