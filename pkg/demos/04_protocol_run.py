"""
A complete simulated run, honest and attacked
==============================================

Codes are prepared, sent through the channel, parity checked, decoded and
sifted.  Check bits estimate the error rates, and the run either aborts or
distils a key on the remaining bits.
"""

from qpferqkd import ErrorDistribution, Schedule
from qpferqkd.montecarlo import AttackModel, ProtocolConfig, run

channel = ErrorDistribution.from_channel(0.03, 0.03, 0.03)
config = ProtocolConfig(protocol="six-state", n_codes=400_000, channel=channel, seed=7)
report = run(config, workers=4)

print("status:", report.status)
print("counts:", report.counts)
for name, est in report.measured.items():
    print(f"  {name:>5} error {est.rate:.4f}  CI [{est.ci_low:.4f}, {est.ci_high:.4f}]  "
          f"expected {report.expected[name]:.4f}")
print("schedule:", report.schedule, f"({report.schedule_source})")
print("bits after each step:", report.step_counts)
print("key rate %.3f -> %d key bits" % (report.key_rate, report.key_length))

# an eavesdropper measuring every photon in Z and resending
attacked = run(ProtocolConfig(n_codes=100_000, channel=channel, seed=7,
                              attack=AttackModel("intercept-resend-z"), schedule=Schedule(("B",), 3)))
print("\nwith intercept-resend:", attacked.status)
print("  Z-bit error %.3f  X-bit error %.3f" % (attacked.measured.bit.rate, attacked.measured.phase.rate))
