"""
Searching a two-way post-processing schedule
=============================================

B-steps compare parities of random bit pairs and drop disagreeing pairs.
P-steps replace groups of bits by their parity.  A final large parity step
must push both residual error rates low enough for a CSS code.
"""

from qpferqkd import ErrorDistribution, Schedule, schedule_search
from qpferqkd.postprocess import apply_schedule, final_step_feasible, four_state_assumption
from qpferqkd.threshold import working_distribution

# without noise the final step alone is enough
best = schedule_search(ErrorDistribution.noiseless())
print("noiseless:", best.schedule, "rate", best.key_rate)
print("  r=5 passes?", final_step_feasible(ErrorDistribution.noiseless(), 5).feasible)

# a noisy working distribution needs several rounds first
channel = ErrorDistribution.from_channel(0.1, 0.1, 0.1)
working = working_distribution(channel, "six-state")
best = schedule_search(working)
print("20% symmetric, six-state:", best.schedule)
print("  residual bit %.2e  phase %.2e  CSS rate %.3f" % (best.residual.e_bit, best.residual.e_phase,
                                                           best.key_rate))
print("  final key bits per sent code: %.2e" % best.key_fraction)

# walk through the schedule one step at a time
trace = apply_schedule(working, best.schedule)
for step, d in zip(["start"] + best.schedule.tokens(), trace.dists):
    print(f"  {step:>5}: bit {d.bit_rate:.4f}  phase {d.phase_rate:.4f}")

# hand-written schedules can be evaluated the same way
mine = Schedule.parse("B B B B final_r=40")
res = apply_schedule(working, mine).residual
print("hand schedule: bit %.2e  phase %.2e" % (res.e_bit, res.e_phase))

# without the code, the same raw error rates leave nothing to work with
print("no decoding, four-state:", schedule_search(four_state_assumption(0.2, 0.2)))
