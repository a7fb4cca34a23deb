"""
What the 2-qubit code does to a noisy channel
==============================================

Every logical qubit travels as two photons.  Bob keeps the pair only if the
two photons agree in the Z basis, then folds them back into one qubit.
"""

import numpy as np

from qpferqkd import ErrorDistribution, RngStream, decoded_distribution
from qpferqkd.montecarlo import empirical_decoded

# a symmetric channel: each photon independently suffers X, Y or Z with 13%
channel = ErrorDistribution(0.61, 0.13, 0.13, 0.13)
decoded, survival = decoded_distribution(channel)

print("channel  ", np.round(channel.as_array(), 4))
print("decoded  ", np.round(decoded.as_array(), 4))
print("survival ", round(survival, 4))

# phase errors on the photons show up as bit errors on the decoded qubit,
# while most single bit flips are caught by the parity check
print("phase-flip rate %.4f -> %.4f" % (channel.phase_rate, decoded.phase_rate))

# the same numbers from a million simulated code pairs
freq, surv, kept = empirical_decoded(channel, 10**6, RngStream(seed=1))
print("sampled  ", np.round(freq.as_array(), 4), "from", kept, "surviving pairs")

# sweep the channel strength to see where decoding helps most
for s in np.linspace(0.05, 0.35, 7):
    d, surv = decoded_distribution(ErrorDistribution.from_channel(s / 2, s / 2, s / 2))
    print(f"bit-flip rate {s:.2f}: decoded bit {d.bit_rate:.3f}  phase {d.phase_rate:.3f}  kept {surv:.3f}")
