"""
How much channel noise can be tolerated?
=========================================

The largest channel error rate for which some bounded schedule still
certifies a key, found by bisection along a family of channels.  Each call
takes several seconds.
"""

from qpferqkd.threshold import ChannelFamily, baseline_threshold, find_threshold

for family, protocol in [(ChannelFamily.symmetric(), "four-state"),
                         (ChannelFamily.symmetric(), "six-state"),
                         (ChannelFamily.xz_only(), "four-state")]:
    res = find_threshold(family, protocol)
    base = baseline_threshold(family, protocol)
    print(f"{family.kind.value:>9} {protocol:>10}: {res.threshold:.4f} with the code, "
          f"{base.threshold:.4f} without")
    print("           witness:", res.witness.schedule)
    print("          ", res.agreement()["statement"])
