"""Expensive results computed once per test session, and the acceptance log."""
import functools
import time

from qpferqkd.threshold import ChannelFamily, find_threshold

ACCEPTANCE_LOG: list = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE_LOG.append((criterion, bool(ok), detail))
    return ok


@functools.lru_cache(maxsize=None)
def timed_threshold(kind: str, protocol: str, decode: bool = True):
    family = ChannelFamily.symmetric() if kind == "symmetric" else ChannelFamily.xz_only()
    t0 = time.perf_counter()
    res = find_threshold(family, protocol, decode=decode)
    return res, time.perf_counter() - t0


def threshold(kind: str, protocol: str, decode: bool = True):
    return timed_threshold(kind, protocol, decode)[0]
