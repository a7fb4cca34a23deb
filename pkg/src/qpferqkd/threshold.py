"""Tolerable channel error rates.

A point on a channel family is *feasible* when, after the 2-qubit code's
parity check and decoding, the protocol's working error distribution admits a
post-processing schedule that passes the final-step test with a positive CSS
rate.  :func:`find_threshold` bisects along the family for the largest
feasible scale.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .pauli import ErrorDistribution
from .postprocess import (DEFAULT_MAX_B, DEFAULT_MAX_P_ROUNDS, DEFAULT_R_MAX, DEFAULT_TARGET,
                          SearchResult, four_state_assumption, schedule_search)
from .qpfer import Protocol, decoded_distribution

DEFAULT_PRECISION = 1e-3

#: values quoted for the protocol, keyed by (family kind, protocol)
REFERENCE_THRESHOLDS = {
    ("symmetric", Protocol.FOUR_STATE): 0.26,
    ("symmetric", Protocol.SIX_STATE): 0.30,
    ("xz_only", Protocol.FOUR_STATE): 0.217,
}
AGREEMENT_WINDOW = 0.02


class FamilyKind(str, enum.Enum):
    SYMMETRIC = "symmetric"
    XZ_ONLY = "xz_only"
    CUSTOM = "custom"


class MonotonicityError(RuntimeError):
    """Feasibility was found again above an infeasible scale."""


@dataclass(frozen=True)
class ChannelFamily:
    """A ray of channel error distributions parametrised by the bit-flip rate.

    ``scale`` is the channel bit-flip rate ``p_x0 + p_y0``.  The symmetric
    family splits it evenly between sigma_x and sigma_y and adds the same
    sigma_z rate; ``xz_only`` has ``p_y0 = 0`` and ``p_z0 = p_x0``.  A custom
    family takes a direction ``(w_x, w_y, w_z)`` and is rescaled so that
    ``w_x + w_y = 1``.
    """

    kind: FamilyKind = FamilyKind.SYMMETRIC
    direction: tuple = (0.5, 0.5, 0.5)

    def __post_init__(self):
        kind = FamilyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is FamilyKind.SYMMETRIC:
            w = (0.5, 0.5, 0.5)
        elif kind is FamilyKind.XZ_ONLY:
            w = (1.0, 0.0, 1.0)
        else:
            w = tuple(float(v) for v in self.direction)
            if len(w) != 3 or min(w) < 0 or w[0] + w[1] <= 0:
                raise ValueError(f"custom direction needs 3 non-negative weights with w_x + w_y > 0, got {w}")
            s = w[0] + w[1]
            w = (w[0] / s, w[1] / s, w[2] / s)
        object.__setattr__(self, "direction", w)

    @classmethod
    def symmetric(cls):
        return cls(FamilyKind.SYMMETRIC)

    @classmethod
    def xz_only(cls):
        return cls(FamilyKind.XZ_ONLY)

    @classmethod
    def custom(cls, w_x, w_y, w_z):
        return cls(FamilyKind.CUSTOM, (w_x, w_y, w_z))

    @property
    def max_scale(self) -> float:
        """Largest scale that still leaves ``p_I0 >= 0``."""
        return 1.0 / sum(self.direction)

    def channel(self, scale: float) -> ErrorDistribution:
        scale = float(scale)
        if not 0.0 <= scale <= self.max_scale + 1e-15:
            raise ValueError(f"scale {scale} outside [0, {self.max_scale:.6g}] for the {self.kind.value} family")
        wx, wy, wz = self.direction
        return ErrorDistribution.from_channel(wx * scale, wy * scale, wz * scale)

    def as_dict(self) -> dict:
        return {"kind": self.kind.value, "direction": list(self.direction)}


@dataclass(frozen=True)
class SearchBounds:
    max_b: int = DEFAULT_MAX_B
    max_p_rounds: int = DEFAULT_MAX_P_ROUNDS
    r_max: int = DEFAULT_R_MAX
    target: float = DEFAULT_TARGET

    def kwargs(self) -> dict:
        return {"max_b": self.max_b, "max_p_rounds": self.max_p_rounds,
                "r_max": self.r_max, "target": self.target}


def working_distribution(d0: ErrorDistribution, protocol: Protocol | str,
                         decode: bool = True) -> ErrorDistribution:
    """Distribution that post-processing starts from for channel ``d0``.

    With ``decode=False`` the code's decoding step is skipped, which gives the
    baseline protocol on the bare channel.
    """
    d = decoded_distribution(d0)[0] if decode else d0
    if Protocol.parse(protocol) is Protocol.FOUR_STATE:
        # sigma_y is invisible with two bases, so it is folded into the two measured rates
        return four_state_assumption(d.bit_rate, d.phase_rate)
    return d


def evaluate_point(family: ChannelFamily, scale: float, protocol: Protocol | str = Protocol.FOUR_STATE,
                   bounds: SearchBounds = SearchBounds(), decode: bool = True,
                   first_feasible: bool = False) -> SearchResult | None:
    """Best certified schedule at one channel point, or ``None`` if infeasible."""
    d0 = family.channel(scale)
    try:
        working = working_distribution(d0, protocol, decode)
    except ValueError:
        # measured bit + phase rates above 1 cannot come from a p_y = 0 distribution
        return None
    return schedule_search(working,
                           first_feasible=first_feasible, **bounds.kwargs())


@dataclass
class ThresholdResult:
    family: ChannelFamily
    protocol: Protocol
    decode: bool
    threshold: float  # largest scale certified feasible
    upper: float  # smallest scale found infeasible (threshold + <= precision)
    precision: float
    witness: SearchResult | None
    samples: list  # (scale, feasible) pairs from the monotonicity scan
    evaluations: int

    @property
    def reference(self) -> float | None:
        return REFERENCE_THRESHOLDS.get((self.family.kind.value, self.protocol))

    def agreement(self) -> dict:
        """Comparison of the certified value with the quoted reference value."""
        ref = self.reference
        if ref is None or not self.decode:
            return {"reference": ref, "difference": None, "within_window": None,
                    "statement": "no reference value for this configuration"}
        diff = self.threshold - ref
        ok = abs(diff) <= AGREEMENT_WINDOW + 1e-12
        verb = "agrees with" if ok else "does not agree with"
        statement = (f"certified {self.threshold:.4f} {verb} reference {ref:.3f} "
                     f"within +/-{100 * AGREEMENT_WINDOW:.0f} pp (difference {100 * diff:+.2f} pp)")
        return {"reference": ref, "difference": diff, "within_window": ok, "statement": statement}

    def as_dict(self) -> dict:
        return {
            "family": self.family.as_dict(),
            "protocol": self.protocol.value,
            "decode": self.decode,
            "threshold": self.threshold,
            "first_infeasible": self.upper,
            "precision": self.precision,
            "witness": self.witness.as_dict() if self.witness else None,
            "samples": [[s, f] for s, f in self.samples],
            "evaluations": self.evaluations,
            "agreement": self.agreement(),
        }


def find_threshold(family: ChannelFamily, protocol: Protocol | str = Protocol.FOUR_STATE,
                   precision: float = DEFAULT_PRECISION, bounds: SearchBounds = SearchBounds(),
                   decode: bool = True, n_samples: int = 8, workers: int = 1) -> ThresholdResult:
    """Largest feasible scale along ``family``, to within ``precision``.

    Feasibility is first sampled on ``n_samples + 1`` evenly spaced scales.
    A feasible sample above an infeasible one raises
    :class:`MonotonicityError`; otherwise the bracket between the last
    feasible and first infeasible sample is bisected.  The witness schedule
    is the best schedule at the returned scale.
    """
    if precision <= 0:
        raise ValueError("precision must be positive")
    protocol = Protocol.parse(protocol)
    top = family.max_scale
    evaluations = 0

    def feasible(s):
        return evaluate_point(family, s, protocol, bounds, decode, first_feasible=True) is not None

    grid = [top * i / n_samples for i in range(n_samples + 1)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            flags = list(pool.map(feasible, grid))
    else:
        flags = [feasible(s) for s in grid]
    evaluations += len(grid)
    samples = list(zip(grid, flags))
    if not flags[0]:
        raise MonotonicityError(f"scale 0 is infeasible for {family.kind.value}/{protocol.value}")
    first_bad = next((i for i, f in enumerate(flags) if not f), None)
    if first_bad is not None and any(flags[first_bad:]):
        bad = [round(s, 6) for s, f in samples[first_bad:] if f]
        raise MonotonicityError(f"feasible again above infeasible scale {grid[first_bad]:.6g}: {bad}")

    if first_bad is None:
        lo, hi = top, top
    else:
        lo, hi = grid[first_bad - 1], grid[first_bad]
        while hi - lo > precision:
            mid = 0.5 * (lo + hi)
            evaluations += 1
            if feasible(mid):
                lo = mid
            else:
                hi = mid
    witness = evaluate_point(family, lo, protocol, bounds, decode)
    return ThresholdResult(family, protocol, decode, lo, hi, precision, witness, samples, evaluations + 1)


def baseline_threshold(family: ChannelFamily, protocol: Protocol | str = Protocol.FOUR_STATE,
                       precision: float = DEFAULT_PRECISION, bounds: SearchBounds = SearchBounds(),
                       **kwargs) -> ThresholdResult:
    """Threshold of the same machinery applied to the bare channel, without the code."""
    return find_threshold(family, protocol, precision, bounds, decode=False, **kwargs)


def check_monotone(family: ChannelFamily, protocol: Protocol | str, scales, bounds: SearchBounds = SearchBounds(),
                   decode: bool = True) -> list:
    """Feasibility at each scale; raises :class:`MonotonicityError` on a re-entry."""
    out = []
    seen_bad = None
    for s in sorted(scales):
        ok = evaluate_point(family, s, protocol, bounds, decode, first_feasible=True) is not None
        if ok and seen_bad is not None:
            raise MonotonicityError(f"feasible at {s:.6g} above infeasible {seen_bad:.6g}")
        if not ok and seen_bad is None:
            seen_bad = s
        out.append((s, ok))
    return out


def percent(x: float) -> str:
    return f"{100 * x:.2f}%" if math.isfinite(x) else "n/a"
