"""Pauli error classes, error distributions and seeded random streams.

Paulis are stored modulo global phase as a 2-bit code ``(x, z)``: bit 0 marks
a bit flip and bit 1 a phase flip, so ``I=0, X=1, Z=2, Y=3`` and composition
is a plain XOR.  The vectorised helpers operate on integer arrays of these
codes and are what the Monte Carlo engine uses.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

#: absolute tolerance used when validating probability vectors
PROB_ATOL = 1e-12


class PauliOp(enum.IntEnum):
    I = 0
    X = 1
    Z = 2
    Y = 3

    @property
    def bit_flip(self) -> bool:
        return bool(self & 1)

    @property
    def phase_flip(self) -> bool:
        return bool(self & 2)

    @classmethod
    def from_flags(cls, bit_flip, phase_flip) -> "PauliOp":
        return cls(int(bool(bit_flip)) | (int(bool(phase_flip)) << 1))

    @classmethod
    def parse(cls, value) -> "PauliOp":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            return cls[value.strip().upper()]
        return cls(int(value))


def compose(a: PauliOp, b: PauliOp) -> PauliOp:
    """Product of two Paulis with the global phase dropped."""
    return PauliOp(int(a) ^ int(b))


def has_bit_flip(p: PauliOp) -> bool:
    return PauliOp(p).bit_flip


def has_phase_flip(p: PauliOp) -> bool:
    return PauliOp(p).phase_flip


# sampling order matches the (p_I, p_x, p_y, p_z) field order
_CODES_BY_FIELD = np.array([PauliOp.I, PauliOp.X, PauliOp.Y, PauliOp.Z], dtype=np.int8)


class InvalidDistribution(ValueError):
    pass


@dataclass(frozen=True)
class ErrorDistribution:
    """Probabilities of the four single-qubit Pauli errors.

    The components must lie in ``[0, 1]`` and sum to one within
    :data:`PROB_ATOL`.  Nothing is renormalised silently.
    """

    p_I: float
    p_x: float
    p_y: float
    p_z: float

    def __post_init__(self):
        vals = (self.p_I, self.p_x, self.p_y, self.p_z)
        for name, v in zip(("p_I", "p_x", "p_y", "p_z"), vals):
            v = float(v)
            if not np.isfinite(v):
                raise InvalidDistribution(f"{name} is not finite: {v}")
            # tiny negative round-off from recurrences is clipped, anything else is an error
            if v < -PROB_ATOL or v > 1 + PROB_ATOL:
                raise InvalidDistribution(f"{name}={v} outside [0, 1]")
            object.__setattr__(self, name, min(max(v, 0.0), 1.0))
        total = sum(vals)
        if abs(total - 1.0) > PROB_ATOL:
            raise InvalidDistribution(f"components sum to {total!r}, expected 1")

    @classmethod
    def from_array(cls, arr) -> "ErrorDistribution":
        a = np.asarray(arr, dtype=float)
        if a.shape != (4,):
            raise InvalidDistribution(f"expected 4 components, got shape {a.shape}")
        return cls(*(float(v) for v in a))

    @classmethod
    def from_channel(cls, p_x: float, p_y: float, p_z: float) -> "ErrorDistribution":
        """Build from the three error rates, with ``p_I`` as the remainder."""
        return cls(1.0 - p_x - p_y - p_z, p_x, p_y, p_z)

    @classmethod
    def noiseless(cls) -> "ErrorDistribution":
        return cls(1.0, 0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.p_I, self.p_x, self.p_y, self.p_z])

    def as_dict(self) -> dict:
        return {"p_I": self.p_I, "p_x": self.p_x, "p_y": self.p_y, "p_z": self.p_z}

    def prob(self, op: PauliOp) -> float:
        op = PauliOp(op)
        return {PauliOp.I: self.p_I, PauliOp.X: self.p_x,
                PauliOp.Y: self.p_y, PauliOp.Z: self.p_z}[op]

    @property
    def bit_rate(self) -> float:
        return self.p_x + self.p_y

    @property
    def phase_rate(self) -> float:
        return self.p_z + self.p_y

    def swap_xz(self) -> "ErrorDistribution":
        return ErrorDistribution(self.p_I, self.p_z, self.p_y, self.p_x)

    def allclose(self, other: "ErrorDistribution", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.as_array(), other.as_array(), rtol=0, atol=atol))


def flip_rates(d: ErrorDistribution) -> tuple[float, float]:
    """Return ``(bit_rate, phase_rate) = (p_x + p_y, p_z + p_y)``."""
    return d.p_x + d.p_y, d.p_z + d.p_y


class RngStream:
    """Reproducible random stream addressed by ``(seed, substream)``.

    Backed by numpy's counter-based Philox generator; the substream index is
    fed through :class:`numpy.random.SeedSequence` as a spawn key, so any
    number of workers can draw independent, reproducible streams.
    """

    def __init__(self, seed: int, substream: int | tuple = 0):
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        key = substream if isinstance(substream, tuple) else (int(substream),)
        self.substream = key
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=key)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngStream":
        """Independent stream nested under this one."""
        return RngStream(self.seed, self.substream + (int(index),))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, substream={self.substream})"


def sample_error(d: ErrorDistribution, rng: RngStream) -> PauliOp:
    return PauliOp(int(sample_errors(d, rng, 1)[0]))


def sample_errors(d: ErrorDistribution, rng: RngStream, size: int) -> np.ndarray:
    """Draw ``size`` Pauli codes (int8 array) i.i.d. from ``d``."""
    cdf = np.cumsum(d.as_array())
    u = rng.generator.random(size)
    # degenerate components must never be hit, so compare against the cdf with strict '<'
    idx = np.searchsorted(cdf, u, side="right")
    idx = np.minimum(idx, 3)
    # skip zero-probability trailing entries hit by round-off of the last cdf value
    probs = d.as_array()
    if np.any(probs[idx] == 0):
        last = int(np.flatnonzero(probs > 0)[-1])
        idx = np.where(probs[idx] == 0, last, idx)
    return _CODES_BY_FIELD[idx]


def bit_flags(codes) -> np.ndarray:
    return (np.asarray(codes) & 1).astype(bool)


def phase_flags(codes) -> np.ndarray:
    return (np.asarray(codes) & 2).astype(bool)
