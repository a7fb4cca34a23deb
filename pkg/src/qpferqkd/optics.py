"""Exact two-photon model of the linear-optics source and Bob's detection.

Polarisation ``|0>`` is horizontal and ``|1>`` vertical.  The source emits
one of the code states into beams 1 and 2.  At Bob's PBS, horizontal photons
are transmitted and vertical ones reflected, so ``|00>`` and ``|11>`` leave
one photon in each of beams 1' and 2' while ``|01>`` and ``|10>`` bunch both
photons into one beam.  Beam 1' is measured in the ``{|+>, |->}`` basis by a
rotated PBS (D1, D2).  Beam 2' hits a 50:50 beam splitter: one arm measures Z
(D3, D4), the other X (D5, D6).  For the six-state protocol the splitter
gets a third, Y-measuring arm (D7, D8) and each arm is taken with
probability 1/3.

Bob never applies the decoding Hadamard physically; it is absorbed into the
bookkeeping of :func:`click_to_record`:

* D3/D4 (Z measurement on beam 2') is recorded as an X-basis bit,
  D5/D6 as a Z-basis bit;
* a D2 click flips the Z-record bit;
* a Y-arm outcome is flipped when D1 fired, because the Hadamard exchanges
  the two sigma_y eigenstates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .pauli import PauliOp
from .qpfer import (Basis, CodeState, JointError, Protocol, all_joint_errors, all_logical_states,
                    outcome_distribution, parity_survives)

S = 1.0 / math.sqrt(2.0)

PAULI_MATRICES = {
    PauliOp.I: np.eye(2, dtype=complex),
    PauliOp.X: np.array([[0, 1], [1, 0]], dtype=complex),
    PauliOp.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    PauliOp.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}

# projection bras of every detector
DETECTOR_STATES = {
    "D1": np.array([S, S], dtype=complex),
    "D2": np.array([S, -S], dtype=complex),
    "D3": np.array([1, 0], dtype=complex),
    "D4": np.array([0, 1], dtype=complex),
    "D5": np.array([S, S], dtype=complex),
    "D6": np.array([S, -S], dtype=complex),
    "D7": np.array([S, 1j * S], dtype=complex),
    "D8": np.array([S, -1j * S], dtype=complex),
}
BEAM1_DETECTORS = ("D1", "D2")
ARMS = {
    Basis.Z: ("D3", "D4"),
    Basis.X: ("D5", "D6"),
    Basis.Y: ("D7", "D8"),
}


def arms_for(protocol: Protocol | str) -> tuple[Basis, ...]:
    """Measurement arms behind the beam splitter (by physical basis)."""
    return Protocol.parse(protocol).bases


class OpticsError(ValueError):
    pass


@dataclass(frozen=True)
class TwoPhotonState:
    """Amplitudes over ``|00>, |01>, |10>, |11>`` of beams (1, 2)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(4)
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > 1e-12:
            raise OpticsError(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_code(cls, code: CodeState) -> "TwoPhotonState":
        return cls(code.amplitudes())

    def apply(self, e: JointError) -> "TwoPhotonState":
        op = np.kron(PAULI_MATRICES[PauliOp(e.e1)], PAULI_MATRICES[PauliOp(e.e2)])
        return TwoPhotonState(op @ self.amplitudes)

    def fidelity(self, other: "TwoPhotonState") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


U1_SETTINGS = {"0": 0.0, "pi/2": math.pi / 2, "pi/4": math.pi / 4}


def pump_state(u1_angle, u2_setting: str = "identity") -> TwoPhotonState:
    """Emission state for rotator angle ``u1`` and phase shifter ``u2``.

    A pump polarisation rotated by ``u1`` splits its amplitude between the two
    crystals, ``sin(u1)|00> + cos(u1)|11>``; ``u2 = "phase-flip"`` puts
    sigma_z on one photon, i.e. a minus sign on ``|11>``.
    """
    if isinstance(u1_angle, str):
        if u1_angle not in U1_SETTINGS:
            raise OpticsError(f"unsupported u1 setting {u1_angle!r}")
        theta = U1_SETTINGS[u1_angle]
    else:
        theta = float(u1_angle)
        if not any(abs(theta - v) < 1e-9 for v in U1_SETTINGS.values()):
            raise OpticsError(f"u1 must be one of 0, pi/2, pi/4; got {theta}")
    sign = {"identity": 1.0, "i": 1.0, "phase-flip": -1.0, "z": -1.0, "sigma_z": -1.0}.get(str(u2_setting).lower())
    if sign is None:
        raise OpticsError(f"unsupported u2 setting {u2_setting!r}")
    amp = np.array([math.sin(theta), 0.0, 0.0, sign * math.cos(theta)], dtype=complex)
    amp[np.abs(amp) < 1e-15] = 0.0
    return TwoPhotonState(amp)


class PbsOutput(NamedTuple):
    coincidence: TwoPhotonState | None  # conditional state of beams (1', 2'), renormalised
    coincidence_probability: float
    bunched_probability: float
    bunched_in_1: float  # both photons in beam 1' (from |01>)
    bunched_in_2: float  # both photons in beam 2' (from |10>)


def pbs_route(state: TwoPhotonState) -> PbsOutput:
    """Split a state into the coincidence branch and the bunched branch at the PBS."""
    a = state.amplitudes
    coinc = np.array([a[0], 0, 0, a[3]], dtype=complex)
    p_c = float(np.vdot(coinc, coinc).real)
    in1, in2 = float(abs(a[1]) ** 2), float(abs(a[2]) ** 2)
    cond = TwoPhotonState(coinc / math.sqrt(p_c)) if p_c > 1e-15 else None
    return PbsOutput(cond, p_c, in1 + in2, in1, in2)


@dataclass(frozen=True)
class ClickOutcome:
    """Fired detectors, or a bunched event (``bunched`` names the beam holding both photons)."""

    detectors: frozenset = frozenset()
    bunched: str | None = None

    @property
    def accepted(self) -> bool:
        if self.bunched is not None:
            return False
        first = [d for d in self.detectors if d in BEAM1_DETECTORS]
        second = [d for d in self.detectors if d not in BEAM1_DETECTORS]
        return len(first) == 1 and len(second) == 1

    @property
    def classification(self) -> str:
        return "accepted-two-fold" if self.accepted else "rejected"

    def label(self) -> str:
        if self.bunched is not None:
            return f"bunched-{self.bunched}"
        return "+".join(sorted(self.detectors))

    @classmethod
    def of(cls, *detectors: str) -> "ClickOutcome":
        return cls(frozenset(detectors))


def click_distribution(state: TwoPhotonState, protocol: Protocol | str = Protocol.FOUR_STATE) -> dict:
    """Exact probability of every click outcome, bunched mass included."""
    routed = pbs_route(state)
    out = {}
    if routed.bunched_in_1 > 0:
        out[ClickOutcome(bunched="1'")] = routed.bunched_in_1
    if routed.bunched_in_2 > 0:
        out[ClickOutcome(bunched="2'")] = routed.bunched_in_2
    if routed.coincidence is None:
        return out
    amp = state.amplitudes.copy()
    amp[1] = amp[2] = 0.0
    psi = amp.reshape(2, 2)
    arms = arms_for(protocol)
    w = 1.0 / len(arms)
    for d1 in BEAM1_DETECTORS:
        for basis in arms:
            for d2 in ARMS[basis]:
                bra = np.kron(DETECTOR_STATES[d1].conj(), DETECTOR_STATES[d2].conj())
                p = w * float(abs(bra @ psi.reshape(4)) ** 2)
                out[ClickOutcome.of(d1, d2)] = p
    return out


class Record(NamedTuple):
    accepted: bool
    record_basis: Basis | None
    bit: int | None


REJECTED = Record(False, None, None)

# physical arm -> basis Bob writes in his record
RECORD_BASIS = {"D3": Basis.X, "D4": Basis.X, "D5": Basis.Z, "D6": Basis.Z, "D7": Basis.Y, "D8": Basis.Y}


def click_to_record(outcome: ClickOutcome) -> Record:
    """Map an accepted two-fold click to Bob's ``(basis, bit)`` record."""
    if not outcome.accepted:
        return REJECTED
    d1 = next(d for d in outcome.detectors if d in BEAM1_DETECTORS)
    d2 = next(d for d in outcome.detectors if d not in BEAM1_DETECTORS)
    minus1 = int(d1 == "D2")
    basis = RECORD_BASIS[d2]
    if basis is Basis.X:
        bit = int(d2 == "D4")
    elif basis is Basis.Z:
        bit = minus1 ^ int(d2 == "D6")
    else:
        bit = (1 - minus1) ^ int(d2 == "D8")
    return Record(True, basis, bit)


def record_distribution(state: TwoPhotonState, protocol: Protocol | str = Protocol.FOUR_STATE) -> dict:
    """Distribution over ``(accepted, record_basis, bit)`` on the optics path."""
    out: dict = {}
    for outcome, p in click_distribution(state, protocol).items():
        rec = tuple(click_to_record(outcome))
        out[rec] = out.get(rec, 0.0) + p
    return out


def mass_balance(state: TwoPhotonState, protocol: Protocol | str = Protocol.FOUR_STATE) -> dict:
    """Bunched, accepted and other rejected probability mass of one input state."""
    bunched = accepted = other = 0.0
    for outcome, p in click_distribution(state, protocol).items():
        if outcome.bunched is not None:
            bunched += p
        elif outcome.accepted:
            accepted += p
        else:
            other += p
    return {"bunched": bunched, "accepted": accepted, "rejected_other": other}


class SweepRow(NamedTuple):
    code_state: str
    e1: str
    e2: str
    outcome: str
    p_optics: float
    p_abstract: float
    deviation: float


def _outcome_label(rec) -> str:
    accepted, basis, bit = rec
    return "rejected" if not accepted else f"{Basis(basis).value}:{bit}"


@dataclass
class EquivalenceReport:
    protocol: Protocol
    rows: list
    max_deviation: float

    def summary(self) -> str:
        n_codes = len({r.code_state for r in self.rows})
        n_err = len({(r.e1, r.e2) for r in self.rows})
        return (f"optics-check {self.protocol.value}: {n_codes} code states x {n_err} joint errors, "
                f"max deviation {self.max_deviation:.3e}")


def equivalence_report(protocol: Protocol | str = Protocol.FOUR_STATE) -> EquivalenceReport:
    """Compare optics-path and abstract-path record distributions on the full sweep."""
    protocol = Protocol.parse(protocol)
    rows = []
    worst = 0.0
    for logical in all_logical_states(protocol):
        code = CodeState(logical)
        state = TwoPhotonState.from_code(code)
        for e in all_joint_errors():
            optics = record_distribution(state.apply(e), protocol)
            abstract = outcome_distribution(code, e, protocol)
            keys = sorted(set(optics) | set(abstract), key=_outcome_label)
            for k in keys:
                po, pa = optics.get(k, 0.0), abstract.get(k, 0.0)
                dev = abs(po - pa)
                worst = max(worst, dev)
                rows.append(SweepRow(str(logical), e.e1.name, e.e2.name, _outcome_label(k), po, pa, dev))
    return EquivalenceReport(protocol, rows, worst)


def coincidence_matches_parity(protocol: Protocol | str = Protocol.SIX_STATE) -> bool:
    """True when PBS coincidence equals the parity-check predicate on the full sweep."""
    for logical in all_logical_states(protocol):
        state = TwoPhotonState.from_code(CodeState(logical))
        for e in all_joint_errors():
            p = pbs_route(state.apply(e)).coincidence_probability
            if (abs(p - 1.0) < 1e-12) != parity_survives(e) or not (abs(p) < 1e-12 or abs(p - 1) < 1e-12):
                return False
    return True
