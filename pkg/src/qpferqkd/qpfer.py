"""The 2-qubit phase-flip error-rejection (QPFER) code.

Logical qubit ``a|0> + b|1>`` is encoded as
``a(|00> + |11>)/sqrt2 + b(|00> - |11>)/sqrt2``.  Bob keeps a code only when
the two qubits agree in the Z basis, then decodes it to a single qubit.  For a
joint Pauli error ``e1 (x) e2`` that passes the parity check the decoded qubit
carries the logical error

    bit flip   <- phase flips on the two qubits differ   (z1 xor z2)
    phase flip <- both qubits were bit flipped            (x1 == x2 == 1)

which is the error table of the code and gives :func:`decoded_distribution`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .pauli import ErrorDistribution, PauliOp, RngStream

SQRT1_2 = 1.0 / np.sqrt(2.0)


class Basis(str, enum.Enum):
    Z = "Z"
    X = "X"
    Y = "Y"


class Protocol(str, enum.Enum):
    FOUR_STATE = "four-state"
    SIX_STATE = "six-state"

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"4": "four-state", "4-state": "four-state", "fourstate": "four-state",
                   "6": "six-state", "6-state": "six-state", "sixstate": "six-state"}
        return cls(aliases.get(key, key))

    @property
    def bases(self) -> tuple[Basis, ...]:
        if self is Protocol.FOUR_STATE:
            return (Basis.Z, Basis.X)
        return (Basis.Z, Basis.X, Basis.Y)


# integer codes used by the vectorised paths
BASIS_CODE = {Basis.Z: 0, Basis.X: 1, Basis.Y: 2}
BASIS_FROM_CODE = {v: k for k, v in BASIS_CODE.items()}


class ProtocolError(ValueError):
    """A state or measurement that the configured protocol variant does not allow."""


@dataclass(frozen=True)
class LogicalState:
    basis: Basis
    bit: int

    def __post_init__(self):
        object.__setattr__(self, "basis", Basis(self.basis))
        if self.bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {self.bit!r}")

    def vector(self) -> np.ndarray:
        """Single-qubit amplitudes ``(a, b)``.

        Bit 0 is the +1 eigenstate of the basis: ``|0>``, ``|+>`` and
        ``(|0> + i|1>)/sqrt2`` for Z, X and Y.
        """
        s = 1 - 2 * self.bit
        if self.basis is Basis.Z:
            return np.array([1.0, 0.0], dtype=complex) if self.bit == 0 else np.array([0.0, 1.0], dtype=complex)
        if self.basis is Basis.X:
            return SQRT1_2 * np.array([1.0, s], dtype=complex)
        return SQRT1_2 * np.array([1.0, s * 1j], dtype=complex)

    def __str__(self):
        return f"{self.basis.value}{self.bit}"


def all_logical_states(protocol: Protocol = Protocol.SIX_STATE) -> list[LogicalState]:
    return [LogicalState(b, bit) for b in Protocol.parse(protocol).bases for bit in (0, 1)]


# encoder: columns are the images of |0> and |1> over |00>, |01>, |10>, |11>
ENCODER = SQRT1_2 * np.array([[1, 1], [0, 0], [0, 0], [1, -1]], dtype=complex)


@dataclass(frozen=True)
class CodeState:
    """A transmitted 2-photon code, identified by the logical state it encodes."""

    logical: LogicalState

    @property
    def basis(self) -> Basis:
        return self.logical.basis

    @property
    def bit(self) -> int:
        return self.logical.bit

    def amplitudes(self) -> np.ndarray:
        """Amplitudes over ``|00>, |01>, |10>, |11>`` with the |00> amplitude real and positive."""
        amp = ENCODER @ self.logical.vector()
        ref = amp[np.flatnonzero(np.abs(amp) > 1e-15)[0]]
        return amp * (abs(ref) / ref)


def encode(logical: LogicalState, protocol: Protocol | str = Protocol.SIX_STATE) -> CodeState:
    protocol = Protocol.parse(protocol)
    if logical.basis not in protocol.bases:
        raise ProtocolError(f"{logical.basis.value}-basis codes are not used in the {protocol.value} protocol")
    return CodeState(logical)


class JointError(NamedTuple):
    e1: PauliOp
    e2: PauliOp

    @classmethod
    def parse(cls, e1, e2) -> "JointError":
        return cls(PauliOp.parse(e1), PauliOp.parse(e2))

    def __str__(self):
        return f"{self.e1.name}{self.e2.name}"


def all_joint_errors() -> list[JointError]:
    return [JointError(a, b) for a in PauliOp for b in PauliOp]


def parity_survives(e: JointError) -> bool:
    """True when both qubits got the same bit-flip indicator."""
    return PauliOp(e.e1).bit_flip == PauliOp(e.e2).bit_flip


class ParityRejected(ValueError):
    pass


def residual_error(e: JointError) -> PauliOp:
    """Logical error left on the decoded qubit by a surviving joint error."""
    if not parity_survives(e):
        raise ParityRejected(f"joint error {e} is rejected by the parity check")
    return PauliOp(int(residual_codes(int(e.e1), int(e.e2))))


def residual_codes(e1, e2):
    """Vectorised :func:`residual_error` on Pauli codes; survival is not checked."""
    e1 = np.asarray(e1)
    e2 = np.asarray(e2)
    return ((e1 ^ e2) >> 1) | ((e1 & 1) << 1)


def survives_codes(e1, e2):
    return ((np.asarray(e1) ^ np.asarray(e2)) & 1) == 0


def flips_basis(residual: PauliOp, basis: Basis) -> bool:
    """Whether a logical error flips a bit measured in ``basis``."""
    return bool(_flip_codes(int(residual), BASIS_CODE[Basis(basis)]))


def _flip_codes(res, basis_code):
    res = np.asarray(res)
    bit = res & 1
    phase = (res >> 1) & 1
    # Z-basis bits see X and Y, X-basis bits see Z and Y, Y-basis bits see X and Z
    return np.where(basis_code == 0, bit, np.where(basis_code == 1, phase, bit ^ phase)).astype(bool)


def decoded_distribution(d0: ErrorDistribution) -> tuple[ErrorDistribution, float]:
    """Error distribution of decoded qubits, and the parity-check survival probability.

    Assumes the two qubits of a code see independent errors drawn from ``d0``.

    >>> d, s = decoded_distribution(ErrorDistribution(0.9, 0.0, 0.0, 0.1))
    >>> round(d.p_I, 12), round(d.p_x, 12), round(s, 12)
    (0.82, 0.18, 1.0)
    """
    pI, px, py, pz = d0.as_array()
    survival = (pI + pz) ** 2 + (px + py) ** 2
    d = ErrorDistribution(
        p_I=(pI * pI + pz * pz) / survival,
        p_x=2 * pI * pz / survival,
        p_y=2 * px * py / survival,
        p_z=(px * px + py * py) / survival,
    )
    return d, float(survival)


def bob_decode_outcome(code: CodeState, e: JointError, meas_basis: Basis | str,
                       rng: RngStream, protocol: Protocol | str = Protocol.SIX_STATE):
    """Bob's post-selected result for one code hit by joint error ``e``.

    Returns ``(accepted, bob_bit)``; ``bob_bit`` is ``None`` for rejected
    codes.  With a basis mismatch the bit is a fair coin drawn from ``rng``.
    """
    meas_basis = Basis(meas_basis)
    if meas_basis not in Protocol.parse(protocol).bases:
        raise ProtocolError(f"Bob cannot measure in the {meas_basis.value} basis in this protocol")
    if not parity_survives(e):
        return False, None
    if meas_basis is not code.basis:
        return True, int(rng.generator.integers(0, 2))
    return True, code.bit ^ int(flips_basis(residual_error(e), meas_basis))


def outcome_distribution(code: CodeState, e: JointError,
                         protocol: Protocol | str = Protocol.SIX_STATE) -> dict:
    """Exact distribution of ``(accepted, record_basis, bit)`` on the abstract path.

    Bob's measurement basis is uniform over the protocol's bases.  Rejected
    mass is keyed as ``(False, None, None)``.
    """
    protocol = Protocol.parse(protocol)
    if not parity_survives(e):
        return {(False, None, None): 1.0}
    res = residual_error(e)
    w = 1.0 / len(protocol.bases)
    out = {}
    for b in protocol.bases:
        if b is code.basis:
            out[(True, b, code.bit ^ int(flips_basis(res, b)))] = w
        else:
            out[(True, b, 0)] = w / 2
            out[(True, b, 1)] = w / 2
    return out
