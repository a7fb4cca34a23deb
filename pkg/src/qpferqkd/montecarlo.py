"""Bit-level simulation of the whole protocol.

Codes are generated and decoded in fixed-size blocks, each block drawing from
its own random substream, so results do not depend on how many workers run
the blocks.  Sifting, sampling of check bits and every post-processing step
use further dedicated substreams.

Eavesdropping is per photon.  Measuring a photon in the Z basis and resending
the outcome acts on the photon as the Pauli channel ``{I: 1/2, Z: 1/2}``;
doing it in a random Z or X basis acts as ``{I: 1/2, Z: 1/4, X: 1/4}``.  Both
attacks are therefore simulated exactly as Pauli errors composed with the
channel noise.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .pauli import ErrorDistribution, RngStream, sample_errors
from .postprocess import (ResidualRates, Schedule, apply_schedule, bstep_strings, css_key_rate,
                          four_state_assumption, pstep_strings, schedule_search)
from .qpfer import (BASIS_CODE, BASIS_FROM_CODE, Basis, Protocol, ProtocolError, _flip_codes,
                    decoded_distribution, residual_codes, survives_codes)
from .threshold import SearchBounds

DEFAULT_BLOCK_SIZE = 1 << 16
DEFAULT_CONFIDENCE = 0.99

# substream namespaces
_STREAM_BLOCK, _STREAM_SIFT, _STREAM_POST = 1, 2, 3


class AttackKind(str, enum.Enum):
    NONE = "none"
    INTERCEPT_RESEND_Z = "intercept-resend-z"
    INTERCEPT_RESEND_BB84 = "intercept-resend-bb84"
    CUSTOM_PAULI = "custom-pauli"


@dataclass(frozen=True)
class AttackModel:
    kind: AttackKind = AttackKind.NONE
    pauli: ErrorDistribution | None = None  # only for CUSTOM_PAULI

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        if self.kind is AttackKind.CUSTOM_PAULI and self.pauli is None:
            raise ValueError("a custom Pauli attack needs its error distribution")

    def per_photon(self) -> ErrorDistribution | None:
        if self.kind is AttackKind.NONE:
            return None
        if self.kind is AttackKind.INTERCEPT_RESEND_Z:
            return ErrorDistribution(0.5, 0.0, 0.0, 0.5)
        if self.kind is AttackKind.INTERCEPT_RESEND_BB84:
            return ErrorDistribution(0.5, 0.25, 0.0, 0.25)
        return self.pauli

    def as_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.pauli is not None:
            out["pauli"] = self.pauli.as_dict()
        return out


def default_basis_mix(protocol: Protocol) -> dict:
    if protocol is Protocol.FOUR_STATE:
        return {Basis.Z: 0.75, Basis.X: 0.25}
    return {Basis.Z: 0.5, Basis.X: 0.25, Basis.Y: 0.25}


class ConfigError(ValueError):
    pass


@dataclass
class ProtocolConfig:
    """Everything that determines a simulated run.

    ``z_check_fraction=None`` announces as many random Z-bits as there are
    X-bits.  ``abort_tolerance`` is the allowed excess of a measured error
    rate over its expected value, on top of the confidence-interval
    half-width.  ``schedule`` is a :class:`Schedule` or ``"search"``.
    """

    protocol: Protocol = Protocol.FOUR_STATE
    n_codes: int = 100_000
    basis_mix: dict | None = None
    channel: ErrorDistribution = field(default_factory=ErrorDistribution.noiseless)
    attack: AttackModel = field(default_factory=AttackModel)
    loss: float = 0.0
    z_check_fraction: float | None = None
    abort_tolerance: float = 0.0
    confidence: float = DEFAULT_CONFIDENCE
    schedule: Schedule | str = "search"
    bounds: SearchBounds = field(default_factory=SearchBounds)
    seed: int = 0
    block_size: int = DEFAULT_BLOCK_SIZE

    def __post_init__(self):
        self.protocol = Protocol.parse(self.protocol)
        if self.basis_mix is None:
            self.basis_mix = default_basis_mix(self.protocol)
        self.basis_mix = {Basis(k): float(v) for k, v in self.basis_mix.items()}
        self.validate()

    def validate(self):
        if self.n_codes < 1:
            raise ConfigError("n_codes must be positive")
        if any(v < 0 for v in self.basis_mix.values()) or abs(sum(self.basis_mix.values()) - 1) > 1e-9:
            raise ConfigError(f"basis mix must be non-negative and sum to 1: {self.basis_mix}")
        for b, v in self.basis_mix.items():
            if v > 0 and b not in self.protocol.bases:
                raise ConfigError(f"{b.value}-basis codes are not allowed in the {self.protocol.value} protocol")
        if not 0 <= self.loss < 1:
            raise ConfigError("loss must be in [0, 1)")
        if self.z_check_fraction is not None and not 0 < self.z_check_fraction < 1:
            raise ConfigError("z_check_fraction must be in (0, 1)")
        if not 0 < self.confidence < 1:
            raise ConfigError("confidence must be in (0, 1)")
        if self.abort_tolerance < 0:
            raise ConfigError("abort_tolerance must be non-negative")
        if self.block_size < 1:
            raise ConfigError("block_size must be positive")
        if isinstance(self.schedule, str) and self.schedule != "search":
            self.schedule = Schedule.parse(self.schedule)

    def as_dict(self) -> dict:
        return {
            "protocol": self.protocol.value,
            "n_codes": self.n_codes,
            "basis_mix": {b.value: v for b, v in self.basis_mix.items()},
            "channel": self.channel.as_dict(),
            "attack": self.attack.as_dict(),
            "loss": self.loss,
            "z_check_fraction": self.z_check_fraction,
            "abort_tolerance": self.abort_tolerance,
            "confidence": self.confidence,
            "schedule": self.schedule if isinstance(self.schedule, str) else self.schedule.as_dict(),
            "bounds": self.bounds.kwargs(),
            "seed": self.seed,
            "block_size": self.block_size,
        }


# ---------------------------------------------------------------------------
# steps 1-2: preparation, channel, parity check and decoding


def _exact_counts(n: int, mix: dict) -> dict:
    """Split ``n`` into per-basis counts by largest remainder."""
    keys = sorted(mix, key=lambda b: BASIS_CODE[b])
    raw = np.array([n * mix[k] for k in keys])
    counts = np.floor(raw).astype(int)
    rest = n - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:rest]] += 1
    return dict(zip(keys, counts))


def _simulate_block(config: ProtocolConfig, index: int, size: int) -> dict:
    rng = RngStream(config.seed, (_STREAM_BLOCK, index))
    g = rng.generator
    counts = _exact_counts(size, config.basis_mix)
    prep = np.concatenate([np.full(c, BASIS_CODE[b], dtype=np.int8) for b, c in counts.items()])
    prep = g.permutation(prep)
    alice = g.integers(0, 2, size, dtype=np.uint8)

    e1 = sample_errors(config.channel, rng.child(1), size)
    e2 = sample_errors(config.channel, rng.child(2), size)
    eve = config.attack.per_photon()
    if eve is not None:
        e1 = e1 ^ sample_errors(eve, rng.child(3), size)
        e2 = e2 ^ sample_errors(eve, rng.child(4), size)

    accepted = survives_codes(e1, e2)
    if config.loss > 0:
        arrived = g.random((2, size)) >= config.loss
        accepted &= arrived[0] & arrived[1]
    bases = np.array([BASIS_CODE[b] for b in config.protocol.bases], dtype=np.int8)
    meas = bases[g.integers(0, bases.size, size)]
    res = residual_codes(e1, e2).astype(np.int8)
    coin = g.integers(0, 2, size, dtype=np.uint8)
    flip = _flip_codes(res, meas).astype(np.uint8)
    bob = np.where(meas == prep, alice ^ flip, coin).astype(np.uint8)
    return {"prep": prep, "meas": meas, "alice": alice, "bob": bob,
            "accepted": accepted, "residual": res}


@dataclass
class SiftRecords:
    """Per-code records, in transmission order."""

    prep: np.ndarray
    meas: np.ndarray
    alice: np.ndarray
    bob: np.ndarray
    accepted: np.ndarray
    residual: np.ndarray  # logical Pauli code per decoded qubit (simulation bookkeeping)
    checked: np.ndarray | None = None

    def __len__(self):
        return self.prep.size

    @property
    def sifted(self) -> np.ndarray:
        return self.accepted & (self.prep == self.meas)

    def of_basis(self, basis: Basis) -> np.ndarray:
        return self.sifted & (self.prep == BASIS_CODE[basis])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "prep_basis", "meas_basis", "alice_bit", "bob_bit", "accepted"])
        names = np.array([BASIS_FROM_CODE[i].value for i in range(3)])
        prep, meas = names[self.prep], names[self.meas]
        for i in range(len(self)):
            acc = bool(self.accepted[i])
            w.writerow([i, prep[i], meas[i] if acc else "", int(self.alice[i]),
                        int(self.bob[i]) if acc else "", int(acc)])
        return buf.getvalue()


def simulate_codes(config: ProtocolConfig, workers: int = 1) -> SiftRecords:
    n, m = config.n_codes, config.block_size
    sizes = [min(m, n - k) for k in range(0, n, m)]
    jobs = list(enumerate(sizes))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda j: _simulate_block(config, *j), jobs))
    else:
        blocks = [_simulate_block(config, *j) for j in jobs]
    return SiftRecords(**{k: np.concatenate([b[k] for b in blocks]) for k in blocks[0]})


def empirical_decoded(d0: ErrorDistribution, n_codes: int, rng: RngStream) -> tuple[ErrorDistribution, float, int]:
    """Sample ``n_codes`` joint errors and return the decoded error frequencies.

    Returns ``(frequencies, survival fraction, survivors)``; the Monte Carlo
    counterpart of :func:`decoded_distribution`.
    """
    e1 = sample_errors(d0, rng.child(1), n_codes)
    e2 = sample_errors(d0, rng.child(2), n_codes)
    ok = survives_codes(e1, e2)
    counts = np.bincount(residual_codes(e1[ok], e2[ok]), minlength=4)
    n_ok = int(ok.sum())
    f = counts / max(n_ok, 1)
    # Pauli codes are I=0, X=1, Z=2, Y=3
    freq = ErrorDistribution.from_array([f[0], f[1], f[3], f[2]]) if n_ok else ErrorDistribution.noiseless()
    return freq, n_ok / n_codes, n_ok


# ---------------------------------------------------------------------------
# step 3: check bits, estimation, abort


@dataclass(frozen=True)
class RateEstimate:
    errors: int
    n: int
    rate: float
    ci_low: float
    ci_high: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def as_dict(self) -> dict:
        return {"errors": self.errors, "n": self.n, "rate": self.rate, "ci": [self.ci_low, self.ci_high]}


def binomial_estimate(errors: int, n: int, confidence: float = DEFAULT_CONFIDENCE) -> RateEstimate:
    """Error rate with a Wilson score interval."""
    if n <= 0:
        raise ValueError("cannot estimate a rate from an empty check set")
    ci = stats.binomtest(int(errors), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return RateEstimate(int(errors), int(n), errors / n, float(ci.low), float(ci.high))


@dataclass
class MeasuredRates:
    """Check-bit estimates: Z-bits give the bit-flip rate, X-bits the phase-flip rate.

    In the six-state protocol Y-bits (flipped by sigma_x and sigma_z) separate
    out ``p_y``.
    """

    bit: RateEstimate
    phase: RateEstimate
    y: RateEstimate | None = None

    def items(self):
        out = [("bit", self.bit), ("phase", self.phase)]
        if self.y is not None:
            out.append(("y", self.y))
        return out

    def working_distribution(self, protocol: Protocol) -> ErrorDistribution:
        """Distribution handed to post-processing; raises ``ValueError`` when inconsistent."""
        if protocol is Protocol.FOUR_STATE or self.y is None:
            return four_state_assumption(self.bit.rate, self.phase.rate)
        # e_Z = p_x + p_y, e_X = p_z + p_y, e_Y = p_x + p_z
        p_y = max(0.0, 0.5 * (self.bit.rate + self.phase.rate - self.y.rate))
        p_x = max(0.0, self.bit.rate - p_y)
        p_z = max(0.0, self.phase.rate - p_y)
        if p_x + p_y + p_z > 1.0:
            raise ValueError("measured rates are not consistent with any error distribution")
        return ErrorDistribution.from_channel(p_x, p_y, p_z)

    def as_dict(self) -> dict:
        return {k: v.as_dict() for k, v in self.items()}


def select_check_bits(records: SiftRecords, config: ProtocolConfig) -> SiftRecords:
    """Mark every X- and Y-bit and a random subset of Z-bits as announced."""
    rng = RngStream(config.seed, (_STREAM_SIFT,))
    checked = records.of_basis(Basis.X) | records.of_basis(Basis.Y)
    z_idx = np.flatnonzero(records.of_basis(Basis.Z))
    if config.z_check_fraction is None:
        k = int(records.of_basis(Basis.X).sum())
    else:
        k = int(round(config.z_check_fraction * z_idx.size))
    k = min(k, z_idx.size)
    pick = rng.generator.choice(z_idx, size=k, replace=False) if k else np.array([], dtype=int)
    checked = checked.copy()
    checked[pick] = True
    records.checked = checked
    return records


def estimate_rates(records: SiftRecords, confidence: float = DEFAULT_CONFIDENCE,
                   protocol: Protocol = Protocol.FOUR_STATE) -> MeasuredRates:
    if records.checked is None:
        raise ValueError("no check bits selected")
    err = records.alice != records.bob

    def est(basis):
        mask = records.of_basis(basis) & records.checked
        return binomial_estimate(int(err[mask].sum()), int(mask.sum()), confidence)

    y = est(Basis.Y) if Protocol.parse(protocol) is Protocol.SIX_STATE else None
    return MeasuredRates(bit=est(Basis.Z), phase=est(Basis.X), y=y)


def expected_rates(channel: ErrorDistribution) -> dict:
    """Check-bit error rates predicted by the decoding transform for ``channel``."""
    d, _ = decoded_distribution(channel)
    return {"bit": d.bit_rate, "phase": d.phase_rate, "y": d.p_x + d.p_z}


def abort_decision(measured: MeasuredRates, expected: dict, tolerance: float = 0.0) -> bool:
    """Abort when, for some check rate, even the lower end of its confidence
    interval lies more than ``tolerance`` above the expected value."""
    return any(est.ci_low - expected[name] > tolerance for name, est in measured.items())


# ---------------------------------------------------------------------------
# steps 4-6


@dataclass
class RunReport:
    config: dict
    counts: dict
    measured: MeasuredRates | None
    expected: dict
    abort: bool
    feasible: bool
    schedule: Schedule | None
    schedule_source: str
    step_counts: list
    residual_measured: dict | None
    residual_expected: dict | None
    residual_certified: dict | None
    key_rate: float
    final_bits: int
    key_length: int
    records: SiftRecords | None = field(default=None, repr=False)

    @property
    def status(self) -> str:
        if self.abort:
            return "abort"
        return "ok" if self.feasible else "infeasible"

    def as_dict(self) -> dict:
        rates = self.measured.as_dict() if self.measured else None
        return {
            "status": self.status,
            "counts": self.counts,
            "rates": {k: v["rate"] for k, v in rates.items()} if rates else None,
            "ci": {k: v["ci"] for k, v in rates.items()} if rates else None,
            "check_counts": {k: [v["errors"], v["n"]] for k, v in rates.items()} if rates else None,
            "expected": self.expected,
            "abort": self.abort,
            "feasible": self.feasible,
            "schedule": self.schedule.as_dict() if self.schedule else None,
            "schedule_source": self.schedule_source,
            "step_counts": self.step_counts,
            "residual": {
                "measured": self.residual_measured,
                "expected": self.residual_expected,
                "certified": self.residual_certified,
            },
            "key_rate": self.key_rate,
            "final_bits": self.final_bits,
            "key_length": self.key_length,
            "config": self.config,
        }


def _rates_dict(r: ResidualRates) -> dict:
    return {"e_bit": r.e_bit, "e_phase": r.e_phase}


def run_schedule_on_strings(alice, bob, phase, schedule: Schedule, seed: int):
    """Apply a schedule (final parity step included) to bit strings.

    Returns the final strings and the number of bits after every step.
    """
    sizes = [int(alice.size)]
    for k, step in enumerate(schedule.steps):
        rng = RngStream(seed, (_STREAM_POST, k))
        if alice.size < (2 if step == "B" else step):
            alice = bob = alice[:0]
            phase = phase[:0]
        elif step == "B":
            alice, bob, phase = bstep_strings(alice, bob, phase, rng)
        else:
            alice, bob, phase = pstep_strings(alice, bob, phase, step, rng)
        sizes.append(int(alice.size))
    rng = RngStream(seed, (_STREAM_POST, len(schedule.steps)))
    if alice.size >= schedule.final_r:
        alice, bob, phase = pstep_strings(alice, bob, phase, schedule.final_r, rng)
    else:
        alice, bob, phase = alice[:0], bob[:0], phase[:0]
    sizes.append(int(alice.size))
    return alice, bob, phase, sizes


def run(config: ProtocolConfig, workers: int = 1, keep_records: bool = False) -> RunReport:
    """Simulate one protocol run end to end.  Deterministic given ``config.seed``."""
    config.validate()
    protocol = config.protocol
    records = select_check_bits(simulate_codes(config, workers), config)
    sifted = records.sifted
    key_mask = records.of_basis(Basis.Z) & ~records.checked
    counts = {
        "sent": len(records),
        "parity_survived": int(records.accepted.sum()),
        "sifted": int(sifted.sum()),
        "checked": int(records.checked.sum()),
        "key_candidates": int(key_mask.sum()),
    }
    expected = expected_rates(config.channel)
    if protocol is Protocol.FOUR_STATE:
        expected.pop("y")
    true_decoded, _ = decoded_distribution(config.channel)

    try:
        measured = estimate_rates(records, config.confidence, protocol)
    except ValueError:
        measured = None
    abort = measured is None or abort_decision(measured, expected, config.abort_tolerance)

    report = RunReport(
        config=config.as_dict(), counts=counts, measured=measured, expected=expected, abort=abort,
        feasible=False, schedule=None, schedule_source="", step_counts=[], residual_measured=None,
        residual_expected=None, residual_certified=None, key_rate=0.0, final_bits=0, key_length=0,
        records=records if keep_records else None,
    )
    if abort:
        return report

    try:
        working = measured.working_distribution(protocol)
    except ValueError:
        working = None
    if isinstance(config.schedule, Schedule):
        schedule, source = config.schedule, "fixed"
    else:
        found = schedule_search(working, **config.bounds.kwargs()) if working is not None else None
        schedule, source = (found.schedule if found else None), "search"
    report.schedule_source = source
    if schedule is None:
        return report

    report.schedule = schedule
    certified = apply_schedule(working, schedule).residual if working is not None else None
    report.residual_certified = _rates_dict(certified) if certified else None
    report.residual_expected = _rates_dict(apply_schedule(true_decoded, schedule).residual)
    report.key_rate = css_key_rate(certified) if certified else 0.0
    report.feasible = report.key_rate > 0

    alice = records.alice[key_mask]
    bob = records.bob[key_mask]
    phase = (records.residual[key_mask] & 2).astype(bool)
    alice, bob, phase, sizes = run_schedule_on_strings(alice, bob, phase, schedule, config.seed)
    report.step_counts = sizes
    report.final_bits = int(alice.size)
    if alice.size:
        report.residual_measured = {
            "e_bit": float(np.mean(alice != bob)),
            "e_phase": float(np.mean(phase)),
            "n": int(alice.size),
        }
    report.key_length = int(math.floor(max(report.key_rate, 0.0) * report.final_bits))
    return report
