"""Two-way classical post-processing on the sifted key.

Every operation exists at two levels.  The ``*_distribution`` functions act on
an :class:`ErrorDistribution` of a single key bit, where a bit carries a
bit-flip indicator (Alice and Bob disagree) and a phase-flip indicator (the
bookkeeping of the equivalent purification protocol).  The ``*_strings``
functions act on actual bit strings and are what the protocol simulator runs.

B-step
    Pair the bits at random, compare parities, drop both bits of a
    disagreeing pair and one bit of an agreeing pair.  The kept bit has the
    common bit-flip indicator and the XOR of the two phase indicators.
P_r-step
    Replace each group of ``r`` bits by its parity.  Bit flips XOR together;
    the phase error of the new bit is the majority of the ``r`` phase
    indicators (a tie counts as an error).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import special, stats

from .pauli import ErrorDistribution, RngStream, flip_rates

#: bound used for both conditions of the final-step feasibility test
DEFAULT_TARGET = 0.05
DEFAULT_MAX_B = 12
DEFAULT_MAX_P_ROUNDS = 6
DEFAULT_R_CHOICES = (3, 5)
DEFAULT_R_MAX = 10**7


# ---------------------------------------------------------------------------
# B-step


def _bstep_arrays(d: np.ndarray):
    pI, px, py, pz = d[..., 0], d[..., 1], d[..., 2], d[..., 3]
    s = (pI + pz) ** 2 + (px + py) ** 2
    out = np.stack([pI * pI + pz * pz, px * px + py * py, 2 * px * py, 2 * pI * pz], axis=-1)
    return out / s[..., None], s


def bstep_distribution(d: ErrorDistribution) -> tuple[ErrorDistribution, float]:
    """Distribution of the kept bit after one B-step, and the pair survival probability."""
    out, s = _bstep_arrays(d.as_array())
    return ErrorDistribution.from_array(out), float(s)


def _check_strings(alice_bits, bob_bits, phase_flags):
    a = np.asarray(alice_bits, dtype=np.uint8)
    b = np.asarray(bob_bits, dtype=np.uint8)
    ph = np.asarray(phase_flags, dtype=bool)
    if not (a.shape == b.shape == ph.shape) or a.ndim != 1:
        raise ValueError("alice_bits, bob_bits and phase_flags must be 1-d sequences of equal length")
    return a, b, ph


def bstep_strings(alice_bits, bob_bits, phase_flags, rng: RngStream):
    """Run one B-step on bit strings.

    Pairs come from a uniformly random perfect matching; an odd leftover bit
    is dropped.  Returns the kept ``(alice_bits, bob_bits, phase_flags)``.
    """
    a, b, ph = _check_strings(alice_bits, bob_bits, phase_flags)
    n = a.size
    if n < 2:
        raise ValueError(f"a B-step needs at least 2 bits, got {n}")
    perm = rng.generator.permutation(n)[: n - n % 2].reshape(-1, 2)
    i, j = perm[:, 0], perm[:, 1]
    keep = (a[i] ^ a[j]) == (b[i] ^ b[j])
    i, j = i[keep], j[keep]
    return a[i], b[i], ph[i] ^ ph[j]


# ---------------------------------------------------------------------------
# P_r-step


def _majority_threshold(r: int) -> int:
    # phase error iff count >= ceil(r/2); for even r the tie counts as an error
    return (r + 1) // 2


def _pstep_arrays(d: np.ndarray, r: int) -> np.ndarray:
    """Exact P_r-step on a batch of distributions, shape ``(..., 4)``."""
    pI, px, py, pz = (d[..., k, None] for k in range(4))
    # joint[..., parity, count]: parity of bit flips and number of phase flips so far
    joint = np.zeros(d.shape[:-1] + (2, r + 1))
    joint[..., 0, 0] = 1.0
    for _ in range(r):
        p0, p1 = joint[..., 0, :], joint[..., 1, :]
        n0 = pI * p0 + px * p1
        n1 = pI * p1 + px * p0
        n0[..., 1:] += pz * p0[..., :-1] + py * p1[..., :-1]
        n1[..., 1:] += pz * p1[..., :-1] + py * p0[..., :-1]
        joint = np.stack([n0, n1], axis=-2)
    return _fold_majority(joint, r)


def _pstep_closed_form(d: np.ndarray, r: int) -> np.ndarray:
    """Same result as :func:`_pstep_arrays` via the parity generating function.

    Per phase-flip count ``k`` the even/odd bit-parity masses are
    ``(A_k +- B_k) / 2`` with ``A_k = C(r,k) (p_z+p_y)^k (p_I+p_x)^(r-k)`` and
    ``B_k`` the same with ``p_y, p_x`` negated.  Used by the batched search.
    """
    pI, px, py, pz = (d[..., k] for k in range(4))
    ks = np.arange(r + 1)
    coef = special.comb(r, ks)
    a = coef * (pz + py)[..., None] ** ks * (pI + px)[..., None] ** (r - ks)
    b = coef * (pz - py)[..., None] ** ks * (pI - px)[..., None] ** (r - ks)
    return _fold_majority(np.stack([(a + b) / 2, (a - b) / 2], axis=-2), r)


def _fold_majority(joint: np.ndarray, r: int) -> np.ndarray:
    k = _majority_threshold(r)
    ok0, bad0 = joint[..., 0, :k].sum(-1), joint[..., 0, k:].sum(-1)
    ok1, bad1 = joint[..., 1, :k].sum(-1), joint[..., 1, k:].sum(-1)
    return np.stack([ok0, ok1, bad1, bad0], axis=-1)


def pstep_distribution(d: ErrorDistribution, r: int) -> ErrorDistribution:
    """Exact error distribution of the parity of ``r`` independent bits drawn from ``d``."""
    r = int(r)
    if r < 1:
        raise ValueError(f"group size r must be >= 1, got {r}")
    if r == 1:
        return d
    return ErrorDistribution.from_array(_pstep_arrays(d.as_array(), r))


def pstep_marginals(d: ErrorDistribution, r: int) -> tuple[float, float]:
    """Bit- and phase-flip rates after a P_r-step, in closed form.

    Same numbers as the marginals of :func:`pstep_distribution`, but cheap
    for very large ``r``.
    """
    r = int(r)
    if r < 1:
        raise ValueError(f"group size r must be >= 1, got {r}")
    b, q = flip_rates(d)
    bit = 0.5 * (1.0 - (1.0 - 2.0 * b) ** r)
    phase = float(stats.binom.sf(_majority_threshold(r) - 1, r, q))
    return float(bit), phase


def pstep_strings(alice_bits, bob_bits, phase_flags, r: int, rng: RngStream):
    """Replace random groups of ``r`` bits by their parities; leftover bits are dropped."""
    a, b, ph = _check_strings(alice_bits, bob_bits, phase_flags)
    r = int(r)
    if r < 1:
        raise ValueError(f"group size r must be >= 1, got {r}")
    n = a.size - a.size % r
    groups = rng.generator.permutation(a.size)[:n].reshape(-1, r)
    count = ph[groups].sum(axis=1)
    return (np.bitwise_xor.reduce(a[groups], axis=1),
            np.bitwise_xor.reduce(b[groups], axis=1),
            count >= _majority_threshold(r))


# ---------------------------------------------------------------------------
# final step


class FinalStepCheck(NamedTuple):
    feasible: bool
    lhs1: float  # union bound on the bit-flip rate after the final parity step
    lhs2: float  # Hoeffding bound on the phase-flip rate after the final parity step


def final_step_feasible(d: ErrorDistribution, r: int, target: float = DEFAULT_TARGET) -> FinalStepCheck:
    """Check ``r (p_x + p_y) <= target`` and ``exp(-2 r (1/2 - p_z - p_y)^2) <= target``.

    A phase-flip rate of 1/2 or more is never feasible, since the Hoeffding
    bound only applies below 1/2.
    """
    b, q = flip_rates(d)
    lhs1 = r * b
    lhs2 = math.exp(-2.0 * r * (0.5 - q) ** 2)
    feasible = lhs1 <= target and lhs2 <= target and q < 0.5
    return FinalStepCheck(bool(feasible), float(lhs1), float(lhs2))


def _min_final_r(b, q, target, r_max):
    """Smallest feasible final group size per element, or 0 where none exists."""
    b = np.asarray(b, dtype=float)
    q = np.asarray(q, dtype=float)
    m2 = np.where(q < 0.5, (0.5 - q) ** 2, np.nan)
    log_t = math.log(target)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.ceil(-log_t / (2.0 * m2))
        r = np.where(np.isfinite(r), np.maximum(r, 1.0), np.inf)
        # pin down round-off in the ceiling with the exact test expression
        fine = np.isfinite(r) & (r <= 2.0 * r_max)
        r = np.where(fine & (r > 1) & (np.exp(-2.0 * (r - 1) * m2) <= target), r - 1, r)
        r = np.where(fine & (np.exp(-2.0 * r * m2) > target), r + 1, r)
        ok = fine & (r <= r_max) & (r * b <= target)
    return np.where(ok, r, 0).astype(np.int64)


def min_final_r(d: ErrorDistribution, target: float = DEFAULT_TARGET,
                r_max: int = DEFAULT_R_MAX) -> int | None:
    """Smallest ``r <= r_max`` passing :func:`final_step_feasible`, or ``None``.

    The first condition grows with ``r`` and the second shrinks, so the
    smallest ``r`` meeting the second one decides feasibility.
    """
    b, q = flip_rates(d)
    r = int(_min_final_r(b, q, target, r_max))
    return r or None


# ---------------------------------------------------------------------------
# key rate


def binary_entropy(p):
    p = np.asarray(p, dtype=float)
    h = (special.entr(p) + special.entr(1.0 - p)) / math.log(2.0)
    return float(h) if h.ndim == 0 else h


@dataclass(frozen=True)
class ResidualRates:
    e_bit: float
    e_phase: float

    def __post_init__(self):
        for name in ("e_bit", "e_phase"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
            object.__setattr__(self, name, v)


def css_key_rate(rates: ResidualRates) -> float:
    """Asymptotic CSS yield ``1 - H(e_bit) - H(e_phase)``; negative means no key."""
    return 1.0 - binary_entropy(rates.e_bit) - binary_entropy(rates.e_phase)


def four_state_assumption(measured_bit: float, measured_phase: float) -> ErrorDistribution:
    """Working distribution when sigma_y errors cannot be told apart (taken as zero)."""
    if measured_bit < 0 or measured_phase < 0:
        raise ValueError("measured rates must be non-negative")
    if measured_bit + measured_phase > 1.0 + 1e-12:
        raise ValueError(f"measured rates sum to {measured_bit + measured_phase} > 1")
    return ErrorDistribution(1.0 - measured_bit - measured_phase, measured_bit, 0.0, measured_phase)


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class Schedule:
    """Interleaved B and P_r steps followed by a final parity step of size ``final_r``.

    ``steps`` holds ``"B"`` or the odd group size of a P_r step, e.g.
    ``("B", "B", 3, "B")``.
    """

    steps: tuple = ()
    final_r: int = 1

    def __post_init__(self):
        steps = tuple(_parse_step(s) for s in self.steps)
        object.__setattr__(self, "steps", steps)
        if int(self.final_r) < 1:
            raise ValueError(f"final_r must be >= 1, got {self.final_r}")
        object.__setattr__(self, "final_r", int(self.final_r))

    @property
    def n_b(self) -> int:
        return sum(1 for s in self.steps if s == "B")

    @property
    def n_p(self) -> int:
        return len(self.steps) - self.n_b

    @property
    def interleaved(self) -> bool:
        return self.n_p > 0

    def tokens(self) -> list[str]:
        return [s if s == "B" else f"P{s}" for s in self.steps]

    def __str__(self):
        return " ".join(self.tokens() + [f"final_r={self.final_r}"])

    def as_dict(self) -> dict:
        return {"steps": self.tokens(), "final_r": self.final_r}

    @classmethod
    def parse(cls, text: str | Sequence) -> "Schedule":
        """Parse ``"B B P3 B final_r=126"`` (commas also accepted) or a token list."""
        tokens = text.replace(",", " ").split() if isinstance(text, str) else list(text)
        final_r = 1
        steps = []
        for tok in tokens:
            tok = str(tok)
            if tok.lower().startswith(("final_r=", "r=")):
                final_r = int(tok.split("=", 1)[1])
            else:
                steps.append(tok)
        return cls(tuple(steps), final_r)


def _parse_step(s):
    if isinstance(s, str):
        t = s.strip().upper()
        if t == "B":
            return "B"
        if t.startswith("P"):
            s = t[1:]
    r = int(s)
    if r < 3 or r % 2 == 0:
        raise ValueError(f"interleaved P_r steps need odd r >= 3, got {r}")
    return r


@dataclass
class ScheduleTrace:
    """Distributions along a schedule; ``dists[k]`` is the state before step ``k``."""

    dists: list
    survivals: list
    bit_fraction: float  # expected surviving key bits per input bit, before the final step
    final: ErrorDistribution
    residual: ResidualRates


def apply_schedule(d: ErrorDistribution, schedule: Schedule) -> ScheduleTrace:
    """Push ``d`` through the schedule, returning every intermediate distribution."""
    dists = [d]
    survivals = []
    frac = 1.0
    for step in schedule.steps:
        if step == "B":
            d, s = bstep_distribution(d)
            frac *= s / 2.0
        else:
            d, s = pstep_distribution(d, step), 1.0
            frac /= step
        survivals.append(s)
        dists.append(d)
    r = schedule.final_r
    bit, phase = pstep_marginals(d, r)
    final = pstep_distribution(d, r) if r <= 201 else None
    return ScheduleTrace(dists, survivals, frac / r, final, ResidualRates(bit, phase))


@dataclass
class SearchResult:
    schedule: Schedule
    residual: ResidualRates
    key_rate: float
    key_fraction: float  # final key bits per input bit
    final_check: FinalStepCheck
    working: ErrorDistribution
    nodes: int = field(default=0, compare=False)

    def as_dict(self) -> dict:
        return {
            "schedule": self.schedule.as_dict(),
            "interleaved": self.schedule.interleaved,
            "residual": {"e_bit": self.residual.e_bit, "e_phase": self.residual.e_phase},
            "key_rate": self.key_rate,
            "key_fraction": self.key_fraction,
            "final_check": {"lhs1": self.final_check.lhs1, "lhs2": self.final_check.lhs2},
            "working": self.working.as_dict(),
        }


def schedule_search(d: ErrorDistribution, max_b: int = DEFAULT_MAX_B,
                    max_p_rounds: int = DEFAULT_MAX_P_ROUNDS, r_max: int = DEFAULT_R_MAX,
                    target: float = DEFAULT_TARGET, r_choices: Sequence[int] = DEFAULT_R_CHOICES,
                    first_feasible: bool = False) -> SearchResult | None:
    """Exhaustive search over bounded interleavings of B and P_r steps.

    Every sequence with at most ``max_b`` B-steps and ``max_p_rounds``
    P-steps (sizes from ``r_choices``) is expanded breadth first, each prefix
    computed once from its parent.  A prefix is feasible when some final group
    size ``r <= r_max`` passes :func:`final_step_feasible`; the smallest such ``r`` is
    used.  Among feasible prefixes whose exact residual rates give a positive
    CSS rate, the one with the largest final key fraction wins, ties going
    to the earliest prefix in traversal order.

    With ``first_feasible`` the search stops at the shallowest depth holding
    a feasible prefix, which is enough to decide feasibility.
    """
    if min(max_b, max_p_rounds) < 0 or r_max < 1:
        raise ValueError("search bounds must be non-negative")
    r_choices = tuple(_parse_step(r) for r in r_choices)

    dist = d.as_array()[None, :]
    nb = np.zeros(1, dtype=np.int16)
    npr = np.zeros(1, dtype=np.int16)
    log_frac = np.zeros(1)
    parents: list[np.ndarray] = [np.array([-1])]
    moves: list[np.ndarray] = [np.array([-1], dtype=np.int8)]
    best = None  # (fraction, depth, index, r, residual bit, residual phase)
    nodes = 0

    depth = 0
    while dist.shape[0]:
        nodes += dist.shape[0]
        b = dist[:, 1] + dist[:, 2]
        q = dist[:, 3] + dist[:, 2]
        r = _min_final_r(b, q, target, r_max)
        cand = np.flatnonzero(r > 0)
        if cand.size:
            rc = r[cand].astype(float)
            e_bit = 0.5 * (1.0 - (1.0 - 2.0 * b[cand]) ** rc)
            e_phase = stats.binom.sf(np.ceil(rc / 2) - 1, rc, q[cand])
            rate = 1.0 - binary_entropy(e_bit) - binary_entropy(e_phase)
            good = rate > 0
            if np.any(good):
                frac = np.where(good, np.exp(log_frac[cand]) * rate / rc, -np.inf)
                k = int(np.argmax(frac))
                if best is None or frac[k] > best[0]:
                    best = (float(frac[k]), depth, int(cand[k]), int(rc[k]),
                            float(e_bit[k]), float(e_phase[k]), float(rate[k]))
        if first_feasible and best is not None:
            break

        # expand: all B children first, then P children in r_choices order
        children, kids_parent, kids_move = [], [], []
        kid_nb, kid_np, kid_lf = [], [], []
        idx = np.flatnonzero(nb < max_b)
        if idx.size:
            out, s = _bstep_arrays(dist[idx])
            children.append(out)
            kids_parent.append(idx)
            kids_move.append(np.zeros(idx.size, dtype=np.int8))
            kid_nb.append(nb[idx] + 1)
            kid_np.append(npr[idx])
            kid_lf.append(log_frac[idx] + np.log(s / 2.0))
        idx = np.flatnonzero(npr < max_p_rounds)
        if idx.size:
            for m, rr in enumerate(r_choices, start=1):
                children.append(_pstep_closed_form(dist[idx], rr))
                kids_parent.append(idx)
                kids_move.append(np.full(idx.size, m, dtype=np.int8))
                kid_nb.append(nb[idx])
                kid_np.append(npr[idx] + 1)
                kid_lf.append(log_frac[idx] - math.log(rr))
        if not children:
            break
        dist = np.concatenate(children)
        nb = np.concatenate(kid_nb)
        npr = np.concatenate(kid_np)
        log_frac = np.concatenate(kid_lf)
        parents.append(np.concatenate(kids_parent))
        moves.append(np.concatenate(kids_move))
        depth += 1

    if best is None:
        return None
    frac, depth, index, r, e_bit, e_phase, rate = best
    steps = []
    for lvl in range(depth, 0, -1):
        m = int(moves[lvl][index])
        steps.append("B" if m == 0 else r_choices[m - 1])
        index = int(parents[lvl][index])
    schedule = Schedule(tuple(reversed(steps)), r)
    # recompute along the chosen path with the scalar routines
    trace = apply_schedule(d, schedule)
    working = trace.dists[-1]
    return SearchResult(
        schedule=schedule,
        residual=trace.residual,
        key_rate=css_key_rate(trace.residual),
        key_fraction=frac,
        final_check=final_step_feasible(working, r, target),
        working=working,
        nodes=nodes,
    )
