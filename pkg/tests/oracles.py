"""Brute-force reference computations used to check the library.

These deliberately avoid the library's bit tricks: Paulis are handled as
explicit (bit_flip, phase_flip) flag pairs or as 2x2 matrices, and every
joint outcome is enumerated.
"""
import itertools

import numpy as np

# order matches ErrorDistribution fields: I, X, Y, Z
NAMES = ("I", "X", "Y", "Z")
FLAGS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
FROM_FLAGS = {v: k for k, v in FLAGS.items()}
INDEX = {n: i for i, n in enumerate(NAMES)}

MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# decode table of the 2-qubit code, one row per surviving joint error
RESIDUAL_TABLE = {
    ("I", "I"): "I", ("Z", "Z"): "I",
    ("I", "Z"): "X", ("Z", "I"): "X",
    ("X", "X"): "Z", ("Y", "Y"): "Z",
    ("X", "Y"): "Y", ("Y", "X"): "Y",
}


def simplex_grid(step=0.05):
    n = int(round(1 / step))
    out = []
    for i, j, k in itertools.product(range(n + 1), repeat=3):
        if i + j + k <= n:
            px, py, pz = i * step, j * step, k * step
            out.append((max(0.0, 1 - px - py - pz), px, py, pz))
    return out


def enum_decoded(d0):
    """Decoded distribution and survival by summing over all 16 joint errors."""
    acc = dict.fromkeys(NAMES, 0.0)
    survival = 0.0
    for a, b in itertools.product(NAMES, repeat=2):
        p = d0[INDEX[a]] * d0[INDEX[b]]
        if (a, b) in RESIDUAL_TABLE:
            survival += p
            acc[RESIDUAL_TABLE[(a, b)]] += p
    return tuple(acc[n] / survival for n in NAMES), survival


def enum_bstep(d):
    """B-step by enumerating the 16 ordered error pairs of a bit pair."""
    acc = dict.fromkeys(NAMES, 0.0)
    survival = 0.0
    for a, b in itertools.product(NAMES, repeat=2):
        (xa, za), (xb, zb) = FLAGS[a], FLAGS[b]
        if xa != xb:
            continue
        p = d[INDEX[a]] * d[INDEX[b]]
        survival += p
        acc[FROM_FLAGS[(xa, za ^ zb)]] += p
    return tuple(acc[n] / survival for n in NAMES), survival


def pstep_classes(r):
    """Index (0..3 in I,X,Y,Z order) of the new error for every one of the 4^r tuples."""
    out = []
    for combo in itertools.product(range(4), repeat=r):
        bits = sum(FLAGS[NAMES[c]][0] for c in combo) % 2
        phases = sum(FLAGS[NAMES[c]][1] for c in combo)
        phase = int(2 * phases >= r)  # ties count as phase errors
        out.append(INDEX[FROM_FLAGS[(bits, phase)]])
    return np.array(out)


def enum_pstep_batch(dists, r):
    """Exhaustive 4^r enumeration of the P_r-step for many distributions at once."""
    d = np.asarray(dists, dtype=float)
    probs = np.ones((d.shape[0], 1))
    for _ in range(r):
        probs = (probs[:, :, None] * d[:, None, :]).reshape(d.shape[0], -1)
    cls = pstep_classes(r)
    out = np.zeros((d.shape[0], 4))
    for k in range(4):
        out[:, k] = probs[:, cls == k].sum(axis=1)
    return out


def encoded(alpha, beta):
    """Amplitudes of the encoded state over |00>,|01>,|10>,|11>, built by hand."""
    s = 1 / np.sqrt(2)
    return alpha * s * np.array([1, 0, 0, 1]) + beta * s * np.array([1, 0, 0, -1])


def decode_by_measurement(state, outcome_plus: bool):
    """Bob's decoding at amplitude level.

    Project onto even parity, measure qubit 1 in X with the given outcome,
    apply H to qubit 2 and, for the |-> outcome, a Z-basis bit flip.  Returns
    the normalised single-qubit state or ``None`` if the parity check fails
    or the outcome has zero probability.
    """
    even = state * np.array([1, 0, 0, 1])
    if np.linalg.norm(even) < 1e-12:
        return None
    s = 1 / np.sqrt(2)
    bra1 = np.array([s, s]) if outcome_plus else np.array([s, -s])
    q2 = bra1.conj() @ even.reshape(2, 2)
    if np.linalg.norm(q2) < 1e-12:
        return None
    h = s * np.array([[1, 1], [1, -1]])
    q2 = h @ q2
    if not outcome_plus:
        q2 = MATRICES["X"] @ q2
    return q2 / np.linalg.norm(q2)


def same_ray(u, v, atol=1e-10):
    return abs(abs(np.vdot(u, v)) - 1.0) < atol
