import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpferqkd.montecarlo import empirical_decoded
from qpferqkd.pauli import ErrorDistribution, PauliOp, RngStream
from qpferqkd.postprocess import bstep_distribution
from qpferqkd.qpfer import (Basis, CodeState, JointError, LogicalState, ParityRejected, Protocol, ProtocolError,
                            all_joint_errors, bob_decode_outcome, decoded_distribution, encode, flips_basis,
                            parity_survives, residual_error)

from . import oracles

S = 1 / np.sqrt(2)


@st.composite
def distributions(draw):
    w = [draw(st.floats(0, 1)) for _ in range(4)]
    total = sum(w)
    if total == 0:
        return ErrorDistribution.noiseless()
    vals = [v / total for v in w]
    vals[0] = 1.0 - sum(vals[1:])
    return ErrorDistribution(*vals)


def test_encode_examples():
    assert np.allclose(encode(LogicalState("Z", 0)).amplitudes(), [S, 0, 0, S])
    assert np.allclose(encode(LogicalState("Z", 1)).amplitudes(), [S, 0, 0, -S])
    assert np.allclose(encode(LogicalState("X", 0)).amplitudes(), [1, 0, 0, 0])
    assert np.allclose(encode(LogicalState("X", 1)).amplitudes(), [0, 0, 0, 1])
    assert np.allclose(encode(LogicalState("Y", 0)).amplitudes(), [S, 0, 0, -1j * S])
    assert np.allclose(encode(LogicalState("Y", 1)).amplitudes(), [S, 0, 0, 1j * S])


def test_y_codes_match_the_quoted_superposition():
    # 1/2[(|00>+|11>) +- i(|00>-|11>)] equals (|00> -+ i|11>)/sqrt2 up to phase
    phi_p = np.array([1, 0, 0, 1]) * S
    phi_m = np.array([1, 0, 0, -1]) * S
    for sign, bit in ((1, 0), (-1, 1)):
        raw = S * (phi_p + sign * 1j * phi_m)
        assert oracles.same_ray(raw, encode(LogicalState("Y", bit)).amplitudes())


def test_encoder_is_linear_image_of_logical_state():
    for basis in Basis:
        for bit in (0, 1):
            a, b = LogicalState(basis, bit).vector()
            assert oracles.same_ray(oracles.encoded(a, b), encode(LogicalState(basis, bit)).amplitudes())


def test_code_states_normalised():
    for basis in Basis:
        for bit in (0, 1):
            assert abs(np.linalg.norm(CodeState(LogicalState(basis, bit)).amplitudes()) - 1) < 1e-12


def test_y_basis_rejected_in_four_state():
    with pytest.raises(ProtocolError):
        encode(LogicalState("Y", 0), Protocol.FOUR_STATE)
    with pytest.raises(ProtocolError):
        bob_decode_outcome(encode(LogicalState("Z", 0)), JointError.parse("I", "I"), "Y", RngStream(0),
                           Protocol.FOUR_STATE)


def test_parity_examples():
    assert parity_survives(JointError.parse("I", "I"))
    assert not parity_survives(JointError.parse("I", "X"))
    assert parity_survives(JointError.parse("X", "Y"))


def test_parity_matches_explicit_state_computation():
    state = encode(LogicalState("Z", 0)).amplitudes()
    for e in all_joint_errors():
        hit = np.kron(oracles.MATRICES[e.e1.name], oracles.MATRICES[e.e2.name]) @ state
        even_weight = abs(hit[0]) ** 2 + abs(hit[3]) ** 2
        assert parity_survives(e) == (even_weight > 0.5)


def test_residual_examples():
    assert residual_error(JointError.parse("I", "Z")) is PauliOp.X
    assert residual_error(JointError.parse("X", "X")) is PauliOp.Z
    assert residual_error(JointError.parse("I", "I")) is PauliOp.I
    with pytest.raises(ParityRejected):
        residual_error(JointError.parse("I", "X"))


def test_residual_matches_table():
    for (a, b), res in oracles.RESIDUAL_TABLE.items():
        assert residual_error(JointError.parse(a, b)).name == res


def test_residual_matches_amplitude_level_decoding():
    """Decode by measurement and compare with the logical error from the table."""
    rng = np.random.default_rng(1)
    for _ in range(5):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        a, b = v / np.linalg.norm(v)
        state = oracles.encoded(a, b)
        for e in all_joint_errors():
            hit = np.kron(oracles.MATRICES[e.e1.name], oracles.MATRICES[e.e2.name]) @ state
            for plus in (True, False):
                out = oracles.decode_by_measurement(hit, plus)
                if not parity_survives(e):
                    assert out is None
                    continue
                expected = oracles.MATRICES[residual_error(e).name] @ np.array([a, b])
                assert oracles.same_ray(out, expected)


def test_decoded_examples():
    d, s = decoded_distribution(ErrorDistribution(1, 0, 0, 0))
    assert d == ErrorDistribution(1, 0, 0, 0) and s == 1
    d, s = decoded_distribution(ErrorDistribution(0.9, 0, 0, 0.1))
    assert d.allclose(ErrorDistribution(0.82, 0.18, 0, 0)) and s == pytest.approx(1, abs=1e-12)
    d, s = decoded_distribution(ErrorDistribution(0.61, 0.13, 0.13, 0.13))
    assert np.allclose(d.as_array(), [0.6323, 0.2578, 0.0549, 0.0549], atol=1e-4)
    assert s == pytest.approx(0.6152, abs=1e-4)


def test_decoded_equals_enumeration_on_grid():
    for point in oracles.simplex_grid(0.05):
        d, s = decoded_distribution(ErrorDistribution(*point))
        ref, ref_s = oracles.enum_decoded(point)
        assert np.allclose(d.as_array(), ref, rtol=0, atol=1e-12)
        assert abs(s - ref_s) < 1e-12


@given(distributions())
def test_decoded_normalised(d0):
    d, _ = decoded_distribution(d0)
    assert abs(d.as_array().sum() - 1) < 1e-12


@given(distributions())
def test_decode_is_xz_swap_of_bstep(d0):
    d, s = decoded_distribution(d0)
    b, sb = bstep_distribution(d0)
    assert d.allclose(b.swap_xz(), atol=1e-12)
    assert abs(s - sb) < 1e-12


@given(st.floats(0, 0.4999))
def test_phase_errors_become_bit_errors(pz):
    d0 = ErrorDistribution(1 - pz, 0, 0, pz)
    d, s = decoded_distribution(d0)
    assert d.phase_rate == 0
    assert d.bit_rate == pytest.approx(2 * (1 - pz) * pz / s, abs=1e-15)


def test_monte_carlo_converges_to_transform():
    d0 = ErrorDistribution(0.61, 0.13, 0.13, 0.13)
    freq, survival, n_ok = empirical_decoded(d0, 1_650_000, RngStream(2024))
    assert n_ok >= 10**6
    d, s = decoded_distribution(d0)
    for got, want in zip(freq.as_array(), d.as_array()):
        assert abs(got - want) <= 4 * np.sqrt(want * (1 - want) / n_ok)
    assert abs(survival - s) <= 4 * np.sqrt(s * (1 - s) / 1_650_000)


def test_bob_outcome_examples():
    rng = RngStream(3)
    z0 = encode(LogicalState("Z", 0))
    assert bob_decode_outcome(z0, JointError.parse("I", "Z"), "Z", rng) == (True, 1)
    assert bob_decode_outcome(encode(LogicalState("X", 1)), JointError.parse("I", "I"), "X", rng) == (True, 1)
    for basis in "ZXY":
        assert bob_decode_outcome(z0, JointError.parse("X", "I"), basis, rng) == (False, None)


def test_bob_outcome_flip_rules():
    cases = {
        ("Z", "X"): True, ("Z", "Y"): True, ("Z", "Z"): False,
        ("X", "Z"): True, ("X", "Y"): True, ("X", "X"): False,
        ("Y", "X"): True, ("Y", "Z"): True, ("Y", "Y"): False,
    }
    for (basis, res), flipped in cases.items():
        assert flips_basis(PauliOp[res], Basis(basis)) == flipped
    rng = RngStream(4)
    for basis, bit, e in itertools.product("ZXY", (0, 1), all_joint_errors()):
        if not parity_survives(e):
            continue
        ok, got = bob_decode_outcome(encode(LogicalState(basis, bit)), e, basis, rng)
        assert ok and got == bit ^ flips_basis(residual_error(e), Basis(basis))


def test_mismatched_basis_gives_fair_coin():
    rng = RngStream(9)
    code = encode(LogicalState("Z", 0))
    bits = [bob_decode_outcome(code, JointError.parse("I", "I"), "X", rng)[1] for _ in range(4000)]
    assert abs(np.mean(bits) - 0.5) < 4 * 0.5 / np.sqrt(4000)


@settings(max_examples=50)
@given(distributions())
def test_survival_formula(d0):
    _, s = decoded_distribution(d0)
    assert s == pytest.approx((d0.p_I + d0.p_z) ** 2 + (d0.p_x + d0.p_y) ** 2, abs=1e-14)
    assert 0.5 - 1e-12 <= s <= 1 + 1e-12
