import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qpferqkd.pauli import (ErrorDistribution, InvalidDistribution, PauliOp, RngStream, compose, flip_rates,
                            has_bit_flip, has_phase_flip, sample_error, sample_errors)

from .oracles import MATRICES

paulis = st.sampled_from(list(PauliOp))


@pytest.mark.parametrize("a,b,expected", [
    (PauliOp.X, PauliOp.X, PauliOp.I),
    (PauliOp.I, PauliOp.Z, PauliOp.Z),
    (PauliOp.X, PauliOp.Z, PauliOp.Y),
])
def test_compose_examples(a, b, expected):
    assert compose(a, b) == expected


def test_compose_matches_matrix_product_up_to_phase():
    for a in PauliOp:
        for b in PauliOp:
            prod = MATRICES[a.name] @ MATRICES[b.name]
            target = MATRICES[compose(a, b).name]
            # equal up to a global phase
            k = np.flatnonzero(np.abs(target.ravel()) > 0)[0]
            phase = prod.ravel()[k] / target.ravel()[k]
            assert abs(abs(phase) - 1) < 1e-12
            assert np.allclose(prod, phase * target)


@given(paulis, paulis)
def test_compose_commutes_and_self_inverse(a, b):
    assert compose(a, b) == compose(b, a)
    assert compose(a, a) == PauliOp.I


@given(paulis, paulis)
def test_flip_indicators_are_homomorphic(a, b):
    c = compose(a, b)
    assert has_bit_flip(c) == (has_bit_flip(a) ^ has_bit_flip(b))
    assert has_phase_flip(c) == (has_phase_flip(a) ^ has_phase_flip(b))


def test_flip_indicator_examples():
    assert has_bit_flip(PauliOp.Y)
    assert not has_bit_flip(PauliOp.Z)
    assert not has_phase_flip(PauliOp.I)
    assert [p.name for p in PauliOp if has_bit_flip(p)] == ["X", "Y"]
    assert [p.name for p in PauliOp if has_phase_flip(p)] == ["Z", "Y"]


def test_flip_rates():
    assert flip_rates(ErrorDistribution(1, 0, 0, 0)) == (0, 0)
    b, q = flip_rates(ErrorDistribution(0.61, 0.13, 0.13, 0.13))
    assert b == pytest.approx(0.26, abs=1e-15) and q == pytest.approx(0.26, abs=1e-15)
    assert flip_rates(ErrorDistribution(0.9, 0, 0, 0.1)) == (0, 0.1)


@pytest.mark.parametrize("vals", [(0.5, 0.2, 0.2, 0.2), (1.1, -0.1, 0, 0), (0.9, 0.0, 0.0, 0.0), (np.nan, 0, 0, 1)])
def test_invalid_distributions_rejected(vals):
    with pytest.raises(InvalidDistribution):
        ErrorDistribution(*vals)


def test_distribution_tolerance_is_tight():
    ErrorDistribution(1 - 1e-13, 0, 0, 0)
    with pytest.raises(InvalidDistribution):
        ErrorDistribution(1 - 1e-10, 0, 0, 0)


def test_degenerate_sampling():
    rng = RngStream(7)
    assert sample_error(ErrorDistribution(1, 0, 0, 0), rng) is PauliOp.I
    assert sample_error(ErrorDistribution(0, 1, 0, 0), rng) is PauliOp.X
    assert set(sample_errors(ErrorDistribution(0, 0, 0, 1), rng, 1000)) == {PauliOp.Z}
    assert set(sample_errors(ErrorDistribution(0, 0, 1, 0), rng, 1000)) == {PauliOp.Y}


def test_empirical_frequencies_within_4_sigma():
    d = ErrorDistribution(0.61, 0.13, 0.06, 0.2)
    n = 10**6
    codes = sample_errors(d, RngStream(11, 3), n)
    for op in PauliOp:
        p = d.prob(op)
        f = np.mean(codes == op)
        assert abs(f - p) <= 4 * np.sqrt(p * (1 - p) / n)


def test_streams_are_reproducible_and_distinct():
    d = ErrorDistribution(0.4, 0.2, 0.2, 0.2)
    a = sample_errors(d, RngStream(5, 2), 1000)
    b = sample_errors(d, RngStream(5, 2), 1000)
    c = sample_errors(d, RngStream(5, 3), 1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(RngStream(5, (1, 0)).generator.random(8), RngStream(5, (1, 1)).generator.random(8))


def test_swap_xz():
    d = ErrorDistribution(0.5, 0.1, 0.15, 0.25)
    assert d.swap_xz() == ErrorDistribution(0.5, 0.25, 0.15, 0.1)
