import pytest

from qpferqkd.pauli import ErrorDistribution
from qpferqkd.postprocess import four_state_assumption
from qpferqkd.qpfer import Protocol, decoded_distribution
from qpferqkd.threshold import (ChannelFamily, MonotonicityError, SearchBounds, check_monotone, evaluate_point,
                                find_threshold, working_distribution)

from . import shared

SMALL = SearchBounds(max_b=6, max_p_rounds=3)


def test_family_channels():
    sym = ChannelFamily.symmetric()
    assert sym.channel(0.26).allclose(ErrorDistribution(0.61, 0.13, 0.13, 0.13))
    assert sym.max_scale == pytest.approx(2 / 3)
    xz = ChannelFamily.xz_only()
    assert xz.channel(0.2).allclose(ErrorDistribution(0.6, 0.2, 0, 0.2))
    custom = ChannelFamily.custom(2, 0, 1)
    assert custom.direction == (1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        sym.channel(0.7)
    with pytest.raises(ValueError):
        ChannelFamily.custom(0, 0, 1)


def test_working_distribution():
    d0 = ChannelFamily.symmetric().channel(0.26)
    dec, _ = decoded_distribution(d0)
    assert working_distribution(d0, "six-state") == dec
    w = working_distribution(d0, "four-state")
    assert w.p_y == 0
    assert w.bit_rate == pytest.approx(dec.bit_rate) and w.phase_rate == pytest.approx(dec.phase_rate)
    assert working_distribution(d0, "four-state", decode=False).allclose(four_state_assumption(0.26, 0.26))


def test_noiseless_point_is_feasible():
    res = evaluate_point(ChannelFamily.symmetric(), 0.0, "four-state", SMALL)
    assert res is not None and res.key_rate == 1


def test_point_with_impossible_four_state_rates_is_infeasible():
    assert evaluate_point(ChannelFamily.xz_only(), 0.5, "four-state", SMALL, decode=False) is None


def test_monotone_along_symmetric_family():
    scales = [0.02 * i for i in range(20)]
    flags = check_monotone(ChannelFamily.symmetric(), "four-state", scales, SMALL)
    assert flags[0][1] and not flags[-1][1]


def test_monotonicity_violation_is_reported(monkeypatch):
    import qpferqkd.threshold as th

    def fake(family, scale, *args, **kwargs):
        return None if 0.2 < scale < 0.3 else object()

    monkeypatch.setattr(th, "evaluate_point", fake)
    with pytest.raises(MonotonicityError):
        th.find_threshold(ChannelFamily.symmetric(), "four-state", bounds=SMALL, n_samples=10)
    with pytest.raises(MonotonicityError):
        th.check_monotone(ChannelFamily.symmetric(), "four-state", [0.1, 0.25, 0.4])


def test_precision_refinement_is_consistent():
    coarse = find_threshold(ChannelFamily.symmetric(), "four-state", precision=0.01, bounds=SMALL)
    fine = find_threshold(ChannelFamily.symmetric(), "four-state", precision=0.001, bounds=SMALL)
    assert coarse.upper - coarse.threshold <= 0.01
    assert fine.upper - fine.threshold <= 0.001
    assert abs(fine.threshold - coarse.threshold) <= 0.01
    assert coarse.threshold <= fine.upper and fine.threshold <= coarse.upper


def test_threshold_bracket_is_certified():
    res = find_threshold(ChannelFamily.xz_only(), "four-state", precision=0.005, bounds=SMALL)
    assert res.witness is not None and res.witness.key_rate > 0
    assert evaluate_point(res.family, res.upper, "four-state", SMALL, first_feasible=True) is None
    assert res.as_dict()["agreement"]["reference"] == 0.217


def test_workers_do_not_change_result():
    a = find_threshold(ChannelFamily.symmetric(), "six-state", precision=0.005, bounds=SMALL)
    b = find_threshold(ChannelFamily.symmetric(), "six-state", precision=0.005, bounds=SMALL, workers=4)
    assert a.as_dict() == b.as_dict()


@pytest.mark.slow
@pytest.mark.parametrize("protocol,value", [("four-state", 0.1797), ("six-state", 0.2533)])
def test_frozen_baselines(protocol, value):
    res = shared.threshold("symmetric", protocol, decode=False)
    assert res.threshold == pytest.approx(value, abs=res.precision)
    assert res.agreement()["difference"] is None


def test_protocol_parse():
    assert Protocol.parse("4") is Protocol.FOUR_STATE
    assert Protocol.parse("six_state") is Protocol.SIX_STATE
    with pytest.raises(ValueError):
        Protocol.parse("eight-state")
