import math

import numpy as np
import pytest

from bubbles import (BlowupResult, Minimizer, Regime, blowupTime, classify, mu, muLadder, muLimit, muLimitAtZero,
                     perimeterDouble, perimeterTriple, roundingFloor, tieVolume)
from densities import DensityModel, ExtendedReal, densityInVolume
from errors import (InconclusiveLimitError, InvalidVolumesError, NoTieError, TieBracketError,
                    UndefinedQuantityError)
from expressions import parse
from limits import estimateProfile
from parameters import getParams

SQRT_SHIFT_V0 = 0.4315067339630332  # sign change of mu_limit for sqrt(V^2 + 1) - 1/2


def _halve(function, lo, hi, iterations=200):
    # Plain bisection of an increasing function
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if function(mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _sqrtShiftMuLimit(V1):
    # Closed form with L = 1, M = 1/2: V* solves s(t) + s(t + V1) = -1 for s(t) = t / sqrt(t^2 + 1)
    def f(t):
        return math.sqrt(t * t + 1) - 0.5

    def s(t):
        return t / math.sqrt(t * t + 1)

    vStar = _halve(lambda t: s(t) + s(t + V1) + 1, -V1 - 10, -V1 / 2)
    return 2 * f(V1 / 2) - f(vStar) - f(vStar + V1) - vStar - 0.5


def _scanTie(model, V1):
    # Walk V2 up a fine geometric grid to the first sign change of mu, then halve that cell
    lo = V1
    hi = V1 * 2 ** (1 / 16)
    while mu(model, V1, hi) > 0:
        lo, hi = hi, hi * 2 ** (1 / 16)
    for _ in range(100):
        mid = (lo + hi) / 2
        if mu(model, V1, mid) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


class TestPerimeters:

    def test_double_equal_volumes(self, sqrtShift):
        assert perimeterDouble(sqrtShift, 1.0, 1.0) == pytest.approx(2 * math.sqrt(2) - 0.5, abs=1e-12)

    def test_triple_equal_volumes(self, sqrtShift):
        expected = 2 * math.sqrt(1.25) + 2 * math.sqrt(2) - 2
        assert perimeterTriple(sqrtShift, 1.0, 1.0) == pytest.approx(expected, abs=1e-14)
        assert expected == pytest.approx(3.0645, abs=1e-4)

    def test_mu_equal_volumes(self, sqrtShift):
        assert mu(sqrtShift, 1.0, 1.0) == pytest.approx(0.7361, abs=1e-4)

    def test_volumes_checked(self, sqrtShift):
        with pytest.raises(InvalidVolumesError):
            perimeterTriple(sqrtShift, 2.0, 1.0)
        with pytest.raises(InvalidVolumesError):
            mu(sqrtShift, 2.0, 1.0)


class TestDiagonalIdentity:
    """mu(V, V) = 2 f(V/2) - f(0), since the double interval is centred when V1 = V2."""

    def test_corpus(self, corpus):
        for name, model in corpus.items():
            for V in np.geomspace(0.05, 5, 20):
                expected = 2 * densityInVolume(model, V / 2) - densityInVolume(model, 0.0)
                value = mu(model, V, V)
                assert value == pytest.approx(expected, abs=1e-10), (name, V)
                assert value > 0, (name, V)


class TestMonotonicity:

    def test_mu_in_both_volumes(self, corpus):
        arrVolumes = np.geomspace(0.2, 6, 10)
        for name in ("sqrt_shift", "abs_exp", "arctan", "quadratic"):
            model = corpus[name]
            for V1 in arrVolumes:
                lstMu = [mu(model, V1, V2) for V2 in arrVolumes if V2 >= V1]
                assert all(b < a - 1e-12 for a, b in zip(lstMu, lstMu[1:])), (name, V1)
            for V2 in arrVolumes:
                lstMu = [mu(model, V1, V2) for V1 in arrVolumes if V1 <= V2]
                assert all(b > a + 1e-12 for a, b in zip(lstMu, lstMu[1:])), (name, V2)

    def test_mu_limit_nondecreasing(self, sqrtShift, profiles):
        lstLimits = [float(muLimit(sqrtShift, profiles["sqrt_shift"], V1)) for V1 in np.geomspace(0.05, 8, 12)]
        assert all(b >= a - 1e-12 for a, b in zip(lstLimits, lstLimits[1:]))

    def test_ladder_falls_to_mu_limit(self, sqrtShift, profiles):
        lstLadder = muLadder(sqrtShift, 1.0, range(1, 21))
        lstValues = [value for _, value in lstLadder]
        limit = float(muLimit(sqrtShift, profiles["sqrt_shift"], 1.0))
        assert all(b < a for a, b in zip(lstValues, lstValues[1:]))
        assert lstValues[-1] > limit
        assert lstValues[-1] - limit < 1e-3


class TestLimitOfMu:

    def test_limit_at_zero(self, corpus, profiles):
        assert muLimitAtZero(corpus["abs_exp"], profiles["abs_exp"]) == pytest.approx(1 - math.log(2), abs=1e-8)
        assert muLimitAtZero(corpus["sqrt_shift"], profiles["sqrt_shift"]) == pytest.approx(1.5 - math.sqrt(3),
                                                                                           abs=1e-8)

    def test_small_volume_approaches_limit_at_zero(self, sqrtShift, profiles):
        profile = profiles["sqrt_shift"]
        assert float(muLimit(sqrtShift, profile, 1e-6)) == pytest.approx(muLimitAtZero(sqrtShift, profile), abs=1e-5)

    def test_infinite_defect(self, arctan, profiles):
        assert float(muLimit(arctan, profiles["arctan"], 1.0)) == -math.inf

    def test_infinite_slope(self, borell, profiles):
        with pytest.raises(UndefinedQuantityError):
            muLimit(borell, profiles["borell"], 1.0)


class TestBlowupTime:

    def test_regimes(self, blowups):
        assert blowups["abs_exp"].regime == Regime.ALWAYS_DOUBLE
        assert blowups["cosh_position"].regime == Regime.ALWAYS_DOUBLE
        assert blowups["sqrt_shift"].regime == Regime.FINITE_BLOWUP
        for name in ("borell", "arctan", "quadratic", "exp_cosh"):
            assert blowups[name].regime == Regime.NO_BLOWUP, name
            assert blowups[name].V0.is_infinite()

    def test_always_double_is_zero(self, blowups):
        assert blowups["abs_exp"].V0 == 0
        assert blowups["abs_exp"].s0 > 0

    def test_finite_value(self, blowups):
        blowup = blowups["sqrt_shift"]
        assert float(blowup.V0) == pytest.approx(SQRT_SHIFT_V0, abs=1e-9)
        lo, hi = blowup.bracket
        assert 0 < hi - lo < 1e-9
        assert lo <= float(blowup.V0) <= hi

    def test_matches_closed_form(self, blowups):
        V0 = _halve(_sqrtShiftMuLimit, 0.1, 1.0, iterations=100)
        assert V0 == pytest.approx(SQRT_SHIFT_V0, abs=1e-9)
        assert float(blowups["sqrt_shift"].V0) == pytest.approx(V0, abs=1e-9)

    def test_sign_change_across_bracket(self, sqrtShift, profiles, blowups):
        profile = profiles["sqrt_shift"]
        V0 = float(blowups["sqrt_shift"].V0)
        epsilon = 1e-6 * (1 + V0)
        assert float(muLimit(sqrtShift, profile, V0 - epsilon)) < 0
        assert float(muLimit(sqrtShift, profile, V0 + epsilon)) >= 0
        lo, hi = blowups["sqrt_shift"].bracket
        assert float(muLimit(sqrtShift, profile, lo)) < 0 <= float(muLimit(sqrtShift, profile, hi))

    def test_inconclusive_defect(self):
        model = DensityModel(parse("sqrt(V^2 + 1) - 1/2"), "volume", params=getParams({"Limit Max Exponent": 10}))
        with pytest.raises(InconclusiveLimitError):
            blowupTime(model, estimateProfile(model))


class TestTieVolume:

    def test_matches_grid_scan(self, sqrtShift, profiles, blowups):
        blowup = blowups["sqrt_shift"]
        V1 = float(blowup.V0) / 2
        tie = tieVolume(sqrtShift, profiles["sqrt_shift"], blowup, V1)
        assert tie > V1
        assert tie == pytest.approx(_scanTie(sqrtShift, V1), abs=1e-8 * (1 + tie))

    def test_ladder_toward_blowup(self, sqrtShift, profiles, blowups):
        blowup = blowups["sqrt_shift"]
        V0 = float(blowup.V0)
        lstTies = []
        for j in range(1, 11):
            V1 = (1 - 2.0 ** -j) * V0
            tie = tieVolume(sqrtShift, profiles["sqrt_shift"], blowup, V1)
            assert abs(mu(sqrtShift, V1, tie)) < 1e-8
            lstTies.append(tie)
        assert all(b > a for a, b in zip(lstTies, lstTies[1:]))
        assert lstTies[-1] > 10 * lstTies[0]

    def test_no_tie_when_always_double(self, absExp, profiles, blowups):
        with pytest.raises(NoTieError):
            tieVolume(absExp, profiles["abs_exp"], blowups["abs_exp"], 1.0)

    def test_no_tie_past_blowup(self, sqrtShift, profiles, blowups):
        with pytest.raises(NoTieError):
            tieVolume(sqrtShift, profiles["sqrt_shift"], blowups["sqrt_shift"], 1.0)

    def test_every_volume_ties_without_blowup(self, borell, profiles, blowups):
        for V1 in (0.5, 2.0):
            tie = tieVolume(borell, profiles["borell"], blowups["borell"], V1)
            assert tie > V1
            assert abs(mu(borell, V1, tie)) < 1e-8

    def test_arctan_tie_resolved(self, arctan, profiles, blowups):
        tie = tieVolume(arctan, profiles["arctan"], blowups["arctan"], 1.0)
        assert tie > 1.0
        assert abs(mu(arctan, 1.0, tie)) < 1e-8

    def test_sign_lost_in_rounding(self, arctan, profiles, blowups):
        # mu(32, V2) falls about log 2 per doubling of V2 and would cross zero near 2^70, where
        # the perimeters are so large that P3 - P2 is pure rounding
        with pytest.raises(TieBracketError):
            tieVolume(arctan, profiles["arctan"], blowups["arctan"], 32.0)

    def test_rounding_floor_scales_with_perimeters(self, arctan):
        assert roundingFloor(arctan, 1e17, 1e17) > 128
        assert roundingFloor(arctan, 1.0, 2.0) < 1e-13

    def test_positive_volume_required(self, sqrtShift, profiles, blowups):
        with pytest.raises(UndefinedQuantityError):
            tieVolume(sqrtShift, profiles["sqrt_shift"], blowups["sqrt_shift"], 0.0)


class TestClassify:

    def test_equal_volumes_double(self, sqrtShift):
        for V in (0.1, 1.0, 10.0):
            assert classify(sqrtShift, None, V, V).verdict == Minimizer.DOUBLE

    def test_past_tie_is_triple(self, sqrtShift, profiles, blowups):
        blowup = blowups["sqrt_shift"]
        V1 = float(blowup.V0) / 2
        tie = tieVolume(sqrtShift, profiles["sqrt_shift"], blowup, V1)
        analysis = classify(sqrtShift, profiles["sqrt_shift"], V1, 2 * tie, blowup)
        assert analysis.verdict == Minimizer.TRIPLE
        assert analysis.mu == pytest.approx(analysis.P3 - analysis.P2)

    def test_at_tie(self, sqrtShift, profiles, blowups):
        blowup = blowups["sqrt_shift"]
        V1 = float(blowup.V0) / 2
        tie = tieVolume(sqrtShift, profiles["sqrt_shift"], blowup, V1)
        assert classify(sqrtShift, profiles["sqrt_shift"], V1, tie, blowup).verdict == Minimizer.TIE

    def test_tie_past_blowup_resolves_to_double(self, sqrtShift, profiles, blowups):
        blowup = blowups["sqrt_shift"]
        V1 = float(blowup.V0) / 2
        tie = tieVolume(sqrtShift, profiles["sqrt_shift"], blowup, V1)
        atZero = BlowupResult(ExtendedReal(0.0), (0.0, 0.0), Regime.ALWAYS_DOUBLE)
        assert classify(sqrtShift, None, V1, tie, atZero).verdict == Minimizer.DOUBLE

    def test_always_double_density(self, absExp):
        assert classify(absExp, None, 1.0, 100.0).verdict == Minimizer.DOUBLE

    def test_reports_intermediates(self, sqrtShift):
        analysis = classify(sqrtShift, None, 1.0, 1.0)
        assert analysis.v_tilde == pytest.approx(-1.0, abs=1e-12)
        assert analysis.P2 == pytest.approx(2 * math.sqrt(2) - 0.5, abs=1e-12)
        assert abs(analysis.residual) < 1e-10

    def test_borell_triple_for_large_second_volume(self, borell, profiles, blowups):
        tie = tieVolume(borell, profiles["borell"], blowups["borell"], 1.0)
        assert classify(borell, profiles["borell"], 1.0, 2 * tie, blowups["borell"]).verdict == Minimizer.TRIPLE
