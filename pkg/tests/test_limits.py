import math

import pytest

from densities import DensityModel, ExtendedReal
from errors import InconclusiveLimitError, ModelViolationError, UnboundedInverseError
from expressions import parse
from limits import Verdict, doublingDefect, estimateL, estimateM, estimateProfile, scanLimit, traceIsMonotone
from parameters import getParams


class TestScanLimit:

    def test_converges(self):
        estimate = scanLimit(lambda V: 1 - 1 / V ** 2, getParams())
        assert estimate.verdict == Verdict.CONVERGED
        assert float(estimate.value) == pytest.approx(1.0, abs=1e-8)

    def test_threshold(self):
        estimate = scanLimit(lambda V: V * V, getParams({"Divergence Start": 40}))
        assert estimate.verdict == Verdict.DECLARED_INFINITE
        assert estimate.value.is_infinite()
        assert estimate.trace[-1][2] > 1e9

    def test_logarithmic_growth(self):
        estimate = scanLimit(math.log, getParams())
        assert estimate.verdict == Verdict.DECLARED_INFINITE
        assert estimate.trace[-1][0] == 10 + 8 - 1

    def test_shrinking_increments_stay_inconclusive(self):
        # 2 - 1/(k+1): increments shrink by (k-1)/(k+1), slowly but surely
        estimate = scanLimit(lambda V: 2 - 1 / math.log2(2 * V), getParams())
        assert estimate.verdict == Verdict.INCONCLUSIVE
        assert float(estimate.value) < 2

    def test_inconclusive_keeps_last_sample(self):
        estimate = scanLimit(lambda V: 1 - 1 / V, getParams({"Limit Max Exponent": 12}))
        assert estimate.verdict == Verdict.INCONCLUSIVE
        assert float(estimate.value) == 1 - 2.0 ** -12
        assert len(estimate.trace) == 13

    def test_sampling_error_stops_scan(self):
        def sample(V):
            if V > 8:
                raise UnboundedInverseError("beyond the table")
            return -1 / V

        estimate = scanLimit(sample, getParams())
        assert estimate.verdict == Verdict.INCONCLUSIVE
        assert [k for k, _, _ in estimate.trace] == [0, 1, 2, 3]

    def test_trace_layout(self):
        estimate = scanLimit(lambda V: -1 / V, getParams())
        k, V, value = estimate.trace[5]
        assert (k, V, value) == (5, 32.0, -1 / 32)


class TestCorpusLimits:

    def test_abs_exp(self, profiles):
        profile = profiles["abs_exp"]
        assert float(profile.L) == pytest.approx(1.0, abs=1e-8)
        assert float(profile.M) == pytest.approx(0.0, abs=1e-8)

    def test_sqrt_shift(self, profiles):
        profile = profiles["sqrt_shift"]
        assert float(profile.L) == pytest.approx(1.0, abs=1e-8)
        assert float(profile.M) == pytest.approx(0.5, abs=1e-8)
        assert profile.L_verdict == profile.M_verdict == Verdict.CONVERGED

    def test_arctan(self, profiles):
        profile = profiles["arctan"]
        assert float(profile.L) == pytest.approx(math.pi / 2, abs=1e-8)
        assert profile.M_verdict == Verdict.DECLARED_INFINITE
        assert profile.M.is_infinite()

    def test_borell(self, profiles):
        profile = profiles["borell"]
        assert profile.L_verdict == Verdict.DECLARED_INFINITE
        assert profile.M.is_infinite()

    def test_quadratic(self, profiles):
        assert profiles["quadratic"].L.is_infinite()
        assert profiles["quadratic"].M.is_infinite()

    def test_override_is_honoured(self, profiles):
        profile = profiles["cosh_position"]
        assert profile.M == 0
        assert profile.M_trace == []
        assert float(profile.L) == pytest.approx(1.0, abs=1e-8)

    def test_telescoping_diagnostic(self, profiles):
        for name in ("abs_exp", "sqrt_shift", "cosh_position"):
            assert any(line.endswith("holds") for line in profiles[name].diagnostics), name


class TestSlowlyConvergingSlope:

    def test_bounded_slope_is_not_declared_infinite(self):
        # (log f)' = atan(x), so L = pi/2, approached like 1/log V
        model = DensityModel(parse("exp(x*atan(x) - log(x^2+1)/2)"), "position")
        estimate = estimateL(model)
        assert estimate.verdict == Verdict.INCONCLUSIVE
        assert not estimate.value.is_infinite()
        assert 1.4 < float(estimate.value) < math.pi / 2

    def test_corpus_overrides_for_slow_divergence(self, corpus, profiles):
        for name in ("borell", "exp_cosh"):
            assert corpus[name].analytic_L.is_infinite(), name
            assert profiles[name].L_verdict == Verdict.DECLARED_INFINITE
            assert profiles[name].L_trace == []
            assert profiles[name].M.is_infinite()


class TestInfiniteSlopeForcesInfiniteDefect:

    def test_corpus(self, profiles):
        assert len(profiles) >= 6
        for name, profile in profiles.items():
            if profile.L.is_infinite():
                assert profile.M.is_infinite(), name

    def test_contradictory_overrides(self):
        model = DensityModel(parse("V^2 + 1"), "volume", ExtendedReal.parse("inf"), ExtendedReal(0.0))
        with pytest.raises(ModelViolationError):
            estimateProfile(model)

    def test_deduction_from_inconclusive_defect(self):
        params = getParams({"Limit Max Exponent": 12})
        model = DensityModel(parse("V^2 + 1"), "volume", ExtendedReal.parse("inf"), None, params)
        profile = estimateProfile(model)
        assert profile.M_verdict == Verdict.DECLARED_INFINITE


class TestTraces:

    def test_traces_are_monotone(self, profiles):
        for name, profile in profiles.items():
            assert traceIsMonotone(profile.L_trace), name
            assert traceIsMonotone(profile.M_trace), name

    def test_finite_estimate_bounds_trace(self, profiles):
        for profile in profiles.values():
            for value, trace in ((profile.L, profile.L_trace), (profile.M, profile.M_trace)):
                if trace and value.is_finite():
                    assert float(value) >= trace[-1][2] - 1e-12

    def test_monotone_check_flags_decrease(self):
        assert not traceIsMonotone([(0, 1.0, 1.0), (1, 2.0, 0.5)])


class TestDoublingDefect:

    def test_cancellation_survives(self, sqrtShift):
        V = 2.0 ** 30
        naive = math.sqrt(4 * V * V + 1) - 2 * math.sqrt(V * V + 1) + 0.5
        # in doubles the 3/(4V) term vanishes entirely
        assert doublingDefect(sqrtShift, V) == pytest.approx(0.5 - 3 / (4 * V), abs=1e-15)
        assert naive == 0.5

    def test_estimates_separately(self, sqrtShift):
        assert estimateL(sqrtShift).verdict == Verdict.CONVERGED
        assert float(estimateM(sqrtShift).value) == pytest.approx(0.5, abs=1e-8)


class TestInconclusive:

    def test_require_raises(self):
        model = DensityModel(parse("sqrt(V^2 + 1) - 1/2"), "volume", params=getParams({"Limit Max Exponent": 10}))
        profile = estimateProfile(model)
        assert profile.M_verdict == Verdict.INCONCLUSIVE
        with pytest.raises(InconclusiveLimitError):
            profile.require("M")
