import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tonealloc import (
    Scenario,
    ValidationError,
    cap_power,
    capped_rate,
    effective_sinr,
    rate_derivative,
)

FINITE = dict(allow_nan=False, allow_infinity=False)


class TestEffectiveSinr:
    def test_zero_power(self):
        assert effective_sinr(0.0, 1.0, 1.0, 0.5) == 0.0

    def test_no_self_noise_reduces_to_snr(self):
        assert effective_sinr(3.0, 1.0, 1.0, 0.0) == pytest.approx(3.0)

    def test_direct_evaluation(self):
        # 10 / (1 + 0.1*10) = 5
        assert effective_sinr(10.0, 1.0, 1.0, 0.1) == pytest.approx(5.0)

    def test_negative_power_rejected(self):
        with pytest.raises(ValidationError):
            effective_sinr(-1.0, 1.0, 1.0, 0.0)

    def test_non_finite_power_rejected(self):
        with pytest.raises(ValidationError):
            effective_sinr(np.nan, 1.0, 1.0, 0.0)
        with pytest.raises(ValidationError):
            effective_sinr(np.inf, 1.0, 1.0, 0.0)

    @settings(max_examples=200, deadline=None)
    @given(q=st.floats(0, 1e6, **FINITE), h=st.floats(1e-3, 1e3, **FINITE),
           sigma2=st.floats(1e-3, 1e3, **FINITE), beta=st.floats(1e-6, 10, **FINITE))
    def test_saturates_below_inverse_beta(self, q, h, sigma2, beta):
        assert effective_sinr(q, h, sigma2, beta) < 1.0 / beta

    @settings(max_examples=200, deadline=None)
    @given(q1=st.floats(0, 1e5, **FINITE), dq=st.floats(1e-6, 1e5, **FINITE),
           h=st.floats(1e-3, 1e3, **FINITE), sigma2=st.floats(1e-3, 1e3, **FINITE),
           beta=st.floats(0, 10, **FINITE))
    def test_strictly_increasing(self, q1, dq, h, sigma2, beta):
        s1 = effective_sinr(q1, h, sigma2, beta)
        s2 = effective_sinr(q1 + dq, h, sigma2, beta)
        assert s1 <= s2
        if beta * h * (q1 + dq) < 1e6 * sigma2:  # short of float saturation
            assert s1 < s2


class TestCappedRate:
    def test_zero_power(self):
        assert capped_rate(0.0, 2.0, 0.7, 0.3, 5.0) == 0.0

    def test_exactly_at_cap(self):
        # q_cap = 1*1/(1*(1-0.5)) = 2, and s(2) = 1 there
        assert cap_power(1.0, 1.0, 0.5, 1.0) == pytest.approx(2.0)
        assert capped_rate(2.0, 1.0, 1.0, 0.5, 1.0) == pytest.approx(np.log(2.0))

    def test_constant_beyond_cap(self):
        target = np.log(2.0)
        assert capped_rate(100.0, 1.0, 1.0, 0.5, 1.0) == pytest.approx(target)
        # grid check of constancy over the capped region
        q = np.linspace(2.0, 100.0, 10_001)
        r = capped_rate(q, 1.0, 1.0, 0.5, 1.0)
        assert np.allclose(r, target, atol=1e-12)

    def test_concavity_on_random_triples(self, rng):
        q1 = rng.uniform(0, 50, 10_000)
        q2 = rng.uniform(0, 50, 10_000)
        t = rng.uniform(0, 1, 10_000)
        h = rng.uniform(0.1, 10, 10_000)
        sigma2 = rng.uniform(0.1, 10, 10_000)
        beta = rng.uniform(0, 0.5, 10_000)
        s_max = np.where(rng.random(10_000) < 0.5, rng.uniform(0.5, 20, 10_000), np.inf)
        mid = capped_rate(t * q1 + (1 - t) * q2, h, sigma2, beta, s_max)
        chord = t * capped_rate(q1, h, sigma2, beta, s_max) \
            + (1 - t) * capped_rate(q2, h, sigma2, beta, s_max)
        assert np.all(mid >= chord - 1e-12)


class TestRateDerivative:
    def test_at_zero_no_self_noise(self):
        assert rate_derivative(0.0, 1.0, 1.0, 0.0, np.inf) == pytest.approx(1.0)

    def test_classic_inverse(self):
        assert rate_derivative(1.0, 1.0, 1.0, 0.0, np.inf) == pytest.approx(0.5)

    def test_with_self_noise(self):
        expected = 1.0 / (1.5 * 2.5)
        got = rate_derivative(1.0, 1.0, 1.0, 0.5, np.inf)
        assert got == pytest.approx(expected)
        # finite-difference cross-check at step 1e-6
        eps = 1e-6
        fd = (capped_rate(1 + eps, 1, 1, 0.5, np.inf)
              - capped_rate(1 - eps, 1, 1, 0.5, np.inf)) / (2 * eps)
        assert got == pytest.approx(fd, rel=1e-6)

    def test_zero_beyond_cap_left_limit_at_cap(self):
        qc = cap_power(1.0, 1.0, 0.5, 1.0)
        assert rate_derivative(qc + 1e-9, 1.0, 1.0, 0.5, 1.0) == 0.0
        below = 1.0 / ((1.0 + 0.5 * qc) * (1.0 + 1.5 * qc))
        assert rate_derivative(qc, 1.0, 1.0, 0.5, 1.0) == pytest.approx(below)

    def test_matches_centered_differences(self, rng):
        n = 10_000
        h = rng.uniform(0.1, 10, n)
        sigma2 = rng.uniform(0.1, 10, n)
        beta = rng.uniform(0, 0.5, n)
        s_max = np.where(rng.random(n) < 0.5, rng.uniform(0.5, 20, n), np.inf)
        qc = cap_power(h, sigma2, beta, s_max)
        q = rng.uniform(0, 20, n)
        # stay clear of the kink
        near = np.isfinite(qc) & (np.abs(q - qc) < 1e-3)
        q = np.where(near, np.maximum(qc - 0.5, qc / 2), q)
        eps = 1e-6 * np.maximum(q, 1.0)
        eps = np.minimum(eps, np.where(np.isfinite(qc), np.abs(qc - q) / 2, eps))
        eps = np.maximum(eps, 1e-9)
        fd = (capped_rate(q + eps, h, sigma2, beta, s_max)
              - capped_rate(np.maximum(q - eps, 0), h, sigma2, beta, s_max)) \
            / (eps + np.minimum(q, eps))
        exact = rate_derivative(q, h, sigma2, beta, s_max)
        ok = np.abs(fd - exact) <= 1e-6 * np.maximum(np.abs(exact), 1e-9) + 1e-9
        assert np.mean(ok) > 0.999

    def test_strictly_decreasing_below_cap(self, rng):
        q = np.sort(rng.uniform(0, 1.9, 100))
        d = rate_derivative(q, 1.0, 1.0, 0.5, 1.0)
        assert np.all(np.diff(d) < 0)


class TestScenario:
    def _kwargs(self, **over):
        base = dict(
            num_users=2, num_tones=2,
            gain=[[1.0, 2.0], [3.0, 4.0]],
            noise=[1.0, 1.0],
            self_noise=[0.0, 0.1],
            snr_cap=[np.inf, 10.0],
            power_budget=[1.0, 2.0],
            weight=[1.0, 1.0],
        )
        base.update(over)
        return base

    def test_valid_roundtrip(self):
        sc = Scenario(**self._kwargs())
        assert sc.num_users == 2 and sc.num_tones == 2
        assert sc.gain.shape == (2, 2)

    def test_nonpositive_gain(self):
        with pytest.raises(ValidationError, match="gain"):
            Scenario(**self._kwargs(gain=[[1.0, -2.0], [3.0, 4.0]]))

    def test_negative_self_noise(self):
        with pytest.raises(ValidationError, match=r"self_noise\[1\]"):
            Scenario(**self._kwargs(self_noise=[0.0, -0.1]))

    def test_nonpositive_budget(self):
        with pytest.raises(ValidationError, match=r"power_budget\[0\] must be > 0"):
            Scenario(**self._kwargs(power_budget=[-1.0, 2.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="noise"):
            Scenario(**self._kwargs(noise=[1.0]))

    def test_immutable_arrays(self):
        sc = Scenario(**self._kwargs())
        with pytest.raises(ValueError):
            sc.gain[0, 0] = 5.0
