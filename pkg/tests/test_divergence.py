import math

import numpy as np
import pytest

from apure.divergence import (
    gaussian_discrepancy,
    itakura_saito,
    kl_divergence,
    kl_prox,
    ml_estimate,
)


def golden_section(f, lo, hi, tol=1e-12):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    while b - a > tol:
        if f(c) < f(d):
            b = d
        else:
            a = c
        c = b - phi * (b - a)
        d = a + phi * (b - a)
    return 0.5 * (a + b)


class TestKLDivergence:
    def test_known_value(self):
        # d_KL(2 | 1) = 2 ln 2 + 1 - 2 = 2 ln 2 - 1
        val = kl_divergence([2.0], [1.0], [1.0])
        assert val == pytest.approx(2.0 * math.log(2.0) - 1.0, abs=1e-12)

    def test_zero_at_equality(self):
        y = np.array([1.0, 5.0, 0.0])
        assert kl_divergence(y, y, np.ones(3)) == pytest.approx(0.0, abs=1e-12)

    def test_zero_count_branch(self):
        # Y = 0, U >= 0 contributes U / alpha
        assert kl_divergence([0.0], [3.0], [2.0]) == pytest.approx(1.5)
        assert kl_divergence([0.0], [0.0], [2.0]) == 0.0

    def test_infeasible_returns_inf(self):
        assert kl_divergence([2.0], [0.0], [1.0]) == math.inf
        assert kl_divergence([0.0], [-1.0], [1.0]) == math.inf

    def test_scaling_identity(self):
        # sum_t d_KL(Y_t/a | U_t/a) = KL(Y | U) / a for constant alpha
        rng = np.random.default_rng(1)
        y = rng.uniform(1, 10, 8)
        u = rng.uniform(1, 10, 8)
        a = 3.7
        base = kl_divergence(y, u, np.ones(8))
        scaled = kl_divergence(y, u, np.full(8, a))
        assert scaled == pytest.approx(base / a, rel=1e-12)

    def test_nonnegative(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            y = rng.uniform(0, 5, 6)
            u = rng.uniform(0.1, 5, 6)
            assert kl_divergence(y, u, np.ones(6)) >= -1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence([1.0, 2.0], [1.0, 2.0, 3.0], 1.0)


class TestOtherDiscrepancies:
    def test_gaussian(self):
        val = gaussian_discrepancy([3.0, 1.0], [1.0, 1.0], [2.0, 1.0])
        assert val == pytest.approx(4.0 / 4.0 + 0.0)

    def test_itakura_saito_infeasible(self):
        assert itakura_saito([0.0], [1.0], [1.0]) == math.inf
        assert itakura_saito([1.0], [1.0], [0.0]) == math.inf

    def test_itakura_saito_finite(self):
        assert math.isfinite(itakura_saito([2.0, 3.0], [1.5, 1.5], [1.0, 2.0]))


class TestMLEstimate:
    def test_componentwise_ratio(self):
        np.testing.assert_allclose(
            ml_estimate([2.0, 6.0], [4.0, 3.0]), [0.5, 2.0]
        )

    def test_zero_memory_rejected(self):
        with pytest.raises(ValueError):
            ml_estimate([1.0], [0.0])


class TestKLProx:
    @staticmethod
    def prox_objective(x, v, tau, y, psi, alpha):
        if y > 0:
            if x * psi <= 0:
                return math.inf
            r = y / alpha
            u = x * psi / alpha
            fit = r * math.log(r / u) + u - r
        else:
            if x * psi < 0:
                return math.inf
            fit = x * psi / alpha
        return (x - v) ** 2 / (2.0 * tau) + fit

    def test_against_golden_section_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            v = rng.uniform(-2, 5)
            tau = rng.uniform(0.05, 3)
            y = rng.uniform(0.1, 10)
            psi = rng.uniform(0.2, 5)
            alpha = rng.uniform(0.2, 5)
            got = kl_prox(v, tau, y, psi, alpha)
            ora = golden_section(
                lambda x: self.prox_objective(x, v, tau, y, psi, alpha),
                1e-12,
                abs(v) + 20 * tau + 20,
            )
            assert got == pytest.approx(ora, abs=1e-7)

    def test_zero_count_branch(self):
        # y = 0: prox is max(v - tau psi / alpha, 0)
        assert kl_prox(3.0, 1.0, 0.0, 2.0, 4.0) == pytest.approx(2.5)
        assert kl_prox(0.1, 1.0, 0.0, 2.0, 4.0) == pytest.approx(0.0)

    def test_small_tau_limit(self):
        # tau -> 0 pins the prox at v (for v in the domain)
        v = 2.0
        got = kl_prox(v, 1e-10, 5.0, 1.0, 1.0)
        assert got == pytest.approx(v, abs=1e-5)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        v = rng.uniform(-1, 4, 16)
        y = rng.uniform(0, 5, 16)
        psi = rng.uniform(0.5, 2, 16)
        alpha = rng.uniform(0.5, 2, 16)
        tau = 0.7
        vec = kl_prox(v, tau, y, psi, alpha)
        for i in range(16):
            assert vec[i] == pytest.approx(
                kl_prox(v[i], tau, y[i], psi[i], alpha[i]), rel=1e-12
            )

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            kl_prox(1.0, 0.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            kl_prox(1.0, 1.0, 1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            kl_prox(1.0, 1.0, 1.0, 1.0, -1.0)
        with pytest.raises(ValueError):
            kl_prox(1.0, 1.0, -1.0, 1.0, 1.0)
