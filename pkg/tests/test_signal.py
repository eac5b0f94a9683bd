import math

import numpy as np
import pytest

from spectralmix.distributions import DistributionSpec, Kind
from spectralmix.signal import (
    FloorViolation,
    NoiseBudget,
    NoiseContractViolation,
    Tone,
    centered_interval_oracle,
    empirical_cf_signal,
    exact_signal,
    inject_noise,
    project_oracle,
)


class TestExactSignal:
    def test_constant_tone(self):
        orc = exact_signal([Tone(1.0, np.zeros(2))], T=5.0)
        pts = np.array([[0.1, 0.2], [3.0, -1.0]])
        assert np.allclose(orc.query(pts), 1.0)

    def test_two_tone_cancellation(self):
        # 0.5 e^{i pi} + 0.5 e^{-i pi} = -1 at t = (1, 0)
        orc = exact_signal(
            [Tone(0.5, np.array([math.pi, 0.0])), Tone(0.5, np.array([-math.pi, 0.0]))],
            T=5.0,
        )
        assert orc.query(np.array([1.0, 0.0])) == pytest.approx(-1.0 + 0j, abs=1e-12)

    def test_hermitian_symmetry_real_weight(self):
        orc = exact_signal([Tone(0.7, np.array([1.3, -0.4]))], T=5.0)
        t = np.array([0.5, 0.25])
        assert orc.query(t) == pytest.approx(np.conj(orc.query(-t)), abs=1e-14)

    def test_linearity_of_union(self):
        t1 = [Tone(0.5, 1.0), Tone(0.2, -2.0)]
        t2 = [Tone(0.3, 0.7)]
        a, b, both = exact_signal(t1, 10.0), exact_signal(t2, 10.0), exact_signal(t1 + t2, 10.0)
        pts = np.linspace(0, 10, 64)
        assert np.abs(both.query(pts) - (a.query(pts) + b.query(pts))).max() <= 1e-12

    def test_empty_tone_set_rejected(self):
        with pytest.raises(ValueError):
            exact_signal([], T=1.0)

    def test_duplicate_frequencies_rejected(self):
        with pytest.raises(ValueError):
            exact_signal([Tone(0.5, 1.0), Tone(0.5, 1.0)], T=1.0)

    def test_query_accounting(self):
        orc = exact_signal([Tone(1.0, 0.0)], T=1.0)
        orc.query(0.5)
        orc.query(np.linspace(0, 1, 17))
        assert orc.query_count == 18

    def test_domain_enforced(self):
        orc = exact_signal([Tone(1.0, 0.0)], T=1.0)
        with pytest.raises(ValueError):
            orc.query(1.5)
        orc2 = exact_signal([Tone(1.0, np.zeros(2))], T=1.0)
        with pytest.raises(ValueError):
            orc2.query(np.array([1.0, 1.0]))


class TestEmpiricalCf:
    def test_single_sample_formula(self):
        y = np.array([[0.4, -1.1]])
        base = DistributionSpec(Kind.LAPLACE, 2, np.zeros(2))
        orc = empirical_cf_signal(y, base, np.zeros(2), floor=1e-3, T=3.0)
        t = np.array([0.5, 0.2])
        phi = 2.0 / (2.0 + (t @ t))
        assert orc.query(t) == pytest.approx(np.exp(1j * (t @ y[0])) / phi, abs=1e-12)

    def test_point_mass_base_unit_modulus(self):
        mu = np.array([1.5, -0.5])
        base = DistributionSpec(Kind.POINT_MASS, 2, np.zeros(2))
        orc = empirical_cf_signal(np.tile(mu, (10, 1)), base, np.zeros(2), floor=0.5, T=3.0)
        t = np.array([0.3, 0.9])
        assert orc.query(t) == pytest.approx(np.exp(1j * (t @ mu)), abs=1e-12)

    def test_floor_violation_raises(self):
        base = DistributionSpec(Kind.GAUSSIAN, 1, np.zeros(1))
        orc = empirical_cf_signal(np.zeros((5, 1)), base, np.zeros(1), floor=0.9, T=3.0)
        with pytest.raises(FloorViolation):
            orc.query(3.0)  # |phi|=e^{-4.5} << 0.9

    def test_dimension_mismatch(self):
        base = DistributionSpec(Kind.LAPLACE, 2, np.zeros(2))
        with pytest.raises(ValueError):
            empirical_cf_signal(np.zeros((5, 3)), base, np.zeros(2), 0.5, 1.0)

    def test_hoeffding_scale_agreement(self):
        # Laplace k=1, mu=0, shifted ball ||v|| = 2T with T=5: over 50 random
        # queries, |x(t) - 1| is controlled by the inverse floor at radius 3T
        # times the Hoeffding deviation (constant 3).
        T, n = 5.0, 100_000
        d = 2
        base = DistributionSpec(Kind.LAPLACE, d, np.zeros(d))
        rng = np.random.default_rng(11)
        samples = base.sample(n, rng)
        v = np.array([2 * T, 0.0])
        floor = 2.0 / (2.0 + (3 * T) ** 2)
        orc = empirical_cf_signal(samples, base, v, floor * 0.99, T)
        t = rng.standard_normal((50, d))
        t *= rng.uniform(0, T, (50, 1)) / np.linalg.norm(t, axis=1, keepdims=True)
        # x*(t) = e^{i<t,0>} = 1 for the single zero-mean component
        dev = np.abs(orc.query(t) - 1.0).max()
        bound = 3.0 * (2.0 + (3 * T) ** 2) / 2.0 * math.sqrt(math.log(50 * 20) / n)
        assert dev <= bound

    def test_query_radius_respects_T(self):
        base = DistributionSpec(Kind.LAPLACE, 2, np.zeros(2))
        orc = empirical_cf_signal(np.zeros((3, 2)), base, np.zeros(2), 1e-6, T=2.0)
        with pytest.raises(ValueError):
            orc.query(np.array([3.0, 0.0]))


class TestInjectNoise:
    def test_zero_noise_identity(self):
        orc = exact_signal([Tone(1.0, 1.0)], T=10.0)
        noisy = inject_noise(orc, lambda t: np.zeros_like(np.asarray(t), dtype=complex), 0.0)
        pts = np.linspace(0, 10, 32)
        assert np.allclose(noisy.query(pts), exact_signal([Tone(1.0, 1.0)], 10.0).query(pts))

    def test_constant_shift(self):
        orc = exact_signal([Tone(1.0, 0.0)], T=1.0)
        noisy = inject_noise(orc, lambda t: 0.1j * np.ones_like(np.asarray(t)), 0.1)
        assert noisy.query(0.5) == pytest.approx(1.0 + 0.1j, abs=1e-14)

    def test_oscillating_noise_max_deviation(self):
        tones = [Tone(1.0, 0.0)]
        clean = exact_signal(tones, T=20.0)
        noisy = inject_noise(
            exact_signal(tones, T=20.0),
            lambda t: 0.05 * np.exp(1j * 37.0 * np.asarray(t)),
            0.05,
        )
        grid = np.linspace(0, 20, 2048)
        dev = np.abs(noisy.query(grid) - clean.query(grid))
        assert dev.max() == pytest.approx(0.05, abs=1e-12)
        assert noisy.g_max_seen == pytest.approx(0.05, abs=1e-12)

    def test_contract_violation(self):
        orc = exact_signal([Tone(1.0, 0.0)], T=1.0)
        noisy = inject_noise(orc, lambda t: 0.2 * np.ones_like(np.asarray(t)), 0.1)
        with pytest.raises(NoiseContractViolation):
            noisy.query(0.5)

    def test_records_max_seen(self):
        orc = exact_signal([Tone(1.0, 0.0)], T=10.0)
        noisy = inject_noise(orc, lambda t: 0.01 * np.asarray(t) / 10.0, 0.01)
        noisy.query(np.array([1.0, 5.0]))
        assert noisy.g_max_seen == pytest.approx(0.005)
        noisy.query(10.0)
        assert noisy.g_max_seen == pytest.approx(0.01)


class TestNoiseBudget:
    def test_level_definition(self):
        nb = NoiseBudget(g_max=0.3, theta=0.01, weight_energy=4.0)
        assert nb.level == pytest.approx(math.sqrt(0.09 + 0.04))


class TestRemap:
    def test_centered_interval_phase(self):
        # remap t -> t - T/2 multiplies tone weights by e^{-i f T/2}
        T, f, w = 8.0, 1.7, 0.6 + 0.1j
        orc = centered_interval_oracle(lambda t: w * np.exp(1j * f * t), T)
        t = np.linspace(0, T, 9)
        expected = w * np.exp(-1j * f * T / 2) * np.exp(1j * f * t)
        assert np.allclose(orc.query(t), expected, atol=1e-12)

    def test_projection_counts_base_queries(self):
        orc = exact_signal([Tone(1.0, np.array([1.0, 0.0]))], T=4.0)
        proj = project_oracle(orc, np.array([1.0, 0.0]), T1d=4.0)
        proj.query(np.linspace(0, 4, 11))
        assert orc.query_count == 11
