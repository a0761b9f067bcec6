"""Tests for autocorrelation, Yule-Walker fitting, and the post-filter."""

import numpy as np
import pytest
from scipy.linalg import solve_toeplitz
from scipy.signal import lfilter
from sklearn.exceptions import NotFittedError

from fadefree import (DegenerateInputError, NoiseWhitener, NonStationaryFitError,
                      WhitenedChannel, autocorrelation, fit_noise_whitener,
                      postfilter_apply, spectral_flatness, yule_walker_fit)


def ar1(n, a=0.5, seed=4):
    rng = np.random.default_rng(seed)
    return lfilter([1.0], [1.0, -a], rng.standard_normal(n))


class TestAutocorrelation:
    def test_white_noise(self):
        rng = np.random.default_rng(2)
        r = autocorrelation(rng.standard_normal(10 ** 6), 5)
        assert abs(r[0] - 1.0) < 0.01
        assert np.all(np.abs(r[1:]) < 0.01)

    def test_ar1_lag_ratio(self):
        r = autocorrelation(ar1(200000), 1)
        assert abs(r[1] / r[0] - 0.5) < 0.02

    def test_zero_input_rejected(self):
        with pytest.raises(DegenerateInputError):
            autocorrelation(np.zeros(100), 4)

    def test_needs_enough_samples(self):
        with pytest.raises(ValueError):
            autocorrelation(np.ones(4), 4)


class TestYuleWalker:
    def test_ar1_closed_form(self):
        # direct 2x2 Yule-Walker solve as the oracle: a = [0.5, 0]
        ch = yule_walker_fit([1.0, 0.5, 0.25], 2)
        assert np.allclose(ch.h, [1.0, -0.5, 0.0], atol=1e-12)
        assert ch.sigma2 == pytest.approx(0.75, abs=1e-12)

    def test_white_noise_identity_filter(self):
        ch = yule_walker_fit([1.0, 0.0, 0.0, 0.0], 3)
        assert np.allclose(ch.h, [1.0, 0.0, 0.0, 0.0])
        assert ch.sigma2 == pytest.approx(1.0)

    def test_order_zero(self):
        ch = yule_walker_fit([2.5], 0)
        assert ch.h.tolist() == [1.0]
        assert ch.sigma2 == 2.5

    @pytest.mark.parametrize("order", [1, 4, 16, 32])
    def test_levinson_matches_direct_toeplitz_solve(self, order):
        rng = np.random.default_rng(order)
        noise = lfilter([1.0, 0.4], [1.0, -0.6, 0.2],
                        rng.standard_normal(50000))
        r = autocorrelation(noise, order)
        ch = yule_walker_fit(r, order)
        a_direct = solve_toeplitz(r[:-1], r[1:])
        assert np.allclose(-ch.h[1:], a_direct, rtol=1e-9, atol=1e-9)

    def test_sigma2_monotone_in_order(self):
        noise = ar1(100000, a=0.7)
        r = autocorrelation(noise, 32)
        sig = [yule_walker_fit(r, L).sigma2 for L in range(0, 33)]
        assert all(s1 >= s2 - 1e-12 for s1, s2 in zip(sig, sig[1:]))

    def test_non_stationary_rejected(self):
        with pytest.raises(NonStationaryFitError):
            yule_walker_fit([1.0, 1.2], 1)

    def test_invalid_r0(self):
        with pytest.raises(ValueError):
            yule_walker_fit([0.0, 0.1], 1)


class TestPostfilter:
    def test_identity_filter(self):
        x = np.arange(5.0)
        ch = WhitenedChannel(np.array([1.0]), 1.0)
        assert np.array_equal(postfilter_apply(x, ch), x)

    def test_hand_convolution(self):
        ch = WhitenedChannel(np.array([1.0, 0.5]), 1.0)
        out = postfilter_apply(np.array([1.0, 1.0, 1.0]), ch)
        assert np.allclose(out, [1.0, 1.5, 1.5])

    def test_time_invariance(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(200)
        ch = WhitenedChannel(np.array([1.0, -0.3, 0.1]), 1.0)
        direct = postfilter_apply(np.concatenate([np.zeros(7), x]), ch)
        shifted = postfilter_apply(x, ch)
        assert np.allclose(direct[7:], shifted)

    def test_whitens_ar1(self):
        noise = ar1(200000)
        ch = fit_noise_whitener(noise, 1)
        out = postfilter_apply(noise, ch)
        r = autocorrelation(out, 1)
        assert abs(r[1] / r[0]) < 0.05
        assert spectral_flatness(out) > spectral_flatness(noise)


class TestSpectralFlatness:
    def test_white_noise_high(self):
        rng = np.random.default_rng(5)
        assert spectral_flatness(rng.standard_normal(100000)) > 0.9

    def test_pure_tone_low(self):
        t = np.arange(65536)
        assert spectral_flatness(np.sin(0.31 * t)) < 0.05

    def test_range(self):
        rng = np.random.default_rng(6)
        f = spectral_flatness(rng.standard_normal(10000))
        assert 0.0 < f <= 1.0


class TestWhitenedChannel:
    def test_invariants(self):
        with pytest.raises(ValueError):
            WhitenedChannel(np.array([0.0, 1.0]), 1.0)
        with pytest.raises(ValueError):
            WhitenedChannel(np.array([1.0]), 0.0)

    def test_csv_round_trip(self, tmp_path):
        ch = WhitenedChannel(np.array([1.0, -0.25, 0.125]), 0.4375)
        path = tmp_path / "wch.csv"
        ch.save_csv(path)
        text = path.read_text().splitlines()
        assert text[0] == "L=2,sigma2=0.4375"
        back = WhitenedChannel.load_csv(path)
        assert np.array_equal(back.h, ch.h)
        assert back.sigma2 == ch.sigma2


class TestNoiseWhitenerEstimator:
    def test_fit_on_noise_record(self):
        noise = ar1(50000)
        w = NoiseWhitener(order=4).fit(noise)
        assert w.taps_[0] == 1.0
        assert w.noise_variance_ > 0
        out = w.transform(noise)
        assert len(out) == len(noise)

    def test_fit_on_samples_and_symbols(self):
        rng = np.random.default_rng(8)
        y = np.where(rng.integers(0, 2, 20000) > 0, 1, -1)
        x = y + ar1(20000, a=0.6, seed=9) * 0.3
        w = NoiseWhitener(order=2).fit(x, y.astype(float))
        direct = fit_noise_whitener(x[:20000] - y, 2)
        assert np.allclose(w.taps_, direct.h)

    def test_requires_fit(self):
        with pytest.raises(NotFittedError):
            NoiseWhitener(order=2).transform(np.ones(10))
