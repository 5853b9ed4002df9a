"""Denoiser contracts: soft thresholding arithmetic, SURE threshold tuning
against ground-truth oracles, Wiener shrinkage, and the imaginary policy."""

import numpy as np
import pytest

from dvdamp.denoisers import (
    DEFAULT_SURE_GRID,
    IdentityDenoiser,
    ImaginaryPolicy,
    SoftThresholdDenoiser,
    SureThresholdDenoiser,
    WienerSubbandDenoiser,
    apply_imaginary_policy,
    sure_soft_threshold,
)
from dvdamp.wavelet import SubbandLayout, WaveletPyramid, haar_forward, haar_inverse


def _soft(coeffs, lam):
    mag = np.abs(coeffs)
    return coeffs * np.maximum(0.0, 1.0 - lam / np.maximum(mag, 1e-300))


class TestSoftThreshold:
    def test_zero_thresholds_identity(self):
        rng = np.random.default_rng(0)
        image = rng.uniform(0, 255, (32, 32)) + 0j
        out = SoftThresholdDenoiser()(image, np.zeros(13))
        assert np.abs(out - image).max() < 1e-10

    def test_complex_shrinkage_value(self):
        # coefficient 3+4i with lam=2: magnitude 5 shrinks to 3 -> 1.8+2.4i
        assert np.abs(_soft(np.array([3 + 4j]), 2.0)[0] - (1.8 + 2.4j)) < 1e-12

    def test_band_below_threshold_zeroed(self):
        rng = np.random.default_rng(1)
        layout = SubbandLayout.create(32, 32)
        pyramid = haar_forward(rng.uniform(0, 255, (32, 32)))
        image = haar_inverse(pyramid)
        band = layout.bands[5]
        max_mag = np.abs(pyramid.coefficients[band.rows, band.cols]).max()
        sds = np.zeros(13)
        sds[5] = max_mag * 1.5
        out_pyr = haar_forward(SoftThresholdDenoiser()(image, sds))
        assert np.abs(out_pyr.coefficients[band.rows, band.cols]).max() < 1e-9

    def test_ll_band_untouched(self):
        rng = np.random.default_rng(2)
        image = rng.uniform(0, 255, (32, 32))
        out = haar_forward(SoftThresholdDenoiser()(image + 0j, np.full(13, 1e6)))
        ref = haar_forward(image)
        assert np.abs(out.band(0) - ref.band(0)).max() < 1e-8 * np.abs(
            ref.band(0)
        ).max()


class TestSureThreshold:
    def _synthetic_band(self, rng, size, signal_sd, noise_sd):
        clean = signal_sd * (
            rng.standard_normal(size) * (rng.random(size) < 0.1)
        )
        noise = (noise_sd / np.sqrt(2)) * (
            rng.standard_normal(size) + 1j * rng.standard_normal(size)
        )
        return clean, clean + noise

    def test_noiseless_band_picks_smallest_threshold(self):
        rng = np.random.default_rng(3)
        coeffs = rng.standard_normal(512) * 100
        sd = 1e-9
        risks = [
            sure_soft_threshold(coeffs, sd**2, g * sd) for g in DEFAULT_SURE_GRID
        ]
        assert int(np.argmin(risks)) == 0

    def test_sure_tracks_true_mse(self):
        # Monte Carlo: the risk estimate's gap to the true MSE averages
        # below 5% of the true MSE across 50 seeds.
        gaps, mses = [], []
        for seed in range(50):
            rng = np.random.default_rng(seed)
            clean, noisy = self._synthetic_band(rng, 4096, 80.0, 10.0)
            lam = 15.0
            denoised = _soft(noisy, lam)
            true_mse = np.sum(np.abs(denoised - clean) ** 2)
            estimate = sure_soft_threshold(noisy, 100.0, lam)
            gaps.append(abs(estimate - true_mse))
            mses.append(true_mse)
        assert np.mean(gaps) <= 0.05 * np.mean(mses)

    def test_sure_selection_near_oracle(self):
        # Grid-search oracle with ground truth on pure-noise bands. The best
        # grid point often reaches MSE exactly 0, so closeness is scored
        # against the achievable improvement: the SURE pick's excess MSE over
        # the oracle best stays below 10% of the no-denoising MSE.
        sure_mses, best_mses = [], []
        sd = 10.0
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            noisy = (sd / np.sqrt(2)) * (
                rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
            )
            grid_mses = []
            risks = []
            for g in DEFAULT_SURE_GRID:
                denoised = _soft(noisy, g * sd)
                grid_mses.append(np.mean(np.abs(denoised) ** 2))
                risks.append(sure_soft_threshold(noisy, sd**2, g * sd))
            sure_mses.append(grid_mses[int(np.argmin(risks))])
            best_mses.append(min(grid_mses))
        excess = np.mean(sure_mses) - np.mean(best_mses)
        assert excess <= 0.1 * sd**2

    def test_denoiser_runs_and_preserves_shape(self):
        rng = np.random.default_rng(4)
        image = rng.uniform(0, 255, (64, 64)) + 0j
        out = SureThresholdDenoiser()(image, np.full(13, 5.0))
        assert out.shape == image.shape
        assert np.isfinite(out).all()

    def test_zero_sd_bands_untouched(self):
        rng = np.random.default_rng(5)
        image = rng.uniform(0, 255, (32, 32)) + 0j
        out = SureThresholdDenoiser()(image, np.zeros(13))
        assert np.abs(out - image).max() < 1e-10


class TestWiener:
    def test_zero_sd_identity(self):
        rng = np.random.default_rng(6)
        image = rng.uniform(0, 255, (32, 32)) + 0j
        out = WienerSubbandDenoiser()(image, np.zeros(13))
        assert np.abs(out - image).max() < 1e-10

    def test_pure_noise_band_zeroed(self):
        rng = np.random.default_rng(7)
        layout = SubbandLayout.create(32, 32)
        coeffs = np.zeros((32, 32), dtype=complex)
        band = layout.bands[4]
        block = rng.standard_normal(
            (band.rows.stop - band.rows.start, band.cols.stop - band.cols.start)
        )
        coeffs[band.rows, band.cols] = block
        image = haar_inverse(WaveletPyramid(coeffs, layout))
        sds = np.zeros(13)
        # declared noise sd far above the empirical power -> v estimate 0
        sds[4] = 10 * np.abs(block).max()
        out = haar_forward(WienerSubbandDenoiser()(image, sds))
        assert np.abs(out.coefficients[band.rows, band.cols]).max() < 1e-12

    def test_two_component_shrinkage_factors(self):
        # Hand-computed check: band with known mean power gets the exact
        # factor v/(v + sd^2).
        layout = SubbandLayout.create(32, 32)
        coeffs = np.zeros((32, 32), dtype=complex)
        band = layout.bands[6]
        shape = (band.rows.stop - band.rows.start, band.cols.stop - band.cols.start)
        block = np.full(shape, 3.0 + 4.0j)  # |c|^2 = 25 everywhere
        coeffs[band.rows, band.cols] = block
        image = haar_inverse(WaveletPyramid(coeffs, layout))
        sds = np.zeros(13)
        sds[6] = 2.0  # v = 25 - 4 = 21, factor 21/25
        out = haar_forward(WienerSubbandDenoiser()(image, sds))
        expected = block * (21.0 / 25.0)
        assert np.abs(
            out.coefficients[band.rows, band.cols] - expected
        ).max() < 1e-10

    def test_beats_identity_and_zeroing_on_gaussian_band(self):
        rng = np.random.default_rng(8)
        layout = SubbandLayout.create(64, 64)
        band = layout.bands[8]
        shape = (band.rows.stop - band.rows.start, band.cols.stop - band.cols.start)
        signal = 5.0 * rng.standard_normal(shape)
        noise = 3.0 * rng.standard_normal(shape)
        coeffs = np.zeros((64, 64), dtype=complex)
        coeffs[band.rows, band.cols] = signal + noise
        image = haar_inverse(WaveletPyramid(coeffs, layout))
        sds = np.zeros(13)
        sds[8] = 3.0
        out = haar_forward(WienerSubbandDenoiser()(image, sds))
        got = out.coefficients[band.rows, band.cols]
        mse = np.mean(np.abs(got - signal) ** 2)
        mse_identity = np.mean(np.abs(noise) ** 2)
        mse_zero = np.mean(np.abs(signal) ** 2)
        assert mse < mse_identity and mse < mse_zero


class TestImaginaryPolicy:
    def test_scale_on_pure_imaginary(self):
        rng = np.random.default_rng(9)
        image = 1j * rng.uniform(0, 255, (32, 32))
        wrapped = apply_imaginary_policy(IdentityDenoiser(), ImaginaryPolicy())
        out = wrapped(image, np.zeros(13))
        assert np.abs(out - 0.1 * image).max() < 1e-12

    def test_zero_mode(self):
        rng = np.random.default_rng(10)
        image = rng.uniform(0, 255, (32, 32)) + 1j * rng.uniform(0, 1, (32, 32))
        wrapped = apply_imaginary_policy(
            IdentityDenoiser(), ImaginaryPolicy(mode="zero")
        )
        assert (wrapped(image, np.zeros(13)).imag == 0).all()

    def test_passthrough_identity(self):
        rng = np.random.default_rng(11)
        image = rng.uniform(0, 255, (32, 32)) + 1j * rng.uniform(0, 1, (32, 32))
        wrapped = apply_imaginary_policy(
            IdentityDenoiser(), ImaginaryPolicy(mode="passthrough")
        )
        assert np.abs(wrapped(image, np.zeros(13)) - image).max() == 0

    def test_invalid_mode(self):
        with pytest.raises(ValueError, match="mode"):
            ImaginaryPolicy(mode="clip")

    def test_output_finite_and_shaped(self):
        rng = np.random.default_rng(12)
        image = rng.uniform(0, 255, (48, 48)) + 0j
        for denoiser in (
            SoftThresholdDenoiser(),
            SureThresholdDenoiser(),
            WienerSubbandDenoiser(),
        ):
            out = denoiser(image, np.full(13, 7.0))
            assert out.shape == image.shape
            assert np.isfinite(out).all()
