"""Iteration-level checks: residuals and tau against dense oracles, the
Monte Carlo divergence against the closed-form soft-threshold derivative,
the Onsager update, stopping, and a straight-line transcription of the loop.
"""

import numpy as np
import pytest

from dvdamp.denoisers import IdentityDenoiser, SoftThresholdDenoiser
from dvdamp.forward_model import (
    density_compensated_backproject,
    fft2c,
    make_variable_density_scheme,
    measure,
)
from dvdamp.solver import (
    ALPHA_CLAMP,
    DivergenceProbeConfig,
    ReconstructionConfig,
    compute_residual,
    estimate_divergence,
    onsager_update,
    predict_tau,
    run_dvdamp,
)
from dvdamp.wavelet import (
    SubbandLayout,
    WaveletPyramid,
    build_spectral_energy,
    haar_forward,
    haar_inverse,
    zero_pyramid,
)


def dense_operators(h, w):
    """Materialized Psi^H and unitary F for dense-oracle evaluations."""
    layout = SubbandLayout.create(h, w)
    n = h * w
    psi_h = np.zeros((n, n), dtype=complex)
    dft = np.zeros((n, n), dtype=complex)
    for j in range(n):
        e = np.zeros((h, w), dtype=complex)
        e.flat[j] = 1.0
        psi_h[:, j] = haar_inverse(WaveletPyramid(e, layout)).ravel()
        dft[:, j] = (np.fft.fft2(e) / np.sqrt(n)).ravel()
    return psi_h, dft, layout


class TestComputeResidual:
    def test_zero_estimate_returns_y(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 255, (32, 32))
        scheme = make_variable_density_scheme(32, 32, 0.5, seed=1)
        y = measure(x, scheme, 2.0, seed=2)
        layout = SubbandLayout.create(32, 32)
        z = compute_residual(y, scheme, zero_pyramid(layout))
        assert np.array_equal(z, y)

    def test_truth_estimate_noiseless_gives_zero(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 255, (32, 32))
        scheme = make_variable_density_scheme(32, 32, 0.5, seed=1)
        y = measure(x, scheme, 0.0)
        z = compute_residual(y, scheme, haar_forward(x))
        assert np.abs(z).max() < 1e-10 * np.abs(y).max()

    def test_dense_oracle_16x16(self):
        rng = np.random.default_rng(2)
        psi_h, dft, layout = dense_operators(16, 16)
        scheme = make_variable_density_scheme(16, 16, 0.5, seed=3)
        x = rng.uniform(0, 255, (16, 16))
        y = measure(x, scheme, 1.0, seed=4)
        r_tilde = haar_forward(rng.standard_normal((16, 16)))
        z = compute_residual(y, scheme, r_tilde)
        mask = scheme.omega.ravel()
        z_dense = y.ravel() - mask * (dft @ (psi_h @ r_tilde.coefficients.ravel()))
        assert np.abs(z.ravel() - z_dense).max() < 1e-10 * np.abs(y).max()


class TestPredictTau:
    def test_full_sampling_gives_noise_variance(self):
        scheme = make_variable_density_scheme(32, 32, 1.0, seed=0)
        table = build_spectral_energy(32, 32)
        rng = np.random.default_rng(5)
        z = rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))
        tau = predict_tau(z, scheme, table, 3.0)
        assert np.abs(tau - 9.0).max() < 1e-10

    def test_zero_everything_gives_zero(self):
        scheme = make_variable_density_scheme(32, 32, 0.5, seed=1)
        table = build_spectral_energy(32, 32)
        tau = predict_tau(np.zeros((32, 32), dtype=complex), scheme, table, 0.0)
        assert (tau == 0).all()

    def test_dense_oracle_16x16(self):
        rng = np.random.default_rng(6)
        psi_h, dft, layout = dense_operators(16, 16)
        dense_s = np.abs(dft @ psi_h) ** 2
        scheme = make_variable_density_scheme(16, 16, 0.5, seed=7)
        table = build_spectral_energy(16, 16)
        z = (
            rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        ) * scheme.omega
        noise_sd = 1.3
        pinv = 1.0 / scheme.density.ravel()
        weights = (
            scheme.omega.ravel()
            * pinv
            * ((pinv - 1.0) * np.abs(z.ravel()) ** 2 + noise_sd**2)
        )
        tau_dense = dense_s.T @ weights
        tau = predict_tau(z, scheme, table, noise_sd)
        band_of = layout.band_index_map().ravel()
        for s in range(13):
            assert np.abs(tau_dense[band_of == s] - tau[s]).max() < 1e-9


class TestEstimateDivergence:
    def test_identity_denoiser(self):
        rng = np.random.default_rng(8)
        r = haar_forward(rng.uniform(0, 255, (32, 32)))
        alpha = estimate_divergence(
            IdentityDenoiser(), r, np.ones(13), 1.0, DivergenceProbeConfig(seed=1)
        )
        assert np.abs(alpha - 1.0).max() < 1e-6

    def test_zero_denoiser(self):
        class ZeroDenoiser:
            descriptor = "zero"

            def __call__(self, image, band_sds):
                return np.zeros_like(np.asarray(image, dtype=complex))

        rng = np.random.default_rng(9)
        r = haar_forward(rng.uniform(0, 255, (32, 32)))
        alpha = estimate_divergence(
            ZeroDenoiser(), r, np.ones(13), 1.0, DivergenceProbeConfig(seed=2)
        )
        assert np.abs(alpha).max() < 1e-12

    def test_soft_threshold_analytic_divergence(self):
        # Closed-form oracle for complex soft thresholding at a real point:
        # d/dRe = 1 for |c| > lam, d/dIm = 1 - lam/|c|; the band average of
        # their mean is the analytic alpha. Monte Carlo within +-0.05.
        rng = np.random.default_rng(10)
        image = rng.uniform(0, 255, (64, 64))
        r = haar_forward(image)
        tau = np.full(13, 40.0**2)
        gamma = 1.0
        denoiser = SoftThresholdDenoiser()
        estimates = [
            estimate_divergence(
                denoiser, r, tau, gamma, DivergenceProbeConfig(seed=seed)
            )
            for seed in range(10)
        ]
        alpha = np.mean(estimates, axis=0)
        layout = r.layout
        lam = np.sqrt(gamma * tau)
        for i, band in enumerate(layout.bands):
            coeffs = r.coefficients[band.rows, band.cols]
            if band.orientation == "LL":
                expected = 1.0  # LL is never thresholded
            else:
                mag = np.abs(coeffs)
                above = mag > lam[i]
                d_re = np.mean(above.astype(float))
                d_im = np.mean(np.where(above, 1.0 - lam[i] / mag, 0.0))
                expected = 0.5 * (d_re + d_im)
            assert abs(alpha[i] - expected) < 0.05

    def test_eta_floor_on_zero_input(self):
        layout = SubbandLayout.create(32, 32)
        alpha = estimate_divergence(
            IdentityDenoiser(),
            zero_pyramid(layout),
            np.ones(13),
            1.0,
            DivergenceProbeConfig(seed=3),
        )
        assert np.isfinite(alpha).all()


class TestOnsagerUpdate:
    def test_alpha_zero_returns_w_hat(self):
        rng = np.random.default_rng(11)
        w_hat = haar_forward(rng.standard_normal((32, 32)))
        r = haar_forward(rng.standard_normal((32, 32)))
        out = onsager_update(w_hat, r, np.zeros(13))
        assert np.array_equal(out.coefficients, w_hat.coefficients)

    def test_alpha_half(self):
        rng = np.random.default_rng(12)
        w_hat = haar_forward(rng.standard_normal((32, 32)))
        r = haar_forward(rng.standard_normal((32, 32)))
        out = onsager_update(w_hat, r, np.full(13, 0.5))
        expected = 2 * w_hat.coefficients - r.coefficients
        assert np.abs(out.coefficients - expected).max() < 1e-12

    def test_mixed_per_band_alpha(self):
        rng = np.random.default_rng(13)
        w_hat = haar_forward(rng.standard_normal((32, 32)))
        r = haar_forward(rng.standard_normal((32, 32)))
        alpha = np.linspace(-0.4, 0.8, 13)
        out = onsager_update(w_hat, r, alpha)
        for i, band in enumerate(w_hat.layout.bands):
            expected = (
                w_hat.coefficients[band.rows, band.cols]
                - alpha[i] * r.coefficients[band.rows, band.cols]
            ) / (1 - alpha[i])
            assert np.abs(
                out.coefficients[band.rows, band.cols] - expected
            ).max() < 1e-12

    def test_near_one_alpha_rejected(self):
        rng = np.random.default_rng(14)
        w_hat = haar_forward(rng.standard_normal((32, 32)))
        r = haar_forward(rng.standard_normal((32, 32)))
        with pytest.raises(ValueError, match="alpha"):
            onsager_update(w_hat, r, np.full(13, 1.0 - 1e-9))


class NoiseInjectingDenoiser:
    """Adds fresh unit-variance Gaussian noise each call (forces divergence)."""

    descriptor = "noise-injector"

    def __init__(self):
        self.rng = np.random.default_rng(99)

    def __call__(self, image, band_sds):
        image = np.asarray(image, dtype=complex)
        return image + 80.0 * self.rng.standard_normal(image.shape)


class TestRunDvdamp:
    def test_noiseless_full_sampling_identity(self):
        rng = np.random.default_rng(15)
        x = rng.uniform(0, 255, (32, 32))
        scheme = make_variable_density_scheme(32, 32, 1.0, seed=0)
        y = measure(x, scheme, 0.0)
        estimate, trace = run_dvdamp(
            y, scheme, IdentityDenoiser(), ReconstructionConfig(max_iterations=1)
        )
        assert np.abs(estimate - x).max() < 1e-10 * np.abs(x).max()

    def test_noiseless_truth_fixed_point(self):
        rng = np.random.default_rng(16)
        x = rng.uniform(0, 255, (32, 32))
        scheme = make_variable_density_scheme(32, 32, 0.5, seed=4)
        y = measure(x, scheme, 0.0)
        z = compute_residual(y, scheme, haar_forward(x))
        table = build_spectral_energy(32, 32)
        tau = predict_tau(z, scheme, table, 0.0)
        assert np.abs(z).max() < 1e-10 * np.abs(y).max()
        assert tau.max() < 1e-20

    def test_noise_injector_triggers_stop(self):
        rng = np.random.default_rng(17)
        x = rng.uniform(0, 255, (64, 64))
        scheme = make_variable_density_scheme(64, 64, 0.25, seed=5)
        y = measure(x, scheme, 1.0, seed=6)
        _, trace = run_dvdamp(
            y, scheme, NoiseInjectingDenoiser(),
            ReconstructionConfig(max_iterations=10), noise_sd=1.0,
        )
        assert trace.stopped_early
        assert trace.stopped_at is not None and trace.stopped_at <= 3

    def test_deterministic_traces(self):
        rng = np.random.default_rng(18)
        x = rng.uniform(0, 255, (64, 64))
        scheme = make_variable_density_scheme(64, 64, 0.25, seed=7)
        y = measure(x, scheme, 2.0, seed=8)
        denoiser = SoftThresholdDenoiser()
        config = ReconstructionConfig(max_iterations=4)
        out_a, trace_a = run_dvdamp(y, scheme, denoiser, config, 2.0)
        out_b, trace_b = run_dvdamp(y, scheme, denoiser, config, 2.0)
        assert np.array_equal(out_a, out_b)
        assert trace_a.to_json() == trace_b.to_json()

    def test_alpha_clamped_in_trace(self):
        rng = np.random.default_rng(19)
        x = rng.uniform(0, 255, (64, 64))
        scheme = make_variable_density_scheme(64, 64, 0.25, seed=9)
        y = measure(x, scheme, 1.0, seed=10)
        _, trace = run_dvdamp(
            y, scheme, IdentityDenoiser(),
            ReconstructionConfig(max_iterations=2, stop_on_tau_increase=False),
            noise_sd=1.0,
        )
        for rec in trace.records:
            assert (np.abs(rec.alpha) <= ALPHA_CLAMP).all()


class TestStraightLineEquivalence:
    def test_trace_matches_transcription(self):
        """Independently coded, straight-line version of the iteration (same
        seeds, soft-threshold denoiser): r_k and tau_k agree to 1e-8."""
        rng = np.random.default_rng(20)
        x = rng.uniform(0, 255, (64, 64))
        scheme = make_variable_density_scheme(64, 64, 0.25, seed=11)
        y = measure(x, scheme, 1.0, seed=12)
        noise_sd = 1.0
        gamma = 0.75
        iters = 3
        denoiser = SoftThresholdDenoiser()
        config = ReconstructionConfig(
            max_iterations=iters, gamma=gamma, stop_on_tau_increase=False
        )
        _, trace = run_dvdamp(
            y, scheme, denoiser, config, noise_sd, keep_pyramids=True
        )

        # --- straight-line transcription (no solver helpers) ---
        layout = SubbandLayout.create(64, 64)
        table = build_spectral_energy(64, 64)
        n = 64 * 64
        mask = scheme.omega.astype(bool)
        pinv = 1.0 / scheme.density
        band_of = layout.band_index_map()
        probe_seeds = np.random.SeedSequence(config.divergence.seed).spawn(iters)

        r_tilde = np.zeros((64, 64), dtype=complex)
        refs = []
        for k in range(iters):
            z = np.where(
                mask,
                y - np.fft.fft2(haar_inverse(WaveletPyramid(r_tilde, layout)))
                / np.sqrt(n),
                0,
            )
            step = haar_forward(
                np.fft.ifft2(pinv * z) * np.sqrt(n), layout=layout
            ).coefficients
            r = r_tilde + step
            weights = mask * pinv * ((pinv - 1.0) * np.abs(z) ** 2 + noise_sd**2)
            tau = np.maximum(
                0.0, np.einsum("sij,ij->s", table.rows, weights)
            )
            refs.append((r.copy(), tau.copy()))

            lam = np.sqrt(gamma * tau)
            thresholds = np.where(
                np.array([b.orientation == "LL" for b in layout.bands]), 0.0, lam
            )
            lam_grid = thresholds[band_of]
            mag = np.abs(r)
            w_hat = r * np.maximum(0.0, 1.0 - lam_grid / np.maximum(mag, 1e-300))

            def apply_soft(coeffs):
                mag = np.abs(coeffs)
                return coeffs * np.maximum(
                    0.0, 1.0 - lam_grid / np.maximum(mag, 1e-300)
                )

            prng = np.random.default_rng(probe_seeds[k])
            eta = max(np.abs(r).max() * 1e-3, 1e-8)
            alpha = np.zeros(13)
            for i, band in enumerate(layout.bands):
                value = 0.0
                for component in (1.0, 1.0j):
                    probe = prng.standard_normal(
                        (band.rows.stop - band.rows.start,
                         band.cols.stop - band.cols.start)
                    )
                    probe /= np.sqrt(np.mean(probe**2))
                    jittered = r.copy()
                    jittered[band.rows, band.cols] += eta * component * probe
                    delta = (apply_soft(jittered) - w_hat)[band.rows, band.cols]
                    part = delta.real if component == 1.0 else delta.imag
                    value += 0.5 * np.sum(probe * part) / (eta * band.count)
                alpha[i] = value
            alpha = np.clip(alpha, -0.95, 0.95)
            alpha_grid = alpha[band_of]
            r_tilde = (w_hat - alpha_grid * r) / (1.0 - alpha_grid)

        scale = np.abs(refs[0][0]).max()
        for k in range(iters):
            rec = trace.records[k]
            r_ref, tau_ref = refs[k]
            assert np.abs(rec.r.coefficients - r_ref).max() < 1e-8 * scale
            assert np.abs(rec.tau - tau_ref).max() < 1e-8 * max(tau_ref.max(), 1)
