"""Colored-noise denoisers.

Every denoiser is a callable object with

    denoise(image, band_sds) -> image

where ``band_sds`` holds one standard deviation per wavelet subband in the
canonical coarsest-first order (see wavelet module). Outputs always match the
input shape and are deterministic given (input, band_sds). The ``descriptor``
attribute identifies the denoiser in run records and traces.
"""

from dataclasses import dataclass

import numpy as np

from .wavelet import SubbandLayout, haar_forward, haar_inverse


class ColoredDenoiser:
    """Base class; subclasses implement denoise(image, band_sds)."""

    descriptor = "abstract"

    def denoise(self, image, band_sds):
        raise NotImplementedError

    def __call__(self, image, band_sds):
        return self.denoise(image, band_sds)


def _complex_soft_threshold(coeffs, threshold):
    """Shrink magnitudes by threshold, preserve phase."""
    mag = np.abs(coeffs)
    scale = np.maximum(0.0, 1.0 - threshold / np.maximum(mag, 1e-300))
    return coeffs * scale


class SoftThresholdDenoiser(ColoredDenoiser):
    """Per-subband complex soft thresholding in the Haar domain.

    Threshold for band s is multiplier * band_sds[s]; the coarse LL band is
    never thresholded.
    """

    def __init__(self, multiplier=1.0):
        self.multiplier = multiplier
        self.descriptor = f"soft(multiplier={multiplier})"

    def denoise(self, image, band_sds):
        image = np.asarray(image, dtype=np.complex128)
        pyramid = haar_forward(image)
        band_sds = np.asarray(band_sds, dtype=float)
        for i, band in enumerate(pyramid.layout.bands):
            if band.orientation == "LL":
                continue
            lam = self.multiplier * band_sds[i]
            if lam > 0:
                block = pyramid.coefficients[band.rows, band.cols]
                pyramid.coefficients[band.rows, band.cols] = (
                    _complex_soft_threshold(block, lam)
                )
        return haar_inverse(pyramid)


def sure_soft_threshold(coeffs, noise_variance, threshold):
    """Stein's unbiased risk estimate of the MSE of complex soft thresholding.

    coeffs: complex samples with circular noise of total variance
    noise_variance (each component carries half). Returns the per-band total
    (not per-coefficient) risk estimate.
    """
    coeffs = np.asarray(coeffs).ravel()
    mag = np.abs(coeffs)
    above = mag > threshold
    rss = np.sum(np.minimum(mag, threshold) ** 2)
    divergence = np.sum(2.0 - threshold / mag[above]) if above.any() else 0.0
    return rss + noise_variance * divergence - coeffs.size * noise_variance


DEFAULT_SURE_GRID = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


class SureThresholdDenoiser(ColoredDenoiser):
    """Soft thresholding with the per-band threshold picked by SURE.

    Candidate thresholds are grid multiples of each band's sd; the one with
    the lowest risk estimate wins. Bands with sd 0 are left untouched.
    """

    def __init__(self, grid=DEFAULT_SURE_GRID):
        self.grid = tuple(grid)
        self.descriptor = f"sure(grid={self.grid})"

    def denoise(self, image, band_sds):
        image = np.asarray(image, dtype=np.complex128)
        pyramid = haar_forward(image)
        band_sds = np.asarray(band_sds, dtype=float)
        for i, band in enumerate(pyramid.layout.bands):
            if band.orientation == "LL" or band_sds[i] <= 0:
                continue
            block = pyramid.coefficients[band.rows, band.cols]
            var = band_sds[i] ** 2
            risks = [
                sure_soft_threshold(block, var, g * band_sds[i]) for g in self.grid
            ]
            lam = self.grid[int(np.argmin(risks))] * band_sds[i]
            pyramid.coefficients[band.rows, band.cols] = (
                _complex_soft_threshold(block, lam)
            )
        return haar_inverse(pyramid)


class WienerSubbandDenoiser(ColoredDenoiser):
    """Classical per-band linear shrinkage baseline.

    Empirical signal variance v = max(0, mean|c|^2 - sd^2); the band is scaled
    by v / (v + sd^2). LL untouched.
    """

    descriptor = "wiener"

    def denoise(self, image, band_sds):
        image = np.asarray(image, dtype=np.complex128)
        pyramid = haar_forward(image)
        band_sds = np.asarray(band_sds, dtype=float)
        for i, band in enumerate(pyramid.layout.bands):
            if band.orientation == "LL" or band_sds[i] <= 0:
                continue
            block = pyramid.coefficients[band.rows, band.cols]
            noise_var = band_sds[i] ** 2
            signal_var = max(0.0, float(np.mean(np.abs(block) ** 2)) - noise_var)
            pyramid.coefficients[band.rows, band.cols] = block * (
                signal_var / (signal_var + noise_var)
            )
        return haar_inverse(pyramid)


class IdentityDenoiser(ColoredDenoiser):
    descriptor = "identity"

    def denoise(self, image, band_sds):
        return np.asarray(image, dtype=np.complex128).copy()


@dataclass(frozen=True)
class ImaginaryPolicy:
    """What a real-input denoiser does with the imaginary plane.

    mode "scale" multiplies it by scale_factor (keeps the average partial
    derivative nonzero), "zero" discards it, "passthrough" routes the full
    complex image to the inner denoiser.
    """

    mode: str = "scale"
    scale_factor: float = 0.1

    def __post_init__(self):
        if self.mode not in ("scale", "zero", "passthrough"):
            raise ValueError(f"unknown imaginary policy mode {self.mode!r}")
        if not 0.0 <= self.scale_factor <= 1.0:
            raise ValueError("scale_factor must be in [0, 1]")


class _PolicyWrapped(ColoredDenoiser):
    def __init__(self, inner, policy):
        self.inner = inner
        self.policy = policy
        self.descriptor = f"{inner.descriptor}|imag:{policy.mode}"
        if policy.mode == "scale":
            self.descriptor += f"({policy.scale_factor})"

    def denoise(self, image, band_sds):
        image = np.asarray(image, dtype=np.complex128)
        if self.policy.mode == "passthrough":
            return self.inner.denoise(image, band_sds)
        real_out = np.real(self.inner.denoise(image.real.astype(np.complex128), band_sds))
        if self.policy.mode == "zero":
            return real_out.astype(np.complex128)
        return real_out + 1j * self.policy.scale_factor * image.imag


def apply_imaginary_policy(denoiser, policy=ImaginaryPolicy()):
    """Wrap a real-input denoiser with an imaginary-plane policy.

    Divergence estimation must probe the wrapped operator, so wrap before
    handing the denoiser to the solver.
    """
    return _PolicyWrapped(denoiser, policy)
