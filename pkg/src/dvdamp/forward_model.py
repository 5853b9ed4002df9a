"""Variable-density Fourier sampling: schemes, measurement synthesis, and the
density-compensated adjoint.

The DFT is unitary in both directions (1/sqrt(n) each way), so Parseval holds
with no extra bookkeeping and the spectral-energy rows of the wavelet module
sum to 1. Frequencies are kept in unshifted FFT order (DC at index [0, 0]).
"""

import base64
import json
from dataclasses import dataclass

import numpy as np

from .wavelet import SubbandLayout, WaveletPyramid, _check_dims, haar_forward

# Floor on the inclusion probability. P^-1 weighting amplifies residual
# energy at barely-sampled frequencies by up to 1/p_min, and the per-subband
# variance prediction inherits a (1/p_min)^2 factor; floors much below ~0.03
# destabilize the iteration at typical rates.
P_MIN_DEFAULT = 0.05
FULL_RADIUS_DEFAULT = 0.06
DENSITY_EXPONENT_DEFAULT = 4.0


class InfeasibleRateError(ValueError):
    """Requested sampling rate cannot be met by the density law."""


@dataclass(frozen=True)
class SamplingScheme:
    """Sampling set Omega plus the Bernoulli inclusion probabilities.

    omega: uint8 mask over (height, width) frequencies, 1 = sampled.
    density: inclusion probability per frequency, in [p_min, 1].
    """

    height: int
    width: int
    omega: np.ndarray
    density: np.ndarray
    p_min: float
    meta: dict

    def __post_init__(self):
        if self.density.min() < self.p_min:
            raise ValueError("density entries below p_min")

    @property
    def n(self):
        return self.height * self.width

    @property
    def sample_count(self):
        return int(self.omega.sum())

    def to_json(self):
        """Bit-exact JSON serialization (mask and density base64-embedded)."""
        return json.dumps(
            {
                "height": self.height,
                "width": self.width,
                "p_min": self.p_min,
                "meta": self.meta,
                "omega_b64": base64.b64encode(
                    np.ascontiguousarray(self.omega, dtype=np.uint8).tobytes()
                ).decode("ascii"),
                "density_b64": base64.b64encode(
                    np.ascontiguousarray(self.density, dtype="<f8").tobytes()
                ).decode("ascii"),
            }
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        h, w = obj["height"], obj["width"]
        omega = np.frombuffer(
            base64.b64decode(obj["omega_b64"]), dtype=np.uint8
        ).reshape(h, w)
        density = np.frombuffer(
            base64.b64decode(obj["density_b64"]), dtype="<f8"
        ).reshape(h, w)
        return cls(h, w, omega, density, obj["p_min"], obj["meta"])


def fft2c(image):
    """Unitary 2-D DFT."""
    image = np.asarray(image, dtype=np.complex128)
    return np.fft.fft2(image) / np.sqrt(image.size)


def ifft2c(spectrum):
    """Unitary inverse 2-D DFT."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    return np.fft.ifft2(spectrum) * np.sqrt(spectrum.size)


def _radial_distance(height, width):
    """Normalized distance from DC in unshifted FFT order, 1 at the corner."""
    fy = np.fft.fftfreq(height)
    fx = np.fft.fftfreq(width)
    d = np.sqrt(fy[:, None] ** 2 + fx[None, :] ** 2)
    return d / np.sqrt(0.5)


def make_variable_density_scheme(
    height,
    width,
    target_rate,
    density_exponent=DENSITY_EXPONENT_DEFAULT,
    fully_sampled_radius=FULL_RADIUS_DEFAULT,
    seed=None,
    p_min=P_MIN_DEFAULT,
):
    """Polynomial variable-density scheme with a fully sampled center disk.

    density_i is proportional to max(p_min, (1 - d_i)^exponent), d_i the
    normalized distance from DC, rescaled so the densities sum to
    m = round(target_rate * n), entries clamped to <= 1 and the center disk
    forced to 1. Omega is drawn independently Bernoulli(density_i).
    """
    _check_dims(height, width)
    if not 0.0 < target_rate <= 1.0:
        raise ValueError("target_rate must be in (0, 1]")
    if seed is None:
        raise ValueError("a seed is required (determinism contract)")
    n = height * width
    m = int(round(target_rate * n))

    d = _radial_distance(height, width)
    center = d < fully_sampled_radius
    base = np.maximum(p_min, np.maximum(0.0, 1.0 - d) ** density_exponent)

    if m < center.sum():
        raise InfeasibleRateError(
            f"target rate {target_rate} gives m={m} below the {int(center.sum())} "
            "always-sampled center frequencies; lower fully_sampled_radius"
        )

    def total(scale):
        dens = np.minimum(1.0, scale * base)
        dens[center] = 1.0
        return dens.sum()

    lo, hi = 0.0, 1.0 / p_min  # at hi every density clamps to 1
    if total(hi) < m - 0.5:
        raise InfeasibleRateError(
            "density rescaling cannot reach the target rate; lower "
            "fully_sampled_radius or density_exponent"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) < m:
            lo = mid
        else:
            hi = mid
    density = np.minimum(1.0, hi * base)
    density[center] = 1.0
    density = np.maximum(density, p_min)
    if target_rate == 1.0:
        density[:] = 1.0

    rng = np.random.default_rng(seed)
    omega = (rng.random((height, width)) < density).astype(np.uint8)
    meta = {
        "target_rate": target_rate,
        "density_exponent": density_exponent,
        "fully_sampled_radius": fully_sampled_radius,
        "seed": int(seed),
    }
    return SamplingScheme(height, width, omega, density, p_min, meta)


def measure(image, scheme, noise_sd, seed=None):
    """Synthesize k-space data: mask * (unitary FFT(image) + circular noise).

    The complex noise has total variance noise_sd^2 (each component
    noise_sd^2 / 2). Entries off the sampling set are exactly zero.
    """
    image = np.asarray(image, dtype=np.complex128)
    if image.shape != (scheme.height, scheme.width):
        raise ValueError("image shape does not match scheme")
    spectrum = fft2c(image)
    if noise_sd > 0:
        if seed is None:
            raise ValueError("a seed is required when noise_sd > 0")
        rng = np.random.default_rng(seed)
        noise = (noise_sd / np.sqrt(2.0)) * (
            rng.standard_normal(image.shape) + 1j * rng.standard_normal(image.shape)
        )
        spectrum = spectrum + noise
    return np.where(scheme.omega.astype(bool), spectrum, 0.0 + 0.0j)


def density_compensated_backproject(z, scheme, layout=None):
    """Wavelet coefficients of the P^{-1}-weighted adjoint of a k-space residual."""
    z = np.asarray(z, dtype=np.complex128)
    if z.shape != (scheme.height, scheme.width):
        raise ValueError("residual shape does not match scheme")
    image = ifft2c(z / scheme.density)
    return haar_forward(image, layout=layout)


def zero_filled_estimate(y, scheme):
    """Density-compensated zero-filled reconstruction (the baseline image)."""
    return ifft2c(np.asarray(y) / scheme.density)


def snr_to_noise_sd(image, target_snr_db, scheme):
    """Noise sd giving the requested SNR on the sampled Fourier coefficients.

    SNR is 10 log10(mean |Fx|^2 on the support / noise_sd^2).
    """
    if np.isposinf(target_snr_db):
        return 0.0
    if not np.isfinite(target_snr_db):
        raise ValueError("target_snr_db must be finite or +inf")
    spectrum = fft2c(image)
    support = scheme.omega.astype(bool)
    signal_power = np.mean(np.abs(spectrum[support]) ** 2)
    if signal_power == 0:
        raise ValueError("image has no energy on the sampling support")
    return float(np.sqrt(signal_power * 10.0 ** (-target_snr_db / 10.0)))
