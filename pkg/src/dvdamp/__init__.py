"""Reconstruction toolkit for variable-density-sampled Fourier measurements.

Implements the D-VDAMP iteration (density-compensated gradient steps,
per-subband effective-noise variance prediction, Monte Carlo divergence
estimation, and a colored Onsager correction) with pluggable colored-noise
denoisers, plus diagnostics that check the per-subband Gaussian noise model
empirically.
"""

from .bridge import (
    BridgeConnectionError,
    BridgeDenoiser,
    BridgeDimensionError,
    BridgeError,
    BridgeProtocolError,
    BridgeRemoteError,
    BridgeTimeoutError,
    serve_loop,
)
from .wavelet import (
    HAAR_BACKEND,
    SpectralEnergyTable,
    SubbandLayout,
    WaveletPyramid,
    build_spectral_energy,
    haar_forward,
    haar_inverse,
)

__version__ = "0.1.0"

from .denoisers import (
    ColoredDenoiser,
    IdentityDenoiser,
    ImaginaryPolicy,
    SoftThresholdDenoiser,
    SureThresholdDenoiser,
    WienerSubbandDenoiser,
    apply_imaginary_policy,
)
from .diagnostics import psnr, subband_noise_report, sure_risk_map
from .forward_model import (
    SamplingScheme,
    density_compensated_backproject,
    make_variable_density_scheme,
    measure,
    snr_to_noise_sd,
    zero_filled_estimate,
)
from .solver import (
    DivergenceProbeConfig,
    IterationTrace,
    ReconstructionConfig,
    compute_residual,
    estimate_divergence,
    onsager_update,
    predict_tau,
    run_dvdamp,
)

__all__ = [
    "BridgeConnectionError",
    "BridgeDenoiser",
    "BridgeDimensionError",
    "BridgeError",
    "BridgeProtocolError",
    "BridgeRemoteError",
    "BridgeTimeoutError",
    "serve_loop",
    "HAAR_BACKEND",
    "SpectralEnergyTable",
    "SubbandLayout",
    "WaveletPyramid",
    "build_spectral_energy",
    "haar_forward",
    "haar_inverse",
    "ColoredDenoiser",
    "IdentityDenoiser",
    "ImaginaryPolicy",
    "SoftThresholdDenoiser",
    "SureThresholdDenoiser",
    "WienerSubbandDenoiser",
    "apply_imaginary_policy",
    "psnr",
    "subband_noise_report",
    "sure_risk_map",
    "SamplingScheme",
    "density_compensated_backproject",
    "make_variable_density_scheme",
    "measure",
    "snr_to_noise_sd",
    "zero_filled_estimate",
    "DivergenceProbeConfig",
    "IterationTrace",
    "ReconstructionConfig",
    "compute_residual",
    "estimate_divergence",
    "onsager_update",
    "predict_tau",
    "run_dvdamp",
    "__version__",
]
