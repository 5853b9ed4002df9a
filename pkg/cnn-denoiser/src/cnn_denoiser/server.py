"""Bridge-protocol inference server.

Wraps trained model artifacts behind the reconstruction toolkit's wire
protocol: each denoise request carries a complex image plus 13 per-band
noise sds. The real plane is denoised by the model whose noise-range
bracket contains the mean of the requested sds; the imaginary plane is
returned unchanged (the client applies its own imaginary-part policy).
An echo mode bypasses the models entirely for protocol testing.
"""

import numpy as np

from dvdamp.bridge import serve_loop

from .dataset import NUM_BANDS
from .model import denoise_image
from .training import ModelArtifact


class DenoiserService:
    """Request handler: routing, validation, and model application."""

    def __init__(self, artifacts, echo=False):
        if not echo and not artifacts:
            raise ValueError("need at least one model artifact (or echo mode)")
        self.artifacts = list(artifacts)
        self.echo = echo

    def route(self, band_sds):
        """Pick the artifact whose bracket contains the mean sd.

        Falls back to the bracket nearest to the mean when none contains it
        (e.g. a mean above the largest trained range).
        """
        mean_sd = float(np.mean(band_sds))
        for artifact in self.artifacts:
            if artifact.range_spec.contains(mean_sd):
                return artifact
        return min(
            self.artifacts,
            key=lambda a: min(
                abs(mean_sd - a.range_spec.lower), abs(mean_sd - a.range_spec.upper)
            ),
        )

    def __call__(self, image, band_sds):
        h, w = image.shape
        if h % 16 or w % 16:
            raise ValueError(f"image dims {h}x{w} must be multiples of 16")
        if len(band_sds) != NUM_BANDS:
            raise ValueError(f"expected {NUM_BANDS} band sds")
        if self.echo:
            return image
        artifact = self.route(band_sds)
        real = denoise_image(artifact.model, image.real, band_sds)
        return real + 1j * image.imag


def serve_denoiser(
    artifact_paths, endpoint, echo=False, ready_event=None, max_requests=None
):
    """Load artifacts and serve the bridge protocol until interrupted.

    Single connection, single request at a time; protocol violations and
    handler errors are answered with error frames by the underlying loop.
    """
    artifacts = [ModelArtifact.load(p) for p in artifact_paths]
    service = DenoiserService(artifacts, echo=echo)
    serve_loop(
        endpoint, service, ready_event=ready_event, max_requests=max_requests
    )
