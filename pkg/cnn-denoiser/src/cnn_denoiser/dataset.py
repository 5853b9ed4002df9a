"""Patch datasets with wavelet-colored Gaussian noise.

Training samples are 48x48 grayscale patches in [0, 255]. Noise is colored
in the wavelet domain: white Gaussian noise is drawn independently in each
of the 13 Haar subbands, scaled by that band's standard deviation, and
inverse-transformed to the pixel domain. That matches the noise model the
reconstruction solver tracks band by band.
"""

import hashlib
import warnings
from dataclasses import dataclass

import numpy as np

from dvdamp import SubbandLayout, WaveletPyramid, haar_inverse

PATCH_SIZE = 48
NUM_BANDS = 13
DEFAULT_PATCH_COUNT = 4000


@dataclass(frozen=True)
class NoiseRangeSpec:
    """Standard-deviation bracket in pixel units on the 0-255 scale."""

    lower: float
    upper: float

    def __post_init__(self):
        if not 0 <= self.lower < self.upper:
            raise ValueError("need 0 <= lower < upper")

    def contains(self, sd):
        return self.lower <= sd < self.upper

    def sample_band_sds(self, rng, bands=NUM_BANDS):
        """Per-band sds drawn uniformly from the bracket."""
        return rng.uniform(self.lower, self.upper, size=bands)


CANONICAL_RANGES = (
    NoiseRangeSpec(0.0, 20.0),
    NoiseRangeSpec(20.0, 50.0),
    NoiseRangeSpec(50.0, 120.0),
    NoiseRangeSpec(120.0, 500.0),
)


def synthesize_colored_noise(band_sds, rng, size=PATCH_SIZE):
    """Real pixel-domain noise whose wavelet band s has variance band_sds[s]^2."""
    band_sds = np.asarray(band_sds, dtype=float)
    if band_sds.shape != (NUM_BANDS,):
        raise ValueError(f"expected {NUM_BANDS} band sds")
    layout = SubbandLayout.create(size, size)
    coeffs = rng.standard_normal((size, size)) * layout.broadcast(band_sds)
    return haar_inverse(WaveletPyramid(coeffs.astype(complex), layout)).real


class PatchDataset:
    """Clean patches plus the recipe that produced them."""

    def __init__(self, patches, seed, augmented):
        self.patches = np.ascontiguousarray(patches, dtype=np.float32)
        self.seed = seed
        self.augmented = augmented

    def __len__(self):
        return len(self.patches)

    def content_hash(self):
        return hashlib.sha256(self.patches.tobytes()).hexdigest()


def _augment(patch, rng):
    """Range-preserving geometric augmentation: flips and 90-degree turns."""
    if rng.integers(2):
        patch = patch[::-1]
    if rng.integers(2):
        patch = patch[:, ::-1]
    return np.rot90(patch, k=int(rng.integers(4)))


def _rescaled(image, factor):
    """Nearest-neighbour rescale; cheap, deterministic, range-preserving."""
    h = max(1, int(round(image.shape[0] * factor)))
    w = max(1, int(round(image.shape[1] * factor)))
    rows = np.minimum((np.arange(h) / factor).astype(int), image.shape[0] - 1)
    cols = np.minimum((np.arange(w) / factor).astype(int), image.shape[1] - 1)
    return image[np.ix_(rows, cols)]


def build_patch_dataset(
    source_images, count=DEFAULT_PATCH_COUNT, augmentations=True, seed=0
):
    """Crop `count` clean 48x48 patches from the given grayscale images.

    Augmentations are random rescaling (0.7-1.3), flips, and 90-degree
    rotations. Sources smaller than a patch after rescaling are skipped with
    a warning. Deterministic for a given seed and source order.
    """
    sources = [np.asarray(img, dtype=np.float64) for img in source_images]
    if not sources:
        raise ValueError("need at least one source image")
    rng = np.random.default_rng(seed)
    patches = []
    skips = 0
    while len(patches) < count:
        image = sources[int(rng.integers(len(sources)))]
        if augmentations:
            image = _rescaled(image, rng.uniform(0.7, 1.3))
        if image.shape[0] < PATCH_SIZE or image.shape[1] < PATCH_SIZE:
            warnings.warn(
                f"source of shape {image.shape} smaller than "
                f"{PATCH_SIZE}x{PATCH_SIZE} after scaling; skipped"
            )
            skips += 1
            if skips > 100 and not patches:
                raise ValueError("no source image is large enough for a patch")
            continue
        skips = 0
        top = int(rng.integers(image.shape[0] - PATCH_SIZE + 1))
        left = int(rng.integers(image.shape[1] - PATCH_SIZE + 1))
        patch = image[top:top + PATCH_SIZE, left:left + PATCH_SIZE]
        if augmentations:
            patch = _augment(patch, rng)
        patches.append(np.clip(patch, 0.0, 255.0))
    return PatchDataset(np.stack(patches), seed=seed, augmented=augmentations)
