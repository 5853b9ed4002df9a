"""Orthonormal multilevel 2-D Haar transform and its subband machinery.

Coefficients live in the standard nested (Mallat) layout: each level packs
its quadrants as [[LL, LH], [HL, HH]] and the LL quadrant is recursed. With
the default 4 levels there are 13 subbands, ordered coarsest-first:

    LL4, LH4, HL4, HH4, LH3, HL3, HH3, LH2, HL2, HH2, LH1, HL1, HH1

LH = highpass along the width axis, HL = highpass along the height axis.
This ordering is the canonical one used by the wire protocol and the
per-subband variance vectors everywhere else in the package.

The single-level kernels come from a compiled extension when available and
fall back to numpy; ``HAAR_BACKEND`` records which one got picked.
"""

from dataclasses import dataclass

import numpy as np

try:
    from . import _haar_cy as _kernels

    HAAR_BACKEND = "cython"
except ImportError:  # pragma: no cover - build-dependent
    from . import _haar_py as _kernels

    HAAR_BACKEND = "numpy"

DEFAULT_LEVELS = 4
NUM_SUBBANDS = 3 * DEFAULT_LEVELS + 1
ORIENTATIONS = ("LL", "LH", "HL", "HH")


@dataclass(frozen=True)
class Subband:
    level: int
    orientation: str
    rows: slice
    cols: slice
    count: int


@dataclass(frozen=True)
class SubbandLayout:
    """Index ranges of the 13 subbands of a nested 4-level decomposition."""

    height: int
    width: int
    levels: int
    bands: tuple

    @classmethod
    def create(cls, height, width, levels=DEFAULT_LEVELS):
        _check_dims(height, width, levels)
        bands = []
        h = height >> levels
        w = width >> levels
        bands.append(Subband(levels, "LL", slice(0, h), slice(0, w), h * w))
        for level in range(levels, 0, -1):
            h = height >> level
            w = width >> level
            bands.append(Subband(level, "LH", slice(0, h), slice(w, 2 * w), h * w))
            bands.append(Subband(level, "HL", slice(h, 2 * h), slice(0, w), h * w))
            bands.append(Subband(level, "HH", slice(h, 2 * h), slice(w, 2 * w), h * w))
        return cls(height, width, levels, tuple(bands))

    @property
    def num_bands(self):
        return len(self.bands)

    def band_counts(self):
        return np.array([b.count for b in self.bands])

    def band_index_map(self):
        """Integer map of shape (height, width): subband index per coefficient."""
        out = np.empty((self.height, self.width), dtype=np.intp)
        for i, band in enumerate(self.bands):
            out[band.rows, band.cols] = i
        return out

    def broadcast(self, per_band_values):
        """Expand a length-13 vector to a full (height, width) coefficient grid."""
        per_band_values = np.asarray(per_band_values)
        if per_band_values.shape != (self.num_bands,):
            raise ValueError("expected one value per subband")
        return per_band_values[self.band_index_map()]


class WaveletPyramid:
    """Haar coefficients of one image, plus the layout that indexes them."""

    def __init__(self, coefficients, layout):
        coefficients = np.asarray(coefficients, dtype=np.complex128)
        if coefficients.shape != (layout.height, layout.width):
            raise ValueError("coefficient shape does not match layout")
        self.coefficients = coefficients
        self.layout = layout

    def band(self, index):
        """View of one subband's coefficient block (no copy)."""
        b = self.layout.bands[index]
        return self.coefficients[b.rows, b.cols]

    def copy(self):
        return WaveletPyramid(self.coefficients.copy(), self.layout)

    def __add__(self, other):
        return WaveletPyramid(self.coefficients + other.coefficients, self.layout)

    def __sub__(self, other):
        return WaveletPyramid(self.coefficients - other.coefficients, self.layout)


def _check_dims(height, width, levels=DEFAULT_LEVELS):
    tile = 1 << levels
    if height % tile or width % tile:
        raise ValueError(
            f"image dimensions ({height}, {width}) must be divisible by {tile} "
            f"for a {levels}-level Haar decomposition"
        )


def haar_forward(image, levels=DEFAULT_LEVELS, layout=None):
    """Orthonormal forward transform of a 2-D (complex) image."""
    image = np.asarray(image, dtype=np.complex128)
    if layout is None:
        layout = SubbandLayout.create(image.shape[0], image.shape[1], levels)
    else:
        _check_dims(image.shape[0], image.shape[1], layout.levels)
    coeffs = image.copy()
    h, w = image.shape
    for _ in range(layout.levels):
        coeffs[:h, :w] = _kernels.forward_level(coeffs[:h, :w])
        h //= 2
        w //= 2
    return WaveletPyramid(coeffs, layout)


def haar_inverse(pyramid):
    """Inverse (= adjoint) transform; returns the 2-D complex image."""
    layout = pyramid.layout
    image = pyramid.coefficients.copy()
    for level in range(layout.levels, 0, -1):
        h = layout.height >> (level - 1)
        w = layout.width >> (level - 1)
        image[:h, :w] = _kernels.inverse_level(image[:h, :w])
    return image


def zero_pyramid(layout):
    return WaveletPyramid(
        np.zeros((layout.height, layout.width), dtype=np.complex128), layout
    )


def _haar_1d_band_spectra(n, levels):
    """Squared magnitude spectra of the 1-D Haar cascade filters.

    Returns (lo, hi): dicts mapping level -> length-n nonnegative vector over
    unshifted DFT frequencies, normalized to sum to 1 (unitary convention).
    The cascade is |G_l(f)|^2 = prod_{j<l} |L(2^j f)|^2 and
    |D_l(f)|^2 = |G_{l-1}(f)|^2 |H(2^{l-1} f)|^2 with
    |L(f)|^2 = 1 + cos(2 pi f / n), |H(f)|^2 = 1 - cos(2 pi f / n).
    """
    f = np.arange(n)
    cosine = np.cos(2.0 * np.pi * f / n)
    lo1 = 1.0 + cosine
    hi1 = 1.0 - cosine
    lo, hi = {}, {}
    acc = np.ones(n)
    for level in range(1, levels + 1):
        idx = (f * (1 << (level - 1))) % n
        hi[level] = acc * hi1[idx] / n
        acc = acc * lo1[idx]
        lo[level] = acc / n
    return lo, hi


class SpectralEnergyTable:
    """Per-subband magnitude spectra |F psi_s|^2, one length-n row per band.

    Every basis function within a subband shares the same magnitude spectrum
    (translation only changes DFT phase), so 13 rows fully describe the n x n
    matrix |F Psi^H|^2. Rows are stored as (height, width) grids over
    unshifted DFT frequencies and each sums to 1.
    """

    def __init__(self, layout, rows):
        self.layout = layout
        self.rows = rows  # (num_bands, height, width) float64

    def project(self, freq_weights):
        """tau-style contraction: per band, sum_f row_s(f) * weights(f)."""
        return np.einsum("sij,ij->s", self.rows, freq_weights)


def build_spectral_energy(height, width, levels=DEFAULT_LEVELS):
    """Analytic spectral-energy table for the given grid size.

    Built from the tensor-product structure of the 2-D Haar basis; never
    materializes an n x n matrix.
    """
    _check_dims(height, width, levels)
    layout = SubbandLayout.create(height, width, levels)
    lo_y, hi_y = _haar_1d_band_spectra(height, levels)
    lo_x, hi_x = _haar_1d_band_spectra(width, levels)
    rows = np.empty((layout.num_bands, height, width))
    for i, band in enumerate(layout.bands):
        lev = band.level
        spec_y = lo_y[lev] if band.orientation in ("LL", "LH") else hi_y[lev]
        spec_x = lo_x[lev] if band.orientation in ("LL", "HL") else hi_x[lev]
        rows[i] = np.outer(spec_y, spec_x)
    return SpectralEnergyTable(layout, rows)
