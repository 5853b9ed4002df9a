"""Pure-numpy Haar kernels (fallback when the compiled extension is absent).

Both backends expose the same two functions operating on a single
decomposition level of a 2-D complex block:

    forward_level(block)  -> block rearranged into [[LL, LH], [HL, HH]]
    inverse_level(block)  -> the synthesis of that arrangement

LH carries the highpass along the second (width) axis, HL along the first
(height) axis. Filters are the orthonormal pair (1, 1)/sqrt(2), (1, -1)/sqrt(2).
"""

import numpy as np

_ISQRT2 = 1.0 / np.sqrt(2.0)


def forward_level(block):
    """One analysis level on a (2h, 2w) complex block. Returns a new array."""
    lo = (block[:, 0::2] + block[:, 1::2]) * _ISQRT2
    hi = (block[:, 0::2] - block[:, 1::2]) * _ISQRT2
    out = np.empty_like(block)
    h = block.shape[0] // 2
    w = block.shape[1] // 2
    out[:h, :w] = (lo[0::2] + lo[1::2]) * _ISQRT2
    out[h:, :w] = (lo[0::2] - lo[1::2]) * _ISQRT2
    out[:h, w:] = (hi[0::2] + hi[1::2]) * _ISQRT2
    out[h:, w:] = (hi[0::2] - hi[1::2]) * _ISQRT2
    return out


def inverse_level(block):
    """One synthesis level, exact inverse of forward_level."""
    h = block.shape[0] // 2
    w = block.shape[1] // 2
    lo = np.empty((block.shape[0], w), dtype=block.dtype)
    hi = np.empty_like(lo)
    lo[0::2] = (block[:h, :w] + block[h:, :w]) * _ISQRT2
    lo[1::2] = (block[:h, :w] - block[h:, :w]) * _ISQRT2
    hi[0::2] = (block[:h, w:] + block[h:, w:]) * _ISQRT2
    hi[1::2] = (block[:h, w:] - block[h:, w:]) * _ISQRT2
    out = np.empty_like(block)
    out[:, 0::2] = (lo + hi) * _ISQRT2
    out[:, 1::2] = (lo - hi) * _ISQRT2
    return out
