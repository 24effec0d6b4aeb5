"""
Dense C×H×W float64 tensors, mesh grids and the separable filters used as
the grid-processing step between accumulation and slicing.

A tensor is a C-contiguous `numpy.ndarray` of dtype float64 and shape
(C, H, W). `as_tensor` is the single entry point that coerces and checks.
"""
import logging
import math
from typing import NamedTuple

import numpy as np

from dagrid.exceptions import InvalidArgument, NonFiniteValue


logger = logging.getLogger(__name__)


class MeshGrids(NamedTuple):
    mx: np.ndarray
    my: np.ndarray


def as_tensor(data, name='tensor'):
    """
    Return `data` as a C×H×W float64 array. 2-D input is read as a
    single channel.
    """
    t = np.ascontiguousarray(data, dtype=np.float64)
    if t.ndim == 2:
        t = t[np.newaxis]
    if t.ndim != 3:
        raise InvalidArgument(f'{name} must be C×H×W, got {t.ndim} dimensions')
    if min(t.shape) < 1:
        raise InvalidArgument(f'{name} has an empty dimension: {t.shape}')
    ensure_finite(t, name)
    return t


def ensure_finite(t, name='tensor'):
    if not np.all(np.isfinite(t)):
        raise NonFiniteValue(f'{name} holds NaN or infinite values')
    return t


def spatial_shape(t):
    return t.shape[-2], t.shape[-1]


def mesh_grids(height, width):
    if height < 1 or width < 1:
        raise InvalidArgument(f'mesh grids need positive dimensions, got {height}×{width}')
    mx, my = np.meshgrid(
        np.arange(height, dtype=np.float64),
        np.arange(width, dtype=np.float64),
        indexing='ij',
    )
    return MeshGrids(mx, my)


def _separable_pass(t, kernel, axis):
    # Zero padding; each output is divided by the weight of its in-bounds taps.
    radius = len(kernel) // 2
    n = t.shape[axis]
    pad = [(0, 0)] * t.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(t, pad)
    inside = np.pad(np.ones(n), radius)

    out = np.zeros_like(t)
    norm = np.zeros(n)
    for offset, weight in enumerate(kernel):
        out += weight * np.take(padded, np.arange(offset, offset + n), axis=axis)
        norm += weight * inside[offset:offset + n]

    shape = [1] * t.ndim
    shape[axis] = n
    return out / norm.reshape(shape)


def _separable_filter(t, kernel):
    t = as_tensor(t)
    return _separable_pass(_separable_pass(t, kernel, axis=1), kernel, axis=2)


def box_filter(t, radius):
    """Mean over the (2r+1)² window, renormalized at the borders."""
    if radius < 0:
        raise InvalidArgument(f'box radius must be >= 0, got {radius}')
    return _separable_filter(t, np.ones(2 * int(radius) + 1))


def gaussian_kernel(sigma):
    if not sigma > 0:
        raise InvalidArgument(f'gaussian sigma must be > 0, got {sigma}')
    half = math.ceil(3 * sigma)
    x = np.arange(-half, half + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def gaussian_filter(t, sigma):
    """Separable Gaussian truncated at ceil(3σ), renormalized at the borders."""
    kernel = gaussian_kernel(sigma)
    logger.debug('gaussian filter sigma=%s taps=%d', sigma, len(kernel))
    return _separable_filter(t, kernel)
