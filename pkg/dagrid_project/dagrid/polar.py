"""
Polar accumulation (PA), polar sampling (PS) and slicing back to the image.

The polar grid maps image cell (i, j) to radial coordinate
    r = sqrt((i - x_c)² + (j - y_c)²) / s_r
and angular coordinate
    psi = ((atan2(j - y_c, i - x_c) + pi) mod 2pi) / s_theta.
With angular wrap the angular axis is periodic: taps past the last bin
land on bin 0 and slicing reads across the seam the same way.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from django.db import models

from dagrid.accumulate import (
    AccumulatorGrid, SamplingGrid, TargetShape, accumulate_homogeneous,
    grid_sample, normalize, slice_grid)
from dagrid.conf import dagrid_settings
from dagrid.exceptions import InvalidArgument
from dagrid.kernels import KernelKind
from dagrid.tensor import as_tensor, box_filter, gaussian_filter, mesh_grids, spatial_shape


logger = logging.getLogger(__name__)


class FilterKind(models.TextChoices):
    NONE = 'none', 'None'
    BOX = 'box', 'Box'
    GAUSSIAN = 'gaussian', 'Gaussian'


@dataclass(frozen=True)
class GridFilter:
    kind: str = FilterKind.NONE
    radius: int = 1
    sigma: float = 1.0

    def __call__(self, t):
        kind = FilterKind(self.kind)
        if kind == FilterKind.BOX:
            return box_filter(t, self.radius)
        if kind == FilterKind.GAUSSIAN:
            return gaussian_filter(t, self.sigma)
        return t


@dataclass(frozen=True)
class PolarConfig:
    s_r: float
    s_theta: float
    h_r: int
    w_psi: int
    center: Tuple[float, float]
    angular_wrap: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'center', (float(self.center[0]), float(self.center[1])))
        self.check_fields()

    def check_fields(self):
        if not self.s_r > 0 or not self.s_theta > 0:
            raise InvalidArgument(
                f'sampling rates must be > 0, got s_r={self.s_r}, s_theta={self.s_theta}')
        if self.h_r < 1 or self.w_psi < 1:
            raise InvalidArgument(f'polar grid must be at least 1×1, got {self.h_r}×{self.w_psi}')
        if self.angular_wrap and self.s_theta * self.w_psi < 2 * math.pi - 1e-9:
            raise InvalidArgument('with angular wrap the angular bins must tile the circle')
        if not all(math.isfinite(c) for c in self.center):
            raise InvalidArgument(f'center must be finite, got {self.center}')

    @property
    def shape(self):
        return TargetShape(self.h_r, self.w_psi)

    @classmethod
    def for_image(cls, height, width, h_r=None, w_psi=None, center=None,
                  angular_wrap=True, cover_corners=False, image=None, s_r=None, s_theta=None):
        """
        Resolve the defaults for a height×width image: s_theta tiles the
        circle, s_r covers the inscribed circle (or the corners) and the
        center is the geometric center, or the intensity center of mass
        of `image` when center='mass'. Explicit `s_r` and `s_theta` win
        over the derived rates.
        """
        h_r = h_r or dagrid_settings.POLAR_SIZE
        w_psi = w_psi or dagrid_settings.POLAR_SIZE
        if center is None:
            center = ((height - 1) / 2, (width - 1) / 2)
        elif center == 'mass':
            if image is None:
                raise InvalidArgument('center of mass needs the image')
            center = center_of_mass(image)
        extent = math.hypot(height, width) if cover_corners else min(height, width)
        s_r = s_r or extent / (2 * max(h_r - 1, 1))
        s_theta = s_theta or 2 * math.pi / w_psi
        return cls(s_r=s_r, s_theta=s_theta, h_r=h_r, w_psi=w_psi,
                   center=center, angular_wrap=angular_wrap)


def center_of_mass(image):
    u = as_tensor(image, 'image')
    mass = np.abs(u).sum(axis=0)
    total = mass.sum()
    height, width = spatial_shape(u)
    if total == 0:
        return (height - 1) / 2, (width - 1) / 2
    mesh = mesh_grids(height, width)
    return float((mesh.mx * mass).sum() / total), float((mesh.my * mass).sum() / total)


def polar_grid(height, width, cfg):
    mesh = mesh_grids(height, width)
    di = mesh.mx - cfg.center[0]
    dj = mesh.my - cfg.center[1]
    gx = np.sqrt(di * di + dj * dj) / cfg.s_r
    # angle in [0, 2pi): the atan2 == pi ray belongs to bin 0, not bin W_psi
    turn = 2 * math.pi / cfg.s_theta
    gy = np.mod(np.arctan2(dj, di) + math.pi, 2 * math.pi) / cfg.s_theta
    gy = np.where(gy >= turn, gy - turn, gy)
    return SamplingGrid(gx, gy)


def inverse_polar_grid(cfg):
    """Image-space position of every polar cell, for polar sampling."""
    radius = np.arange(cfg.h_r, dtype=np.float64)[:, np.newaxis] * cfg.s_r
    theta = np.arange(cfg.w_psi, dtype=np.float64)[np.newaxis, :] * cfg.s_theta - math.pi
    gx = cfg.center[0] + radius * np.cos(theta)
    gy = cfg.center[1] + radius * np.sin(theta)
    return SamplingGrid(gx, gy)


def coverage_mask(height, width, cfg):
    return polar_grid(height, width, cfg).gx <= cfg.h_r - 1


def polar_accumulate(u, cfg, kind, epsilon=None, workers=None):
    """Accumulate u into the H_r×W_psi polar grid and normalize by its weights."""
    u = as_tensor(u, 'u')
    grid = polar_grid(*spatial_shape(u), cfg)
    acc = accumulate_homogeneous(u, grid, kind, cfg.shape,
                                 periodic_cols=cfg.angular_wrap, workers=workers)
    return normalize(acc, epsilon)


def polar_sample(u, cfg, kind, workers=None):
    return grid_sample(as_tensor(u, 'u'), inverse_polar_grid(cfg), kind, workers=workers)


def _check_polar(p, cfg):
    p = as_tensor(p, 'p')
    if spatial_shape(p) != (cfg.h_r, cfg.w_psi):
        raise InvalidArgument(
            f'polar tensor is {spatial_shape(p)}, config expects {(cfg.h_r, cfg.w_psi)}')
    return p


def polar_slice(p, cfg, kind, image_shape, workers=None):
    p = _check_polar(p, cfg)
    grid = polar_grid(*image_shape, cfg)
    return slice_grid(p, grid, kind, image_shape,
                      periodic_cols=cfg.angular_wrap, workers=workers)


def polar_roundtrip_filter(u, cfg, kind, grid_filter=None, epsilon=None, workers=None):
    """Accumulate, filter in polar space, slice back."""
    u = as_tensor(u, 'u')
    acc = polar_accumulate(u, cfg, kind, epsilon, workers)
    processed = (grid_filter or GridFilter())(acc.values)
    return polar_slice(processed, cfg, kind, spatial_shape(u), workers)


@dataclass(frozen=True, eq=False)
class ParametricSlicer:
    """Per-pixel 2×2 combination weights L (H×W×2×2) over the four polar cells."""
    l: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'l', np.ascontiguousarray(self.l, dtype=np.float64))
        if self.l.ndim != 4 or self.l.shape[2:] != (2, 2):
            raise InvalidArgument(f'slicer parameters must be H×W×2×2, got {self.l.shape}')

    @property
    def image_shape(self):
        return self.l.shape[:2]

    @classmethod
    def bilinear(cls, image_shape, cfg):
        """Initialization that reproduces bilinear polar slicing exactly."""
        grid = polar_grid(*image_shape, cfg)
        fx = grid.gx - np.floor(grid.gx)
        fy = grid.gy - np.floor(grid.gy)
        row_weights = (1.0 - fx, fx)
        col_weights = (1.0 - fy, fy)
        l = np.empty(tuple(image_shape) + (2, 2))
        for a in (0, 1):
            for b in (0, 1):
                l[..., a, b] = row_weights[a] * col_weights[b]
        return cls(l)


def _parametric_corners(cfg, image_shape):
    """(a, b, flat polar index, inside) for the four cells around every pixel."""
    grid = polar_grid(*image_shape, cfg)
    p = np.floor(grid.gx).astype(np.int64)
    q = np.floor(grid.gy).astype(np.int64)
    corners = []
    for a in (0, 1):
        rows = p + a
        row_inside = (rows >= 0) & (rows < cfg.h_r)
        for b in (0, 1):
            cols = q + b
            if cfg.angular_wrap:
                cols = np.mod(cols, cfg.w_psi)
                inside = row_inside
            else:
                inside = row_inside & (cols >= 0) & (cols < cfg.w_psi)
            index = np.where(inside, rows * cfg.w_psi + cols, 0)
            corners.append((a, b, index.ravel(), inside.ravel()))
    return corners


def _check_slicer(slicer, image_shape=None):
    if image_shape is not None and tuple(slicer.image_shape) != tuple(image_shape):
        raise InvalidArgument(
            f'slicer is {slicer.image_shape}, image is {tuple(image_shape)}')


def parametric_slice(p, slicer, cfg):
    """U[c, i, j] = sum_{a, b} P[c, p + a, q + b] L[i, j, a, b], p = floor(G^x), q = floor(G^y)."""
    p = _check_polar(p, cfg)
    channels = p.shape[0]
    flat_p = p.reshape(channels, -1)
    image_shape = tuple(slicer.image_shape)
    flat_l = slicer.l.reshape(-1, 2, 2)
    out = np.zeros((channels, image_shape[0] * image_shape[1]))
    for a, b, index, inside in _parametric_corners(cfg, image_shape):
        out += flat_p[:, index] * np.where(inside, flat_l[:, a, b], 0.0)
    return out.reshape((channels,) + image_shape)


def parametric_slice_backward(d_u, p, slicer, cfg):
    """Gradients (d_p, d_l) of <parametric_slice(p, slicer), d_u>."""
    p = _check_polar(p, cfg)
    d_u = as_tensor(d_u, 'd_u')
    image_shape = tuple(slicer.image_shape)
    _check_slicer(slicer, spatial_shape(d_u))
    if d_u.shape[0] != p.shape[0]:
        raise InvalidArgument(f'd_u has {d_u.shape[0]} channels, p has {p.shape[0]}')

    channels = p.shape[0]
    flat_p = p.reshape(channels, -1)
    flat_du = d_u.reshape(channels, -1)
    flat_l = slicer.l.reshape(-1, 2, 2)
    cells = cfg.h_r * cfg.w_psi

    d_p = np.zeros((channels, cells))
    d_l = np.zeros_like(flat_l)
    for a, b, index, inside in _parametric_corners(cfg, image_shape):
        d_l[:, a, b] = np.where(inside, np.sum(flat_p[:, index] * flat_du, axis=0), 0.0)
        for channel in range(channels):
            d_p[channel] += np.bincount(
                index[inside], weights=flat_du[channel][inside] * flat_l[inside, a, b],
                minlength=cells)
    return (d_p.reshape(channels, cfg.h_r, cfg.w_psi),
            d_l.reshape(slicer.l.shape))


@dataclass
class SlicerFit:
    slicer: ParametricSlicer
    losses: List[float] = field(default_factory=list)


def fit_parametric_slicer(u, cfg, kind=KernelKind.BILINEAR, steps=50,
                          learning_rate=0.25, epsilon=None, slicer=None, workers=None):
    """
    Gradient descent on L for 0.5·||parametric_slice(P) - u||², P being the
    normalized polar accumulation of u. Starts from the bilinear slicer.
    `losses` holds the loss before every step and after the last one.
    """
    if steps < 0 or not learning_rate > 0:
        raise InvalidArgument('fitting needs steps >= 0 and learning_rate > 0')
    u = as_tensor(u, 'u')
    image_shape = spatial_shape(u)
    p = polar_accumulate(u, cfg, kind, epsilon, workers).values
    slicer = slicer or ParametricSlicer.bilinear(image_shape, cfg)
    _check_slicer(slicer, image_shape)

    fit = SlicerFit(slicer)
    for step in range(steps + 1):
        residual = parametric_slice(p, fit.slicer, cfg) - u
        fit.losses.append(0.5 * float(np.sum(residual * residual)))
        if step == steps:
            break
        _, d_l = parametric_slice_backward(residual, p, fit.slicer, cfg)
        fit.slicer = ParametricSlicer(fit.slicer.l - learning_rate * d_l)
    logger.debug('parametric slicer fit: loss %.6g -> %.6g in %d steps',
                 fit.losses[0], fit.losses[-1], steps)
    return fit


def roundtrip_metrics(reference, output, mask=None, peak=1.0):
    """MSE and PSNR over the masked pixels (all channels). PSNR is None when MSE is 0."""
    reference = as_tensor(reference, 'reference')
    output = as_tensor(output, 'output')
    if mask is None:
        mask = np.ones(spatial_shape(reference), dtype=bool)
    diff = (output - reference)[:, mask]
    mse = float(np.mean(diff * diff))
    psnr = None if mse == 0 else 10 * math.log10(peak * peak / mse)
    return {'mse': mse, 'psnr': psnr, 'pixels': int(mask.sum())}


def parametric_roundtrip(u, cfg, slicer, kind=KernelKind.BILINEAR, epsilon=None, workers=None):
    u = as_tensor(u, 'u')
    p = polar_accumulate(u, cfg, kind, epsilon, workers).values
    return parametric_slice(p, slicer, cfg)


def polar_presets() -> Tuple[int, ...]:
    return tuple(dagrid_settings.POLAR_PRESETS)


def preset_config(height, width, size: int, center: Optional[object] = None, image=None):
    return PolarConfig.for_image(height, width, h_r=size, w_psi=size, center=center, image=image)
