"""
Circular accumulation (CA).

Every pixel is pushed along its normalized image gradient Û for k steps,
k running over a radius band. The signed symmetric form subtracts the
accumulation along -Û:

    V_s = D(S; G, K) - D(S; G⁻, K)
    V_u = D(U; G, K) - D(U; G⁻, K)

with G_k = k·Û + M and G⁻_k = -k·Û + M. Outputs keep the source shape and
are not normalized.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from dagrid.accumulate import (
    GridSet, SamplingGrid, accumulate, accumulate_backward_grid, slice_grid)
from dagrid.conf import dagrid_settings
from dagrid.exceptions import InvalidArgument
from dagrid.kernels import KernelKind
from dagrid.parallel import pairwise_sum
from dagrid.tensor import as_tensor, box_filter, mesh_grids, spatial_shape


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GradientField:
    ux: np.ndarray
    uy: np.ndarray
    magnitude: np.ndarray
    unit_x: np.ndarray
    unit_y: np.ndarray
    epsilon: float

    @property
    def shape(self):
        return self.ux.shape


def gradient_field_from_components(ux, uy, epsilon=None):
    """S = sqrt(ux² + uy²), Û = (ux, uy) / (S + epsilon)."""
    epsilon = dagrid_settings.GRADIENT_EPSILON if epsilon is None else epsilon
    if not epsilon > 0:
        raise InvalidArgument(f'epsilon must be > 0, got {epsilon}')
    ux = np.asarray(ux, dtype=np.float64)
    uy = np.asarray(uy, dtype=np.float64)
    if ux.ndim != 2 or ux.shape != uy.shape:
        raise InvalidArgument(f'gradient components must share one H×W shape, got {ux.shape} and {uy.shape}')
    magnitude = np.sqrt(ux * ux + uy * uy)
    return GradientField(ux, uy, magnitude, ux / (magnitude + epsilon),
                         uy / (magnitude + epsilon), float(epsilon))


def _sobel_rows(p):
    # [1, 2, 1] smoothing across columns of a padded plane
    return p[:, :-2] + 2 * p[:, 1:-1] + p[:, 2:]


def sobel_gradient_field(u, epsilon=None):
    """3×3 Sobel scaled by 1/8, replicate-padded. x runs along rows."""
    u = as_tensor(u, 'u')
    if u.shape[0] != 1:
        raise InvalidArgument(f'gradient fields need a single-channel image, got {u.shape[0]} channels')
    padded = np.pad(u[0], 1, mode='edge')
    ux = (_sobel_rows(padded[2:]) - _sobel_rows(padded[:-2])) / 8
    transposed = padded.T
    uy = ((_sobel_rows(transposed[2:]) - _sobel_rows(transposed[:-2])) / 8).T
    return gradient_field_from_components(ux, uy, epsilon)


@dataclass(frozen=True)
class CircularConfig:
    """
    `radii` is either a single N (band k = 1..N) or a strictly decreasing
    list of band edges: [15, 10, 5] gives the bands 11..15, 6..10 and 1..5.
    With `shell` every radius r is its own band {r}.
    """
    radii: Tuple[int, ...] = (15, 10, 5)
    symmetric: bool = True
    epsilon: Optional[float] = None
    kernel: str = KernelKind.BILINEAR
    shell: bool = False
    flip: bool = False

    def __post_init__(self):
        radii = self.radii
        if isinstance(radii, (int, np.integer)):
            radii = (radii,)
        object.__setattr__(self, 'radii', tuple(int(r) for r in radii))
        object.__setattr__(self, 'kernel', KernelKind(self.kernel))
        self.check_fields()

    def check_fields(self):
        if not self.radii:
            raise InvalidArgument('radii must not be empty')
        if min(self.radii) < 1:
            raise InvalidArgument(f'radii must be >= 1, got {list(self.radii)}')
        if self.shell:
            if len(set(self.radii)) != len(self.radii):
                raise InvalidArgument(f'shell radii must be distinct, got {list(self.radii)}')
        elif any(a <= b for a, b in zip(self.radii, self.radii[1:])):
            raise InvalidArgument(f'band radii must be strictly decreasing, got {list(self.radii)}')
        if self.epsilon is not None and not self.epsilon > 0:
            raise InvalidArgument(f'epsilon must be > 0, got {self.epsilon}')

    @classmethod
    def full_range(cls, height, width, **kwargs):
        return cls(radii=(max(height, width),), **kwargs)

    @property
    def bands(self):
        if self.shell:
            return [(r,) for r in self.radii]
        edges = self.radii + (0,)
        return [tuple(range(b + 1, a + 1)) for a, b in zip(edges, edges[1:])]

    @property
    def gradient_epsilon(self):
        return dagrid_settings.GRADIENT_EPSILON if self.epsilon is None else self.epsilon


@dataclass(eq=False)
class CircularAccumulation:
    v_s: np.ndarray
    v_u: np.ndarray
    per_band: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    bands: List[Tuple[int, ...]] = field(default_factory=list)


def _ray_grids(field, steps, direction):
    mesh = mesh_grids(*field.shape)
    return GridSet(tuple(
        SamplingGrid(direction * k * field.unit_x + mesh.mx,
                     direction * k * field.unit_y + mesh.my)
        for k in steps
    ))


def circular_grids(field, radii_max, steps=None):
    """Forward and backward grid sets for k = 1..radii_max (or the given steps)."""
    if steps is None:
        if radii_max < 1:
            raise InvalidArgument(f'radii_max must be >= 1, got {radii_max}')
        steps = range(1, radii_max + 1)
    return _ray_grids(field, steps, 1.0), _ray_grids(field, steps, -1.0)


def _signed_directions(cfg):
    """(sign, ray direction) of every accumulation term."""
    first, second = (-1.0, 1.0) if cfg.flip else (1.0, -1.0)
    terms = [(1.0, first)]
    if cfg.symmetric:
        terms.append((-1.0, second))
    return terms


def _band_terms(field, cfg):
    for steps in cfg.bands:
        yield steps, [(sign, direction, _ray_grids(field, steps, direction))
                      for sign, direction in _signed_directions(cfg)]


def _check_field(u, field):
    if spatial_shape(u) != field.shape:
        raise InvalidArgument(f'image {spatial_shape(u)} and gradient field {field.shape} differ')


def _signed_accumulate(t, terms, kind, workers):
    shape = spatial_shape(t)
    (_, _, first), *rest = terms
    out = accumulate(t, first, kind, shape, workers=workers)
    for _, _, grids in rest:
        out = out - accumulate(t, grids, kind, shape, workers=workers)
    return out


def circular_accumulate(u, field, cfg, workers=None):
    u = as_tensor(u, 'u')
    _check_field(u, field)
    magnitude = field.magnitude[np.newaxis]
    per_band = [
        (_signed_accumulate(magnitude, terms, cfg.kernel, workers),
         _signed_accumulate(u, terms, cfg.kernel, workers))
        for _, terms in _band_terms(field, cfg)
    ]
    logger.debug('circular accumulation over bands %s (symmetric=%s, flip=%s)',
                 [f'{min(s)}..{max(s)}' for s in cfg.bands], cfg.symmetric, cfg.flip)
    return CircularAccumulation(
        pairwise_sum([band[0] for band in per_band]),
        pairwise_sum([band[1] for band in per_band]),
        per_band, list(cfg.bands))


def circular_backward_input(d_vs, d_vu, field, cfg, workers=None):
    """Gradients (d_S, d_U) of <v_s, d_vs> + <v_u, d_vu> with the grids held fixed."""
    d_vs = as_tensor(d_vs, 'd_vs')
    d_vu = as_tensor(d_vu, 'd_vu')
    shape = field.shape
    d_s = np.zeros((1,) + shape)
    d_u = np.zeros((d_vu.shape[0],) + shape)
    for _, terms in _band_terms(field, cfg):
        for sign, _, grids in terms:
            d_s += sign * slice_grid(d_vs, grids, cfg.kernel, shape, workers=workers)
            d_u += sign * slice_grid(d_vu, grids, cfg.kernel, shape, workers=workers)
    return d_s[0], d_u


def circular_backward_field(d_vs, d_vu, u, field, cfg, workers=None):
    """
    Gradients (d_ux, d_uy) of <v_s, d_vs> + <v_u, d_vu> w.r.t. the gradient
    components, through the magnitude S and through the grids via
    Û = (ux, uy) / (S + epsilon). Bilinear kernel only; undefined where a
    grid coordinate sits on an integer.
    """
    u = as_tensor(u, 'u')
    _check_field(u, field)
    d_vs = as_tensor(d_vs, 'd_vs')
    d_vu = as_tensor(d_vu, 'd_vu')
    magnitude = field.magnitude[np.newaxis]

    d_unit_x = np.zeros(field.shape)
    d_unit_y = np.zeros(field.shape)
    for steps, terms in _band_terms(field, cfg):
        for sign, direction, grids in terms:
            from_s = accumulate_backward_grid(d_vs, magnitude, grids, cfg.kernel)
            from_u = accumulate_backward_grid(d_vu, u, grids, cfg.kernel)
            for k, grad_s, grad_u in zip(steps, from_s, from_u):
                d_unit_x += sign * direction * k * (grad_s.gx + grad_u.gx)
                d_unit_y += sign * direction * k * (grad_s.gy + grad_u.gy)

    d_s, _ = circular_backward_input(d_vs, d_vu, field, cfg, workers)
    s = field.magnitude
    denom = s + field.epsilon
    safe_s = np.where(s > 0, s, 1.0)
    projection = np.where(
        s > 0, (d_unit_x * field.ux + d_unit_y * field.uy) / (safe_s * denom * denom), 0.0)
    from_magnitude = np.where(s > 0, d_s / safe_s, 0.0)
    d_ux = d_unit_x / denom - field.ux * projection + field.ux * from_magnitude
    d_uy = d_unit_y / denom - field.uy * projection + field.uy * from_magnitude
    return d_ux, d_uy


def central_mass(t, center, half=2):
    """Sum of t over the (2·half+1)² window around center."""
    t = np.asarray(t)
    if t.ndim == 3:
        t = t.sum(axis=0)
    row, col = center
    return float(t[max(row - half, 0):row + half + 1, max(col - half, 0):col + half + 1].sum())


def detect_circle_center(acc, band=None):
    """
    Peak of the 3×3 local mean of v_s (summed over bands, or of one band).
    Ties go to the larger raw v_s, then to the smallest (row, col).
    Returns (row, col, score) with score the local mean at the peak.
    """
    if band is None:
        v_s = acc.v_s
    else:
        if not 0 <= band < len(acc.per_band):
            raise InvalidArgument(f'band {band} out of range, accumulation has {len(acc.per_band)}')
        v_s = acc.per_band[band][0]
    v_s = np.asarray(v_s, dtype=np.float64)
    if v_s.size == 0:
        raise InvalidArgument('empty accumulation')
    if v_s.ndim == 3:
        v_s = v_s.sum(axis=0)
    smoothed = box_filter(v_s, 1)[0]
    order = np.lexsort((np.arange(v_s.size), -v_s.ravel(), -smoothed.ravel()))
    row, col = np.unravel_index(order[0], v_s.shape)
    return int(row), int(col), float(smoothed[row, col])
