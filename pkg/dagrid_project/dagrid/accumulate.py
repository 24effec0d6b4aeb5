"""
Directed accumulation, slicing and grid sampling with their backward passes.

accumulate scatters every source cell U[c, n, m] into the target cells
around (G^x_k[n, m], G^y_k[n, m]) for every grid k; slice_grid gathers the
same taps back. The two are adjoint: <accumulate(U), V> = <U, slice_grid(V)>.
Out-of-bounds taps are dropped, never clamped.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from dagrid.conf import dagrid_settings
from dagrid.exceptions import InvalidArgument, UnsupportedKernel
from dagrid.kernels import (
    KernelKind, axis_derivative_terms, axis_terms, combine, corner_taps)
from dagrid.parallel import chunk_ranges, map_chunks, pairwise_sum
from dagrid.tensor import as_tensor, ensure_finite, spatial_shape


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TargetShape:
    height: int
    width: int

    def __post_init__(self):
        self.check_fields()

    def check_fields(self):
        if self.height < 1 or self.width < 1:
            raise InvalidArgument(
                f'target shape must be positive, got {self.height}×{self.width}')

    @classmethod
    def of(cls, shape):
        if isinstance(shape, cls):
            return shape
        height, width = shape
        return cls(int(height), int(width))

    @property
    def cells(self):
        return self.height * self.width


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    gx: np.ndarray
    gy: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'gx', np.ascontiguousarray(self.gx, dtype=np.float64))
        object.__setattr__(self, 'gy', np.ascontiguousarray(self.gy, dtype=np.float64))
        self.check_fields()

    def check_fields(self):
        if self.gx.ndim != 2 or self.gx.shape != self.gy.shape:
            raise InvalidArgument(
                f'grid components must share one H×W shape, got {self.gx.shape} and {self.gy.shape}')
        ensure_finite(self.gx, 'gx')
        ensure_finite(self.gy, 'gy')

    @property
    def shape(self):
        return self.gx.shape


@dataclass(frozen=True, eq=False)
class GridSet:
    grids: Tuple[SamplingGrid, ...]

    def __post_init__(self):
        object.__setattr__(self, 'grids', tuple(self.grids))
        self.check_fields()

    def check_fields(self):
        if not self.grids:
            raise InvalidArgument('a grid set needs at least one grid')
        shapes = {grid.shape for grid in self.grids}
        if len(shapes) != 1:
            raise InvalidArgument(f'grids of one set must share a shape, got {sorted(shapes)}')

    def __iter__(self):
        return iter(self.grids)

    def __len__(self):
        return len(self.grids)

    @property
    def shape(self):
        return self.grids[0].shape


@dataclass(frozen=True, eq=False)
class AccumulatorGrid:
    """Homogeneous accumulator: values V (C×H'×W') and weights W (1×H'×W')."""
    values: np.ndarray
    weights: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        if self.weights.shape != (1,) + self.values.shape[1:]:
            raise InvalidArgument(
                f'weights {self.weights.shape} do not match values {self.values.shape}')
        if np.any(self.weights < 0):
            raise InvalidArgument('homogeneous weights must be non-negative')


def as_grid_set(grids):
    if isinstance(grids, GridSet):
        return grids
    if isinstance(grids, SamplingGrid):
        return GridSet((grids,))
    return GridSet(tuple(grids))


def _check_source(grids, source_shape):
    if tuple(grids.shape) != tuple(source_shape):
        raise InvalidArgument(
            f'grid shape {grids.shape} does not match source shape {tuple(source_shape)}')


@dataclass(frozen=True, eq=False)
class _SparseSums:
    """Per-channel sums on the target cells `index` (sorted, unique)."""
    index: np.ndarray
    values: np.ndarray

    @classmethod
    def of(cls, index, taps):
        # bincount adds in input order, so a + b keeps a's terms first
        index, inverse = np.unique(index, return_inverse=True)
        inverse = inverse.ravel()
        values = np.stack([np.bincount(inverse, weights=row, minlength=len(index)) for row in taps])
        return cls(index, values)

    def __add__(self, other):
        return _SparseSums.of(np.concatenate([self.index, other.index]),
                              np.concatenate([self.values, other.values], axis=1))

    def dense(self, cells):
        out = np.zeros((self.values.shape[0], cells))
        out[:, self.index] = self.values
        return out


def _scatter(u, grids, kind, shape, periodic_cols, workers):
    channels = u.shape[0]
    flat_u = u.reshape(channels, -1)
    flat_grids = [(grid.gx.ravel(), grid.gy.ravel()) for grid in grids]

    def run(start, stop):
        # a chunk only holds the target cells its taps reach
        indices = [np.empty(0, dtype=np.int64)]
        taps = [np.empty((channels, 0))]
        for gx, gy in flat_grids:
            corners = corner_taps(kind, gx[start:stop], gy[start:stop],
                                  shape.height, shape.width, periodic_cols)
            for corner in corners:
                keep = corner.inside & (corner.weight > 0)
                if not keep.any():
                    continue
                indices.append(corner.rows[keep] * shape.width + corner.cols[keep])
                taps.append(flat_u[:, start:stop][:, keep] * corner.weight[keep])
        return _SparseSums.of(np.concatenate(indices), np.concatenate(taps, axis=1))

    parts = map_chunks(run, chunk_ranges(flat_u.shape[1]), workers)
    return pairwise_sum(parts).dense(shape.cells).reshape(channels, shape.height, shape.width)


def _gather(v, grids, kind, source_shape, periodic_cols, workers):
    channels, target_h, target_w = v.shape
    flat_v = v.reshape(channels, -1)
    flat_grids = [(grid.gx.ravel(), grid.gy.ravel()) for grid in grids]

    def run(start, stop):
        out = np.zeros((channels, stop - start))
        for gx, gy in flat_grids:
            corners = corner_taps(kind, gx[start:stop], gy[start:stop],
                                  target_h, target_w, periodic_cols)
            for corner in corners:
                index = np.where(corner.inside, corner.rows * target_w + corner.cols, 0)
                out += flat_v[:, index] * corner.weight
        return out

    cells = source_shape[0] * source_shape[1]
    parts = map_chunks(run, chunk_ranges(cells), workers)
    return np.concatenate(parts, axis=1).reshape(channels, *source_shape)


def accumulate(u, grids, kind, shape, periodic_cols=False, workers=None):
    """
    V[c, i, j] = sum_k sum_n sum_m U[c, n, m] K(G^x_k[n, m], i) K(G^y_k[n, m], j)
    """
    u = as_tensor(u, 'u')
    grids = as_grid_set(grids)
    shape = TargetShape.of(shape)
    _check_source(grids, spatial_shape(u))
    logger.debug('accumulate %s -> %s with %d grid(s), kernel=%s',
                 u.shape, (shape.height, shape.width), len(grids), kind)
    return _scatter(u, grids, KernelKind(kind), shape, periodic_cols, workers)


def accumulate_weights(grids, kind, source_shape, shape, periodic_cols=False, workers=None):
    """Homogeneous weights W = accumulate(J) for the all-ones J."""
    return accumulate(np.ones((1,) + tuple(source_shape)), grids, kind, shape,
                      periodic_cols=periodic_cols, workers=workers)


def accumulate_homogeneous(u, grids, kind, shape, periodic_cols=False, workers=None):
    u = as_tensor(u, 'u')
    values = accumulate(u, grids, kind, shape, periodic_cols, workers)
    weights = accumulate_weights(grids, kind, spatial_shape(u), shape, periodic_cols, workers)
    return AccumulatorGrid(values, weights)


def normalize(acc, epsilon=None):
    """Divide accumulated values by their homogeneous weight plus epsilon."""
    epsilon = dagrid_settings.EPSILON if epsilon is None else epsilon
    if not epsilon > 0:
        raise InvalidArgument(f'epsilon must be > 0, got {epsilon}')
    if acc.normalized:
        raise InvalidArgument('accumulator grid is already normalized')
    values = acc.values / (acc.weights + epsilon)
    return AccumulatorGrid(ensure_finite(values, 'normalized values'), acc.weights, True)


def slice_grid(v, grids, kind, source_shape, periodic_cols=False, workers=None):
    """
    U[c, i, j] = sum_k sum_n sum_m V[c, n, m] K(G^x_k[i, j], n) K(G^y_k[i, j], m)
    """
    v = as_tensor(v, 'v')
    grids = as_grid_set(grids)
    source_shape = tuple(source_shape)
    _check_source(grids, source_shape)
    logger.debug('slice %s -> %s with %d grid(s), kernel=%s',
                 v.shape, source_shape, len(grids), kind)
    return _gather(v, grids, KernelKind(kind), source_shape, periodic_cols, workers)


def grid_sample(u, grid, kind, periodic_cols=False, workers=None):
    """Classical gather: output cell (i, j) reads u around (G^x[i, j], G^y[i, j])."""
    return slice_grid(u, GridSet((grid,)), kind, grid.shape, periodic_cols, workers)


def accumulate_backward_input(d_v, grids, kind, source_shape, periodic_cols=False, workers=None):
    return slice_grid(d_v, grids, kind, source_shape, periodic_cols, workers)


def slice_backward(d_u, grids, kind, shape, periodic_cols=False, workers=None):
    return accumulate(d_u, grids, kind, shape, periodic_cols, workers)


def accumulate_backward_grid(d_v, u, grids, kind=KernelKind.BILINEAR, periodic_cols=False):
    """
    Gradients of <accumulate(u, grids), d_v> w.r.t. every grid's (G^x, G^y).
    Returns one SamplingGrid of gradients per grid.
    """
    if KernelKind(kind) != KernelKind.BILINEAR:
        raise UnsupportedKernel('nearest sampling carries no grid gradient')
    d_v = as_tensor(d_v, 'd_v')
    u = as_tensor(u, 'u')
    grids = as_grid_set(grids)
    _check_source(grids, spatial_shape(u))
    if d_v.shape[0] != u.shape[0]:
        raise InvalidArgument(f'd_v has {d_v.shape[0]} channels, u has {u.shape[0]}')

    channels, target_h, target_w = d_v.shape
    flat_dv = d_v.reshape(channels, -1)
    flat_u = u.reshape(channels, -1)

    def contract(corners):
        total = np.zeros(flat_u.shape[1])
        for corner in corners:
            index = np.where(corner.inside, corner.rows * target_w + corner.cols, 0)
            total += np.sum(flat_u * flat_dv[:, index], axis=0) * corner.weight
        return total

    gradients = []
    for grid in grids:
        gx, gy = grid.gx.ravel(), grid.gy.ravel()
        d_gx = contract(combine(axis_derivative_terms(gx), axis_terms(kind, gy),
                                target_h, target_w, periodic_cols))
        d_gy = contract(combine(axis_terms(kind, gx), axis_derivative_terms(gy),
                                target_h, target_w, periodic_cols))
        gradients.append(SamplingGrid(d_gx.reshape(grid.shape), d_gy.reshape(grid.shape)))
    return gradients


def slice_backward_grid(d_u, v, grids, kind=KernelKind.BILINEAR, periodic_cols=False):
    """
    Gradients of <slice_grid(v, grids), d_u> w.r.t. every grid. The
    contraction is the accumulation one with the roles of the source and
    target tensors exchanged.
    """
    return accumulate_backward_grid(v, d_u, grids, kind, periodic_cols)
