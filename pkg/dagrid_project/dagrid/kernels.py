"""
Sampling kernels shared by accumulation, slicing and grid sampling.

A 2-D kernel is the product of two 1-D kernels, one per axis, so the
non-zero terms of K(gx, i)·K(gy, j) are enumerated per axis and combined
into at most four corners.
"""
import math
from typing import NamedTuple

import numpy as np
from django.db import models

from dagrid.exceptions import UnsupportedKernel


class KernelKind(models.TextChoices):
    NEAREST = 'nearest', 'Nearest'
    BILINEAR = 'bilinear', 'Bilinear'


class Tap(NamedTuple):
    row: int
    col: int
    weight: float


class Corner(NamedTuple):
    """
    One of the (up to) four kernel corners for a whole grid at once.
    `weight` is zero wherever `inside` is false.
    """
    rows: np.ndarray
    cols: np.ndarray
    weight: np.ndarray
    inside: np.ndarray


def kernel_weight(kind, g, i):
    if KernelKind(kind) == KernelKind.NEAREST:
        return 1.0 if math.floor(g + 0.5) == i else 0.0
    return max(0.0, 1.0 - abs(g - i))


def kernel_derivative(kind, g, i):
    """d/dg of the bilinear weight; -sign(g - i) on the closed support."""
    if KernelKind(kind) != KernelKind.BILINEAR:
        raise UnsupportedKernel('only the bilinear kernel carries grid gradients')
    d = g - i
    if abs(d) > 1.0:
        return 0.0
    return -float(np.sign(d))


def axis_terms(kind, g):
    """
    Per-axis (index, weight) pairs. Nearest gives one pair, bilinear
    gives the floor-anchored pair (p, 1 - f), (p + 1, f).
    """
    if KernelKind(kind) == KernelKind.NEAREST:
        return [(np.floor(g + 0.5).astype(np.int64), np.ones_like(g))]
    base = np.floor(g)
    frac = g - base
    base = base.astype(np.int64)
    return [(base, 1.0 - frac), (base + 1, frac)]


def axis_derivative_terms(g):
    """
    (index, d weight / dg) for the bilinear kernel, -sign(g - i) on the
    closed support like kernel_derivative: an integer g = p gives -1 at
    p - 1, 0 at p and +1 at p + 1.
    """
    base = np.floor(g)
    on_kink = g == base
    base = base.astype(np.int64)
    return [(base - 1, np.where(on_kink, -1.0, 0.0)),
            (base, np.where(on_kink, 0.0, -1.0)),
            (base + 1, np.ones_like(g))]


def combine(row_terms, col_terms, target_h, target_w, periodic_cols=False):
    corners = []
    for rows, wr in row_terms:
        row_inside = (rows >= 0) & (rows < target_h)
        for cols, wc in col_terms:
            if periodic_cols:
                cols = np.mod(cols, target_w)
                inside = row_inside
            else:
                inside = row_inside & (cols >= 0) & (cols < target_w)
            weight = np.where(inside, wr * wc, 0.0)
            corners.append(Corner(rows, cols, weight, inside))
    return corners


def corner_taps(kind, gx, gy, target_h, target_w, periodic_cols=False):
    """
    Vectorized taps of the 2-D kernel at fractional coordinates (gx, gy).
    With `periodic_cols` the column index wraps modulo target_w instead
    of being dropped.
    """
    return combine(axis_terms(kind, gx), axis_terms(kind, gy),
                   target_h, target_w, periodic_cols)


def taps(kind, gx, gy, target_h, target_w, periodic_cols=False):
    """Non-zero in-bounds taps for a single coordinate pair."""
    corners = corner_taps(kind, np.array([float(gx)]), np.array([float(gy)]),
                          target_h, target_w, periodic_cols)
    result = []
    for corner in corners:
        weight = float(corner.weight[0])
        if corner.inside[0] and weight > 0:
            result.append(Tap(int(corner.rows[0]), int(corner.cols[0]), weight))
    return result
