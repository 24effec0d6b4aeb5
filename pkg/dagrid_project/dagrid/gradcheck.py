"""
Finite-difference oracle for the analytic backward passes, and the random
problem suites the `gradcheck` and `adjoint-suite` commands run.

Random grids are built kink-free: every coordinate is an integer in
[0, size - 2] plus a fraction in [margin, 1 - margin], so every bilinear
tap is in bounds and no probe crosses an integer.
"""
import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from dagrid.accumulate import (
    SamplingGrid, accumulate, accumulate_backward_grid, accumulate_backward_input,
    grid_sample, slice_backward, slice_backward_grid, slice_grid)
from dagrid.circular import (
    CircularConfig, circular_accumulate, circular_backward_input, circular_grids,
    gradient_field_from_components)
from dagrid.conf import dagrid_settings
from dagrid.exceptions import InvalidArgument, OracleFailure
from dagrid.kernels import KernelKind
from dagrid.polar import (
    ParametricSlicer, PolarConfig, parametric_slice, parametric_slice_backward)


logger = logging.getLogger(__name__)


@dataclass
class GradReport:
    op_name: str
    max_abs_err: float
    max_rel_err: float
    worst_index: Tuple[int, ...]
    passed: bool
    tolerance: float


def finite_difference(scalar_fn, x, h=None):
    """Central differences (f(x + h·e) - f(x - h·e)) / 2h for every element of x."""
    h = dagrid_settings.FD_STEP if h is None else h
    if not h > 0:
        raise InvalidArgument(f'step must be > 0, got {h}')
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_grad = grad.reshape(-1)
    for index in range(flat_x.size):
        original = flat_x[index]
        flat_x[index] = original + h
        plus = scalar_fn(x)
        flat_x[index] = original - h
        minus = scalar_fn(x)
        flat_x[index] = original
        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise OracleFailure(f'non-finite evaluation at element {index}')
        flat_grad[index] = (plus - minus) / (2 * h)
    return grad


def check(op_name, analytic, numeric, tol):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise InvalidArgument(
            f'{op_name}: analytic {analytic.shape} and numeric {numeric.shape} differ')
    if analytic.size == 0:
        return GradReport(op_name, 0.0, 0.0, (), True, tol)
    abs_err = np.abs(analytic - numeric)
    rel_err = abs_err / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    worst = int(np.argmax(rel_err))
    max_rel = float(rel_err.reshape(-1)[worst])
    return GradReport(
        op_name=op_name,
        max_abs_err=float(abs_err.max()),
        max_rel_err=max_rel,
        worst_index=tuple(int(i) for i in np.unravel_index(worst, analytic.shape)),
        passed=max_rel < tol,
        tolerance=tol,
    )


def inner(a, b):
    return float(np.sum(a * b))


def kink_free_grid(rng, shape, target_shape, margin=None):
    margin = dagrid_settings.KINK_MARGIN if margin is None else margin

    def axis(size):
        if size < 2:
            raise InvalidArgument('kink-free grids need targets of at least 2×2')
        whole = rng.integers(0, size - 1, size=shape)
        return whole + rng.uniform(margin, 1 - margin, size=shape)

    return SamplingGrid(axis(target_shape[0]), axis(target_shape[1]))


def ramp(rng, channels, shape):
    """Random tensor with strictly increasing neighbours along both axes."""
    rows, cols = np.indices(shape)
    return 2.0 * (rows + cols) + rng.uniform(0, 1, size=(channels,) + tuple(shape))


def _problem(rng, trial):
    channels = 1 + trial % 2
    n_grids = (1, 2, 3)[trial % 3]
    source = tuple(int(s) for s in rng.integers(3, 6, size=2))
    target = tuple(int(s) for s in rng.integers(3, 7, size=2))
    grids = [kink_free_grid(rng, source, target) for _ in range(n_grids)]
    return channels, source, target, grids


def _merge(reports, name, tol):
    worst = max(reports, key=lambda r: r.max_rel_err)
    return GradReport(name, max(r.max_abs_err for r in reports), worst.max_rel_err,
                      worst.worst_index, all(r.passed for r in reports), tol)


def _grid_checks(name, grids, analytic, evaluate, h, tol):
    """Probe every component of every grid; `evaluate` maps a grid list to a scalar."""
    reports = []
    for index, grid in enumerate(grids):
        def moved(gx, gy, index=index):
            probe = list(grids)
            probe[index] = SamplingGrid(gx, gy)
            return evaluate(probe)

        numeric_x = finite_difference(lambda x: moved(x, grid.gy), grid.gx, h)
        numeric_y = finite_difference(lambda y: moved(grid.gx, y), grid.gy, h)
        reports.append(check(f'{name}:gx', analytic[index].gx, numeric_x, tol))
        reports.append(check(f'{name}:gy', analytic[index].gy, numeric_y, tol))
    return reports


def _accumulate_trial(rng, trial, kind, h, tol):
    channels, source, target, grids = _problem(rng, trial)
    u = rng.uniform(0.5, 1.5, size=(channels,) + source)
    r = rng.uniform(0.5, 1.5, size=(channels,) + target)
    reports = [check(
        'accumulate:input',
        accumulate_backward_input(r, grids, kind, source),
        finite_difference(lambda x: inner(accumulate(x, grids, kind, target), r), u, h),
        tol)]
    if KernelKind(kind) == KernelKind.BILINEAR:
        r = ramp(rng, channels, target)
        reports += _grid_checks(
            'accumulate', grids, accumulate_backward_grid(r, u, grids, kind),
            lambda probe: inner(accumulate(u, probe, kind, target), r), h, tol)
    return reports


def _slice_trial(rng, trial, kind, h, tol):
    channels, source, target, grids = _problem(rng, trial)
    v = rng.uniform(0.5, 1.5, size=(channels,) + target)
    r = rng.uniform(0.5, 1.5, size=(channels,) + source)
    reports = [check(
        'slice:input',
        slice_backward(r, grids, kind, target),
        finite_difference(lambda x: inner(slice_grid(x, grids, kind, source), r), v, h),
        tol)]
    if KernelKind(kind) == KernelKind.BILINEAR:
        v = ramp(rng, channels, target)
        reports += _grid_checks(
            'slice', grids, slice_backward_grid(r, v, grids, kind),
            lambda probe: inner(slice_grid(v, probe, kind, source), r), h, tol)
    return reports


def _grid_sample_trial(rng, trial, kind, h, tol):
    channels, output, source, _ = _problem(rng, trial)
    grid = kink_free_grid(rng, output, source)
    u = rng.uniform(0.5, 1.5, size=(channels,) + source)
    r = rng.uniform(0.5, 1.5, size=(channels,) + output)
    reports = [check(
        'grid_sample:input',
        slice_backward(r, [grid], kind, source),
        finite_difference(lambda x: inner(grid_sample(x, grid, kind), r), u, h),
        tol)]
    if KernelKind(kind) == KernelKind.BILINEAR:
        u = ramp(rng, channels, source)
        reports += _grid_checks(
            'grid_sample', [grid], slice_backward_grid(r, u, [grid], kind),
            lambda probe: inner(grid_sample(u, probe[0], kind), r), h, tol)
    return reports


def _parametric_trial(rng, trial, kind, h, tol):
    size = int(rng.integers(5, 9))
    channels = 1 + trial % 2
    cfg = PolarConfig.for_image(size, size, h_r=4, w_psi=8)
    p = rng.uniform(0.5, 1.5, size=(channels, cfg.h_r, cfg.w_psi))
    slicer = ParametricSlicer(rng.uniform(0.5, 1.5, size=(size, size, 2, 2)))
    r = rng.uniform(0.5, 1.5, size=(channels, size, size))
    d_p, d_l = parametric_slice_backward(r, p, slicer, cfg)
    return [
        check('parametric_slice:p', d_p,
              finite_difference(lambda x: inner(parametric_slice(x, slicer, cfg), r), p, h), tol),
        check('parametric_slice:l', d_l,
              finite_difference(
                  lambda x: inner(parametric_slice(p, ParametricSlicer(x), cfg), r), slicer.l, h),
              tol),
    ]


def _rays_inside(field, cfg):
    """Pixels whose every ray stays inside the image, so no tap is dropped."""
    height, width = field.shape
    inside = np.ones(field.shape, dtype=bool)
    for steps in cfg.bands:
        for grids in circular_grids(field, max(steps), steps):
            for grid in grids:
                inside &= (grid.gx >= 0) & (grid.gx <= height - 1)
                inside &= (grid.gy >= 0) & (grid.gy <= width - 1)
    return inside


def _circular_trial(rng, trial, kind, h, tol):
    # One-directional accumulations: the signed difference can cancel to
    # values below what central differences resolve.
    size = int(rng.integers(6, 9))
    cfg = CircularConfig(radii=(2, 1) if trial % 2 else 1, symmetric=False,
                         flip=bool(trial % 3 == 1), kernel=kind)
    field = gradient_field_from_components(rng.normal(size=(size, size)), rng.normal(size=(size, size)))
    u = rng.uniform(0.5, 1.5, size=(1, size, size))
    r_s = rng.uniform(0.5, 1.5, size=(1, size, size))
    r_u = rng.uniform(0.5, 1.5, size=(1, size, size))
    d_s, d_u = circular_backward_input(r_s, r_u, field, cfg)

    def through_magnitude(s):
        return inner(circular_accumulate(u, replace(field, magnitude=s), cfg).v_s, r_s)

    mask = (field.magnitude >= 10 * field.epsilon) & _rays_inside(field, cfg)
    numeric_s = finite_difference(through_magnitude, field.magnitude, h)
    numeric_u = finite_difference(lambda x: inner(circular_accumulate(x, field, cfg).v_u, r_u), u, h)
    return [
        check('circular:s', d_s[mask], numeric_s[mask], tol),
        check('circular:u', d_u[:, mask], numeric_u[:, mask], tol),
    ]


GRADIENT_SUITES = {
    'accumulate': _accumulate_trial,
    'slice': _slice_trial,
    'grid_sample': _grid_sample_trial,
    'parametric_slice': _parametric_trial,
    'circular': _circular_trial,
}


def run_suite(op, kind=KernelKind.BILINEAR, trials=20, tol=1e-6, seed=0, h=None):
    """Run `trials` random finite-difference checks of one operation."""
    if op not in GRADIENT_SUITES:
        raise InvalidArgument(f'unknown gradient suite {op!r}, expected one of {sorted(GRADIENT_SUITES)}')
    rng = np.random.default_rng(seed)
    reports = []
    for trial in range(trials):
        reports.extend(GRADIENT_SUITES[op](rng, trial, kind, h, tol))
    merged = _merge(reports, op, tol)
    logger.info('gradcheck %s (%s): %d checks, max rel err %.3g', op, kind, len(reports), merged.max_rel_err)
    return merged


@dataclass
class AdjointReport:
    instances: int
    max_rel_err: float
    passed: bool
    tolerance: float


def _random_grid(rng, shape, target):
    # Unrestricted positions, some out of bounds, some on integers.
    gx = rng.uniform(-1.5, target[0] + 0.5, size=shape)
    gy = rng.uniform(-1.5, target[1] + 0.5, size=shape)
    snap = rng.random(size=shape) < 0.2
    return SamplingGrid(np.where(snap, np.round(gx), gx), np.where(snap, np.round(gy), gy))


def adjoint_suite(instances=100, seed=0, tol=1e-10, max_size=64, workers=None):
    """
    <accumulate(U), V> against <U, slice_grid(V)> on random instances,
    alternating kernels, with 1, 2 or 5 grids. Grids reach out of bounds
    and land on integers, so the dropped and kink taps are covered too.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for instance in range(instances):
        kind = (KernelKind.BILINEAR, KernelKind.NEAREST)[instance % 2]
        n_grids = (1, 2, 5)[instance % 3]
        source = tuple(int(s) for s in rng.integers(1, max_size + 1, size=2))
        target = tuple(int(s) for s in rng.integers(1, max_size + 1, size=2))
        channels = int(rng.integers(1, 4))
        grids = [_random_grid(rng, source, target) for _ in range(n_grids)]
        u = rng.normal(size=(channels,) + source)
        v = rng.normal(size=(channels,) + target)
        left = inner(accumulate(u, grids, kind, target, workers=workers), v)
        right = inner(u, slice_grid(v, grids, kind, source, workers=workers))
        # relative to the pairing of absolute values, which bounds both sides
        scale = max(inner(np.abs(u), slice_grid(np.abs(v), grids, kind, source, workers=workers)), 1e-12)
        worst = max(worst, abs(left - right) / scale)
    return AdjointReport(instances, worst, worst < tol, tol)
