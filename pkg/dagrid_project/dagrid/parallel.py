"""
Deterministic work splitting.

Work is cut into chunks whose boundaries depend only on the problem size
and `CHUNK_CELLS`, never on the worker count. Chunks run on a thread pool
and come back in submission order; partial sums are reduced pairwise in
chunk order. The result is therefore bit-identical for any worker count.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

from dagrid.conf import dagrid_settings
from dagrid.exceptions import InvalidArgument


logger = logging.getLogger(__name__)


def resolve_workers(workers=None):
    workers = dagrid_settings.WORKERS if workers is None else workers
    if workers < 1:
        raise InvalidArgument(f'worker count must be >= 1, got {workers}')
    return int(workers)


def chunk_ranges(total, chunk_cells=None):
    chunk_cells = chunk_cells or dagrid_settings.CHUNK_CELLS
    return [(start, min(start + chunk_cells, total))
            for start in range(0, total, chunk_cells)]


def map_chunks(fn, ranges, workers=None):
    workers = resolve_workers(workers)
    if workers == 1 or len(ranges) < 2:
        return [fn(start, stop) for start, stop in ranges]
    logger.debug('running %d chunks on %d workers', len(ranges), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda bounds: fn(*bounds), ranges))


def pairwise_sum(parts):
    """Tree reduction in fixed index order: ((p0+p1)+(p2+p3))+..."""
    parts = list(parts)
    while len(parts) > 1:
        merged = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]
