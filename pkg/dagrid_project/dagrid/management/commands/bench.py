import logging
import time

import numpy as np

from dagrid.accumulate import SamplingGrid, accumulate, slice_grid
from dagrid.io import tensor_checksum
from dagrid.kernels import KernelKind
from dagrid.management.base import DagridCommand
from dagrid.serializers import BenchResultSerializer, BenchSerializer


logger = logging.getLogger(__name__)


class Command(DagridCommand):
    help = ('Time bilinear accumulate and slice for several sizes and worker counts. '
            'Exits 1 if the checksums differ between worker counts.')
    serializer_class = BenchSerializer
    result_serializer_class = BenchResultSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--sizes', help='comma separated image sides (default 64,224,512)')
        parser.add_argument('--workers', help='comma separated worker counts (default 1,2,4)')
        parser.add_argument('--repeats', help='timed repetitions, the fastest is kept')

    def timed(self, fn, repeats):
        best = None
        for _ in range(repeats):
            start = time.perf_counter()
            out = fn()
            elapsed = time.perf_counter() - start
            best = elapsed if best is None else min(best, elapsed)
        return out, best

    def run(self, serializer):
        data = serializer.validated_data
        runs = []
        consistent = True
        for size in data['sizes']:
            rng = np.random.default_rng(data['seed'])
            u = rng.uniform(size=(1, size, size))
            grid = SamplingGrid(rng.uniform(-0.5, size - 0.5, size=(size, size)),
                                rng.uniform(-0.5, size - 0.5, size=(size, size)))
            ops = {
                'accumulate': lambda w: accumulate(u, grid, KernelKind.BILINEAR, (size, size), workers=w),
                'slice': lambda w: slice_grid(u, grid, KernelKind.BILINEAR, (size, size), workers=w),
            }
            for op, fn in ops.items():
                checksums = set()
                for workers in data['workers']:
                    out, seconds = self.timed(lambda: fn(workers), data['repeats'])
                    checksum = tensor_checksum(out)
                    checksums.add(checksum)
                    runs.append({'op': op, 'size': size, 'workers': workers,
                                 'seconds': seconds, 'checksum': checksum})
                    logger.info('bench %s %d² on %d workers: %.4fs', op, size, workers, seconds)
                consistent = consistent and len(checksums) == 1
        return {'command': 'bench', 'runs': runs, 'consistent': consistent,
                'passed_check': consistent}
