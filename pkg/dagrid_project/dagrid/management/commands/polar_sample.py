import numpy as np

from dagrid.io import tensor_checksum
from dagrid.management.base import DagridCommand, save_tensor
from dagrid.polar import polar_accumulate, polar_sample
from dagrid.serializers import PolarSampleSerializer, SampleResultSerializer


class Command(DagridCommand):
    help = ('Resample an image onto the polar grid by classical grid sampling. '
            'With --with-accumulator the polar accumulation is placed to its right.')
    serializer_class = PolarSampleSerializer
    result_serializer_class = SampleResultSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_source_arguments(parser)
        self.add_polar_arguments(parser)
        parser.add_argument('--with-accumulator', dest='with_accumulator', action='store_true',
                            default=None, help='append the polar accumulation along the angular axis')

    def run(self, serializer):
        data = serializer.validated_data
        u = self.load_source(data)
        cfg = serializer.polar_config(u)
        out = polar_sample(u, cfg, data['kernel'], data['threads'])
        if data['with_accumulator']:
            acc = polar_accumulate(u, cfg, data['kernel'], data['epsilon'], data['threads'])
            out = np.concatenate([out, acc.values], axis=2)
        if data['out']:
            save_tensor(out, data['out'], normalize=True)
        return {
            'command': 'polar-sample',
            'shape': list(out.shape),
            'checksum': tensor_checksum(out),
            'mean': float(out.mean()),
            'out': data['out'],
        }
