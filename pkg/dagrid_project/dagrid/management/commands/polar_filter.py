from dagrid.management.base import DagridCommand, save_tensor
from dagrid.polar import coverage_mask, polar_accumulate, polar_slice, roundtrip_metrics
from dagrid.serializers import PolarFilterSerializer, RoundtripResultSerializer
from dagrid.tensor import spatial_shape


class Command(DagridCommand):
    help = 'Filter an image in polar space (Gaussian by default) and slice the result back.'
    serializer_class = PolarFilterSerializer
    result_serializer_class = RoundtripResultSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_source_arguments(parser)
        self.add_polar_arguments(parser)
        self.add_filter_arguments(parser)
        parser.add_argument('--polar-out', dest='polar_out', help='write the filtered polar grid here')

    def run(self, serializer):
        data = serializer.validated_data
        u = self.load_source(data)
        cfg = serializer.polar_config(u)
        acc = polar_accumulate(u, cfg, data['kernel'], data['epsilon'], data['threads'])
        filtered = serializer.grid_filter()(acc.values)
        out = polar_slice(filtered, cfg, data['kernel'], spatial_shape(u), data['threads'])

        if data['polar_out']:
            save_tensor(filtered, data['polar_out'], normalize=True)
        if data['out']:
            save_tensor(out, data['out'])
        result = {
            'command': 'polar-filter',
            'shape': list(u.shape),
            'polar_shape': [cfg.h_r, cfg.w_psi],
            'slicing': data['kernel'],
            'filter': data['filter'],
            'out': data['out'],
        }
        result.update(roundtrip_metrics(u, out, coverage_mask(*spatial_shape(u), cfg)))
        return result
