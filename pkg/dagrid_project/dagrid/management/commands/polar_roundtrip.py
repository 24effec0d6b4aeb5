from dagrid.management.base import DagridCommand, save_tensor
from dagrid.polar import (
    coverage_mask, fit_parametric_slicer, parametric_roundtrip, polar_roundtrip_filter,
    roundtrip_metrics)
from dagrid.serializers import PolarRoundtripSerializer, RoundtripResultSerializer
from dagrid.tensor import spatial_shape


class Command(DagridCommand):
    help = ('Accumulate an image into the polar grid, optionally filter it there, '
            'slice it back and report MSE/PSNR over the covered disk.')
    serializer_class = PolarRoundtripSerializer
    result_serializer_class = RoundtripResultSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_source_arguments(parser)
        self.add_polar_arguments(parser)
        self.add_filter_arguments(parser)
        parser.add_argument('--slicing', help='bilinear or parametric')
        parser.add_argument('--fit-steps', dest='fit_steps', help='gradient steps of the parametric fit')
        parser.add_argument('--learning-rate', dest='learning_rate', help='step size of the parametric fit')

    def run(self, serializer):
        data = serializer.validated_data
        u = self.load_source(data)
        cfg = serializer.polar_config(u)
        result = {
            'command': 'polar-roundtrip',
            'shape': list(u.shape),
            'polar_shape': [cfg.h_r, cfg.w_psi],
            'slicing': data['slicing'],
            'filter': data['filter'],
            'out': data['out'],
        }
        if data['slicing'] == 'parametric':
            fit = fit_parametric_slicer(u, cfg, steps=data['fit_steps'],
                                        learning_rate=data['learning_rate'],
                                        epsilon=data['epsilon'], workers=data['threads'])
            out = parametric_roundtrip(u, cfg, fit.slicer, epsilon=data['epsilon'],
                                       workers=data['threads'])
            result['fit_loss'] = [fit.losses[0], fit.losses[-1]]
        else:
            out = polar_roundtrip_filter(u, cfg, data['kernel'], serializer.grid_filter(),
                                         epsilon=data['epsilon'], workers=data['threads'])
        result.update(roundtrip_metrics(u, out, coverage_mask(*spatial_shape(u), cfg)))
        if data['out']:
            save_tensor(out, data['out'])
        return result
