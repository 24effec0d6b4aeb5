from dagrid.io import synth, tensor_checksum
from dagrid.management.base import DagridCommand, save_tensor
from dagrid.serializers import SynthResultSerializer, SynthSerializer


class Command(DagridCommand):
    help = 'Write a synthetic phantom: disk, ring, checker or smooth_blob.'
    serializer_class = SynthSerializer
    result_serializer_class = SynthResultSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--kind', required=True, help='disk, ring, checker or smooth_blob')
        parser.add_argument('--size', help='side length when --height/--width are not given')
        parser.add_argument('--height')
        parser.add_argument('--width')
        parser.add_argument('--center', help='"row,col" (default: H // 2, W // 2)')
        parser.add_argument('--radius')
        parser.add_argument('--thickness')
        parser.add_argument('--cell')
        parser.add_argument('--sigmas', help='comma separated')
        parser.add_argument('--noise', help='Gaussian noise sigma, PCG64 seeded by --seed')
        parser.add_argument('--out', required=True, help='output file (.pgm or .dgt)')

    def run(self, serializer):
        data = serializer.validated_data
        t = synth(data['kind'], data['height'], data['width'], center=data['center'],
                  radius=data['radius'], thickness=data['thickness'], cell=data['cell'],
                  sigmas=data['sigmas'], noise_sigma=data['noise'], seed=data['seed'])
        save_tensor(t, data['out'])
        return {
            'command': 'synth',
            'kind': data['kind'],
            'shape': list(t.shape),
            'checksum': tensor_checksum(t),
            'out': data['out'],
        }
