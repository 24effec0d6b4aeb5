from dagrid.circular import circular_accumulate, detect_circle_center, sobel_gradient_field
from dagrid.io import PhantomKind, synth
from dagrid.management.base import DagridCommand, load_tensor, save_tensor
from dagrid.serializers import CircleDetectSerializer, CircleResultSerializer


class Command(DagridCommand):
    help = ('Circular accumulation along image gradients and readout of the strongest '
            'circle center. The input is a file or a ring/disk phantom.')
    serializer_class = CircleDetectSerializer
    result_serializer_class = CircleResultSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--in', dest='in_path', help='input image (.pgm or .dgt)')
        parser.add_argument('--ring', help='ring phantom of this radius')
        parser.add_argument('--disk', help='disk phantom of this radius')
        parser.add_argument('--size', help='phantom side length')
        parser.add_argument('--thickness', help='ring thickness')
        parser.add_argument('--noise', help='Gaussian noise sigma')
        parser.add_argument('--radii', help='comma separated radii (default: the phantom radius)')
        parser.add_argument('--symmetric', help='subtract the opposite-direction accumulation '
                            '(default: true, false for --ring)')
        parser.add_argument('--shell', help='true: one band per radius, false: bands between radii')
        parser.add_argument('--flip', help='swap the gradient directions')
        parser.add_argument('--kernel', help='nearest or bilinear')
        parser.add_argument('--epsilon', help='gradient normalization epsilon')
        parser.add_argument('--band', help='read out this band only')
        parser.add_argument('--accumulator-out', dest='accumulator_out', help='write v_s here')

    def load(self, data):
        if data['in_path']:
            return load_tensor(data['in_path'])
        if data['ring'] is not None:
            return synth(PhantomKind.RING, data['size'], data['size'], radius=data['ring'],
                         thickness=data['thickness'], noise_sigma=data['noise'], seed=data['seed'])
        return synth(PhantomKind.DISK, data['size'], data['size'], radius=data['disk'],
                     noise_sigma=data['noise'], seed=data['seed'])

    def run(self, serializer):
        data = serializer.validated_data
        cfg = data['config']
        u = self.load(data)
        field = sobel_gradient_field(u, cfg.gradient_epsilon)
        acc = circular_accumulate(u, field, cfg, data['threads'])
        row, col, score = detect_circle_center(acc, data['band'])
        if data['accumulator_out']:
            save_tensor(acc.v_s, data['accumulator_out'], normalize=True)
        return {
            'command': 'circle-detect',
            'center': [row, col],
            'score': score,
            'radii': list(cfg.radii),
            'bands': [list(band) for band in cfg.bands],
            'band': data['band'],
            'symmetric': cfg.symmetric,
        }
