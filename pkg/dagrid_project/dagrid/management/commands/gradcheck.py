from dataclasses import asdict

from dagrid.gradcheck import GRADIENT_SUITES, run_suite
from dagrid.management.base import DagridCommand
from dagrid.serializers import GradcheckResultSerializer, GradcheckSerializer


class Command(DagridCommand):
    help = ('Compare analytic gradients with central finite differences on random '
            'problems. Exits 1 unless every check passes.')
    serializer_class = GradcheckSerializer
    result_serializer_class = GradcheckResultSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--op', required=True,
                            help=f'one of {", ".join(sorted(GRADIENT_SUITES))} or all')
        parser.add_argument('--kernel', help='nearest or bilinear')
        parser.add_argument('--trials', help='random problems per operation')
        parser.add_argument('--tol', help='relative error tolerance')
        parser.add_argument('--step', dest='h', help='finite-difference step (default 1e-5)')

    def run(self, serializer):
        data = serializer.validated_data
        ops = sorted(GRADIENT_SUITES) if data['op'] == 'all' else [data['op']]
        reports = [run_suite(op, data['kernel'], data['trials'], data['tol'], data['seed'], data['h'])
                   for op in ops]
        passed = all(report.passed for report in reports)
        return {
            'command': 'gradcheck',
            'kernel': data['kernel'],
            'trials': data['trials'],
            'passed': passed,
            'reports': [asdict(report) for report in reports],
            'passed_check': passed,
        }
