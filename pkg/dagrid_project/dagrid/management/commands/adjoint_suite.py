from dagrid.gradcheck import adjoint_suite
from dagrid.management.base import DagridCommand
from dagrid.serializers import AdjointResultSerializer, AdjointSuiteSerializer


class Command(DagridCommand):
    help = 'Check <accumulate(U), V> = <U, slice(V)> on random instances.'
    serializer_class = AdjointSuiteSerializer
    result_serializer_class = AdjointResultSerializer

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--instances', help='number of random instances')
        parser.add_argument('--tol', help='relative error tolerance')
        parser.add_argument('--max-size', dest='max_size', help='largest side of the random tensors')

    def run(self, serializer):
        data = serializer.validated_data
        report = adjoint_suite(data['instances'], data['seed'], data['tol'], data['max_size'],
                               workers=data['threads'])
        return {
            'command': 'adjoint-suite',
            'instances': report.instances,
            'max_rel_err': report.max_rel_err,
            'tolerance': report.tolerance,
            'passed': report.passed,
            'passed_check': report.passed,
        }
