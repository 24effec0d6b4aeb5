from rest_framework.exceptions import APIException


class DagridError(APIException):
    """
    Base class of every error raised by the library.
    The code travels with the exception so commands can report it.
    """
    status_code = 500
    default_detail = 'DAGrid operation failed.'
    default_code = 'dagrid_error'


class InvalidArgument(DagridError):
    status_code = 400
    default_detail = 'Invalid argument.'
    default_code = 'invalid_argument'


class UnsupportedKernel(InvalidArgument):
    default_detail = 'Operation not supported for this sampling kernel.'
    default_code = 'unsupported_kernel'


class NonFiniteValue(DagridError):
    status_code = 400
    default_detail = 'Tensor holds NaN or infinite values.'
    default_code = 'non_finite'


class ParseError(DagridError):
    """
    A file could not be decoded. `offset` is the byte offset where
    decoding stopped.
    """
    status_code = 400
    default_detail = 'Malformed file.'
    default_code = 'parse_error'

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f'{message} (byte offset {offset})')


class OracleFailure(DagridError):
    default_detail = 'Finite-difference oracle produced a non-finite value.'
    default_code = 'oracle_failure'
