"""
PGM (P2/P5) and DGT tensor files, and synthetic phantoms.

DGT layout, all little-endian:
    b"DAG1" | ndim: u32 | ndim × dim: u32 | prod(dims) × float64, row-major

Phantom noise is drawn from numpy's PCG64 generator seeded with the given
integer, so the same seed gives the same bytes on every platform.
"""
import hashlib
import logging
import math
from pathlib import Path

import numpy as np
from django.db import models

from dagrid.exceptions import InvalidArgument, NonFiniteValue, ParseError
from dagrid.tensor import as_tensor, ensure_finite, mesh_grids


logger = logging.getLogger(__name__)

DGT_MAGIC = b'DAG1'
PGM_WHITESPACE = b' \t\n\r\v\f'


class PhantomKind(models.TextChoices):
    DISK = 'disk', 'Disk'
    RING = 'ring', 'Ring'
    CHECKER = 'checker', 'Checker'
    SMOOTH_BLOB = 'smooth_blob', 'Smooth blob'


class _HeaderReader:
    """Whitespace separated PGM tokens, skipping # comments."""

    def __init__(self, data):
        self.data = data
        self.offset = 0

    def _skip(self):
        data = self.data
        while self.offset < len(data):
            byte = data[self.offset:self.offset + 1]
            if byte in PGM_WHITESPACE:
                self.offset += 1
            elif byte == b'#':
                end = data.find(b'\n', self.offset)
                self.offset = len(data) if end < 0 else end + 1
            else:
                break

    def token(self, what):
        self._skip()
        start = self.offset
        while self.offset < len(self.data) and self.data[self.offset:self.offset + 1] not in PGM_WHITESPACE:
            self.offset += 1
        if start == self.offset:
            raise ParseError(f'truncated file, expected {what}', start)
        return self.data[start:self.offset], start

    def integer(self, what, low, high):
        raw, start = self.token(what)
        if not raw.isdigit():
            raise ParseError(f'expected {what}, got {raw[:16]!r}', start)
        value = int(raw)
        if not low <= value <= high:
            raise ParseError(f'{what} {value} outside [{low}, {high}]', start)
        return value


def read_pgm(path):
    """Read a P2 or P5 graymap as a 1×H×W tensor scaled to [0, 1]."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b'P2', b'P5'):
        raise ParseError(f'unsupported magic {magic!r}, expected P2 or P5', 0)
    reader = _HeaderReader(data)
    reader.offset = 2
    width = reader.integer('width', 1, 2 ** 31)
    height = reader.integer('height', 1, 2 ** 31)
    maxval = reader.integer('maxval', 1, 65535)
    count = width * height

    if magic == b'P2':
        # every value takes a separator and at least one digit
        if count > (len(data) - reader.offset) // 2:
            raise ParseError(f'truncated payload, header declares {count} values', len(data))
        values = np.empty(count, dtype=np.float64)
        for index in range(count):
            values[index] = reader.integer('pixel value', 0, maxval)
    else:
        if reader.offset >= len(data) or data[reader.offset:reader.offset + 1] not in PGM_WHITESPACE:
            raise ParseError('missing separator after maxval', reader.offset)
        start = reader.offset + 1
        dtype = np.dtype('u1') if maxval < 256 else np.dtype('>u2')
        end = start + count * dtype.itemsize
        if end > len(data):
            raise ParseError(f'truncated payload, expected {count * dtype.itemsize} bytes', len(data))
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=start)
        if raw.max(initial=0) > maxval:
            bad = int(np.argmax(raw > maxval))
            raise ParseError(f'pixel value above maxval {maxval}', start + bad * dtype.itemsize)
        values = raw.astype(np.float64)

    logger.debug('read %s: %s %d×%d maxval %d', path, magic.decode(), height, width, maxval)
    return (values / maxval).reshape(1, height, width)


def _to_bytes(plane, normalize):
    if normalize:
        low, high = plane.min(), plane.max()
        if high == low:
            return np.full(plane.shape, 128, dtype=np.uint8)
        scaled = (plane - low) / (high - low) * 255
    else:
        scaled = np.clip(plane, 0.0, 1.0) * 255
    # round half up
    return np.floor(scaled + 0.5).astype(np.uint8)


def write_pgm(t, path, normalize=False):
    """Write a single-channel tensor as P5 with maxval 255."""
    t = as_tensor(t, 't')
    if t.shape[0] != 1:
        raise InvalidArgument(f'PGM holds one channel, got {t.shape[0]}')
    height, width = t.shape[1:]
    payload = _to_bytes(t[0], normalize)
    with open(path, 'wb') as handle:
        handle.write(f'P5\n{width} {height}\n255\n'.encode('ascii'))
        handle.write(payload.tobytes())
    logger.debug('wrote %s (%d×%d, normalize=%s)', path, height, width, normalize)


def write_dgt(t, path):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim not in (2, 3):
        raise InvalidArgument(f'DGT stores 2 or 3 dimensions, got {t.ndim}')
    if not np.all(np.isfinite(t)):
        raise NonFiniteValue('refusing to write NaN or infinite values')
    header = np.array((t.ndim,) + t.shape, dtype='<u4')
    with open(path, 'wb') as handle:
        handle.write(DGT_MAGIC)
        handle.write(header.tobytes())
        handle.write(np.ascontiguousarray(t, dtype='<f8').tobytes())


def tensor_checksum(t):
    """sha256 of the float64 little-endian bytes, row-major."""
    return hashlib.sha256(np.ascontiguousarray(t, dtype='<f8').tobytes()).hexdigest()


def read_dgt(path):
    data = Path(path).read_bytes()
    if data[:4] != DGT_MAGIC:
        raise ParseError(f'bad magic {data[:4]!r}, expected {DGT_MAGIC!r}', 0)
    if len(data) < 8:
        raise ParseError('truncated header', len(data))
    ndim = int(np.frombuffer(data, dtype='<u4', count=1, offset=4)[0])
    if ndim not in (2, 3):
        raise ParseError(f'ndim must be 2 or 3, got {ndim}', 4)
    payload_start = 8 + 4 * ndim
    if len(data) < payload_start:
        raise ParseError('truncated header', len(data))
    dims = tuple(int(d) for d in np.frombuffer(data, dtype='<u4', count=ndim, offset=8))
    payload_bytes = math.prod(dims) * 8
    expected = payload_start + payload_bytes
    if len(data) < expected:
        raise ParseError(f'truncated payload, dims {list(dims)} need {payload_bytes} bytes', len(data))
    if len(data) > expected:
        raise ParseError('trailing bytes after payload', expected)
    t = np.frombuffer(data, dtype='<f8', offset=payload_start).astype(np.float64).reshape(dims)
    return ensure_finite(t, str(path))


def synth(kind, height, width, center=None, radius=8.0, thickness=2.0, cell=8,
          sigmas=(8.0,), noise_sigma=0.0, seed=0):
    """
    1×H×W phantom. disk is 1 where rho <= radius, ring is 1 where
    |rho - radius| <= thickness / 2, rho being the distance to `center`
    (default (H // 2, W // 2)). smooth_blob averages isotropic Gaussians,
    one per sigma, peaking at 1.
    """
    kind = PhantomKind(kind)
    if height < 1 or width < 1:
        raise InvalidArgument(f'phantom size must be positive, got {height}×{width}')
    if center is None:
        center = (height // 2, width // 2)
    if not (0 <= center[0] <= height - 1 and 0 <= center[1] <= width - 1):
        raise InvalidArgument(f'center {tuple(center)} lies outside the {height}×{width} image')
    if noise_sigma < 0:
        raise InvalidArgument(f'noise sigma must be >= 0, got {noise_sigma}')

    mesh = mesh_grids(height, width)
    rho = np.sqrt((mesh.mx - center[0]) ** 2 + (mesh.my - center[1]) ** 2)

    if kind == PhantomKind.DISK:
        if radius < 0:
            raise InvalidArgument(f'radius must be >= 0, got {radius}')
        image = (rho <= radius).astype(np.float64)
    elif kind == PhantomKind.RING:
        if radius <= 0 or thickness <= 0:
            raise InvalidArgument('ring radius and thickness must be > 0')
        image = (np.abs(rho - radius) <= thickness / 2).astype(np.float64)
    elif kind == PhantomKind.CHECKER:
        if cell < 1:
            raise InvalidArgument(f'cell must be >= 1, got {cell}')
        rows, cols = np.indices((height, width))
        image = ((rows // cell + cols // cell) % 2).astype(np.float64)
    else:
        sigmas = tuple(sigmas)
        if not sigmas or min(sigmas) <= 0:
            raise InvalidArgument('smooth_blob needs positive sigmas')
        image = np.mean([np.exp(-rho ** 2 / (2 * s * s)) for s in sigmas], axis=0)

    if noise_sigma > 0:
        rng = np.random.Generator(np.random.PCG64(seed))
        image = image + rng.normal(0.0, noise_sigma, size=image.shape)
    return image[np.newaxis]
