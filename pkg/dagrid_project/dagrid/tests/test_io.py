import shutil
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_array_equal

from dagrid.exceptions import InvalidArgument, NonFiniteValue, ParseError
from dagrid.io import read_dgt, read_pgm, synth, tensor_checksum, write_dgt, write_pgm


class FileTestCase(SimpleTestCase):

    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmp)

    def write(self, name, data):
        path = self.tmp / name
        path.write_bytes(data)
        return path


class ReadPgmTests(FileTestCase):

    def test_plain(self):
        t = read_pgm(self.write('a.pgm', b'P2 2 2 255\n0 255\n128 64\n'))
        assert_array_equal(t, [[[0, 1.0], [128 / 255, 64 / 255]]])

    def test_raw(self):
        assert_array_equal(read_pgm(self.write('b.pgm', b'P5\n1 1\n255\n\xff')), [[[1.0]]])

    def test_comments(self):
        t = read_pgm(self.write('c.pgm', b'P2\n# made by hand\n2 1 # size\n4\n1 2\n'))
        assert_array_equal(t, [[[0.25, 0.5]]])

    def test_sixteen_bit_is_big_endian(self):
        t = read_pgm(self.write('d.pgm', b'P5 2 1 65535\n\x01\x00\xff\xff'))
        assert_array_equal(t, [[[256 / 65535, 1.0]]])

    def test_color_is_rejected(self):
        with self.assertRaises(ParseError) as ctx:
            read_pgm(self.write('e.ppm', b'P6 1 1 255\n\x00\x00\x00'))
        self.assertEqual(ctx.exception.offset, 0)

    def test_truncated_payload(self):
        with self.assertRaises(ParseError) as ctx:
            read_pgm(self.write('f.pgm', b'P5 2 2 255\n\x00\x01'))
        self.assertEqual(ctx.exception.offset, 13)

    def test_truncated_plain(self):
        with self.assertRaises(ParseError):
            read_pgm(self.write('g.pgm', b'P2 2 2 255\n0 1 2'))

    def test_oversized_plain_header(self):
        data = b'P2 200000 200000 255\n0 1 2\n'
        with self.assertRaises(ParseError) as ctx:
            read_pgm(self.write('huge.pgm', data))
        self.assertEqual(ctx.exception.offset, len(data))

    def test_value_above_maxval(self):
        with self.assertRaises(ParseError) as ctx:
            read_pgm(self.write('h.pgm', b'P2 2 1 10\n3 11'))
        self.assertEqual(ctx.exception.offset, 12)

    def test_bad_header(self):
        with self.assertRaises(ParseError):
            read_pgm(self.write('i.pgm', b'P2 x 1 255\n0'))


class WritePgmTests(FileTestCase):

    def test_clamped_bytes(self):
        path = self.tmp / 'out.pgm'
        write_pgm([[0.0], [1.0]], path)
        self.assertEqual(path.read_bytes(), b'P5\n1 2\n255\n\x00\xff')

    def test_clamp_and_round_half_up(self):
        path = self.tmp / 'out.pgm'
        write_pgm([[-1.0, 2.0, 0.5]], path)
        self.assertEqual(path.read_bytes()[-3:], b'\x00\xff\x80')

    def test_normalize_constant(self):
        path = self.tmp / 'out.pgm'
        write_pgm(np.full((1, 3, 3), 0.5), path, normalize=True)
        self.assertEqual(path.read_bytes()[-9:], b'\x80' * 9)

    def test_normalize_range(self):
        path = self.tmp / 'out.pgm'
        write_pgm([[-2.0, 0.0, 2.0]], path, normalize=True)
        self.assertEqual(path.read_bytes()[-3:], b'\x00\x80\xff')

    def test_lattice_round_trip(self):
        values = np.random.default_rng(0).integers(0, 256, size=(1, 7, 5)) / 255
        path = self.tmp / 'lattice.pgm'
        write_pgm(values, path)
        assert_array_equal(read_pgm(path), values)

    def test_off_lattice_error(self):
        values = np.random.default_rng(1).uniform(size=(1, 6, 6))
        path = self.tmp / 'off.pgm'
        write_pgm(values, path)
        self.assertLessEqual(np.abs(read_pgm(path) - values).max(), 1 / 510 + 1e-12)

    def test_single_channel_only(self):
        with self.assertRaises(InvalidArgument):
            write_pgm(np.zeros((2, 2, 2)), self.tmp / 'x.pgm')


class DgtTests(FileTestCase):

    def test_bit_exact_round_trip(self):
        rng = np.random.default_rng(2)
        for index, shape in enumerate([(3, 4), (2, 5, 3), (1, 1, 1)]):
            t = rng.normal(size=shape) * 10.0 ** rng.integers(-300, 300, size=shape)
            path = self.tmp / f'{index}.dgt'
            write_dgt(t, path)
            back = read_dgt(path)
            self.assertEqual(back.shape, t.shape)
            self.assertEqual(back.tobytes(), t.tobytes())
            self.assertEqual(tensor_checksum(back), tensor_checksum(t))

    def test_many_random_round_trips(self):
        rng = np.random.default_rng(3)
        path = self.tmp / 'many.dgt'
        for _ in range(10000):
            ndim = int(rng.integers(2, 4))
            t = rng.normal(size=tuple(rng.integers(1, 5, size=ndim))) * 10.0 ** rng.integers(-300, 300)
            write_dgt(t, path)
            back = read_dgt(path)
            self.assertEqual(back.shape, t.shape)
            self.assertEqual(back.tobytes(), t.tobytes())

    def test_header_layout(self):
        path = self.tmp / 'eye.dgt'
        write_dgt(np.eye(2), path)
        data = path.read_bytes()
        self.assertEqual(len(data), 4 + 4 + 8 + 32)
        self.assertEqual(data[:4], b'DAG1')
        self.assertEqual(data[4:16], b'\x02\x00\x00\x00\x02\x00\x00\x00\x02\x00\x00\x00')
        self.assertEqual(data[16:24], np.array([1.0], dtype='<f8').tobytes())

    def test_non_finite_is_refused(self):
        with self.assertRaises(NonFiniteValue):
            write_dgt(np.array([[1.0, np.inf]]), self.tmp / 'inf.dgt')

    def test_bad_magic(self):
        with self.assertRaises(ParseError) as ctx:
            read_dgt(self.write('bad.dgt', b'DAG2' + bytes(12)))
        self.assertEqual(ctx.exception.offset, 0)

    def test_truncated(self):
        path = self.tmp / 'cut.dgt'
        write_dgt(np.ones((2, 2)), path)
        data = path.read_bytes()
        with self.assertRaises(ParseError):
            read_dgt(self.write('short.dgt', data[:-1]))
        with self.assertRaises(ParseError):
            read_dgt(self.write('long.dgt', data + b'\x00'))
        with self.assertRaises(ParseError):
            read_dgt(self.write('head.dgt', data[:10]))

    def test_bad_rank(self):
        with self.assertRaises(ParseError):
            read_dgt(self.write('rank.dgt', b'DAG1\x04\x00\x00\x00'))

    def test_read_refuses_nan(self):
        data = b'DAG1\x02\x00\x00\x00\x01\x00\x00\x00\x01\x00\x00\x00' + np.array([np.nan], '<f8').tobytes()
        with self.assertRaises(NonFiniteValue):
            read_dgt(self.write('nan.dgt', data))


class SynthTests(SimpleTestCase):

    def test_degenerate_disk(self):
        t = synth('disk', 9, 9, center=(4, 4), radius=0)
        self.assertEqual(t.shape, (1, 9, 9))
        self.assertEqual(t.sum(), 1.0)
        self.assertEqual(t[0, 4, 4], 1.0)

    def test_ring(self):
        t = synth('ring', 64, 64, center=(32, 32), radius=8, thickness=2)
        rows, cols = np.indices((64, 64))
        rho = np.hypot(rows - 32, cols - 32)
        assert_array_equal(t[0], ((rho >= 7) & (rho <= 9)).astype(float))

    def test_default_center(self):
        t = synth('disk', 10, 12, radius=0)
        self.assertEqual(t[0, 5, 6], 1.0)

    def test_checker(self):
        t = synth('checker', 4, 4, cell=2)
        assert_array_equal(t[0], [[0, 0, 1, 1], [0, 0, 1, 1], [1, 1, 0, 0], [1, 1, 0, 0]])

    def test_smooth_blob_peaks_at_one(self):
        t = synth('smooth_blob', 21, 21, sigmas=(2.0, 5.0))
        self.assertEqual(t.max(), 1.0)
        self.assertEqual(np.unravel_index(np.argmax(t[0]), (21, 21)), (10, 10))

    def test_noise_is_seeded(self):
        a = synth('ring', 32, 32, radius=8, noise_sigma=0.1, seed=5)
        b = synth('ring', 32, 32, radius=8, noise_sigma=0.1, seed=5)
        c = synth('ring', 32, 32, radius=8, noise_sigma=0.1, seed=6)
        self.assertEqual(a.tobytes(), b.tobytes())
        self.assertNotEqual(a.tobytes(), c.tobytes())

    def test_invalid_geometry(self):
        with self.assertRaises(InvalidArgument):
            synth('ring', 16, 16, radius=0)
        with self.assertRaises(InvalidArgument):
            synth('disk', 16, 16, center=(20, 3))
        with self.assertRaises(InvalidArgument):
            synth('smooth_blob', 16, 16, sigmas=())
        with self.assertRaises(ValueError):
            synth('triangle', 16, 16)
