import tempfile
import unittest
from pathlib import Path

from numpy import array_equal, cos, frombuffer, testing
from pandas import DataFrame, read_csv

import pynsac as ns
from pynsac.io_utils import MAGIC, read_manifest, write_csv, write_manifest

grid = ns.GridSpec(8, 8)
params = ns.ModelParams()


def member(index):
    return ns.random_state(grid, ns.ensemble_rng(2, index), params, modes=3, level=0.7)


class TestSnapshot(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "state.pfa"

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_bit_exact(self):
        state = member(0)
        ns.write_snapshot(self.path, state, params, 12, 0.12, 0.01)
        back, header = ns.read_snapshot(self.path)
        for a, b in (
            (state.u.ux, back.u.ux),
            (state.u.uy, back.u.uy),
            (state.phi, back.phi),
        ):
            self.assertTrue(array_equal(a.coeffs, b.coeffs))
        self.assertEqual(header.step, 12)
        self.assertEqual(header.t, 0.12)
        self.assertEqual(header.k, 0.01)
        self.assertEqual((header.nx, header.ny), (8, 8))
        self.assertEqual(header.alpha, params.alpha)
        self.assertEqual(back.grid, ns.GridSpec(8, 8))

    def test_layout(self):
        X, _ = grid.nodes()
        state = ns.State(ns.SolenoidalVector.zeros(grid), ns.from_grid(cos(X), grid))
        ns.write_snapshot(self.path, state, params, 0, 0.0, 0.01)
        raw = self.path.read_bytes()
        self.assertEqual(raw[:4], MAGIC)
        header_size = 4 + 2 * 4 + 8 * 8
        self.assertEqual(len(raw), header_size + 3 * 64 * 16)
        self.assertEqual(list(frombuffer(raw, "<u4", 2, 4)), [8, 8])
        phi = frombuffer(raw, "<c16", 64, header_size + 2 * 64 * 16).reshape(8, 8)
        # rows run over kappa_2 = -3..4, columns over kappa_1 = -3..4
        testing.assert_allclose(phi[3, 4], 0.5, atol=1e-15)
        testing.assert_allclose(phi[3, 2], 0.5, atol=1e-15)
        self.assertEqual(abs(phi).sum().round(12), 1.0)

    def test_bad_magic(self):
        self.path.write_bytes(b"XXXX" + bytes(100))
        with self.assertRaises(ValueError):
            ns.read_snapshot(self.path)

    def test_truncated(self):
        ns.write_snapshot(self.path, member(1), params, 0, 0.0, 0.01)
        self.path.write_bytes(self.path.read_bytes()[:-16])
        with self.assertRaises(ValueError):
            ns.read_snapshot(self.path)

    def test_grid_mismatch(self):
        ns.write_snapshot(self.path, member(1), params, 0, 0.0, 0.01)
        with self.assertRaises(ValueError):
            ns.read_snapshot(self.path, ns.GridSpec(16, 16))


class TestFiles(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_manifest(self):
        content = {"k": 0.01, "files": ["a", "b"], "nested": {"x": None}}
        write_manifest(self.dir / "m.yaml", content)
        self.assertEqual(read_manifest(self.dir / "m.yaml"), content)
        (self.dir / "bad.yaml").write_text("- 1\n- 2\n")
        with self.assertRaises(ValueError):
            read_manifest(self.dir / "bad.yaml")

    def test_csv_floats_exact(self):
        frame = DataFrame({"n": [0, 1], "x": [0.1 + 0.2, 1 / 3]})
        write_csv(frame, self.dir / "f.csv")
        back = read_csv(self.dir / "f.csv", float_precision="round_trip")
        self.assertTrue(array_equal(back["x"].values, frame["x"].values))
        self.assertNotIn(b"\r", (self.dir / "f.csv").read_bytes())

    def test_cloud(self):
        cloud = ns.StateCloud([member(0), member(1)], {"k": 0.05, "seed": 2})
        ns.write_cloud(self.dir / "cloud", cloud, params)
        self.assertTrue((self.dir / "cloud" / "state_0001.pfa").exists())
        back = ns.read_cloud(self.dir / "cloud")
        self.assertEqual(len(back), 2)
        self.assertEqual(back.meta, {"k": 0.05, "seed": 2})
        self.assertTrue(array_equal(back.states[1].phi.coeffs, member(1).phi.coeffs))
        self.assertEqual(ns.hausdorff_semidistance(back, cloud, params), 0.0)
