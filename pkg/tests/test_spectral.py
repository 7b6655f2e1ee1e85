import pickle
import unittest

from numpy import (
    array_equal,
    cos,
    exp,
    meshgrid,
    multiply,
    outer,
    pi,
    roll,
    sin,
    testing,
    zeros,
)
from numpy.polynomial.legendre import leggauss
from numpy.random import default_rng
from xarray import DataArray

import pynsac as ns
from pynsac.spectral import AREA

grid = ns.GridSpec(8, 8)
params = ns.ModelParams()
X, Y = grid.nodes()


def cos_x():
    return ns.from_grid(cos(X), grid)


def to_values(f):
    return ns.to_grid(f).values


def evaluate(f, x, y):
    """Values of f at arbitrary points by direct summation of its modes."""
    g = f.grid
    phase = exp(1j * (multiply.outer(x, g.kx) + multiply.outer(y, g.ky)))
    return (phase * f.coeffs).sum(axis=(-2, -1)).real


def spectrum(f):
    g = f.grid
    return {
        (int(g.ky[i, j]), int(g.kx[i, j])): f.coeffs[i, j]
        for i, j in zip(*f.coeffs.nonzero())
    }


def convolve(a, b):
    out = {}
    for (p, q), x in a.items():
        for (r, s), y in b.items():
            out[(p + r, q + s)] = out.get((p + r, q + s), 0.0) + x * y
    return out


class TestGridSpec(unittest.TestCase):
    def test_defaults(self):
        g = ns.GridSpec()
        self.assertEqual(g.shape, (32, 32))
        self.assertEqual(g.padded_shape, (64, 64))

    def test_invalid(self):
        for kwargs in ({"nx": 7}, {"nx": 2}, {"ny": 9}, {"pad_factor": 1.0}):
            with self.assertRaises(ValueError):
                ns.GridSpec(**kwargs)

    def test_arity(self):
        with self.assertRaisesRegex(ValueError, "exact products of 3 fields"):
            ns.GridSpec(8, 8, pad_factor=1.5)
        ns.GridSpec(8, 8, pad_factor=2.5).check_arity(4)
        with self.assertRaises(ValueError):
            ns.GridSpec(8, 8).check_arity(4)
        with self.assertRaisesRegex(ValueError, "even integer"):
            ns.GridSpec(10, 10, pad_factor=2.5)

    def test_exact_shape(self):
        self.assertEqual(grid.exact_shape(3), (16, 16))
        self.assertEqual(grid.exact_shape(4, truncate=False), (16, 16))
        self.assertEqual(grid.exact_shape(5), (24, 24))


class TestSpectralScalar(unittest.TestCase):
    def test_hermitian_and_nyquist(self):
        rng = default_rng(1)
        raw = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        f = ns.SpectralScalar(raw, grid)
        self.assertTrue(f.is_hermitian())
        # kx_1d[4] == -4 is the Nyquist column
        self.assertTrue((f.coeffs[:, 4] == 0).all())
        self.assertTrue((f.coeffs[4, :] == 0).all())

    def test_immutable(self):
        f = cos_x()
        with self.assertRaises(AttributeError):
            f.coeffs = None
        with self.assertRaises(ValueError):
            f.coeffs[0, 0] = 1.0

    def test_cos_coefficients(self):
        f = cos_x()
        testing.assert_allclose(f.coeffs[0, 1], 0.5, atol=1e-15)
        testing.assert_allclose(f.coeffs[0, -1], 0.5, atol=1e-15)
        self.assertAlmostEqual(ns.norm_L2(f) ** 2, 2 * pi**2, 12)
        self.assertAlmostEqual(f.mean(), 0.0, 15)

    def test_constant(self):
        f = ns.SpectralScalar.constant(2.0, grid)
        testing.assert_allclose(ns.to_grid(f).values, 2.0)

    def test_grid_round_trip(self):
        values = ns.to_grid(cos_x())
        self.assertIsInstance(values, DataArray)
        self.assertEqual(values.dims, ("y", "x"))
        testing.assert_allclose(values.values, cos(X), atol=1e-14)
        back = ns.from_grid(values, grid)
        testing.assert_allclose(back.coeffs, cos_x().coeffs, atol=1e-15)

    def test_grid_mismatch(self):
        with self.assertRaises(ValueError):
            cos_x() + ns.SpectralScalar.zeros(ns.GridSpec(16, 16))

    def test_pickle(self):
        f = cos_x()
        g = pickle.loads(pickle.dumps(f))
        self.assertTrue(array_equal(f.coeffs, g.coeffs))
        self.assertEqual(f.grid, g.grid)


class TestSolenoidal(unittest.TestCase):
    def test_taylor_green(self):
        tg = ns.taylor_green(grid, 2.0)
        self.assertLess(ns.divergence_defect(tg), 1e-14)
        self.assertAlmostEqual(ns.norm_L2(tg) ** 2, 2 * pi**2 * 4.0, 10)
        testing.assert_allclose(ns.apply_A(tg).ux.coeffs, 2 * tg.ux.coeffs)

    def test_rejects_divergent(self):
        with self.assertRaises(ValueError):
            ns.SolenoidalVector(cos_x(), ns.SpectralScalar.zeros(grid))

    def test_rejects_mean(self):
        one = ns.SpectralScalar.constant(1.0, grid)
        with self.assertRaises(ValueError):
            ns.SolenoidalVector(one, ns.SpectralScalar.zeros(grid))

    def test_leray_of_gradient_vanishes(self):
        phi = ns.random_scalar(grid, default_rng(3))
        projected = ns.leray_project(*ns.gradient(phi))
        self.assertLess(ns.norm_L2(projected), 1e-13 * ns.norm_H1(phi))

    def test_leray_idempotent(self):
        u = ns.random_solenoidal(grid, default_rng(4))
        again = ns.leray_project(u.ux, u.uy)
        testing.assert_allclose(again.ux.coeffs, u.ux.coeffs, atol=1e-15)
        testing.assert_allclose(again.uy.coeffs, u.uy.coeffs, atol=1e-15)

    def test_random_is_solenoidal(self):
        u = ns.random_solenoidal(grid, default_rng(5), modes=3)
        self.assertTrue(u.is_hermitian())
        self.assertLess(ns.divergence_defect(u), 1e-12)

    def test_arithmetic_keeps_solenoidal(self):
        fine = ns.GridSpec(32, 32)
        rng = default_rng(9)
        big = ns.random_solenoidal(fine, rng, modes=12, amplitude=1e4)
        small = ns.random_solenoidal(fine, rng, modes=12, amplitude=1e-4)
        diff = (big + small) - big
        self.assertIsInstance(diff, ns.SolenoidalVector)
        self.assertLess(ns.norm_L2(diff - small), 1e-6 * ns.norm_L2(small))
        self.assertLess(ns.divergence_defect(diff), 1e-12 * ns.norm_H1(big))
        tiny = ns.leray_project(*ns.gradient(ns.random_scalar(fine, rng, 12)))
        self.assertLess(ns.norm_L2(tiny), 1e-10)


class TestOperators(unittest.TestCase):
    def test_A_gamma(self):
        f = ns.apply_A_gamma(cos_x(), 1.0)
        testing.assert_allclose(f.coeffs, 2.0 * cos_x().coeffs)
        with self.assertRaises(ValueError):
            ns.apply_A_gamma(cos_x(), 0.0)

    def test_A_gamma_finite_differences(self):
        fine = ns.GridSpec(32, 32)
        phi = ns.random_scalar(fine, default_rng(11), modes=4)
        shape = (256, 256)
        values = ns.to_grid(phi, shape).values
        h = 2 * pi / 256
        laplacian = sum(
            (
                -roll(values, 2, axis)
                + 16 * roll(values, 1, axis)
                - 30 * values
                + 16 * roll(values, -1, axis)
                - roll(values, -2, axis)
            )
            / (12 * h**2)
            for axis in (0, 1)
        )
        actual = ns.to_grid(ns.apply_A_gamma(phi, 1.5), shape).values
        testing.assert_allclose(
            actual, -laplacian + 1.5 * values, atol=1e-4 * abs(actual).max()
        )

    def test_A_gamma_pow(self):
        phi = ns.random_scalar(grid, default_rng(6))
        half = ns.apply_A_gamma_pow(phi, 1.0, 0.5)
        twice = ns.apply_A_gamma_pow(half, 1.0, 0.5)
        testing.assert_allclose(
            twice.coeffs, ns.apply_A_gamma(phi, 1.0).coeffs, atol=1e-13
        )
        with self.assertRaises(ValueError):
            ns.apply_A_gamma_pow(phi, 1.0, 0.25)

    def test_A_pow_inverse(self):
        u = ns.taylor_green(grid)
        back = ns.apply_A_pow(ns.apply_A(u), -1)
        testing.assert_allclose(back.ux.coeffs, u.ux.coeffs, atol=1e-15)

    def test_divergence_of_gradient(self):
        lap = ns.divergence(*ns.gradient(cos_x()))
        testing.assert_allclose(lap.coeffs, -cos_x().coeffs, atol=1e-15)

    def test_random_identities(self):
        fine = ns.GridSpec(32, 32)
        rng = default_rng(12)
        for _ in range(100):
            f, g, h = (ns.random_scalar(fine, rng, modes=15) for _ in range(3))
            back = ns.from_grid(ns.to_grid(f), fine)
            testing.assert_allclose(back.coeffs, f.coeffs, atol=1e-13)
            testing.assert_allclose(
                ns.divergence(*ns.gradient(f)).coeffs,
                (f - ns.apply_A_gamma(f, 1.0)).coeffs,
                atol=1e-11,
            )
            u = ns.leray_project(g, h)
            again = ns.leray_project(u.ux, u.uy)
            testing.assert_allclose(again.ux.coeffs, u.ux.coeffs, atol=1e-13)
            gx, gy = ns.gradient(f)
            self.assertLess(
                abs(ns.inner_L2(u.ux, gx) + ns.inner_L2(u.uy, gy)),
                1e-10 * ns.norm_L2(u) * ns.norm_H1(f),
            )


class TestNorms(unittest.TestCase):
    def test_norm_Y(self):
        state = ns.State(ns.SolenoidalVector.zeros(grid), cos_x())
        self.assertAlmostEqual(ns.norm_Y(state, params) ** 2, 0.4 * pi**2, 12)

    def test_embedding(self):
        rng = default_rng(7)
        state = ns.State(ns.random_solenoidal(grid, rng), ns.random_scalar(grid, rng))
        testing.assert_allclose(
            (ns.y_embedding(state, params) ** 2).sum(),
            ns.norm_Y(state, params) ** 2,
            rtol=1e-12,
        )

    def test_norm_V(self):
        state = ns.State(ns.taylor_green(grid), cos_x())
        expected = 2 * 2 * pi**2 + 4 * 2 * pi**2
        self.assertAlmostEqual(ns.norm_V(state, params) ** 2, expected, 10)

    def test_dual_norms(self):
        u = ns.taylor_green(grid)
        self.assertAlmostEqual(ns.dual_norm_Vprime(u) ** 2, pi**2, 12)
        h = cos_x()
        self.assertAlmostEqual(
            ns.dual_norm_DAgamma_prime(h, 1.0) ** 2, 2 * pi**2 / 4, 12
        )

    def test_inner_product(self):
        rng = default_rng(8)
        a, b = ns.random_scalar(grid, rng), ns.random_scalar(grid, rng)
        testing.assert_allclose(ns.inner_L2(a, b), ns.inner_L2(b, a), rtol=1e-12)
        testing.assert_allclose(ns.inner_L2(a, a), ns.norm_L2(a) ** 2, rtol=1e-12)
        with self.assertRaises(TypeError):
            ns.inner_L2(a, ns.taylor_green(grid))

    def test_parseval_by_quadrature(self):
        coarse = ns.GridSpec(16, 16)
        rng = default_rng(13)
        nodes, weights = leggauss(48)
        x = pi * (nodes + 1)
        xx, yy = meshgrid(x, x)
        ww = outer(weights, weights) * pi**2
        for _ in range(5):
            a, b = ns.random_scalar(coarse, rng, 7), ns.random_scalar(coarse, rng, 7)
            va, vb = evaluate(a, xx, yy), evaluate(b, xx, yy)
            testing.assert_allclose(ns.norm_L2(a) ** 2, (ww * va**2).sum(), rtol=1e-10)
            testing.assert_allclose(
                ns.inner_L2(a, b),
                (ww * va * vb).sum(),
                atol=1e-10 * ns.norm_L2(a) * ns.norm_L2(b),
            )


class TestProducts(unittest.TestCase):
    def test_square(self):
        sq = ns.dealiased_product(cos_x(), cos_x())
        testing.assert_allclose(sq.mean(), 0.5, atol=1e-15)
        testing.assert_allclose(sq.coeffs[0, 2], 0.25, atol=1e-15)

    def test_cube(self):
        cube = ns.dealiased_product(cos_x(), cos_x(), cos_x())
        testing.assert_allclose(cube.coeffs[0, 1], 3 / 8, atol=1e-15)
        testing.assert_allclose(cube.coeffs[0, 3], 1 / 8, atol=1e-15)

    def test_product_matches_grid(self):
        f = ns.from_grid(sin(X) * cos(Y), grid)
        g = ns.from_grid(cos(X), grid)
        testing.assert_allclose(
            to_values(ns.dealiased_product(f, g)),
            sin(X) * cos(Y) * cos(X),
            atol=1e-14,
        )

    def test_products_match_convolution(self):
        rng = default_rng(14)
        a, b, c = (ns.random_scalar(grid, rng, modes=4) for _ in range(3))
        pairs = convolve(spectrum(a), spectrum(b))
        for product, full in (
            (ns.dealiased_product(a, b), pairs),
            (ns.dealiased_product(a, b, c), convolve(pairs, spectrum(c))),
        ):
            expected = zeros(grid.shape, dtype=complex)
            for i, j in zip(*grid.band.nonzero()):
                key = (int(grid.ky[i, j]), int(grid.kx[i, j]))
                expected[i, j] = full.get(key, 0.0)
            testing.assert_allclose(product.coeffs, expected, atol=1e-13)
            # modes outside the band are dropped, not folded back
            self.assertTrue(any(max(abs(p), abs(q)) >= 4 for p, q in full))

    def test_pointwise(self):
        f = ns.pointwise(lambda r: r**3 - r, cos_x(), 3)
        expected = ns.dealiased_product(cos_x(), cos_x(), cos_x()) - cos_x()
        testing.assert_allclose(f.coeffs, expected.coeffs, atol=1e-15)

    def test_exact_integral(self):
        value = ns.exact_integral(lambda a: a**4, [cos_x()], 4)
        self.assertAlmostEqual(value, 3 / 8 * AREA, 12)
