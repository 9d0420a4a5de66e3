import math
import unittest

import numpy as np

from freejacobi.exceptions import DomainError, NoSolution
from freejacobi.fubm import (
    FULL_CIRCLE_TIME,
    biane_h,
    boundary_residual,
    edge_root,
    fubm_density,
    fubm_herglotz,
    fubm_kappa,
    fubm_moment,
    support_edge,
)
from freejacobi.measures import circle_grid, circle_moment


class FubmMomentTest(unittest.TestCase):
    """Test cases for the closed-form moments."""

    def test_first_moments(self):
        """Test the first two moments against their closed forms."""
        for t in (0.0, 0.5, 1.0, 3.0):
            self.assertAlmostEqual(fubm_moment(t, 1), math.exp(-t / 2), places=14)
            self.assertAlmostEqual(fubm_moment(t, 2), math.exp(-t) * (1 - t), places=14)

    def test_time_zero(self):
        """Test all moments equal one at time zero."""
        for k in range(0, 12):
            self.assertAlmostEqual(fubm_moment(0.0, k), 1.0, places=12)

    def test_bounded(self):
        """Test moments stay in [-1, 1]."""
        for k in range(1, 30):
            self.assertLessEqual(abs(fubm_moment(2.0, k)), 1.0)

    def test_bad_arguments(self):
        """Test negative times and large orders are rejected."""
        with self.assertRaises(DomainError):
            fubm_moment(-0.1, 1)
        with self.assertRaises(DomainError):
            fubm_moment(1.0, 65)


class SupportEdgeTest(unittest.TestCase):
    """Test cases for the support arc."""

    def test_known_edge(self):
        """Test g(1) against its decimal value."""
        self.assertAlmostEqual(support_edge(1.0), 1.9132230, places=7)

    def test_full_circle(self):
        """Test the support is the whole circle from t = 4 on."""
        self.assertEqual(support_edge(FULL_CIRCLE_TIME), math.pi)
        self.assertEqual(support_edge(9.0), math.pi)
        self.assertEqual(support_edge(0.0), 0.0)

    def test_edge_root_solves_equation(self):
        """Test the double root satisfies the boundary equation at the edge."""
        self.assertLess(boundary_residual(1.0, support_edge(1.0), edge_root(1.0)), 1e-12)


class BianeTest(unittest.TestCase):
    """Test cases for the boundary values h_t."""

    def test_root_properties(self):
        """Test roots have positive real part and small residual."""
        for theta in (0.0, 0.7, -1.5):
            z = biane_h(1.0, theta)
            self.assertGreater(z.real, 0.0)
            self.assertLess(boundary_residual(1.0, theta, z), 1e-12)

    def test_conjugate_symmetry(self):
        """Test h at -theta is the conjugate of h at theta."""
        self.assertAlmostEqual(biane_h(2.0, -1.0), biane_h(2.0, 1.0).conjugate(), places=12)

    def test_outside_arc(self):
        """Test angles off the support arc have no root."""
        with self.assertRaises(NoSolution):
            biane_h(1.0, 2.5)

    def test_time_must_be_positive(self):
        """Test t = 0 is rejected."""
        with self.assertRaises(DomainError):
            biane_h(0.0, 0.1)


class FubmDensityTest(unittest.TestCase):
    """Test cases for the density of the free unitary Brownian motion."""

    def test_pointwise_values(self):
        """Test the density is symmetric and vanishes off the arc."""
        values = fubm_kappa(1.0, [-0.5, 0.5, 3.0])
        self.assertAlmostEqual(values[0], values[1], places=12)
        self.assertGreater(values[0], 0.0)
        self.assertEqual(values[2], 0.0)

    def test_density_matches_root(self):
        """Test the density is the real part of the boundary root."""
        self.assertAlmostEqual(fubm_kappa(2.0, [0.8])[0], biane_h(2.0, 0.8).real, places=10)

    def test_density_moments(self):
        """Test the sampled density reproduces the closed-form moments."""
        for t in (1.0, 6.0):
            measure = fubm_density(t)
            for k in (1, 2, 3):
                self.assertAlmostEqual(circle_moment(measure, k).real, fubm_moment(t, k), places=5)

    def test_bad_time(self):
        """Test t = 0 has no density."""
        with self.assertRaises(DomainError):
            fubm_kappa(0.0, [0.1])
        with self.assertRaises(DomainError):
            fubm_density(-1.0)


class LargeTimeTest(unittest.TestCase):
    """Test cases for the free unitary Brownian motion at large times."""

    def test_root_near_one(self):
        """Test h_50 at a right angle stays within 1e-2 of one."""
        z = biane_h(50.0, math.pi / 2)
        self.assertLess(abs(z.real - 1.0), 1e-2)
        self.assertGreater(z.real, 0.0)

    def test_roots_solve_equation(self):
        """Test the roots solve the boundary equation for times where h − 1 is tiny."""
        for t in (20.0, 30.0, 50.0):
            z = biane_h(t, math.pi / 2)
            self.assertLess(boundary_residual(t, math.pi / 2, z), 1e-4)

    def test_density_flattens(self):
        """Test the density is uniformly within 0.01 of one at t = 50."""
        grid = circle_grid(256)
        self.assertLess(np.max(np.abs(fubm_kappa(50.0, grid) - 1.0)), 0.01)

    def test_density_moments(self):
        """Test the first moment at t = 50 is e^{-25} up to quadrature error."""
        measure = fubm_density(50.0, n=512)
        self.assertAlmostEqual(measure.mass(), 1.0, places=8)
        self.assertLess(abs(circle_moment(measure, 1)), 1e-8)


class FubmHerglotzTest(unittest.TestCase):
    """Test cases for the Herglotz transform of the free unitary Brownian motion."""

    def test_matches_moment_series(self):
        """Test H = 1 + 2 sum m_k z^k inside the disc."""
        z = np.array([0.1, 0.2j, -0.15 + 0.1j])
        series = 1 + 2 * sum(fubm_moment(1.0, k) * z ** k for k in range(1, 40))
        np.testing.assert_allclose(fubm_herglotz(1.0)(z), series, atol=1e-10)

    def test_time_zero(self):
        """Test H_0 is the transform of the point mass at 1."""
        self.assertAlmostEqual(fubm_herglotz(0.0)(0.5), 3.0)

    def test_origin(self):
        """Test H(0) = 1."""
        self.assertAlmostEqual(fubm_herglotz(2.0)(0.0), 1.0)


if __name__ == '__main__':
    unittest.main()
