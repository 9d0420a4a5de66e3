import json
import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from freejacobi.exceptions import DomainError
from freejacobi.measures import (
    TWO_PI,
    Atom,
    CircleMeasure,
    HerglotzEvaluator,
    IntervalMeasure,
    atomic,
    circle_grid,
    circle_moment,
    density_from_boundary,
    dirac,
    estimate_atom,
    herglotz_eval,
    herglotz_from_psi,
    merge_nodes,
    periodic_weights,
    psi_from_herglotz,
    push_forward_power,
    read_circle_measure,
    uniform,
    wrap_angle,
    write_circle_measure,
    write_interval_measure,
)


class AngleHelpersTest(unittest.TestCase):
    """Test cases for angle wrapping and grids."""

    def test_wrap_angle_range(self):
        """Test angles are mapped into (-pi, pi]."""
        self.assertAlmostEqual(wrap_angle(3 * math.pi), math.pi)
        self.assertAlmostEqual(wrap_angle(-math.pi), math.pi)
        self.assertAlmostEqual(wrap_angle(0.5 + TWO_PI), 0.5)

    def test_uniform_grid(self):
        """Test the base grid is uniform and ends at pi."""
        grid = circle_grid(8)
        self.assertEqual(grid.size, 8)
        self.assertAlmostEqual(grid[-1], math.pi)
        np.testing.assert_allclose(np.diff(grid), TWO_PI / 8)

    def test_grid_contains_edges(self):
        """Test refined grids contain each edge and stay sorted."""
        grid = circle_grid(16, edges=(0.3, -2.0), refine=2)
        self.assertTrue(np.any(np.isclose(grid, 0.3, atol=1e-15)))
        self.assertTrue(np.any(np.isclose(grid, -2.0, atol=1e-15)))
        self.assertTrue(np.all(np.diff(grid) > 0))

    def test_small_grid_rejected(self):
        """Test grids need at least four nodes."""
        with self.assertRaises(DomainError):
            circle_grid(2)

    def test_merge_nodes_across_pi(self):
        """Test duplicates on both sides of the cut are merged."""
        nodes = merge_nodes(np.array([math.pi, -math.pi, 0.0, 0.0]))
        self.assertEqual(nodes.size, 2)

    def test_periodic_weights_sum(self):
        """Test trapezoid weights cover the whole circle."""
        theta = np.sort(wrap_angle(np.random.default_rng(1).uniform(-4, 4, 50)))
        self.assertAlmostEqual(periodic_weights(theta).sum(), TWO_PI)


class CircleMeasureTest(unittest.TestCase):
    """Test cases for CircleMeasure."""

    def setUp(self):
        """Set up test data."""
        self.mixed = atomic([(math.pi, 0.3), (0.0, 0.7)])
        self.flat = uniform(4096)

    def test_dirac(self):
        """Test a point mass has mass one and no density."""
        measure = dirac(1.0)
        self.assertEqual(measure.mass(), 1.0)
        self.assertEqual(measure.atom_at(1.0), 1.0)
        self.assertEqual(measure.density_mass(), 0.0)

    def test_atomic_drops_zero_masses(self):
        """Test zero atoms are not stored."""
        measure = atomic([(0.0, 1.0), (1.0, 0.0)])
        self.assertEqual(len(measure.atoms), 1)

    def test_mass_defect_rejected(self):
        """Test measures must carry their expected mass."""
        with self.assertRaises(ValidationError):
            CircleMeasure(atoms=(Atom(angle=0.0, mass=0.5),))

    def test_duplicate_atoms_rejected(self):
        """Test two atoms cannot share an angle."""
        with self.assertRaises(ValidationError):
            CircleMeasure(atoms=((0.0, 0.5), (TWO_PI, 0.5)))

    def test_negative_density_rejected(self):
        """Test density values must be nonnegative."""
        with self.assertRaises(ValidationError):
            CircleMeasure(theta=[-1.0, 1.0], kappa=[-1.0, 3.0], total_mass=1.0)

    def test_arrays_are_frozen(self):
        """Test density arrays cannot be modified in place."""
        with self.assertRaises(ValueError):
            self.flat.kappa[0] = 2.0

    def test_uniform_moments_vanish(self):
        """Test the uniform law has zero moments."""
        for k in range(1, 6):
            self.assertAlmostEqual(abs(circle_moment(self.flat, k)), 0.0, places=12)
        self.assertAlmostEqual(circle_moment(self.flat, 0).real, 1.0)

    def test_atomic_moments(self):
        """Test moments of atoms at 0 and pi."""
        self.assertAlmostEqual(circle_moment(self.mixed, 1).real, 0.4)
        self.assertAlmostEqual(circle_moment(self.mixed, 2).real, 1.0)

    def test_reflection_defect(self):
        """Test symmetric densities have no reflection defect."""
        self.assertAlmostEqual(self.flat.reflection_defect(), 0.0)

    def test_write_and_read(self):
        """Test the CSV and JSON sidecar restore the measure."""
        with tempfile.TemporaryDirectory() as tmp:
            csv_path, json_path = Path(tmp) / 'nu.csv', Path(tmp) / 'nu.json'
            measure = CircleMeasure(atoms=((math.pi, 0.5),), theta=self.flat.theta, kappa=self.flat.kappa / 2,
                                    total_mass=1.0)
            write_circle_measure(measure, csv_path, json_path, {'t': 1.0})
            restored = read_circle_measure(csv_path, json_path)
            np.testing.assert_array_equal(restored.theta, measure.theta)
            self.assertEqual(restored.atom_at(math.pi), 0.5)
            with open(json_path) as handle:
                self.assertEqual(json.load(handle)['t'], 1.0)


class HerglotzTest(unittest.TestCase):
    """Test cases for Herglotz transforms and atom recovery."""

    def setUp(self):
        """Set up test data."""
        self.z = np.array([0.3 + 0.2j, -0.5j, 0.1])

    def test_dirac_transform(self):
        """Test the transform of a point mass at 1."""
        np.testing.assert_allclose(herglotz_eval(dirac(0.0), self.z), (1 + self.z) / (1 - self.z))

    def test_uniform_transform(self):
        """Test the uniform law has transform one."""
        np.testing.assert_allclose(herglotz_eval(uniform(4096), self.z), np.ones(3), atol=1e-12)

    def test_scalar_input(self):
        """Test scalar arguments give scalar results."""
        self.assertIsInstance(herglotz_eval(dirac(0.0), 0.5), complex)

    def test_outside_disc_rejected(self):
        """Test evaluation on the circle raises DomainError."""
        with self.assertRaises(DomainError):
            herglotz_eval(dirac(0.0), 1.0)
        with self.assertRaises(DomainError):
            HerglotzEvaluator.of_measure(dirac(0.0))(np.array([0.5, 1.5j]))

    def test_positive_real_part(self):
        """Test Herglotz transforms of measures have positive real part."""
        self.assertGreater(HerglotzEvaluator.of_measure(atomic([(0.0, 0.5), (2.0, 0.5)])).min_real_part(16), 0.0)

    def test_boundary_density(self):
        """Test Re H on the circle is the density, clamped at zero."""
        theta = circle_grid(64)
        np.testing.assert_allclose(density_from_boundary(lambda z: 1 + z, theta), 1 + np.cos(theta), atol=1e-6)
        clamped = density_from_boundary(lambda z: 1 + 2 * z, theta)
        self.assertEqual(float(clamped.min()), 0.0)
        self.assertAlmostEqual(float(clamped[np.argmin(np.abs(theta))]), 3.0, places=5)

    def test_atom_estimate(self):
        """Test radial limits recover atoms."""
        H = lambda z: 0.3 * (-1 + z) / (-1 - z) + 0.7 * (1 + z) / (1 - z)
        estimate = estimate_atom(H, math.pi)
        self.assertAlmostEqual(estimate.mass, 0.3, places=6)
        self.assertFalse(estimate.flagged)
        self.assertAlmostEqual(estimate_atom(H, 0.0).mass, 0.7, places=6)
        self.assertAlmostEqual(estimate_atom(H, 1.0).mass, 0.0, places=6)

    def test_moment_generating_function(self):
        """Test psi = (H − 1)/2 is the moment generating function."""
        self.assertEqual(psi_from_herglotz(1.0), 0.0)
        H = herglotz_eval(dirac(0.0), self.z)
        np.testing.assert_allclose(psi_from_herglotz(H), self.z / (1 - self.z))
        np.testing.assert_allclose(herglotz_from_psi(psi_from_herglotz(H)), H)
        measure = atomic([(0.5, 0.25), (-0.5, 0.25), (2.0, 0.25), (-2.0, 0.25)])
        z = 0.1
        series = sum(circle_moment(measure, k) * z ** k for k in range(1, 40))
        self.assertAlmostEqual(psi_from_herglotz(herglotz_eval(measure, z)), series, places=12)


class PushForwardTest(unittest.TestCase):
    """Test cases for push_forward_power."""

    def test_atoms_move(self):
        """Test atoms move to their p-th powers and merge."""
        pushed = push_forward_power(atomic([(math.pi / 2, 0.5), (-math.pi / 2, 0.5)]), 2)
        self.assertEqual(len(pushed.atoms), 1)
        self.assertAlmostEqual(pushed.atom_at(math.pi), 1.0)

    def test_uniform_stays_uniform(self):
        """Test the uniform law is invariant."""
        pushed = push_forward_power(uniform(64), 2)
        self.assertEqual(pushed.theta.size, 32)
        np.testing.assert_allclose(pushed.kappa, 1.0)

    def test_power_must_be_positive(self):
        """Test nonpositive powers are rejected."""
        with self.assertRaises(DomainError):
            push_forward_power(uniform(8), 0)


class IntervalMeasureTest(unittest.TestCase):
    """Test cases for IntervalMeasure."""

    def setUp(self):
        """Set up the arcsine law on symmetric nodes."""
        n = 200
        u = math.pi * np.arange(1, n + 1) / (n + 1)
        self.arcsine = IntervalMeasure(mass_at_zero=0.0, mass_at_one=0.0, x=(1 - np.cos(u)) / 2,
                                       density=2 / (math.pi * np.sin(u)))

    def test_mass_and_mean(self):
        """Test the arcsine law has mass one and mean one half."""
        self.assertAlmostEqual(self.arcsine.mass(), 1.0, places=12)
        self.assertAlmostEqual(self.arcsine.moment(1), 0.5, places=12)

    def test_cdf(self):
        """Test the distribution function runs from 0 to 1."""
        values = self.arcsine.cdf([-0.1, 1.0])
        self.assertEqual(values[0], 0.0)
        self.assertAlmostEqual(values[1], 1.0, places=12)

    def test_atoms_only(self):
        """Test a purely atomic interval measure."""
        mu = IntervalMeasure(mass_at_zero=0.4, mass_at_one=0.6)
        self.assertAlmostEqual(mu.moment(3), 0.6)
        self.assertAlmostEqual(mu.moment(0), 1.0)

    def test_bad_mass_rejected(self):
        """Test interval measures must have mass one."""
        with self.assertRaises(ValidationError):
            IntervalMeasure(mass_at_zero=0.4, mass_at_one=0.4)

    def test_writer(self):
        """Test the atoms JSON is keyed by position."""
        with tempfile.TemporaryDirectory() as tmp:
            csv_path, json_path = Path(tmp) / 'mu.csv', Path(tmp) / 'mu.json'
            write_interval_measure(IntervalMeasure(mass_at_zero=0.4, mass_at_one=0.6), csv_path, json_path)
            with open(json_path) as handle:
                self.assertEqual(json.load(handle)['atoms'], {'0': 0.4, '1': 0.6})
            self.assertEqual(csv_path.read_text().splitlines(), ['x,density'])


if __name__ == '__main__':
    unittest.main()
