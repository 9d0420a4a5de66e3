import math
import unittest
from unittest.mock import patch

import numpy as np
from pydantic import ValidationError

from freejacobi import settings
from freejacobi.fubm import fubm_kappa
from freejacobi.initlaws import InitialLaw
from freejacobi.liberation import LiberationParams, density_values, stationary_measure, support_estimate
from freejacobi.measures import circle_grid
from freejacobi.verify import (
    SUITES,
    Check,
    McOptions,
    _check,
    _pushed_density,
    run_suite,
    suite_centered,
    suite_closed_forms,
    suite_jacobi,
    suite_mc,
    suite_moments,
    suite_stationary,
    suite_structure,
)


class CheckTest(unittest.TestCase):
    """Test cases for single checks."""

    def test_verdicts(self):
        """Test values within tolerance pass and NaN fails."""
        self.assertTrue(_check("small", 1e-8, 1e-6).passed)
        self.assertFalse(_check("large", 1e-3, 1e-6).passed)
        self.assertFalse(_check("nan", math.nan, 1e-6).passed)

    def test_options(self):
        """Test Monte Carlo options are validated."""
        self.assertEqual(McOptions().model_dump(), {'seed': 7, 'd': 300, 'replicas': 20})
        with self.assertRaises(ValidationError):
            McOptions(replicas=0)


class PushForwardDensityTest(unittest.TestCase):
    """Test cases for the pushed density on uniform nodes."""

    def test_uniform_is_invariant(self):
        """Test the flat density stays flat under z^p."""
        theta = circle_grid(24)
        angles, image = _pushed_density(theta, np.ones(24), 3)
        self.assertEqual(angles.size, 8)
        np.testing.assert_allclose(image, 1.0)
        self.assertTrue(np.all(np.diff(angles) > 0))

    def test_averages_preimages(self):
        """Test each image node averages its p preimages."""
        theta = circle_grid(8)
        kappa = np.arange(8, dtype=float)
        _, image = _pushed_density(theta, kappa, 2)
        self.assertAlmostEqual(image.sum(), kappa.sum() / 2)

    def test_classical_law_is_pushed_fubm(self):
        """Test the classical density at t pushed by z^2 is the fubm density at 4t."""
        p = LiberationParams(alpha=0.0, beta=0.0)
        theta = circle_grid(256)
        for t in (0.2, 0.5):
            angles, pushed = _pushed_density(theta, density_values(t, InitialLaw.classical(), p, theta), 2)
            np.testing.assert_allclose(pushed, fubm_kappa(4 * t, angles), atol=1e-4)

    def test_boolean_law_is_pushed_fubm(self):
        """Test the boolean density at t pushed by z^3 is the fubm density at 6t."""
        p = LiberationParams(alpha=0.0, beta=0.0)
        theta = circle_grid(384)
        angles, pushed = _pushed_density(theta, density_values(0.2, InitialLaw.boolean(), p, theta), 3)
        np.testing.assert_allclose(pushed, fubm_kappa(1.2, angles), atol=1e-4)


class RunSuiteTest(unittest.TestCase):
    """Test cases for run_suite."""

    def setUp(self):
        """Set up two fake suites."""
        self.fake = {
            'one': lambda options, tables: [Check(name='a', measured=0.0, tolerance=1.0, passed=True)],
            'two': lambda options, tables: [Check(name='b', measured=2.0, tolerance=1.0, passed=False)],
        }

    def test_unknown_suite(self):
        """Test unknown names raise KeyError."""
        with self.assertRaises(KeyError):
            run_suite('nope')

    def test_all(self):
        """Test 'all' runs every suite in order and fails if one check fails."""
        with patch.dict(SUITES, self.fake, clear=True):
            report = run_suite('all', McOptions(seed=3))
        self.assertEqual([c['suite'] for c in report['checks']], ['one', 'two'])
        self.assertFalse(report['passed'])
        self.assertEqual(report['parameters']['seed'], 3)

    def test_single(self):
        """Test a single suite report."""
        with patch.dict(SUITES, self.fake, clear=True):
            report = run_suite('one')
        self.assertTrue(report['passed'])
        self.assertEqual(report['suite'], 'one')

    def test_suite_names(self):
        """Test the acceptance suites are registered."""
        self.assertEqual(set(SUITES), {'closed-forms', 'fubm', 'centered', 'moments', 'structure', 'jacobi',
                                       'stationary', 'mc'})


class AcceptanceSuiteTest(unittest.TestCase):
    """Test cases for suites that run quickly."""

    def test_fubm_suite(self):
        """Test the sampled densities reproduce the closed-form moments."""
        report = run_suite('fubm')
        self.assertTrue(report['passed'], report['checks'])

    def test_jacobi_suite_on_stationary_laws(self):
        """Test the Szego map and the Herglotz relationship on stationary laws."""
        with patch('freejacobi.verify.nu_t', side_effect=lambda t, law, p, **kwargs: stationary_measure(p)):
            checks = suite_jacobi(McOptions(), {})
        self.assertEqual(len(checks), 13)
        self.assertTrue(all(c.passed for c in checks), [c for c in checks if not c.passed])


class ReducedGridSuiteTest(unittest.TestCase):
    """Test cases for the heavier suites on coarse grids."""

    def setUp(self):
        """Set up coarse grids and a relaxed mass check."""
        for name, value in (('GRID_SIZE', 256), ('EDGE_REFINEMENT', 16), ('MASS_TOLERANCE', 1e-3)):
            patcher = patch.object(settings, name, value)
            patcher.start()
            self.addCleanup(patcher.stop)

    def assertAllPassed(self, checks):
        self.assertTrue(all(c.passed for c in checks), [c for c in checks if not c.passed])

    def test_centered_suite(self):
        """Test the centered point mass follows the fubm density at twice the time."""
        checks = suite_centered(McOptions(), {})
        self.assertEqual(len(checks), 3)
        self.assertAllPassed(checks)

    def test_closed_forms_suite(self):
        """Test the push-forward identities, the support widths and the free laws."""
        def coarse_support(t, law, p):
            return support_estimate(t, law, p, n=256)

        with patch('freejacobi.verify.PUSH_FORWARD_NODES', 64), \
                patch('freejacobi.verify.support_estimate', side_effect=coarse_support):
            checks = suite_closed_forms(McOptions(), {})
        self.assertEqual(len(checks), 18)
        self.assertAllPassed(checks)

    def test_moments_suite(self):
        """Test the moment crosschecks stay small on a coarse grid."""
        checks = suite_moments(McOptions(), {})
        self.assertEqual(len(checks), 6)
        self.assertLess(max(c.measured for c in checks), 5e-3)

    def test_structure_suite(self):
        """Test the atoms of the classical law keep their masses."""
        checks = suite_structure(McOptions(), {})
        self.assertEqual(len(checks), 8)
        self.assertAllPassed([c for c in checks if c.name.startswith('atom')])
        self.assertTrue(all(math.isfinite(c.measured) for c in checks))

    def test_stationary_suite(self):
        """Test a classical law at t = 8 is close to its stationary law."""
        checks = suite_stationary(McOptions(), {})
        self.assertEqual(len(checks), 2)
        self.assertAllPassed(checks)


class MonteCarloSuiteTest(unittest.TestCase):
    """Test cases for the Monte Carlo suite on small matrices."""

    def setUp(self):
        """Set up small options and a coarse density grid."""
        self.options = McOptions(seed=3, d=100, replicas=2)
        for name, value in (('EDGE_REFINEMENT', 16), ('MASS_TOLERANCE', 1e-3)):
            patcher = patch.object(settings, name, value)
            patcher.start()
            self.addCleanup(patcher.stop)

    def test_histogram_tables(self):
        """Test the suite leaves the nu and jacobi histograms behind."""
        tables = {}
        with patch('freejacobi.verify.MC_GRID', 256):
            checks = suite_mc(self.options, tables)
        self.assertEqual(len(checks), 6)
        self.assertEqual(set(tables), {'nu_histogram', 'jacobi_histogram'})
        self.assertEqual(len(tables['nu_histogram']), 32)
        self.assertEqual(len(tables['jacobi_histogram']), 32)
        self.assertTrue(all(len(row) == 3 for row in tables['nu_histogram']))
        computed = [c for c in checks if 'against nu_t' in c.name]
        self.assertEqual(len(computed), 1)
        self.assertTrue(math.isfinite(computed[0].measured))

    def test_wrong_density_is_caught(self):
        """Test a uniform nu_t fails the comparison with the matrix moments."""
        uniform = stationary_measure(LiberationParams(alpha=0.0, beta=0.0))
        with patch('freejacobi.verify.nu_t', return_value=uniform) as nu:
            checks = suite_mc(self.options, {})
        nu.assert_called_once()
        computed = next(c for c in checks if 'against nu_t' in c.name)
        self.assertFalse(computed.passed)


if __name__ == '__main__':
    unittest.main()
