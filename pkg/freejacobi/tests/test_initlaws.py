import unittest

import numpy as np
from pydantic import ValidationError

from freejacobi.exceptions import DomainError, PoleError
from freejacobi.fubm import fubm_moment
from freejacobi.initlaws import (
    H0_derivative,
    H0_eval,
    InitialLaw,
    LawTag,
    TransformSeries,
    boolean_convolve_F,
    chi_from_f,
    chi_from_psi,
    f_from_chi,
    initial_moments,
    monotone_convolve_chi,
    psi_from_chi,
    psi_series,
    sigma_lambda,
    sigma_lambda_series,
    sigma_series,
    track_sqrt,
)
from freejacobi.measures import atomic, dirac


class InitialLawTest(unittest.TestCase):
    """Test cases for InitialLaw."""

    def test_traces_give_atom_masses(self):
        """Test a and b come from the traces."""
        law = InitialLaw.classical(0.6, 0.2)
        self.assertAlmostEqual(law.a, 0.2)
        self.assertAlmostEqual(law.b, 0.4)

    def test_structured_laws_need_zero_traces(self):
        """Test boolean and centered laws reject nonzero traces."""
        with self.assertRaises(ValidationError):
            InitialLaw(tag=LawTag.BOOLEAN, alpha=0.2)
        with self.assertRaises(ValidationError):
            InitialLaw(tag=LawTag.CENTERED)

    def test_centered_needs_real_moments(self):
        """Test a centered law must be symmetric."""
        with self.assertRaises(ValidationError):
            InitialLaw.centered(dirac(1.0))
        InitialLaw.centered(atomic([(1.0, 0.5), (-1.0, 0.5)]))

    def test_moment_list_bounds(self):
        """Test moment-only laws validate their list."""
        with self.assertRaises(ValidationError):
            InitialLaw.from_moments([1.5])
        with self.assertRaises(ValidationError):
            InitialLaw.from_moments([])
        self.assertFalse(InitialLaw.from_moments([0.1]).has_herglotz)

    def test_from_config(self):
        """Test JSON configurations build laws."""
        law = InitialLaw.from_config({'tag': 'classical'}, alpha=0.3, beta=-0.1)
        self.assertEqual((law.alpha, law.beta), (0.3, -0.1))
        centered = InitialLaw.from_config({'tag': 'centered', 'atoms': [{'angle': 0.0, 'mass': 1.0}]}, alpha=0.5)
        self.assertEqual(centered.nu0.atom_at(0.0), 1.0)
        self.assertEqual(centered.alpha, 0.0)
        with self.assertRaises(ValueError):
            InitialLaw.from_config({'tag': 'unknown'})

    def test_to_config(self):
        """Test the configuration form restores the law."""
        law = InitialLaw.free(0.3, -0.5)
        self.assertEqual(InitialLaw.from_config(law.to_config()), law)


class HerglotzInitialTest(unittest.TestCase):
    """Test cases for H0_eval and H0_derivative."""

    def setUp(self):
        """Set up test data."""
        self.z = np.array([0.3, -0.2 + 0.4j, 0.5j])

    def test_classical_closed_form(self):
        """Test the classical transform."""
        law = InitialLaw.classical(0.6, 0.2)
        z = self.z
        np.testing.assert_allclose(H0_eval(law, z), (1 + z ** 2 + 0.24 * z) / (1 - z ** 2))

    def test_series_agree(self):
        """Test 1 + 2 psi agrees with H0 for every law with a transform."""
        laws = (InitialLaw.free(0.6, 0.2), InitialLaw.free(0.3, -0.5), InitialLaw.classical(0.4, 0.4),
                InitialLaw.boolean(), InitialLaw.monotone(), InitialLaw.centered(atomic([(1.0, 0.5), (-1.0, 0.5)])))
        for law in laws:
            psi = psi_series(law, 48)
            np.testing.assert_allclose(1 + 2 * psi(self.z), H0_eval(law, self.z), atol=1e-10,
                                       err_msg=law.tag.value)

    def test_free_law_is_positive(self):
        """Test the free transform has positive real part."""
        self.assertGreater(H0_eval(InitialLaw.free(0.6, 0.2), 0.0).real, 0.0)
        self.assertTrue(np.all(H0_eval(InitialLaw.free(0.6, 0.2), 0.9 * np.exp(1j * np.linspace(-3, 3, 13))).real
                               > 0))

    def test_derivative(self):
        """Test the closed-form derivatives against differences."""
        h = 1e-6
        for law in (InitialLaw.classical(0.6, 0.2), InitialLaw.boolean(), InitialLaw.free(0.6, 0.2)):
            numeric = (H0_eval(law, self.z + h) - H0_eval(law, self.z - h)) / (2 * h)
            np.testing.assert_allclose(H0_derivative(law, self.z), numeric, rtol=1e-5, atol=1e-6)

    def test_domain(self):
        """Test evaluation is restricted to the open disc and to laws with a transform."""
        with self.assertRaises(DomainError):
            H0_eval(InitialLaw.classical(), 1.0)
        with self.assertRaises(DomainError):
            H0_eval(InitialLaw.from_moments([0.5]), 0.1)

    def test_track_sqrt(self):
        """Test the continued root starts from the principal branch."""
        self.assertAlmostEqual(complex(track_sqrt(lambda z: 1 + z, np.array([0.5]))[0]), np.sqrt(1.5))


class MomentSeriesTest(unittest.TestCase):
    """Test cases for initial moments."""

    def test_classical_moments(self):
        """Test the classical law alternates between alpha*beta and one."""
        np.testing.assert_allclose(initial_moments(InitialLaw.classical(0.6, 0.2), 4), [1, 0.12, 1, 0.12, 1])

    def test_free_mean(self):
        """Test the free law has mean alpha*beta."""
        self.assertAlmostEqual(initial_moments(InitialLaw.free(0.6, 0.2), 3)[1], 0.12, places=12)

    def test_boolean_and_monotone(self):
        """Test the cube and fourth-power laws."""
        np.testing.assert_allclose(initial_moments(InitialLaw.boolean(), 6), [1, 0, 0, 1, 0, 0, 1])
        np.testing.assert_allclose(initial_moments(InitialLaw.monotone(), 4), [1, 0, 0, 0, 1])

    def test_moment_law(self):
        """Test moment-only laws need enough moments."""
        law = InitialLaw.from_moments([0.5, 0.25])
        np.testing.assert_allclose(initial_moments(law, 2), [1, 0.5, 0.25])
        with self.assertRaises(DomainError):
            initial_moments(law, 3)

    def test_order_limits(self):
        """Test truncation orders outside [1, 64] are rejected."""
        with self.assertRaises(DomainError):
            psi_series(InitialLaw.classical(), 65)


class TransformTest(unittest.TestCase):
    """Test cases for the transform arithmetic."""

    def setUp(self):
        """Set up psi of the free unitary Brownian motion at t = 1."""
        self.order = 16
        self.psi = TransformSeries.polynomial([0] + [fubm_moment(1.0, k) for k in range(1, self.order + 1)],
                                              kind="psi", order=self.order)

    def test_chi_psi_inverse(self):
        """Test chi and psi convert into each other."""
        back = psi_from_chi(chi_from_psi(self.psi))
        np.testing.assert_allclose(back.coefficients, self.psi.coefficients, atol=1e-12)

    def test_f_chi_inverse(self):
        """Test F drops and restores the leading zero."""
        chi = chi_from_psi(self.psi)
        self.assertEqual(f_from_chi(chi).order, self.order - 1)
        np.testing.assert_allclose(chi_from_f(f_from_chi(chi)).coefficients, chi.coefficients)

    def test_sigma_of_fubm(self):
        """Test the sigma transform of the moments matches the closed form."""
        sigma = sigma_series(chi_from_psi(self.psi))
        reference = sigma_lambda_series(1.0, sigma.order)
        np.testing.assert_allclose(sigma.coefficients, reference.coefficients, atol=1e-9)
        self.assertAlmostEqual(reference(0.2), sigma_lambda(1.0, 0.2), places=8)

    def test_sigma_pole(self):
        """Test the closed-form sigma transform has a pole at one."""
        with self.assertRaises(PoleError):
            sigma_lambda(1.0, 1.0)

    def test_sigma_needs_mean(self):
        """Test centered laws have no sigma transform."""
        psi = psi_series(InitialLaw.boolean(), 8)
        with self.assertRaises(DomainError):
            sigma_series(chi_from_psi(psi))

    def test_monotone_identity(self):
        """Test composing with the identity leaves chi unchanged."""
        chi = chi_from_psi(self.psi)
        identity = TransformSeries.polynomial([0, 1], kind="chi", order=self.order)
        np.testing.assert_allclose(monotone_convolve_chi(chi, identity).coefficients, chi.coefficients, atol=1e-14)

    def test_boolean_product(self):
        """Test F transforms multiply."""
        F = TransformSeries.polynomial([1, 1], kind="F", order=4)
        self.assertEqual(list(boolean_convolve_F(F, F).coefficients.real), [1, 2, 1, 0, 0])

    def test_series_origin(self):
        """Test psi series must vanish at the origin."""
        with self.assertRaises(ValidationError):
            TransformSeries(coefficients=[1, 0], kind="psi")


if __name__ == '__main__':
    unittest.main()
