"""Tests for fluxonium spectra, lattice patterns and idle Hamiltonians.
"""

import unittest

import numpy as np

from fluxqec.core import device
from fluxqec.core.errors import InfeasibleSizeError
from fluxqec.core.presets import table_one_lattice


class TestLattice(unittest.TestCase):
    """Site names, frequency pattern and disorder.
    """

    def test_site_names(self):
        "Site names round trip and reject junk."
        self.assertEqual(device.parse_site_name(device.site_name((2, 3))),
                         (2, 3))
        with self.assertRaises(ValueError):
            device.parse_site_name('X02')

    def test_pattern(self):
        "Five labels repeat along rows and shift by two per row."
        labels = device.pattern_labels(5, 3)
        self.assertEqual([labels[(0, c)] for c in range(5)], [1, 2, 3, 4, 5])
        self.assertEqual([labels[(1, c)] for c in range(5)], [3, 4, 5, 1, 2])
        for (row, col), label in labels.items():
            if col + 1 < 5:
                self.assertNotEqual(label, labels[(row, col + 1)])
            if row + 1 < 3:
                self.assertNotEqual(label, labels[(row + 1, col)])

    def test_invalid_params(self):
        "Non-positive energies and bad truncations are rejected."
        with self.assertRaises(ValueError):
            device.FluxoniumParams(-1.0, 4.0, 1.0)
        device.FluxoniumParams(1.0, 0.0, 1.0)
        with self.assertRaises(ValueError):
            table_one_lattice(keep_levels=5)

    def test_disorder_is_seeded(self):
        "Same seed gives the same sample, a new seed a different one."
        first = device.sample_disordered_lattice(table_one_lattice(
            disorder_seed=3, disorder_sigma=0.01))
        again = device.sample_disordered_lattice(table_one_lattice(
            disorder_seed=3, disorder_sigma=0.01))
        other = device.sample_disordered_lattice(table_one_lattice(
            disorder_seed=4, disorder_sigma=0.01))
        self.assertEqual(first, again)
        self.assertNotEqual(first, other)

    def test_no_disorder(self):
        "With sigma 0 every site holds its label's base values."
        spec = table_one_lattice()
        sampled = device.sample_disordered_lattice(spec)
        for coord, params in sampled.items():
            self.assertEqual(params,
                             spec.base_params[spec.site_labels[coord]])
        offsets = device.disorder_offsets(spec)
        self.assertTrue(all(v == 0.0 for entry in offsets.values()
                            for v in entry.values()))

    def test_frequency_table(self):
        "One row per lattice site with a positive qubit frequency."
        rows = device.lattice_frequency_table(table_one_lattice())
        self.assertEqual(len(rows), 15)
        self.assertTrue(all(row['omega_01_ghz'] > 0 for row in rows))
        self.assertEqual(rows[0]['site'], 'Q00')


class TestSpectrum(unittest.TestCase):
    """Single fluxonium diagonalization.
    """

    def test_harmonic_limit(self):
        "Without E_J the levels are spaced by sqrt(8 E_C E_L)."
        qubit = device.fluxonium_spectrum(
            device.FluxoniumParams(1.0, 0.0, 0.5))
        gaps = np.diff(qubit.energies)
        np.testing.assert_allclose(gaps, 2.0, atol=1e-6)

    def test_operators(self):
        "Kept energies ascend and the operators are Hermitian."
        qubit = device.fluxonium_spectrum(
            device.FluxoniumParams(1.0, 4.0, 1.0))
        self.assertEqual(qubit.levels, 4)
        self.assertTrue(np.all(np.diff(qubit.energies) > 0))
        np.testing.assert_allclose(qubit.n_op, qubit.n_op.conj().T)
        np.testing.assert_allclose(qubit.phi_op, qubit.phi_op.conj().T)
        self.assertTrue(0.1 < qubit.omega_01 < 1.5)
        self.assertGreater(abs(qubit.phi_op[0, 1]), 0.1)

    def test_energy_derivatives(self):
        "Perturbative derivatives match central differences."
        params = device.FluxoniumParams(1.0, 4.0, 1.0)
        derivs = device.fluxonium_eigensystem(params).derivatives(4)
        step = 1e-5
        for name in device.ENERGY_FIELDS:
            value = getattr(params, name)
            plus = device.fluxonium_spectrum(params.replace(
                **{name: value + step}))
            minus = device.fluxonium_spectrum(params.replace(
                **{name: value - step}))
            expected = (plus.energies - minus.energies) / (2 * step)
            np.testing.assert_allclose(derivs[name][0], expected,
                                       rtol=1e-5, atol=1e-7)


class TestIdleHamiltonian(unittest.TestCase):
    """Assembly of local terms.
    """

    def test_embed_pair(self):
        "Embedding on separated sites matches an explicit Kronecker product."
        rng = np.random.default_rng(0)
        first = rng.standard_normal((2, 2))
        second = rng.standard_normal((3, 3))
        full = device.embed_pair(np.kron(first, second), 0, 2, [2, 4, 3])
        expected = np.kron(np.kron(first, np.eye(4)), second)
        np.testing.assert_allclose(full, expected, atol=1e-12)

    def test_uncoupled_is_diagonal(self):
        "Without couplings the idle Hamiltonian is diagonal."
        spec = table_one_lattice().replace(j_c=0.0, j_l=0.0, keep_levels=3)
        region = [(0, 2), (0, 3)]
        terms = device.build_idle_hamiltonian(
            device.region_qubits(spec, region), spec, region)
        dense = terms.to_dense()
        self.assertEqual(dense.shape, (9, 9))
        np.testing.assert_allclose(dense, np.diag(np.diag(dense)),
                                   atol=1e-14)

    def test_coupled_is_hermitian(self):
        "Couplings add a Hermitian off-diagonal part."
        spec = table_one_lattice(keep_levels=3)
        region = [(0, 2), (0, 3), (1, 2)]
        terms = device.build_idle_hamiltonian(
            device.region_qubits(spec, region), spec, region)
        self.assertEqual(len(terms.pairs), 2)
        dense = terms.to_dense()
        np.testing.assert_allclose(dense, dense.conj().T, atol=1e-14)
        self.assertGreater(np.max(np.abs(dense - np.diag(np.diag(dense)))),
                           0)

    def test_dense_size_limit(self):
        "More than eight sites refuse dense assembly."
        qubit = device.TruncatedQubit(np.array([0.0, 1.0]),
                                      np.zeros((2, 2), dtype=complex),
                                      np.zeros((2, 2), dtype=complex))
        terms = device.HamiltonianTerms(
            sites=[(0, i) for i in range(9)], qubits=[qubit] * 9,
            single=[qubit.hamiltonian()] * 9, pairs=[])
        with self.assertRaises(InfeasibleSizeError):
            terms.to_dense()

    def test_region_outside_lattice(self):
        "Sites outside the lattice are a ValueError."
        spec = table_one_lattice()
        with self.assertRaises(ValueError):
            device.build_idle_hamiltonian({}, spec, [(7, 7)])
