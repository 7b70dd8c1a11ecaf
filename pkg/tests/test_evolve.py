"""Tests for labeling, Walsh analysis and Trotterized evolution.
"""

import os
import unittest

import numpy as np

from fluxqec.core import evolve
from fluxqec.core.control import (
    Compensation, CosineEnvelope, DriveSpec, GateSchedule)
from fluxqec.core.device import (
    FluxoniumParams, HamiltonianTerms, build_idle_hamiltonian,
    fluxonium_spectrum, region_qubits)
from fluxqec.core.errors import LabelingError, LeakageError
from fluxqec.core.presets import REGION, table_one_lattice


SLOW = os.environ.get('FLUXQEC_SLOW') == '1'


def uncoupled_pair(keep_levels=3):
    "Idle terms of two neighbouring sites with couplings switched off."
    spec = table_one_lattice(keep_levels=keep_levels).replace(j_c=0.0,
                                                              j_l=0.0)
    region = [(0, 2), (0, 3)]
    return build_idle_hamiltonian(region_qubits(spec, region), spec, region)


def single_site(keep_levels=3):
    "Idle terms of one isolated fluxonium."
    qubit = fluxonium_spectrum(FluxoniumParams(1.0, 4.0, 1.0),
                               keep_levels=keep_levels)
    return HamiltonianTerms(sites=[(0, 2)], qubits=[qubit],
                            single=[qubit.hamiltonian()], pairs=[])


class TestLabeling(unittest.TestCase):
    """Computational basis selection.
    """

    def test_bare_index(self):
        "Labels index the product space with site 0 most significant."
        self.assertEqual(evolve.bare_index('10', [3, 3]), 3)
        self.assertEqual(evolve.bare_index('011', [4, 4, 4]), 5)

    def test_uncoupled_basis(self):
        "Without coupling every label picks its bare product state."
        terms = uncoupled_pair()
        basis = evolve.select_computational_basis(terms)
        self.assertEqual(basis.labels, ['00', '01', '10', '11'])
        np.testing.assert_allclose(basis.overlaps, 1.0, atol=1e-12)
        self.assertLess(basis.orthonormality_error(), 1e-12)
        for column, index in enumerate(basis.bare_indices()):
            self.assertAlmostEqual(basis.states[index, column].real, 1.0)

    def test_coupled_phase_convention(self):
        "The bare component of every labeled state is real and positive."
        spec = table_one_lattice(keep_levels=3)
        region = list(REGION[:3])
        terms = build_idle_hamiltonian(region_qubits(spec, region), spec,
                                       region)
        basis = evolve.select_computational_basis(terms)
        bare = basis.states[basis.bare_indices(), np.arange(8)]
        self.assertTrue(np.all(bare.real > 0.9))
        np.testing.assert_allclose(bare.imag, 0.0, atol=1e-12)

    def test_labeling_failure(self):
        "Strong mixing of bare states raises LabelingError with the label."
        pauli_x = np.array([[0, 1], [1, 0]])
        with self.assertRaises(LabelingError) as ctx:
            evolve.select_computational_basis(np.kron(pauli_x, np.eye(2)),
                                              dims=[2, 2])
        self.assertEqual(ctx.exception.bitstring, '00')


class TestWalsh(unittest.TestCase):
    """Walsh coefficients of the computational spectrum.
    """

    def test_uncoupled_has_no_interactions(self):
        "Uncoupled sites have no weight >= 2 coefficients."
        terms = uncoupled_pair()
        basis = evolve.select_computational_basis(terms)
        coeffs = evolve.walsh_transform(terms, basis)
        self.assertAlmostEqual(coeffs.coeffs[3], 0.0, places=12)
        omega = terms.qubits[1].omega_01
        self.assertAlmostEqual(coeffs.coeffs[1], -omega / 2, places=10)
        np.testing.assert_allclose(coeffs.inverse(), basis.energies,
                                   atol=1e-12)

    def test_phase_unitary(self):
        "Weights 0 and 1 reproduce idle evolution of uncoupled sites."
        terms = uncoupled_pair()
        basis = evolve.select_computational_basis(terms)
        coeffs = evolve.walsh_transform(None, basis)
        t_ns = 3.7
        expected = np.diag(np.exp(-2j * np.pi * t_ns * basis.energies))
        np.testing.assert_allclose(
            evolve.walsh_phase_unitary(coeffs, t_ns, (0, 1)), expected,
            atol=1e-10)

    def test_weight_summary(self):
        "The summary lists one row per weight with the largest entry."
        coeffs = evolve.WalshCoefficients(
            np.array([5.0, -0.1, 0.3, 0.02, 0.0, 0.0, -0.04, 0.001]), 3)
        rows = evolve.walsh_weight_summary(coeffs)
        self.assertEqual([r['weight'] for r in rows], [1, 2, 3])
        self.assertEqual(rows[0]['bitstring'], '010')
        self.assertEqual(rows[1]['bitstring'], '110')
        self.assertEqual(coeffs.to_rows()[0]['bitstring'], '010')

    def test_zero_coupling_c11(self):
        "c_11 vanishes without coupling and the scan reports it."
        first = fluxonium_spectrum(FluxoniumParams(1.0, 4.0, 1.0), 60, 3)
        second = fluxonium_spectrum(FluxoniumParams(1.0, 4.0, 0.8), 60, 3)
        self.assertAlmostEqual(evolve.pair_c11(first, second, 0.0, 0.0),
                               0.0, places=12)
        scan = evolve.zz_cancellation_scan((first, second), [0.0, 0.01],
                                           [0.0, 0.001])
        self.assertEqual(scan.grid.shape, (2, 2))
        self.assertAlmostEqual(scan.best()['c11_ghz'], 0.0, places=12)

    @unittest.skipUnless(SLOW, 'set FLUXQEC_SLOW=1 for full-region checks')
    def test_largest_interaction_is_three_body(self):
        "At the bundled operating point the largest w>=2 term has w=3."
        spec = table_one_lattice()
        terms = build_idle_hamiltonian(region_qubits(spec, REGION), spec,
                                       REGION)
        basis = evolve.select_computational_basis(terms)
        rows = evolve.walsh_transform(terms, basis).to_rows()
        coupled = [r for r in rows if r['weight'] >= 2]
        self.assertEqual(coupled[0]['weight'], 3)

    @unittest.skipUnless(SLOW, 'set FLUXQEC_SLOW=1 for coupling scans')
    def test_zz_cancellation(self):
        "A scan over J_L finds a point with |c_11| below 1 kHz."
        spec = table_one_lattice()
        qubits = region_qubits(spec, [(0, 2), (0, 3)])
        scan = evolve.zz_cancellation_scan(
            (qubits[(0, 2)], qubits[(0, 3)]), [0.0115],
            np.linspace(-0.02, 0.02, 41))
        self.assertLess(abs(scan.best()['c11_ghz']), 1e-6)


class TestTrotter(unittest.TestCase):
    """Product-formula propagation and its adjoint.
    """

    def test_step_rule(self):
        "The step count is ceil(T/dt) and the step is T divided by it."
        prop = evolve.TrotterPropagator(single_site(), (), 1.0, 0.3)
        self.assertEqual(prop.num_steps, 4)
        self.assertAlmostEqual(prop.dt, 0.25)
        with self.assertRaises(ValueError):
            evolve.TrotterPropagator(single_site(), (), 1.0, 0.0)

    def test_idle_phases(self):
        "Idle evolution of uncoupled eigenstates only adds phases."
        terms = uncoupled_pair()
        basis = evolve.select_computational_basis(terms)
        t_ns = 2.5
        final = evolve.trotter_evolve(terms, basis.states, 0.05, t_ns)
        expected = basis.states * np.exp(-2j * np.pi * t_ns *
                                         basis.energies)[None, :]
        np.testing.assert_allclose(final, expected, atol=1e-10)

    def test_norm_preserved(self):
        "Driven evolution keeps every column normalized."
        terms = single_site()
        drive = DriveSpec((0, 2), 0.05, terms.qubits[0].omega_01, 0.0,
                          CosineEnvelope(10.0))
        states = np.eye(3, dtype=complex)
        final = evolve.trotter_evolve(terms, states, 0.02, 10.0, [drive])
        np.testing.assert_allclose(np.linalg.norm(final, axis=0), 1.0,
                                   atol=1e-12)

    def _population(self, amplitude, t_gate, dt_steps=200):
        terms = single_site()
        drive = DriveSpec((0, 2), amplitude, terms.qubits[0].omega_01, 0.1,
                          CosineEnvelope(t_gate))
        prop = evolve.TrotterPropagator(terms, [drive], t_gate,
                                        t_gate / dt_steps)
        psi0 = np.array([1.0, 0.0, 0.0], dtype=complex)
        final = prop.evolve(psi0)
        return prop, drive, final

    def test_adjoint_matches_finite_differences(self):
        "Drive and duration gradients of a population match differences."

        def loss(amplitude, t_gate):
            _, _, final = self._population(amplitude, t_gate)
            return abs(final[1]) ** 2

        amp, t_gate = 0.03, 10.0
        prop, drive, final = self._population(amp, t_gate)
        target = np.array([0.0, 1.0, 0.0], dtype=complex)
        grad_final = (final[1] * target)[:, None]
        sens = prop.backpropagate(final[:, None], grad_final)
        grads = sens.drive_gradients(0, drive)
        step = 1e-7
        numeric = (loss(amp + step, t_gate) - loss(amp - step, t_gate)) / (
            2 * step)
        self.assertAlmostEqual(grads['amplitude'][0] / numeric, 1.0,
                               places=4)
        total = grads['t_gate'][0] + sens.duration_gradient({0: drive})[0]
        step = 1e-5
        numeric = (loss(amp, t_gate + step) - loss(amp, t_gate - step)) / (
            2 * step)
        self.assertAlmostEqual(total / numeric, 1.0, places=4)


class TestRoundUnitary(unittest.TestCase):
    """Projection onto the labeled subspace.
    """

    def test_idle_round(self):
        "An idle round of uncoupled sites is a diagonal unitary."
        terms = uncoupled_pair()
        basis = evolve.select_computational_basis(terms)
        sched = GateSchedule(list(terms.sites), [],
                             Compensation.zeros(2, 'z'), 'idle',
                             idle_duration=5.0)
        result = evolve.extract_round_unitary(sched, basis, dt=0.1)
        self.assertLess(result.p_leak, 1e-12)
        self.assertLess(result.unitarity_error(), 1e-10)
        np.testing.assert_allclose(np.abs(np.diag(result.u_sim)), 1.0,
                                   atol=1e-10)
        self.assertEqual(result.num_steps, 50)

    def test_leakage_error(self):
        "Population outside the subspace above the limit is an error."
        terms = single_site()
        basis = evolve.select_computational_basis(terms)
        final = np.zeros((3, 2), dtype=complex)
        final[2, 0] = 1.0
        final[1, 1] = 1.0
        sched = GateSchedule([(0, 2)], [], Compensation.zeros(1, 'z'),
                             'idle')
        with self.assertRaises(LeakageError) as ctx:
            evolve.project_round(final, basis, sched)
        self.assertAlmostEqual(ctx.exception.p_leak, 0.5)

    def test_fidelity_phase_invariance(self):
        "Average gate fidelity ignores a global phase."
        rng = np.random.default_rng(3)
        mat = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        unitary, _ = np.linalg.qr(mat)
        target = np.eye(4)
        self.assertAlmostEqual(
            evolve.gate_fidelity(unitary, target),
            evolve.gate_fidelity(np.exp(0.4j) * unitary, target), places=12)
        self.assertAlmostEqual(evolve.gate_fidelity(target, target), 1.0)
