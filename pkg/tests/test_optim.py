"""Tests for parameter ids, objectives and the gradient pipeline.

The adjoint checks run on the two top sites of the bundled region with
three levels per fluxonium and a coarse Trotter step.
"""

import math
import os
import unittest

import numpy as np

from fluxqec.core import cache_tools, optim
from fluxqec.core.control import CosineEnvelope, FlatTopEnvelope
from fluxqec.core.errors import RejectedStepError, StaleCoefficientsError
from fluxqec.core.presets import (
    CNOT_PAIRS, REGION, one_qubit_schedule, table_one_lattice,
    table_two_lcpem, two_qubit_schedule)
from fluxqec.core.twirl import RATE_NAMES, LcpemParams


SLOW = os.environ.get('FLUXQEC_SLOW') == '1'
PAIR = list(REGION[:2])
DT = 0.2


def pair_params(with_cnot=False):
    "Two-site parameters with the bundled X drives (and optionally a CNOT)."
    schedules = {'1q': one_qubit_schedule(PAIR)}
    if with_cnot:
        schedules['2q'] = two_qubit_schedule(PAIR, CNOT_PAIRS[:1])
    return optim.HamiltonianParams(table_one_lattice(keep_levels=3),
                                   schedules, oscillator_basis_size=40)


def assert_gradients_close(adjoint, numeric, pids):
    "Compare rows of adjoint and central-difference derivatives."
    for pid in pids:
        scale = max(float(np.abs(numeric[pid]).max()), 1e-9)
        np.testing.assert_allclose(adjoint[pid], numeric[pid], rtol=2e-3,
                                   atol=2e-3 * scale, err_msg=pid)


class TestParameterIds(unittest.TestCase):
    """Dotted ids, sharing and copies with new values.
    """

    def test_ids(self):
        "Device ids cover every label and controls every drive."
        params = pair_params()
        self.assertIn('device.label3.e_c', params.device_ids())
        self.assertEqual(params.device_ids()[-2:],
                         ['device.j_c', 'device.j_l'])
        controls = params.control_ids()
        self.assertIn(optim.control_id('1q', (0, 2), 'amplitude'), controls)
        self.assertIn('control.1q.compensation.z_before.1.0', controls)
        self.assertTrue(optim.is_energy_id('device.label4.e_l'))
        self.assertFalse(optim.is_energy_id('device.j_c'))

    def test_with_values(self):
        "with_values copies and leaves the disorder offsets alone."
        params = pair_params()
        moved = params.with_values({'device.label3.e_j': 4.1,
                                    'device.j_c': 0.02})
        self.assertEqual(moved.get('device.label3.e_j'), 4.1)
        self.assertEqual(moved.get('device.j_c'), 0.02)
        self.assertEqual(params.get('device.label3.e_j'), 4.0)
        self.assertIs(moved.offsets, params.offsets)
        pid = optim.control_id('1q', (0, 3), 'amplitude')
        self.assertEqual(params.with_values({pid: 0.02}).get(pid), 0.02)

    def test_groups(self):
        "A label id moves every site carrying that label."
        members = pair_params().groups()['device.label3.e_c']
        self.assertIn((0, 2), members)
        self.assertIn((2, 3), members)
        self.assertNotIn((0, 3), members)

    def test_invalid(self):
        "Unknown rounds, ids and non-finite values are refused."
        params = pair_params()
        with self.assertRaises(ValueError):
            optim.HamiltonianParams(params.lattice,
                                    {'3q': params.schedule('1q')})
        with self.assertRaises(ValueError):
            params.get('hardware.e_c')
        with self.assertRaises(ValueError):
            params.with_values({'device.j_l': float('nan')})
        with self.assertRaises(ValueError):
            params.schedule('2q')


class TestLcpemGradient(unittest.TestCase):
    """Adjoint derivatives of the six rates.
    """

    @classmethod
    def setUpClass(cls):
        cls.params = pair_params()
        cls.grad = optim.grad_lcpem_wrt_params(cls.params, DT)

    def test_rates_match_forward(self):
        "The adjoint pass reports the forward rates."
        rates = optim.lcpem_rates(self.params, DT)
        np.testing.assert_allclose(self.grad.rates, rates, atol=1e-15)
        self.assertTrue(np.all(rates[3:] == 0.0))
        self.assertGreater(self.grad.fidelities['1q'], 0.5)

    def test_device_matches_differences(self):
        "Energy and coupling derivatives match central differences."
        pids = ['device.label3.e_j', 'device.label4.e_l',
                'device.label3.e_c', 'device.j_c']
        numeric = optim.finite_difference_lcpem(self.params, pids,
                                                step=1e-5, dt=DT)
        assert_gradients_close(self.grad.grads, numeric, pids)

    def test_controls_match_differences(self):
        "Drive and compensation derivatives match central differences."
        pids = [optim.control_id('1q', (0, 3), 'amplitude'),
                optim.control_id('1q', (0, 2), 'drive_freq'),
                optim.control_id('1q', (0, 2), 'phase'),
                optim.compensation_id('1q', 'z_after', 1, 0)]
        numeric = optim.finite_difference_lcpem(self.params, pids,
                                                step=1e-6, dt=DT)
        assert_gradients_close(self.grad.grads, numeric, pids)

    def test_unused_label_is_zero(self):
        "A label absent from the region has exactly zero gradient."
        for name in ('e_c', 'e_j', 'e_l'):
            row = self.grad.grads[optim.device_id(1, name)]
            self.assertTrue(np.all(row == 0.0))
        pid = optim.control_id('1q', (0, 2), 'amplitude')
        self.assertTrue(np.all(self.grad.grads[pid][3:] == 0.0))

    @unittest.skipUnless(SLOW, 'set FLUXQEC_SLOW=1 for the CNOT round')
    def test_cnot_round(self):
        "The two-qubit round differentiates through the flat-top drive."
        params = pair_params(with_cnot=True)
        grad = optim.grad_lcpem_wrt_params(params, DT)
        pids = [optim.control_id('2q', (0, 2), 'amplitude'),
                optim.compensation_id('2q', 'u_before', 1, 2),
                'device.label4.e_j']
        numeric = optim.finite_difference_lcpem(params, pids, step=1e-6,
                                                dt=DT)
        assert_gradients_close(grad.grads, numeric, pids)


class TestFidelityObjective(unittest.TestCase):
    """log10(2 − F_1q − F_2q) and control descent.
    """

    def test_known_matrices(self):
        "An exact X round and an identity for CNOT give log10(0.6)."
        x_all, _cnots = optim.default_targets(2)
        value = optim.fidelity_objective(x_all, np.eye(4))
        self.assertAlmostEqual(value, math.log10(0.6))

    def test_control_gradient(self):
        "The control gradient matches a central difference."
        params = pair_params()
        pid = optim.control_id('1q', (0, 2), 'amplitude')
        found = optim.control_objective(params, ('1q',), DT)
        step = 1e-6
        value = params.get(pid)
        plus = optim.control_objective(params.with_values(
            {pid: value + step}), ('1q',), DT, with_grad=False).value
        minus = optim.control_objective(params.with_values(
            {pid: value - step}), ('1q',), DT, with_grad=False).value
        numeric = (plus - minus) / (2 * step)
        self.assertAlmostEqual(found.gradient[pid] / numeric, 1.0, places=3)

    def test_zero_budget(self):
        "A zero budget evaluates once and changes nothing."
        params = pair_params()
        result = optim.optimize_controls(params, budget=0, dt=DT)
        self.assertEqual(result.objective, result.initial_objective)
        self.assertEqual(len(result.history), 1)
        self.assertEqual(result.accepted_steps, 0)
        self.assertIs(result.params, params)
        with self.assertRaises(ValueError):
            optim.optimize_controls(params, budget=-1)

    def test_never_worse(self):
        "Only improving steps are accepted."
        params = pair_params()
        names = [optim.control_id('1q', c, 'amplitude') for c in PAIR]
        result = optim.optimize_controls(params, budget=3, names=names,
                                         learning_rate=0.001, dt=DT)
        self.assertLessEqual(result.objective, result.initial_objective)
        self.assertEqual(len(result.history), 4)
        self.assertEqual(result.params.get('device.label3.e_j'), 4.0)


class TestFiniteDifferences(unittest.TestCase):
    """Paired estimates of the logical rate's sensitivity.
    """

    def test_paired_estimate(self):
        "Correlated pairs give a smaller error than independent runs."
        rng = np.random.default_rng(1)
        low = rng.random(400) < 0.3
        high = low | (rng.random(400) < 0.05)
        est = optim.paired_estimate('p_measure', high, low, 0.01, 0.005)
        self.assertLess(est.stderr, est.independent_stderr)
        self.assertGreaterEqual(est.value, 0.0)
        low_ci, high_ci = est.ci
        self.assertAlmostEqual((low_ci + high_ci) / 2, est.value)
        self.assertEqual(est.to_dict()['shots'], 400)

    def test_single_shot(self):
        "One shot has no error estimate."
        est = optim.paired_estimate('p', np.array([1]), np.array([0]),
                                    1.0, 1.0)
        self.assertEqual(est.stderr, float('inf'))

    def test_logical_coefficients(self):
        "Zero rates use one-sided steps and the result is cached by key."
        cache_tools.CoefficientCache.clear()
        params = LcpemParams.zero().replace(p_measure=0.01)
        coeffs = optim.fd_grad_logical_wrt_lcpem(
            params, 3, 1, shots=200, seed=4, names=('p1_2q', 'p_measure'))
        self.assertTrue(coeffs.estimates['p1_2q'].one_sided)
        self.assertFalse(coeffs.estimates['p_measure'].one_sided)
        self.assertAlmostEqual(coeffs.estimates['p_measure'].step, 1e-3)
        self.assertEqual(coeffs.key, cache_tools.params_key(3, 1, params))
        self.assertIs(cache_tools.CoefficientCache.lookup(coeffs.key),
                      coeffs)
        self.assertEqual(coeffs.vector()[[0, 1, 2, 4, 5]].tolist(),
                         [0.0] * 5)
        self.assertEqual(coeffs.to_dict()['seed'], 4)

    def test_single_qubit_rate_has_no_effect(self):
        "Common random numbers make the p1_1q derivative exactly zero."
        params = LcpemParams(p1_1q=0.01, p1_2q=0.01, p2_2q=0.005,
                             p_measure=0.01)
        coeffs = optim.fd_grad_logical_wrt_lcpem(
            params, 3, 1, shots=500, seed=7, names=('p1_1q',))
        self.assertEqual(coeffs.estimates['p1_1q'].value, 0.0)
        self.assertFalse(coeffs.estimates['p1_1q'].one_sided)


class TestChain(unittest.TestCase):
    """Chained objective and label-energy steps.
    """

    @classmethod
    def setUpClass(cls):
        cls.params = pair_params()
        cls.grad = optim.grad_lcpem_wrt_params(cls.params, DT)
        cls.settings = table_two_lcpem()

    def coefficients(self, values, key=None):
        "Frozen coefficients at the current rates."
        point = self.grad.as_params(self.settings)
        key = key or cache_tools.params_key(3, 1, point)
        estimates = {name: optim.FdEstimate(name, value, 0.0, 0.0, 1e-5,
                                            False, 100)
                     for name, value in zip(RATE_NAMES, values)}
        return optim.FdCoefficients(estimates, key, 3, 1, 100, 0)

    def test_linear_in_coefficients(self):
        "The objective and its gradient are Σ coeff_k times the rates."
        values = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        chain = optim.chain_objective(self.params, self.coefficients(values),
                                      self.settings, self.grad)
        self.assertAlmostEqual(chain.value, float(
            np.dot(values, self.grad.rates)))
        double = optim.chain_objective(
            self.params, self.coefficients([2 * v for v in values]),
            self.settings, self.grad)
        for pid in ('device.label3.e_j', 'device.j_c'):
            self.assertAlmostEqual(double.gradient[pid],
                                   2 * chain.gradient[pid])

    def test_stale_key(self):
        "Coefficients from another point are refused."
        with self.assertRaises(StaleCoefficientsError):
            optim.chain_objective(self.params,
                                  self.coefficients([1.0] * 6, key='old'),
                                  self.settings, self.grad)

    def test_report(self):
        "Reports carry units per parameter and the coefficient table."
        coeffs = self.coefficients([1.0] * 6)
        chain = optim.chain_objective(self.params, coeffs, self.settings,
                                      self.grad)
        report = optim.gradient_report(chain, coeffs).to_dict()
        self.assertEqual(
            report['dO_dparams']['device.label3.e_j']['units'], '1/GHz')
        self.assertEqual(sorted(report['dlogical_dlcpem']),
                         sorted(RATE_NAMES))

    def test_gradient_step(self):
        "Only label energies move, by −step times the gradient."
        gradient = {'device.label3.e_j': 0.5, 'device.j_c': 10.0,
                    optim.control_id('1q', (0, 2), 'amplitude'): 1.0}
        moved = optim.gradient_step(self.params, gradient, step=0.01)
        self.assertAlmostEqual(moved.get('device.label3.e_j'), 3.995)
        self.assertEqual(moved.get('device.j_c'),
                         self.params.get('device.j_c'))
        self.assertIs(moved.schedules['1q'], self.params.schedules['1q'])

    def test_rejected_step(self):
        "Steps that make an energy non-positive are rejected."
        with self.assertRaises(RejectedStepError):
            optim.gradient_step(self.params, {'device.label3.e_c': 1e3},
                                step=0.01)


class TestInitialSchedule(unittest.TestCase):
    """Heuristic starting drives.
    """

    def test_x_round(self):
        "X rounds drive every site with a cosine pulse."
        sched = optim.initial_schedule(table_one_lattice(keep_levels=3),
                                       PAIR, oscillator_basis_size=40)
        self.assertEqual([d.target for d in sched.drives], PAIR)
        for drive in sched.drives:
            self.assertIsInstance(drive.envelope, CosineEnvelope)
            self.assertGreater(drive.amplitude, 0.0)
            self.assertGreater(drive.drive_freq, 0.0)

    def test_cnot_round(self):
        "CNOT rounds drive each control at its target's frequency."
        lattice = table_one_lattice(keep_levels=3)
        pairs = CNOT_PAIRS[:1]
        sched = optim.initial_schedule(lattice, PAIR, 'cnot', pairs,
                                       oscillator_basis_size=40)
        self.assertEqual(len(sched.drives), 1)
        self.assertEqual(sched.drives[0].target, (0, 2))
        self.assertIsInstance(sched.drives[0].envelope, FlatTopEnvelope)
        with self.assertRaises(ValueError):
            optim.initial_schedule(lattice, PAIR, 'swap')
