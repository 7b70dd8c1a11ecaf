"""Tests for Pauli twirling and uniform-LCPEM extraction.
"""

import unittest

import numpy as np
import scipy.stats

from fluxqec.core import twirl
from fluxqec.core.errors import InvalidRateError
from fluxqec.core.presets import CNOT_PAIRS, REGION


def random_unitary(dim, seed=0):
    "Haar-random unitary for reproducible checks."
    return scipy.stats.unitary_group.rvs(dim, random_state=seed)


class TestPauliExpansion(unittest.TestCase):
    """Expansion of operators in the Pauli basis.
    """

    def test_pauli_string(self):
        "A Pauli string has a single unit amplitude."
        amps = twirl.pauli_expand(twirl.pauli_string_matrix('XZY'))
        self.assertAlmostEqual(abs(amps['XZY']), 1.0)
        others = [abs(v) for k, v in amps.items() if k != 'XZY']
        self.assertLess(max(others), 1e-12)

    def test_normalized(self):
        "Twirled probabilities of a unitary sum to one."
        table = twirl.twirl_unitary(random_unitary(16, seed=4))
        self.assertAlmostEqual(table.total, 1.0, places=10)
        self.assertTrue(np.all(table.probs >= 0))
        amps = twirl.pauli_expand(random_unitary(16, seed=4))
        from_dict = twirl.twirl_probs(amps)
        np.testing.assert_allclose(from_dict.probs, table.probs, atol=1e-14)

    def test_phase_invariance(self):
        "A global phase leaves every probability unchanged."
        u_error = random_unitary(8, seed=5)
        first = twirl.twirl_unitary(u_error)
        second = twirl.twirl_unitary(np.exp(1.3j) * u_error)
        np.testing.assert_allclose(first.probs, second.probs, atol=1e-14)

    def test_matches_traces(self):
        "The fast transform matches tr(P† U)/2^m computed directly."
        u_error = random_unitary(4, seed=6)
        amps = twirl.pauli_expand(u_error)
        for label in ('IX', 'YZ', 'ZY'):
            direct = np.trace(twirl.pauli_string_matrix(label).conj().T
                              @ u_error) / 4
            self.assertAlmostEqual(amps[label], direct, places=12)

    def test_adjoint_identity(self):
        "<adj(g), U> equals <g, amp(U)> for the real inner product."
        rng = np.random.default_rng(7)
        u_error = random_unitary(8, seed=7)
        grad = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        left = np.vdot(twirl.pauli_amplitude_adjoint(grad, 3), u_error)
        right = np.vdot(grad, twirl.pauli_amplitude_array(u_error))
        self.assertAlmostEqual(left, right, places=10)

    def test_size_limit(self):
        "More than six qubits are refused."
        with self.assertRaises(ValueError):
            twirl.pauli_amplitude_array(np.eye(2 ** 7))


class TestLayout(unittest.TestCase):
    """Gate locations and connected sets.
    """

    def test_single_qubit_counts(self):
        "Six single-qubit gates on the 3x2 region give 6, 7 and 10 sets."
        layout = twirl.GateLayout.single_qubit_round(REGION)
        self.assertEqual([layout.count(k) for k in (1, 2, 3)], [6, 7, 10])

    def test_cnot_counts(self):
        "Three stacked CNOTs form a chain with 3, 2 and 1 sets."
        layout = twirl.GateLayout.cnot_round(REGION, CNOT_PAIRS)
        self.assertEqual([layout.count(k) for k in (1, 2, 3)], [3, 2, 1])
        self.assertEqual(layout.support('XIIZII'), (0, 1))
        self.assertEqual(layout.describe()[0], 'Q02-Q03')

    def test_overlapping_locations(self):
        "Locations sharing a qubit are rejected."
        with self.assertRaises(ValueError):
            twirl.GateLayout(REGION, [(0, 1), (1, 2)])


class TestExtraction(unittest.TestCase):
    """Aggregation of Pauli tables into rates.
    """

    def test_rates_and_dropped(self):
        "Strings are binned by connected location count or dropped."
        layout = twirl.GateLayout.single_qubit_round(REGION)
        table = twirl.PauliErrorTable.from_entries({
            'IIIIII': 0.9, 'XIIIII': 0.02, 'XXIIII': 0.03,
            'XXXIII': 0.005, 'XIIIIX': 0.01, 'XXXXII': 0.01}, 6)
        result = twirl.extract_lcpem(table, layout)
        self.assertAlmostEqual(result.rates[1], 0.02 / 6)
        self.assertAlmostEqual(result.rates[2], 0.03 / 7)
        self.assertAlmostEqual(result.rates[3], 0.005 / 10)
        self.assertAlmostEqual(result.dropped['disconnected'], 0.01)
        self.assertAlmostEqual(result.dropped['over3'], 0.01)
        self.assertEqual(result.dropped['uncovered'], 0.0)
        self.assertAlmostEqual(result.total_accounted(), 0.075)
        kinds = {label: kind for label, _p, kind in result.dropped_entries}
        self.assertEqual(kinds, {'XIIIIX': 'disconnected',
                                 'XXXXII': 'over3'})

    def test_uncovered_qubits(self):
        "Errors on qubits outside every location are reported separately."
        layout = twirl.GateLayout([(0, 0), (0, 1), (0, 2)], [(0,), (1,)])
        table = twirl.PauliErrorTable.from_entries(
            {'III': 0.8, 'IIZ': 0.1, 'ZII': 0.1}, 3)
        result = twirl.extract_lcpem(table, layout)
        self.assertAlmostEqual(result.dropped['uncovered'], 0.1)
        self.assertAlmostEqual(result.rates[1], 0.05)
        self.assertTrue(layout.uncovered('IIZ'))

    def test_rows_carry_location_count(self):
        "Table rows report k for each string."
        layout = twirl.GateLayout.cnot_round(REGION, CNOT_PAIRS)
        table = twirl.PauliErrorTable.from_entries(
            {'IIIIII': 0.9, 'ZZZIII': 0.06, 'XIIIII': 0.04}, 6)
        rows = table.to_rows(layout, count=2)
        self.assertEqual(rows, [{'pauli': 'IIIIII', 'rate': 0.9, 'k': 0},
                                {'pauli': 'ZZZIII', 'rate': 0.06, 'k': 2}])

    def test_qubit_mismatch(self):
        "A table and layout of different sizes are refused."
        layout = twirl.GateLayout.single_qubit_round(REGION)
        with self.assertRaises(ValueError):
            twirl.extract_lcpem(twirl.twirl_unitary(np.eye(4)), layout)


class TestLcpemParams(unittest.TestCase):
    """Rate bookkeeping for the sampler.
    """

    def test_decoherence(self):
        "Decoherence adds j r t to the 1-location rate."
        params = twirl.LcpemParams(p1_2q=1e-4, r=1e-5)
        self.assertAlmostEqual(params.gate_rates(2)[0], 1e-4 + 2 * 1e-5 * 130)
        self.assertAlmostEqual(params.idle_rate(500.0), 5e-3)
        with self.assertRaises(InvalidRateError):
            twirl.add_decoherence(0.0, 2, 1e-2, 130.0)

    def test_validation(self):
        "Rates outside [0, 1] or summing above 1 are refused."
        with self.assertRaises(InvalidRateError):
            twirl.LcpemParams(p1_1q=1.5)
        with self.assertRaises(InvalidRateError):
            twirl.LcpemParams(p1_1q=0.6, p2_1q=0.6)
        with self.assertRaises(InvalidRateError):
            twirl.LcpemParams(t_2q=0.0)

    def test_without_correlations(self):
        "Dropping correlations keeps only the 1-location rates."
        params = twirl.LcpemParams(p1_1q=1e-3, p2_1q=2e-3, p3_2q=3e-3)
        plain = params.without_correlations()
        self.assertEqual(plain.rates(), (1e-3, 0.0, 0.0, 0.0, 0.0, 0.0))

    def test_from_extractions_clamps(self):
        "Slightly negative extracted rates are clamped to zero."
        one = twirl.LcpemExtraction({1: -1e-18, 2: 1e-5, 3: 2e-6},
                                    {1: 6, 2: 7, 3: 10}, {}, {}, [])
        two = twirl.LcpemExtraction({1: 1e-4, 2: 3e-4, 3: 1e-4},
                                    {1: 3, 2: 2, 3: 1}, {}, {}, [])
        params = twirl.LcpemParams.from_extractions(one, two, r=1e-5)
        self.assertEqual(params.p1_1q, 0.0)
        self.assertEqual(params.p2_2q, 3e-4)
        self.assertEqual(params.r, 1e-5)
