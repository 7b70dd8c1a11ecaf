"""Tests for the toric ballistic model and the small exact references.
"""

import os
import unittest

import numpy as np

from fluxqec.core import oracle
from fluxqec.core.circuit import build_syndrome_circuit
from fluxqec.core.decode import build_detector_graph
from fluxqec.core.errors import InfeasibleSizeError, InputCorruptionError
from fluxqec.core.twirl import PauliErrorTable


SLOW = os.environ.get('FLUXQEC_SLOW') == '1'


def single_event(layout, qubit):
    "Flips of one ballistic event starting at qubit."
    events = np.zeros(layout.num_qubits, dtype=bool)
    events[qubit] = True
    return layout.ballistic_flips(events)


class TestToricLayout(unittest.TestCase):
    """Plaquettes, logicals and ballistic partners.
    """

    def test_every_edge_in_two_plaquettes(self):
        "Each edge belongs to exactly two plaquettes."
        layout = oracle.ToricLayout(4)
        np.testing.assert_array_equal(layout.checks.sum(axis=0), 2)
        np.testing.assert_array_equal(layout.checks.sum(axis=1), 4)

    def test_color_conservation(self):
        "A ballistic event fires two plaquettes of the same color."
        for distance in (4, 6, 8):
            layout = oracle.ToricLayout(distance)
            for qubit in range(layout.num_qubits):
                fired = np.flatnonzero(layout.syndrome(
                    single_event(layout, qubit)))
                self.assertEqual(len(fired), 2)
                self.assertEqual(layout.color(int(fired[0])),
                                 layout.color(int(fired[1])))

    def test_logical_flags(self):
        "A column of horizontal edges is an undetected logical."
        layout = oracle.ToricLayout(4)
        flips = np.zeros(layout.num_qubits, dtype=bool)
        flips[[layout.h(row, 1) for row in range(4)]] = True
        self.assertFalse(layout.syndrome(flips).any())
        self.assertEqual(list(layout.logical_flags(flips)), [True, False])


class TestBallisticSampling(unittest.TestCase):
    """Sampling of weight-2 events.
    """

    def test_extremes(self):
        "p=0 flips nothing and p=1 cancels every pair."
        layout = oracle.ToricLayout(4)
        self.assertFalse(oracle.ballistic_sample(layout, 0.0, 1, 5).any())
        self.assertFalse(oracle.ballistic_sample(layout, 1.0, 1, 5).any())
        with self.assertRaises(ValueError):
            oracle.ballistic_sample(layout, 1.5, 1)

    def test_marginal(self):
        "Each qubit flips when exactly one of its two events fires."
        layout = oracle.ToricLayout(4)
        p = 0.05
        flips = oracle.ballistic_sample(layout, p, seed=7, shots=2000)
        self.assertAlmostEqual(flips.mean(), 2 * p * (1 - p), delta=0.006)

    def test_seeded(self):
        "Explicit shot numbers reproduce the same rows."
        layout = oracle.ToricLayout(6)
        batch = oracle.ballistic_sample(layout, 0.1, 3, 10)
        again = oracle.ballistic_sample(layout, 0.1, 3, [4, 7])
        np.testing.assert_array_equal(batch[[4, 7]], again)


class TestSplitDecoder(unittest.TestCase):
    """Decoding the four color classes separately.
    """

    def test_single_event(self):
        "One ballistic event is corrected without a logical flip."
        layout = oracle.ToricLayout(6)
        for qubit in range(layout.num_qubits):
            flips = single_event(layout, qubit)
            found = oracle.symmetry_split_decode(layout,
                                                 layout.syndrome(flips))
            np.testing.assert_array_equal(found.flags,
                                          layout.logical_flags(flips))

    def test_correction_annihilates(self):
        "Corrections reproduce the syndrome of sampled ballistic errors."
        layout = oracle.ToricLayout(8)
        flips = oracle.ballistic_sample(layout, 0.05, seed=2, shots=20)
        for row in flips:
            syndrome = layout.syndrome(row)
            found = oracle.symmetry_split_decode(layout, syndrome)
            correction = np.zeros(layout.num_qubits, dtype=bool)
            correction[found.qubits] = True
            np.testing.assert_array_equal(layout.syndrome(correction),
                                          syndrome)

    def test_odd_class(self):
        "A lone plaquette event cannot come from ballistic noise."
        layout = oracle.ToricLayout(4)
        syndrome = np.zeros(16, dtype=bool)
        syndrome[5] = True
        with self.assertRaises(InputCorruptionError):
            oracle.symmetry_split_decode(layout, syndrome)

    def test_odd_distance(self):
        "The split needs an even distance."
        with self.assertRaises(ValueError):
            oracle.symmetry_split_decode(oracle.ToricLayout(5),
                                         np.zeros(25, dtype=bool))

    def test_no_noise(self):
        "Without noise nothing fails."
        estimate = oracle.ballistic_failure_rate(4, 0.0, 100, seed=1)
        self.assertEqual(estimate.failure_rate, 0.0)
        self.assertEqual(estimate.to_dict()['shots'], 100)

    @unittest.skipUnless(SLOW, 'set FLUXQEC_SLOW=1 for toric Monte Carlo')
    def test_four_copies(self):
        "The split rate at 2d is about four times the d rate."
        shots = 100000
        split = oracle.ballistic_failure_rate(8, 0.01, shots, seed=1)
        mono = oracle.monolithic_failure_rate(4, 0.01, shots, seed=2)
        sigma = np.hypot(split.stderr, 4 * mono.stderr)
        self.assertLess(abs(split.failure_rate - 4 * mono.failure_rate),
                        3 * sigma)

    @unittest.skipUnless(SLOW, 'set FLUXQEC_SLOW=1 for toric Monte Carlo')
    def test_threshold_crossing(self):
        "Curves for d=8 and d=12 cross near p=0.103."
        p_values = [0.08, 0.09, 0.1, 0.11, 0.12]
        small = [oracle.ballistic_failure_rate(8, p, 20000, 1).failure_rate
                 for p in p_values]
        large = [oracle.ballistic_failure_rate(12, p, 20000, 1).failure_rate
                 for p in p_values]
        crossing = oracle.crossing_point(p_values, small, large)
        self.assertIsNotNone(crossing)
        self.assertTrue(0.09 <= crossing <= 0.115)


class TestLowP(unittest.TestCase):
    """Leading-order formula against exact enumeration.
    """

    def test_formula(self):
        "d=2 gives 4p and d=4 gives 24p²."
        self.assertAlmostEqual(oracle.low_p_logical(2, 0.003), 0.012)
        self.assertAlmostEqual(oracle.low_p_logical(4, 0.01), 24e-4)
        with self.assertRaises(ValueError):
            oracle.low_p_logical(3, 0.01)

    def test_enumeration_ratio(self):
        "Enumeration over three errors agrees with the formula at low p."
        for p in (1e-3, 1e-4):
            exact = oracle.enumerate_low_weight_failure(4, p, max_errors=3)
            ratio = exact / oracle.low_p_logical(4, p)
            self.assertAlmostEqual(ratio, 1.0, delta=0.1)

    def test_enumeration_limit(self):
        "Huge enumerations are refused."
        with self.assertRaises(InfeasibleSizeError):
            oracle.enumerate_low_weight_failure(12, 1e-3, max_errors=5)

    def test_no_crossing(self):
        "Curves that never cross give None."
        self.assertIsNone(oracle.crossing_point([0.1, 0.2], [1, 2], [3, 4]))


class TestAverageFidelity(unittest.TestCase):
    """Average gate fidelity of Pauli channels.
    """

    def test_weight_blindness(self):
        "A Z flip on n of four qubits gives the same fidelity for every n."
        values = []
        for n in range(1, 5):
            label = 'Z' * n + 'I' * (4 - n)
            table = PauliErrorTable.from_entries(
                {'IIII': 0.9, label: 0.1}, 4)
            values.append(oracle.average_fidelity(table))
        for value in values[1:]:
            self.assertAlmostEqual(value, values[0], places=12)

    def test_single_qubit_flip(self):
        "A Z flip with probability p on one qubit gives 1 − 2p/3."
        table = PauliErrorTable.from_entries({'I': 0.97, 'Z': 0.03}, 1)
        self.assertAlmostEqual(oracle.average_fidelity(table), 1 - 0.02)

    def test_unitary_branch(self):
        "The identity has fidelity 1 and X against I has 1/3."
        self.assertAlmostEqual(oracle.average_fidelity(np.eye(4)), 1.0)
        pauli_x = np.array([[0, 1], [1, 0]])
        self.assertAlmostEqual(
            oracle.average_fidelity(pauli_x, np.eye(2)), 1 / 3)


class TestBruteForce(unittest.TestCase):
    """Exhaustive minimum-weight decoding.
    """

    @classmethod
    def setUpClass(cls):
        cls.graph = build_detector_graph(build_syndrome_circuit(3, 1))

    def test_trivial(self):
        "Empty syndromes need nothing and single edges need one edge."
        found = oracle.brute_force_decoder(self.graph, [], max_edges=200)
        self.assertEqual(found.weight, 0)
        for index in range(0, self.graph.num_edges, 5):
            fired = self.graph.syndrome_of([index])
            found = oracle.brute_force_decoder(self.graph, fired,
                                               max_edges=200)
            self.assertEqual(found.weight, 1)

    def test_size_limit(self):
        "Graphs above the edge limit are refused."
        with self.assertRaises(InfeasibleSizeError):
            oracle.brute_force_decoder(self.graph, [0], max_edges=3)
