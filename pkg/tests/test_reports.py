"""Tests for report writers and the coefficient cache.
"""

import csv
import json
import os
import tempfile
import unittest

import numpy as np

from fluxqec.core import cache_tools, reports
from fluxqec.core.config import load_config
from fluxqec.core.twirl import LcpemParams


class TestWriters(unittest.TestCase):
    """JSON, YAML, CSV and gnuplot output.
    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name):
        "File under a fresh temporary directory."
        return os.path.join(self.tmp.name, 'sub', name)

    def test_json_sorted(self):
        "JSON keys are sorted and numpy values converted."
        path = reports.write_json(self.path('out.json'),
                                  {'b': np.arange(3), 'a': 0.5})
        with open(path) as my_fd:
            text = my_fd.read()
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(json.loads(text)['b'], [0, 1, 2])

    def test_csv_header(self):
        "Rows follow the fixed header and unknown keys are refused."
        path = reports.write_csv(self.path('rates.csv'),
                                 [{'pauli': 'XI', 'rate': 0.1, 'k': 1}],
                                 reports.PAULI_HEADER)
        with open(path) as my_fd:
            rows = list(csv.reader(my_fd))
        self.assertEqual(rows[0], list(reports.PAULI_HEADER))
        self.assertEqual(rows[1], ['XI', '0.1', '1'])
        with self.assertRaises(ValueError):
            reports.write_csv(self.path('bad.csv'), [{'paulis': 'XI'}],
                              reports.PAULI_HEADER)

    def test_gnuplot(self):
        "Scripts reference the data by base name and select series."
        data = self.path('curves.csv')
        path = reports.write_gnuplot(
            self.path('curves.gp'), data, 'p', 'failure_rate',
            reports.BALLISTIC_HEADER, [('d=8', {'distance': 8})],
            error_column='stderr', logscale='y')
        with open(path) as my_fd:
            text = my_fd.read()
        self.assertIn('set output "curves.png"', text)
        self.assertIn('"curves.csv" using 2:($1==8 ? $3 : 1/0):4', text)
        self.assertIn('yerrorlines title "d=8"', text)
        self.assertIn('set logscale y', text)

    def test_yaml_loads_back(self):
        "Written YAML is a config load_config accepts."
        path = reports.write_yaml(self.path('exp.yaml'), {
            'preset': 'table_two', 'qec': {'distances': np.array([3, 5])},
            'seeds': {'master': 1, 'disorder': 0, 'optimizer': 0}})
        cfg = load_config(path)
        self.assertEqual(cfg.section('qec')['distances'], [3, 5])

    def test_show_table(self):
        "Tables have one line per row plus two header lines."
        text = reports.show_table([{'a': 1, 'b': 2.5}, {'a': 3, 'b': 4}])
        self.assertEqual(len(text.splitlines()), 4)


class TestCache(unittest.TestCase):
    """Stable keys and the shared coefficient table.
    """

    def tearDown(self):
        cache_tools.CoefficientCache.clear()

    def test_params_key(self):
        "Keys ignore float noise but not real changes."
        params = LcpemParams(p1_2q=1e-4, p_measure=0.01)
        same = params.replace(p1_2q=1e-4 * (1 + 1e-15))
        other = params.replace(p1_2q=2e-4)
        key = cache_tools.params_key(5, 5, params)
        self.assertEqual(key, cache_tools.params_key(5, 5, same))
        self.assertNotEqual(key, cache_tools.params_key(5, 5, other))
        self.assertNotEqual(key, cache_tools.params_key(5, 3, params))

    def test_store_and_clear(self):
        "Stored values come back until the table is cleared."
        cache_tools.CoefficientCache.store('k', 1)
        cache_tools.CoefficientCache.store('k', 2)
        self.assertEqual(cache_tools.CoefficientCache.lookup('k'), 2)
        cache_tools.CoefficientCache.clear()
        self.assertIsNone(cache_tools.CoefficientCache.lookup('k'))

    def test_unhashable(self):
        "Objects without a JSON form are refused."
        with self.assertRaises(TypeError):
            cache_tools.stable_hash({'x': object()})
