"""Tests for the command line and the workflow registry.
"""

import csv
import json
import os
import tempfile
import unittest

from click.testing import CliRunner

from fluxqec.core.main_flow import MainWorkflow
from fluxqec.scripts import fqcli


SEEDS = 'seeds: {master: 3, disorder: 0, optimizer: 0}\n'


class TestCommandLine(unittest.TestCase):
    """Invoking fqcli through click's test runner.
    """

    @classmethod
    def setUpClass(cls):
        fqcli.prep_cmd_line()

    def setUp(self):
        self.runner = CliRunner()
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write_config(self, text):
        "Config file in the temporary directory."
        path = os.path.join(self.tmp.name, 'exp.yaml')
        with open(path, 'w') as my_fd:
            my_fd.write(text)
        return path

    def test_topics(self):
        "topics lists every command and shows one on request."
        result = self.runner.invoke(fqcli.cli, ['topics'])
        self.assertEqual(result.exit_code, 0)
        for name in ('walsh', 'gate-errors', 'qec', 'grad', 'toy'):
            self.assertIn(name, result.output)
        result = self.runner.invoke(fqcli.cli, ['topics', 'toy'])
        self.assertIn('Help for command toy', result.output)

    def test_config_required(self):
        "Workflow commands exit with the config error code."
        result = self.runner.invoke(fqcli.cli, ['qec'])
        self.assertEqual(result.exit_code, 2)
        missing = os.path.join(self.tmp.name, 'missing.yaml')
        result = self.runner.invoke(fqcli.cli, ['--config', missing, 'qec'])
        self.assertEqual(result.exit_code, 2)
        path = self.write_config('qec: {distances: [3]}\n')
        result = self.runner.invoke(fqcli.cli, ['--config', path, 'qec'])
        self.assertEqual(result.exit_code, 2)

    def test_missing_section(self):
        "Commands refuse configs without the sections they need."
        path = self.write_config(SEEDS)
        result = self.runner.invoke(fqcli.cli, ['--config', path, 'qec'])
        self.assertEqual(result.exit_code, 2)

    def test_qec(self):
        "qec writes one row per distance and noise variant."
        path = self.write_config(
            'preset: table_two\n' + SEEDS +
            'qec: {distances: [3], rounds: 1, shots: 50}\n')
        out = os.path.join(self.tmp.name, 'out')
        result = self.runner.invoke(fqcli.cli, [
            '--config', path, '--out', out, '--seed', '11', 'qec'])
        self.assertEqual(result.exit_code, 0, result.output)
        with open(os.path.join(out, 'qec', 'qec_curves.csv')) as my_fd:
            rows = list(csv.DictReader(my_fd))
        self.assertEqual([r['correlated'] for r in rows], ['1', '0'])
        self.assertEqual({r['seed'] for r in rows}, {'11'})
        self.assertTrue(os.path.exists(
            os.path.join(out, 'qec', 'qec_curves.gp')))

    def test_toy(self):
        "toy writes its curves, the four-copy table and a summary."
        path = self.write_config(
            SEEDS + 'toy: {distances: [8, 4], p_values: [0.05], shots: 40,'
            ' low_p_distance: 4, low_p: 0.001, max_errors: 2,'
            ' fidelity_max_qubits: 2}\n')
        out = os.path.join(self.tmp.name, 'out')
        result = self.runner.invoke(fqcli.cli, [
            '--config', path, '--out', out, 'toy'])
        self.assertEqual(result.exit_code, 0, result.output)
        with open(os.path.join(out, 'toy', 'toy.json')) as my_fd:
            summary = json.load(my_fd)
        self.assertEqual(len(summary['curves']), 2)
        self.assertEqual(len(summary['four_copy']), 1)
        self.assertEqual(len(summary['fidelity_blindness']), 2)
        self.assertTrue(os.path.exists(
            os.path.join(out, 'toy', 'toy_ballistic.gp')))


class TestWorkflow(unittest.TestCase):
    """The registry behind the command line.
    """

    def test_registry(self):
        "Commands are looked up by name."
        flow = MainWorkflow()
        self.assertEqual(flow.get_cmd('qec').name(), 'qec')
        with self.assertRaises(ValueError):
            flow.get_cmd('nope')
        self.assertIn('No help available', flow.help_text('nope'))
