"""Tests for experiment configuration and presets.
"""

import os
import tempfile
import unittest

from fluxqec.core import config as fqconfig
from fluxqec.core.errors import ConfigError
from fluxqec.core.presets import REGION, TABLE_TWO_RATES


SEEDS = {'master': 1, 'disorder': 2, 'optimizer': 3}


class TestPresets(unittest.TestCase):
    """Bundled operating points.
    """

    def test_table_one(self):
        "The first preset builds the 6-site region with both rounds."
        cfg = fqconfig.config_from_dict({'preset': 'table_one',
                                         'seeds': SEEDS})
        self.assertEqual(cfg.region(), REGION)
        lattice = cfg.lattice()
        self.assertEqual(lattice.keep_levels, 4)
        self.assertEqual(lattice.disorder_seed, 2)
        self.assertEqual(sorted(cfg.schedules()), ['1q', '2q'])
        params = cfg.hamiltonian_params()
        self.assertEqual(params.get('device.label3.e_j'), 4.0)

    def test_table_two_rates(self):
        "The second preset carries rates and renamed SPAM settings."
        cfg = fqconfig.config_from_dict({'preset': 'table_two',
                                         'seeds': SEEDS})
        params = cfg.lcpem_params()
        self.assertEqual(params.p2_2q, TABLE_TWO_RATES['p2_2q'])
        self.assertEqual(params.r, 1e-5)
        self.assertEqual(params.t_measure, 500.0)
        self.assertEqual(cfg.lcpem_params(r=0.0).r, 0.0)

    def test_override_merges(self):
        "File values override the preset key by key."
        cfg = fqconfig.config_from_dict({
            'preset': 'table_one', 'seeds': SEEDS,
            'device': {'keep_levels': 3, 'j_c_ghz': 0.0}})
        lattice = cfg.lattice()
        self.assertEqual(lattice.keep_levels, 3)
        self.assertEqual(lattice.j_c, 0.0)
        self.assertEqual(lattice.width, 5)

    def test_unknown_preset(self):
        "Unknown preset names are config errors."
        with self.assertRaises(ConfigError):
            fqconfig.config_from_dict({'preset': 'table_nine',
                                       'seeds': SEEDS})


class TestValidation(unittest.TestCase):
    """Rejection of malformed configs.
    """

    def test_unknown_keys(self):
        "Typos in sections or keys are refused."
        for data in ({'qecc': {}}, {'qec': {'shot': 3}},
                     {'schedules': {'one_qubit': {'drive': []}}},
                     {'device': {'base_params': {1: {'e_c': 1.0}}}}):
            data = dict(data, seeds=SEEDS)
            with self.assertRaises(ConfigError, msg=str(data)):
                fqconfig.config_from_dict(data)

    def test_seeds_required(self):
        "Every seed must be given as an unsigned integer."
        with self.assertRaises(ConfigError):
            fqconfig.config_from_dict({})
        with self.assertRaises(ConfigError):
            fqconfig.config_from_dict({'seeds': {'master': 1}})
        with self.assertRaises(ConfigError):
            fqconfig.config_from_dict({'seeds': dict(SEEDS, master=-1)})
        with self.assertRaises(ConfigError):
            fqconfig.config_from_dict({'seeds': dict(SEEDS, master='x')})

    def test_bad_values(self):
        "Non-positive steps and broken sections are config errors."
        cfg = fqconfig.config_from_dict({'seeds': SEEDS, 'dt_ns': -1})
        with self.assertRaises(ConfigError):
            cfg.dt
        with self.assertRaises(ConfigError):
            cfg.lattice()
        with self.assertRaises(ConfigError):
            cfg.region()
        cfg = fqconfig.config_from_dict({'seeds': SEEDS,
                                         'lcpem': {'p1_1q': 2.0}})
        with self.assertRaises(ConfigError):
            cfg.lcpem_params()


class TestOverrides(unittest.TestCase):
    """Command-line overrides and defaults.
    """

    def test_seed_and_output(self):
        "--seed and --out replace their config values."
        cfg = fqconfig.config_from_dict({'seeds': SEEDS}, seed=7,
                                        output_dir='/tmp/fq')
        self.assertEqual(cfg.seeds['master'], 7)
        self.assertEqual(cfg.seeds['disorder'], 2)
        self.assertEqual(cfg.output_dir, '/tmp/fq')

    def test_section_defaults(self):
        "Sections fall back to defaults key by key."
        cfg = fqconfig.config_from_dict({'seeds': SEEDS,
                                         'qec': {'shots': 5}})
        qec = cfg.section('qec')
        self.assertEqual(qec['shots'], 5)
        self.assertEqual(qec['distances'], [3, 5])
        self.assertIsNone(cfg.dt)
        self.assertEqual(cfg.output_dir, os.path.join('.', 'fqout'))


class TestLoadConfig(unittest.TestCase):
    """Reading YAML files.
    """

    def test_load(self):
        "A YAML file with a preset loads and records its path."
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'exp.yaml')
            with open(path, 'w') as my_fd:
                my_fd.write('preset: table_two\n'
                            'seeds: {master: 4, disorder: 0, optimizer: 0}\n'
                            'qec: {distances: [3], shots: 10}\n')
            cfg = fqconfig.load_config(path, seed=9)
            self.assertEqual(cfg.source, path)
            self.assertEqual(cfg.seeds['master'], 9)
            self.assertEqual(cfg.section('qec')['distances'], [3])

    def test_unreadable(self):
        "Missing files and broken YAML are config errors."
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigError):
                fqconfig.load_config(os.path.join(tmp, 'missing.yaml'))
            path = os.path.join(tmp, 'broken.yaml')
            with open(path, 'w') as my_fd:
                my_fd.write('seeds: [1, 2\n')
            with self.assertRaises(ConfigError):
                fqconfig.load_config(path)
