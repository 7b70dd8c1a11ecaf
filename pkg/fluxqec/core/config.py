"""Experiment configuration: YAML files with unit-suffixed keys.

A file may start from a bundled preset (`preset: table_one`) and override
any value. Unknown keys, missing seeds and malformed values raise
ConfigError so a typo never silently falls back to a default.
"""

import copy
import dataclasses
import logging
import os
import typing

import yaml

from fluxqec.core import presets
from fluxqec.core.control import GateSchedule
from fluxqec.core.device import (
    ENERGY_FIELDS, Coord, FluxoniumParams, LatticeSpec, parse_site_name,
    pattern_labels)
from fluxqec.core.errors import ConfigError
from fluxqec.core.optim import HamiltonianParams
from fluxqec.core.twirl import RATE_NAMES, LcpemParams


SCHEMA = {
    'preset': None,
    'output_dir': None,
    'dt_ns': None,
    'device': {'width', 'height', 'row_shift', 'base_params', 'j_c_ghz',
               'j_l_ghz', 'disorder_sigma', 'keep_levels', 'region',
               'oscillator_basis_size'},
    'schedules': {'one_qubit', 'two_qubit'},
    'lcpem': set(RATE_NAMES) | {'p_reset', 'p_measure', 'r_ghz', 't_1q_ns',
                                't_2q_ns', 't_reset_ns', 't_measure_ns'},
    'qec': {'distances', 'rounds', 'shots', 'r_sweep_ghz', 'chunk_size'},
    'optimizer': {'iterations', 'learning_rate', 'patience', 'restarts',
                  'jitter'},
    'gradient': {'fd_shots', 'distance', 'rounds', 'rel_step', 'abs_step',
                 'step_ghz2', 'iterations'},
    'toy': {'distances', 'p_values', 'shots', 'low_p_distance', 'low_p',
            'max_errors', 'fidelity_max_qubits'},
    'scan': {'pair', 'j_c_ghz', 'j_l_ghz'},
    'seeds': {'master', 'disorder', 'optimizer'},
}
SCHEDULE_KEYS = {'region', 'target', 'cnot_pairs', 'idle_duration_ns',
                 'drives', 'compensation'}
BASE_PARAM_KEYS = {'e_c_ghz', 'e_j_ghz', 'e_l_ghz', 'phi_ext_rad'}
LCPEM_RENAMES = {'r_ghz': 'r', 't_1q_ns': 't_1q', 't_2q_ns': 't_2q',
                 't_reset_ns': 't_reset', 't_measure_ns': 't_measure'}

DEFAULTS = {
    'qec': {'distances': [3, 5], 'rounds': None, 'shots': 10000,
            'r_sweep_ghz': [], 'chunk_size': 2048},
    'optimizer': {'iterations': 50, 'learning_rate': 0.01, 'patience': 10,
                  'restarts': 1, 'jitter': 1e-3},
    'gradient': {'fd_shots': 100000, 'distance': 7, 'rounds': None,
                 'rel_step': 0.1, 'abs_step': 1e-5, 'step_ghz2': 0.01,
                 'iterations': 1},
    'toy': {'distances': [8, 12], 'p_values': [0.09, 0.1, 0.11],
            'shots': 10000, 'low_p_distance': 4, 'low_p': 1e-4,
            'max_errors': 3, 'fidelity_max_qubits': 4},
}


def deep_merge(base: dict, override: dict) -> dict:
    """Recursively merge override into a copy of base.

>>> deep_merge({'a': {'b': 1, 'c': 2}}, {'a': {'c': 3}})
{'a': {'b': 1, 'c': 3}}
    """
    result = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = deep_merge(result[key], value)
        else:
            result[key] = copy.deepcopy(value)
    return result


def validate_schema(data: dict):
    """Raise ConfigError for unknown sections or keys.

>>> validate_schema({'seeds': {'master': 1, 'bogus': 2}})
Traceback (most recent call last):
...
fluxqec.core.errors.ConfigError: Unknown keys in seeds: ['bogus']
    """
    if not isinstance(data, dict):
        raise ConfigError('Config must be a mapping, got %s' % type(data))
    unknown = sorted(set(data) - set(SCHEMA))
    if unknown:
        raise ConfigError('Unknown config sections: %s' % unknown)
    for section, allowed in SCHEMA.items():
        if allowed is None or section not in data:
            continue
        value = data[section]
        if not isinstance(value, dict):
            raise ConfigError('Section %s must be a mapping' % section)
        extra = sorted(set(value) - allowed)
        if extra:
            raise ConfigError('Unknown keys in %s: %s' % (section, extra))
    for name, sched in data.get('schedules', {}).items():
        extra = sorted(set(sched) - SCHEDULE_KEYS)
        if extra:
            raise ConfigError('Unknown keys in schedules.%s: %s' % (
                name, extra))
    for label, params in data.get('device', {}).get(
            'base_params', {}).items():
        extra = sorted(set(params) - BASE_PARAM_KEYS)
        if extra:
            raise ConfigError('Unknown keys in base_params.%s: %s' % (
                label, extra))


@dataclasses.dataclass
class ExperimentConfig:
    """Validated experiment settings.

    data holds every section after merging preset, defaults and file; the
    builder methods turn sections into domain objects.
    """

    data: typing.Dict[str, typing.Any]
    source: typing.Optional[str] = None

    def __post_init__(self):
        validate_schema(self.data)
        seeds = self.data.get('seeds')
        missing = [name for name in sorted(SCHEMA['seeds'])
                   if seeds is None or seeds.get(name) is None]
        if missing:
            raise ConfigError('Seeds must be explicit; missing %s' % missing)
        for name, value in seeds.items():
            if not isinstance(value, int) or not 0 <= value < 2 ** 64:
                raise ConfigError('Seed %s=%r is not an unsigned 64-bit int'
                                  % (name, value))

    def section(self, name: str) -> typing.Dict[str, typing.Any]:
        "A section merged over its defaults."
        return deep_merge(DEFAULTS.get(name, {}), self.data.get(name, {}))

    @property
    def seeds(self) -> typing.Dict[str, int]:
        "The three explicit seeds."
        return dict(self.data['seeds'])

    @property
    def output_dir(self) -> str:
        "Directory for every written file."
        return self.data.get('output_dir') or os.path.join('.', 'fqout')

    @property
    def dt(self) -> typing.Optional[float]:
        "Trotter step override in ns."
        value = self.data.get('dt_ns')
        return None if value is None else _positive('dt_ns', value)

    def lattice(self) -> LatticeSpec:
        "LatticeSpec from the device section."
        dev = self.data.get('device')
        if not dev:
            raise ConfigError('Config has no device section')
        try:
            width, height = int(dev['width']), int(dev['height'])
            base = {}
            for label, values in dev['base_params'].items():
                kwargs = {name: float(values[name + '_ghz'])
                          for name in ENERGY_FIELDS}
                if 'phi_ext_rad' in values:
                    kwargs['phi_ext'] = float(values['phi_ext_rad'])
                base[int(label)] = FluxoniumParams(**kwargs)
            return LatticeSpec(
                width=width, height=height,
                site_labels=pattern_labels(width, height,
                                           int(dev.get('row_shift', 2))),
                base_params=base, disorder_seed=self.seeds['disorder'],
                disorder_sigma=float(dev.get('disorder_sigma', 0.01)),
                j_c=float(dev.get('j_c_ghz', 0.0)),
                j_l=float(dev.get('j_l_ghz', 0.0)),
                keep_levels=int(dev.get('keep_levels', 4)))
        except KeyError as problem:
            raise ConfigError('Missing device key %s' % problem) from None
        except (TypeError, ValueError) as problem:
            raise ConfigError('Bad device section: %s' % problem) from None

    def region(self) -> typing.List[Coord]:
        "Simulated sites in tensor-product order."
        names = self.data.get('device', {}).get('region')
        if not names:
            raise ConfigError('device.region must list site names')
        try:
            return [parse_site_name(n) for n in names]
        except ValueError as problem:
            raise ConfigError(str(problem)) from None

    @property
    def oscillator_basis_size(self) -> int:
        "Harmonic-oscillator basis size per fluxonium."
        return int(self.data.get('device', {}).get(
            'oscillator_basis_size', 60))

    def schedules(self) -> typing.Dict[str, GateSchedule]:
        "Gate schedules keyed by round name ('1q', '2q')."
        result = {}
        for key, round_name in (('one_qubit', '1q'), ('two_qubit', '2q')):
            raw = self.data.get('schedules', {}).get(key)
            if raw is None:
                continue
            try:
                result[round_name] = GateSchedule.from_dict(raw)
            except (KeyError, TypeError, ValueError) as problem:
                raise ConfigError('Bad schedules.%s: %s' % (
                    key, problem)) from None
        return result

    def hamiltonian_params(self) -> HamiltonianParams:
        "Device plus controls as one parameter set."
        return HamiltonianParams(self.lattice(), self.schedules(),
                                 oscillator_basis_size=(
                                     self.oscillator_basis_size))

    def lcpem_params(self, **overrides) -> LcpemParams:
        "LcpemParams from the lcpem section, then overrides."
        values = {}
        for key, value in self.data.get('lcpem', {}).items():
            values[LCPEM_RENAMES.get(key, key)] = float(value)
        values.update(overrides)
        try:
            return LcpemParams(**values)
        except ValueError as problem:
            raise ConfigError('Bad lcpem section: %s' % problem) from None


def _positive(name: str, value) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError('%s must be a number, got %r' % (
            name, value)) from None
    if not value > 0:
        raise ConfigError('%s must be positive, got %s' % (name, value))
    return value


def config_from_dict(data: typing.Dict[str, typing.Any],
                     seed: typing.Optional[int] = None,
                     output_dir: typing.Optional[str] = None,
                     source: typing.Optional[str] = None) -> ExperimentConfig:
    """Build an ExperimentConfig, expanding a preset and applying overrides.

    :param data:  Parsed config.

    :param seed:  Replaces seeds.master when given.

    :param output_dir:  Replaces output_dir when given.
    """
    data = dict(data or {})
    name = data.pop('preset', None)
    if name is not None:
        try:
            data = deep_merge(presets.preset_config(name), data)
        except ValueError as problem:
            raise ConfigError(str(problem)) from None
    if seed is not None:
        data.setdefault('seeds', {})
        data['seeds'] = dict(data['seeds'], master=int(seed))
    if output_dir is not None:
        data['output_dir'] = output_dir
    return ExperimentConfig(data, source)


def load_config(path: str, seed: typing.Optional[int] = None,
                output_dir: typing.Optional[str] = None) -> ExperimentConfig:
    """Read a YAML experiment file.

    :param path:  File to read with yaml.safe_load.

    :param seed:  Optional override of seeds.master.

    :param output_dir:  Optional override of output_dir.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  ExperimentConfig. Raises ConfigError for unreadable or
              invalid files.
    """
    logging.info('Loading config %s', path)
    try:
        with open(path) as my_fd:
            data = yaml.safe_load(my_fd)
    except (OSError, yaml.YAMLError) as problem:
        raise ConfigError('Cannot read config %s: %s' % (
            path, problem)) from None
    return config_from_dict(data or {}, seed, output_dir, source=path)
