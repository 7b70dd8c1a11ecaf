"""Bundled device, control and noise settings.

table_one is the 6-fluxonium operating point before the device update and
table_two the LCPEM rates extracted after it. A config selects one with
`preset: table_one` and may override any value.
"""

import logging
import typing

from fluxqec.core.control import (
    Compensation, CosineEnvelope, DriveSpec, FlatTopEnvelope, GateSchedule)
from fluxqec.core.device import (
    Coord, FluxoniumParams, LatticeSpec, pattern_labels)
from fluxqec.core.twirl import LcpemParams


REGION = [(0, 2), (0, 3), (1, 2), (1, 3), (2, 2), (2, 3)]
CNOT_PAIRS = [((0, 2), (0, 3)), ((1, 2), (1, 3)), ((2, 2), (2, 3))]

BASE_ENERGIES_GHZ = {
    1: (1.0, 4.0, 1.1),
    2: (1.0, 4.0, 1.2),
    3: (1.0, 4.0, 1.0),
    4: (1.0, 4.0, 0.8),
    5: (1.0, 4.0, 0.9),
}
J_C_GHZ = 1.15e-2
J_L_GHZ = -2.0e-3

# site: (amplitude GHz, t_gate ns, drive frequency GHz)
ONE_QUBIT_DRIVES = {
    'Q02': (1.184e-2, 40.06, 0.5708),
    'Q03': (1.085e-2, 40.04, 0.4155),
    'Q12': (1.141e-2, 40.05, 0.5048),
    'Q13': (1.227e-2, 40.04, 0.6678),
    'Q22': (1.274e-2, 40.04, 0.7963),
    'Q23': (1.167e-2, 40.04, 0.5591),
}

# control site: (amplitude GHz, t_ramp ns, t_plateau ns, drive frequency GHz)
CR_DRIVES = {
    'Q02': (3.082e-2, 30.20, 70.00, 0.4191),
    'Q12': (2.882e-2, 29.98, 70.00, 0.6655),
    'Q22': (3.390e-2, 30.07, 69.94, 0.5592),
}

TABLE_TWO_RATES = {
    'p1_1q': 8.419e-8, 'p2_1q': 4.466e-5, 'p3_1q': 1.706e-5,
    'p1_2q': 7.390e-6, 'p2_2q': 2.501e-4, 'p3_2q': 1.088e-4,
}
TABLE_TWO_SPAM = {'p_reset': 5e-3, 'p_measure': 1e-2, 'r': 1e-5,
                  't_1q': 40.0, 't_2q': 130.0, 't_reset': 160.0,
                  't_measure': 500.0}


def table_one_lattice(width: int = 5, height: int = 3,
                      disorder_seed: int = 0, disorder_sigma: float = 0.0,
                      keep_levels: int = 4) -> LatticeSpec:
    """Lattice with the bundled base energies and couplings.

>>> spec = table_one_lattice()
>>> [spec.site_labels[c] for c in REGION]
[3, 4, 5, 1, 2, 3]
    """
    base = {label: FluxoniumParams(*values)
            for label, values in BASE_ENERGIES_GHZ.items()}
    return LatticeSpec(width=width, height=height,
                       site_labels=pattern_labels(width, height),
                       base_params=base, disorder_seed=disorder_seed,
                       disorder_sigma=disorder_sigma, j_c=J_C_GHZ,
                       j_l=J_L_GHZ, keep_levels=keep_levels)


def one_qubit_schedule(region: typing.Sequence[Coord] = tuple(REGION)
                       ) -> GateSchedule:
    "Simultaneous X on every region site with the bundled cosine drives."
    drives = []
    for coord in region:
        name = 'Q%i%i' % coord
        if name not in ONE_QUBIT_DRIVES:
            raise ValueError('No bundled 1q drive for %s' % name)
        amplitude, t_gate, freq = ONE_QUBIT_DRIVES[name]
        drives.append(DriveSpec(coord, amplitude, freq, 0.0,
                                CosineEnvelope(t_gate)))
    return GateSchedule(list(region), drives,
                        Compensation.zeros(len(region), 'z'), 'x')


def two_qubit_schedule(region: typing.Sequence[Coord] = tuple(REGION),
                       pairs: typing.Sequence[typing.Tuple[
                           Coord, Coord]] = tuple(CNOT_PAIRS)
                       ) -> GateSchedule:
    "Simultaneous cross-resonance CNOTs with the bundled flat-top drives."
    drives = []
    for control, _target in pairs:
        amplitude, ramp, plateau, freq = CR_DRIVES['Q%i%i' % control]
        drives.append(DriveSpec(control, amplitude, freq, 0.0,
                                FlatTopEnvelope(ramp, plateau)))
    return GateSchedule(list(region), drives,
                        Compensation.zeros(len(region), 'euler'), 'cnot',
                        list(pairs))


def table_two_lcpem(**overrides) -> LcpemParams:
    """Bundled LCPEM rates plus SPAM and decoherence settings.

>>> table_two_lcpem(r=0.0).p2_2q
0.0002501
    """
    values = dict(TABLE_TWO_RATES)
    values.update(TABLE_TWO_SPAM)
    values.update(overrides)
    return LcpemParams(**values)


def preset_config(name: str) -> typing.Dict[str, typing.Any]:
    """Config sections of a named preset, in the same schema as YAML files.
    """
    if name not in PRESETS:
        raise ValueError('Unknown preset %r; choose from %s' % (
            name, sorted(PRESETS)))
    logging.debug('Loading preset %s', name)
    return PRESETS[name]()


def _device_section() -> typing.Dict[str, typing.Any]:
    return {
        'width': 5, 'height': 3, 'row_shift': 2,
        'base_params': {label: {'e_c_ghz': e_c, 'e_j_ghz': e_j,
                                'e_l_ghz': e_l}
                        for label, (e_c, e_j, e_l)
                        in BASE_ENERGIES_GHZ.items()},
        'j_c_ghz': J_C_GHZ, 'j_l_ghz': J_L_GHZ,
        'disorder_sigma': 0.0, 'keep_levels': 4,
        'region': ['Q%i%i' % c for c in REGION]}


def _table_one() -> typing.Dict[str, typing.Any]:
    return {'device': _device_section(),
            'schedules': {'one_qubit': one_qubit_schedule().to_dict(),
                          'two_qubit': two_qubit_schedule().to_dict()}}


def _table_two() -> typing.Dict[str, typing.Any]:
    result = _table_one()
    lcpem = dict(TABLE_TWO_RATES)
    lcpem.update({'p_reset': TABLE_TWO_SPAM['p_reset'],
                  'p_measure': TABLE_TWO_SPAM['p_measure'],
                  'r_ghz': TABLE_TWO_SPAM['r'],
                  't_1q_ns': TABLE_TWO_SPAM['t_1q'],
                  't_2q_ns': TABLE_TWO_SPAM['t_2q'],
                  't_reset_ns': TABLE_TWO_SPAM['t_reset'],
                  't_measure_ns': TABLE_TWO_SPAM['t_measure']})
    result['lcpem'] = lcpem
    return result


PRESETS = {'table_one': _table_one, 'table_two': _table_two}
