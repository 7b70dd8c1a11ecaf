"""Writers for the JSON, CSV and gnuplot files every command emits.
"""

import csv
import json
import logging
import os
import typing

import yaml
from tabulate import tabulate

from fluxqec.core.cache_tools import json_default


FREQUENCY_HEADER = ('site', 'label', 'omega_01_ghz')
WALSH_HEADER = ('bitstring', 'weight', 'coeff_ghz', 'abs_coeff_ghz')
WALSH_WEIGHT_HEADER = ('weight', 'bitstring', 'max_abs_coeff_ghz')
ZZ_SCAN_HEADER = ('j_c_ghz', 'j_l_ghz', 'c11_ghz')
PAULI_HEADER = ('pauli', 'rate', 'k')
TRACE_HEADER = ('iteration', 'objective', 'step_norm', 'accepted')
QEC_HEADER = ('distance', 'rounds', 'r_ghz', 'correlated', 'p_logical',
              'stderr', 'failures', 'shots', 'seed', 'params_hash')
GRADIENT_HEADER = ('parameter', 'gradient', 'units')
GRADIENT_TRACE_HEADER = ('iteration', 'objective', 'p1_1q', 'p2_1q',
                         'p3_1q', 'p1_2q', 'p2_2q', 'p3_2q', 'params_hash')
BALLISTIC_HEADER = ('distance', 'p', 'failure_rate', 'stderr', 'shots')
FOUR_COPY_HEADER = ('distance', 'p', 'ballistic', 'ballistic_stderr',
                    'four_mono', 'four_mono_stderr', 'z_score')
BLINDNESS_HEADER = ('num_qubits', 'flip_probability', 'average_fidelity')


def ensure_dir(path: str) -> str:
    "Create path (and parents) if needed and return it."
    os.makedirs(path, exist_ok=True)
    return path


def write_json(path: str, data: typing.Any) -> str:
    """Write data as JSON with sorted keys and 2-space indent.

    numpy arrays and objects with to_dict are converted on the way.
    """
    ensure_dir(os.path.dirname(path) or '.')
    with open(path, 'w') as my_fd:
        json.dump(data, my_fd, sort_keys=True, indent=2, default=json_default)
        my_fd.write('\n')
    logging.info('Wrote %s', path)
    return path


def write_yaml(path: str, data: typing.Any) -> str:
    "Write plain data as YAML that load_config can read back."
    ensure_dir(os.path.dirname(path) or '.')
    data = json.loads(json.dumps(data, default=json_default))
    with open(path, 'w') as my_fd:
        yaml.safe_dump(data, my_fd, sort_keys=True)
    logging.info('Wrote %s', path)
    return path


def write_csv(path: str,
              rows: typing.Iterable[typing.Mapping[str, typing.Any]],
              header: typing.Sequence[str]) -> str:
    """Write rows under a fixed header.

    :param path:  Output file.

    :param rows:  Dicts; keys outside header raise ValueError so headers
                  never drift silently.

    :param header:  Column names in output order. Missing keys are blank.
    """
    ensure_dir(os.path.dirname(path) or '.')
    with open(path, 'w', newline='') as my_fd:
        writer = csv.DictWriter(my_fd, fieldnames=list(header),
                                extrasaction='raise')
        writer.writeheader()
        for row in rows:
            writer.writerow(dict(row))
    logging.info('Wrote %s', path)
    return path


def show_table(rows: typing.Sequence[typing.Mapping[str, typing.Any]],
               title: typing.Optional[str] = None,
               floatfmt: str = '.4g') -> str:
    """Format rows with tabulate and log them at INFO.

>>> print(show_table([{'pauli': 'XI', 'rate': 0.25}]))
pauli      rate
-------  ------
XI         0.25
    """
    text = tabulate(rows, headers='keys', floatfmt=floatfmt)
    if title:
        logging.info('%s\n%s', title, text)
    else:
        logging.info('\n%s', text)
    return text


def write_gnuplot(path: str, data_file: str, x_column: str, y_column: str,
                  header: typing.Sequence[str],
                  series: typing.Sequence[typing.Tuple[
                      str, typing.Mapping[str, typing.Any]]],
                  error_column: typing.Optional[str] = None,
                  logscale: str = 'xy', xlabel: typing.Optional[str] = None,
                  ylabel: typing.Optional[str] = None) -> str:
    """Write a gnuplot script plotting one curve per series of a CSV.

    :param path:  Script to write; the PNG goes next to it.

    :param data_file:  CSV written with header; referenced by base name so
                       the script runs from the output directory.

    :param x_column, y_column:  Header names for the axes.

    :param header:  Header of data_file, used to find column numbers.

    :param series:  (title, {column: value}) pairs; a row belongs to a
                    series when every listed column equals its value.

    :param error_column:  Optional column drawn as y error bars.
    """
    index = {name: number + 1 for number, name in enumerate(header)}
    base = os.path.splitext(os.path.basename(path))[0]
    lines = ['set datafile separator ","',
             'set key left',
             'set terminal pngcairo size 900,600',
             'set output "%s.png"' % base,
             'set xlabel "%s"' % (xlabel or x_column),
             'set ylabel "%s"' % (ylabel or y_column)]
    if logscale:
        lines.append('set logscale %s' % logscale)
    plots = []
    for title, match in series:
        condition = ' && '.join('$%i==%s' % (index[col], value)
                                for col, value in sorted(match.items()))
        y_expr = '(%s ? $%i : 1/0)' % (condition or '1', index[y_column])
        using = '%i:%s' % (index[x_column], y_expr)
        style = 'linespoints'
        if error_column:
            using += ':%i' % index[error_column]
            style = 'yerrorlines'
        plots.append('"%s" using %s every ::1 with %s title "%s"' % (
            os.path.basename(data_file), using, style, title))
    lines.append('plot ' + ', \\\n     '.join(plots))
    ensure_dir(os.path.dirname(path) or '.')
    with open(path, 'w') as my_fd:
        my_fd.write('\n'.join(lines) + '\n')
    logging.info('Wrote %s', path)
    return path
