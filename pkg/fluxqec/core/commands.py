"""Workflow commands run by the command line.

Each command reads an ExperimentConfig, runs one stage of the pipeline and
writes its reports under <output_dir>/<command name>/.
"""

import logging
import os
import typing

import numpy as np

from fluxqec.core import reports
from fluxqec.core.cache_tools import params_key
from fluxqec.core.circuit import build_syndrome_circuit
from fluxqec.core.config import ExperimentConfig
from fluxqec.core.decode import build_detector_graph, logical_error_rate
from fluxqec.core.device import (
    build_idle_hamiltonian, lattice_frequency_table, parse_site_name,
    region_qubits)
from fluxqec.core.errors import ConfigError, FluxQecError
from fluxqec.core.evolve import (
    select_computational_basis, walsh_transform, walsh_weight_summary,
    zz_cancellation_scan)
from fluxqec.core.optim import (
    ROUND_ARITY, HamiltonianParams, chain_objective, evaluate_round,
    fd_grad_logical_wrt_lcpem, grad_lcpem_wrt_params, gradient_report,
    gradient_step, optimize_controls)
from fluxqec.core.oracle import (
    average_fidelity, ballistic_failure_rate, crossing_point,
    enumerate_low_weight_failure, low_p_logical, monolithic_failure_rate)
from fluxqec.core.twirl import (
    RATE_NAMES, LcpemParams, PauliErrorTable, extract_lcpem)


class WorkflowCmd:
    """Generic workflow command.

Sub-class this and override `run` to create a command. The class
docstring is what `fqcli topics` shows.
    """

    required_sections: typing.Tuple[str, ...] = ()

    def __init__(self, name: typing.Optional[str] = None,
                 show_help: bool = True):
        """Initializer.

        :param name=None:   String name. Must be provided.

        :param show_help=True:  Whether to include class docstring in help.

        """
        if not name:
            raise ValueError('Must provide name.')
        self._name = name
        self.show_help = show_help
        self.validate()

    def validate(self):
        """Do basic validation of parameters.
        """
        if not self._name:
            raise ValueError('No name provided')

    def name(self) -> str:
        "Return name of the command."
        return self._name

    def get_help_docs(self) -> str:
        "Docstring for this command."
        return self.__doc__ or ''

    def check_config(self, config: ExperimentConfig):
        "Raise ConfigError if a section this command needs is missing."
        missing = [s for s in self.required_sections if s not in config.data]
        if missing:
            raise ConfigError('Command %s needs config sections %s' % (
                self.name(), missing))

    def out_path(self, config: ExperimentConfig, filename: str) -> str:
        "Path of filename in this command's output directory."
        return os.path.join(config.output_dir, self.name(), filename)

    def run(self, config: ExperimentConfig,
            threads: int = 1) -> typing.Dict[str, typing.Any]:
        """Run the command.

        :param config:  Validated experiment configuration.

        :param threads:  Cap on worker processes.

        ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

        :return:  Summary dict, also written as <name>.json.
        """
        raise NotImplementedError

    def __call__(self, config: ExperimentConfig,
                 threads: int = 1) -> typing.Dict[str, typing.Any]:
        self.check_config(config)
        logging.info('Starting %s with output in %s', self.name(),
                     os.path.join(config.output_dir, self.name()))
        summary = self.run(config, threads)
        reports.write_json(self.out_path(config, self.name() + '.json'),
                           summary)
        return summary


class WalshCmd(WorkflowCmd):
    """Walsh coefficients of the idle region Hamiltonian.

Writes the lattice frequency table, every c_b sorted by |c_b| with its
weight w(b), the largest |c_b| per weight and, when the config has a
scan section, the c_11 grid over (J_C, J_L).
    """

    required_sections = ('device',)

    def __init__(self, name: str = 'walsh', **kwargs):
        super().__init__(name, **kwargs)

    def run(self, config, threads=1):
        lattice = config.lattice()
        size = config.oscillator_basis_size
        freqs = lattice_frequency_table(lattice, size)
        reports.show_table(freqs, 'Lattice frequencies (GHz)')
        reports.write_csv(self.out_path(config, 'frequencies.csv'), freqs,
                          reports.FREQUENCY_HEADER)
        region = config.region()
        terms = build_idle_hamiltonian(region_qubits(lattice, region, size),
                                       lattice, region)
        basis = select_computational_basis(terms)
        coeffs = walsh_transform(terms, basis)
        rows = coeffs.to_rows()
        weights = walsh_weight_summary(coeffs)
        reports.write_csv(self.out_path(config, 'walsh_coefficients.csv'),
                          rows, reports.WALSH_HEADER)
        reports.write_csv(self.out_path(config, 'walsh_weights.csv'),
                          weights, reports.WALSH_WEIGHT_HEADER)
        reports.show_table(weights, 'Largest |c_b| per weight')
        coupled = [r for r in rows if r['weight'] >= 2]
        summary = {'region': config.data['device']['region'],
                   'labeling_margin': basis.margin,
                   'max_coupled': coupled[0] if coupled else None,
                   'weights': weights}
        if 'scan' in config.data:
            summary['zz_scan'] = self._scan(config, lattice, size)
        return summary

    def _scan(self, config, lattice, size):
        scan_cfg = config.data['scan']
        try:
            pair = [parse_site_name(n) for n in scan_cfg['pair']]
            j_c_values = [float(v) for v in scan_cfg['j_c_ghz']]
            j_l_values = sorted(float(v) for v in scan_cfg['j_l_ghz'])
        except (KeyError, TypeError, ValueError) as problem:
            raise ConfigError('Bad scan section: %s' % problem) from None
        if len(pair) != 2:
            raise ConfigError('scan.pair needs two site names')
        qubits = region_qubits(lattice, pair, size)
        scan = zz_cancellation_scan((qubits[pair[0]], qubits[pair[1]]),
                                    j_c_values, j_l_values)
        grid = [{'j_c_ghz': float(jc), 'j_l_ghz': float(jl),
                 'c11_ghz': float(scan.grid[i, j])}
                for i, jc in enumerate(scan.j_c_values)
                for j, jl in enumerate(scan.j_l_values)]
        reports.write_csv(self.out_path(config, 'zz_scan.csv'), grid,
                          reports.ZZ_SCAN_HEADER)
        best = scan.best()
        logging.info('Smallest |c_11| = %.3g GHz at J_C=%.4g, J_L=%.4g',
                     abs(best['c11_ghz']), best['j_c_ghz'], best['j_l_ghz'])
        return {'best': best, 'zeros': scan.zeros}


class GateErrorsCmd(WorkflowCmd):
    """Pauli error tables of the 1q and 2q gate rounds.

Optionally optimizes the controls first, then extracts each round's
unitary, twirls its error and writes the 20 most likely Pauli strings
with the number k of gate locations they touch, the fidelity and leakage
of the round, the LCPEM rates and any mass on 4 or more locations.
    """

    required_sections = ('device', 'schedules')

    def __init__(self, name: str = 'gate-errors', **kwargs):
        super().__init__(name, **kwargs)

    def run(self, config, threads=1):
        params = config.hamiltonian_params()
        if not params.schedules:
            raise ConfigError('No schedules configured')
        opt = config.section('optimizer')
        summary = {'rounds': {}}
        if int(opt['iterations']) > 0:
            params = self.optimize(config, params, opt)
            reports.write_yaml(self.out_path(config, 'schedules.yaml'), {
                key: params.schedules[name].to_dict()
                for key, name in (('one_qubit', '1q'), ('two_qubit', '2q'))
                if name in params.schedules})
        extractions = {}
        for round_name in sorted(params.schedules):
            ev = evaluate_round(params, round_name, config.dt)
            table = ev.table()
            rows = table.to_rows(ev.layout, 20)
            reports.show_table(rows, 'Pauli errors of round %s' % round_name)
            reports.write_json(self.out_path(
                config, 'pauli_%s.json' % round_name), rows)
            reports.write_json(self.out_path(
                config, 'round_%s.json' % round_name), ev.result.to_dict())
            extraction = extract_lcpem(table, ev.layout)
            extractions[ROUND_ARITY[round_name]] = extraction
            summary['rounds'][round_name] = {
                'average_fidelity': ev.result.average_fidelity(),
                'p_leak': ev.result.p_leak,
                'max_state_leakage': float(np.max(
                    ev.result.leakage_per_state)),
                'counts': extraction.counts,
                'rates': extraction.rates,
                'dropped': extraction.dropped,
                'over3_entries': [
                    {'pauli': label, 'rate': rate}
                    for label, rate, kind in extraction.dropped_entries
                    if kind == 'over3'][:20]}
            logging.info('Round %s: F=%.6f p_leak=%.3g >3-location mass %.3g',
                         round_name, ev.result.average_fidelity(),
                         ev.result.p_leak, extraction.dropped['over3'])
        if set(extractions) == {1, 2}:
            lcpem = LcpemParams.from_extractions(
                extractions[1], extractions[2], **_spam_settings(config))
            summary['lcpem'] = lcpem.to_dict()
            reports.show_table([{n: getattr(lcpem, n) for n in RATE_NAMES}],
                               'LCPEM rates')
        return summary

    def optimize(self, config: ExperimentConfig, params: HamiltonianParams,
                 opt: typing.Dict[str, typing.Any]) -> HamiltonianParams:
        """Optimize each round's controls, keeping the best of the restarts.

        Restart 0 starts from the configured controls; later restarts
        jitter every control by a relative amount opt['jitter'] drawn from
        the optimizer seed.
        """
        rng = np.random.default_rng(config.seeds['optimizer'])
        for round_name in sorted(params.schedules):
            best = None
            for restart in range(max(1, int(opt['restarts']))):
                start = params
                if restart:
                    start = _jittered(params, params.control_ids(
                        [round_name]), rng, float(opt['jitter']))
                    if start is None:
                        continue
                try:
                    result = optimize_controls(
                        start, (round_name,), int(opt['iterations']),
                        float(opt['learning_rate']), dt=config.dt,
                        patience=int(opt['patience']))
                except FluxQecError as problem:
                    if not restart:
                        raise
                    logging.warning('Restart %i of %s failed: %s', restart,
                                    round_name, problem)
                    continue
                reports.write_csv(self.out_path(
                    config, 'optimizer_trace_%s_%i.csv' % (
                        round_name, restart)), result.history,
                                  reports.TRACE_HEADER)
                if best is None or result.objective < best.objective:
                    best = result
            logging.info('Round %s objective %.4f -> %.4f', round_name,
                         best.initial_objective, best.objective)
            params = params.with_values({
                pid: best.params.get(pid)
                for pid in params.control_ids([round_name])})
        return params


def _jittered(params: HamiltonianParams, ids: typing.Sequence[str],
              rng: np.random.Generator,
              jitter: float) -> typing.Optional[HamiltonianParams]:
    updates = {}
    for pid in ids:
        value = params.get(pid)
        scale = abs(value) if abs(value) > 1e-12 else 1.0
        updates[pid] = value + jitter * scale * rng.standard_normal()
    try:
        return params.with_values(updates)
    except ValueError as problem:
        logging.warning('Skipping restart: %s', problem)
        return None


def _spam_settings(config: ExperimentConfig) -> typing.Dict[str, float]:
    "Non-rate LcpemParams fields from the config."
    settings = config.lcpem_params()
    return {k: v for k, v in settings.to_dict().items()
            if k not in RATE_NAMES}


class QecCmd(WorkflowCmd):
    """Logical error rates of the surface-code memory experiment.

For each distance and each depolarizing rate r of the sweep, runs the
memory experiment with the full LCPEM and with k>1 rates set to zero.
Writes qec_curves.csv and a gnuplot script.
    """

    required_sections = ('lcpem',)

    def __init__(self, name: str = 'qec', **kwargs):
        super().__init__(name, **kwargs)

    def run(self, config, threads=1):
        qec = config.section('qec')
        base = config.lcpem_params()
        r_values = [float(r) for r in qec['r_sweep_ghz']] or [base.r]
        seed = config.seeds['master']
        rows = []
        for distance in qec['distances']:
            distance = int(distance)
            rounds = int(qec['rounds'] or distance)
            circuit = build_syndrome_circuit(distance, rounds)
            graph = build_detector_graph(circuit)
            for r_ghz in r_values:
                for correlated in (1, 0):
                    point = base.replace(r=r_ghz)
                    if not correlated:
                        point = point.without_correlations()
                    est = logical_error_rate(
                        circuit, point, int(qec['shots']), seed, graph,
                        int(qec['chunk_size']), threads)
                    rows.append({
                        'distance': distance, 'rounds': rounds,
                        'r_ghz': r_ghz, 'correlated': correlated,
                        'p_logical': est.p_logical, 'stderr': est.stderr,
                        'failures': est.failures, 'shots': est.shots,
                        'seed': seed,
                        'params_hash': params_key(distance, rounds, point)})
        data = self.out_path(config, 'qec_curves.csv')
        reports.write_csv(data, rows, reports.QEC_HEADER)
        reports.show_table(rows, 'Logical error rates')
        series = [('d=%i %s' % (d, 'LCPEM' if c else 'k=1 only'),
                   {'distance': d, 'correlated': c})
                  for d in sorted({row['distance'] for row in rows})
                  for c in (1, 0)]
        reports.write_gnuplot(self.out_path(config, 'qec_curves.gp'), data,
                              'r_ghz', 'p_logical', reports.QEC_HEADER,
                              series, error_column='stderr',
                              xlabel='r (GHz)', ylabel='p_logical')
        return {'rows': rows}


class GradCmd(WorkflowCmd):
    """Gradient of the logical error rate with respect to device energies.

Runs both halves of the pipeline: adjoint derivatives of the six LCPEM
rates and paired finite-difference derivatives of p_logical with respect
to those rates, chained into one gradient report. With
gradient.iterations > 1 the label energies take a gradient step between
reports.
    """

    required_sections = ('device', 'schedules')

    def __init__(self, name: str = 'grad', **kwargs):
        super().__init__(name, **kwargs)

    def run(self, config, threads=1):
        params = config.hamiltonian_params()
        settings = config.lcpem_params()
        grad_cfg = config.section('gradient')
        qec = config.section('qec')
        distance = int(grad_cfg['distance'])
        rounds = int(grad_cfg['rounds'] or distance)
        circuit = build_syndrome_circuit(distance, rounds)
        graph = build_detector_graph(circuit)
        trace, report = [], None
        iterations = max(1, int(grad_cfg['iterations']))
        for iteration in range(iterations):
            lcpem_grad = grad_lcpem_wrt_params(params, config.dt)
            point = lcpem_grad.as_params(settings)
            coefficients = fd_grad_logical_wrt_lcpem(
                point, distance, rounds, int(grad_cfg['fd_shots']),
                config.seeds['master'], rel_step=float(grad_cfg['rel_step']),
                abs_step=float(grad_cfg['abs_step']), threads=threads,
                chunk_size=int(qec['chunk_size']), circuit=circuit,
                graph=graph)
            chain = chain_objective(params, coefficients, settings,
                                    lcpem_grad)
            report = gradient_report(chain, coefficients)
            row = {'iteration': iteration, 'objective': chain.value,
                   'params_hash': chain.key}
            row.update(report.rates)
            trace.append(row)
            reports.write_json(self.out_path(
                config, 'gradient_report_%i.json' % iteration),
                               report.to_dict())
            if iteration + 1 < iterations:
                params = gradient_step(params, chain.gradient,
                                       float(grad_cfg['step_ghz2']))
        rows = report.to_rows()
        reports.write_csv(self.out_path(config, 'gradient_report.csv'),
                          rows, reports.GRADIENT_HEADER)
        reports.write_csv(self.out_path(config, 'gradient_trace.csv'),
                          trace, reports.GRADIENT_TRACE_HEADER)
        reports.show_table(
            [dict(name=n, **{k: v for k, v in e.to_dict().items()
                             if k in ('value', 'stderr', 'one_sided')})
             for n, e in report.dlogical_dlcpem.items()],
            'dp_logical / dp_k')
        reports.show_table([r for r in rows if r['parameter'].startswith(
            'device.')], 'dO / d(device parameter)')
        return {'final': report.to_dict(), 'trace': trace,
                'device_values': {pid: params.get(pid)
                                  for pid in params.device_ids()}}


class ToyCmd(WorkflowCmd):
    """Single-round toric-code checks of ballistic correlated noise.

Writes failure curves of the symmetry-split decoder, the comparison with
four independent half-distance codes, the leading-order low-p formula
against exact enumeration and the average fidelity of Z flips on n
qubits, which does not depend on n.
    """

    def __init__(self, name: str = 'toy', **kwargs):
        super().__init__(name, **kwargs)

    def run(self, config, threads=1):
        toy = config.section('toy')
        seed = config.seeds['master']
        shots = int(toy['shots'])
        distances = [int(d) for d in toy['distances']]
        p_values = [float(p) for p in toy['p_values']]
        curves = [ballistic_failure_rate(d, p, shots, seed).to_dict()
                  for d in distances for p in p_values]
        data = self.out_path(config, 'toy_ballistic.csv')
        reports.write_csv(data, curves, reports.BALLISTIC_HEADER)
        reports.write_gnuplot(
            self.out_path(config, 'toy_ballistic.gp'), data, 'p',
            'failure_rate', reports.BALLISTIC_HEADER,
            [('d=%i' % d, {'distance': d}) for d in distances],
            error_column='stderr', logscale='y')
        summary = {'curves': curves}
        if len(distances) >= 2:
            by_d = {d: [c['failure_rate'] for c in curves
                        if c['distance'] == d] for d in distances[:2]}
            summary['crossing_p'] = crossing_point(
                p_values, by_d[distances[0]], by_d[distances[1]])
            logging.info('Curves d=%i and d=%i cross at p=%s', distances[0],
                         distances[1], summary['crossing_p'])
        summary['four_copy'] = self.four_copy(config, distances[0], p_values,
                                              shots, seed)
        low_d, low_p = int(toy['low_p_distance']), float(toy['low_p'])
        exact = enumerate_low_weight_failure(low_d, low_p,
                                             int(toy['max_errors']))
        formula = low_p_logical(low_d, low_p)
        summary['low_p'] = {'distance': low_d, 'p': low_p,
                            'enumerated': exact, 'formula': formula,
                            'ratio': exact / formula}
        logging.info('Low-p check d=%i p=%g: enumerated/formula = %.4f',
                     low_d, low_p, exact / formula)
        blindness = [
            {'num_qubits': n, 'flip_probability': 0.01,
             'average_fidelity': average_fidelity(
                 PauliErrorTable.from_entries({'I' * n: 0.99, 'Z' * n: 0.01},
                                              n))}
            for n in range(1, int(toy['fidelity_max_qubits']) + 1)]
        reports.write_csv(self.out_path(config, 'fidelity_blindness.csv'),
                          blindness, reports.BLINDNESS_HEADER)
        reports.show_table(blindness, 'Average fidelity of Z^n flips')
        summary['fidelity_blindness'] = blindness
        return summary

    def four_copy(self, config, distance, p_values, shots, seed):
        "Ballistic rate at distance d against 4x the rate at d/2."
        if distance % 2:
            logging.warning('Skipping four-copy check at odd d=%i', distance)
            return []
        rows = []
        for p in p_values:
            ball = ballistic_failure_rate(distance, p, shots, seed)
            mono = monolithic_failure_rate(distance // 2, p, shots, seed)
            spread = np.hypot(ball.stderr, 4 * mono.stderr)
            rows.append({
                'distance': distance, 'p': p,
                'ballistic': ball.failure_rate,
                'ballistic_stderr': ball.stderr,
                'four_mono': 4 * mono.failure_rate,
                'four_mono_stderr': 4 * mono.stderr,
                'z_score': (float((ball.failure_rate - 4 * mono.failure_rate)
                                  / spread) if spread > 0 else 0.0)})
        reports.write_csv(self.out_path(config, 'toy_four_copy.csv'), rows,
                          reports.FOUR_COPY_HEADER)
        return rows
