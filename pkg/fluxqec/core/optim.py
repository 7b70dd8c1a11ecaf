"""Objectives, control optimization and the gradient pipeline from
Hamiltonian parameters through LCPEM rates to the logical error rate.

Parameter ids are dotted paths:

  device.label{L}.e_c | e_j | e_l     shared by every site with label L
  device.j_c, device.j_l              lattice-wide couplings
  control.{round}.{Qrc}.{name}        drive parameter of one site
  control.{round}.compensation.{field}.{qubit}.{component}

Rounds are '1q' (rates p*_1q) and '2q' (rates p*_2q).
"""

import dataclasses
import logging
import math
import typing

import numpy as np

from fluxqec.core import cache_tools
from fluxqec.core.circuit import SyndromeCircuit, build_syndrome_circuit
from fluxqec.core.control import (
    Compensation, CosineEnvelope, DriveSpec, FlatTopEnvelope, GateSchedule,
    cnot_matrix, kron_all, PAULI_X)
from fluxqec.core.decode import (
    DetectorGraph, build_detector_graph, run_memory_experiment)
from fluxqec.core.device import (
    ENERGY_FIELDS, Coord, FluxoniumEigensystem, FluxoniumParams,
    HamiltonianTerms, LatticeSpec, build_idle_hamiltonian, disorder_offsets,
    fluxonium_eigensystem, parse_site_name, sample_disordered_lattice,
    site_name)
from fluxqec.core.errors import (
    FidelityOverflowError, FluxQecError, RejectedStepError,
    StaleCoefficientsError)
from fluxqec.core.evolve import (
    LABEL_PROXIMITY, MAX_LEAKAGE, ComputationalBasis, RoundResult,
    TrotterPropagator, _local_outer, _pair_inner, default_dt,
    gate_fidelity, project_round, select_computational_basis)
from fluxqec.core.twirl import (
    RATE_NAMES, GateLayout, LcpemParams, PauliErrorTable, location_weights,
    pauli_amplitude_adjoint, pauli_amplitude_array, twirl_probs)


ROUND_ARITY = {'1q': 1, '2q': 2}
DEGENERACY_TOL = 1e-12
DURATION_FACTORS = {'t_gate': 1.0, 't_ramp': 2.0, 't_plateau': 1.0}
MIN_DURATION_NS = 1e-3
DEFAULT_STEP_GHZ2 = 0.01


def device_id(label: int, name: str) -> str:
    """Parameter id of a label-level energy.

>>> device_id(3, 'e_c')
'device.label3.e_c'
    """
    return 'device.label%i.%s' % (label, name)


def control_id(round_name: str, target: Coord, name: str) -> str:
    "Parameter id of one drive parameter."
    return 'control.%s.%s.%s' % (round_name, site_name(target), name)


def compensation_id(round_name: str, field: str, qubit: int,
                    component: int) -> str:
    "Parameter id of one compensation angle."
    return 'control.%s.compensation.%s.%i.%i' % (
        round_name, field, qubit, component)


def is_energy_id(pid: str) -> bool:
    "True for the E_C/E_J/E_L ids that gradient_step moves."
    parts = pid.split('.')
    return (len(parts) == 3 and parts[0] == 'device'
            and parts[1].startswith('label') and parts[2] in ENERGY_FIELDS)


def param_units(pid: str) -> str:
    """Units of dO/d(parameter) for reports.

>>> param_units('device.label1.e_j'), param_units('control.2q.Q02.t_ramp')
('1/GHz', '1/ns')
    """
    name = pid.split('.')[-1] if 'compensation' not in pid else 'angle'
    if pid.startswith('device.') or name in ('amplitude', 'drive_freq'):
        return '1/GHz'
    if name in DURATION_FACTORS:
        return '1/ns'
    return '1/rad'


@dataclasses.dataclass
class HamiltonianParams:
    """Device and control parameters behind H(h, c, t).

    :param lattice:  Device description; base_params hold one value per
                     label, so every site with that label shares it.

    :param schedules:  Gate schedules keyed by round name ('1q', '2q').

    :param offsets:  Disorder offsets per site, computed from lattice on
                     construction and then held fixed while the base values
                     move.

    :param oscillator_basis_size:  Harmonic-oscillator basis per fluxonium.
    """

    lattice: LatticeSpec
    schedules: typing.Dict[str, GateSchedule]
    offsets: typing.Optional[typing.Dict[
        Coord, typing.Dict[str, float]]] = None
    oscillator_basis_size: int = 60

    def __post_init__(self):
        unknown = set(self.schedules) - set(ROUND_ARITY)
        if unknown:
            raise ValueError('Unknown round names %s; use %s' % (
                sorted(unknown), sorted(ROUND_ARITY)))
        if self.offsets is None:
            self.offsets = disorder_offsets(self.lattice)
        bad = [pid for pid, value in self.values().items()
               if not np.isfinite(value)]
        if bad:
            raise ValueError('Non-finite parameters: %s' % bad)

    def schedule(self, round_name: str) -> GateSchedule:
        "Schedule of one round or ValueError."
        try:
            return self.schedules[round_name]
        except KeyError:
            raise ValueError('No schedule for round %r (have %s)' % (
                round_name, sorted(self.schedules))) from None

    def device_ids(self) -> typing.List[str]:
        "Energy ids of every label plus the two couplings."
        return [device_id(label, name)
                for label in sorted(self.lattice.base_params)
                for name in ENERGY_FIELDS] + ['device.j_c', 'device.j_l']

    def control_ids(self, rounds: typing.Optional[
            typing.Sequence[str]] = None) -> typing.List[str]:
        "Drive and compensation ids of the given rounds (default all)."
        result = []
        for round_name in rounds or sorted(self.schedules):
            sched = self.schedule(round_name)
            for drive in sched.drives:
                result.extend(control_id(round_name, drive.target, name)
                              for name in drive.param_names())
            result.extend(compensation_id(round_name, *addr)
                          for addr in sched.compensation.angle_names())
        return result

    def values(self) -> typing.Dict[str, float]:
        "Every parameter id with its current value."
        return {pid: self.get(pid)
                for pid in self.device_ids() + self.control_ids()}

    def get(self, pid: str) -> float:
        "Value of one parameter id."
        parts = pid.split('.')
        if parts[0] == 'device':
            if parts[1] in ('j_c', 'j_l'):
                return float(getattr(self.lattice, parts[1]))
            label = _parse_label(parts[1])
            return float(getattr(self.lattice.base_params[label], parts[2]))
        if parts[0] == 'control':
            sched = self.schedule(parts[1])
            if parts[2] == 'compensation':
                return sched.compensation.get(parts[3], int(parts[4]),
                                              int(parts[5]))
            drive = sched.drive_for(parse_site_name(parts[2]))
            if drive is None:
                raise ValueError('No drive on %s in round %s' % (
                    parts[2], parts[1]))
            return float(drive.get(parts[3]))
        raise ValueError('Unknown parameter id %r' % pid)

    def with_values(self, updates: typing.Mapping[str, float]
                    ) -> 'HamiltonianParams':
        "Copy with the given ids set; disorder offsets stay as they are."
        base = dict(self.lattice.base_params)
        couplings = {}
        schedules = dict(self.schedules)
        for pid, value in updates.items():
            value = float(value)
            if not np.isfinite(value):
                raise ValueError('Non-finite value %s for %s' % (value, pid))
            parts = pid.split('.')
            if parts[0] == 'device' and parts[1] in ('j_c', 'j_l'):
                couplings[parts[1]] = value
            elif parts[0] == 'device':
                label = _parse_label(parts[1])
                base[label] = base[label].replace(**{parts[2]: value})
            elif parts[0] == 'control':
                self.schedule(parts[1])
                sched = schedules[parts[1]]
                if parts[2] == 'compensation':
                    comp = sched.compensation.with_angle(
                        parts[3], int(parts[4]), int(parts[5]), value)
                    sched = sched.replace(compensation=comp)
                else:
                    targets = [d.target for d in sched.drives]
                    index = targets.index(parse_site_name(parts[2]))
                    sched = sched.with_drive(index, sched.drives[
                        index].with_param(parts[3], value))
                schedules[parts[1]] = sched
            else:
                raise ValueError('Unknown parameter id %r' % pid)
        lattice = self.lattice.replace(base_params=base, **couplings)
        return dataclasses.replace(self, lattice=lattice,
                                   schedules=schedules)

    def site_params(self) -> typing.Dict[Coord, FluxoniumParams]:
        "Per-site energies: the label's base value plus the fixed offset."
        result = {}
        for coord in self.lattice.coords():
            base = self.lattice.base_params[self.lattice.site_labels[coord]]
            offset = self.offsets.get(coord, {})
            result[coord] = base.replace(**{
                name: getattr(base, name) + offset.get(name, 0.0)
                for name in ENERGY_FIELDS})
        return result

    def groups(self) -> typing.Dict[str, typing.List[Coord]]:
        "Sharing map from each label-level id to the sites it moves."
        result = {}
        for label in sorted(self.lattice.base_params):
            members = [c for c in self.lattice.coords()
                       if self.lattice.site_labels[c] == label]
            for name in ENERGY_FIELDS:
                result[device_id(label, name)] = members
        return result


def _parse_label(text: str) -> int:
    if not text.startswith('label'):
        raise ValueError('Expected labelN, got %r' % text)
    return int(text[len('label'):])


def round_layout(schedule: GateSchedule) -> GateLayout:
    "Gate locations of a round: one per qubit, or one per CNOT pair."
    if schedule.target == 'cnot':
        return GateLayout.cnot_round(schedule.region, schedule.cnot_pairs)
    return GateLayout.single_qubit_round(schedule.region)


@dataclasses.dataclass
class RoundEvaluation:
    """Everything the forward pass of one round produced.

    The adjoint pass reuses the eigensystems, the propagator and the final
    states instead of recomputing them.
    """

    name: str
    schedule: GateSchedule
    systems: typing.List[FluxoniumEigensystem]
    terms: HamiltonianTerms
    basis: ComputationalBasis
    propagator: TrotterPropagator
    final: np.ndarray
    result: RoundResult
    layout: GateLayout
    site_labels: typing.Dict[Coord, int]

    @property
    def arity(self) -> int:
        "Gate arity j of the round."
        return ROUND_ARITY[self.name]

    def amplitudes(self) -> np.ndarray:
        "Pauli amplitudes a(j) of the round's unitary error."
        return pauli_amplitude_array(self.result.u_error)

    def table(self) -> PauliErrorTable:
        "Twirled Pauli channel of the round."
        return twirl_probs(self.amplitudes())

    def rates(self) -> np.ndarray:
        "(p1, p2, p3) of the round from the location weights."
        return location_weights(self.layout) @ (
            np.abs(self.amplitudes()) ** 2)


def evaluate_round(params: HamiltonianParams, round_name: str,
                   dt: typing.Optional[float] = None,
                   max_leak: float = MAX_LEAKAGE) -> RoundEvaluation:
    """Forward pass: spectra, labeled basis, Trotter evolution, projection.

    :param params:  Device and control parameters.

    :param round_name:  '1q' or '2q'.

    :param dt:  Trotter step in ns; defaults by gate arity.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  RoundEvaluation. LabelingError and LeakageError propagate.
    """
    schedule = params.schedule(round_name)
    region = list(schedule.region)
    keep = params.lattice.keep_levels
    site_params = params.site_params()
    systems = [fluxonium_eigensystem(site_params[c],
                                     params.oscillator_basis_size, keep)
               for c in region]
    qubits = {c: s.truncate(keep) for c, s in zip(region, systems)}
    terms = build_idle_hamiltonian(qubits, params.lattice, region)
    basis = select_computational_basis(terms)
    dt = default_dt(schedule) if dt is None else dt
    propagator = TrotterPropagator(terms, schedule.drives, schedule.duration,
                                   dt)
    logging.info('Round %s: %i sites, %i Trotter steps of %.4g ns',
                 round_name, len(region), propagator.num_steps,
                 propagator.dt)
    final = propagator.evolve(basis.states)
    result = project_round(final, basis, schedule, max_leak)
    result.num_steps, result.dt = propagator.num_steps, propagator.dt
    return RoundEvaluation(round_name, schedule, systems, terms, basis,
                           propagator, final, result, round_layout(schedule),
                           dict(params.lattice.site_labels))


def _eigenvector_adjoint(basis: ComputationalBasis,
                         grad_states: np.ndarray) -> np.ndarray:
    """Pull ∂L/∂conj(B) back through the phase-fixed eigenvectors of H(0).

    Returns R of shape (dim, ncols, nout) such that the sensitivity of L to
    H(0) is Σ_k R[:, k] v_k†. The gauge term keeps <bare|v_k> real.
    """
    dim, ncols, nout = grad_states.shape
    states, vecs, vals = basis.states, basis.eigvecs, basis.eigvals
    bare = basis.bare_indices()
    cols = np.arange(ncols)
    overlap = np.einsum('ico,ic->co', grad_states.conj(), states)
    gamma = overlap.imag / states[bare, cols].real[:, None]
    tilde = grad_states.copy()
    tilde[bare, cols, :] += 1j * gamma
    coeffs = (vecs.conj().T @ tilde.reshape(dim, -1)).reshape(
        dim, ncols, nout)
    gaps = vals[basis.indices][None, :] - vals[:, None]
    inv = np.zeros_like(gaps)
    mask = np.abs(gaps) > DEGENERACY_TOL
    inv[mask] = 1.0 / gaps[mask]
    near = (~mask).sum() - ncols
    if near:
        logging.debug('Skipping %i degenerate level pairs in the '
                      'eigenvector adjoint', near)
    return (vecs @ (coeffs * inv[:, :, None]).reshape(dim, -1)).reshape(
        dim, ncols, nout)


def _duration_setter(schedule: GateSchedule) -> typing.Optional[Coord]:
    total = schedule.duration
    for drive in schedule.drives:
        if drive.envelope.duration == total:
            return drive.target
    return None


def _round_backward(ev: RoundEvaluation, grad_u: np.ndarray,
                    device: bool = True) -> typing.Dict[str, np.ndarray]:
    """Adjoint pass of one round.

    :param ev:  Forward evaluation.

    :param grad_u:  ∂L/∂conj(u_sim), shape (D, D, nout).

    :param device:  Also differentiate through the spectra and the labeled
                    basis; controls alone skip that part.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  Map from parameter id to an array of nout derivatives.
    """
    sched, prop = ev.schedule, ev.propagator
    num = sched.num_qubits
    nout = grad_u.shape[-1]
    comp = sched.compensation
    before, after = comp.operators(num)
    grad_raw = np.einsum('ba,bco,dc->ado', after.conj(), grad_u,
                         before.conj())
    grad_psi = np.einsum('ia,ado->ido', ev.basis.states, grad_raw)
    sens = prop.backpropagate(ev.final, grad_psi)
    grads = {}

    dur_grad = (sens.duration_gradient(prop.drives) if prop.num_steps
                else np.zeros(nout))
    setter = _duration_setter(sched)
    for site, drive in prop.drives.items():
        local = sens.drive_gradients(site, drive)
        for name in drive.param_names():
            value = np.asarray(local.get(name, np.zeros(nout)), dtype=float)
            if drive.target == setter and name in DURATION_FACTORS:
                value = value + DURATION_FACTORS[name] * dur_grad
            grads[control_id(ev.name, drive.target, name)] = value
    u_raw = ev.result.u_raw
    for field, qubit, component in comp.angle_names():
        side = field.split('_', 1)[1]
        factors = comp.factors(side, num)
        factors[qubit] = comp.factor_derivative(field, qubit, component)
        d_op = kron_all(factors)
        d_u = (after @ u_raw @ d_op if side == 'before'
               else d_op @ u_raw @ before)
        grads[compensation_id(ev.name, field, qubit, component)] = (
            2.0 * np.real(np.einsum('abo,ab->o', grad_u.conj(), d_u)))
    if not device:
        return grads

    basis = ev.basis
    if basis.margin < LABEL_PROXIMITY:
        logging.warning('Labeling margin %.3g is near the threshold; the '
                        'device gradient may not be differentiable here',
                        basis.margin)
    grad_basis = np.einsum('ia,cao->ico', ev.final, grad_raw.conj())
    grad_basis = grad_basis + sens.initial_grad
    resolvent = _eigenvector_adjoint(basis, grad_basis)
    shape = tuple(basis.dims) + (len(basis.labels),)
    r_t = resolvent.reshape(shape + (nout,))
    v_t = basis.states.reshape(shape)
    terms = ev.terms
    site_total = [sens.single[i] + _local_outer(r_t, v_t, (i,))
                  for i in range(len(terms.sites))]
    pair_total = [sens.pairs[e] + _local_outer(r_t, v_t, (a, b))
                  for e, (a, b, _op) in enumerate(terms.pairs)]

    for label in sorted(set(ev.site_labels.values())):
        for name in ENERGY_FIELDS:
            grads[device_id(label, name)] = np.zeros(nout)
    grads['device.j_c'] = np.zeros(nout)
    grads['device.j_l'] = np.zeros(nout)
    keep = terms.qubits[0].levels
    j_c, j_l = terms.j_c, terms.j_l
    for i, coord in enumerate(terms.sites):
        label = ev.site_labels[coord]
        derivs = ev.systems[i].derivatives(keep)
        for name, (d_e, d_n, d_phi) in derivs.items():
            value = _pair_inner(site_total[i], np.diag(d_e).astype(complex))
            if i in sens.drive_op:
                value = value + _pair_inner(sens.drive_op[i], d_phi)
            for e, (a, b, _op) in enumerate(terms.pairs):
                if a == i:
                    other = terms.qubits[b]
                    d_pair = (j_c * np.kron(d_n, other.n_op)
                              - j_l * np.kron(d_phi, other.phi_op))
                elif b == i:
                    other = terms.qubits[a]
                    d_pair = (j_c * np.kron(other.n_op, d_n)
                              - j_l * np.kron(other.phi_op, d_phi))
                else:
                    continue
                value = value + _pair_inner(pair_total[e], d_pair)
            grads[device_id(label, name)] = grads[device_id(
                label, name)] + value
    for e, (a, b, _op) in enumerate(terms.pairs):
        first, second = terms.qubits[a], terms.qubits[b]
        grads['device.j_c'] = grads['device.j_c'] + _pair_inner(
            pair_total[e], np.kron(first.n_op, second.n_op))
        grads['device.j_l'] = grads['device.j_l'] - _pair_inner(
            pair_total[e], np.kron(first.phi_op, second.phi_op))
    return grads


def _fidelity_grad(u_sim: np.ndarray, target: np.ndarray) -> np.ndarray:
    "∂F/∂conj(u_sim) of the average gate fidelity."
    dim = target.shape[0]
    overlap = np.trace(target.conj().T @ u_sim)
    return overlap * target / (dim * (dim + 1))


def default_targets(num_qubits: int) -> typing.Tuple[np.ndarray, np.ndarray]:
    """X on every qubit and CNOTs on consecutive pairs (0→1, 2→3, ...).

    These are the targets of the two rounds on a region listed row by row
    with the control column first.
    """
    x_all = kron_all([PAULI_X] * num_qubits)
    cnots = np.eye(2 ** num_qubits, dtype=complex)
    for control in range(0, num_qubits - 1, 2):
        cnots = cnot_matrix(num_qubits, control, control + 1) @ cnots
    return x_all, cnots


def fidelity_objective(u_1q, u_2q, target_1q: typing.Optional[
        np.ndarray] = None, target_2q: typing.Optional[np.ndarray] = None
                       ) -> float:
    """O = log10(2 − F_1q − F_2q) of the two simultaneous rounds.

    :param u_1q:  RoundResult or 2^m matrix of the one-qubit round.

    :param u_2q:  RoundResult or 2^m matrix of the two-qubit round.

    :param target_1q:  Target of a bare matrix; defaults to X on every qubit.

    :param target_2q:  Target of a bare matrix; defaults to CNOTs on
                       consecutive qubit pairs.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  The objective. Raises FidelityOverflowError when both rounds
              are exact so the log argument is not positive.

>>> x_all, cnots = default_targets(2)
>>> fidelity_objective(x_all, cnots)
Traceback (most recent call last):
...
fluxqec.core.errors.FidelityOverflowError: log10 argument 0 is not positive
    """
    fids = []
    for value, target, index in ((u_1q, target_1q, 0), (u_2q, target_2q, 1)):
        if isinstance(value, RoundResult):
            fids.append(value.average_fidelity())
            continue
        u_sim = np.asarray(value, dtype=complex)
        if target is None:
            num = int(round(np.log2(u_sim.shape[0])))
            target = default_targets(num)[index]
        fids.append(gate_fidelity(u_sim, np.asarray(target, dtype=complex)))
    return _log_objective(fids)


def _log_objective(fids: typing.Sequence[float]) -> float:
    arg = len(fids) - sum(fids)
    if not arg > 0:
        raise FidelityOverflowError('log10 argument %.3g is not positive' % (
            arg))
    return math.log10(arg)


@dataclasses.dataclass
class ControlObjective:
    "Value and control gradient of log10(n − Σ F) over n rounds."

    value: float
    fidelities: typing.Dict[str, float]
    gradient: typing.Dict[str, float]


def control_objective(params: HamiltonianParams,
                      rounds: typing.Sequence[str] = ('1q', '2q'),
                      dt: typing.Optional[float] = None,
                      with_grad: bool = True) -> ControlObjective:
    """Fidelity objective of the given rounds and its control gradient.

    With one round this is log10(1 − F); with both it is the usual
    log10(2 − F_1q − F_2q).
    """
    fids, raw = {}, {}
    for round_name in rounds:
        ev = evaluate_round(params, round_name, dt)
        fids[round_name] = ev.result.average_fidelity()
        if with_grad:
            grad_u = _fidelity_grad(ev.result.u_sim, ev.result.target)
            part = _round_backward(ev, grad_u[:, :, None], device=False)
            raw.update({pid: float(value[0]) for pid, value in part.items()})
    value = _log_objective(list(fids.values()))
    scale = -1.0 / (math.log(10.0) * (len(fids) - sum(fids.values())))
    return ControlObjective(value, fids,
                            {pid: scale * g for pid, g in raw.items()})


@dataclasses.dataclass
class OptimizationResult:
    """Outcome of optimize_controls.

    history rows are dicts with iteration, objective, step_norm, accepted.
    """

    params: HamiltonianParams
    objective: float
    initial_objective: float
    history: typing.List[typing.Dict[str, typing.Any]]
    stagnated: bool
    accepted_steps: int


def _clip_controls(ids: typing.Sequence[str], values: np.ndarray
                   ) -> np.ndarray:
    result = values.copy()
    for index, pid in enumerate(ids):
        name = pid.split('.')[-1]
        if name == 'amplitude' or name == 't_plateau':
            result[index] = max(result[index], 0.0)
        elif name in ('t_gate', 't_ramp'):
            result[index] = max(result[index], MIN_DURATION_NS)
    return result


def optimize_controls(params: HamiltonianParams,
                      rounds: typing.Sequence[str] = ('1q',),
                      budget: int = 100, learning_rate: float = 0.01,
                      names: typing.Optional[typing.Sequence[str]] = None,
                      dt: typing.Optional[float] = None, patience: int = 10,
                      beta1: float = 0.9, beta2: float = 0.999,
                      eps: float = 1e-8) -> OptimizationResult:
    """Adam descent of the fidelity objective over control parameters.

    :param params:  Starting point; its device part is never changed.

    :param rounds:  Rounds entering the objective.

    :param budget:  Maximum number of candidate steps.

    :param learning_rate:  Step in units of each parameter's initial
                           magnitude (1 for parameters starting at 0).

    :param names:  Parameter ids to move; defaults to every control of
                   the rounds.

    :param patience:  Consecutive rejected steps before giving up.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  OptimizationResult holding the best parameters seen. A step
              is accepted only if it lowers the objective; a rejection
              halves the learning rate. There is no randomness, so runs
              are reproducible.
    """
    if budget < 0:
        raise ValueError('budget must be >= 0, got %s' % budget)
    ids = list(names) if names is not None else params.control_ids(rounds)
    current = control_objective(params, rounds, dt, with_grad=budget > 0)
    initial = current.value
    history = [{'iteration': 0, 'objective': initial, 'step_norm': 0.0,
                'accepted': True}]
    if budget == 0 or not ids:
        return OptimizationResult(params, initial, initial, history,
                                  False, 0)
    x_0 = np.array([params.get(pid) for pid in ids])
    scale = np.where(np.abs(x_0) > 1e-12, np.abs(x_0), 1.0)
    z_cur = x_0 / scale
    first = np.zeros(len(ids))
    second = np.zeros(len(ids))
    rate, stall, accepted_steps = learning_rate, 0, 0
    stagnated = False
    for iteration in range(1, budget + 1):
        grad = np.array([current.gradient.get(pid, 0.0) for pid in ids]
                        ) * scale
        first = beta1 * first + (1 - beta1) * grad
        second = beta2 * second + (1 - beta2) * grad ** 2
        m_hat = first / (1 - beta1 ** iteration)
        v_hat = second / (1 - beta2 ** iteration)
        z_new = z_cur - rate * m_hat / (np.sqrt(v_hat) + eps)
        x_new = _clip_controls(ids, z_new * scale)
        step_norm = float(np.linalg.norm(x_new / scale - z_cur))
        try:
            cand_params = params.with_values(dict(zip(ids, x_new)))
            candidate = control_objective(cand_params, rounds, dt)
        except FluxQecError as problem:
            logging.debug('Step %i rejected: %s', iteration, problem)
            candidate = None
        accepted = candidate is not None and candidate.value < current.value
        history.append({'iteration': iteration,
                        'objective': (candidate.value if candidate
                                      else float('nan')),
                        'step_norm': step_norm, 'accepted': accepted})
        logging.debug('Iteration %i objective %s accepted=%s', iteration,
                      history[-1]['objective'], accepted)
        if accepted:
            params, current = cand_params, candidate
            z_cur = x_new / scale
            stall = 0
            accepted_steps += 1
            continue
        rate *= 0.5
        stall += 1
        if stall >= patience:
            stagnated = True
            break
    if stagnated or not accepted_steps:
        stagnated = True
        logging.warning('Control optimization stagnated at objective %.6g '
                        'after %i accepted steps', current.value,
                        accepted_steps)
    return OptimizationResult(params, current.value, initial, history,
                              stagnated, accepted_steps)


@dataclasses.dataclass
class LcpemGradient:
    """Six LCPEM rates and their derivatives for every parameter.

    rates and every grads row follow RATE_NAMES. Rounds missing from the
    parameters contribute zeros.
    """

    rates: np.ndarray
    grads: typing.Dict[str, np.ndarray]
    fidelities: typing.Dict[str, float]

    def as_params(self, settings: LcpemParams) -> LcpemParams:
        "settings with the six rates replaced by these (clipped to [0, 1])."
        return settings.replace(**{
            name: float(min(max(value, 0.0), 1.0))
            for name, value in zip(RATE_NAMES, self.rates)})


def _rate_slice(round_name: str) -> slice:
    start = 3 * (ROUND_ARITY[round_name] - 1)
    return slice(start, start + 3)


def lcpem_rates(params: HamiltonianParams,
                dt: typing.Optional[float] = None) -> np.ndarray:
    "Forward-only six-vector of rates in RATE_NAMES order."
    rates = np.zeros(len(RATE_NAMES))
    for round_name in params.schedules:
        rates[_rate_slice(round_name)] = evaluate_round(
            params, round_name, dt).rates()
    return rates


def grad_lcpem_wrt_params(params: HamiltonianParams,
                          dt: typing.Optional[float] = None
                          ) -> LcpemGradient:
    """Adjoint derivatives of the six LCPEM rates.

    :param params:  Device and control parameters with one or both rounds.

    :param dt:  Trotter step in ns; defaults by gate arity.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  LcpemGradient with an entry for every parameter id. Ids with
              no path to a rate (a label absent from the region, a control
              of the other round) get exact zeros.

    Each rate p_k = Σ_j w_k[j] |a(j)|² is pulled back through the Pauli
    amplitudes, U_error = u_sim† U_target, the compensation, the projection
    onto the labeled basis, the Trotter steps and, for device parameters,
    the eigenvectors of H(0) and the fluxonium spectra.
    """
    rates = np.zeros(len(RATE_NAMES))
    grads = {pid: np.zeros(len(RATE_NAMES)) for pid in
             params.device_ids() + params.control_ids()}
    fids = {}
    for round_name in sorted(params.schedules):
        ev = evaluate_round(params, round_name, dt)
        fids[round_name] = ev.result.average_fidelity()
        num = ev.schedule.num_qubits
        amps = ev.amplitudes()
        weights = location_weights(ev.layout)
        target = ev.result.target
        grad_u = np.zeros(target.shape + (3,), dtype=complex)
        for k in range(3):
            grad_err = pauli_amplitude_adjoint(weights[k] * amps, num)
            grad_u[:, :, k] = target @ grad_err.conj().T
        part = _round_backward(ev, grad_u, device=True)
        where = _rate_slice(round_name)
        rates[where] = weights @ (np.abs(amps) ** 2)
        for pid, value in part.items():
            grads.setdefault(pid, np.zeros(len(RATE_NAMES)))[where] += value
    return LcpemGradient(rates, grads, fids)


def finite_difference_lcpem(params: HamiltonianParams,
                            ids: typing.Sequence[str], step: float = 1e-6,
                            dt: typing.Optional[float] = None
                            ) -> typing.Dict[str, np.ndarray]:
    """Central differences of the six rates, for checking the adjoint.
    """
    result = {}
    for pid in ids:
        value = params.get(pid)
        plus = lcpem_rates(params.with_values({pid: value + step}), dt)
        minus = lcpem_rates(params.with_values({pid: value - step}), dt)
        result[pid] = (plus - minus) / (2 * step)
    return result


@dataclasses.dataclass
class FdEstimate:
    """One Δp_logical/Δp estimate from paired memory experiments.

    stderr comes from the per-shot differences of the paired runs;
    independent_stderr is what unpaired runs of the same size would give.
    """

    name: str
    value: float
    stderr: float
    independent_stderr: float
    step: float
    one_sided: bool
    shots: int

    @property
    def ci(self) -> typing.Tuple[float, float]:
        "95% normal confidence interval."
        half = 1.96 * self.stderr
        return self.value - half, self.value + half

    def to_dict(self) -> dict:
        "Plain dict for reports."
        low, high = self.ci
        return {'name': self.name, 'value': self.value,
                'stderr': self.stderr,
                'independent_stderr': self.independent_stderr,
                'ci_low': low, 'ci_high': high, 'step': self.step,
                'one_sided': self.one_sided, 'shots': self.shots}


def paired_estimate(name: str, high: np.ndarray, low: np.ndarray,
                    span: float, step: float,
                    one_sided: bool = False) -> FdEstimate:
    """Difference quotient of two per-shot failure vectors.

>>> est = paired_estimate('p', np.array([1, 0, 1, 0]), np.array([1, 0, 0, 0]),
...                       span=0.5, step=0.25)
>>> est.value
0.5
    """
    high = np.asarray(high, dtype=float)
    low = np.asarray(low, dtype=float)
    shots = len(high)
    diff = high - low
    value = float(diff.mean() / span)
    if shots > 1:
        stderr = float(diff.std(ddof=1) / math.sqrt(shots) / span)
        indep = float(math.sqrt(high.var(ddof=1) / shots
                                + low.var(ddof=1) / shots) / span)
    else:
        stderr = indep = float('inf')
    return FdEstimate(name, value, stderr, indep, step, one_sided, shots)


@dataclasses.dataclass
class FdCoefficients:
    """Frozen Δp_logical/Δp_k estimates at one operating point.

    key is params_key of (distance, rounds, params); chain_objective refuses
    coefficients whose key does not match the point it is asked about.
    """

    estimates: typing.Dict[str, FdEstimate]
    key: str
    distance: int
    rounds: int
    shots: int
    seed: int

    def vector(self, names: typing.Sequence[str] = RATE_NAMES
               ) -> np.ndarray:
        "Values in names order; missing names count as 0."
        return np.array([self.estimates[n].value if n in self.estimates
                         else 0.0 for n in names])

    def to_dict(self) -> dict:
        "Plain dict for reports."
        return {'key': self.key, 'distance': self.distance,
                'rounds': self.rounds, 'shots': self.shots,
                'seed': self.seed,
                'estimates': {n: e.to_dict()
                              for n, e in self.estimates.items()}}


def fd_grad_logical_wrt_lcpem(params: LcpemParams, distance: int,
                              rounds: int, shots: int, seed: int,
                              names: typing.Sequence[str] = RATE_NAMES,
                              rel_step: float = 0.1, abs_step: float = 1e-5,
                              threads: int = 1, chunk_size: int = 2048,
                              circuit: typing.Optional[SyndromeCircuit] = None,
                              graph: typing.Optional[DetectorGraph] = None
                              ) -> FdCoefficients:
    """Finite-difference derivatives of p_logical with respect to rates.

    :param params:  Operating point.

    :param distance:  Code distance.

    :param rounds:  Syndrome rounds of the memory experiment.

    :param shots:  Shots per perturbed run.

    :param seed:  Shared by every run so the differences use common random
                  numbers.

    :param names:  LcpemParams fields to differentiate; p_measure and
                   p_reset are allowed too.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  FdCoefficients. A rate p > 0 uses a central difference at
              p ± rel_step·p; p = 0 uses a one-sided step of abs_step.
    """
    circuit = circuit or build_syndrome_circuit(distance, rounds)
    graph = graph or build_detector_graph(circuit)

    def failures(point: LcpemParams) -> np.ndarray:
        return run_memory_experiment(circuit, point, shots, seed, graph,
                                     chunk_size, threads)

    base = None
    estimates = {}
    for name in names:
        value = getattr(params, name)
        if value > 0:
            step = rel_step * value
            high = failures(params.replace(**{name: value + step}))
            low = failures(params.replace(**{name: value - step}))
            est = paired_estimate(name, high, low, 2 * step, step)
        else:
            step = abs_step
            if base is None:
                base = failures(params)
            high = failures(params.replace(**{name: step}))
            est = paired_estimate(name, high, base, step, step, True)
        if 1.96 * est.stderr > abs(est.value):
            logging.warning('Insufficient shots for %s: %.3g +- %.3g',
                            name, est.value, 1.96 * est.stderr)
        logging.info('dp_logical/d%s = %.4g (stderr %.2g)', name, est.value,
                     est.stderr)
        estimates[name] = est
    key = cache_tools.params_key(distance, rounds, params)
    result = FdCoefficients(estimates, key, distance, rounds, shots, seed)
    cache_tools.CoefficientCache.store(key, result)
    return result


@dataclasses.dataclass
class ChainObjective:
    """O = Σ_k coeff_k p_k(θ) and its gradient at one point."""

    value: float
    gradient: typing.Dict[str, float]
    rates: np.ndarray
    key: str


def chain_objective(params: HamiltonianParams, coefficients: FdCoefficients,
                    settings: LcpemParams,
                    lcpem_grad: typing.Optional[LcpemGradient] = None,
                    dt: typing.Optional[float] = None) -> ChainObjective:
    """Intermediate objective whose gradient approximates ∇p_logical.

    :param params:  Current Hamiltonian parameters.

    :param coefficients:  Output of fd_grad_logical_wrt_lcpem.

    :param settings:  SPAM, decoherence and durations that complete the
                      LCPEM point (their rates are ignored).

    :param lcpem_grad:  Precomputed grad_lcpem_wrt_params(params).

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  ChainObjective. Raises StaleCoefficientsError when the
              coefficients were estimated at another LCPEM point.
    """
    if lcpem_grad is None:
        lcpem_grad = grad_lcpem_wrt_params(params, dt)
    point = lcpem_grad.as_params(settings)
    key = cache_tools.params_key(coefficients.distance, coefficients.rounds,
                                 point)
    if key != coefficients.key:
        raise StaleCoefficientsError(
            'Coefficients %s were estimated at another point (now %s); '
            'recompute them' % (coefficients.key, key))
    coeff = coefficients.vector()
    value = float(coeff @ lcpem_grad.rates)
    gradient = {pid: float(coeff @ row)
                for pid, row in lcpem_grad.grads.items()}
    return ChainObjective(value, gradient, lcpem_grad.rates.copy(), key)


@dataclasses.dataclass
class GradientReport:
    """Gradient of the chained objective plus the coefficients behind it.
    """

    objective: float
    dO_dparams: typing.Dict[str, float]
    dlogical_dlcpem: typing.Dict[str, FdEstimate]
    rates: typing.Dict[str, float]
    key: str

    def to_dict(self) -> dict:
        "JSON-ready dict keyed by parameter path, with units."
        return {'objective': self.objective, 'key': self.key,
                'rates': dict(self.rates),
                'dO_dparams': {pid: {'value': value,
                                     'units': param_units(pid)}
                               for pid, value in self.dO_dparams.items()},
                'dlogical_dlcpem': {n: e.to_dict() for n, e in
                                    self.dlogical_dlcpem.items()}}

    def to_rows(self) -> typing.List[typing.Dict[str, typing.Any]]:
        "One row per parameter for tables."
        return [{'parameter': pid, 'gradient': value,
                 'units': param_units(pid)}
                for pid, value in self.dO_dparams.items()]


def gradient_report(chain: ChainObjective,
                    coefficients: FdCoefficients) -> GradientReport:
    "Bundle a chain objective with its coefficients."
    return GradientReport(
        objective=chain.value, dO_dparams=dict(chain.gradient),
        dlogical_dlcpem=dict(coefficients.estimates),
        rates=dict(zip(RATE_NAMES, chain.rates.tolist())), key=chain.key)


def gradient_step(params: HamiltonianParams,
                  gradient: typing.Mapping[str, float],
                  step: float = DEFAULT_STEP_GHZ2) -> HamiltonianParams:
    """Move every label energy by −step·∂O/∂E.

    :param params:  Current parameters.

    :param gradient:  ∂O/∂(id) in 1/GHz; ids other than label energies
                      are ignored, so couplings and controls stay put.

    :param step:  Step size in GHz².

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  New HamiltonianParams. Raises RejectedStepError if any label
              or site energy would become non-positive.
    """
    updates = {}
    for pid, grad in gradient.items():
        if not is_energy_id(pid):
            continue
        value = params.get(pid) - step * grad
        if not value > 0:
            raise RejectedStepError('Step would set %s to %.6g' % (
                pid, value))
        updates[pid] = value
    try:
        result = params.with_values(updates)
        result.site_params()
    except FluxQecError:
        raise
    except ValueError as problem:
        raise RejectedStepError('Step leaves the valid domain: %s' % (
            problem,)) from problem
    return result


def _dressed_frequencies(basis: ComputationalBasis) -> typing.List[float]:
    num = basis.num_qubits
    ground = basis.energies[basis.labels.index('0' * num)]
    result = []
    for site in range(num):
        label = ''.join('1' if i == site else '0' for i in range(num))
        result.append(float(basis.energies[basis.labels.index(label)]
                            - ground))
    return result


def initial_schedule(lattice: LatticeSpec, region: typing.Sequence[Coord],
                     target: str = 'x',
                     cnot_pairs: typing.Sequence[
                         typing.Tuple[Coord, Coord]] = (),
                     t_gate: float = 40.0, t_ramp: float = 30.0,
                     t_plateau: float = 70.0,
                     oscillator_basis_size: int = 60) -> GateSchedule:
    """Heuristic starting schedule for control optimization.

    X rounds drive every qubit at its dressed ω01 with a cosine pulse of
    amplitude 1/(|φ01| t_gate), the linear-Rabi value for a π rotation.
    CNOT rounds drive each control at its target's dressed ω01 with a
    flat-top pulse of amplitude 1/(|φ01| (t_ramp + t_plateau)).
    """
    region = list(region)
    site_params = sample_disordered_lattice(lattice)
    keep = lattice.keep_levels
    qubits = {c: fluxonium_eigensystem(site_params[c], oscillator_basis_size,
                                       keep).truncate(keep) for c in region}
    basis = select_computational_basis(
        build_idle_hamiltonian(qubits, lattice, region))
    freqs = _dressed_frequencies(basis)
    drives = []
    if target == 'x':
        for index, coord in enumerate(region):
            phi_01 = abs(qubits[coord].phi_op[0, 1])
            drives.append(DriveSpec(coord, 1.0 / (phi_01 * t_gate),
                                    freqs[index], 0.0,
                                    CosineEnvelope(t_gate)))
        comp = Compensation.zeros(len(region), 'z')
    elif target == 'cnot':
        for control, tgt in cnot_pairs:
            phi_01 = abs(qubits[control].phi_op[0, 1])
            drives.append(DriveSpec(
                control, 1.0 / (phi_01 * (t_ramp + t_plateau)),
                freqs[region.index(tgt)], 0.0,
                FlatTopEnvelope(t_ramp, t_plateau)))
        comp = Compensation.zeros(len(region), 'euler')
    else:
        raise ValueError('initial_schedule supports x and cnot, got %r' % (
            target,))
    return GateSchedule(region, drives, comp, target, list(cnot_pairs))
