"""Drive pulses, compensation rotations and target gates for one gate round.

Times are in ns, amplitudes and frequencies in GHz, angles in radians.
"""

import dataclasses
import typing

import numpy as np

from fluxqec.core.device import (
    Coord, TruncatedQubit, parse_site_name, site_name)


@dataclasses.dataclass(frozen=True)
class CosineEnvelope:
    "Raised-cosine pulse (1 − cos 2πt/τ)/2 of total length t_gate."

    t_gate: float

    def __post_init__(self):
        if not self.t_gate > 0:
            raise ValueError('t_gate must be positive, got %s' % self.t_gate)

    @property
    def duration(self) -> float:
        "Pulse length in ns."
        return self.t_gate

    def param_names(self) -> typing.Tuple[str, ...]:
        "Names of the duration parameters."
        return ('t_gate',)

    def shape(self, t: float) -> float:
        "Envelope normalized to a peak of 1."
        if t < 0 or t > self.t_gate:
            return 0.0
        return 0.5 * (1.0 - np.cos(2 * np.pi * t / self.t_gate))

    def shape_dt(self, t: float) -> float:
        "Time derivative of shape."
        if t < 0 or t > self.t_gate:
            return 0.0
        return np.pi * np.sin(2 * np.pi * t / self.t_gate) / self.t_gate

    def shape_grad(self, t: float) -> typing.Dict[str, float]:
        "Derivative of shape with respect to each duration parameter."
        if t < 0 or t > self.t_gate:
            return {'t_gate': 0.0}
        arg = 2 * np.pi * t / self.t_gate
        return {'t_gate': -np.pi * t * np.sin(arg) / self.t_gate ** 2}

    def to_dict(self) -> dict:
        "Serialize with unit-suffixed keys."
        return {'kind': 'cosine', 't_gate_ns': self.t_gate}


@dataclasses.dataclass(frozen=True)
class FlatTopEnvelope:
    """Plateau with cosine ramps of length t_ramp on both sides.

    Total length is 2 t_ramp + t_plateau.
    """

    t_ramp: float
    t_plateau: float

    def __post_init__(self):
        if not self.t_ramp > 0 or self.t_plateau < 0:
            raise ValueError('Bad flat-top durations ramp=%s plateau=%s' % (
                self.t_ramp, self.t_plateau))

    @property
    def duration(self) -> float:
        "Pulse length in ns."
        return 2 * self.t_ramp + self.t_plateau

    def param_names(self) -> typing.Tuple[str, ...]:
        "Names of the duration parameters."
        return ('t_ramp', 't_plateau')

    def shape(self, t: float) -> float:
        "Envelope normalized to a plateau of 1."
        ramp, total = self.t_ramp, self.duration
        if t < 0 or t > total:
            return 0.0
        if t < ramp:
            return 0.5 * (1.0 - np.cos(np.pi * t / ramp))
        if t <= ramp + self.t_plateau:
            return 1.0
        return 0.5 * (1.0 - np.cos(np.pi * (total - t) / ramp))

    def shape_dt(self, t: float) -> float:
        "Time derivative of shape."
        ramp, total = self.t_ramp, self.duration
        if t < 0 or t > total:
            return 0.0
        if t < ramp:
            return 0.5 * np.pi * np.sin(np.pi * t / ramp) / ramp
        if t <= ramp + self.t_plateau:
            return 0.0
        return -0.5 * np.pi * np.sin(np.pi * (total - t) / ramp) / ramp

    def shape_grad(self, t: float) -> typing.Dict[str, float]:
        "Derivative of shape with respect to t_ramp and t_plateau."
        ramp, total = self.t_ramp, self.duration
        if t < 0 or t > total or ramp <= t <= ramp + self.t_plateau:
            return {'t_ramp': 0.0, 't_plateau': 0.0}
        if t < ramp:
            sin = np.sin(np.pi * t / ramp)
            return {'t_ramp': -0.5 * np.pi * t * sin / ramp ** 2,
                    't_plateau': 0.0}
        left = total - t
        sin = np.sin(np.pi * left / ramp)
        return {'t_ramp': 0.5 * np.pi * sin * (2 * ramp - left) / ramp ** 2,
                't_plateau': 0.5 * np.pi * sin / ramp}

    def to_dict(self) -> dict:
        "Serialize with unit-suffixed keys."
        return {'kind': 'flat_top', 't_ramp_ns': self.t_ramp,
                't_plateau_ns': self.t_plateau}


Envelope = typing.Union[CosineEnvelope, FlatTopEnvelope]


def envelope_from_dict(data: dict) -> Envelope:
    "Inverse of the envelope to_dict methods."
    kind = data.get('kind', 'cosine')
    if kind == 'cosine':
        return CosineEnvelope(float(data['t_gate_ns']))
    if kind == 'flat_top':
        return FlatTopEnvelope(float(data['t_ramp_ns']),
                               float(data['t_plateau_ns']))
    raise ValueError('Unknown envelope kind %r' % kind)


@dataclasses.dataclass(frozen=True)
class DriveSpec:
    """Microwave drive E(t) cos(2π f t + φ) coupling through φ̂ of target.
    """

    target: Coord
    amplitude: float
    drive_freq: float
    phase: float
    envelope: Envelope

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError('Drive amplitude must be >= 0, got %s' % (
                self.amplitude))

    def param_names(self) -> typing.Tuple[str, ...]:
        "Names of every continuous parameter of this drive."
        return ('amplitude', 'drive_freq', 'phase'
                ) + self.envelope.param_names()

    def get(self, name: str) -> float:
        "Value of a parameter named in param_names."
        if hasattr(self.envelope, name):
            return getattr(self.envelope, name)
        return getattr(self, name)

    def with_param(self, name: str, value: float) -> 'DriveSpec':
        "Copy with one parameter changed."
        if hasattr(self.envelope, name):
            return dataclasses.replace(self, envelope=dataclasses.replace(
                self.envelope, **{name: value}))
        return dataclasses.replace(self, **{name: value})

    def field(self, t: float) -> float:
        "Scalar multiplying φ̂ at time t."
        return envelope_value(self, t) * np.cos(
            2 * np.pi * self.drive_freq * t + self.phase)

    def field_dt(self, t: float) -> float:
        "Time derivative of field."
        arg = 2 * np.pi * self.drive_freq * t + self.phase
        return self.amplitude * (
            self.envelope.shape_dt(t) * np.cos(arg)
            - self.envelope.shape(t) * np.sin(arg)
            * 2 * np.pi * self.drive_freq)

    def field_grad(self, t: float) -> typing.Dict[str, float]:
        "Partial derivatives of field at fixed t."
        arg = 2 * np.pi * self.drive_freq * t + self.phase
        shape = self.envelope.shape(t)
        cos, sin = np.cos(arg), np.sin(arg)
        result = {'amplitude': shape * cos,
                  'drive_freq': -self.amplitude * shape * sin * 2 * np.pi * t,
                  'phase': -self.amplitude * shape * sin}
        for name, value in self.envelope.shape_grad(t).items():
            result[name] = self.amplitude * value * cos
        return result

    def to_dict(self) -> dict:
        "Serialize with unit-suffixed keys."
        result = {'target': site_name(self.target),
                  'amplitude_ghz': self.amplitude,
                  'drive_freq_ghz': self.drive_freq,
                  'phase_rad': self.phase}
        result.update(self.envelope.to_dict())
        return result

    @classmethod
    def from_dict(cls, data: dict) -> 'DriveSpec':
        "Inverse of to_dict."
        return cls(target=parse_site_name(data['target']),
                   amplitude=float(data['amplitude_ghz']),
                   drive_freq=float(data['drive_freq_ghz']),
                   phase=float(data.get('phase_rad', 0.0)),
                   envelope=envelope_from_dict(data))


def envelope_value(spec: DriveSpec, t: float) -> float:
    """Envelope E(t) of a drive in GHz; zero outside the pulse.

>>> drive = DriveSpec((0, 2), 0.01, 0.5, 0.0, CosineEnvelope(40.0))
>>> envelope_value(drive, 0.0), round(envelope_value(drive, 20.0), 12)
(0.0, 0.01)
    """
    return float(spec.amplitude * spec.envelope.shape(t))


def drive_hamiltonian_term(spec: DriveSpec, t: float,
                           qubit: TruncatedQubit) -> np.ndarray:
    "E(t) cos(2π ω_d t + φ) φ̂ in the truncated eigenbasis."
    return spec.field(t) * qubit.phi_op


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def rz(theta: float) -> np.ndarray:
    "Z rotation exp(−iθZ/2)."
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def ry(theta: float) -> np.ndarray:
    "Y rotation exp(−iθY/2)."
    cos, sin = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[cos, -sin], [sin, cos]], dtype=complex)


def rz_derivative(theta: float) -> np.ndarray:
    "d rz / dθ."
    return np.diag([-0.5j * np.exp(-0.5j * theta),
                    0.5j * np.exp(0.5j * theta)])


def ry_derivative(theta: float) -> np.ndarray:
    "d ry / dθ."
    cos, sin = np.cos(theta / 2), np.sin(theta / 2)
    return 0.5 * np.array([[-sin, -cos], [cos, -sin]], dtype=complex)


def euler_unitary(angles: typing.Sequence[float]) -> np.ndarray:
    "Rz(a) Ry(b) Rz(c)."
    first, second, third = angles
    return rz(first) @ ry(second) @ rz(third)


def euler_derivatives(angles: typing.Sequence[float]) -> typing.List[
        np.ndarray]:
    "Derivatives of euler_unitary with respect to its three angles."
    first, second, third = angles
    return [rz_derivative(first) @ ry(second) @ rz(third),
            rz(first) @ ry_derivative(second) @ rz(third),
            rz(first) @ ry(second) @ rz_derivative(third)]


def kron_all(factors: typing.Sequence[np.ndarray]) -> np.ndarray:
    "Kronecker product with the first factor most significant."
    result = np.eye(1, dtype=complex)
    for factor in factors:
        result = np.kron(result, factor)
    return result


@dataclasses.dataclass
class Compensation:
    """Errorless single-qubit rotations applied around a gate round.

    One-qubit rounds use z_before/z_after (one angle per qubit); two-qubit
    rounds use u_before/u_after (Euler angles, shape (m, 3)). Unused
    fields stay None.
    """

    z_before: typing.Optional[np.ndarray] = None
    z_after: typing.Optional[np.ndarray] = None
    u_before: typing.Optional[np.ndarray] = None
    u_after: typing.Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ('z_before', 'z_after', 'u_before', 'u_after'):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value, dtype=float)
                if not np.all(np.isfinite(value)):
                    raise ValueError('Non-finite compensation %s' % name)
                setattr(self, name, value)
        for name in ('u_before', 'u_after'):
            value = getattr(self, name)
            if value is not None and (value.ndim != 2 or value.shape[1] != 3):
                raise ValueError('%s must have shape (m, 3)' % name)

    @classmethod
    def zeros(cls, num_qubits: int, kind: str) -> 'Compensation':
        "Identity compensation of the given kind ('z' or 'euler')."
        if kind == 'z':
            return cls(z_before=np.zeros(num_qubits),
                       z_after=np.zeros(num_qubits))
        if kind == 'euler':
            return cls(u_before=np.zeros((num_qubits, 3)),
                       u_after=np.zeros((num_qubits, 3)))
        raise ValueError('Unknown compensation kind %r' % kind)

    def angle_names(self) -> typing.List[typing.Tuple[str, int, int]]:
        "Addresses (field, qubit, component) of every angle."
        names = []
        for field in ('z_before', 'z_after'):
            value = getattr(self, field)
            if value is not None:
                names.extend((field, q, 0) for q in range(len(value)))
        for field in ('u_before', 'u_after'):
            value = getattr(self, field)
            if value is not None:
                names.extend((field, q, k) for q in range(len(value))
                             for k in range(3))
        return names

    def get(self, field: str, qubit: int, component: int = 0) -> float:
        "Read one angle."
        value = getattr(self, field)
        return float(value[qubit] if value.ndim == 1
                     else value[qubit, component])

    def with_angle(self, field: str, qubit: int, component: int,
                   angle: float) -> 'Compensation':
        "Copy with one angle changed."
        value = getattr(self, field).copy()
        if value.ndim == 1:
            value[qubit] = angle
        else:
            value[qubit, component] = angle
        return dataclasses.replace(self, **{field: value})

    def factors(self, side: str, num_qubits: int) -> typing.List[np.ndarray]:
        "Per-qubit 2×2 factors for side 'before' or 'after'."
        z_val = getattr(self, 'z_' + side)
        u_val = getattr(self, 'u_' + side)
        if z_val is not None and u_val is not None:
            raise ValueError('Compensation mixes z and euler on %s' % side)
        if z_val is not None:
            if len(z_val) != num_qubits:
                raise ValueError('z_%s has %i angles for %i qubits' % (
                    side, len(z_val), num_qubits))
            return [rz(a) for a in z_val]
        if u_val is not None:
            if len(u_val) != num_qubits:
                raise ValueError('u_%s has %i rows for %i qubits' % (
                    side, len(u_val), num_qubits))
            return [euler_unitary(a) for a in u_val]
        return [IDENTITY_2] * num_qubits

    def factor_derivative(self, field: str, qubit: int,
                          component: int) -> np.ndarray:
        "Derivative of one per-qubit factor with respect to one angle."
        value = getattr(self, field)
        if field.startswith('z_'):
            return rz_derivative(value[qubit])
        return euler_derivatives(value[qubit])[component]

    def operators(self, num_qubits: int) -> typing.Tuple[
            np.ndarray, np.ndarray]:
        "Full (C_before, C_after) on the 2^m computational space."
        return (kron_all(self.factors('before', num_qubits)),
                kron_all(self.factors('after', num_qubits)))

    def to_dict(self) -> dict:
        "Serialize to plain lists (radians)."
        return {name + '_rad': getattr(self, name).tolist()
                for name in ('z_before', 'z_after', 'u_before', 'u_after')
                if getattr(self, name) is not None}

    @classmethod
    def from_dict(cls, data: dict) -> 'Compensation':
        "Inverse of to_dict."
        kwargs = {}
        for name in ('z_before', 'z_after', 'u_before', 'u_after'):
            if name + '_rad' in data:
                kwargs[name] = np.asarray(data[name + '_rad'], dtype=float)
        return cls(**kwargs)


def apply_compensation(u_round: np.ndarray,
                       comp: Compensation) -> np.ndarray:
    """Return C_after · u_round · C_before.

    :param u_round:  Matrix on the 2^m computational subspace.

    :param comp:  Compensation angles for m qubits.
    """
    dim = u_round.shape[0]
    num_qubits = int(round(np.log2(dim)))
    if u_round.shape != (dim, dim) or 2 ** num_qubits != dim:
        raise ValueError('u_round must be square of size 2^m, got %s' % (
            u_round.shape,))
    before, after = comp.operators(num_qubits)
    return after @ u_round @ before


@dataclasses.dataclass
class GateSchedule:
    """All drives of one simultaneous round plus compensation and target.

    :param region:  Sites in tensor-product order.

    :param target:  'x' for X on every site, 'cnot' for CNOTs on cnot_pairs,
                    'idle' for the identity.

    :param idle_duration:  Round length when there are no drives.
    """

    region: typing.List[Coord]
    drives: typing.List[DriveSpec]
    compensation: Compensation
    target: str = 'x'
    cnot_pairs: typing.List[typing.Tuple[Coord, Coord]] = dataclasses.field(
        default_factory=list)
    idle_duration: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        "Raise ValueError if the schedule is inconsistent."
        seen = set()
        for drive in self.drives:
            if drive.target not in self.region:
                raise ValueError('Drive target %s outside region' % (
                    drive.target,))
            if drive.target in seen:
                raise ValueError('Two drives on %s in one round' % (
                    drive.target,))
            seen.add(drive.target)
        if self.target not in ('x', 'cnot', 'idle'):
            raise ValueError('Unknown target %r' % self.target)
        for control, tgt in self.cnot_pairs:
            if control not in self.region or tgt not in self.region:
                raise ValueError('CNOT pair %s outside region' % (
                    (control, tgt),))
        if self.target == 'cnot' and not self.cnot_pairs:
            raise ValueError('CNOT target needs cnot_pairs')

    @property
    def num_qubits(self) -> int:
        "Number of sites m."
        return len(self.region)

    @property
    def duration(self) -> float:
        "Common round length: the longest drive, padded with zero field."
        if not self.drives:
            return self.idle_duration
        return max([d.envelope.duration for d in self.drives]
                   + [self.idle_duration])

    def drive_for(self, coord: Coord) -> typing.Optional[DriveSpec]:
        "Drive acting on coord, if any."
        for drive in self.drives:
            if drive.target == coord:
                return drive
        return None

    def replace(self, **kwargs) -> 'GateSchedule':
        "Copy with fields replaced."
        return dataclasses.replace(self, **kwargs)

    def with_drive(self, index: int, drive: DriveSpec) -> 'GateSchedule':
        "Copy with one drive replaced."
        drives = list(self.drives)
        drives[index] = drive
        return self.replace(drives=drives)

    def to_dict(self) -> dict:
        "Serialize for configs and reports."
        return {'region': [site_name(c) for c in self.region],
                'target': self.target,
                'cnot_pairs': [[site_name(a), site_name(b)]
                               for a, b in self.cnot_pairs],
                'idle_duration_ns': self.idle_duration,
                'drives': [d.to_dict() for d in self.drives],
                'compensation': self.compensation.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> 'GateSchedule':
        "Inverse of to_dict."
        region = [parse_site_name(n) for n in data['region']]
        comp = Compensation.from_dict(data.get('compensation', {}))
        return cls(region=region,
                   drives=[DriveSpec.from_dict(d)
                           for d in data.get('drives', [])],
                   compensation=comp, target=data.get('target', 'x'),
                   cnot_pairs=[(parse_site_name(a), parse_site_name(b))
                               for a, b in data.get('cnot_pairs', [])],
                   idle_duration=float(data.get('idle_duration_ns', 0.0)))


def cnot_matrix(num_qubits: int, control: int, target: int) -> np.ndarray:
    "CNOT on 2^m states with qubit 0 the most significant bit."
    dim = 2 ** num_qubits
    result = np.zeros((dim, dim), dtype=complex)
    cbit = 1 << (num_qubits - 1 - control)
    tbit = 1 << (num_qubits - 1 - target)
    for index in range(dim):
        out = index ^ tbit if index & cbit else index
        result[out, index] = 1.0
    return result


def target_unitary(schedule: GateSchedule) -> np.ndarray:
    "Ideal operator of the round on the 2^m computational space."
    num = schedule.num_qubits
    if schedule.target == 'idle':
        return np.eye(2 ** num, dtype=complex)
    if schedule.target == 'x':
        return kron_all([PAULI_X] * num)
    result = np.eye(2 ** num, dtype=complex)
    for control, tgt in schedule.cnot_pairs:
        result = cnot_matrix(num, schedule.region.index(control),
                             schedule.region.index(tgt)) @ result
    return result
