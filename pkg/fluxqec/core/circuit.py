"""Rotated surface-code memory circuit, uniform-LCPEM sampling and Pauli-frame
simulation.

Qubit numbering: data (r, c) is r * d + c; ancillas follow in row-major
order of their plaquette corner (R, C) with 0 <= R, C <= d. Ancilla (R, C)
checks the data at (R-1, C-1), (R-1, C), (R, C-1), (R, C) that exist.

Measurement records hold flips relative to the noiseless reference run, so
a detector is just the XOR of the flips it compares.
"""

import dataclasses
import itertools
import logging
import typing

import networkx
import numpy as np

from fluxqec.core.rng import CounterStream
from fluxqec.core.twirl import PAULI_LABELS, LcpemParams


DATA, X_ANCILLA, Z_ANCILLA = 'data', 'x_ancilla', 'z_ancilla'

# Offsets of the data touched in each CNOT step. X checks sweep a Z shape so
# their hook errors lie along rows; Z checks sweep an N shape.
X_ORDER = ((-1, -1), (-1, 0), (0, -1), (0, 0))
Z_ORDER = ((-1, -1), (0, -1), (-1, 0), (0, 0))

LAYER_KINDS = ('reset', 'hadamard', 'cnot', 'measure')
_KIND_CODES = {'reset': 'R', 'hadamard': 'H', 'cnot': 'CX', 'measure': 'M'}

_PURPOSE_K = 0
_PURPOSE_SET = 1
_PURPOSE_PAULI = 2      # plus the slot of the member location, below 8
_PURPOSE_IDLE = 8
_PURPOSE_IDLE_PAULI = 9
_PURPOSE_RESET = 10
_PURPOSE_MEASURE = 11
_PURPOSE_GAUGE = 12


@dataclasses.dataclass
class Layer:
    """One time step: every qubit is in exactly one gate or in idle.

    gates holds one tuple per gate location; CNOTs are (control, target).
    """

    kind: str
    cycle: int
    gates: typing.List[typing.Tuple[int, ...]]
    idle: typing.List[int]

    @property
    def arity(self) -> int:
        "Qubits per gate location."
        return 2 if self.kind == 'cnot' else 1

    def targets(self) -> typing.List[int]:
        "Qubits acted on, flattened in gate order."
        return [q for gate in self.gates for q in gate]

    def duration(self, params: LcpemParams) -> float:
        "Layer length in ns under the given durations."
        return {'reset': params.t_reset, 'hadamard': params.t_1q,
                'cnot': params.t_2q, 'measure': params.t_measure}[self.kind]


@dataclasses.dataclass
class SyndromeCircuit:
    """Z-basis memory experiment on a distance-d rotated surface code.

    :param roles:  DATA, X_ANCILLA or Z_ANCILLA per qubit.

    :param coords:  (r, c) for data, plaquette corner (R, C) for ancillas.

    :param supports:  Ancilla qubit to its checked data qubits.

    :param logical_z:  Data qubits of the Z logical read out at the end.

    :param hardware:  Coupling graph (ancilla to each data it checks);
                      correlated errors spread along it.
    """

    distance: int
    rounds: int
    roles: typing.List[str]
    coords: typing.List[typing.Tuple[int, int]]
    supports: typing.Dict[int, typing.Tuple[int, ...]]
    layers: typing.List[Layer]
    logical_z: typing.Tuple[int, ...]
    hardware: networkx.Graph

    @property
    def num_qubits(self) -> int:
        "Data plus ancilla count."
        return len(self.roles)

    @property
    def data_qubits(self) -> typing.List[int]:
        "Indices of data qubits."
        return [q for q, role in enumerate(self.roles) if role == DATA]

    @property
    def ancillas(self) -> typing.List[int]:
        "Indices of all ancillas in record order."
        return [q for q, role in enumerate(self.roles) if role != DATA]

    @property
    def x_ancillas(self) -> typing.List[int]:
        "Indices of X-check ancillas."
        return [q for q, role in enumerate(self.roles) if role == X_ANCILLA]

    @property
    def z_ancillas(self) -> typing.List[int]:
        "Indices of Z-check ancillas."
        return [q for q, role in enumerate(self.roles) if role == Z_ANCILLA]

    @property
    def num_z_detectors(self) -> int:
        "Z detectors: one per Z check per round plus the final data check."
        return (self.rounds + 1) * len(self.z_ancillas)

    def cnot_count(self, role: typing.Optional[str] = None) -> int:
        "CNOTs in one cycle, optionally only those of one check type."
        total = 0
        for layer in self.layers:
            if layer.kind != 'cnot' or layer.cycle != 0:
                continue
            for control, target in layer.gates:
                anc = control if self.roles[control] != DATA else target
                if role is None or self.roles[anc] == role:
                    total += 1
        return total

    def check_matrix(self, role: str) -> np.ndarray:
        "Boolean (checks × data) matrix for X_ANCILLA or Z_ANCILLA checks."
        checks = [q for q, r in enumerate(self.roles) if r == role]
        matrix = np.zeros((len(checks), self.distance ** 2), dtype=bool)
        for row, anc in enumerate(checks):
            matrix[row, list(self.supports[anc])] = True
        return matrix

    def to_text(self) -> str:
        """Line-oriented listing, one layer per line.

        Format is "<cycle> <op> <qubits> ; I <idle qubits>".
        """
        lines = []
        for layer in self.layers:
            text = '%i %s %s' % (layer.cycle, _KIND_CODES[layer.kind],
                                 ' '.join(str(q) for q in layer.targets()))
            if layer.idle:
                text += ' ; I ' + ' '.join(str(q) for q in layer.idle)
            lines.append(text)
        return '\n'.join(lines) + '\n'

    def description(self) -> typing.Dict[str, typing.Any]:
        "Small dict identifying the circuit for hashing and reports."
        return {'distance': self.distance, 'rounds': self.rounds,
                'layout': 'rotated', 'num_layers': len(self.layers)}


def _plaquettes(distance: int) -> typing.List[typing.Tuple[
        typing.Tuple[int, int], str]]:
    result = []
    for row in range(distance + 1):
        for col in range(distance + 1):
            role = X_ANCILLA if (row + col) % 2 else Z_ANCILLA
            top_bottom = row in (0, distance)
            left_right = col in (0, distance)
            if top_bottom and left_right:
                continue
            if top_bottom and role != X_ANCILLA:
                continue
            if left_right and role != Z_ANCILLA:
                continue
            result.append(((row, col), role))
    return result


def build_syndrome_circuit(distance: int, rounds: int) -> SyndromeCircuit:
    """Build the memory circuit with rounds syndrome cycles.

    :param distance:  Odd code distance d >= 3.

    :param rounds:  Number of syndrome cycles >= 1.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  SyndromeCircuit. Each cycle is reset, H on X ancillas, four
              CNOT layers, H on X ancillas, measure. The first cycle also
              resets the data to |0>, the last one also measures them in Z.
    """
    if distance < 3 or distance % 2 == 0:
        raise ValueError('Distance must be odd and >= 3, got %s' % distance)
    if rounds < 1:
        raise ValueError('Need at least one round, got %s' % rounds)
    roles = [DATA] * distance ** 2
    coords = [(r, c) for r in range(distance) for c in range(distance)]
    supports = {}
    orders = {}
    for corner, role in _plaquettes(distance):
        qubit = len(roles)
        roles.append(role)
        coords.append(corner)
        order = X_ORDER if role == X_ANCILLA else Z_ORDER
        touched = []
        for d_row, d_col in order:
            row, col = corner[0] + d_row, corner[1] + d_col
            ok = 0 <= row < distance and 0 <= col < distance
            touched.append(row * distance + col if ok else None)
        orders[qubit] = touched
        supports[qubit] = tuple(sorted(q for q in touched if q is not None))
    logical_z = tuple(range(distance))
    for anc, support in supports.items():
        if roles[anc] == X_ANCILLA:
            assert len(set(support) & set(logical_z)) % 2 == 0
    hardware = networkx.Graph()
    hardware.add_nodes_from(range(len(roles)))
    for anc, support in supports.items():
        hardware.add_edges_from((anc, q) for q in support)

    everyone = list(range(len(roles)))
    data = list(range(distance ** 2))
    ancillas = [q for q in everyone if roles[q] != DATA]
    x_anc = [q for q in ancillas if roles[q] == X_ANCILLA]

    def make(kind, cycle, gates):
        busy = {q for gate in gates for q in gate}
        return Layer(kind, cycle, gates, [q for q in everyone
                                          if q not in busy])

    layers = []
    for cycle in range(rounds):
        reset = ancillas + (data if cycle == 0 else [])
        layers.append(make('reset', cycle, [(q,) for q in reset]))
        layers.append(make('hadamard', cycle, [(q,) for q in x_anc]))
        for step in range(4):
            gates = []
            for anc in ancillas:
                target = orders[anc][step]
                if target is None:
                    continue
                gates.append((anc, target) if roles[anc] == X_ANCILLA
                             else (target, anc))
            layers.append(make('cnot', cycle, gates))
        layers.append(make('hadamard', cycle, [(q,) for q in x_anc]))
        measured = ancillas + (data if cycle == rounds - 1 else [])
        layers.append(make('measure', cycle, [(q,) for q in measured]))
    return SyndromeCircuit(distance, rounds, roles, coords, supports, layers,
                           logical_z, hardware)


def neighbourhood_sets(graph: networkx.Graph, center: int, size: int
                       ) -> typing.List[typing.Tuple[int, ...]]:
    """Location sets of exactly size members inside the neighbourhood of
    center: center itself plus size - 1 of its direct neighbours.

    Each set is returned with center first and the rest sorted.

>>> star = networkx.star_graph(4)
>>> len(neighbourhood_sets(star, 0, 3)), len(neighbourhood_sets(star, 1, 3))
(6, 0)
>>> neighbourhood_sets(networkx.path_graph(4), 1, 2)
[(1, 0), (1, 2)]
    """
    neighbours = sorted(graph.neighbors(center))
    return [(center,) + combo
            for combo in itertools.combinations(neighbours, size - 1)]


@dataclasses.dataclass
class _LayerPlan:
    """Precomputed neighbourhood tables of one gate layer.

    members[k] has shape (locations, max sets, k, arity) and holds the
    qubits of every member location of every k-set, center first.
    """

    keys: np.ndarray
    counts: typing.Dict[int, np.ndarray]
    members: typing.Dict[int, np.ndarray]


def _plan_layer(circuit: SyndromeCircuit, layer: Layer) -> _LayerPlan:
    if layer.kind == 'hadamard':
        graph = circuit.hardware
        centers = [gate[0] for gate in layer.gates]
        location_qubits = {q: (q,) for q in graph.nodes}
    else:
        graph = networkx.Graph()
        graph.add_nodes_from(range(len(layer.gates)))
        for first in range(len(layer.gates)):
            for second in range(first + 1, len(layer.gates)):
                if any(circuit.hardware.has_edge(a, b)
                       for a in layer.gates[first]
                       for b in layer.gates[second]):
                    graph.add_edge(first, second)
        centers = list(range(len(layer.gates)))
        location_qubits = dict(enumerate(layer.gates))
    counts, members = {}, {}
    for size in (1, 2, 3):
        sets = [neighbourhood_sets(graph, c, size) for c in centers]
        counts[size] = np.array([len(s) for s in sets], dtype=np.int64)
        widest = max([1] + [len(s) for s in sets])
        table = np.full((len(centers), widest, size, layer.arity), -1,
                        dtype=np.int64)
        for row, options in enumerate(sets):
            for col, locations in enumerate(options):
                for slot, loc in enumerate(locations):
                    table[row, col, slot] = location_qubits[loc]
        members[size] = table
    keys = np.array([gate[0] for gate in layer.gates], dtype=np.int64)
    return _LayerPlan(keys, counts, members)


@dataclasses.dataclass
class ErrorEvent:
    """One sampled error: where it started and what it applied."""

    layer: int
    shot: int
    kind: str
    center: typing.Tuple[int, ...]
    qubits: typing.Tuple[int, ...]
    pauli: str


@dataclasses.dataclass
class LayerEvents:
    """Errors of one layer for a batch of shots.

    shot entries are positions in the batch. Paulis (x, z bits) act after
    the layer's operations; flips invert measurement records.
    """

    shot: np.ndarray
    qubit: np.ndarray
    x: np.ndarray
    z: np.ndarray
    flip_shot: np.ndarray
    flip_qubit: np.ndarray
    provenance: typing.List[ErrorEvent] = dataclasses.field(
        default_factory=list)

    @classmethod
    def empty(cls) -> 'LayerEvents':
        "No errors."
        ints = np.zeros(0, dtype=np.int64)
        bools = np.zeros(0, dtype=bool)
        return cls(ints, ints, bools, bools, ints, ints)


def _digits_to_bits(digits: np.ndarray) -> typing.Tuple[
        np.ndarray, np.ndarray]:
    return (digits == 1) | (digits == 2), (digits == 2) | (digits == 3)


class LcpemSampler:
    """Draw uniform-LCPEM errors layer by layer from counter-based streams.

    :param circuit:  The memory circuit.

    :param params:  Rates and durations.

    :param seed:  Master seed; every draw is keyed by (shot, layer,
                  location, purpose) so different rates share randomness.

    The k of a gate location is chosen by one uniform u: k = 3 if u < p3,
    2 if u < p3 + p2, 1 if u < p3 + p2 + p1. A k-set is the center plus
    k - 1 of its direct neighbours: hardware neighbours in single-qubit
    layers, gate locations touching the gate in CNOT layers. A center with
    fewer than k - 1 neighbours gets the error on itself and all of its
    neighbours, which is the k-location error truncated to the lattice;
    its probability stays at pk and is not spread over the other sizes.
    """

    def __init__(self, circuit: SyndromeCircuit, params: LcpemParams,
                 seed: int):
        self.circuit = circuit
        self.params = params
        self.stream = CounterStream(seed)
        self._plans = {}
        for index, layer in enumerate(circuit.layers):
            if layer.kind in ('hadamard', 'cnot') and layer.gates:
                self._plans[index] = _plan_layer(circuit, layer)
        self._gate_rates = {1: params.gate_rates(1), 2: params.gate_rates(2)}

    def layer_events(self, index: int, shots: np.ndarray,
                     keep_provenance: bool = False) -> LayerEvents:
        """Errors of layer index for the absolute shot numbers in shots.
        """
        layer = self.circuit.layers[index]
        shots = np.asarray(shots, dtype=np.int64)
        parts = []
        flips = ([], [])
        provenance = [] if keep_provenance else None
        if index in self._plans:
            parts.extend(self._gate_errors(index, layer, shots, provenance))
        idle = np.array(layer.idle, dtype=np.int64)
        rate = self.params.idle_rate(layer.duration(self.params))
        if rate > 0 and len(idle):
            parts.append(self._idle_errors(index, idle, rate, shots,
                                           provenance))
        targets = np.array(layer.targets(), dtype=np.int64)
        if layer.kind == 'reset' and self.params.p_reset > 0:
            u = self.stream.uniform(shots[:, None], index, targets[None, :],
                                    _PURPOSE_RESET)
            pos, col = np.nonzero(u < self.params.p_reset)
            qubits = targets[col]
            parts.append((pos, qubits, np.ones(len(pos), dtype=bool),
                          np.zeros(len(pos), dtype=bool)))
            if provenance is not None:
                provenance.extend(ErrorEvent(index, int(shots[p]), 'reset',
                                             (int(q),), (int(q),), 'X')
                                  for p, q in zip(pos, qubits))
        if layer.kind == 'measure' and self.params.p_measure > 0:
            u = self.stream.uniform(shots[:, None], index, targets[None, :],
                                    _PURPOSE_MEASURE)
            pos, col = np.nonzero(u < self.params.p_measure)
            flips = (pos, targets[col])
            if provenance is not None:
                provenance.extend(ErrorEvent(index, int(shots[p]), 'measure',
                                             (int(q),), (int(q),), 'M')
                                  for p, q in zip(*flips))
        if not parts:
            events = LayerEvents.empty()
        else:
            events = LayerEvents(
                *[np.concatenate([p[i] for p in parts]) for i in range(4)],
                flip_shot=np.zeros(0, dtype=np.int64),
                flip_qubit=np.zeros(0, dtype=np.int64))
        events.flip_shot = np.asarray(flips[0], dtype=np.int64)
        events.flip_qubit = np.asarray(flips[1], dtype=np.int64)
        events.provenance = provenance or []
        return events

    def _gate_errors(self, index, layer, shots, provenance):
        plan = self._plans[index]
        p1, p2, p3 = self._gate_rates[layer.arity]
        if p1 + p2 + p3 <= 0:
            return []
        u = self.stream.uniform(shots[:, None], index, plan.keys[None, :],
                                _PURPOSE_K)
        sizes = np.zeros(u.shape, dtype=np.int64)
        sizes[u < p3 + p2 + p1] = 1
        sizes[u < p3 + p2] = 2
        sizes[u < p3] = 3
        pos, loc = np.nonzero(sizes)
        if not len(pos):
            return []
        sizes = sizes[pos, loc]
        for size in (3, 2):
            missing = (sizes == size) & (plan.counts[size][loc] == 0)
            sizes[missing] -= 1
        options = 3 if layer.arity == 1 else 15
        parts = []
        for size in (1, 2, 3):
            chosen = sizes == size
            if not np.any(chosen):
                continue
            c_pos, c_loc = pos[chosen], loc[chosen]
            abs_shot, key = shots[c_pos], plan.keys[c_loc]
            pick = self.stream.integers(plan.counts[size][c_loc], abs_shot,
                                        index, key, _PURPOSE_SET)
            members = plan.members[size][c_loc, pick]
            digits = np.zeros(members.shape, dtype=np.int64)
            for slot in range(size):
                value = self.stream.integers(options, abs_shot, index, key,
                                             _PURPOSE_PAULI + slot) + 1
                if layer.arity == 1:
                    digits[:, slot, 0] = value
                else:
                    digits[:, slot, 0] = value // 4
                    digits[:, slot, 1] = value % 4
            flat_q = members.reshape(len(c_pos), -1)
            flat_d = digits.reshape(len(c_pos), -1)
            rows = np.repeat(c_pos, flat_q.shape[1])
            qubits, dig = flat_q.reshape(-1), flat_d.reshape(-1)
            keep = dig != 0
            x_bits, z_bits = _digits_to_bits(dig[keep])
            parts.append((rows[keep], qubits[keep], x_bits, z_bits))
            if provenance is not None:
                for event in range(len(c_pos)):
                    qs = tuple(int(q) for q in flat_q[event])
                    provenance.append(ErrorEvent(
                        index, int(abs_shot[event]), 'gate',
                        tuple(int(q) for q in members[event, 0]), qs,
                        ''.join(PAULI_LABELS[d] for d in flat_d[event])))
        return parts

    def _idle_errors(self, index, idle, rate, shots, provenance):
        u = self.stream.uniform(shots[:, None], index, idle[None, :],
                                _PURPOSE_IDLE)
        pos, col = np.nonzero(u < rate)
        qubits = idle[col]
        digits = self.stream.integers(3, shots[pos], index, qubits,
                                      _PURPOSE_IDLE_PAULI) + 1
        x_bits, z_bits = _digits_to_bits(digits)
        if provenance is not None:
            provenance.extend(
                ErrorEvent(index, int(shots[p]), 'idle', (int(q),), (int(q),),
                           PAULI_LABELS[d])
                for p, q, d in zip(pos, qubits, digits))
        return pos, qubits, x_bits, z_bits

    def gauge_bits(self, index: int, shots: np.ndarray,
                   qubits: np.ndarray) -> np.ndarray:
        """Random Z frame bits after a reset; physically trivial on |0>."""
        bits = self.stream.bits(shots[:, None], index, qubits[None, :],
                                _PURPOSE_GAUGE)
        return (bits & np.uint64(1)).astype(bool)


@dataclasses.dataclass
class SampledError:
    """All errors of one shot, layer by layer.

    paulis[layer] maps qubit to the product Pauli applied after that layer;
    measurement_flips[layer] lists flipped measurement qubits.
    """

    paulis: typing.List[typing.Dict[int, str]]
    measurement_flips: typing.List[typing.Set[int]]
    provenance: typing.List[ErrorEvent]

    def is_empty(self) -> bool:
        "True when nothing was sampled."
        return not any(self.paulis) and not any(self.measurement_flips)

    @classmethod
    def from_layers(cls, num_layers: int,
                    paulis: typing.Mapping[int, typing.Mapping[int, str]],
                    flips: typing.Optional[typing.Mapping[
                        int, typing.Iterable[int]]] = None
                    ) -> 'SampledError':
        "Hand-built error, for example a single injected fault."
        flips = flips or {}
        return cls([dict(paulis.get(i, {})) for i in range(num_layers)],
                   [set(flips.get(i, ())) for i in range(num_layers)], [])

    def layer_events(self, index: int) -> LayerEvents:
        "The errors of one layer as a single-shot batch."
        items = [(q, p) for q, p in sorted(self.paulis[index].items())
                 if p != 'I']
        digits = np.array([PAULI_LABELS.index(p) for _, p in items],
                          dtype=np.int64)
        x_bits, z_bits = _digits_to_bits(digits)
        flips = sorted(self.measurement_flips[index])
        return LayerEvents(np.zeros(len(items), dtype=np.int64),
                           np.array([q for q, _ in items], dtype=np.int64),
                           x_bits, z_bits,
                           np.zeros(len(flips), dtype=np.int64),
                           np.array(flips, dtype=np.int64))


def _combine(x_bit: bool, z_bit: bool) -> str:
    return PAULI_LABELS[{(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}[
        (int(x_bit), int(z_bit))]]


def sample_lcpem(circuit: SyndromeCircuit, params: LcpemParams, seed: int,
                 shot: int = 0) -> SampledError:
    """Sample every error of one shot.

    The same (seed, shot) pair gives the same errors that the batched
    Monte Carlo path applies to that shot.
    """
    sampler = LcpemSampler(circuit, params, seed)
    paulis, flips, provenance = [], [], []
    for index in range(len(circuit.layers)):
        events = sampler.layer_events(index, np.array([shot]),
                                      keep_provenance=True)
        frame = {}
        for qubit, x_bit, z_bit in zip(events.qubit, events.x, events.z):
            old = frame.get(int(qubit), (False, False))
            frame[int(qubit)] = (old[0] ^ bool(x_bit), old[1] ^ bool(z_bit))
        paulis.append({q: _combine(*bits) for q, bits in frame.items()
                       if any(bits)})
        flips.append({int(q) for q in events.flip_qubit})
        provenance.extend(events.provenance)
    return SampledError(paulis, flips, provenance)


@dataclasses.dataclass
class MeasurementRecord:
    """Measurement flips relative to the noiseless reference.

    ancilla has shape (shots, rounds, ancillas) in circuit.ancillas order;
    data has shape (shots, d²) for the final Z readout.
    """

    ancilla: np.ndarray
    data: np.ndarray


@dataclasses.dataclass
class DetectionEvents:
    """Detector values for a batch of shots.

    z_events[:, r * n_z + i] compares Z check i between rounds r - 1 and r
    (round 0 against the |0> preparation, round == rounds against the
    check rebuilt from final data). x_events are informational.
    logical is the flip of the Z logical readout.
    """

    z_events: np.ndarray
    x_events: np.ndarray
    logical: np.ndarray


def detection_events(circuit: SyndromeCircuit,
                     record: MeasurementRecord) -> DetectionEvents:
    "Turn a measurement record into detection events and logical flips."
    ancillas = circuit.ancillas
    z_pos = [ancillas.index(q) for q in circuit.z_ancillas]
    x_pos = [ancillas.index(q) for q in circuit.x_ancillas]
    shots = record.data.shape[0]
    z_rounds = record.ancilla[:, :, z_pos]
    compared = z_rounds.copy()
    compared[:, 1:] ^= z_rounds[:, :-1]
    checks = circuit.check_matrix(Z_ANCILLA).astype(np.uint8)
    rebuilt = (record.data.astype(np.uint8) @ checks.T) % 2 == 1
    final = rebuilt ^ z_rounds[:, -1]
    z_events = np.concatenate([compared.reshape(shots, -1), final], axis=1)
    x_rounds = record.ancilla[:, :, x_pos]
    x_events = (x_rounds[:, 1:] ^ x_rounds[:, :-1]).reshape(shots, -1)
    logical = np.bitwise_xor.reduce(
        record.data[:, list(circuit.logical_z)], axis=1)
    return DetectionEvents(z_events, x_events, logical)


class FrameSimulator:
    """Vectorized Pauli-frame propagation for a batch of shots.

    Frames are boolean arrays fx, fz of shape (shots, qubits). H swaps the
    two, CNOT copies x forward and z backward, reset clears, and a Z
    measurement reports the x bit.
    """

    def __init__(self, circuit: SyndromeCircuit):
        self.circuit = circuit
        self._ops = []
        for layer in circuit.layers:
            gates = np.array(layer.gates, dtype=np.int64).reshape(
                len(layer.gates), layer.arity)
            self._ops.append(gates)
        ancillas = circuit.ancillas
        self._record_cols = np.full(circuit.num_qubits, -1, dtype=np.int64)
        self._record_cols[ancillas] = np.arange(len(ancillas))
        self._data_cols = np.full(circuit.num_qubits, -1, dtype=np.int64)
        self._data_cols[circuit.data_qubits] = np.arange(
            len(circuit.data_qubits))

    def run(self, num_shots: int,
            events: typing.Callable[[int], LayerEvents],
            gauge: typing.Optional[typing.Callable[
                [int, np.ndarray], np.ndarray]] = None
            ) -> MeasurementRecord:
        """Propagate frames through every layer.

        :param num_shots:  Batch size.

        :param events:  Called with a layer index; returns its errors.

        :param gauge:  Optional callable (layer, reset qubits) returning
                       random Z bits of shape (shots, qubits) after resets.
        """
        circuit = self.circuit
        n_qubits = circuit.num_qubits
        fx = np.zeros((num_shots, n_qubits), dtype=bool)
        fz = np.zeros((num_shots, n_qubits), dtype=bool)
        ancilla_rec = np.zeros((num_shots, circuit.rounds,
                                len(circuit.ancillas)), dtype=bool)
        data_rec = np.zeros((num_shots, circuit.distance ** 2), dtype=bool)
        for index, layer in enumerate(circuit.layers):
            gates = self._ops[index]
            measured = None
            if layer.kind == 'reset':
                qubits = gates[:, 0]
                fx[:, qubits] = False
                fz[:, qubits] = False
                if gauge is not None:
                    fz[:, qubits] = gauge(index, qubits)
            elif layer.kind == 'hadamard':
                qubits = gates[:, 0]
                swap = fx[:, qubits].copy()
                fx[:, qubits] = fz[:, qubits]
                fz[:, qubits] = swap
            elif layer.kind == 'cnot':
                controls, targets = gates[:, 0], gates[:, 1]
                fx[:, targets] ^= fx[:, controls]
                fz[:, controls] ^= fz[:, targets]
            else:
                measured = gates[:, 0]
            found = events(index)
            if measured is not None:
                outcome = fx[:, measured].copy()
                if len(found.flip_shot):
                    column = {q: i for i, q in enumerate(measured)}
                    cols = np.array([column[q] for q in found.flip_qubit],
                                    dtype=np.int64)
                    np.bitwise_xor.at(outcome, (found.flip_shot, cols), True)
                is_anc = self._record_cols[measured] >= 0
                ancilla_rec[:, layer.cycle,
                            self._record_cols[measured[is_anc]]] = \
                    outcome[:, is_anc]
                if np.any(~is_anc):
                    data_rec[:, self._data_cols[measured[~is_anc]]] = \
                        outcome[:, ~is_anc]
            if len(found.shot):
                np.bitwise_xor.at(fx, (found.shot, found.qubit), found.x)
                np.bitwise_xor.at(fz, (found.shot, found.qubit), found.z)
        return MeasurementRecord(ancilla_rec, data_rec)


def simulate(circuit: SyndromeCircuit, error: SampledError,
             seed: typing.Optional[int] = None) -> typing.Tuple[
                 MeasurementRecord, DetectionEvents]:
    """Pauli-frame simulation of one shot with the given errors.

    :param seed:  When given, random Z gauge bits are applied after every
                  reset so that non-deterministic X-check outcomes vary
                  like real ones. Detection events do not depend on it.
    """
    if len(error.paulis) != len(circuit.layers):
        raise ValueError('Error has %i layers but circuit has %i' % (
            len(error.paulis), len(circuit.layers)))
    gauge = None
    if seed is not None:
        sampler = LcpemSampler(circuit, LcpemParams.zero(), seed)
        shot = np.zeros(1, dtype=np.int64)

        def gauge(index, qubits):
            return sampler.gauge_bits(index, shot, qubits)
    record = FrameSimulator(circuit).run(1, error.layer_events, gauge)
    return record, detection_events(circuit, record)


def run_shots(circuit: SyndromeCircuit, params: LcpemParams, seed: int,
              shots: np.ndarray,
              simulator: typing.Optional[FrameSimulator] = None
              ) -> DetectionEvents:
    """Sample and simulate a batch of absolute shot numbers in one pass.
    """
    shots = np.asarray(shots, dtype=np.int64)
    sampler = LcpemSampler(circuit, params, seed)
    simulator = simulator or FrameSimulator(circuit)
    record = simulator.run(
        len(shots), lambda index: sampler.layer_events(index, shots))
    logging.debug('Simulated %i shots of d=%i', len(shots), circuit.distance)
    return detection_events(circuit, record)
