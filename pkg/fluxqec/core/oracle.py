"""Small exact or independent references used to check the main pipeline.

Most of this module is about the toric code under ballistic weight-2 X
noise: every event flips a qubit together with its right neighbour (links
of a column) or its lower neighbour (links of a row). Such pairs always
excite two plaquettes of the same (row parity, column parity) class, so the
decoding splits into four independent toric codes of half the distance.

Toric indexing for even d: h(r, c) = r * d + c is the top edge of plaquette
(r, c) and v(r, c) = d² + r * d + c is its left edge, so plaquette (r, c)
holds h(r, c), h(r + 1, c), v(r, c), v(r, c + 1) with indices mod d.
"""

import dataclasses
import itertools
import logging
import math
import typing

import networkx
import numpy as np

from fluxqec.core.decode import DetectorGraph
from fluxqec.core.errors import InfeasibleSizeError, InputCorruptionError
from fluxqec.core.rng import CounterStream
from fluxqec.core.twirl import PauliErrorTable


@dataclasses.dataclass
class ToricLayout:
    """Edges, plaquettes and ballistic partners of a d×d toric code.

    :param distance:  Lattice size d; even for ballistic work.
    """

    distance: int

    def __post_init__(self):
        d = self.distance
        if d < 2:
            raise ValueError('Toric distance must be >= 2, got %s' % d)
        self.checks = np.zeros((d * d, 2 * d * d), dtype=bool)
        for row in range(d):
            for col in range(d):
                for qubit in (self.h(row, col), self.h(row + 1, col),
                              self.v(row, col), self.v(row, col + 1)):
                    self.checks[self.plaquette(row, col), qubit] = True
        self.partner = np.zeros(2 * d * d, dtype=np.int64)
        for row in range(d):
            for col in range(d):
                self.partner[self.h(row, col)] = self.h(row + 1, col)
                self.partner[self.v(row, col)] = self.v(row, col + 1)
        self.logical_sets = (
            np.array([self.h(0, col) for col in range(d)]),
            np.array([self.v(row, 0) for row in range(d)]))

    @property
    def num_qubits(self) -> int:
        "2d² edges."
        return 2 * self.distance ** 2

    def h(self, row: int, col: int) -> int:
        "Index of horizontal edge (row, col)."
        d = self.distance
        return (row % d) * d + col % d

    def v(self, row: int, col: int) -> int:
        "Index of vertical edge (row, col)."
        d = self.distance
        return d * d + (row % d) * d + col % d

    def plaquette(self, row: int, col: int) -> int:
        "Index of plaquette (row, col)."
        d = self.distance
        return (row % d) * d + col % d

    def color(self, index: int) -> typing.Tuple[int, int]:
        "(row parity, column parity) class of a plaquette."
        row, col = divmod(index, self.distance)
        return row % 2, col % 2

    def syndrome(self, flips: np.ndarray) -> np.ndarray:
        "Plaquette parities for a (..., 2d²) boolean flip array."
        flips = np.asarray(flips, dtype=np.uint8)
        return (flips @ self.checks.T.astype(np.uint8)) % 2 == 1

    def logical_flags(self, flips: np.ndarray) -> np.ndarray:
        """Parity of flips on each logical-detecting set, shape (..., 2).

        Both are zero for any product of vertex stabilizers.
        """
        flips = np.asarray(flips, dtype=bool)
        return np.stack([np.bitwise_xor.reduce(flips[..., s], axis=-1)
                         for s in self.logical_sets], axis=-1)

    def ballistic_flips(self, events: np.ndarray) -> np.ndarray:
        "Qubit flips from a (..., 2d²) array of ballistic events."
        events = np.asarray(events, dtype=bool)
        source = np.empty_like(self.partner)
        source[self.partner] = np.arange(len(self.partner))
        return events ^ events[..., source]


def ballistic_sample(layout: ToricLayout, p: float, seed: int,
                     shots: typing.Union[int, typing.Sequence[int]] = 1
                     ) -> np.ndarray:
    """Sample ballistic weight-2 X errors.

    :param layout:  Toric lattice.

    :param p:  Probability of an event starting at each qubit.

    :param seed:  Master seed.

    :param shots:  Number of shots or explicit shot numbers.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  Boolean flips of shape (shots, 2d²).
    """
    if not 0 <= p <= 1:
        raise ValueError('p=%s outside [0, 1]' % p)
    numbers = np.arange(shots) if np.isscalar(shots) else np.asarray(shots)
    stream = CounterStream(seed)
    u = stream.uniform(numbers[:, None], 0,
                       np.arange(layout.num_qubits)[None, :], 0)
    return layout.ballistic_flips(u < p)


class _Torus:
    """Plaquette torus with a given period, for matching and path building.

    edge(kind, i, j) converts a unit step into the physical qubits it flips.
    """

    def __init__(self, period: int, edge: typing.Callable[
            [str, int, int], typing.Tuple[int, ...]]):
        self.period = period
        self.edge = edge

    def _axis(self, start, stop):
        delta = (stop - start) % self.period
        return delta, delta <= self.period - delta

    def distance(self, first, second) -> int:
        total = 0
        for axis in (0, 1):
            delta, _ = self._axis(first[axis], second[axis])
            total += min(delta, self.period - delta)
        return total

    def match(self, defects: typing.List[typing.Tuple[int, int]]
              ) -> typing.List[typing.Tuple[int, int]]:
        graph = networkx.Graph()
        for first, second in itertools.combinations(range(len(defects)), 2):
            graph.add_edge(first, second, weight=-self.distance(
                defects[first], defects[second]))
        matching = networkx.algorithms.matching.max_weight_matching(
            graph, maxcardinality=True)
        return sorted(tuple(sorted(pair)) for pair in matching)

    def path(self, first, second) -> typing.List[int]:
        "Physical qubits on a shortest path, vertical leg first."
        result = []
        row, col = first
        delta, forward = self._axis(row, second[0])
        for _ in range(delta if forward else self.period - delta):
            if forward:
                result.extend(self.edge('h', row + 1, col))
                row += 1
            else:
                result.extend(self.edge('h', row, col))
                row -= 1
        delta, forward = self._axis(col, second[1])
        for _ in range(delta if forward else self.period - delta):
            if forward:
                result.extend(self.edge('v', row, col + 1))
                col += 1
            else:
                result.extend(self.edge('v', row, col))
                col -= 1
        return result


@dataclasses.dataclass
class ToricCorrection:
    """Correction chosen by a toric matching decoder.

    flags are the logical parities of the correction; the decoder failed
    when they differ from the flags of the actual error.
    """

    qubits: np.ndarray
    flags: np.ndarray


def _apply_paths(layout, torus, coords) -> np.ndarray:
    flips = np.zeros(layout.num_qubits, dtype=bool)
    for first, second in torus.match(coords):
        for qubit in torus.path(coords[first], coords[second]):
            flips[qubit] ^= True
    return flips


def symmetry_split_decode(layout: ToricLayout,
                          syndrome: np.ndarray) -> ToricCorrection:
    """Decode a ballistic syndrome as four independent half-size problems.

    :param layout:  Toric lattice with even distance.

    :param syndrome:  Boolean plaquette parities, length d².

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  ToricCorrection combining the four matchings.

    PURPOSE:  Plaquettes of one (row parity, column parity) class form a
              d/2 torus on which each ballistic event is a single edge.
              Each class is matched on its own with minimum-weight perfect
              matching; an odd number of events in a class cannot come
              from ballistic noise and raises InputCorruptionError.
    """
    d = layout.distance
    if d % 2:
        raise ValueError('Symmetry split needs even distance, got %i' % d)
    flips = np.zeros(layout.num_qubits, dtype=bool)
    fired = np.flatnonzero(syndrome)
    for row_0, col_0 in itertools.product((0, 1), (0, 1)):
        coords = [(int(n) // d // 2, int(n) % d // 2) for n in fired
                  if layout.color(int(n)) == (row_0, col_0)]
        if len(coords) % 2:
            raise InputCorruptionError(
                'Class (%i, %i) has %i events' % (row_0, col_0, len(coords)))
        if not coords:
            continue

        def edge(kind, i, j, row_0=row_0, col_0=col_0):
            row, col = row_0 + 2 * i, col_0 + 2 * j
            if kind == 'h':
                return (layout.h(row - 1, col), layout.h(row, col))
            return (layout.v(row, col - 1), layout.v(row, col))

        flips ^= _apply_paths(layout, _Torus(d // 2, edge), coords)
    return ToricCorrection(np.flatnonzero(flips),
                           layout.logical_flags(flips))


def monolithic_decode(layout: ToricLayout,
                      syndrome: np.ndarray) -> ToricCorrection:
    "Minimum-weight matching decoder for independent bit flips."
    d = layout.distance
    fired = np.flatnonzero(syndrome)
    if len(fired) % 2:
        raise InputCorruptionError('Odd number of plaquette events')
    coords = [divmod(int(n), d) for n in fired]

    def edge(kind, i, j):
        return (layout.h(i, j),) if kind == 'h' else (layout.v(i, j),)

    flips = (_apply_paths(layout, _Torus(d, edge), coords) if coords
             else np.zeros(layout.num_qubits, dtype=bool))
    return ToricCorrection(np.flatnonzero(flips), layout.logical_flags(flips))


@dataclasses.dataclass
class ToricEstimate:
    "Failure rate estimate with binomial standard error."

    distance: int
    p: float
    failure_rate: float
    stderr: float
    shots: int

    def to_dict(self) -> typing.Dict[str, typing.Any]:
        "Row for CSV curves."
        return dataclasses.asdict(self)


def _estimate(distance, p, failures) -> ToricEstimate:
    shots = len(failures)
    rate = float(np.mean(failures))
    return ToricEstimate(distance, p, rate,
                         math.sqrt(rate * (1 - rate) / shots), shots)


def _decode_shots(layout, flips, decoder) -> np.ndarray:
    syndromes = layout.syndrome(flips)
    actual = layout.logical_flags(flips)
    failures = np.zeros(len(flips), dtype=bool)
    for row in np.flatnonzero(syndromes.any(axis=1)):
        found = decoder(layout, syndromes[row])
        failures[row] = np.any(found.flags != actual[row])
    quiet = ~syndromes.any(axis=1)
    failures[quiet] = np.any(actual[quiet], axis=1)
    return failures


def ballistic_failure_rate(distance: int, p: float, shots: int,
                           seed: int) -> ToricEstimate:
    "Logical failure rate of the split decoder under ballistic noise."
    layout = ToricLayout(distance)
    flips = ballistic_sample(layout, p, seed, shots)
    return _estimate(distance, p,
                     _decode_shots(layout, flips, symmetry_split_decode))


def monolithic_failure_rate(distance: int, p: float, shots: int,
                            seed: int) -> ToricEstimate:
    """Failure rate of matching on a toric code with independent flips.

    One class of the ballistic problem at distance 2d behaves like this
    code at distance d.
    """
    layout = ToricLayout(distance)
    u = CounterStream(seed).uniform(
        np.arange(shots)[:, None], 0, np.arange(layout.num_qubits)[None, :],
        1)
    return _estimate(distance, p,
                     _decode_shots(layout, u < p, monolithic_decode))


def low_p_logical(distance: int, p: float) -> float:
    """Leading-order logical error rate of a distance-d toric code.

    There are 2d shortest logicals, each hit by C(d, d/2) patterns of d/2
    flips that the decoder resolves correctly half the time.

>>> low_p_logical(2, 0.01)
0.04
>>> round(low_p_logical(4, 1e-3) / 1e-6, 9)
24.0
    """
    if distance % 2:
        raise ValueError('Leading-order formula needs even distance')
    half = distance // 2
    return distance * math.comb(distance, half) * p ** half


def enumerate_low_weight_failure(distance: int, p: float,
                                 max_errors: int = 3) -> float:
    """Exact failure probability of min-weight decoding up to max_errors.

    :param distance:  Toric distance d.

    :param p:  Independent flip probability.

    :param max_errors:  Largest error weight enumerated.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  Sum over error sets of weight <= max_errors of their
              probability times the fraction of minimum-weight corrections
              that end in a different logical class.
    """
    layout = ToricLayout(distance)
    n = layout.num_qubits
    if math.comb(n, max_errors) > 2_000_000:
        raise InfeasibleSizeError('Too many configurations to enumerate')
    syn_masks = [int(''.join('1' if b else '0' for b in column), 2)
                 for column in layout.checks.T]
    log_masks = []
    for qubit in range(n):
        flags = 0
        for index, chosen in enumerate(layout.logical_sets):
            if qubit in chosen:
                flags |= 1 << index
        log_masks.append(flags)
    best = {}
    subsets = []
    for weight in range(max_errors + 1):
        for subset in itertools.combinations(range(n), weight):
            syn, log = 0, 0
            for qubit in subset:
                syn ^= syn_masks[qubit]
                log ^= log_masks[qubit]
            subsets.append((weight, syn, log))
            entry = best.get(syn)
            if entry is None or weight < entry[0]:
                best[syn] = [weight, {log: 1}]
            elif weight == entry[0]:
                entry[1][log] = entry[1].get(log, 0) + 1
    total = 0.0
    for weight, syn, log in subsets:
        classes = best[syn][1]
        wrong = sum(count for cls, count in classes.items() if cls != log)
        if wrong:
            total += (p ** weight * (1 - p) ** (n - weight) * wrong /
                      sum(classes.values()))
    return total


def crossing_point(p_values: typing.Sequence[float],
                   first: typing.Sequence[float],
                   second: typing.Sequence[float]) -> typing.Optional[float]:
    """First p where two failure curves cross, by linear interpolation.

>>> crossing_point([0.0, 1.0], [0.0, 1.0], [0.5, 0.5])
0.5
    """
    diff = np.asarray(first, dtype=float) - np.asarray(second, dtype=float)
    for index in range(len(diff) - 1):
        if diff[index] == 0:
            return float(p_values[index])
        if diff[index] * diff[index + 1] < 0:
            frac = diff[index] / (diff[index] - diff[index + 1])
            return float(p_values[index] + frac * (
                p_values[index + 1] - p_values[index]))
    return None


def _symplectic_masks(num_qubits: int) -> typing.Tuple[np.ndarray,
                                                       np.ndarray]:
    index = np.arange(4 ** num_qubits)
    x_mask = np.zeros_like(index)
    z_mask = np.zeros_like(index)
    for qubit in range(num_qubits):
        digit = (index >> (2 * (num_qubits - 1 - qubit))) & 3
        bit = 1 << qubit
        x_mask |= np.where((digit == 1) | (digit == 2), bit, 0)
        z_mask |= np.where((digit == 2) | (digit == 3), bit, 0)
    return x_mask, z_mask


def _popcount_parity(values: np.ndarray) -> np.ndarray:
    parity = np.zeros(values.shape, dtype=np.int64)
    while np.any(values):
        parity ^= values & 1
        values = values >> 1
    return parity


def average_fidelity(channel: typing.Union[PauliErrorTable, np.ndarray],
                     reference: typing.Optional[np.ndarray] = None) -> float:
    """Average gate fidelity of a Pauli channel or of a unitary.

    :param channel:  PauliErrorTable, or a unitary matrix.

    :param reference:  Target unitary when channel is a unitary; the error
                       is then reference† @ channel.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  For a Pauli channel, (Σ_j tr(P_j ℰ(P_j)) + D²) / (D²(D + 1))
              summed over the Pauli basis, with ℰ(P_j) = λ_j P_j from
              symplectic commutation signs. For a unitary U,
              (|tr U|² + D) / (D(D + 1)).

>>> table = PauliErrorTable.from_entries({'I': 0.9, 'Z': 0.1}, 1)
>>> round(average_fidelity(table), 12)
0.933333333333
    """
    if isinstance(channel, PauliErrorTable):
        m = channel.num_qubits
        if m > 6:
            raise InfeasibleSizeError('Pauli channel on %i qubits' % m)
        dim = 2 ** m
        x_mask, z_mask = _symplectic_masks(m)
        overlap = (x_mask[:, None] & z_mask[None, :]) ^ (
            z_mask[:, None] & x_mask[None, :])
        signs = 1 - 2 * _popcount_parity(overlap)
        eigen = signs @ channel.probs
        return float((dim * np.sum(eigen) + dim ** 2) / (
            dim ** 2 * (dim + 1)))
    u = np.asarray(channel)
    if reference is not None:
        u = np.asarray(reference).conj().T @ u
    dim = u.shape[0]
    return float((abs(np.trace(u)) ** 2 + dim) / (dim * (dim + 1)))


@dataclasses.dataclass
class BruteForceOutcome:
    """Minimum-weight correction found by exhaustive search.

    logical_flips lists the logical parities seen among all minimum-weight
    corrections; more than one means a degenerate tie.
    """

    correction: typing.Tuple[int, ...]
    weight: int
    logical_flips: typing.FrozenSet[bool]


def brute_force_decoder(graph: DetectorGraph, events,
                        max_edges: int = 60) -> BruteForceOutcome:
    """Smallest edge set whose boundary equals the fired detectors.
    """
    if graph.num_edges > max_edges:
        raise InfeasibleSizeError('Graph has %i edges, limit is %i' % (
            graph.num_edges, max_edges))
    events = np.asarray(events)
    fired = (np.flatnonzero(events) if events.dtype == bool
             else [int(n) for n in events])
    target = 0
    for node in fired:
        target ^= 1 << int(node)
    masks = []
    for first, second in graph.edges:
        mask = 0
        for node in (first, second):
            if node != graph.boundary:
                mask ^= 1 << int(node)
        masks.append(mask)
    if target == 0:
        return BruteForceOutcome((), 0, frozenset([False]))
    for weight in range(1, graph.num_detectors + 1):
        found, flips = None, set()
        for subset in itertools.combinations(range(graph.num_edges), weight):
            mask = 0
            for edge in subset:
                mask ^= masks[edge]
            if mask == target:
                found = found or subset
                flips.add(bool(np.bitwise_xor.reduce(
                    graph.logical[list(subset)])))
        if found is not None:
            logging.debug('Brute force weight %i, flips %s', weight, flips)
            return BruteForceOutcome(found, weight, frozenset(flips))
    raise InfeasibleSizeError('No correction reproduces the syndrome')
