"""Pauli twirling of round errors and uniform-LCPEM rate extraction.

Pauli strings are written with qubit 0 first, e.g. 'ZIZIII'. Dense arrays
over all 4^m strings use base-4 digits I=0, X=1, Y=2, Z=3 with qubit 0 the
most significant digit.
"""

import dataclasses
import itertools
import logging
import typing

import networkx
import numpy as np

from fluxqec.core.device import Coord, site_name
from fluxqec.core.errors import InvalidRateError


PAULI_LABELS = 'IXYZ'
PAULI_MATRICES = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex))

# Row sigma holds conj(sigma[r, c]) / 2 at column 2r + c.
_PAULI_TRANSFORM = np.array([m.conj().reshape(4) / 2
                             for m in PAULI_MATRICES])


def pauli_string_matrix(label: str) -> np.ndarray:
    "Dense matrix of a Pauli string such as 'XZI'."
    result = np.eye(1, dtype=complex)
    for char in label:
        result = np.kron(result, PAULI_MATRICES[PAULI_LABELS.index(char)])
    return result


def pauli_labels(num_qubits: int) -> typing.List[str]:
    "All 4^m labels in dense-array order."
    return [''.join(p) for p in itertools.product(PAULI_LABELS,
                                                  repeat=num_qubits)]


def label_to_index(label: str) -> int:
    """Position of a Pauli label in dense-array order.

>>> label_to_index('II'), label_to_index('XZ'), label_to_index('ZZ')
(0, 7, 15)
    """
    index = 0
    for char in label:
        index = 4 * index + PAULI_LABELS.index(char)
    return index


def _num_qubits(dim: int) -> int:
    num = int(round(np.log2(dim)))
    if 2 ** num != dim:
        raise ValueError('Dimension %i is not a power of two' % dim)
    return num


def _per_qubit_transform(tensor: np.ndarray, matrix: np.ndarray,
                         num_qubits: int) -> np.ndarray:
    for axis in range(num_qubits):
        tensor = np.moveaxis(np.tensordot(matrix, tensor,
                                          axes=([1], [axis])), 0, axis)
    return tensor


def pauli_amplitude_array(u_error: np.ndarray) -> np.ndarray:
    """Dense vector a(j) = tr(P_j† U)/2^m over all 4^m strings.

    Computed with one 4×4 transform per qubit instead of 4^m traces.
    """
    dim = u_error.shape[0]
    num = _num_qubits(dim)
    if num > 6:
        raise ValueError('pauli_expand supports m <= 6, got %i' % num)
    tensor = u_error.reshape((2,) * (2 * num))
    order = [ax for q in range(num) for ax in (q, num + q)]
    tensor = tensor.transpose(order).reshape((4,) * num)
    return _per_qubit_transform(tensor, _PAULI_TRANSFORM, num).reshape(-1)


def pauli_amplitude_adjoint(grad: np.ndarray, num_qubits: int) -> np.ndarray:
    """Adjoint of pauli_amplitude_array, mapping 4^m vectors to matrices.
    """
    tensor = grad.reshape((4,) * num_qubits)
    tensor = _per_qubit_transform(tensor, _PAULI_TRANSFORM.conj().T,
                                  num_qubits)
    tensor = tensor.reshape((2,) * (2 * num_qubits))
    order = [ax for q in range(num_qubits) for ax in (q, num_qubits + q)]
    inverse = np.argsort(order)
    dim = 2 ** num_qubits
    return tensor.transpose(inverse).reshape(dim, dim)


def pauli_expand(u_error: np.ndarray) -> typing.Dict[str, complex]:
    """Pauli expansion of an operator on m ≤ 6 qubits.

    :param u_error:  2^m × 2^m matrix.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  Dict from each of the 4^m labels to tr(P† U)/2^m.
    """
    amps = pauli_amplitude_array(u_error)
    num = _num_qubits(u_error.shape[0])
    return dict(zip(pauli_labels(num), amps.tolist()))


@dataclasses.dataclass
class PauliErrorTable:
    """Probabilities of Pauli errors on m qubits, stored densely.
    """

    probs: np.ndarray
    num_qubits: int

    def __post_init__(self):
        if len(self.probs) != 4 ** self.num_qubits:
            raise ValueError('Expected %i probabilities, got %i' % (
                4 ** self.num_qubits, len(self.probs)))
        if np.any(self.probs < -1e-15):
            raise ValueError('Negative Pauli probability')

    @classmethod
    def from_entries(cls, entries: typing.Mapping[str, float],
                     num_qubits: int) -> 'PauliErrorTable':
        "Build from a sparse map; missing strings get probability 0."
        probs = np.zeros(4 ** num_qubits)
        for label, value in entries.items():
            if len(label) != num_qubits:
                raise ValueError('Label %r has wrong length' % label)
            probs[label_to_index(label)] = value
        return cls(probs, num_qubits)

    @property
    def entries(self) -> typing.Dict[str, float]:
        "Sparse map of every string with nonzero probability."
        labels = pauli_labels(self.num_qubits)
        return {labels[i]: float(self.probs[i])
                for i in np.flatnonzero(self.probs)}

    @property
    def total(self) -> float:
        "Sum of all probabilities (1 for unitary input)."
        return float(np.sum(self.probs))

    def top(self, count: int = 20, include_identity: bool = True
            ) -> typing.List[typing.Tuple[str, float]]:
        "Largest entries as (label, probability), descending."
        order = np.argsort(-self.probs, kind='stable')
        labels = pauli_labels(self.num_qubits)
        result = []
        for index in order:
            if index == 0 and not include_identity:
                continue
            if self.probs[index] <= 0 or len(result) >= count:
                break
            result.append((labels[index], float(self.probs[index])))
        return result

    def to_rows(self, layout: typing.Optional['GateLayout'] = None,
                count: int = 20) -> typing.List[typing.Dict[str, typing.Any]]:
        """Rows {pauli, rate, k} sorted by descending rate.

        k is the number of gate locations touched when layout is given.
        """
        rows = []
        for label, rate in self.top(count):
            row = {'pauli': label, 'rate': rate}
            if layout is not None:
                row['k'] = len(layout.support(label))
            rows.append(row)
        return rows


def twirl_probs(amplitudes) -> PauliErrorTable:
    """Pauli channel with probabilities |a(j)|².

    :param amplitudes:  Dict from pauli_expand or the dense array.
    """
    if isinstance(amplitudes, dict):
        labels = sorted(amplitudes, key=label_to_index)
        amps = np.array([amplitudes[k] for k in labels])
    else:
        amps = np.asarray(amplitudes)
    num = int(round(np.log(len(amps)) / np.log(4)))
    return PauliErrorTable(np.abs(amps) ** 2, num)


def twirl_unitary(u_error: np.ndarray) -> PauliErrorTable:
    "Shortcut for twirl_probs(pauli_amplitude_array(u_error))."
    return twirl_probs(pauli_amplitude_array(u_error))


class GateLayout:
    """Gate locations of one round and their adjacency.

    :param qubits:  Sites in tensor-product order.

    :param locations:  Tuples of qubit indices, one per gate location.

    Two locations are adjacent when any of their qubits are lattice nearest
    neighbours. Qubits outside every location are allowed; errors on them
    are reported as uncovered.
    """

    def __init__(self, qubits: typing.Sequence[Coord],
                 locations: typing.Sequence[typing.Tuple[int, ...]]):
        self.qubits = list(qubits)
        self.locations = [tuple(loc) for loc in locations]
        used = [q for loc in self.locations for q in loc]
        if len(set(used)) != len(used):
            raise ValueError('Locations overlap: %s' % (self.locations,))
        if any(q < 0 or q >= len(self.qubits) for q in used):
            raise ValueError('Location qubit out of range')
        self.graph = networkx.Graph()
        self.graph.add_nodes_from(range(len(self.locations)))
        for first, second in itertools.combinations(
                range(len(self.locations)), 2):
            if self._touching(self.locations[first], self.locations[second]):
                self.graph.add_edge(first, second)
        self._masks = None

    def _touching(self, first, second) -> bool:
        for qa in first:
            for qb in second:
                ra, ca = self.qubits[qa]
                rb, cb = self.qubits[qb]
                if abs(ra - rb) + abs(ca - cb) == 1:
                    return True
        return False

    @classmethod
    def single_qubit_round(cls, region: typing.Sequence[Coord]
                           ) -> 'GateLayout':
        "One location per qubit."
        return cls(region, [(i,) for i in range(len(region))])

    @classmethod
    def cnot_round(cls, region: typing.Sequence[Coord],
                   pairs: typing.Sequence[typing.Tuple[Coord, Coord]]
                   ) -> 'GateLayout':
        "One location per CNOT pair."
        region = list(region)
        return cls(region, [(region.index(a), region.index(b))
                            for a, b in pairs])

    @property
    def num_qubits(self) -> int:
        "Number of qubits m."
        return len(self.qubits)

    def connected_sets(self, size: int) -> typing.List[typing.Tuple[int, ...]]:
        "All connected sets of exactly size locations."
        return [combo for combo in itertools.combinations(
            range(len(self.locations)), size)
                if networkx.is_connected(self.graph.subgraph(combo))]

    def count(self, size: int) -> int:
        """Number n_k of connected k-location sets.

>>> layout = GateLayout.single_qubit_round(
...     [(0, 2), (0, 3), (1, 2), (1, 3), (2, 2), (2, 3)])
>>> [layout.count(k) for k in (1, 2, 3)]
[6, 7, 10]
        """
        return len(self.connected_sets(size))

    def support(self, label: str) -> typing.Tuple[int, ...]:
        "Locations where the string acts non-trivially."
        if len(label) != self.num_qubits:
            raise ValueError('Label %r does not match %i qubits' % (
                label, self.num_qubits))
        return tuple(i for i, loc in enumerate(self.locations)
                     if any(label[q] != 'I' for q in loc))

    def uncovered(self, label: str) -> bool:
        "True if the string acts on a qubit outside every location."
        covered = {q for loc in self.locations for q in loc}
        return any(c != 'I' and q not in covered
                   for q, c in enumerate(label))

    def support_masks(self) -> typing.Tuple[np.ndarray, np.ndarray]:
        """Location bitmask and uncovered flag for every dense Pauli index.
        """
        if self._masks is None:
            num = self.num_qubits
            digits = np.array(list(itertools.product(range(4), repeat=num)),
                              dtype=np.int64).reshape(-1, num)
            masks = np.zeros(len(digits), dtype=np.int64)
            for index, loc in enumerate(self.locations):
                active = np.any(digits[:, list(loc)] != 0, axis=1)
                masks |= active.astype(np.int64) << index
            covered = sorted({q for loc in self.locations for q in loc})
            others = [q for q in range(num) if q not in covered]
            uncovered = (np.any(digits[:, others] != 0, axis=1) if others
                         else np.zeros(len(digits), dtype=bool))
            self._masks = (masks, uncovered)
        return self._masks

    def describe(self) -> typing.List[str]:
        "Human-readable location names."
        return ['-'.join(site_name(self.qubits[q]) for q in loc)
                for loc in self.locations]


@dataclasses.dataclass
class LcpemExtraction:
    """Uniform-LCPEM rates from one Pauli table plus what did not fit.

    rates[k] is p_k, counts[k] is n_k, mass[k] is the summed probability of
    strings on exactly k connected locations. dropped holds the mass of
    strings on disconnected sets ('disconnected'), on more than three
    locations ('over3') and on qubits outside any location ('uncovered').
    """

    rates: typing.Dict[int, float]
    counts: typing.Dict[int, int]
    mass: typing.Dict[int, float]
    dropped: typing.Dict[str, float]
    dropped_entries: typing.List[typing.Tuple[str, float, str]]

    def total_accounted(self) -> float:
        "Σ n_k p_k plus dropped mass."
        return sum(self.counts[k] * self.rates[k] for k in self.rates
                   ) + sum(self.dropped.values())


def location_weights(layout: GateLayout) -> np.ndarray:
    """Dense per-Pauli coefficients so that p_k = Σ_j w_k[j] prob[j].

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  Array of shape (3, 4^m); row k-1 holds 1/n_k on strings
              supported on a connected k-location set, 0 elsewhere.
    """
    masks, uncovered = layout.support_masks()
    weights = np.zeros((3, len(masks)))
    for size in (1, 2, 3):
        sets = layout.connected_sets(size)
        if not sets:
            continue
        set_masks = np.array([sum(1 << i for i in combo) for combo in sets])
        hit = np.isin(masks, set_masks) & ~uncovered
        weights[size - 1, hit] = 1.0 / len(sets)
    return weights


def extract_lcpem(table: PauliErrorTable,
                  layout: GateLayout) -> LcpemExtraction:
    """Aggregate a Pauli table into p_1, p_2, p_3 for one gate arity.

    :param table:  Twirled round error on the layout's qubits.

    :param layout:  Gate locations and adjacency of the round.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  LcpemExtraction with p_k = (1/n_k) Σ over strings supported
              on exactly k mutually-neighbouring locations.
    """
    if table.num_qubits != layout.num_qubits:
        raise ValueError('Table has %i qubits but layout has %i' % (
            table.num_qubits, layout.num_qubits))
    masks, uncovered = layout.support_masks()
    weights = location_weights(layout)
    probs = table.probs
    counts = {k: layout.count(k) for k in (1, 2, 3)}
    rates = {k: float(weights[k - 1] @ probs) for k in (1, 2, 3)}
    mass = {k: rates[k] * counts[k] for k in (1, 2, 3)}
    popcount = np.array([bin(m).count('1') for m in masks])
    tracked = weights.sum(axis=0) > 0
    nonzero = np.arange(len(probs)) > 0
    over3 = nonzero & ~uncovered & (popcount > 3)
    disconnected = nonzero & ~uncovered & ~tracked & (popcount <= 3)
    dropped = {'uncovered': float(probs[uncovered].sum()),
               'over3': float(probs[over3].sum()),
               'disconnected': float(probs[disconnected].sum())}
    labels = None
    dropped_entries = []
    for kind, selector in (('over3', over3), ('disconnected', disconnected),
                           ('uncovered', uncovered)):
        for index in np.flatnonzero(selector & (probs > 0)):
            if labels is None:
                labels = pauli_labels(table.num_qubits)
            dropped_entries.append((labels[index], float(probs[index]), kind))
    dropped_entries.sort(key=lambda item: -item[1])
    if dropped['over3'] > 1e-6:
        logging.warning('Untracked >3-location Pauli mass %.3g',
                        dropped['over3'])
    return LcpemExtraction(rates, counts, mass, dropped, dropped_entries)


def add_decoherence(p1_unitary: float, arity: int, rate: float,
                    duration: float) -> float:
    """Fold incoherent errors into the 1-location rate.

    :param p1_unitary:  1-location probability from the unitary error.

    :param arity:  Gate arity j (1 or 2).

    :param rate:  Depolarizing rate r in GHz.

    :param duration:  Gate time t in ns.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  p1_unitary + j·r·t.

>>> round(add_decoherence(0.0, 1, 1e-5, 40.0), 12)
0.0004
    """
    extra = arity * rate * duration
    if extra > 0.5 or extra < 0:
        raise InvalidRateError('Decoherence j*r*t=%s outside [0, 0.5]' % (
            extra))
    result = p1_unitary + extra
    if result > 1:
        raise InvalidRateError('Total 1-location rate %s exceeds 1' % result)
    return result


RATE_NAMES = ('p1_1q', 'p2_1q', 'p3_1q', 'p1_2q', 'p2_2q', 'p3_2q')


@dataclasses.dataclass(frozen=True)
class LcpemParams:
    """Rates and durations driving the surface-code noise sampler.

    p{k}_{j}q are unitary-derived rates for k-location errors of j-qubit
    gates. Decoherence at rate r (GHz) is folded into the 1-location rate
    when sampling and also drives idle depolarizing.
    """

    p1_1q: float = 0.0
    p2_1q: float = 0.0
    p3_1q: float = 0.0
    p1_2q: float = 0.0
    p2_2q: float = 0.0
    p3_2q: float = 0.0
    p_reset: float = 0.005
    p_measure: float = 0.01
    r: float = 0.0
    t_1q: float = 40.0
    t_2q: float = 130.0
    t_reset: float = 160.0
    t_measure: float = 500.0

    def __post_init__(self):
        for name in RATE_NAMES + ('p_reset', 'p_measure'):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise InvalidRateError('%s=%s outside [0, 1]' % (name, value))
        if self.r < 0:
            raise InvalidRateError('Depolarizing rate r must be >= 0')
        for name in ('t_1q', 't_2q', 't_reset', 't_measure'):
            if not getattr(self, name) > 0:
                raise InvalidRateError('%s must be positive' % name)
        for arity in (1, 2):
            if sum(self.gate_rates(arity)) > 1:
                raise InvalidRateError('Rates for %iq gates sum above 1' % (
                    arity))

    @classmethod
    def zero(cls) -> 'LcpemParams':
        "Noiseless parameters."
        return cls(p_reset=0.0, p_measure=0.0)

    def replace(self, **kwargs) -> 'LcpemParams':
        "Copy with fields replaced."
        return dataclasses.replace(self, **kwargs)

    def rates(self) -> typing.Tuple[float, ...]:
        "The six gate rates in RATE_NAMES order."
        return tuple(getattr(self, name) for name in RATE_NAMES)

    def gate_rates(self, arity: int) -> typing.Tuple[float, float, float]:
        "(p1 with decoherence, p2, p3) for gates of the given arity."
        suffix = '_%iq' % arity
        duration = self.t_1q if arity == 1 else self.t_2q
        p1_total = add_decoherence(getattr(self, 'p1' + suffix), arity,
                                   self.r, duration)
        return (p1_total, getattr(self, 'p2' + suffix),
                getattr(self, 'p3' + suffix))

    def idle_rate(self, duration: float) -> float:
        "Depolarizing probability r·t for an idle of the given length."
        result = self.r * duration
        if result > 1:
            raise InvalidRateError('Idle rate %s exceeds 1' % result)
        return result

    def without_correlations(self) -> 'LcpemParams':
        "Copy with every k > 1 rate set to 0."
        return self.replace(p2_1q=0.0, p3_1q=0.0, p2_2q=0.0, p3_2q=0.0)

    def to_dict(self) -> typing.Dict[str, float]:
        "Plain dict of every field."
        return dataclasses.asdict(self)

    @classmethod
    def from_extractions(cls, one_qubit: LcpemExtraction,
                         two_qubit: LcpemExtraction,
                         **kwargs) -> 'LcpemParams':
        "Combine extracted 1q and 2q rates with SPAM/decoherence settings."
        rates = {}
        for arity, extraction in ((1, one_qubit), (2, two_qubit)):
            for k in (1, 2, 3):
                rates['p%i_%iq' % (k, arity)] = min(max(
                    extraction.rates[k], 0.0), 1.0)
        rates.update(kwargs)
        return cls(**rates)
