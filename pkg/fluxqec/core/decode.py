"""Detector graph construction, union-find decoding and the memory experiment.

Only Z detectors are decoded: a Z-basis memory fails through X errors,
which are exactly what Z checks see.
"""

import concurrent.futures
import dataclasses
import logging
import math
import typing

import networkx
import numpy as np

from fluxqec.core.circuit import (
    LayerEvents, SyndromeCircuit, FrameSimulator, detection_events, run_shots)
from fluxqec.core.errors import (
    DecoderError, GraphConstructionError)
from fluxqec.core.twirl import LcpemParams


@dataclasses.dataclass
class DetectorGraph:
    """Matching graph over Z detectors plus one boundary node.

    :param num_detectors:  Detector count; node num_detectors is the
                           boundary.

    :param edges:  Integer array (E, 2); boundary edges end in the boundary.

    :param logical:  Boolean array (E,) telling whether the fault behind
                     each edge flips the logical readout.

    :param multiplicity:  How many distinct single faults map to each edge.
    """

    num_detectors: int
    edges: np.ndarray
    logical: np.ndarray
    multiplicity: np.ndarray

    def __post_init__(self):
        self.adjacency = [[] for _ in range(self.num_nodes)]
        for index, (first, second) in enumerate(self.edges):
            self.adjacency[first].append(index)
            self.adjacency[second].append(index)

    @property
    def boundary(self) -> int:
        "Index of the boundary node."
        return self.num_detectors

    @property
    def num_nodes(self) -> int:
        "Detectors plus the boundary."
        return self.num_detectors + 1

    @property
    def num_edges(self) -> int:
        "Number of distinct edges."
        return len(self.edges)

    def other_end(self, edge: int, node: int) -> int:
        "Endpoint of edge that is not node."
        first, second = self.edges[edge]
        return int(second if first == node else first)

    def syndrome_of(self, correction: typing.Iterable[int]) -> np.ndarray:
        "Detectors flipped by applying the faults of the given edges."
        result = np.zeros(self.num_nodes, dtype=bool)
        for edge in correction:
            result[self.edges[edge]] ^= True
        return result[:self.num_detectors]

    def to_networkx(self) -> networkx.MultiGraph:
        "MultiGraph view with edge index and logical flag as attributes."
        graph = networkx.MultiGraph()
        graph.add_nodes_from(range(self.num_nodes))
        for index, (first, second) in enumerate(self.edges):
            graph.add_edge(int(first), int(second), index=index,
                           logical=bool(self.logical[index]))
        return graph


def _enumerate_faults(circuit: SyndromeCircuit) -> typing.List[
        typing.Tuple[int, typing.Tuple[int, ...], str]]:
    """Every single fault as (layer, qubits, pauli) or pauli 'M' for a flip.
    """
    faults = []
    for index, layer in enumerate(circuit.layers):
        if layer.kind == 'cnot':
            for gate in layer.gates:
                for value in range(1, 16):
                    faults.append((index, gate,
                                   'IXYZ'[value // 4] + 'IXYZ'[value % 4]))
            singles = list(layer.idle)
        else:
            singles = list(range(circuit.num_qubits))
        for qubit in singles:
            for pauli in 'XYZ':
                faults.append((index, (qubit,), pauli))
        if layer.kind == 'measure':
            for qubit in layer.targets():
                faults.append((index, (qubit,), 'M'))
    return faults


def _fault_events(faults, positions) -> typing.Dict[int, LayerEvents]:
    per_layer = {}
    for pos, (index, qubits, pauli) in zip(positions, faults):
        entry = per_layer.setdefault(index, ([], [], [], [], [], []))
        if pauli == 'M':
            entry[4].append(pos)
            entry[5].append(qubits[0])
            continue
        for qubit, label in zip(qubits, pauli):
            if label == 'I':
                continue
            entry[0].append(pos)
            entry[1].append(qubit)
            entry[2].append(label in 'XY')
            entry[3].append(label in 'YZ')
    result = {}
    for index, (shot, qubit, x, z, f_shot, f_qubit) in per_layer.items():
        result[index] = LayerEvents(
            np.array(shot, dtype=np.int64), np.array(qubit, dtype=np.int64),
            np.array(x, dtype=bool), np.array(z, dtype=bool),
            np.array(f_shot, dtype=np.int64),
            np.array(f_qubit, dtype=np.int64))
    return result


def build_detector_graph(circuit: SyndromeCircuit,
                         batch_size: int = 4096) -> DetectorGraph:
    """Build the matching graph by simulating every single fault.

    :param circuit:  The memory circuit.

    :param batch_size:  Faults simulated together in one frame batch.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  DetectorGraph with one edge per distinct detector pair.

    PURPOSE:  Each Pauli on each location of each layer, and each
              measurement flip, is propagated through the rest of the
              circuit. A fault exciting more than two Z detectors cannot be
              an edge and raises GraphConstructionError, as does a fault
              that flips the logical without exciting anything.
    """
    faults = _enumerate_faults(circuit)
    simulator = FrameSimulator(circuit)
    found = {}
    conflicts = 0
    for start in range(0, len(faults), batch_size):
        batch = faults[start:start + batch_size]
        injected = _fault_events(batch, range(len(batch)))
        record = simulator.run(
            len(batch), lambda index: injected.get(index, LayerEvents.empty()))
        detected = detection_events(circuit, record)
        for row, fault in enumerate(batch):
            nodes = np.flatnonzero(detected.z_events[row])
            flips = bool(detected.logical[row])
            if len(nodes) > 2:
                raise GraphConstructionError(
                    'Fault %s excites %i detectors: %s' % (
                        fault, len(nodes), list(nodes)))
            if not len(nodes):
                if flips:
                    raise GraphConstructionError(
                        'Fault %s flips the logical undetected' % (fault,))
                continue
            key = ((int(nodes[0]), circuit.num_z_detectors) if len(nodes) == 1
                   else (int(nodes[0]), int(nodes[1])))
            if key in found:
                if found[key][0] != flips:
                    conflicts += 1
                found[key][1] += 1
            else:
                found[key] = [flips, 1]
    if conflicts:
        logging.warning('%i faults disagree with their edge on the logical',
                        conflicts)
    keys = sorted(found)
    graph = DetectorGraph(
        circuit.num_z_detectors,
        np.array(keys, dtype=np.int64).reshape(len(keys), 2),
        np.array([found[k][0] for k in keys], dtype=bool),
        np.array([found[k][1] for k in keys], dtype=np.int64))
    components = networkx.number_connected_components(graph.to_networkx())
    if components != 1:
        raise GraphConstructionError(
            'Detector graph has %i components' % components)
    logging.info('Detector graph: %i nodes, %i edges from %i faults',
                 graph.num_nodes, graph.num_edges, len(faults))
    return graph


def circuit_distance(graph: DetectorGraph) -> int:
    """Fewest edges whose faults flip the logical without a syndrome.

    Such sets are cycles through the boundary with odd logical parity, so
    this is a shortest path in the graph doubled by logical parity.
    """
    doubled = networkx.Graph()
    for index, (first, second) in enumerate(graph.edges):
        flip = int(graph.logical[index])
        for parity in (0, 1):
            doubled.add_edge((int(first), parity),
                             (int(second), parity ^ flip))
    source, target = (graph.boundary, 0), (graph.boundary, 1)
    if source not in doubled or target not in doubled:
        raise GraphConstructionError('No logical path through the boundary')
    return networkx.shortest_path_length(doubled, source, target)


@dataclasses.dataclass
class DecodeOutcome:
    """Decoder result for one syndrome.

    :param correction:  Edge indices whose faults the decoder applies.

    :param logical_flip:  Predicted logical flip of the correction.
    """

    correction: typing.Tuple[int, ...]
    logical_flip: bool


class UnionFindDecoder:
    """Union-find decoder with half-edge growth and peeling.

    Odd clusters grow one at a time, smallest first with ties broken by
    root index. Growth adds half an edge on every frontier edge; a fully
    grown edge fuses its endpoints. Reaching the boundary neutralises a
    cluster without merging it with anything else.
    """

    def __init__(self, graph: DetectorGraph):
        self.graph = graph

    def decode(self, events) -> DecodeOutcome:
        """Decode a boolean detector vector (or a list of fired nodes).
        """
        graph = self.graph
        events = np.asarray(events)
        if events.dtype == bool:
            defects = [int(n) for n in np.flatnonzero(events)]
        else:
            defects = sorted(int(n) for n in events)
        if not defects:
            return DecodeOutcome((), False)
        if max(defects) >= graph.num_detectors:
            raise DecoderError('Defect index outside the detector range')
        grown = self._grow(defects)
        correction = self._peel(defects, grown)
        fired = np.zeros(graph.num_detectors, dtype=bool)
        fired[defects] = True
        if not np.array_equal(graph.syndrome_of(correction), fired):
            raise DecoderError('Correction does not reproduce the syndrome')
        flip = bool(np.bitwise_xor.reduce(graph.logical[list(correction)]))
        return DecodeOutcome(tuple(correction), flip)

    def _grow(self, defects: typing.List[int]) -> typing.Set[int]:
        graph = self.graph
        boundary = graph.boundary
        parent = list(range(graph.num_nodes))
        size = [1] * graph.num_nodes
        odd = [False] * graph.num_nodes
        touches = [False] * graph.num_nodes
        frontier = {}
        support = {}

        def find(node):
            root = node
            while parent[root] != root:
                root = parent[root]
            while parent[node] != root:
                parent[node], node = root, parent[node]
            return root

        def border(root):
            if root not in frontier:
                frontier[root] = list(graph.adjacency[root])
            return frontier[root]

        def union(first, second):
            if size[first] < size[second]:
                first, second = second, first
            border(first).extend(border(second))
            del frontier[second]
            parent[second] = first
            size[first] += size[second]
            odd[first] ^= odd[second]
            touches[first] |= touches[second]
            return first

        for node in defects:
            odd[node] = True
            border(node)
        active = set(defects)
        while active:
            root = min(active, key=lambda r: (size[r], r))
            if not border(root):
                raise DecoderError('Odd cluster at %i cannot grow' % root)
            fused = []
            for edge in border(root):
                if support.get(edge, 0) < 2:
                    support[edge] = support.get(edge, 0) + 1
                    if support[edge] == 2:
                        fused.append(edge)
            for edge in fused:
                first, second = (int(n) for n in graph.edges[edge])
                if boundary in (first, second):
                    inside = first if second == boundary else second
                    touches[find(inside)] = True
                    continue
                r_first, r_second = find(first), find(second)
                if r_first != r_second:
                    union(r_first, r_second)
            root = find(root)
            frontier[root] = [e for e in frontier[root]
                              if support.get(e, 0) < 2]
            active = {find(r) for r in active}
            active = {r for r in active if odd[r] and not touches[r]}
        return {edge for edge, value in support.items() if value == 2}

    def _peel(self, defects: typing.List[int],
              erasure: typing.Set[int]) -> typing.List[int]:
        graph = self.graph
        neighbours = {}
        for edge in sorted(erasure):
            for node in graph.edges[edge]:
                neighbours.setdefault(int(node), []).append(edge)
        seen = set()
        tree = []
        starts = sorted(neighbours)
        if graph.boundary in neighbours:
            starts.insert(0, graph.boundary)
        for start in starts:
            if start in seen:
                continue
            seen.add(start)
            queue = [start]
            while queue:
                node = queue.pop(0)
                for edge in neighbours[node]:
                    other = graph.other_end(edge, node)
                    if other not in seen:
                        seen.add(other)
                        tree.append((edge, node, other))
                        queue.append(other)
        syndrome = np.zeros(graph.num_nodes, dtype=bool)
        syndrome[defects] = True
        correction = []
        for edge, node, child in reversed(tree):
            if syndrome[child]:
                correction.append(edge)
                syndrome[child] = False
                syndrome[node] ^= True
        if np.any(syndrome[:graph.num_detectors]):
            raise DecoderError('Peeling left %i unmatched defects' % (
                int(syndrome[:graph.num_detectors].sum())))
        return sorted(correction)


def union_find_decode(graph: DetectorGraph, events) -> DecodeOutcome:
    "Decode one syndrome with a fresh UnionFindDecoder."
    return UnionFindDecoder(graph).decode(events)


def decode_batch(graph: DetectorGraph, z_events: np.ndarray) -> np.ndarray:
    """Predicted logical flips for a (shots, detectors) event array.

    Identical syndromes are decoded once.
    """
    decoder = UnionFindDecoder(graph)
    seen = {}
    result = np.zeros(len(z_events), dtype=bool)
    for row in np.flatnonzero(z_events.any(axis=1)):
        key = np.packbits(z_events[row]).tobytes()
        if key not in seen:
            seen[key] = decoder.decode(z_events[row]).logical_flip
        result[row] = seen[key]
    return result


def _failures_for(circuit: SyndromeCircuit, graph: DetectorGraph,
                  params: LcpemParams, seed: int, start: int,
                  stop: int) -> np.ndarray:
    shots = np.arange(start, stop, dtype=np.int64)
    detected = run_shots(circuit, params, seed, shots)
    return decode_batch(graph, detected.z_events) ^ detected.logical


def run_memory_experiment(circuit: SyndromeCircuit, params: LcpemParams,
                          shots: int, seed: int,
                          graph: typing.Optional[DetectorGraph] = None,
                          chunk_size: int = 2048,
                          threads: int = 1) -> np.ndarray:
    """Per-shot logical failures for shots 0 .. shots - 1.

    :param threads:  Worker processes; chunks are keyed by absolute shot
                     number so the result does not depend on it.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  Boolean array of length shots, True where decoding failed.
    """
    if shots < 1:
        raise ValueError('Need at least one shot, got %s' % shots)
    if chunk_size < 1:
        raise ValueError('Chunk size must be positive')
    graph = graph or build_detector_graph(circuit)
    bounds = [(start, min(start + chunk_size, shots))
              for start in range(0, shots, chunk_size)]
    if threads > 1 and len(bounds) > 1:
        with concurrent.futures.ProcessPoolExecutor(threads) as pool:
            parts = list(pool.map(
                _failures_for, *zip(*[(circuit, graph, params, seed, a, b)
                                      for a, b in bounds])))
    else:
        parts = [_failures_for(circuit, graph, params, seed, a, b)
                 for a, b in bounds]
    return np.concatenate(parts)


@dataclasses.dataclass
class LogicalErrorEstimate:
    """Monte Carlo estimate of the logical error probability.

    stderr is the binomial standard error sqrt(p(1 - p) / shots).
    """

    p_logical: float
    stderr: float
    failures: int
    shots: int
    seed: int
    distance: int
    rounds: int

    def to_dict(self) -> typing.Dict[str, typing.Any]:
        "Plain dict for reports."
        return dataclasses.asdict(self)


def logical_error_rate(circuit: SyndromeCircuit, params: LcpemParams,
                       shots: int, seed: int,
                       graph: typing.Optional[DetectorGraph] = None,
                       chunk_size: int = 2048,
                       threads: int = 1) -> LogicalErrorEstimate:
    """Estimate the memory failure probability with union-find decoding.

    Estimates meant for reports need at least 1000 shots. Fewer are
    accepted for smoke runs and only log a warning.
    """
    if shots < 1000:
        logging.warning('Only %i shots; estimate will be coarse', shots)
    failures = run_memory_experiment(circuit, params, shots, seed, graph,
                                     chunk_size, threads)
    count = int(failures.sum())
    p_hat = count / shots
    estimate = LogicalErrorEstimate(
        p_hat, math.sqrt(p_hat * (1 - p_hat) / shots), count, shots, seed,
        circuit.distance, circuit.rounds)
    logging.info('d=%i rounds=%i: p_L=%.4g +- %.2g (%i/%i)',
                 circuit.distance, circuit.rounds, p_hat, estimate.stderr,
                 count, shots)
    return estimate
