"""Fluxonium spectra and the coupled-lattice idling Hamiltonian.

Energies are stored as linear frequencies in GHz. Evolution code multiplies
by 2π when it builds propagators.
"""

import dataclasses
import logging
import typing

import numpy as np
import scipy.linalg

from fluxqec.core.errors import ConvergenceError, InfeasibleSizeError


Coord = typing.Tuple[int, int]

ENERGY_FIELDS = ('e_c', 'e_j', 'e_l')
MAX_DENSE_SITES = 8
CONVERGENCE_TOL_GHZ = 1e-9
MAX_BASIS_SIZE = 480


def site_name(coord: Coord) -> str:
    """Short name for a lattice site such as Q02 for row 0, column 2.

>>> site_name((1, 3))
'Q13'
    """
    return 'Q%i%i' % (coord[0], coord[1])


def parse_site_name(name: str) -> Coord:
    "Inverse of site_name."
    if len(name) != 3 or name[0] != 'Q':
        raise ValueError('Bad site name %r; expected like Q02' % name)
    return int(name[1]), int(name[2])


@dataclasses.dataclass(frozen=True)
class FluxoniumParams:
    """Circuit energies of one fluxonium.

    :param e_c:  Charging energy in GHz.

    :param e_j:  Josephson energy in GHz.

    :param e_l:  Inductive energy in GHz.

    :param phi_ext:  External flux phase in radians (π at the sweet spot).
    """

    e_c: float
    e_j: float
    e_l: float
    phi_ext: float = np.pi

    def __post_init__(self):
        for name in ENERGY_FIELDS:
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                if name == 'e_j' and value == 0:
                    continue  # harmonic limit is allowed
                raise ValueError('Fluxonium %s must be positive, got %s' % (
                    name, value))

    def replace(self, **kwargs) -> 'FluxoniumParams':
        "Return a copy with some fields replaced."
        return dataclasses.replace(self, **kwargs)


@dataclasses.dataclass
class TruncatedQubit:
    """Lowest levels of a fluxonium with operators in its eigenbasis.
    """

    energies: np.ndarray
    n_op: np.ndarray
    phi_op: np.ndarray

    @property
    def levels(self) -> int:
        "Number of kept levels."
        return len(self.energies)

    @property
    def omega_01(self) -> float:
        "Qubit transition frequency in GHz."
        return float(self.energies[1] - self.energies[0])

    def hamiltonian(self) -> np.ndarray:
        "Single-site Hamiltonian in its own eigenbasis."
        return np.diag(self.energies).astype(complex)


def pattern_labels(width: int, height: int,
                   row_shift: int = 2) -> typing.Dict[Coord, int]:
    """Repeating five-label frequency pattern of the square lattice.

    Label of (row, col) is ((col + row_shift * row) mod 5) + 1. With the
    default shift the 2×3 block at columns 2 and 3 holds label 3 twice.

>>> labels = pattern_labels(5, 5)
>>> [labels[(r, c)] for r in range(3) for c in (2, 3)]
[3, 4, 5, 1, 2, 3]
    """
    return {(row, col): ((col + row_shift * row) % 5) + 1
            for row in range(height) for col in range(width)}


@dataclasses.dataclass
class LatticeSpec:
    """Geometry, frequency pattern, disorder and couplings of a device.
    """

    width: int
    height: int
    site_labels: typing.Dict[Coord, int]
    base_params: typing.Dict[int, FluxoniumParams]
    disorder_seed: int = 0
    disorder_sigma: float = 0.01
    j_c: float = 0.0
    j_l: float = 0.0
    keep_levels: int = 4

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Check internal consistency or raise ValueError.
        """
        if self.keep_levels not in (3, 4):
            raise ValueError('keep_levels must be 3 or 4, got %s' % (
                self.keep_levels))
        if self.disorder_sigma < 0:
            raise ValueError('disorder_sigma must be >= 0')
        for coord, label in self.site_labels.items():
            row, col = coord
            if not (0 <= row < self.height and 0 <= col < self.width):
                raise ValueError('Site %s outside %ix%i lattice' % (
                    coord, self.height, self.width))
            if label not in self.base_params:
                raise ValueError('No base params for label %s at %s' % (
                    label, coord))

    def coords(self) -> typing.List[Coord]:
        "All lattice sites in row-major order."
        return sorted(self.site_labels)

    def replace(self, **kwargs) -> 'LatticeSpec':
        "Return a copy with some fields replaced."
        return dataclasses.replace(self, **kwargs)


def _sample_positive(rng, base: float, sigma: float, coord: Coord,
                     name: str) -> float:
    while True:
        value = base + sigma * base * rng.standard_normal()
        if value > 0 or (base == 0 and value == 0):
            return float(value)
        logging.warning('Resampling negative %s=%s at %s', name, value, coord)


def sample_disordered_lattice(spec: LatticeSpec) -> typing.Dict[
        Coord, FluxoniumParams]:
    """Perturb the periodic pattern with independent relative noise.

    :param spec:  Lattice description; disorder_seed makes this deterministic.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  Map from site to its FluxoniumParams. Each of E_C, E_J, E_L
              gets base × (1 + sigma × N(0,1)). Negative draws are redrawn.
    """
    rng = np.random.default_rng(spec.disorder_seed)
    result = {}
    for coord in spec.coords():
        base = spec.base_params[spec.site_labels[coord]]
        if spec.disorder_sigma == 0:
            result[coord] = base
            continue
        values = {name: _sample_positive(rng, getattr(base, name),
                                         spec.disorder_sigma, coord, name)
                  for name in ENERGY_FIELDS}
        result[coord] = base.replace(**values)
    return result


def disorder_offsets(spec: LatticeSpec) -> typing.Dict[
        Coord, typing.Dict[str, float]]:
    """Absolute disorder offsets (sampled minus base) per site and field.
    """
    sampled = sample_disordered_lattice(spec)
    result = {}
    for coord, params in sampled.items():
        base = spec.base_params[spec.site_labels[coord]]
        result[coord] = {name: getattr(params, name) - getattr(base, name)
                         for name in ENERGY_FIELDS}
    return result


class OscillatorOperators:
    """Ladder-operator matrices of the (E_C, E_L) harmonic oscillator.
    """

    def __init__(self, params: FluxoniumParams, size: int):
        self.size = size
        self.phi_osc = (8.0 * params.e_c / params.e_l) ** 0.25
        lower = np.diag(np.sqrt(np.arange(1, size, dtype=float)), 1)
        raise_op = lower.T
        self.phi = self.phi_osc * (lower + raise_op) / np.sqrt(2.0)
        self.n = 1j * (raise_op - lower) / (np.sqrt(2.0) * self.phi_osc)
        self.cos_phi = _symmetric_function(self.phi, np.cos)
        self.shifted_phi = self.phi + params.phi_ext * np.eye(size)

    def hamiltonian_parts(self) -> typing.Dict[str, np.ndarray]:
        """Derivatives of H_f with respect to each energy.

        H_f is linear in the energies, so these are constant matrices.
        """
        n_sq = (self.n @ self.n).real
        return {'e_c': 4.0 * n_sq,
                'e_l': 0.5 * self.shifted_phi @ self.shifted_phi,
                'e_j': -self.cos_phi}

    def hamiltonian(self, params: FluxoniumParams) -> np.ndarray:
        "Fluxonium Hamiltonian in the oscillator basis (real symmetric)."
        parts = self.hamiltonian_parts()
        ham = sum(getattr(params, name) * parts[name] for name in parts)
        return 0.5 * (ham + ham.T)


def _symmetric_function(mat: np.ndarray, func) -> np.ndarray:
    vals, vecs = scipy.linalg.eigh(mat)
    return (vecs * func(vals)) @ vecs.T


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    "Make the largest-magnitude component of each column positive."
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


@dataclasses.dataclass
class FluxoniumEigensystem:
    """Full oscillator-basis eigensystem of one fluxonium.

    Kept so derivatives with respect to the energies can be formed with
    first-order perturbation theory over every level of the basis.
    """

    params: FluxoniumParams
    oscillator: OscillatorOperators
    values: np.ndarray
    vectors: np.ndarray

    def truncate(self, keep_levels: int) -> TruncatedQubit:
        "Project n and phi onto the lowest keep_levels eigenvectors."
        vecs = self.vectors[:, :keep_levels]
        n_op = vecs.T @ self.oscillator.n @ vecs
        phi_op = vecs.T @ self.oscillator.phi @ vecs
        return TruncatedQubit(
            energies=self.values[:keep_levels].copy(),
            n_op=0.5 * (n_op + n_op.conj().T),
            phi_op=(0.5 * (phi_op + phi_op.T)).astype(complex))

    def derivatives(self, keep_levels: int) -> typing.Dict[
            str, typing.Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Derivative of the truncated qubit with respect to each energy.

        ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

        :return:  Dict from 'e_c', 'e_j', 'e_l' to a tuple of
                  (d energies, d n_op, d phi_op). The oscillator basis is
                  held fixed, which is exact up to basis truncation error.
        """
        vecs, vals = self.vectors, self.values
        keep = vecs[:, :keep_levels]
        gaps = vals[:keep_levels][None, :] - vals[:, None]
        inv_gaps = np.zeros_like(gaps)
        mask = np.ones_like(gaps, dtype=bool)
        mask[np.arange(keep_levels), np.arange(keep_levels)] = False
        inv_gaps[mask] = 1.0 / gaps[mask]
        result = {}
        for name, part in self.oscillator.hamiltonian_parts().items():
            coupling = vecs.T @ part @ keep
            d_energies = np.diag(coupling[:keep_levels]).copy()
            d_vecs = vecs @ (coupling * inv_gaps)
            d_n = (d_vecs.T @ self.oscillator.n @ keep
                   + keep.T @ self.oscillator.n @ d_vecs)
            d_phi = (d_vecs.T @ self.oscillator.phi @ keep
                     + keep.T @ self.oscillator.phi @ d_vecs)
            result[name] = (d_energies, d_n, d_phi.astype(complex))
        return result


def fluxonium_eigensystem(params: FluxoniumParams,
                          oscillator_basis_size: int = 60,
                          keep_levels: int = 4,
                          check_convergence: bool = True
                          ) -> FluxoniumEigensystem:
    """Diagonalize one fluxonium, growing the basis until converged.

    The lowest keep_levels eigenvalues at size N and N+10 must agree to
    1e-9 GHz; otherwise N doubles until MAX_BASIS_SIZE.
    """
    if oscillator_basis_size < 30:
        raise ValueError('oscillator_basis_size must be >= 30, got %s' % (
            oscillator_basis_size))
    if keep_levels > 6:
        raise ValueError('keep_levels must be <= 6, got %s' % keep_levels)
    size = oscillator_basis_size
    while True:
        osc = OscillatorOperators(params, size)
        vals, vecs = scipy.linalg.eigh(osc.hamiltonian(params))
        if not check_convergence:
            break
        bigger = OscillatorOperators(params, size + 10)
        big_vals = scipy.linalg.eigh(bigger.hamiltonian(params),
                                     eigvals_only=True)
        shift = np.max(np.abs(big_vals[:keep_levels] - vals[:keep_levels]))
        if shift <= CONVERGENCE_TOL_GHZ:
            break
        logging.debug('Fluxonium basis %i not converged (shift %.3g GHz)',
                      size, shift)
        size *= 2
        if size > MAX_BASIS_SIZE:
            raise ConvergenceError(
                'Fluxonium spectrum for %s did not converge (shift %.3g GHz)'
                % (params, shift))
    return FluxoniumEigensystem(params, osc, vals, _fix_signs(vecs))


def fluxonium_spectrum(params: FluxoniumParams,
                       oscillator_basis_size: int = 60,
                       keep_levels: int = 4) -> TruncatedQubit:
    """Lowest keep_levels eigenpairs of H_f with n and phi in that basis.

    H_f = 4 E_C n² + ½ E_L (φ + φ_ext)² − E_J cos φ is built in the
    harmonic-oscillator basis of the (E_C, E_L) oscillator.
    """
    return fluxonium_eigensystem(
        params, oscillator_basis_size, keep_levels).truncate(keep_levels)


def lattice_edges(region: typing.Sequence[Coord]) -> typing.List[
        typing.Tuple[int, int]]:
    """Nearest-neighbour pairs of region as sorted index pairs.

    :param region:  Sites in the order used for tensor products.

>>> lattice_edges([(0, 2), (0, 3), (1, 2), (1, 3)])
[(0, 1), (0, 2), (1, 3), (2, 3)]
    """
    edges = []
    for i, first in enumerate(region):
        for j in range(i + 1, len(region)):
            second = region[j]
            if abs(first[0] - second[0]) + abs(first[1] - second[1]) == 1:
                edges.append((i, j))
    return edges


def embed_single(op: np.ndarray, index: int,
                 dims: typing.Sequence[int]) -> np.ndarray:
    "Kronecker-embed a single-site operator into the full product space."
    result = np.eye(1, dtype=complex)
    for pos, dim in enumerate(dims):
        result = np.kron(result, op if pos == index else np.eye(dim))
    return result


@dataclasses.dataclass
class HamiltonianTerms:
    """Local terms of a lattice Hamiltonian on an ordered set of sites.

    Pair matrices act on (site i) ⊗ (site j) with i < j in site order.
    """

    sites: typing.List[Coord]
    qubits: typing.List[TruncatedQubit]
    single: typing.List[np.ndarray]
    pairs: typing.List[typing.Tuple[int, int, np.ndarray]]
    j_c: float = 0.0
    j_l: float = 0.0

    @property
    def dims(self) -> typing.List[int]:
        "Local dimension of each site."
        return [q.levels for q in self.qubits]

    @property
    def dim(self) -> int:
        "Dimension of the full product space."
        return int(np.prod(self.dims))

    def to_dense(self) -> np.ndarray:
        """Assemble the full matrix.

        Raises InfeasibleSizeError for more than MAX_DENSE_SITES sites.
        """
        if len(self.sites) > MAX_DENSE_SITES:
            raise InfeasibleSizeError(
                'Refusing dense assembly of %i sites (max %i)' % (
                    len(self.sites), MAX_DENSE_SITES))
        dims = self.dims
        ham = np.zeros((self.dim, self.dim), dtype=complex)
        for index, op in enumerate(self.single):
            ham += embed_single(op, index, dims)
        for first, second, op in self.pairs:
            ham += embed_pair(op, first, second, dims)
        return 0.5 * (ham + ham.conj().T)


def embed_pair(op: np.ndarray, first: int, second: int,
               dims: typing.Sequence[int]) -> np.ndarray:
    """Embed an operator on sites (first, second) with first < second.

    Works for non-adjacent positions by reshaping the identity.
    """
    full = int(np.prod(dims))
    op_t = op.reshape(dims[first], dims[second], dims[first], dims[second])
    eye = np.eye(full, dtype=complex).reshape(tuple(dims) * 2)
    # Apply op on the output (row) indices of the identity.
    moved = np.tensordot(op_t, eye, axes=([2, 3], [first, second]))
    moved = np.moveaxis(moved, [0, 1], [first, second])
    return moved.reshape(full, full)


def pair_operator(first: TruncatedQubit, second: TruncatedQubit,
                  j_c: float, j_l: float) -> np.ndarray:
    "Multi-path coupling J_C n⊗n − J_L φ⊗φ."
    return (j_c * np.kron(first.n_op, second.n_op)
            - j_l * np.kron(first.phi_op, second.phi_op))


def build_idle_hamiltonian(qubits: typing.Mapping[Coord, TruncatedQubit],
                           spec: LatticeSpec,
                           region: typing.Sequence[Coord]
                           ) -> HamiltonianTerms:
    """Idle Hamiltonian of a region: diagonal site terms plus couplings.

    :param qubits:  Truncated qubit for each site of the region.

    :param spec:  Supplies J_C and J_L.

    :param region:  Sites in tensor-product order (row-major by convention).

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  HamiltonianTerms with couplings on every nearest-neighbour
              pair inside the region.
    """
    region = list(region)
    for coord in region:
        if coord not in spec.site_labels:
            raise ValueError('Region site %s not in lattice' % (coord,))
    ordered = [qubits[c] for c in region]
    pairs = [(i, j, pair_operator(ordered[i], ordered[j], spec.j_c,
                                  spec.j_l))
             for i, j in lattice_edges(region)]
    return HamiltonianTerms(
        sites=region, qubits=ordered,
        single=[q.hamiltonian() for q in ordered], pairs=pairs,
        j_c=spec.j_c, j_l=spec.j_l)


def region_qubits(spec: LatticeSpec, region: typing.Sequence[Coord],
                  oscillator_basis_size: int = 60,
                  site_params: typing.Optional[typing.Mapping[
                      Coord, FluxoniumParams]] = None
                  ) -> typing.Dict[Coord, TruncatedQubit]:
    """Truncated qubits for every site of region with disorder applied.
    """
    if site_params is None:
        site_params = sample_disordered_lattice(spec)
    return {c: fluxonium_spectrum(site_params[c], oscillator_basis_size,
                                  spec.keep_levels) for c in region}


def lattice_frequency_table(spec: LatticeSpec,
                            oscillator_basis_size: int = 60
                            ) -> typing.List[typing.Dict[str, typing.Any]]:
    """Rows of (site, label, omega_01) for the whole disordered lattice.
    """
    sampled = sample_disordered_lattice(spec)
    rows = []
    for coord in spec.coords():
        qubit = fluxonium_spectrum(sampled[coord], oscillator_basis_size, 2)
        rows.append({'site': site_name(coord),
                     'label': spec.site_labels[coord],
                     'omega_01_ghz': qubit.omega_01})
    return rows
