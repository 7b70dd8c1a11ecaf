"""Trotterized evolution, computational-subspace labeling, Walsh analysis and
round-unitary extraction.

States on a region of m sites are stored as arrays of shape (dim, ncols)
with dim the product of the local level counts, so all 2^m basis columns
evolve together in one vectorized pass.
"""

import dataclasses
import logging
import math
import typing

import numpy as np
import scipy.linalg
import scipy.optimize

from fluxqec.core.control import (
    DriveSpec, GateSchedule, apply_compensation, drive_hamiltonian_term,
    target_unitary)
from fluxqec.core.device import (
    HamiltonianTerms, TruncatedQubit, pair_operator)
from fluxqec.core.errors import LabelingError, LeakageError, StabilityError


OVERLAP_THRESHOLD = 0.9
LABEL_PROXIMITY = 0.02
MAX_LEAKAGE = 0.05
DEFAULT_DT_1Q = 0.02
DEFAULT_DT_2Q = 0.065
NORM_TOL_PER_1000_STEPS = 1e-9


def bitstrings(num_qubits: int) -> typing.List[str]:
    """Computational labels in index order (qubit 0 most significant).

>>> bitstrings(2)
['00', '01', '10', '11']
    """
    return [format(i, '0%ib' % num_qubits) for i in range(2 ** num_qubits)]


def bare_index(label: str, dims: typing.Sequence[int]) -> int:
    "Position of the product state |b_0 b_1 ...> in the full space."
    if len(label) != len(dims):
        raise ValueError('Label %r does not match %i sites' % (
            label, len(dims)))
    index = 0
    for bit, dim in zip(label, dims):
        index = index * dim + int(bit)
    return index


def _dense(h0) -> np.ndarray:
    if isinstance(h0, HamiltonianTerms):
        return h0.to_dense()
    return np.asarray(h0, dtype=complex)


@dataclasses.dataclass
class ComputationalBasis:
    """Phase-fixed eigenvectors of H(0) labeled by computational bitstrings.

    :param states:  Array (dim, 2^m); column s is the eigenvector labeled
                    bitstrings(m)[s].

    :param energies:  Eigenvalue (GHz) of each column.

    :param overlaps:  |<bare label|state>| for each column.

    :param margin:  Smallest distance of any overlap in a labeled row to
                    the threshold. Small margins mean the labeling could
                    flip under a small parameter change.

    The full eigendecomposition is kept (eigvals, eigvecs, indices) because
    derivatives of the selected eigenvectors need every other level.
    """

    states: np.ndarray
    labels: typing.List[str]
    energies: np.ndarray
    dims: typing.List[int]
    overlaps: np.ndarray
    margin: float
    overlap_threshold: float = OVERLAP_THRESHOLD
    eigvals: typing.Optional[np.ndarray] = None
    eigvecs: typing.Optional[np.ndarray] = None
    indices: typing.Optional[np.ndarray] = None
    terms: typing.Optional[HamiltonianTerms] = None

    @property
    def num_qubits(self) -> int:
        "Number of sites m."
        return len(self.dims)

    @property
    def dim(self) -> int:
        "Dimension of the full product space."
        return int(np.prod(self.dims))

    def bare_indices(self) -> np.ndarray:
        "Product-basis index of every label."
        return np.array([bare_index(b, self.dims) for b in self.labels])

    def orthonormality_error(self) -> float:
        "max |B†B − I|."
        gram = self.states.conj().T @ self.states
        return float(np.max(np.abs(gram - np.eye(len(self.labels)))))


def select_computational_basis(h0, dims: typing.Optional[
        typing.Sequence[int]] = None,
                               overlap_threshold: float = OVERLAP_THRESHOLD
                               ) -> ComputationalBasis:
    """Label eigenvectors of the idle Hamiltonian by computational bitstrings.

    :param h0:  HamiltonianTerms, or a dense matrix together with dims.

    :param dims:  Local level counts; required for a dense matrix.

    :param overlap_threshold:  Each bare product state must overlap more
                               than this with exactly one eigenvector.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  ComputationalBasis whose columns are eigenvectors multiplied
              by a phase that makes <bare label|state> real and positive.

    Raises LabelingError naming the first bitstring that matches zero or
    several eigenvectors.
    """
    terms = h0 if isinstance(h0, HamiltonianTerms) else None
    if terms is not None:
        dims = terms.dims
    elif dims is None:
        raise ValueError('dims are required for a dense h0')
    dims = list(dims)
    matrix = _dense(h0)
    if matrix.shape != (int(np.prod(dims)),) * 2:
        raise ValueError('h0 has shape %s but dims %s' % (matrix.shape, dims))
    if min(dims) < 2:
        raise ValueError('Every site needs at least 2 levels, got %s' % dims)
    vals, vecs = scipy.linalg.eigh(matrix)
    labels = bitstrings(len(dims))
    states = np.zeros((matrix.shape[0], len(labels)), dtype=complex)
    indices = np.zeros(len(labels), dtype=int)
    overlaps = np.zeros(len(labels))
    margin = np.inf
    for column, label in enumerate(labels):
        bare = bare_index(label, dims)
        row = np.abs(vecs[bare, :])
        hits = np.flatnonzero(row > overlap_threshold)
        if len(hits) != 1:
            raise LabelingError(
                'Bitstring %s matched %i eigenvectors with overlap > %s' % (
                    label, len(hits), overlap_threshold), label)
        best = hits[0]
        indices[column] = best
        overlaps[column] = row[best]
        states[:, column] = vecs[:, best] * (
            np.conj(vecs[bare, best]) / row[best])
        margin = min(margin, float(np.min(np.abs(row - overlap_threshold))))
    if margin < LABEL_PROXIMITY:
        logging.warning('Computational labeling is within %.3g of the %s '
                        'overlap threshold', margin, overlap_threshold)
    fixed = vecs.astype(complex)
    fixed[:, indices] = states
    return ComputationalBasis(
        states=states, labels=labels, energies=vals[indices].copy(),
        dims=dims, overlaps=overlaps, margin=margin,
        overlap_threshold=overlap_threshold, eigvals=vals, eigvecs=fixed,
        indices=indices, terms=terms)


@dataclasses.dataclass
class WalshCoefficients:
    """Expansion H_C = Σ_b c_b Z(b) of the computational spectrum.

    :param coeffs:  c_b in GHz, indexed by the integer value of b with
                    qubit 0 as the most significant bit.
    """

    coeffs: np.ndarray
    num_qubits: int

    @property
    def weights(self) -> np.ndarray:
        "Hamming weight w(b) of every index."
        return np.array([bin(i).count('1') for i in range(len(self.coeffs))])

    def inverse(self) -> np.ndarray:
        "Reconstruct the 2^m computational eigenvalues."
        return scipy.linalg.hadamard(len(self.coeffs)) @ self.coeffs

    def to_rows(self, skip_identity: bool = True) -> typing.List[
            typing.Dict[str, typing.Any]]:
        "Rows sorted by descending |c_b|."
        labels = bitstrings(self.num_qubits)
        weights = self.weights
        order = np.argsort(-np.abs(self.coeffs), kind='stable')
        return [{'bitstring': labels[i], 'weight': int(weights[i]),
                 'coeff_ghz': float(self.coeffs[i]),
                 'abs_coeff_ghz': float(abs(self.coeffs[i]))}
                for i in order if not (skip_identity and i == 0)]


def walsh_transform(h0, basis: ComputationalBasis) -> WalshCoefficients:
    """Walsh coefficients c_b = 2^-m Σ_s (−1)^(b·s) E_s.

    :param h0:  Idle Hamiltonian used to evaluate E_s = <s|H(0)|s> on the
                basis columns; None reuses the stored eigenvalues.

    :param basis:  Labeled computational basis of h0.
    """
    if h0 is None:
        energies = basis.energies
    else:
        matrix = _dense(h0)
        energies = np.real(np.sum(
            basis.states.conj() * (matrix @ basis.states), axis=0))
    size = len(energies)
    return WalshCoefficients(
        scipy.linalg.hadamard(size) @ energies / size, basis.num_qubits)


def walsh_weight_summary(coeffs: WalshCoefficients) -> typing.List[
        typing.Dict[str, typing.Any]]:
    """Largest |c_b| for each weight w(b) ≥ 1.
    """
    weights = coeffs.weights
    labels = bitstrings(coeffs.num_qubits)
    rows = []
    for weight in range(1, coeffs.num_qubits + 1):
        members = np.flatnonzero(weights == weight)
        best = members[np.argmax(np.abs(coeffs.coeffs[members]))]
        rows.append({'weight': weight, 'bitstring': labels[best],
                     'max_abs_coeff_ghz': float(abs(coeffs.coeffs[best]))})
    return rows


def walsh_phase_unitary(coeffs: WalshCoefficients, t: float,
                        weights: typing.Sequence[int] = (1,)) -> np.ndarray:
    """Diagonal exp(−i2πt Σ c_b Z(b)) over the chosen weights.

    With weights=(1,) this is the single-qubit part of idle evolution, so
    its inverse strips local phases and leaves only crosstalk.
    """
    mask = np.isin(coeffs.weights, list(weights))
    diag = scipy.linalg.hadamard(len(coeffs.coeffs)) @ (coeffs.coeffs * mask)
    return np.diag(np.exp(-2j * np.pi * t * diag))


def pair_c11(first: TruncatedQubit, second: TruncatedQubit, j_c: float,
             j_l: float) -> float:
    "ZZ Walsh coefficient c_11 (GHz) of two coupled qubits."
    terms = HamiltonianTerms(
        sites=[(0, 0), (0, 1)], qubits=[first, second],
        single=[first.hamiltonian(), second.hamiltonian()],
        pairs=[(0, 1, pair_operator(first, second, j_c, j_l))],
        j_c=j_c, j_l=j_l)
    basis = select_computational_basis(terms)
    return float(walsh_transform(terms, basis).coeffs[3])


@dataclasses.dataclass
class ZZScan:
    """Grid of c_11 over (J_C, J_L) plus refined zero crossings.

    grid[i, j] is c_11 at j_c_values[i], j_l_values[j]. zeros holds one row
    per bracketed sign change found along J_L.
    """

    j_c_values: np.ndarray
    j_l_values: np.ndarray
    grid: np.ndarray
    zeros: typing.List[typing.Dict[str, float]]

    def best(self) -> typing.Dict[str, float]:
        "Point with the smallest |c_11| among grid points and zeros."
        row, col = np.unravel_index(np.argmin(np.abs(self.grid)),
                                    self.grid.shape)
        result = {'j_c_ghz': float(self.j_c_values[row]),
                  'j_l_ghz': float(self.j_l_values[col]),
                  'c11_ghz': float(self.grid[row, col])}
        for item in self.zeros:
            if abs(item['c11_ghz']) < abs(result['c11_ghz']):
                result = dict(item)
        return result


def zz_cancellation_scan(pair: typing.Tuple[TruncatedQubit, TruncatedQubit],
                         j_c_values: typing.Sequence[float],
                         j_l_values: typing.Sequence[float],
                         xtol: float = 1e-12) -> ZZScan:
    """Scan c_11 over coupling strengths and refine where it changes sign.

    :param pair:  Two neighbouring truncated qubits.

    :param j_c_values:  Capacitive couplings (GHz).

    :param j_l_values:  Inductive couplings (GHz), ascending.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  ZZScan. For each J_C every sign change of c_11 between
              adjacent J_L grid points is refined with Brent's method.
    """
    first, second = pair
    j_c_values = np.asarray(j_c_values, dtype=float)
    j_l_values = np.asarray(j_l_values, dtype=float)
    grid = np.array([[pair_c11(first, second, jc, jl) for jl in j_l_values]
                     for jc in j_c_values])
    zeros = []
    for row, j_c in enumerate(j_c_values):
        signs = np.sign(grid[row])
        for col in np.flatnonzero(signs[:-1] * signs[1:] < 0):
            root = scipy.optimize.brentq(
                lambda jl, jc=j_c: pair_c11(first, second, jc, jl),
                j_l_values[col], j_l_values[col + 1], xtol=xtol)
            zeros.append({'j_c_ghz': float(j_c), 'j_l_ghz': float(root),
                          'c11_ghz': pair_c11(first, second, j_c, root)})
    if not zeros:
        logging.info('No c_11 sign change inside the scanned J_L range')
    return ZZScan(j_c_values, j_l_values, grid, zeros)


class _Factor:
    """exp(−iθH) of a local Hermitian H plus what its adjoint needs."""

    def __init__(self, hamiltonian: np.ndarray, theta: float):
        self.hamiltonian = hamiltonian
        self.theta = theta
        vals, vecs = scipy.linalg.eigh(hamiltonian)
        self.vecs = vecs
        mu = -1j * theta * vals
        expo = np.exp(mu)
        self.unitary = (vecs * expo) @ vecs.conj().T
        diff = mu[:, None] - mu[None, :]
        close = np.abs(diff) < 1e-12
        kernel = np.empty_like(diff)
        kernel[close] = np.broadcast_to(expo[:, None], diff.shape)[close]
        kernel[~close] = ((expo[:, None] - expo[None, :])[~close]
                          / diff[~close])
        self.kernel = kernel

    def sensitivity(self, outer: np.ndarray) -> np.ndarray:
        """Map ∂L/∂conj(U) to ∂L/∂conj(H) for a stack of outputs.

        :param outer:  Array (nout, K, K) of local gradients w.r.t. U.
        """
        vecs = self.vecs
        rotated = vecs.conj().T @ outer @ vecs
        return 1j * self.theta * (vecs @ (self.kernel.conj() * rotated)
                                  @ vecs.conj().T)


def _apply(tensor: np.ndarray, op: np.ndarray, axes: typing.Tuple[int, ...],
           dims: typing.Sequence[int]) -> np.ndarray:
    if len(axes) == 1:
        return np.moveaxis(np.tensordot(op, tensor, axes=([1], axes)),
                           0, axes[0])
    first, second = axes
    op4 = op.reshape(dims[first], dims[second], dims[first], dims[second])
    moved = np.tensordot(op4, tensor, axes=([2, 3], [first, second]))
    return np.moveaxis(moved, [0, 1], [first, second])


def _local_outer(grad: np.ndarray, psi: np.ndarray,
                 axes: typing.Tuple[int, ...]) -> np.ndarray:
    """Σ over all other indices of grad[a, ...] conj(psi[b, ...]).

    grad carries a trailing output axis; the result has shape (nout, K, K).
    """
    others = [ax for ax in range(psi.ndim) if ax not in axes]
    result = np.tensordot(grad, psi.conj(), axes=(others, others))
    kept = len(axes)
    # result axes: kept of grad, output, kept of psi
    result = np.moveaxis(result, kept, 0)
    size = int(np.prod(result.shape[1:kept + 1]))
    return result.reshape(result.shape[0], size, size)


def _pair_inner(gamma: np.ndarray, op: np.ndarray) -> np.ndarray:
    "2 Re <gamma, op> for each output."
    return 2.0 * np.real(np.sum(gamma.conj() * op, axis=(-2, -1)))


@dataclasses.dataclass
class TrotterSensitivity:
    """Reverse-mode sensitivities of a scalar (or stacked) loss.

    For an output o and Hermitian perturbation X of a local term,
    dL_o = 2 Re <S[o], X>. single[i] refers to the static site Hamiltonian,
    drive_op[i] to φ̂ of a driven site, pairs[e] to the pair operator.
    field[i][o, k] is ∂L_o/∂f_i(t_k) for the drive field sampled at step k.
    energy[o] is Σ 2 Re <S, H> over every applied factor, which is what a
    change of the common step length couples to.
    """

    single: typing.List[np.ndarray]
    drive_op: typing.Dict[int, np.ndarray]
    pairs: typing.List[np.ndarray]
    field: typing.Dict[int, np.ndarray]
    energy: np.ndarray
    initial_grad: np.ndarray
    step_times: np.ndarray
    t_total: float

    def drive_gradients(self, site: int, drive: DriveSpec) -> typing.Dict[
            str, np.ndarray]:
        """∂L/∂(drive parameter) at fixed round duration and step times.
        """
        sens = self.field[site]
        result = {}
        for step, t_k in enumerate(self.step_times):
            for name, value in drive.field_grad(t_k).items():
                result[name] = result.get(name, 0.0) + sens[:, step] * value
        return result

    def duration_gradient(self, drives: typing.Mapping[int, DriveSpec]
                          ) -> np.ndarray:
        """∂L/∂T for the round duration T with the step count held fixed.

        Stretching T rescales every step length and moves every sampling
        time t_k = (k + ½) T / N.
        """
        if self.t_total <= 0:
            return np.zeros_like(self.energy)
        result = self.energy / self.t_total
        for site, drive in drives.items():
            sens = self.field[site]
            for step, t_k in enumerate(self.step_times):
                result = result + sens[:, step] * drive.field_dt(t_k) * (
                    t_k / self.t_total)
        return result


class TrotterPropagator:
    """First-order product-formula propagator on a region.

    :param terms:  Static single-site and pair terms.

    :param drives:  Drives acting through φ̂ of their target sites.

    :param t_total:  Evolution time in ns.

    :param dt:  Requested step in ns. The step count is ceil(t_total/dt)
                and the step actually used is t_total divided by it.

    Each step applies every single-site factor in site order and then every
    pair factor in edge order. Drive fields are sampled at step midpoints.
    Pair factors and undriven site factors are exponentiated once.
    """

    def __init__(self, terms: HamiltonianTerms,
                 drives: typing.Sequence[DriveSpec] = (),
                 t_total: float = 0.0, dt: float = DEFAULT_DT_1Q):
        if not dt > 0:
            raise ValueError('dt must be positive, got %s' % dt)
        if t_total < 0:
            raise ValueError('t_total must be >= 0, got %s' % t_total)
        self.terms = terms
        self.dims = terms.dims
        self.dim = terms.dim
        self.drives = {}
        for drive in drives:
            if drive.target not in terms.sites:
                raise ValueError('Drive on %s outside region' % (
                    drive.target,))
            self.drives[terms.sites.index(drive.target)] = drive
        self.t_total = float(t_total)
        self.num_steps = (int(math.ceil(t_total / dt - 1e-9))
                          if t_total > 0 else 0)
        self.dt = self.t_total / self.num_steps if self.num_steps else 0.0
        theta = 2 * np.pi * self.dt
        self.theta = theta
        self._static = [_Factor(h, theta) for h in terms.single]
        self._pairs = [((first, second), _Factor(op, theta))
                       for first, second, op in terms.pairs]

    @property
    def step_times(self) -> np.ndarray:
        "Midpoint sampling time of each step."
        return (np.arange(self.num_steps) + 0.5) * self.dt

    def _step_factors(self, step: int) -> typing.List[typing.Tuple[
            str, int, _Factor, typing.Tuple[int, ...]]]:
        t_mid = (step + 0.5) * self.dt
        factors = []
        for site, static in enumerate(self._static):
            drive = self.drives.get(site)
            if drive is None:
                factors.append(('site', site, static, (site,)))
                continue
            ham = self.terms.single[site] + drive_hamiltonian_term(
                drive, t_mid, self.terms.qubits[site])
            factors.append(('site', site, _Factor(ham, self.theta), (site,)))
        for index, (axes, factor) in enumerate(self._pairs):
            factors.append(('pair', index, factor, axes))
        return factors

    def _as_tensor(self, states: np.ndarray) -> typing.Tuple[
            np.ndarray, bool]:
        states = np.asarray(states, dtype=complex)
        vector = states.ndim == 1
        if vector:
            states = states[:, None]
        if states.shape[0] != self.dim:
            raise ValueError('State dimension %i does not match %i' % (
                states.shape[0], self.dim))
        return states.reshape(tuple(self.dims) + states.shape[1:]), vector

    def evolve(self, psi0: np.ndarray) -> np.ndarray:
        """Propagate one state (dim,) or a batch of columns (dim, ncols).
        """
        tensor, vector = self._as_tensor(psi0)
        before = np.linalg.norm(tensor.reshape(self.dim, -1), axis=0)
        for step in range(self.num_steps):
            for _kind, _key, factor, axes in self._step_factors(step):
                tensor = _apply(tensor, factor.unitary, axes, self.dims)
        result = tensor.reshape(self.dim, -1)
        self._check_norm(before, np.linalg.norm(result, axis=0))
        return result[:, 0] if vector else result

    def _check_norm(self, before: np.ndarray, after: np.ndarray):
        tol = NORM_TOL_PER_1000_STEPS * max(1.0, self.num_steps / 1000.0)
        drift = float(np.max(np.abs(after - before))) if len(before) else 0.0
        if drift > tol:
            raise StabilityError('Norm drift %.3g over %i steps exceeds %.3g'
                                 % (drift, self.num_steps, tol))

    def backpropagate(self, psi_final: np.ndarray,
                      grad_final: np.ndarray) -> TrotterSensitivity:
        """Adjoint pass from the final states back to t = 0.

        :param psi_final:  Output of evolve, shape (dim, ncols).

        :param grad_final:  ∂L/∂conj(psi_final) of shape (dim, ncols) or
                            (dim, ncols, nout) for several losses at once.

        ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

        :return:  TrotterSensitivity. Intermediate states are recovered by
                  undoing each unitary factor, so memory stays at two
                  copies of the state batch.
        """
        psi, _ = self._as_tensor(psi_final)
        grad = np.asarray(grad_final, dtype=complex)
        if grad.ndim == 2:
            grad = grad[:, :, None]
        nout = grad.shape[-1]
        grad = grad.reshape(tuple(self.dims) + grad.shape[1:])
        sites = len(self.dims)
        single = [np.zeros((nout, d, d), dtype=complex) for d in self.dims]
        drive_op = {s: np.zeros((nout, self.dims[s], self.dims[s]),
                                dtype=complex) for s in self.drives}
        pairs = [np.zeros((nout, self.dims[a] * self.dims[b],
                           self.dims[a] * self.dims[b]), dtype=complex)
                 for (a, b), _ in self._pairs]
        field = {s: np.zeros((nout, self.num_steps)) for s in self.drives}
        energy = np.zeros(nout)
        for step in reversed(range(self.num_steps)):
            t_mid = (step + 0.5) * self.dt
            for kind, key, factor, axes in reversed(
                    self._step_factors(step)):
                undo = factor.unitary.conj().T
                psi = _apply(psi, undo, axes, self.dims)
                gamma = factor.sensitivity(_local_outer(grad, psi, axes))
                grad = _apply(grad, undo, axes, self.dims)
                energy += _pair_inner(gamma, factor.hamiltonian)
                if kind == 'pair':
                    pairs[key] += gamma
                    continue
                single[key] += gamma
                drive = self.drives.get(key)
                if drive is not None:
                    phi = self.terms.qubits[key].phi_op
                    drive_op[key] += drive.field(t_mid) * gamma
                    field[key][:, step] = _pair_inner(gamma, phi)
        return TrotterSensitivity(
            single=single, drive_op=drive_op, pairs=pairs, field=field,
            energy=energy,
            initial_grad=grad.reshape((self.dim,) + grad.shape[sites:]),
            step_times=self.step_times, t_total=self.t_total)


def trotter_evolve(terms: HamiltonianTerms, psi0: np.ndarray, dt: float,
                   t_total: float,
                   drives: typing.Sequence[DriveSpec] = ()) -> np.ndarray:
    """Evolve psi0 for t_total ns under terms plus drives.

    Thin wrapper around TrotterPropagator for one-off evolutions.
    """
    return TrotterPropagator(terms, drives, t_total, dt).evolve(psi0)


def default_dt(schedule: GateSchedule) -> float:
    "Trotter step for the schedule's gate arity."
    return DEFAULT_DT_2Q if schedule.target == 'cnot' else DEFAULT_DT_1Q


def gate_fidelity(u_sim: np.ndarray, target: np.ndarray) -> float:
    """Average gate fidelity (|tr(U_t† U)|² + D) / (D (D + 1)).

>>> round(gate_fidelity(np.eye(2), np.eye(2)), 12)
1.0
    """
    dim = target.shape[0]
    overlap = np.trace(target.conj().T @ u_sim)
    return float((abs(overlap) ** 2 + dim) / (dim * (dim + 1)))


@dataclasses.dataclass
class RoundResult:
    """Projected round operator and its leakage.

    u_raw[j, i] = <ψ_j|final state of ψ_i>; u_sim is u_raw with the
    compensation rotations applied. leakage_per_state[i] is the population
    of column i that left the computational subspace.
    """

    u_raw: np.ndarray
    u_sim: np.ndarray
    leakage_per_state: np.ndarray
    p_leak: float
    target: np.ndarray
    num_steps: int = 0
    dt: float = 0.0

    @property
    def u_error(self) -> np.ndarray:
        "U_sim† U_target."
        return self.u_sim.conj().T @ self.target

    def average_fidelity(self) -> float:
        "Average gate fidelity of u_sim to the target."
        return gate_fidelity(self.u_sim, self.target)

    def unitarity_error(self) -> float:
        "Spectral-norm distance of u_sim from the nearest unitary."
        svals = scipy.linalg.svdvals(self.u_sim)
        return float(np.max(np.abs(svals - 1.0)))

    def to_dict(self) -> dict:
        "Row-major real and imaginary parts plus leakage figures."
        return {'u_sim_real': self.u_sim.real.tolist(),
                'u_sim_imag': self.u_sim.imag.tolist(),
                'leakage_per_state': self.leakage_per_state.tolist(),
                'p_leak': self.p_leak,
                'average_fidelity': self.average_fidelity(),
                'num_steps': self.num_steps, 'dt_ns': self.dt}


def project_round(final_states: np.ndarray, basis: ComputationalBasis,
                  schedule: GateSchedule,
                  max_leak: float = MAX_LEAKAGE) -> RoundResult:
    """Form C = B† Ψ_T, the leakage figures and the compensated u_sim.
    """
    coeffs = basis.states.conj().T @ final_states
    dim = coeffs.shape[0]
    leakage = np.clip(1.0 - np.sum(np.abs(coeffs) ** 2, axis=0), 0.0, None)
    p_leak = float(1.0 - np.real(np.trace(coeffs.conj().T @ coeffs)) / dim)
    if p_leak > max_leak:
        raise LeakageError('Leakage %.3g exceeds %.3g; the round is not '
                           'close to unitary on the subspace' % (
                               p_leak, max_leak), p_leak)
    u_sim = apply_compensation(coeffs, schedule.compensation)
    return RoundResult(u_raw=coeffs, u_sim=u_sim, leakage_per_state=leakage,
                       p_leak=p_leak, target=target_unitary(schedule))


def extract_round_unitary(schedule: GateSchedule, basis: ComputationalBasis,
                          dt: typing.Optional[float] = None,
                          terms: typing.Optional[HamiltonianTerms] = None,
                          max_leak: float = MAX_LEAKAGE) -> RoundResult:
    """Evolve every labeled basis state through one gate round.

    :param schedule:  Drives, compensation and target on basis' region.

    :param basis:  Labeled eigenbasis of the idle Hamiltonian.

    :param dt:  Trotter step in ns; defaults by gate arity.

    :param terms:  Idle Hamiltonian; defaults to the one basis came from.

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    :return:  RoundResult. Raises LeakageError when p_leak > max_leak.
    """
    terms = terms if terms is not None else basis.terms
    if terms is None:
        raise ValueError('No idle Hamiltonian given for the round')
    if list(terms.sites) != list(schedule.region):
        raise ValueError('Schedule region %s differs from basis region %s'
                         % (schedule.region, terms.sites))
    dt = default_dt(schedule) if dt is None else dt
    propagator = TrotterPropagator(terms, schedule.drives,
                                   schedule.duration, dt)
    logging.info('Evolving %i states on %i sites for %.3f ns (%i steps)',
                 len(basis.labels), len(terms.sites), schedule.duration,
                 propagator.num_steps)
    final = propagator.evolve(basis.states)
    result = project_round(final, basis, schedule, max_leak)
    result.num_steps = propagator.num_steps
    result.dt = propagator.dt
    return result
