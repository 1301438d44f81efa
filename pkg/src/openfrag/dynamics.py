"""Brick-wall Lindblad circuits and their stationary states.

One time step is an odd-bond layer followed by an even-bond layer of
two-site gates ``exp(L_j)`` with

    L_j(X) = -i J [h, X] + gamma * sum_L w_L (L X L - {L^2, X}/2).

Operators on the chain are plain ``3**N x 3**N`` arrays. Gates act on them
through a single tensordot, so the full ``9**N`` superoperator is never built.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .fragmentation import KrylovDecomposition
from .hilbert import (
    LOCAL_DIM,
    PSD_FLOOR,
    TRACE_TOL,
    Superoperator,
    is_hermitian,
    matrix_exp,
    n_sites_of,
    trace_norm,
    validate_density_matrix,
)
from .models import CHANNELS, DEFAULT_COUPLING_INTERVAL, SX, SZ, pair_sum, tl_projector

log = logging.getLogger(__name__)

TRACE_DRIFT_TOL = 1e-8
CONVERGENCE_TOL = 1e-9
CONVERGENCE_STEPS = 10
FIXED_POINT_TOL = 1e-8

BOND_TERMS = ("projector", "pair_sum")
WEIGHTINGS = ("uniform", "gate")

_ID2 = np.eye(LOCAL_DIM**2)


class TraceDriftError(RuntimeError):
    pass


@dataclass(frozen=True)
class LindbladCircuitSpec:
    """Parameters of a brick-wall Lindblad circuit.

    ``bond_term`` selects the bond Hamiltonian: the normalized dimer
    projector ``e`` or the pair sum ``sum_ab |aa><bb| = 3 e``.

    ``weighting`` controls one-site jumps. In each gate the dissipator of a
    one-site jump on an interior site is weighted by 1/2 (``"uniform"``), so
    that every site is dissipated at the same total rate per time step, or by
    1 (``"gate"``), which applies the two one-site dissipators of every gate
    in full.
    """

    n_sites: int
    channel: str = "dephasing"
    gamma: float = 1.0
    interval: tuple[float, float] = DEFAULT_COUPLING_INTERVAL
    n_steps: int = 100
    rng_seed: int = 0
    bond_term: str = "projector"
    weighting: str = "uniform"

    def __post_init__(self):
        if self.n_sites < 2 or self.n_sites % 2:
            raise ValueError("n_sites must be an even integer >= 2")
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}; expected one of {CHANNELS}")
        if not self.gamma >= 0:
            raise ValueError("gamma must be nonnegative")
        if self.n_steps < 0:
            raise ValueError("n_steps must be nonnegative")
        if self.bond_term not in BOND_TERMS:
            raise ValueError(f"bond_term must be one of {BOND_TERMS}")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        lo, hi = self.interval
        if not lo <= hi:
            raise ValueError("coupling interval is empty")

    @property
    def dim(self) -> int:
        return LOCAL_DIM**self.n_sites

    def bond_hamiltonian(self) -> np.ndarray:
        return tl_projector() if self.bond_term == "projector" else pair_sum()

    def site_weight(self, site: int) -> float:
        if self.weighting == "gate":
            return 1.0
        return 1.0 if site in (1, self.n_sites) else 0.5

    def bond_jumps(self, bond: int) -> list[tuple[np.ndarray, float]]:
        """Two-site jump operators and weights entering the gate on ``bond``."""
        one = {"dephasing": SZ, "spin_flip": SX}.get(self.channel)
        if one is not None:
            eye = np.eye(LOCAL_DIM)
            return [
                (np.kron(one, eye), self.site_weight(bond)),
                (np.kron(eye, one), self.site_weight(bond + 1)),
            ]
        if self.channel == "structure_preserving":
            return [(tl_projector(), 1.0)]
        return []

    def layers(self) -> tuple[list[int], list[int]]:
        bonds = range(1, self.n_sites)
        return [j for j in bonds if j % 2 == 1], [j for j in bonds if j % 2 == 0]

    def manifest(self) -> dict:
        return {
            "N": self.n_sites,
            "channel": self.channel,
            "gamma": self.gamma,
            "interval": list(self.interval),
            "n_steps": self.n_steps,
            "rng_seed": self.rng_seed,
            "bond_term": self.bond_term,
            "weighting": self.weighting,
            "site_weights": [self.site_weight(s) for s in range(1, self.n_sites + 1)],
        }


def coupling_schedule(spec: LindbladCircuitSpec, n_steps: int | None = None) -> np.ndarray:
    """Fresh couplings per bond and step: ``J[t, j-1]`` is used on bond j in step t+1."""
    n = spec.n_steps if n_steps is None else n_steps
    rng = np.random.default_rng(spec.rng_seed)
    lo, hi = spec.interval
    return rng.uniform(lo, hi, size=(n, spec.n_sites - 1))


# -- local superoperators ---------------------------------------------------


def _commutator_superop(h: np.ndarray) -> np.ndarray:
    d = h.shape[0]
    eye = np.eye(d)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def _dissipator_superop(jumps: Iterable) -> np.ndarray:
    out = None
    for item in jumps:
        L, w = item if isinstance(item, tuple) else (item, 1.0)
        L = np.asarray(L)
        if not is_hermitian(L, tol=1e-12):
            raise ValueError("jump operators must be Hermitian")
        d = L.shape[0]
        eye = np.eye(d)
        L2 = L @ L
        term = np.kron(L, L.T) - 0.5 * np.kron(L2, eye) - 0.5 * np.kron(eye, L2.T)
        out = w * term if out is None else out + w * term
    return out


def local_liouvillian(h: np.ndarray, jumps: Iterable, J: float, gamma: float) -> np.ndarray:
    """Row-major matrix of ``-iJ[h, .] + gamma * sum w D_L`` on two sites."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    gen = J * _commutator_superop(np.asarray(h))
    diss = _dissipator_superop(jumps)
    if diss is not None:
        gen = gen + gamma * diss
    return gen


def liouvillian_gate(h: np.ndarray, jumps: Iterable, J: float, gamma: float) -> Superoperator:
    """Two-site gate ``exp(L_j)``; ``jumps`` holds matrices or ``(matrix, weight)`` pairs."""
    return Superoperator(matrix_exp(local_liouvillian(h, jumps, J, gamma)), n_sites=2)


def apply_two_site_superop(g: np.ndarray, bond: int, x: np.ndarray, n_sites: int) -> np.ndarray:
    """Apply an 81x81 row-major two-site superoperator on ``bond`` to a chain operator."""
    n = n_sites
    t = x.reshape((LOCAL_DIM,) * (2 * n))
    gt = g.reshape((LOCAL_DIM,) * 8)
    axes = [bond - 1, bond, n + bond - 1, n + bond]
    out = np.tensordot(gt, t, axes=([4, 5, 6, 7], axes))
    out = np.moveaxis(out, [0, 1, 2, 3], axes)
    return out.reshape(x.shape)


class Circuit:
    """Gate factory for one :class:`LindbladCircuitSpec` (caches the J-independent parts)."""

    def __init__(self, spec: LindbladCircuitSpec):
        self.spec = spec
        self._comm = _commutator_superop(spec.bond_hamiltonian())
        self._diss = {}
        for j in range(1, spec.n_sites):
            d = _dissipator_superop(spec.bond_jumps(j))
            self._diss[j] = np.zeros_like(self._comm) if d is None else d

    def generator(self, bond: int, J: float) -> np.ndarray:
        return J * self._comm + self.spec.gamma * self._diss[bond]

    def gate(self, bond: int, J: float) -> np.ndarray:
        return matrix_exp(self.generator(bond, J))

    def step(self, x: np.ndarray, J_row: np.ndarray, adjoint: bool = False) -> np.ndarray:
        odd, even = self.spec.layers()
        n = self.spec.n_sites
        order = odd + even if not adjoint else even + odd
        for j in order:
            g = self.gate(j, J_row[j - 1])
            if adjoint:
                g = g.conj().T
            x = apply_two_site_superop(g, j, x, n)
        return x

    def apply_generator(self, x: np.ndarray, J: Sequence[float] | None = None) -> np.ndarray:
        """Full generator ``sum_j L_j`` applied to ``x``."""
        n = self.spec.n_sites
        J = np.ones(n - 1) if J is None else np.asarray(J)
        out = np.zeros(x.shape, dtype=complex)
        for j in range(1, n):
            out += apply_two_site_superop(self.generator(j, J[j - 1]), j, x, n)
        return out


# -- trajectories -----------------------------------------------------------


@dataclass
class Trajectory:
    steps: np.ndarray
    observables: dict[str, np.ndarray]
    states: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    converged_at: int | None = None
    final: np.ndarray | None = field(default=None, repr=False)
    max_trace_drift: float = 0.0


def iterate_circuit(
    x0: np.ndarray, spec: LindbladCircuitSpec, J: np.ndarray | None = None
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(t, x_t)`` for t = 0..n_steps under the Schrodinger-picture circuit."""
    circuit = Circuit(spec)
    J = coupling_schedule(spec) if J is None else J
    x = np.asarray(x0, dtype=complex)
    yield 0, x
    for t in range(spec.n_steps):
        x = circuit.step(x, J[t])
        yield t + 1, x


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * trace_norm(a - b)


def evolve_density(
    rho0: np.ndarray,
    spec: LindbladCircuitSpec,
    *,
    observables: Mapping[str, Callable[[np.ndarray], complex]] | None = None,
    keep: Iterable[int] = (),
    stop_on_convergence: bool = False,
    check_convergence: bool | None = None,
    validate: bool = True,
) -> Trajectory:
    """Run the circuit on a density matrix, recording observables at every step.

    Aborts with :class:`TraceDriftError` if the trace drifts by more than 1e-8.
    With convergence checking on, the step at which the successive-step trace
    distance first stays below 1e-9 for 10 consecutive steps is certified as
    ``converged_at``; ``stop_on_convergence`` ends the run there.
    """
    rho0 = np.asarray(rho0)
    if validate:
        validate_density_matrix(rho0)
    if rho0.shape[0] != spec.dim:
        raise ValueError("initial state does not match spec.n_sites")
    observables = dict(observables or {})
    keep = set(keep)
    if check_convergence is None:
        check_convergence = stop_on_convergence
    records: dict[str, list] = {k: [] for k in observables}
    steps = []
    states = {}
    prev = None
    quiet = 0
    converged_at = None
    drift = 0.0
    rho = rho0
    for t, rho in iterate_circuit(rho0, spec):
        tr_err = abs(np.trace(rho) - 1.0)
        drift = max(drift, tr_err)
        if tr_err > TRACE_DRIFT_TOL:
            raise TraceDriftError(f"trace drifted by {tr_err:.3e} at step {t}")
        steps.append(t)
        for name, fn in observables.items():
            records[name].append(fn(rho))
        if t in keep:
            states[t] = rho
        if check_convergence and prev is not None:
            if trace_distance(rho, prev) < CONVERGENCE_TOL:
                quiet += 1
                if quiet >= CONVERGENCE_STEPS and converged_at is None:
                    converged_at = t
                    if stop_on_convergence:
                        break
            else:
                quiet = 0
        prev = rho
    return Trajectory(
        steps=np.asarray(steps),
        observables={k: np.asarray(v) for k, v in records.items()},
        states=states,
        converged_at=converged_at,
        final=rho,
        max_trace_drift=drift,
    )


def evolve_operator(
    op: np.ndarray, spec: LindbladCircuitSpec, steps: Iterable[int] | None = None
) -> dict[int, np.ndarray]:
    """Heisenberg-picture operators ``O(t) = U_1^dag ... U_t^dag (O)``.

    The adjoint of a later gate acts first, so each requested time is evolved
    from scratch with the same coupling schedule as :func:`evolve_density`;
    then ``Tr(O(t) rho0) == Tr(O rho(t))``.
    """
    op = np.asarray(op)
    if not is_hermitian(op):
        raise ValueError("operator must be Hermitian")
    steps = range(spec.n_steps + 1) if steps is None else sorted(set(steps))
    circuit = Circuit(spec)
    J = coupling_schedule(spec, max(max(steps, default=0), spec.n_steps))
    out = {}
    for t in steps:
        x = np.asarray(op, dtype=complex)
        for s in range(t - 1, -1, -1):
            x = circuit.step(x, J[s], adjoint=True)
        out[t] = x
    return out


# -- stationary states ------------------------------------------------------


@dataclass
class StationaryState:
    rho: np.ndarray = field(repr=False)
    weights: list[np.ndarray]
    classical: bool

    def total_weight(self) -> float:
        return float(sum(np.trace(w).real for w in self.weights))


def _accumulate(decomposition: KrylovDecomposition, blocks: list[np.ndarray]) -> np.ndarray:
    dim = decomposition.hilbert_dim
    dtype = np.result_type(*blocks, float)
    out = np.zeros((dim, dim), dtype=dtype)
    for cls, m in zip(decomposition.classes, blocks):
        if not np.any(m):
            continue
        if cls.d == 1 and cls.copies[0].indices is not None:
            idx = cls.copies[0].indices
            out[idx, idx] += m[0, 0] / cls.D
        else:
            out += cls.assemble(m / cls.D)
    return out


def stationary_state_classical(rho0: np.ndarray, decomposition: KrylovDecomposition) -> StationaryState:
    """``sum_a c_a Pi_a / D_a`` with weights ``c_a = Tr(Pi_a rho0)``."""
    if not decomposition.is_abelian:
        raise ValueError("classical stationary state needs an Abelian decomposition")
    weights = [np.array([[cls.copies[0].trace_with(rho0)]]) for cls in decomposition.classes]
    total = sum(w[0, 0] for w in weights)
    if abs(total - 1.0) > TRACE_TOL:
        raise ValueError(f"sector weights sum to {total}, not 1")
    weights = [w.real if abs(w.imag).max() < 1e-12 else w for w in weights]
    return StationaryState(_accumulate(decomposition, weights), weights, classical=True)


def stationary_state_quantum(rho0: np.ndarray, decomposition: KrylovDecomposition) -> StationaryState:
    """``sum_lambda sum_ab (M_lambda)_ab W_a W_b^dag / D_lambda`` with ``(M)_ab = Tr(W_a^dag rho0 W_b)``."""
    weights = []
    for cls in decomposition.classes:
        m = cls.overlap_matrix(rho0)
        m = 0.5 * (m + m.conj().T)
        lo = np.linalg.eigvalsh(m).min()
        if lo < PSD_FLOOR:
            raise ValueError(
                f"overlap matrix of class {cls.class_id} has eigenvalue {lo:.3e}; bad intertwiner gauge"
            )
        if np.abs(m.imag).max(initial=0.0) < 1e-14:
            m = m.real
        weights.append(m)
    total = sum(np.trace(w).real for w in weights)
    if abs(total - 1.0) > TRACE_TOL:
        raise ValueError(f"class weights sum to {total}; initial state outside the decomposed space")
    return StationaryState(_accumulate(decomposition, weights), weights, classical=False)


def stationary_operator(op: np.ndarray, decomposition: KrylovDecomposition, mode: str = "quantum") -> np.ndarray:
    """Long-time image of an operator: its projection onto the commutant."""
    op = np.asarray(op)
    if mode == "classical":
        if not decomposition.is_abelian:
            raise ValueError("classical mode needs an Abelian decomposition")
        blocks = [np.array([[cls.copies[0].trace_with(op)]]) for cls in decomposition.classes]
    elif mode == "quantum":
        blocks = [cls.overlap_matrix(op) for cls in decomposition.classes]
    else:
        raise ValueError("mode must be 'classical' or 'quantum'")
    return _accumulate(decomposition, blocks)


def liouvillian_residual(rho: np.ndarray, spec: LindbladCircuitSpec, J: Sequence[float] | None = None) -> float:
    """max |L(rho)| for the summed generator at fixed couplings."""
    return float(np.abs(Circuit(spec).apply_generator(np.asarray(rho, dtype=complex), J)).max())


def circuit_residual(rho: np.ndarray, spec: LindbladCircuitSpec, J_row: Sequence[float] | None = None) -> float:
    """max |U(rho) - rho| for one circuit step."""
    J_row = np.ones(spec.n_sites - 1) if J_row is None else np.asarray(J_row)
    x = np.asarray(rho, dtype=complex)
    return float(np.abs(Circuit(spec).step(x, J_row) - x).max())


# -- steady-state structure -------------------------------------------------


@dataclass
class SpectralData:
    """Eigen-decomposition of the generator restricted to one block of operators.

    Columns of ``right`` and ``left`` are coordinates in an orthonormal
    operator basis of the block, so the Hilbert-Schmidt pairing is the
    ordinary inner product of coordinates.
    """

    eigenvalues: np.ndarray
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    condition: float = 1.0

    def biorthonormality_error(self) -> float:
        g = self.left.conj().T @ self.right
        return float(np.abs(g - np.eye(g.shape[0])).max(initial=0.0))

    @property
    def max_real_part(self) -> float:
        return float(self.eigenvalues.real.max(initial=-np.inf))


@dataclass
class BlockReport:
    row: tuple[int, int]
    col: tuple[int, int]
    kernel_dim: int
    expected: int
    spectral: SpectralData | None = field(default=None, repr=False)
    defective: bool = False

    @property
    def ok(self) -> bool:
        return self.kernel_dim == self.expected


@dataclass
class SteadyStructureReport:
    blocks: list[BlockReport]
    max_biorthonormality_error: float
    max_real_eigenvalue: float

    @property
    def defective(self) -> list[BlockReport]:
        return [b for b in self.blocks if b.defective]

    @property
    def ok(self) -> bool:
        return (
            all(b.ok for b in self.blocks if not b.defective)
            and self.max_biorthonormality_error <= 1e-8
            and self.max_real_eigenvalue <= 1e-9
        )


def verify_steady_structure(
    decomposition: KrylovDecomposition,
    spec: LindbladCircuitSpec,
    J: Sequence[float] | None = None,
    spectral: bool = True,
) -> SteadyStructureReport:
    """Kernel census of the fixed-J generator on every block ``W_a X W_b^dag``.

    A block between two copies of the same class must carry exactly one
    stationary element (the projector or intertwiner); a block between
    inequivalent subspaces carries none.
    """
    if spec.n_sites > 4:
        raise ValueError("steady-structure verification is limited to N <= 4")
    if decomposition.is_partial:
        raise ValueError("steady-structure verification needs a full decomposition")
    circuit = Circuit(spec)
    subs = list(decomposition.subspaces())
    bases = [s.dense_basis().astype(complex) for s in subs]
    # L(W_a E_ik W_b^dag) for all a, b computed block by block
    reports = []
    worst_bi = 0.0
    worst_re = -np.inf
    for ia, sa in enumerate(subs):
        wa = bases[ia]
        for ib, sb in enumerate(subs):
            wb = bases[ib]
            Da, Db = wa.shape[1], wb.shape[1]
            cols = np.empty((Da * Db, Da * Db), dtype=complex)
            for i in range(Da):
                for k in range(Db):
                    x = np.outer(wa[:, i], wb[:, k].conj())
                    lx = circuit.apply_generator(x, J)
                    cols[:, i * Db + k] = (wa.conj().T @ lx @ wb).reshape(-1)
            sv = np.linalg.svd(cols, compute_uv=False)
            tol = 1e-9 * max(1.0, float(sv.max(initial=0.0)))
            kernel = int(np.sum(sv <= tol))
            expected = int(sa.class_id == sb.class_id)
            data = None
            defective = False
            if spectral:
                evals, right = np.linalg.eig(cols)
                cond = float(np.linalg.cond(right))
                defective = cond > 1e12
                if not defective:
                    left = np.linalg.inv(right).conj().T
                    data = SpectralData(evals, right, left, cond)
                    worst_bi = max(worst_bi, data.biorthonormality_error())
                worst_re = max(worst_re, float(evals.real.max()))
                if evals.real.max() > 1e-9:
                    log.warning("block (%d,%d) has eigenvalue with positive real part", ia, ib)
            if defective:
                log.info("block (%s,%s) is not diagonalizable within tolerance", ia, ib)
            reports.append(
                BlockReport(
                    row=(sa.class_id, sa.copy),
                    col=(sb.class_id, sb.copy),
                    kernel_dim=kernel,
                    expected=expected,
                    spectral=data,
                    defective=defective,
                )
            )
    return SteadyStructureReport(reports, worst_bi, worst_re)
