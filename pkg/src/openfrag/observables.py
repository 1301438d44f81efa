"""Autocorrelators, Mazur bounds, negativity and operator-space entanglement."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .dynamics import LindbladCircuitSpec, coupling_schedule, iterate_circuit
from .fragmentation import (
    DotPattern,
    KrylovDecomposition,
    enumerate_pf_krylov,
    krylov_decompose_numerical,
    pattern_table,
)
from .hilbert import LOCAL_DIM, apply_local, is_hermitian, matrix_exp, n_sites_of, partial_transpose, trace_norm
from .models import tl_terms

NEGATIVITY_CLAMP = 1e-9
SCHMIDT_DRIFT_TOL = 1e-8
CONDITION_LIMIT = 1e12


# -- autocorrelation --------------------------------------------------------


@dataclass
class CorrelatorSeries:
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None
    mode: str = "open_heisenberg"

    def window_mean(self, start: int, stop: int | None = None) -> float:
        """Mean of the values at times ``start <= t <= stop``."""
        stop = self.times.max() if stop is None else stop
        sel = (self.times >= start) & (self.times <= stop)
        if not sel.any():
            raise ValueError("empty averaging window")
        return float(self.values[sel].mean())

    def tail_mean(self, count: int = 100) -> float:
        return float(self.values[-count:].mean())


def _traceless(op: np.ndarray) -> np.ndarray:
    op = np.asarray(op)
    if not is_hermitian(op):
        raise ValueError("observable must be Hermitian")
    dim = op.shape[0]
    tr = np.trace(op)
    if abs(tr) > 1e-12 * dim:
        op = op - (tr / dim) * np.eye(dim)
    return op


def _closed_step(psi: np.ndarray, spec: LindbladCircuitSpec, J_row: np.ndarray, u_cache: Callable) -> np.ndarray:
    odd, even = spec.layers()
    for j in odd + even:
        psi = apply_local(u_cache(J_row[j - 1]), j, spec.n_sites, psi)
    return psi


def autocorrelation(
    op: np.ndarray,
    mode: str,
    spec: LindbladCircuitSpec,
    n_samples: int = 20,
    rng: np.random.Generator | int | None = None,
) -> CorrelatorSeries:
    """Infinite-temperature autocorrelation ``Tr(O(t) O) / 3**N`` for t = 0..n_steps.

    ``open_heisenberg`` is exact: by adjointness ``Tr(O(t) O) = Tr(O U(t)(O))``
    with ``U(t)`` the Schrodinger-picture circuit, so ``O`` is evolved forward
    once. ``closed_typicality`` runs the unitary circuit (no noise) on
    ``n_samples`` Haar-random states and averages ``<psi| O(t) O |psi>``.
    """
    op = _traceless(op)
    dim = op.shape[0]
    if mode == "open_heisenberg":
        vals = [np.vdot(op, x).real / dim for _, x in iterate_circuit(op, spec)]
        return CorrelatorSeries(np.arange(len(vals)), np.asarray(vals), None, mode)
    if mode != "closed_typicality":
        raise ValueError("mode must be 'open_heisenberg' or 'closed_typicality'")
    if n_samples <= 0:
        raise ValueError("typicality needs at least one sample")
    rng = np.random.default_rng(rng)
    h = spec.bond_hamiltonian()
    J = coupling_schedule(spec)
    u_cache = lambda c: matrix_exp(-1j * c * h)  # noqa: E731
    samples = np.empty((n_samples, spec.n_steps + 1))
    for s in range(n_samples):
        psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        psi /= np.linalg.norm(psi)
        a, b = psi, op @ psi
        samples[s, 0] = np.vdot(a, op @ b).real
        for t in range(spec.n_steps):
            a = _closed_step(a, spec, J[t], u_cache)
            b = _closed_step(b, spec, J[t], u_cache)
            samples[s, t + 1] = np.vdot(a, op @ b).real
    err = samples.std(axis=0, ddof=1) / np.sqrt(n_samples) if n_samples > 1 else None
    return CorrelatorSeries(np.arange(spec.n_steps + 1), samples.mean(axis=0), err, mode)


# -- Mazur bounds -----------------------------------------------------------


def mazur_bound_pf(op: np.ndarray, decomposition: KrylovDecomposition) -> float:
    """``3**-N sum_a Tr(Pi_a O)**2 / D_a``; ``op`` may be the diagonal of a diagonal operator."""
    if not decomposition.is_abelian:
        raise ValueError("expected an Abelian decomposition")
    total = 0.0
    for cls in decomposition.classes:
        total += abs(cls.copies[0].trace_with(op)) ** 2 / cls.D
    return float(total / decomposition.hilbert_dim)


def mazur_bound_tl(op: np.ndarray, decomposition: KrylovDecomposition) -> float:
    """``3**-N sum_lambda sum_ab |Tr(Pi_ab O)|**2 / D_lambda`` (gauge invariant)."""
    total = 0.0
    for cls in decomposition.classes:
        total += float((np.abs(cls.overlap_matrix(op)) ** 2).sum()) / cls.D
    return float(total / decomposition.hilbert_dim)


def mazur_bound_tl_diagonal(
    diagonals: Sequence[np.ndarray], n_sites: int, rng: np.random.Generator | int | None = 0
) -> np.ndarray:
    """TL bounds of diagonal operators, decomposing one pair-flip sector at a time.

    TL terms keep every pair-flip sector invariant, and an intertwiner between
    copies in different sectors has zero overlap with a diagonal operator, so
    the full bound is the sum of the sector-restricted ones. This avoids the
    full-space decomposition and reaches N = 8.
    """
    diags = np.atleast_2d(np.asarray(diagonals, dtype=float))
    if diags.shape[1] != LOCAL_DIM**n_sites:
        raise ValueError("each diagonal must have 3**N entries")
    rng = np.random.default_rng(rng)
    pf, _ = enumerate_pf_krylov(n_sites, with_generators=False)
    terms = tl_terms(n_sites)
    out = np.zeros(diags.shape[0])
    for sector in pf.subspaces():
        if sector.dim == 1:
            # a single configuration is its own class
            out += diags[:, sector.indices[0]] ** 2 / pf.hilbert_dim
            continue
        part = krylov_decompose_numerical(terms, n_sites, rng, support=sector.dense_basis())
        out += [mazur_bound_tl(d, part) for d in diags]
    return out


def mazur_bound_general(op: np.ndarray, conserved: Sequence[np.ndarray]) -> float:
    """``sum_mn <A Q_m> (K^-1)_mn <Q_n^dag A>`` with ``K_mn = <Q_m^dag Q_n>`` and ``<X> = Tr X / dim``."""
    op = np.asarray(op)
    dim = op.shape[0]
    if not conserved:
        return 0.0
    q = np.stack([np.asarray(x).reshape(-1) for x in conserved])  # rows vec(Q_m)
    k = (q.conj() @ q.T) / dim
    cond = np.linalg.cond(k)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise ValueError(f"conserved set is linearly dependent (condition number {cond:.2e})")
    b = (q.conj() @ op.reshape(-1)) / dim  # <Q_m^dag A>
    val = np.vdot(b, np.linalg.solve(k, b))
    return float(val.real)


# -- entanglement -----------------------------------------------------------


def log_negativity(rho: np.ndarray, cut: int) -> float:
    """Natural-log negativity across the bond after site ``cut``."""
    val = float(np.log(trace_norm(partial_transpose(rho, cut))))
    if -NEGATIVITY_CLAMP < val < 0.0:
        return 0.0
    return val


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


@dataclass
class EntanglementRecord:
    cut: int
    negativity: float | None
    S_OP: float
    S_num: float
    S_res: float
    split_exact: bool
    probabilities: dict = field(default_factory=dict, repr=False)

    @property
    def split_error(self) -> float:
        return abs(self.S_OP - self.S_num - self.S_res)


def _left_words(cut: int) -> tuple[np.ndarray, np.ndarray]:
    """Ket and bra word indices of every interleaved left doubled-space index."""
    digits = np.indices((LOCAL_DIM,) * (2 * cut)).reshape(2 * cut, -1)
    ket = np.zeros(digits.shape[1], dtype=np.int64)
    bra = np.zeros(digits.shape[1], dtype=np.int64)
    for s in range(cut):
        ket = ket * LOCAL_DIM + digits[2 * s]
        bra = bra * LOCAL_DIM + digits[2 * s + 1]
    return ket, bra


def operator_entanglement(
    rho: np.ndarray,
    cut: int,
    classifier: Callable[[int], object] | None = None,
    with_negativity: bool = True,
) -> EntanglementRecord:
    """Operator-space entanglement of ``rho`` across the bond after site ``cut``.

    The vectorized operator (ket and bra interleaved per site) is Schmidt
    decomposed across the spatial cut. Left doubled-space basis states are
    grouped by the pair (label of the ket word, label of the bra word), where
    ``classifier`` maps a left product-word index to a label (default: its dot
    pattern). ``S_num`` is the entropy of the block weights and ``S_res`` the
    weighted entropy within blocks; they add up to ``S_OP`` whenever the left
    reduced matrix is block diagonal (``split_exact``).
    """
    rho = np.asarray(rho)
    n = n_sites_of(rho.shape[0])
    if not 1 <= cut < n:
        raise ValueError(f"cut {cut} must lie inside a chain of {n} sites")
    t = rho.reshape((LOCAL_DIM,) * (2 * n))
    order = [ax for s in range(n) for ax in (s, n + s)]
    psi = t.transpose(order).reshape(LOCAL_DIM ** (2 * cut), -1)
    norm2 = float(np.vdot(psi, psi).real)
    if norm2 == 0:
        raise ValueError("zero operator has no operator entanglement")
    psi = psi / np.sqrt(norm2)
    sv = np.linalg.svd(psi, compute_uv=False)
    p = sv**2
    if abs(p.sum() - 1.0) > SCHMIDT_DRIFT_TOL:
        raise RuntimeError(f"Schmidt weights sum to {p.sum()}")
    s_op = _entropy(p)

    if classifier is None:
        table, patterns = pattern_table(cut)
        classifier = lambda w: patterns[table[w]]  # noqa: E731
    ket, bra = _left_words(cut)
    word_labels = [classifier(w) for w in range(LOCAL_DIM**cut)]
    keys: dict[tuple, int] = {}
    block = np.array([keys.setdefault((word_labels[k], word_labels[b]), len(keys)) for k, b in zip(ket, bra)])
    weights = np.zeros(len(keys))
    row_w = np.einsum("ij,ij->i", psi.conj(), psi).real
    np.add.at(weights, block, row_w)
    s_num = _entropy(weights)
    s_res = 0.0
    for b, w in enumerate(weights):
        if w <= 1e-15:
            continue
        rows = psi[block == b]
        sub = np.linalg.svd(rows / np.sqrt(w), compute_uv=False) ** 2
        s_res += w * _entropy(sub)
    # block-diagonality of the left reduced matrix, on its nonzero rows
    live = row_w > 1e-30
    red = psi[live] @ psi[live].conj().T
    bl = block[live]
    off = np.abs(red[bl[:, None] != bl[None, :]])
    exact = bool(off.max(initial=0.0) <= 1e-10)
    labels = {k: float(weights[v]) for k, v in keys.items() if weights[v] > 0}
    neg = log_negativity(rho, cut) if with_negativity else None
    return EntanglementRecord(cut, neg, s_op, s_num, float(s_res), exact, labels)


def pattern_classifier(cut: int) -> Callable[[int], DotPattern]:
    table, patterns = pattern_table(cut)
    return lambda w: patterns[table[w]]
