"""Krylov decompositions of bond algebras.

Two builders produce the same :class:`KrylovDecomposition` type:

* :func:`enumerate_pf_krylov` groups product configurations by dot pattern
  (pair-flip model; every sector is spanned by product states).
* :func:`krylov_decompose_numerical` finds the minimal invariant subspaces of
  an arbitrary set of Hermitian local generators, groups equivalent copies and
  aligns their bases so that intertwiners ``W_a W_b^dagger`` commute with the
  algebra.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import struct
from collections import deque
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hilbert import LOCAL_DIM, apply_local, is_hermitian
from .models import COLORS, LocalTerm, color_index

log = logging.getLogger(__name__)

GAP_TOL = 1e-6
DEGENERACY_TOL = 1e-8
ORBIT_TOL = 1e-9
INVARIANCE_TOL = 1e-8
MAX_RETRIES = 5

SIDECAR_MAGIC = b"FRAG"
SIDECAR_VERSION = 1


class SpectralAmbiguityError(RuntimeError):
    """Random element of the algebra was not generic enough to separate sectors."""


# -- dot patterns -----------------------------------------------------------


class DotPattern(tuple):
    """Reduced word of unpaired colors (no two equal neighbours)."""

    def __new__(cls, colors: Iterable = ()):
        idx = tuple(color_index(c) for c in colors)
        for a, b in zip(idx, idx[1:]):
            if a == b:
                raise ValueError("a dot pattern cannot contain equal neighbours")
        return super().__new__(cls, idx)

    def __str__(self) -> str:
        return "".join(COLORS[i] for i in self)

    def __repr__(self) -> str:
        return f"DotPattern({str(self)!r})"

    def reversed(self) -> "DotPattern":
        return DotPattern(self[::-1])


def reduce_to_dot_pattern(config: Iterable) -> DotPattern:
    """Cancel adjacent equal colors until none remain (stack reduction)."""
    stack: list[int] = []
    for c in config:
        c = color_index(c)
        if stack and stack[-1] == c:
            stack.pop()
        else:
            stack.append(c)
    return DotPattern(stack)


def configurations(n_sites: int) -> np.ndarray:
    """All product configurations as an int8 array in base-3 basis order."""
    idx = np.arange(LOCAL_DIM**n_sites)
    out = np.empty((idx.size, n_sites), dtype=np.int8)
    for s in range(n_sites - 1, -1, -1):
        out[:, s] = idx % LOCAL_DIM
        idx //= LOCAL_DIM
    return out


def config_index(config: Sequence) -> int:
    pos = 0
    for c in config:
        pos = pos * LOCAL_DIM + color_index(c)
    return pos


def pattern_table(length: int) -> tuple[np.ndarray, list[DotPattern]]:
    """Pattern id of every word of the given length, and the id -> pattern list."""
    ids: dict[DotPattern, int] = {}
    table = np.empty(LOCAL_DIM**length, dtype=np.int64)
    for i, word in enumerate(itertools.product(range(LOCAL_DIM), repeat=length)):
        p = reduce_to_dot_pattern(word)
        table[i] = ids.setdefault(p, len(ids))
    patterns = [None] * len(ids)
    for p, i in ids.items():
        patterns[i] = p
    return table, patterns


# -- decomposition containers ----------------------------------------------


@dataclass
class KrylovSubspace:
    """One Krylov subspace, stored either as product-basis indices or dense columns."""

    class_id: int
    copy: int
    hilbert_dim: int
    basis: np.ndarray | None = field(default=None, repr=False)
    indices: np.ndarray | None = field(default=None, repr=False)
    label: str = ""
    seed_index: int = 0

    @property
    def dim(self) -> int:
        return len(self.indices) if self.indices is not None else self.basis.shape[1]

    def dense_basis(self) -> np.ndarray:
        if self.basis is not None:
            return self.basis
        b = np.zeros((self.hilbert_dim, self.dim))
        b[self.indices, np.arange(self.dim)] = 1.0
        return b

    def projector(self) -> np.ndarray:
        if self.indices is not None:
            p = np.zeros((self.hilbert_dim, self.hilbert_dim))
            p[self.indices, self.indices] = 1.0
            return p
        b = self.basis
        return b @ b.conj().T

    def trace_with(self, op: np.ndarray) -> complex:
        """Tr(P op); ``op`` may be a dense matrix or the diagonal of a diagonal operator."""
        op = np.asarray(op)
        if op.ndim == 1:
            if self.indices is not None:
                return op[self.indices].sum()
            return np.einsum("ik,i,ik->", self.basis.conj(), op, self.basis)
        if self.indices is not None:
            return op[self.indices, self.indices].sum()
        return np.trace(self.basis.conj().T @ op @ self.basis)


@dataclass
class KrylovClass:
    """``d`` equivalent copies of a ``D``-dimensional Krylov subspace."""

    class_id: int
    copies: list[KrylovSubspace]
    spectrum: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def d(self) -> int:
        return len(self.copies)

    @property
    def D(self) -> int:
        return self.copies[0].dim

    def stacked_basis(self) -> np.ndarray:
        return np.hstack([c.dense_basis() for c in self.copies])

    def overlap_matrix(self, op: np.ndarray) -> np.ndarray:
        """``T[a, b] = Tr(W_a^dagger op W_b) = Tr(Pi_{ba} op)``."""
        op = np.asarray(op)
        d, D = self.d, self.D
        if d == 1:
            return np.array([[self.copies[0].trace_with(op)]])
        w = self.stacked_basis()
        y = w.conj().T @ (op[:, None] * w if op.ndim == 1 else op @ w)
        return y.reshape(d, D, d, D).trace(axis1=1, axis2=3)

    def assemble(self, weights: np.ndarray) -> np.ndarray:
        """``sum_ab weights[a, b] W_a W_b^dagger``."""
        d, D = self.d, self.D
        if d == 1 and self.copies[0].indices is not None:
            c = self.copies[0]
            out = np.zeros((c.hilbert_dim, c.hilbert_dim), dtype=np.result_type(weights, float))
            out[c.indices, c.indices] = weights[0, 0]
            return out
        w = self.stacked_basis()
        return w @ np.kron(weights, np.eye(D)) @ w.conj().T


@dataclass(frozen=True)
class FragmentationStats:
    K: int
    D_max: int
    exponent: float | None = None


@dataclass
class KrylovDecomposition:
    n_sites: int
    model: str
    classes: list[KrylovClass]
    generators: list[LocalTerm] = field(default_factory=list, repr=False)
    support: np.ndarray | None = field(default=None, repr=False)
    seed: int | None = None

    @property
    def hilbert_dim(self) -> int:
        return LOCAL_DIM**self.n_sites

    @property
    def is_partial(self) -> bool:
        return self.support is not None

    @property
    def is_abelian(self) -> bool:
        return all(c.d == 1 for c in self.classes)

    @property
    def K(self) -> int:
        return sum(c.d for c in self.classes)

    @property
    def D_max(self) -> int:
        return max(c.D for c in self.classes)

    @property
    def commutant_dim(self) -> int:
        return sum(c.d**2 for c in self.classes)

    @property
    def covered_dim(self) -> int:
        return sum(c.d * c.D for c in self.classes)

    def subspaces(self) -> Iterator[KrylovSubspace]:
        for c in self.classes:
            yield from c.copies

    def projector(self, class_id: int, copy: int = 0) -> np.ndarray:
        return self.classes[class_id].copies[copy].projector()

    def intertwiner(self, class_id: int, a: int, b: int) -> np.ndarray:
        cls = self.classes[class_id]
        return cls.copies[a].dense_basis() @ cls.copies[b].dense_basis().conj().T

    def commutant_basis(self) -> Iterator[tuple[int, int, int, np.ndarray]]:
        """All projectors and intertwiners ``(class, a, b, Pi_ab)``."""
        for cls in self.classes:
            for a in range(cls.d):
                for b in range(cls.d):
                    yield cls.class_id, a, b, self.intertwiner(cls.class_id, a, b)

    def stats(self) -> FragmentationStats:
        return FragmentationStats(K=self.K, D_max=self.D_max)

    # -- checks --------------------------------------------------------

    def resolution_error(self) -> float:
        total = sum(p.projector() for p in self.subspaces())
        target = np.eye(self.hilbert_dim)
        if self.support is not None:
            target = self.support @ self.support.conj().T
        return float(np.abs(total - target).max())

    def orthogonality_error(self) -> float:
        subs = list(self.subspaces())
        worst = 0.0
        bases = [s.dense_basis() for s in subs]
        for i, bi in enumerate(bases):
            for bj in bases[i + 1 :]:
                worst = max(worst, float(np.abs(bi.conj().T @ bj).max(initial=0.0)))
            worst = max(worst, float(np.abs(bi.conj().T @ bi - np.eye(bi.shape[1])).max()))
        return worst

    def commutation_error(self, terms: Sequence[LocalTerm] | None = None) -> float:
        """Worst violation of ``[Pi_ab, g] = 0`` over classes and generators.

        For Hermitian ``g`` every ``Pi_ab`` of a class commutes with ``g`` exactly
        when ``g W_a = W_a R`` with one matrix ``R`` shared by all copies, so
        the check is done per class rather than per commutant element.
        """
        terms = self.generators if terms is None else terms
        worst = 0.0
        for cls in self.classes:
            w = cls.stacked_basis()
            eye = np.eye(cls.d)
            for t in terms:
                gw = apply_local(t.matrix, t.site, self.n_sites, w)
                g = w.conj().T @ gw
                leak = np.abs(gw - w @ g).max(initial=0.0)
                shared = np.kron(eye, g[: cls.D, : cls.D])
                worst = max(worst, float(leak), float(np.abs(g - shared).max(initial=0.0)))
        return worst

    def intertwiner_error(self) -> float:
        worst = 0.0
        for cls in self.classes:
            for a in range(cls.d):
                pa = self.projector(cls.class_id, a)
                for b in range(cls.d):
                    x = self.intertwiner(cls.class_id, a, b)
                    pb = self.projector(cls.class_id, b)
                    worst = max(
                        worst,
                        float(np.abs(x @ x.conj().T - pa).max()),
                        float(np.abs(x.conj().T @ x - pb).max()),
                    )
        return worst

    # -- export --------------------------------------------------------

    def manifest(self) -> dict:
        return {
            "N": self.n_sites,
            "model": self.model,
            "classes": [
                {
                    "lambda_id": c.class_id,
                    "D": c.D,
                    "d": c.d,
                    "subspace_dims": [s.dim for s in c.copies],
                    "labels": [s.label for s in c.copies],
                }
                for c in self.classes
            ],
            "commutant_dim": self.commutant_dim,
            "K": self.K,
            "D_max": self.D_max,
            "partial": self.is_partial,
        }

    def stacked_bases(self) -> np.ndarray:
        return np.hstack([s.dense_basis() for s in self.subspaces()]).astype(np.complex128)

    def content_hash(self) -> str:
        """Git-style blob hash of the manifest and subspace contents."""
        h = hashlib.sha1()
        payload = [json.dumps(self.manifest(), sort_keys=True).encode()]
        for s in self.subspaces():
            if s.indices is not None:
                payload.append(np.asarray(s.indices, dtype="<i8").tobytes())
            else:
                payload.append(np.ascontiguousarray(s.basis, dtype="<c16").tobytes())
        blob = b"".join(payload)
        h.update(b"blob %d\0" % len(blob))
        h.update(blob)
        return h.hexdigest()

    def export(self, stem: str | Path, write_bases: bool = True, max_entries: int = 2**26) -> dict:
        """Write ``<stem>.json`` and, when small enough, the ``<stem>.bin`` basis sidecar."""
        stem = Path(stem)
        man = self.manifest()
        man["content_hash"] = self.content_hash()
        bases_file = None
        cols = self.covered_dim
        if write_bases and self.hilbert_dim * cols <= max_entries:
            bases_file = stem.with_suffix(".bin")
            write_sidecar(bases_file, self.stacked_bases())
        man["bases_file"] = bases_file.name if bases_file else None
        stem.with_suffix(".json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
        return man


def write_sidecar(path: str | Path, matrix: np.ndarray) -> None:
    m = np.ascontiguousarray(matrix, dtype="<c16")
    rows, cols = m.shape
    with open(path, "wb") as f:
        f.write(SIDECAR_MAGIC + struct.pack("<III", SIDECAR_VERSION, rows, cols))
        f.write(m.tobytes())


def read_sidecar(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != SIDECAR_MAGIC:
        raise ValueError("not a FRAG sidecar")
    version, rows, cols = struct.unpack("<III", raw[4:16])
    if version != SIDECAR_VERSION:
        raise ValueError(f"unsupported sidecar version {version}")
    data = np.frombuffer(raw[16:], dtype="<c16")
    if data.size != rows * cols:
        raise ValueError("sidecar payload size does not match header")
    return data.reshape(rows, cols).copy()


# -- pair-flip enumeration --------------------------------------------------


def pf_generators(n_sites: int) -> list[LocalTerm]:
    """Real generators of the pair-flip bond algebra."""
    terms = []
    for j in range(1, n_sites):
        for a in range(LOCAL_DIM):
            for b in range(a, LOCAL_DIM):
                m = np.zeros((LOCAL_DIM**2, LOCAL_DIM**2))
                ia, ib = a * LOCAL_DIM + a, b * LOCAL_DIM + b
                m[ia, ib] = m[ib, ia] = 1.0
                terms.append(LocalTerm(j, 2, m))
    for j in range(1, n_sites + 1):
        for a in range(LOCAL_DIM):
            m = np.zeros((LOCAL_DIM, LOCAL_DIM))
            m[a, a] = 1.0
            terms.append(LocalTerm(j, 1, m))
    return terms


def enumerate_pf_krylov(n_sites: int, with_generators: bool = True) -> tuple[KrylovDecomposition, FragmentationStats]:
    """Group every configuration by dot pattern; each group is one Krylov subspace."""
    if n_sites % 2:
        raise ValueError("pair-flip enumeration needs an even number of sites")
    configs = configurations(n_sites)
    groups: dict[DotPattern, list[int]] = {}
    for i, w in enumerate(configs):
        groups.setdefault(reduce_to_dot_pattern(w), []).append(i)
    dim = LOCAL_DIM**n_sites
    items = sorted(groups.items(), key=lambda kv: (len(kv[1]), kv[1][0]))
    classes = []
    for cid, (pattern, idx) in enumerate(items):
        sub = KrylovSubspace(
            class_id=cid,
            copy=0,
            hilbert_dim=dim,
            indices=np.asarray(idx, dtype=np.int64),
            label=str(pattern),
            seed_index=idx[0],
        )
        classes.append(KrylovClass(cid, [sub]))
    dec = KrylovDecomposition(
        n_sites=n_sites,
        model="pair_flip",
        classes=classes,
        generators=pf_generators(n_sites) if with_generators else [],
    )
    return dec, dec.stats()


def fit_fragmentation_exponent(ns: Sequence[int], d_max: Sequence[int]) -> float:
    """Least-squares ``a`` in ``D_max / 3**N ~ exp(-a N)``."""
    ns = np.asarray(ns, dtype=float)
    y = np.log(np.asarray(d_max, dtype=float)) - ns * np.log(LOCAL_DIM)
    slope, _ = np.polyfit(ns, y, 1)
    return float(-slope)


# -- numerical decomposition ------------------------------------------------


class _Workspace:
    """Generators acting on the full space or on an invariant subspace."""

    def __init__(self, terms: Sequence[LocalTerm], n_sites: int, support: np.ndarray | None):
        self.terms = list(terms)
        self.n_sites = n_sites
        self.support = support
        real = all(np.isrealobj(t.matrix) for t in self.terms)
        if support is not None:
            real = real and np.isrealobj(support)
        self.dtype = np.float64 if real else np.complex128
        full = LOCAL_DIM**n_sites
        if support is None:
            self.dim = full
            self.mats = None
            if full <= 3**7:
                eye = np.eye(full, dtype=self.dtype)
                self.mats = [apply_local(t.matrix, t.site, n_sites, eye) for t in self.terms]
        else:
            q = np.asarray(support, dtype=self.dtype)
            if np.abs(q.conj().T @ q - np.eye(q.shape[1])).max() > 1e-10:
                raise ValueError("support basis is not orthonormal")
            self.dim = q.shape[1]
            self.mats = []
            for t in self.terms:
                gq = apply_local(t.matrix, t.site, n_sites, q)
                g = q.conj().T @ gq
                if np.abs(gq - q @ g).max() > INVARIANCE_TOL:
                    raise ValueError("support is not invariant under the generators")
                self.mats.append(g)

    def apply(self, k: int, x: np.ndarray) -> np.ndarray:
        if self.mats is not None:
            return self.mats[k] @ x
        t = self.terms[k]
        return apply_local(t.matrix, t.site, self.n_sites, x)

    def combination(self, coeffs: np.ndarray) -> np.ndarray:
        if self.mats is not None:
            return sum(c * m for c, m in zip(coeffs, self.mats))
        eye = np.eye(self.dim, dtype=self.dtype)
        out = np.zeros((self.dim, self.dim), dtype=self.dtype)
        for k, c in enumerate(coeffs):
            out += c * self.apply(k, eye)
        return out


def _spectral_orbit(
    ws: _Workspace,
    seed: np.ndarray,
    seed_cluster: int,
    evecs: np.ndarray,
    bounds: Sequence[int],
    tol: float = ORBIT_TOL,
) -> dict[int, np.ndarray]:
    """Smallest generator-invariant subspace containing ``seed``.

    The seed is an eigenvector of a generic element ``h``. An ``h``-invariant
    subspace meets each degenerate eigenspace of ``h`` in at most one
    direction, so the orbit is grown one direction per eigenspace: generator
    images are projected onto every eigenspace and only the dominant singular
    vector of each projection is kept. This stops rounding noise from being
    mistaken for new directions. Returns ``{cluster: unit vector}``.
    """
    vecs = {seed_cluster: seed}
    n_clusters = len(bounds) - 1
    while True:
        b = np.column_stack(list(vecs.values()))
        x = np.hstack([ws.apply(k, b) for k in range(len(ws.terms))] + [b])
        coeffs = evecs.conj().T @ x
        ref = float(np.abs(coeffs).max())
        new = {}
        for t in range(n_clusters):
            ct = coeffs[bounds[t] : bounds[t + 1]]
            if np.abs(ct).max(initial=0.0) <= tol * ref:
                continue
            u, sv, _ = np.linalg.svd(ct, full_matrices=False)
            if len(sv) > 1 and sv[1] > 1e-6 * sv[0]:
                raise SpectralAmbiguityError("orbit meets a degenerate eigenspace twice; re-seed")
            new[t] = evecs[:, bounds[t] : bounds[t + 1]] @ u[:, 0]
        if new.keys() == vecs.keys():
            return new
        vecs = new


def _align_phases(a_ref: np.ndarray, a_copy: np.ndarray, thresh: float) -> np.ndarray:
    """Diagonal phases z with conj(z_i) a_copy[i,k] z_k == a_ref[i,k]."""
    D = a_ref.shape[0]
    z = np.zeros(D, dtype=complex)
    z[0] = 1.0
    done = np.zeros(D, dtype=bool)
    done[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for k in np.flatnonzero(~done):
            if abs(a_ref[i, k]) > thresh:
                if abs(abs(a_copy[i, k]) - abs(a_ref[i, k])) > 1e-6 * max(1.0, abs(a_ref[i, k])):
                    raise SpectralAmbiguityError("copies are not equivalent representations")
                ratio = a_ref[i, k] / a_copy[i, k]
                z[k] = z[i] * ratio / abs(ratio)
                done[k] = True
                queue.append(k)
    if not done.all():
        raise SpectralAmbiguityError("random element does not connect the subspace basis")
    return z


def _decompose_once(ws: _Workspace, rng: np.random.Generator) -> list[KrylovClass]:
    nterm = len(ws.terms)
    c1 = rng.standard_normal(nterm)
    c2 = rng.standard_normal(nterm)
    h1 = ws.combination(c1)
    h2 = ws.combination(c2)
    evals, evecs = np.linalg.eigh(h1)
    scale = max(1.0, float(np.abs(evals).max()))
    scale2 = max(1.0, float(np.abs(h2).max()) * ws.dim)
    gap_tol = GAP_TOL * scale
    deg_tol = DEGENERACY_TOL * scale

    # clusters of (numerically) degenerate eigenvalues
    cluster_of = np.zeros(len(evals), dtype=np.int64)
    starts = [0]
    for i in range(1, len(evals)):
        if evals[i] - evals[i - 1] > deg_tol:
            starts.append(i)
        cluster_of[i] = len(starts) - 1
    bounds = starts + [len(evals)]
    n_clusters = len(starts)
    mult = np.diff(bounds)
    covered = np.zeros(n_clusters, dtype=np.int64)
    residual: dict[int, np.ndarray] = {}

    found: list[tuple[np.ndarray, np.ndarray, int]] = []  # (basis, spectrum, seed index)
    for c in range(n_clusters):
        while covered[c] < mult[c]:
            r = residual.get(c)
            if r is None:
                r = evecs[:, bounds[c] : bounds[c + 1]].copy()
                residual[c] = r
            norms = np.linalg.norm(r, axis=0)
            pick = int(np.argmax(norms))
            if norms[pick] < 0.1:
                raise SpectralAmbiguityError("degenerate eigenspace exhausted before coverage")
            seed = r[:, pick] / norms[pick]
            vecs = _spectral_orbit(ws, seed, c, evecs, bounds)
            touched = np.array(sorted(vecs))
            basis = np.column_stack([vecs[t] for t in touched])
            e = np.real(np.einsum("ik,ij,jk->k", basis.conj(), h1, basis))
            if len(e) > 1 and np.diff(e).min() < gap_tol:
                raise SpectralAmbiguityError(
                    f"restricted spectrum has a gap below {gap_tol:.2e}; re-seed"
                )
            np.add.at(covered, touched, 1)
            if np.any(covered > mult):
                raise SpectralAmbiguityError("orbit mixes inequivalent sectors; re-seed")
            for t in touched:
                rt = residual.get(t)
                if rt is None:
                    rt = evecs[:, bounds[t] : bounds[t + 1]].copy()
                for _ in range(2):
                    rt = rt - basis @ (basis.conj().T @ rt)
                residual[t] = rt
            found.append((basis, e, bounds[c] + pick))

    if sum(b.shape[1] for b, _, _ in found) != ws.dim:
        raise SpectralAmbiguityError("subspaces do not cover the space")

    for basis, _, _ in found:
        for k in range(nterm):
            gb = ws.apply(k, basis)
            if np.abs(gb - basis @ (basis.conj().T @ gb)).max() > INVARIANCE_TOL:
                raise SpectralAmbiguityError("orbit is not invariant within tolerance")

    # group equivalent copies: matching restricted spectra of two random elements
    sig2 = [np.linalg.eigvalsh(b.conj().T @ h2 @ b) for b, _, _ in found]
    groups: list[list[int]] = []
    for i, (b, e, _) in enumerate(found):
        for g in groups:
            j = g[0]
            bj, ej, _ = found[j]
            if (
                bj.shape[1] == b.shape[1]
                and np.abs(ej - e).max() <= gap_tol
                and np.abs(sig2[j] - sig2[i]).max() <= GAP_TOL * scale2
            ):
                g.append(i)
                break
        else:
            groups.append([i])

    groups.sort(key=lambda g: (found[g[0]][0].shape[1], tuple(found[g[0]][1])))
    classes = []
    for cid, g in enumerate(groups):
        g = sorted(g, key=lambda i: found[i][2])
        ref = found[g[0]][0]
        a_ref = ref.conj().T @ h2 @ ref
        thresh = 1e-6 * max(1.0, float(np.abs(a_ref).max()))
        ref_blocks = [ref.conj().T @ ws.apply(k, ref) for k in range(nterm)]
        copies = []
        for a, i in enumerate(g):
            b = found[i][0]
            if a > 0:
                z = _align_phases(a_ref, b.conj().T @ h2 @ b, thresh)
                z = np.real_if_close(z, tol=1000)
                b = b * z
                for k in range(nterm):
                    if np.abs(b.conj().T @ ws.apply(k, b) - ref_blocks[k]).max() > INVARIANCE_TOL:
                        raise SpectralAmbiguityError("intertwiner does not commute with the algebra")
            copies.append((b, found[i][2]))
        classes.append((cid, copies, found[g[0]][1]))
    return classes


def _as_terms(terms: Iterable) -> list[LocalTerm]:
    out = []
    for t in terms:
        if isinstance(t, LocalTerm):
            out.append(t)
            continue
        site, m = t
        m = np.asarray(m)
        if not is_hermitian(m, tol=1e-12):
            raise ValueError(f"generator at site {site} is not Hermitian")
        width = {LOCAL_DIM: 1, LOCAL_DIM**2: 2}.get(m.shape[0])
        if width is None:
            raise ValueError("generators must act on one or two sites")
        out.append(LocalTerm(site, width, m))
    return out


def krylov_decompose_numerical(
    generators: Iterable,
    n_sites: int,
    rng: np.random.Generator | int | None = None,
    *,
    support: np.ndarray | None = None,
    model: str = "numerical",
    retries: int = MAX_RETRIES,
) -> KrylovDecomposition:
    """Minimal invariant subspaces of the algebra generated by Hermitian local terms.

    A random element of the algebra is diagonalized; eigenvectors not yet
    covered seed orbit closures under the generators. Subspaces with equal
    restricted spectra (for two independent random elements) form one class;
    their bases are ordered by eigenvalue and phase-aligned through matrix
    elements of the second element, so ``Pi_ab = W_a W_b^dagger`` commutes with
    every generator.

    ``support`` restricts the decomposition to an invariant subspace given by
    orthonormal columns; the result then covers only that subspace.
    """
    terms = _as_terms(generators)
    if not terms:
        terms = [LocalTerm(1, 1, np.eye(LOCAL_DIM))]
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    ws = _Workspace(terms, n_sites, support)
    last = None
    for attempt in range(retries):
        try:
            raw = _decompose_once(ws, rng)
            break
        except SpectralAmbiguityError as exc:
            log.info("decomposition attempt %d failed: %s", attempt + 1, exc)
            last = exc
    else:
        raise SpectralAmbiguityError(f"no generic element found in {retries} attempts: {last}")
    dim = LOCAL_DIM**n_sites
    classes = []
    for cid, copies, spectrum in raw:
        subs = []
        for a, (b, seed_index) in enumerate(copies):
            if support is not None:
                b = np.asarray(support) @ b
            subs.append(
                KrylovSubspace(class_id=cid, copy=a, hilbert_dim=dim, basis=b, seed_index=seed_index)
            )
        classes.append(KrylovClass(cid, subs, spectrum))
    return KrylovDecomposition(
        n_sites=n_sites,
        model=model,
        classes=classes,
        generators=terms,
        support=None if support is None else np.asarray(support),
        seed=seed,
    )


def open_bond_decomposition(
    hamiltonian_terms: Iterable,
    jump_terms: Iterable,
    n_sites: int,
    rng: np.random.Generator | int | None = None,
    *,
    support: np.ndarray | None = None,
    model: str = "open",
) -> KrylovDecomposition:
    """Decomposition for the algebra generated by local Hamiltonian terms and Hermitian jumps."""
    jumps = _as_terms(jump_terms)
    return krylov_decompose_numerical(
        _as_terms(hamiltonian_terms) + jumps, n_sites, rng, support=support, model=model
    )


def sector_support(decomposition: KrylovDecomposition, label: str) -> np.ndarray:
    """Orthonormal columns spanning the classical sector with the given dot-pattern label."""
    for s in decomposition.subspaces():
        if s.label == label:
            return s.dense_basis()
    raise KeyError(f"no sector labelled {label!r}")
