"""Dense linear algebra on spin-1 chains.

States are 1-d arrays of length ``3**N`` and operators are ``3**N x 3**N``
arrays. Product basis states are ordered in base 3 with site 1 the most
significant digit and local order (+, 0, -). Sites are numbered from 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

LOCAL_DIM = 3

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_FLOOR = -1e-9


def n_sites_of(dim: int) -> int:
    """Return N such that ``3**N == dim``."""
    n = 0
    d = dim
    while d > 1 and d % LOCAL_DIM == 0:
        d //= LOCAL_DIM
        n += 1
    if d != 1:
        raise ValueError(f"dimension {dim} is not a power of {LOCAL_DIM}")
    return n


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    return bool(np.abs(a - a.conj().T).max(initial=0.0) <= tol * scale)


def validate_state_vector(psi: np.ndarray, tol: float = 1e-12) -> int:
    """Check length and normalization; return the number of sites."""
    psi = np.asarray(psi)
    if psi.ndim != 1:
        raise ValueError("state vector must be one-dimensional")
    n = n_sites_of(psi.shape[0])
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state vector norm {norm} differs from 1")
    return n


def validate_density_matrix(rho: np.ndarray) -> int:
    """Check Hermiticity, unit trace and positivity; return the number of sites."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    n = n_sites_of(rho.shape[0])
    if not is_hermitian(rho):
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"density matrix trace {tr} differs from 1")
    lo = np.linalg.eigvalsh(rho).min()
    if lo < PSD_FLOOR:
        raise ValueError(f"density matrix has negative eigenvalue {lo}")
    return n


def _check_range(start_site: int, width: int, n_sites: int) -> None:
    if start_site < 1 or start_site + width - 1 > n_sites:
        raise ValueError(
            f"sites {start_site}..{start_site + width - 1} outside chain of {n_sites}"
        )


def _width_of(op: np.ndarray) -> int:
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError("local operator must be square")
    return n_sites_of(op.shape[0])


def embed_local(op: np.ndarray, start_site: int, n_sites: int) -> np.ndarray:
    """Return ``1 (x) op (x) 1`` with ``op`` acting on sites starting at ``start_site``."""
    op = np.asarray(op)
    k = _width_of(op)
    _check_range(start_site, k, n_sites)
    left = np.eye(LOCAL_DIM ** (start_site - 1), dtype=op.dtype)
    right = np.eye(LOCAL_DIM ** (n_sites - start_site - k + 1), dtype=op.dtype)
    return np.kron(np.kron(left, op), right)


def apply_local(op: np.ndarray, start_site: int, n_sites: int, vecs: np.ndarray) -> np.ndarray:
    """Apply a local operator to a state or to the columns of a matrix.

    Equivalent to ``embed_local(op, start_site, n_sites) @ vecs`` without
    building the full matrix.
    """
    op = np.asarray(op)
    k = _width_of(op)
    _check_range(start_site, k, n_sites)
    vecs = np.asarray(vecs)
    squeeze = vecs.ndim == 1
    v = vecs[:, None] if squeeze else vecs
    m = v.shape[1]
    left = LOCAL_DIM ** (start_site - 1)
    right = LOCAL_DIM ** (n_sites - start_site - k + 1) * m
    t = v.reshape(left, LOCAL_DIM**k, right)
    out = np.einsum("ab,ibr->iar", op, t, optimize=True).reshape(v.shape[0], m)
    return out[:, 0] if squeeze else out


def partial_transpose(rho: np.ndarray, cut: int, n_sites: int | None = None) -> np.ndarray:
    """Partial transpose with respect to the right block of sites ``cut+1..N``."""
    rho = np.asarray(rho)
    n = n_sites_of(rho.shape[0]) if n_sites is None else n_sites
    if not 1 <= cut < n:
        raise ValueError(f"cut {cut} must leave both blocks non-empty (N={n})")
    da = LOCAL_DIM**cut
    db = LOCAL_DIM ** (n - cut)
    t = rho.reshape(da, db, da, db)
    return t.transpose(0, 3, 2, 1).reshape(rho.shape)


def trace_norm(a: np.ndarray) -> float:
    """Sum of singular values."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("trace norm needs a square matrix")
    if is_hermitian(a, tol=1e-13):
        return float(np.abs(np.linalg.eigvalsh(a)).sum())
    return float(np.linalg.svd(a, compute_uv=False).sum())


def vectorize(rho: np.ndarray, n_sites: int | None = None) -> np.ndarray:
    """Map ``|s><s'|`` to ``|s_1 s'_1, s_2 s'_2, ...>`` (ket and bra interleaved per site).

    A spatial cut at bond c is then a single reshape into
    ``(9**c, 9**(N-c))``.
    """
    rho = np.asarray(rho)
    n = n_sites_of(rho.shape[0]) if n_sites is None else n_sites
    t = rho.reshape((LOCAL_DIM,) * (2 * n))
    order = [ax for site in range(n) for ax in (site, n + site)]
    return t.transpose(order).reshape(-1)


def unvectorize(vec: np.ndarray, n_sites: int | None = None) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vec)
    n = n_sites_of(vec.shape[0]) // 2 if n_sites is None else n_sites
    t = vec.reshape((LOCAL_DIM,) * (2 * n))
    # interleaved axis 2*s is ket s, 2*s+1 is bra s
    order = [2 * s for s in range(n)] + [2 * s + 1 for s in range(n)]
    d = LOCAL_DIM**n
    return t.transpose(order).reshape(d, d)


def matrix_exp(a: np.ndarray) -> np.ndarray:
    return scipy.linalg.expm(np.asarray(a))


def hermitian_eig(a: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    a = np.asarray(a)
    if not is_hermitian(a, tol=tol):
        raise ValueError("matrix is not Hermitian within tolerance")
    return np.linalg.eigh(a)


@dataclass(frozen=True)
class Superoperator:
    """Dense linear map on operators, stored in row-major vectorization.

    With ``vec(X) = X.reshape(-1)`` the map ``X -> A X B`` has matrix
    ``kron(A, B.T)``.
    """

    matrix: np.ndarray
    n_sites: int
    convention: str = "row-major"

    @property
    def dim(self) -> int:
        return LOCAL_DIM**self.n_sites

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.asarray(x).reshape(-1)).reshape(self.dim, self.dim)

    def adjoint(self) -> "Superoperator":
        """Adjoint with respect to the Hilbert-Schmidt inner product."""
        return Superoperator(self.matrix.conj().T, self.n_sites, self.convention)

    def choi(self) -> np.ndarray:
        """Choi matrix ``sum_ij |i><j| (x) Phi(|i><j|)``."""
        d = self.dim
        t = self.matrix.reshape(d, d, d, d)  # (k, l, i, j)
        return t.transpose(2, 0, 3, 1).reshape(d * d, d * d)

    def trace_preservation_error(self) -> float:
        d = self.dim
        t = self.matrix.reshape(d, d, d, d)
        partial = np.einsum("kkij->ij", t)
        return float(np.abs(partial - np.eye(d)).max())

    def min_choi_eigenvalue(self) -> float:
        c = self.choi()
        return float(np.linalg.eigvalsh(0.5 * (c + c.conj().T)).min())

    def is_cptp(self, psd_tol: float = 1e-9, tp_tol: float = 1e-10) -> bool:
        return self.min_choi_eigenvalue() >= -psd_tol and self.trace_preservation_error() <= tp_tol


def superop_from_sandwich(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> a X b`` in row-major vectorization."""
    return np.kron(a, np.asarray(b).T)
