"""Local terms of the pair-flip and Temperley-Lieb spin-1 chains, jump operators
for the three noise channels, random couplings and named initial states."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .hilbert import LOCAL_DIM, embed_local, is_hermitian

COLORS = ("+", "0", "-")
COLOR_INDEX = {c: i for i, c in enumerate(COLORS)}

SZ = np.diag([1.0, 0.0, -1.0])
SX = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]) / np.sqrt(2.0)
SY = np.array([[0.0, -1j, 0.0], [1j, 0.0, -1j], [0.0, 1j, 0.0]]) / np.sqrt(2.0)
ID1 = np.eye(LOCAL_DIM)

CHANNELS = ("none", "dephasing", "structure_preserving", "spin_flip")

DEFAULT_COUPLING_INTERVAL = (0.8, 1.2)


def color_index(c) -> int:
    if isinstance(c, str):
        try:
            return COLOR_INDEX[c]
        except KeyError:
            raise ValueError(f"unknown color {c!r}; expected one of {COLORS}") from None
    c = int(c)
    if not 0 <= c < LOCAL_DIM:
        raise ValueError(f"color index {c} out of range")
    return c


def basis_state(word, n_sites: int | None = None) -> np.ndarray:
    """Product state for a word over {+,0,-} (string or index sequence)."""
    idx = [color_index(c) for c in word]
    if n_sites is not None and len(idx) != n_sites:
        raise ValueError("word length does not match n_sites")
    pos = 0
    for i in idx:
        pos = pos * LOCAL_DIM + i
    psi = np.zeros(LOCAL_DIM ** len(idx))
    psi[pos] = 1.0
    return psi


@dataclass(frozen=True)
class LocalTerm:
    """A local operator on sites ``site .. site + width - 1``."""

    site: int
    width: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.shape != (LOCAL_DIM**self.width,) * 2:
            raise ValueError(f"matrix shape {m.shape} does not match width {self.width}")
        if not is_hermitian(m, tol=1e-12):
            raise ValueError("local term is not Hermitian")

    def embed(self, n_sites: int) -> np.ndarray:
        return embed_local(self.matrix, self.site, n_sites)


def dimer_state() -> np.ndarray:
    """(|++> + |00> + |-->)/sqrt(3)."""
    v = np.zeros(LOCAL_DIM**2)
    for a in range(LOCAL_DIM):
        v[a * LOCAL_DIM + a] = 1.0
    return v / np.sqrt(3.0)


def pair_sum() -> np.ndarray:
    """sum_{ab} |aa><bb| on two sites, equal to 3 times the TL projector."""
    d = dimer_state()
    return 3.0 * np.outer(d, d)


def tl_projector() -> np.ndarray:
    d = dimer_state()
    return np.outer(d, d)


def tl_terms(n_sites: int) -> list[LocalTerm]:
    e = tl_projector()
    return [LocalTerm(j, 2, e) for j in range(1, n_sites)]


def _as_real(value, what: str) -> float:
    if isinstance(value, complex) or np.iscomplexobj(value):
        if np.imag(value) != 0:
            raise ValueError(f"{what} must be real, got {value!r}")
        value = np.real(value)
    if not isinstance(value, (Real, np.floating, np.integer)):
        raise ValueError(f"{what} must be real, got {value!r}")
    return float(value)


def pf_hamiltonian(
    g: Mapping[tuple, float],
    l: Mapping[tuple, float] | None,
    n_sites: int,
) -> list[LocalTerm]:
    """Local terms of the pair-flip Hamiltonian.

    ``g`` maps ``(j, a, b)`` to the coefficient of the pair flip between
    ``|aa>`` and ``|bb>`` on bond (j, j+1). Each unordered color pair is one
    coefficient: ``a != b`` contributes ``g (|aa><bb| + |bb><aa|)`` and
    ``a == b`` contributes ``g |aa><aa|``. ``l`` maps ``(j, a)`` to an on-site
    field ``l |a><a|`` at site j. Returns one two-site term per bond with a
    nonzero coefficient, followed by one-site terms.
    """
    if n_sites % 2:
        raise ValueError("pair-flip chains need an even number of sites")
    bonds: dict[int, np.ndarray] = {}
    seen: set[tuple[int, int, int]] = set()
    for key, value in g.items():
        j, a, b = key
        a, b = sorted((color_index(a), color_index(b)))
        if not 1 <= j < n_sites:
            raise ValueError(f"bond {j} outside chain of {n_sites}")
        if (j, a, b) in seen:
            raise ValueError(f"coefficient for bond {j}, pair {COLORS[a]}{COLORS[b]} given twice")
        seen.add((j, a, b))
        c = _as_real(value, "pair-flip coefficient")
        m = bonds.setdefault(j, np.zeros((LOCAL_DIM**2,) * 2))
        ia, ib = a * LOCAL_DIM + a, b * LOCAL_DIM + b
        m[ia, ib] += c
        if ia != ib:
            m[ib, ia] += c
    sites: dict[int, np.ndarray] = {}
    for key, value in (l or {}).items():
        j, a = key
        if not 1 <= j <= n_sites:
            raise ValueError(f"site {j} outside chain of {n_sites}")
        c = _as_real(value, "on-site coefficient")
        m = sites.setdefault(j, np.zeros((LOCAL_DIM, LOCAL_DIM)))
        m[color_index(a), color_index(a)] += c
    terms = [LocalTerm(j, 2, m) for j, m in sorted(bonds.items())]
    terms += [LocalTerm(j, 1, m) for j, m in sorted(sites.items())]
    return terms


def jump_operators(channel: str, n_sites: int) -> list[LocalTerm]:
    """Jump operators: S^z_j, e_{j,j+1} or S^x_j. ``"none"`` gives no jumps."""
    if n_sites < 2:
        raise ValueError("need at least two sites")
    if channel == "dephasing":
        return [LocalTerm(j, 1, SZ) for j in range(1, n_sites + 1)]
    if channel == "structure_preserving":
        return tl_terms(n_sites)
    if channel == "spin_flip":
        return [LocalTerm(j, 1, SX) for j in range(1, n_sites + 1)]
    if channel == "none":
        return []
    raise ValueError(f"unknown channel {channel!r}; expected one of {CHANNELS}")


@dataclass(frozen=True)
class CouplingSample:
    J: np.ndarray
    rng_seed: int | None
    time_step: int
    interval: tuple[float, float] = DEFAULT_COUPLING_INTERVAL

    def __post_init__(self):
        lo, hi = self.interval
        if np.any(self.J < lo) or np.any(self.J > hi):
            raise ValueError(f"couplings outside {self.interval}")


def sample_couplings(
    rng: np.random.Generator,
    n_sites: int,
    interval: tuple[float, float] = DEFAULT_COUPLING_INTERVAL,
    time_step: int = 0,
    rng_seed: int | None = None,
) -> CouplingSample:
    """One i.i.d. uniform coupling per bond."""
    lo, hi = interval
    J = rng.uniform(lo, hi, size=n_sites - 1)
    return CouplingSample(J=J, rng_seed=rng_seed, time_step=time_step, interval=(lo, hi))


# -- initial states ---------------------------------------------------------


def all_plus(n_sites: int) -> np.ndarray:
    return basis_state("+" * n_sites)


def two_degenerate(n_sites: int = 4) -> np.ndarray:
    """Dimer on sites 1-2 and, on sites 3-4, an equal superposition of a
    dimer and the product dot pairs (-+) and (+-).

    Overlaps with three TL Krylov subspaces: the fully dimerized one and two
    degenerate one-dimer-two-dot copies.
    """
    if n_sites != 4:
        raise ValueError("the two_degenerate state is defined for N=4")
    d = dimer_state()
    right = d + basis_state("-+") + basis_state("+-")
    return np.kron(d, right) / np.sqrt(3.0)


def infinite_temperature(n_sites: int) -> np.ndarray:
    dim = LOCAL_DIM**n_sites
    return np.eye(dim) / dim


def pure_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi)
    return np.outer(psi, psi.conj())


def initial_density(spec: str, n_sites: int) -> np.ndarray:
    """Density matrix for a named initial state or a product word."""
    if spec == "all_plus":
        return pure_density(all_plus(n_sites))
    if spec == "two_degenerate":
        return pure_density(two_degenerate(n_sites))
    if spec in ("infinite_temperature", "identity"):
        return infinite_temperature(n_sites)
    if len(spec) == n_sites and all(c in COLOR_INDEX for c in spec):
        return pure_density(basis_state(spec))
    raise ValueError(f"unknown initial state {spec!r}")
