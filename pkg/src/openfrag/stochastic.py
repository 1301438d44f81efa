"""Strong-dephasing effective classical dynamics of the pair-flip sector.

For gamma >> J the coherences created by a bond term decay quickly and the
populations of product configurations follow a classical Markov chain. On a
bond the only moves are pair flips ``aa -> bb``; the second-order rates give
the two-site generator ``(J**2 / gamma) M``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .dynamics import LindbladCircuitSpec, coupling_schedule
from .fragmentation import pattern_table, reduce_to_dot_pattern
from .hilbert import LOCAL_DIM
from .models import DEFAULT_COUPLING_INTERVAL, color_index

PAIRED = np.array([0, 4, 8])  # ++, 00, -- in the two-site product basis

# pair-block of M on (++, 00, --)
_M_PAIRED = 0.5 * np.array([[5.0, -4.0, -1.0], [-4.0, 8.0, -4.0], [-1.0, -4.0, 5.0]])
_MU, _U = np.linalg.eigh(_M_PAIRED)


@dataclass(frozen=True)
class EffectiveGenerator:
    M: np.ndarray
    scale: float

    @property
    def W(self) -> np.ndarray:
        return self.scale * self.M


def effective_matrix() -> np.ndarray:
    m = np.zeros((9, 9))
    m[np.ix_(PAIRED, PAIRED)] = _M_PAIRED
    return m


def effective_generator(J: float, gamma: float) -> EffectiveGenerator:
    """Two-site generator ``(J**2/gamma) M`` in the order ++, +0, +-, 0+, 00, 0-, -+, -0, --."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return EffectiveGenerator(effective_matrix(), J * J / gamma)


def gate_probability(J: float, gamma: float) -> np.ndarray:
    """Transition matrix ``exp(-(J**2/gamma) M)``; symmetric and doubly stochastic."""
    g = effective_generator(J, gamma)
    p = scipy.linalg.expm(-g.W)
    return 0.5 * (p + p.T)


def _paired_blocks(x: np.ndarray) -> np.ndarray:
    """``exp(-x M)`` restricted to the paired block, batched over ``x``."""
    x = np.asarray(x, dtype=float)
    decay = np.exp(-x[..., None] * _MU)
    return np.einsum("ak,...k,bk->...ab", _U, decay, _U)


@dataclass
class ClassicalTrajectory:
    configurations: np.ndarray  # (n_steps + 1, N) int8
    rng_seed: int | None = None

    def patterns(self):
        return [reduce_to_dot_pattern(c) for c in self.configurations]


def _as_config(config0, n_sites: int) -> np.ndarray:
    c = np.array([color_index(s) for s in config0], dtype=np.int8)
    if c.size != n_sites:
        raise ValueError("configuration length does not match N")
    if reduce_to_dot_pattern(c):
        raise ValueError("initial configuration must lie in the fully paired sector")
    return c


def _layer_bonds(n_sites: int) -> list[int]:
    return [j for j in range(1, n_sites) if j % 2] + [j for j in range(1, n_sites) if j % 2 == 0]


def _update_bond(configs: np.ndarray, bond: int, x: np.ndarray, rng: np.random.Generator) -> None:
    """One gate on bond (j, j+1) for every row of ``configs`` (in place)."""
    a = configs[:, bond - 1]
    b = configs[:, bond]
    active = np.flatnonzero(a == b)
    if active.size == 0:
        return
    blocks = _paired_blocks(x[active])  # (n, 3, 3)
    rows = blocks[np.arange(active.size), a[active]]
    cdf = np.cumsum(rows, axis=1)
    u = rng.random(active.size) * cdf[:, -1]
    new = (u[:, None] >= cdf[:, :-1]).sum(axis=1).astype(np.int8)
    configs[active, bond - 1] = new
    configs[active, bond] = new


def run_stochastic_ensemble(
    n_trajectories: int,
    n_sites: int,
    n_steps: int,
    gamma: float,
    rng: np.random.Generator | int | None = None,
    config0=None,
    interval: tuple[float, float] = DEFAULT_COUPLING_INTERVAL,
) -> np.ndarray:
    """Configurations ``(n_steps + 1, n_trajectories, N)`` of independent classical circuits.

    Each gate draws its own coupling per trajectory and samples the new
    two-site state from the exact row of ``exp(-(J**2/gamma) M)``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    rng = np.random.default_rng(rng)
    c0 = _as_config("+" * n_sites if config0 is None else config0, n_sites)
    configs = np.tile(c0, (n_trajectories, 1))
    out = np.empty((n_steps + 1, n_trajectories, n_sites), dtype=np.int8)
    out[0] = configs
    lo, hi = interval
    bonds = _layer_bonds(n_sites)
    for t in range(n_steps):
        for j in bonds:
            J = rng.uniform(lo, hi, size=n_trajectories)
            _update_bond(configs, j, J * J / gamma, rng)
        out[t + 1] = configs
    return out


def run_stochastic_circuit(
    config0,
    n_steps: int,
    n_sites: int,
    gamma: float,
    rng: np.random.Generator | int | None = None,
    interval: tuple[float, float] = DEFAULT_COUPLING_INTERVAL,
) -> ClassicalTrajectory:
    seed = rng if isinstance(rng, (int, np.integer)) else None
    configs = run_stochastic_ensemble(1, n_sites, n_steps, gamma, rng, config0, interval)
    return ClassicalTrajectory(configs[:, 0, :], seed)


def evolve_populations(p0: np.ndarray, spec: LindbladCircuitSpec) -> np.ndarray:
    """Exact classical master-equation evolution of a population vector over all ``3**N`` configurations.

    Uses the coupling schedule of ``spec`` so it can be compared step by step
    with the Lindblad circuit. Returns ``(n_steps + 1, 3**N)``.
    """
    n = spec.n_sites
    J = coupling_schedule(spec)
    p = np.asarray(p0, dtype=float)
    out = [p]
    for t in range(spec.n_steps):
        for j in _layer_bonds(n):
            g = gate_probability(J[t, j - 1], spec.gamma)
            tens = p.reshape(LOCAL_DIM ** (j - 1), 9, -1)
            p = np.einsum("ab,ibr->iar", g, tens).reshape(-1)
        out.append(p)
    return np.asarray(out)


# -- number entropy ---------------------------------------------------------


@dataclass
class PatternDistribution:
    probabilities: dict
    n_samples: int


@dataclass
class NumberEntropySeries:
    steps: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    cut: int
    n_trajectories: int
    pattern_ids: np.ndarray = field(repr=False, default=None)
    n_patterns: int = 0

    def saturation(
        self, window: int = 50, n_boot: int = 200, rng: np.random.Generator | int | None = None
    ) -> tuple[float, float]:
        """Mean over the last ``window`` steps and its bootstrap error over trajectories."""
        ids = self.pattern_ids[-window:]
        value = float(self.values[-window:].mean())
        rng = np.random.default_rng(rng)
        T = ids.shape[1]
        boots = np.empty(n_boot)
        offs = (np.arange(ids.shape[0]) * self.n_patterns)[:, None]
        for b in range(n_boot):
            pick = rng.integers(0, T, size=T)
            counts = np.bincount((ids[:, pick] + offs).ravel(), minlength=ids.shape[0] * self.n_patterns)
            boots[b] = _entropy_rows(counts.reshape(ids.shape[0], -1) / T).mean()
        return value, float(boots.std(ddof=1))


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=-1)


def left_pattern_ids(configs: np.ndarray, cut: int) -> tuple[np.ndarray, list]:
    """Dot-pattern id of the left ``cut`` sites for every configuration (last axis = sites)."""
    table, patterns = pattern_table(cut)
    weights = LOCAL_DIM ** np.arange(cut - 1, -1, -1)
    words = configs[..., :cut].astype(np.int64) @ weights
    return table[words], patterns


def pattern_distribution(configs: np.ndarray, cut: int) -> PatternDistribution:
    ids, patterns = left_pattern_ids(configs, cut)
    counts = np.bincount(ids.ravel(), minlength=len(patterns))
    n = int(ids.size)
    return PatternDistribution({patterns[i]: c / n for i, c in enumerate(counts) if c}, n)


def number_entropy_series(
    trajectories: np.ndarray,
    cut: int | None = None,
    n_boot: int = 200,
    rng: np.random.Generator | int | None = None,
) -> NumberEntropySeries:
    """Plug-in entropy of the left dot pattern at each step, with bootstrap errors.

    ``trajectories`` has shape ``(n_steps + 1, n_trajectories, N)``. Bootstrap
    resampling of trajectories at a fixed step is a multinomial draw from the
    empirical pattern distribution, which is what is used here.
    """
    traj = np.asarray(trajectories)
    if traj.ndim != 3:
        raise ValueError("expected an array of shape (steps, trajectories, sites)")
    steps, T, n = traj.shape
    if T < 100:
        raise ValueError("need at least 100 trajectories")
    cut = n // 2 if cut is None else cut
    ids, patterns = left_pattern_ids(traj, cut)
    P = len(patterns)
    rng = np.random.default_rng(rng)
    values = np.empty(steps)
    stderr = np.empty(steps)
    for t in range(steps):
        counts = np.bincount(ids[t], minlength=P)
        p = counts / T
        values[t] = _entropy_rows(p)
        live = counts > 0
        if live.sum() <= 1:
            stderr[t] = 0.0
            continue
        draws = rng.multinomial(T, p[live], size=n_boot) / T
        stderr[t] = _entropy_rows(draws).std(ddof=1)
    return NumberEntropySeries(np.arange(steps), values, stderr, cut, T, ids, P)


def tree_walk_counts(length: int, normalize: bool = True) -> tuple[np.ndarray, float]:
    """Number of words of ``length`` colors reducing to one fixed pattern of each length k.

    Returns ``(n, log_scale)`` with ``n[k]`` for k = 0..length, divided by
    ``exp(log_scale)`` when ``normalize`` is set (exact integers otherwise).
    """
    n = np.zeros(length + 2, dtype=object if not normalize else float)
    n[0] = 1
    log_scale = 0.0
    for _ in range(length):
        new = np.zeros_like(n)
        new[0] = 3 * n[1]
        new[1:-1] = n[:-2] + 2 * n[2:]
        if normalize:
            s = new.sum()
            new = new / s
            log_scale += float(np.log(s))
        n = new
    return n[: length + 1], log_scale


def patterns_of_length(k: int) -> int:
    k = int(k)
    return 1 if k == 0 else 3 * 2 ** (k - 1)


def _log_patterns_of_length(k: int) -> float:
    return 0.0 if k == 0 else float(np.log(3.0) + (k - 1) * np.log(2.0))


def stationary_number_entropy(n_sites: int) -> float:
    """Exact number entropy of the uniform fully paired state across the middle cut.

    A fully paired chain of N sites is a left word of L = N/2 colors reducing
    to a pattern A of length k followed by a right word reducing to A reversed,
    so the weight of A is ``n_L(k)**2``.
    """
    if n_sites % 2 or n_sites < 2 or n_sites > 200:
        raise ValueError("N must be even and at most 200")
    L = n_sites // 2
    n, _ = tree_walk_counts(L)
    ks = np.flatnonzero(n > 0)
    log_count = np.array([_log_patterns_of_length(k) for k in ks])
    log_w = log_count + 2.0 * np.log(n[ks].astype(float))
    log_w -= logsumexp(log_w)
    w = np.exp(log_w)  # total probability of all patterns of length k
    return float(-(w * (log_w - log_count)).sum())


def stationary_pattern_probabilities(n_sites: int) -> dict[int, float]:
    """Probability of one specific left pattern, keyed by its length."""
    L = n_sites // 2
    n, _ = tree_walk_counts(L)
    ks = np.flatnonzero(n > 0)
    log_w = np.array([_log_patterns_of_length(k) + 2.0 * np.log(float(n[k])) for k in ks])
    log_z = logsumexp(log_w)
    return {int(k): float(np.exp(2.0 * np.log(float(n[k])) - log_z)) for k in ks}
