"""Scenario presets: each returns data series, a summary and the invariant checks it relies on."""

from __future__ import annotations

import logging
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .dynamics import (
    LindbladCircuitSpec,
    evolve_density,
    iterate_circuit,
    stationary_state_classical,
    stationary_state_quantum,
    trace_distance,
)
from .fragmentation import (
    KrylovDecomposition,
    configurations,
    enumerate_pf_krylov,
    fit_fragmentation_exponent,
    krylov_decompose_numerical,
    sector_support,
)
from .hilbert import LOCAL_DIM, embed_local
from .models import SZ, initial_density, tl_terms
from .observables import (
    autocorrelation,
    log_negativity,
    mazur_bound_pf,
    mazur_bound_tl,
    mazur_bound_tl_diagonal,
    operator_entanglement,
)
from .stochastic import number_entropy_series, run_stochastic_ensemble, stationary_number_entropy

log = logging.getLogger(__name__)


@dataclass
class Check:
    name: str
    invariant: str
    value: float
    limit: float
    passed: bool


@dataclass
class ScenarioResult:
    series: dict[str, list[tuple[int, str, complex]]] = field(default_factory=dict)
    tables: dict[str, tuple[list[str], list[tuple]]] = field(default_factory=dict)
    summary: list[dict] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    def check(self, name: str, invariant: str, value: float, limit: float, passed: bool) -> None:
        self.checks.append(Check(name, invariant, float(value), float(limit), bool(passed)))

    def add_series(self, stem: str, name: str, values, start: int = 0) -> None:
        rows = self.series.setdefault(stem, [])
        rows.extend((start + t, name, complex(v)) for t, v in enumerate(values))

    def record_decomposition(self, key: str, dec: KrylovDecomposition) -> None:
        self.manifest.setdefault("decompositions", {})[key] = {
            "content_hash": dec.content_hash(),
            "K": dec.K,
            "D_max": dec.D_max,
            "commutant_dim": dec.commutant_dim,
            "partial": dec.is_partial,
        }

    def record_spec(self, key: str, spec: LindbladCircuitSpec) -> None:
        self.manifest.setdefault("circuits", {})[key] = spec.manifest()


def _pmap(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _spec(cfg: ExperimentConfig, **over) -> LindbladCircuitSpec:
    args = dict(
        n_sites=cfg.n_sites,
        channel=cfg.channel,
        gamma=cfg.gamma,
        n_steps=cfg.n_steps,
        rng_seed=cfg.seed,
    )
    args.update(over)
    return LindbladCircuitSpec(**args)


def _tl_decomposition(n: int, seed: int) -> KrylovDecomposition:
    return krylov_decompose_numerical(tl_terms(n), n, seed, model="temperley_lieb")


def sz_diagonal(site: int, n_sites: int) -> np.ndarray:
    """Diagonal of S^z on ``site`` in the product basis."""
    return 1.0 - configurations(n_sites)[:, site - 1].astype(float)


# -- fig3 -------------------------------------------------------------------


def run_fig3(cfg: ExperimentConfig, workers: int = 1) -> ScenarioResult:
    """Decay of inter-sector blocks of the density matrix under dephasing."""
    res = ScenarioResult()
    n = cfg.n_sites
    pf, _ = enumerate_pf_krylov(n)
    res.record_decomposition("pair_flip", pf)
    labels = np.empty(LOCAL_DIM**n, dtype=np.int64)
    for s in pf.subspaces():
        labels[s.indices] = s.class_id
    off = labels[:, None] != labels[None, :]
    rho0 = initial_density(cfg.initial_state, n)
    weights0 = np.array([s.trace_with(rho0).real for s in pf.subspaces()])
    spec = _spec(cfg, channel="dephasing")
    res.record_spec("dephasing", spec)
    tr = evolve_density(
        rho0,
        spec,
        observables={
            "offblock_max": lambda r: np.abs(r[off]).max(),
            "offblock_frobenius": lambda r: np.sqrt((np.abs(r[off]) ** 2).sum()),
            "sector_weight_drift": lambda r: np.abs(
                np.array([s.trace_with(r).real for s in pf.subspaces()]) - weights0
            ).max(),
        },
    )
    for name, vals in tr.observables.items():
        res.add_series("coherence", name, vals)
    o = tr.observables["offblock_frobenius"]
    final = float(tr.observables["offblock_max"][-1])
    rise = float(np.diff(o).max(initial=0.0))
    drift = float(tr.observables["sector_weight_drift"].max())
    res.check("offblock_final", "dynamics: inter-sector blocks decay to <= 1e-6", final, 1e-6, final <= 1e-6)
    res.check("offblock_monotone", "dynamics: inter-sector decay is monotone", rise, 1e-12, rise <= 1e-12)
    res.check("sector_weights", "dynamics: conservation of commutant weights", drift, 1e-8, drift <= 1e-8)
    res.summary.append({"observable": "offblock_max", "final_value": final, "overlapping_sectors": int((weights0 > 1e-12).sum())})
    return res


# -- fig4 -------------------------------------------------------------------


def _fig4_channel(args):
    cfg, channel = args
    n = cfg.n_sites
    spec = _spec(cfg, channel=channel)
    op = embed_local(SZ, n // 2, n)
    series = autocorrelation(op, "open_heisenberg", spec)
    return channel, spec.manifest(), series.values


def run_fig4(cfg: ExperimentConfig, workers: int = 1) -> ScenarioResult:
    """Autocorrelation of the bulk S^z under the three noise channels."""
    res = ScenarioResult()
    n = cfg.n_sites
    site = n // 2
    pf, _ = enumerate_pf_krylov(n)
    tl = _tl_decomposition(n, cfg.seed)
    res.record_decomposition("pair_flip", pf)
    res.record_decomposition("temperley_lieb", tl)
    op = embed_local(SZ, site, n)
    bounds = {
        "dephasing": mazur_bound_pf(np.diag(op), pf),
        "structure_preserving": mazur_bound_tl(op, tl),
        "spin_flip": 0.0,
    }
    res.check(
        "tl_exceeds_pf",
        "observables: M_TL >= M_PF",
        bounds["structure_preserving"] - bounds["dephasing"],
        0.0,
        bounds["structure_preserving"] > bounds["dephasing"],
    )
    window_start = min(100, cfg.n_steps // 2)
    for channel, manifest, values in _pmap(_fig4_channel, [(cfg, c) for c in bounds], workers):
        res.manifest.setdefault("circuits", {})[channel] = manifest
        res.add_series("autocorrelation", channel, values)
        sat = float(values[window_start:].mean())
        err = abs(sat - bounds[channel])
        res.summary.append(
            {
                "channel": channel,
                "saturation": sat,
                "bound": bounds[channel],
                "abs_error": err,
                "window": [window_start, cfg.n_steps],
            }
        )
        if channel == "spin_flip":
            res.check("spin_flip_decay", "observables: ergodic decay under spin flips", sat, 1e-3, sat <= 1e-3)
        else:
            res.check(
                f"{channel}_saturation",
                "observables: open-system saturation equals the Mazur bound",
                err,
                1e-4,
                err <= 1e-4,
            )
    return res


# -- fig5 -------------------------------------------------------------------


def run_fig5(cfg: ExperimentConfig, workers: int = 1) -> ScenarioResult:
    """Stationary coherences between degenerate Krylov copies under structure-preserving noise."""
    res = ScenarioResult()
    n = cfg.n_sites
    tl = _tl_decomposition(n, cfg.seed)
    res.record_decomposition("temperley_lieb", tl)
    rho0 = initial_density(cfg.initial_state, n)
    ss = stationary_state_quantum(rho0, tl)
    spec = _spec(cfg, channel="structure_preserving")
    res.record_spec("structure_preserving", spec)
    # copies that the initial state overlaps with, per class
    tracked = []
    for cls, m in zip(tl.classes, ss.weights):
        live = np.flatnonzero(np.abs(np.diag(m)) > 1e-12)
        for a in live:
            for b in live:
                if a < b:
                    tracked.append((cls, a, b))
    observables = {
        "trace_distance_to_stationary": lambda r: trace_distance(r, ss.rho),
    }
    for cls, a, b in tracked:
        observables[f"coherence_l{cls.class_id}_{a}_{b}"] = (
            lambda r, cls=cls, a=a, b=b: cls.overlap_matrix(r)[a, b]
        )
    tr = evolve_density(rho0, spec, observables=observables)
    for name, vals in tr.observables.items():
        res.add_series("coherences", name, vals)
    dist = float(tr.observables["trace_distance_to_stationary"][-1])
    res.check("stationary_match", "dynamics: long-time state equals stationary_state_quantum", dist, 1e-6, dist <= 1e-6)
    coh = max((abs(ss.weights[cls.class_id][a, b]) for cls, a, b in tracked), default=0.0)
    res.check("stationary_coherence", "dynamics: degenerate copies keep phase coherence", coh, 1e-3, coh > 1e-3)
    late = max((abs(tr.observables[k][-1]) for k in observables if k.startswith("coherence")), default=0.0)
    res.summary.append(
        {
            "observable": "inter_copy_coherence",
            "saturation_value": float(late),
            "bound_value": float(coh),
            "abs_error": float(abs(late - coh)),
            "trace_distance": dist,
        }
    )
    return res


# -- fig6 -------------------------------------------------------------------


def _stochastic_runs(args):
    n, n_traj, n_steps, gamma, seed = args
    traj = run_stochastic_ensemble(n_traj, n, n_steps, gamma, rng=seed)
    series = number_entropy_series(traj, rng=seed + 1)
    sat, err = series.saturation(window=100, rng=seed + 2)
    return n, series.values, series.stderr, sat, err


def run_fig6(cfg: ExperimentConfig, workers: int = 1) -> ScenarioResult:
    """Operator-space entanglement under dephasing and the number entropy of the classical circuit."""
    res = ScenarioResult()
    n = cfg.n_sites
    cut = cfg.middle_cut
    pf, _ = enumerate_pf_krylov(n)
    res.record_decomposition("pair_flip", pf)
    spec = _spec(cfg, channel="dephasing")
    res.record_spec("dephasing", spec)
    rho0 = initial_density(cfg.initial_state, n)
    names = ("S_OP", "S_num", "S_res", "E_N")
    vals = {k: [] for k in names}
    for _, rho in iterate_circuit(rho0, spec):
        rec = operator_entanglement(rho, cut)
        for k, v in zip(names, (rec.S_OP, rec.S_num, rec.S_res, rec.negativity)):
            vals[k].append(v)
    for k in names:
        res.add_series("entanglement", k, vals[k])
    ss = stationary_state_classical(rho0, pf)
    rec = operator_entanglement(ss.rho, cut)
    res.check("stationary_S_res", "observables: S_res = 0 for the dephasing stationary state", rec.S_res, 1e-8, rec.split_exact and rec.S_res <= 1e-8)
    res.check("stationary_split", "observables: S_OP = S_num + S_res", rec.split_error, 1e-8, rec.split_error <= 1e-8)
    res.summary.append({"observable": "S_OP", "saturation_value": vals["S_OP"][-1], "bound_value": rec.S_OP, "abs_error": abs(vals["S_OP"][-1] - rec.S_OP)})

    sizes = cfg.sizes or (8, 12, 16)
    n_traj = max(cfg.n_realizations, 100)
    jobs = [(m, n_traj, 25 * m, 1.0, cfg.seed + m) for m in sizes]
    for m, values, stderr, sat, err in _pmap(_stochastic_runs, jobs, workers):
        exact = stationary_number_entropy(m)
        res.tables[f"number_entropy_N{m}"] = (
            ["step", "S_num", "stderr"],
            [(t, v, e) for t, (v, e) in enumerate(zip(values, stderr))],
        )
        dev = abs(sat - exact)
        res.summary.append(
            {"observable": f"S_num_N{m}", "saturation_value": sat, "bound_value": exact, "abs_error": dev, "bootstrap_sigma": err}
        )
        res.check(f"number_entropy_N{m}", "stochastic: saturation matches the exact stationary value", dev, 3 * err, dev <= 3 * err)
    exact_sizes = (2, 4, 8, 12, 16, 32, 64, 128, 200)
    exact_vals = [stationary_number_entropy(m) for m in exact_sizes]
    res.tables["stationary_number_entropy"] = (["N", "S_exact"], list(zip(exact_sizes, exact_vals)))
    ratios = np.array([stationary_number_entropy(m) / np.sqrt(m) for m in (64, 128, 200)])
    spread = float((ratios.max() - ratios.min()) / ratios.mean())
    res.check("sqrt_scaling", "stochastic: S_exact/sqrt(N) spread over N=64..200", spread, 0.1, spread < 0.1)
    return res


# -- fig7 -------------------------------------------------------------------


def _stationary_negativity(n: int, seed: int, initial: str) -> tuple[float, KrylovDecomposition]:
    rho0 = initial_density(initial, n)
    if n >= 8:
        # the initial product state lies in the fully paired classical sector,
        # which is invariant under the algebra; decompose only that sector
        pf, _ = enumerate_pf_krylov(n, with_generators=False)
        support = sector_support(pf, "")
        dec = krylov_decompose_numerical(tl_terms(n), n, seed, support=support, model="temperley_lieb")
    else:
        dec = _tl_decomposition(n, seed)
    rho = stationary_state_quantum(rho0, dec).rho
    del rho0
    return log_negativity(rho, n // 2), dec


def run_fig7(cfg: ExperimentConfig, workers: int = 1) -> ScenarioResult:
    """Negativity under structure-preserving noise; dynamics for N <= 6, stationary values for all sizes."""
    res = ScenarioResult()
    sizes = cfg.sizes or (4, 6, 8)
    stationary = {}
    for n in sizes:
        neg, dec = _stationary_negativity(n, cfg.seed, cfg.initial_state)
        stationary[n] = neg
        res.record_decomposition(f"temperley_lieb_N{n}", dec)
        if n <= 6:
            spec = _spec(cfg, n_sites=n, channel="structure_preserving")
            res.record_spec(f"N{n}", spec)
            tr = evolve_density(
                initial_density(cfg.initial_state, n),
                spec,
                observables={"E_N": lambda r, n=n: log_negativity(r, n // 2)},
                stop_on_convergence=True,
            )
            curve = tr.observables["E_N"]
            res.add_series("negativity", f"E_N_N{n}", curve)
            err = abs(curve[-1] - neg)
            res.summary.append({"observable": f"E_N_N{n}", "saturation_value": float(curve[-1]), "bound_value": neg, "abs_error": float(err), "converged_at": tr.converged_at})
            res.check(f"negativity_N{n}", "observables: negativity saturates to the stationary value", err, 1e-6, err <= 1e-6)
        else:
            res.summary.append({"observable": f"E_N_N{n}", "saturation_value": None, "bound_value": neg, "abs_error": None})
    vals = [stationary[n] for n in sorted(stationary)]
    res.tables["stationary_negativity"] = (["N", "E_N"], [(n, stationary[n]) for n in sorted(stationary)])
    res.check("negativity_positive", "observables: structure-preserving stationary state is entangled", min(vals), 0.0, min(vals) > 0)
    inc = float(np.diff(vals).min(initial=np.inf)) if len(vals) > 1 else 0.0
    res.check("negativity_increasing", "observables: half-cut negativity grows with N", inc, 0.0, len(vals) < 2 or inc > 0)
    return res


# -- fig8 -------------------------------------------------------------------


def run_fig8(cfg: ExperimentConfig, workers: int = 1) -> ScenarioResult:
    """Krylov-space statistics and Mazur bounds of the pair-flip and TL models."""
    res = ScenarioResult()
    sizes = cfg.sizes or (2, 4, 6, 8, 10)
    rows = []
    bulk = {}
    boundary = {}
    dmax = []
    for n in sizes:
        pf, stats = enumerate_pf_krylov(n, with_generators=False)
        res.record_decomposition(f"pair_flip_N{n}", pf)
        dmax.append(stats.D_max)
        bulk[n] = mazur_bound_pf(sz_diagonal(n // 2, n), pf)
        boundary[n] = mazur_bound_pf(sz_diagonal(1, n), pf)
        rows.append((n, stats.K, stats.D_max, np.log(stats.D_max) / (n * np.log(3)), bulk[n], boundary[n]))
    exponent = fit_fragmentation_exponent(sizes, dmax) if len(sizes) > 1 else float("nan")
    res.tables["krylov_stats"] = (["N", "K", "D_max", "log3_Dmax_over_N", "M_PF_bulk", "M_PF_boundary"], rows)
    res.summary.append({"observable": "fragmentation_exponent", "value": exponent})
    frac = np.array(dmax, dtype=float) / LOCAL_DIM ** np.array(sizes, dtype=float)
    res.check("dmax_fraction_decreasing", "fragmentation: D_max/3^N decays", float(np.diff(frac).max(initial=-1.0)), 0.0, bool(np.all(np.diff(frac) < 0)))
    scaled = np.array([bulk[n] * n for n in sizes if n >= 4])
    if scaled.size:
        spread = float((scaled.max() - scaled.min()) / scaled.mean())
        res.check("bulk_inverse_N", "observables: bulk M_PF scales as 1/N", spread, 0.2, spread <= 0.2)
    ratio = np.array([boundary[n] / bulk[n] for n in sizes if n >= 4])
    res.check("boundary_persists", "observables: boundary bound decays slower than the bulk", float(np.diff(ratio).min(initial=1.0)), 0.0, bool(np.all(np.diff(ratio) > 0)))
    tl_rows = []
    for n in (m for m in sizes if 4 <= m <= 8):
        pf_dec, _ = enumerate_pf_krylov(n, with_generators=False)
        diags = [sz_diagonal(site, n) for site in range(1, n + 1)]
        m_tl_all = mazur_bound_tl_diagonal(diags, n, rng=cfg.seed)
        for site, (d, m_tl) in enumerate(zip(diags, m_tl_all), start=1):
            m_pf = mazur_bound_pf(d, pf_dec)
            tl_rows.append((n, site, m_pf, float(m_tl)))
            res.check(f"tl_ge_pf_N{n}_site{site}", "observables: M_TL >= M_PF >= 0", m_tl - m_pf, 0.0, m_tl >= m_pf - 1e-12 and m_pf >= 0)
    if tl_rows:
        res.tables["mazur_bounds"] = (["N", "site", "M_PF", "M_TL"], tl_rows)
    return res


SCENARIOS: dict[str, tuple[str, str, Callable, ExperimentConfig]] = {
    "fig3": (
        "Fig. 3",
        "density-matrix inter-sector block decay under dephasing",
        run_fig3,
        ExperimentConfig("fig3", n_sites=4, channel="dephasing", gamma=1.0, n_steps=60, initial_state="two_degenerate"),
    ),
    "fig4": (
        "Fig. 4",
        "bulk S^z autocorrelation for dephasing, structure-preserving and spin-flip noise",
        run_fig4,
        ExperimentConfig("fig4", n_sites=6, gamma=0.3, n_steps=200),
    ),
    "fig5": (
        "Fig. 5",
        "stationary coherences between degenerate Krylov copies",
        run_fig5,
        ExperimentConfig("fig5", n_sites=4, channel="structure_preserving", gamma=0.3, n_steps=300, initial_state="two_degenerate"),
    ),
    "fig6": (
        "Fig. 6",
        "operator-space entanglement and number entropy under dephasing",
        run_fig6,
        ExperimentConfig("fig6", n_sites=4, gamma=1.0, n_steps=60, n_realizations=10000, sizes=(8, 12, 16)),
    ),
    "fig7": (
        "Fig. 7",
        "logarithmic negativity under structure-preserving noise",
        run_fig7,
        ExperimentConfig("fig7", n_sites=4, channel="structure_preserving", gamma=0.3, n_steps=400, sizes=(4, 6, 8)),
    ),
    "fig8": (
        "Fig. 8",
        "Krylov-space statistics and Mazur bounds",
        run_fig8,
        ExperimentConfig("fig8", n_sites=10, sizes=(2, 4, 6, 8, 10)),
    ),
}


def default_configs() -> dict[str, ExperimentConfig]:
    return {k: v[3] for k, v in SCENARIOS.items()}
