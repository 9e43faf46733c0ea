"""Experiment drivers: seeded batch-parallel runs and their output files.

Walkers are processed in fixed batches of ``BATCH_SIZE``; batch b draws its
initial conditions from SeedSequence(seed, spawn_key=(b, 0)) and its kick
noise from spawn_key=(b, 1).  The partition and the reduction order depend
only on (seed, n_walkers), never on the worker count, so runs are exactly
reproducible.  A classical (kappa = 0) companion run re-derives the same
initial conditions, which pairs it with the kappa run sample by sample for
the linear-quantum-correction difference.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .dynamics import (
    EvolutionConfig,
    SiteKickLaw,
    WalkerEnsemble,
    evolve_ensemble,
    three_atom_site_law,
    two_atom_site_law,
)
from .estimators import (
    ObservableSeries,
    SignCollapseError,
    jackknife_from_blocks,
    lqc_from_blocks,
)
from .lattice import LatticeConfig
from .model import ModelSpec
from .noise import NoiseLaw, solve_noise_law
from .oracle import (
    GridWavefunction,
    gaussian_wavefunction,
    make_grid,
    schrodinger_evolve,
    two_site_vacuum_wavefunction,
)
from .states import GaussianStateSpec, LatticeVacuum, lattice_vacuum_spec

BATCH_SIZE = 1 << 16

#: minimal |<sigma>|*sqrt(M) before estimates are considered collapsed
SIGN_NOISE_FLOOR = 5.0

CSV_COLUMNS = ("time", "observable", "value", "error", "mean_sign",
               "kappa", "n_walkers", "seed")


def obs_sum_x2(x, p, model):
    """sum_n x_n^2 per walker: <Q^2> at one DOF, sum_k |phi_hat_k|^2 on the chain."""
    del p, model
    return np.sum(x * x, axis=1)


OBSERVABLES = {"q2": obs_sum_x2, "phi2_sum": obs_sum_x2}

SITE_LAWS = {"two_atom": two_atom_site_law, "three_atom": three_atom_site_law}


def batch_rng(seed: int, batch_index: int, purpose: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(batch_index, purpose))
    return np.random.Generator(np.random.PCG64(ss))


def batch_layout(n_walkers: int, batch_size: int = BATCH_SIZE):
    """Fixed partition of walker indices into batches."""
    if n_walkers < 1:
        raise ValueError("need at least one walker")
    sizes = [batch_size] * (n_walkers // batch_size)
    if n_walkers % batch_size:
        sizes.append(n_walkers % batch_size)
    return sizes


@dataclass(frozen=True)
class RunSettings:
    """Evolution and sampling settings of one signed run."""

    dt: float
    t_final: float
    kappa: float
    level: int = 2
    epsilon: float = 0.45
    pattern: tuple | None = None
    record_stride: int = 10
    site_law: str = "two_atom"
    integrator: str = "paper"
    n_walkers: int = 100_000
    seed: int = 0
    workers: int = 1
    n_blocks: int = 50
    observable: str = "q2"

    def record_times(self) -> np.ndarray:
        n = int(round(self.t_final / self.dt))
        steps = np.arange(0, n + 1, self.record_stride)
        if steps[-1] != n:
            steps = np.append(steps, n)
        return steps * self.dt

    def noise_law(self, model: ModelSpec) -> NoiseLaw:
        c3 = self.kappa * model.kick_coupling * model.hbar**2 * self.dt / 4.0
        return solve_noise_law(self.level, self.epsilon, c3, self.pattern)

    def evolution_config(self, model: ModelSpec) -> EvolutionConfig:
        site = SITE_LAWS[self.site_law]() if model.ndof > 1 else None
        return EvolutionConfig(
            dt=self.dt,
            t_final=self.t_final,
            kappa=self.kappa,
            law=self.noise_law(model),
            record_times=self.record_times(),
            kick_site_law=site,
            integrator=self.integrator,
        )


@dataclass
class BatchSums:
    """Stacked per-batch tallies of a signed run (reduction in batch order)."""

    times: np.ndarray
    counts: np.ndarray                 # (n_batches,)
    sign_sums: np.ndarray              # (n_batches, n_rec)
    neg_counts: np.ndarray             # (n_batches, n_rec)
    signed_sums: np.ndarray            # (n_batches, n_rec)
    observable: str
    kappa: float
    seed: int
    law: NoiseLaw
    dt: float

    @property
    def n_walkers(self) -> int:
        return int(self.counts.sum())

    def mean_sign(self) -> np.ndarray:
        return self.sign_sums.sum(axis=0) / self.n_walkers

    def neg_fraction(self) -> np.ndarray:
        return self.neg_counts.sum(axis=0) / self.n_walkers

    def group_blocks(self, n_blocks: int):
        """Group batches into jackknife blocks (batch order preserved)."""
        n_b = self.counts.size
        n_blocks = min(n_blocks, n_b)
        groups = np.array_split(np.arange(n_b), n_blocks)
        sign = np.stack([self.sign_sums[g].sum(axis=0) for g in groups])
        vals = np.stack([self.signed_sums[g].sum(axis=0) for g in groups])
        cnts = np.array([self.counts[g].sum() for g in groups])
        return sign, vals, cnts


def _sample_batch(state, rng: np.random.Generator, n: int):
    if isinstance(state, GaussianStateSpec):
        from .states import sample_xp

        return sample_xp(state, rng, n)
    if isinstance(state, LatticeVacuum):
        return state.sample_xp(rng, n)
    raise TypeError(f"unknown state spec {type(state)!r}")


def _batch_task(args):
    (model, state, settings, batch_index, batch_count) = args
    rng_init = batch_rng(settings.seed, batch_index, 0)
    x, p = _sample_batch(state, rng_init, batch_count)
    ens = WalkerEnsemble.from_xp(x, p)
    config = settings.evolution_config(model)
    rng_kick = batch_rng(settings.seed, batch_index, 1)
    obs_fn = OBSERVABLES[settings.observable]
    record, _ = evolve_ensemble(
        ens, config, model, {settings.observable: obs_fn}, rng_kick,
        record_mode="blocked",
    )
    return (
        record.sign_sums,
        record.neg_counts,
        record.signed_sums[settings.observable],
        batch_count,
    )


def run_signed(model: ModelSpec, state, settings: RunSettings) -> BatchSums:
    """Evolve a full signed ensemble in batches; see the module docstring."""
    sizes = batch_layout(settings.n_walkers)
    tasks = [(model, state, settings, b, n) for b, n in enumerate(sizes)]
    if settings.workers > 1:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            results = list(pool.map(_batch_task, tasks, chunksize=1))
    else:
        results = [_batch_task(t) for t in tasks]
    sign_sums = np.stack([r[0] for r in results])
    neg_counts = np.stack([r[1] for r in results])
    signed_sums = np.stack([r[2] for r in results])
    counts = np.array([r[3] for r in results])
    return BatchSums(
        times=settings.record_times(),
        counts=counts,
        sign_sums=sign_sums,
        neg_counts=neg_counts,
        signed_sums=signed_sums,
        observable=settings.observable,
        kappa=settings.kappa,
        seed=settings.seed,
        law=settings.noise_law(model),
        dt=settings.dt,
    )


def series_from_sums(
    sums: BatchSums,
    n_blocks: int = 50,
    min_sign_sn: float = SIGN_NOISE_FLOOR,
    metadata: dict | None = None,
) -> ObservableSeries:
    """Jackknifed series; truncated at the first sign-collapsed time."""
    sign_blocks, value_blocks, _ = sums.group_blocks(n_blocks)
    mean_sign = sums.mean_sign()
    m = sums.n_walkers
    n_rec = sums.times.size
    values = np.full(n_rec, np.nan)
    errors = np.full(n_rec, np.nan)
    cut = n_rec
    for i in range(n_rec):
        if abs(mean_sign[i]) * math.sqrt(m) < min_sign_sn:
            cut = i
            break
        try:
            values[i], errors[i] = jackknife_from_blocks(
                sign_blocks[:, i], value_blocks[:, i]
            )
        except SignCollapseError:
            cut = i
            break
    meta = dict(metadata or {})
    meta.update(seed=sums.seed, observable=sums.observable,
                norm=sums.law.norm, dt=sums.dt)
    if cut < n_rec:
        meta["collapsed_at"] = float(sums.times[cut])
    return ObservableSeries(
        times=sums.times[:cut],
        values=values[:cut],
        errors=errors[:cut],
        mean_sign=mean_sign[:cut],
        kappa=sums.kappa,
        sample_size=m,
        name=sums.observable,
        metadata=meta,
    )


def lqc_series_paired(
    classical: BatchSums, kappa_run: BatchSums, n_blocks: int = 50,
    min_sign_sn: float = SIGN_NOISE_FLOOR,
) -> ObservableSeries:
    """LQC series with paired-sample jackknife (shared walker partition)."""
    if not np.array_equal(classical.times, kappa_run.times):
        raise ValueError("paired runs must share the record grid")
    if classical.n_walkers != kappa_run.n_walkers:
        raise ValueError("paired runs must share the walker count")
    kappa = kappa_run.kappa
    cs, cv, cnt = classical.group_blocks(n_blocks)
    ks, kv, _ = kappa_run.group_blocks(n_blocks)
    mean_sign = kappa_run.mean_sign()
    m = kappa_run.n_walkers
    n_rec = classical.times.size
    values = np.full(n_rec, np.nan)
    errors = np.full(n_rec, np.nan)
    cut = n_rec
    for i in range(n_rec):
        if abs(mean_sign[i]) * math.sqrt(m) < min_sign_sn:
            cut = i
            break
        try:
            values[i], errors[i] = lqc_from_blocks(
                cs[:, i], cv[:, i], ks[:, i], kv[:, i], cnt, kappa
            )
        except SignCollapseError:
            cut = i
            break
    meta = {
        "estimator": "lqc", "paired": True, "kappa": kappa,
        "seed": kappa_run.seed, "observable": kappa_run.observable,
    }
    if cut < n_rec:
        meta["collapsed_at"] = float(classical.times[cut])
    return ObservableSeries(
        times=classical.times[:cut],
        values=values[:cut],
        errors=errors[:cut],
        mean_sign=mean_sign[:cut],
        kappa=kappa,
        sample_size=m,
        name=kappa_run.observable,
        metadata=meta,
    )


def run_paired_lqc(model: ModelSpec, state, settings: RunSettings):
    """Classical and kappa runs from identical initial conditions, plus LQC.

    Returns (classical_series, kappa_series, lqc_series).
    """
    if not 0.0 < settings.kappa <= 1.0:
        raise ValueError("LQC needs kappa in (0, 1]")
    classical = run_signed(model, state, _with(settings, kappa=0.0))
    kappa_run = run_signed(model, state, settings)
    cl_series = series_from_sums(classical, settings.n_blocks)
    k_series = series_from_sums(kappa_run, settings.n_blocks)
    lqc = lqc_series_paired(classical, kappa_run, settings.n_blocks)
    return cl_series, k_series, lqc


def _with(settings: RunSettings, **changes) -> RunSettings:
    from dataclasses import replace

    return replace(settings, **changes)


# ---------------------------------------------------------------------------
# oracle experiments
# ---------------------------------------------------------------------------

def oracle_series_1d(
    model: ModelSpec,
    sigma_x: float,
    record_times,
    dt: float = 1e-3,
    half_width: float = 10.0,
    n_points: int = 512,
    boundary_tol: float = 1e-10,
) -> ObservableSeries:
    """Grid-Schrodinger <Q^2>(t) for a centered pure Gaussian initial state."""
    x = make_grid(half_width, n_points)
    psi0 = gaussian_wavefunction(x, sigma_x, hbar=model.hbar)
    record_times = np.asarray(record_times, float)
    result = schrodinger_evolve(
        psi0, model, dt, float(record_times.max()), record_times,
        boundary_tol=boundary_tol,
    )
    return ObservableSeries(
        times=result.times,
        values=result.q2,
        errors=np.zeros_like(result.q2),
        mean_sign=np.ones_like(result.q2),
        kappa=1.0,
        sample_size=0,
        name="q2",
        metadata={
            "estimator": "schrodinger",
            "norm_drift": result.norm_drift,
            "boundary_max": result.boundary_max,
            "grid": n_points,
            "half_width": half_width,
            "dt": dt,
        },
    )


def oracle_series_two_site(
    config: LatticeConfig,
    record_times,
    dt: float = 2.5e-3,
    half_width: float = 8.0,
    n_points: int = 256,
    boundary_tol: float = 1e-10,
) -> ObservableSeries:
    """2D grid-Schrodinger quench oracle for the N = 2 chain."""
    if config.n_sites != 2:
        raise ValueError("two-site oracle requires n_sites = 2")
    from .lattice import dispersion

    w_plus = dispersion(2, config.spacing, config.mu2_pre, 0).omega
    w_minus = dispersion(2, config.spacing, config.mu2_pre, 1).omega
    x = make_grid(half_width, n_points)
    psi0 = two_site_vacuum_wavefunction(x, w_plus, w_minus, config.hbar)
    record_times = np.asarray(record_times, float)
    result = schrodinger_evolve(
        psi0, config.model_post(), dt, float(record_times.max()), record_times,
        boundary_tol=boundary_tol,
    )
    return ObservableSeries(
        times=result.times,
        values=result.q2,
        errors=np.zeros_like(result.q2),
        mean_sign=np.ones_like(result.q2),
        kappa=1.0,
        sample_size=0,
        name="phi2_sum",
        metadata={
            "estimator": "schrodinger2d",
            "norm_drift": result.norm_drift,
            "boundary_max": result.boundary_max,
            "grid": n_points,
            "half_width": half_width,
            "dt": dt,
        },
    )


# ---------------------------------------------------------------------------
# quench experiment
# ---------------------------------------------------------------------------

def run_quench(
    config: LatticeConfig,
    settings: RunSettings,
    with_oracle: bool | None = None,
    oracle_kwargs: dict | None = None,
) -> dict:
    """Paired classical/kappa/LQC series for the mass quench.

    The initial ensemble is the free vacuum of the positive-mu2 chain; the
    evolution uses the sign-flipped chain.  For N = 2 (default) the exact 2D
    grid solution is added under the key ``oracle``.
    """
    model = config.model_post()
    vacuum = lattice_vacuum_spec(config.model_pre())
    settings = _with(settings, observable="phi2_sum")
    cl, kap, lqc = run_paired_lqc(model, vacuum, settings)
    out = {"classical": cl, "kappa": kap, "lqc": lqc}
    if with_oracle is None:
        with_oracle = config.n_sites == 2
    if with_oracle:
        out["oracle"] = oracle_series_two_site(
            config, settings.record_times(), **(oracle_kwargs or {})
        )
    return out


# ---------------------------------------------------------------------------
# output files
# ---------------------------------------------------------------------------

def write_series_csv(path, series_list) -> None:
    """One CSV with the fixed estimator column schema for any number of series."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for series in series_list:
            seed = series.metadata.get("seed", "")
            for i in range(len(series.times)):
                writer.writerow(
                    (
                        repr(float(series.times[i])),
                        series.name,
                        repr(float(series.values[i])),
                        repr(float(series.errors[i])),
                        repr(float(series.mean_sign[i])),
                        repr(float(series.kappa)),
                        series.sample_size,
                        seed,
                    )
                )


def law_metadata(law: NoiseLaw) -> dict:
    return {
        "level": law.level,
        "epsilon": law.epsilon,
        "abscissae": law.abscissae.tolist(),
        "weights": law.weights.tolist(),
        "norm": law.norm,
        "c3": law.c3,
        "condition_number": law.condition_number,
    }


def write_metadata(path, manifest_dict: dict, extra: dict | None = None) -> None:
    payload = {
        "version": __version__,
        "batch_size": BATCH_SIZE,
        "manifest": manifest_dict,
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def compare_series(reference: ObservableSeries, candidate: ObservableSeries):
    """Align two series on their common times; returns rows of differences."""
    common, ref_idx, cand_idx = np.intersect1d(
        reference.times, candidate.times, return_indices=True
    )
    rows = []
    for t, i, j in zip(common, ref_idx, cand_idx):
        diff = candidate.values[j] - reference.values[i]
        err = math.hypot(candidate.errors[j], reference.errors[i])
        rows.append(
            {
                "time": float(t),
                "reference": float(reference.values[i]),
                "candidate": float(candidate.values[j]),
                "difference": float(diff),
                "error": float(err),
                "sigma_distance": float(abs(diff) / err) if err > 0 else math.inf,
                "relative": float(diff / reference.values[i])
                if reference.values[i] != 0
                else math.inf,
            }
        )
    return rows
