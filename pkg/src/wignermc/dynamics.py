"""Signed-walker evolution: symplectic drift plus the stochastic kick process.

One time step applies the first-order splitting

    x' = x + dt p/m
    p' = p - V'(x') dt          (force at the midpoint time for ramps)

followed by a single draw from the sign-extended kick law shared by all
coordinates: with probability 1/norm nothing happens, otherwise every
momentum gets eta * cbrt(x'_n) * xi_n and the walker sign flips when the
draw lands on the mirrored branch.  A leapfrog integrator is available for
kappa = 0 runs only (the kick-law matching is derived for the splitting
above).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import ModelSpec, PhasePoint, force, force_unchecked
from .noise import NoiseLaw, SignedTransition, sample_transition, transition_table

PAPER_INTEGRATOR = "paper"
LEAPFROG_INTEGRATOR = "leapfrog"


class IntegrationBlowupError(RuntimeError):
    """A walker left the finite phase-space region."""

    def __init__(self, walker_ids, t: float):
        self.walker_ids = np.atleast_1d(walker_ids)
        self.t = t
        super().__init__(
            f"non-finite walker state at t={t:.6g} "
            f"(walker ids {self.walker_ids[:8].tolist()}...)"
        )


# ---------------------------------------------------------------------------
# site factor (xi) laws for the multi-DOF kick
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SiteKickLaw:
    """Discrete law of the per-coordinate factors xi: <xi> = 0, <xi^3> = 1."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, float)
        q = np.asarray(self.probs, float)
        if v.shape != q.shape or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-12:
            raise ValueError("probs must be a distribution over values")
        if abs(np.dot(q, v)) > 1e-12 or abs(np.dot(q, v**3) - 1.0) > 1e-12:
            raise ValueError("site law must satisfy <xi> = 0 and <xi^3> = 1")

    def moment(self, n: int) -> float:
        return float(np.dot(self.probs, np.asarray(self.values, float) ** n))

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.probs)


def two_atom_site_law() -> SiteKickLaw:
    """xi in {4^(1/3), -4^(1/3)/2} w.p. {1/3, 2/3}: the minimal two-moment law."""
    a = 4.0 ** (1.0 / 3.0)
    return SiteKickLaw(values=np.array([a, -a / 2.0]), probs=np.array([1 / 3, 2 / 3]))


def three_atom_site_law(scale: float = 1.6) -> SiteKickLaw:
    """Three-atom law additionally enforcing <xi^5> = 0.

    Solves the 3x3 moment system on the node pattern (sqrt(2), -1, -2)*scale
    and parks the remaining probability on a xi = 0 atom; ``scale`` must be
    large enough that the solved probabilities sum below one.
    """
    nodes = scale * np.array([math.sqrt(2.0), -1.0, -2.0])
    m = np.vstack([nodes, nodes**3, nodes**5])
    q = np.linalg.solve(m, np.array([0.0, 1.0, 0.0]))
    if np.any(q <= 0.0) or q.sum() >= 1.0:
        raise ValueError(f"scale {scale} gives no valid probabilities: {q}")
    return SiteKickLaw(
        values=np.append(nodes, 0.0), probs=np.append(q, 1.0 - q.sum())
    )


def sample_site_factors(law: SiteKickLaw, rng: np.random.Generator, shape):
    """Draw xi factors of the given shape."""
    u = rng.random(shape)
    idx = np.searchsorted(law.cumulative(), u, side="right")
    idx = np.minimum(idx, len(law.values) - 1)
    return np.asarray(law.values, float)[idx]


# ---------------------------------------------------------------------------
# walkers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SignedWalker:
    """A phase-space point carrying an Ising sign (initially +1)."""

    point: PhasePoint
    sign: int = 1

    def __post_init__(self) -> None:
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +-1")


@dataclass
class WalkerEnsemble:
    """Struct-of-arrays ensemble: x, p of shape (M, D), signs of shape (M,)."""

    x: np.ndarray
    p: np.ndarray
    sign: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        self.x = np.atleast_2d(np.asarray(self.x, float))
        self.p = np.atleast_2d(np.asarray(self.p, float))
        self.sign = np.asarray(self.sign, np.int8)
        if self.x.shape != self.p.shape or self.sign.shape != (self.x.shape[0],):
            raise ValueError("inconsistent ensemble shapes")

    @property
    def size(self) -> int:
        return self.x.shape[0]

    @property
    def ndof(self) -> int:
        return self.x.shape[1]

    @classmethod
    def from_xp(cls, x: np.ndarray, p: np.ndarray, t: float = 0.0):
        x = np.atleast_2d(np.asarray(x, float))
        return cls(x=x, p=p, sign=np.ones(x.shape[0], np.int8), t=t)


@dataclass(frozen=True)
class EvolutionConfig:
    """Everything the stepper needs besides the model and the walkers."""

    dt: float
    t_final: float
    kappa: float
    law: NoiseLaw
    record_times: np.ndarray
    kick_site_law: SiteKickLaw | None = None
    integrator: str = PAPER_INTEGRATOR

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")
        rt = np.asarray(self.record_times, float)
        object.__setattr__(self, "record_times", rt)
        if rt.size == 0 or rt.min() < 0 or rt.max() > self.t_final + 1e-12:
            raise ValueError("record_times must lie inside [0, t_final]")
        if self.integrator not in (PAPER_INTEGRATOR, LEAPFROG_INTEGRATOR):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.integrator == LEAPFROG_INTEGRATOR and not self.law.is_degenerate:
            raise ValueError("leapfrog is restricted to kappa = 0 (no kicks)")

    def record_steps(self) -> np.ndarray:
        steps = np.rint(self.record_times / self.dt).astype(int)
        if np.any(np.abs(steps * self.dt - self.record_times) > 1e-9):
            raise ValueError("record_times must sit on the dt grid")
        return steps

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


# ---------------------------------------------------------------------------
# single-walker operations (the contract-level API)
# ---------------------------------------------------------------------------

def drift_step(
    walker: SignedWalker, dt: float, model: ModelSpec, t: float | None = None
) -> SignedWalker:
    """One deterministic step: position first, then momentum with the force
    at the updated position (time-dependent terms sampled at t + dt/2)."""
    pt = walker.point
    t0 = pt.t if t is None else t
    x_new = pt.x + dt * pt.p / model.m
    p_new = pt.p + dt * force(model, x_new, t=t0 + 0.5 * dt)
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(p_new))):
        raise IntegrationBlowupError(walker_ids=0, t=t0)
    return SignedWalker(point=PhasePoint(x=x_new, p=p_new, t=t0 + dt), sign=walker.sign)


def kick_step(
    walker: SignedWalker,
    law: NoiseLaw,
    model: ModelSpec,
    kick_site_law: SiteKickLaw | None,
    rng: np.random.Generator,
) -> SignedWalker:
    """Apply one draw of the sign-extended kick law to every momentum."""
    if law.is_degenerate:
        return walker
    trans: SignedTransition = sample_transition(law, rng)
    if not trans.kicked:
        return walker
    pt = walker.point
    amp = np.cbrt(pt.x)
    if model.ndof > 1:
        if kick_site_law is None:
            raise ValueError("multi-DOF kick requires a site law")
        xi = sample_site_factors(kick_site_law, rng, pt.x.shape)
    else:
        xi = 1.0
    p_new = pt.p + trans.eta * amp * xi
    sign = -walker.sign if trans.sign_flip else walker.sign
    return SignedWalker(point=PhasePoint(x=pt.x, p=p_new, t=pt.t), sign=sign)


# ---------------------------------------------------------------------------
# vectorized ensemble evolution
# ---------------------------------------------------------------------------

@dataclass
class EnsembleRecord:
    """Per-record-time tallies of one evolved batch.

    Blocked mode keeps only the sums needed downstream (signed observable
    sums, sign sums, negative counts); raw mode additionally stores the
    per-walker observable values and signs for estimator-side jackknife.
    """

    times: np.ndarray
    count: int
    sign_sums: np.ndarray                  # (n_rec,)
    neg_counts: np.ndarray                 # (n_rec,)
    signed_sums: dict = field(default_factory=dict)   # name -> (n_rec,)
    values: dict = field(default_factory=dict)        # raw mode: name -> (n_rec, M)
    signs: np.ndarray | None = None                   # raw mode: (n_rec, M)
    flip_counts: np.ndarray | None = None             # (M,) kick-flip tally

    def mean_sign(self) -> np.ndarray:
        return self.sign_sums / self.count


def _drift_batch(ens: WalkerEnsemble, model: ModelSpec, dt: float) -> None:
    ens.x += (dt / model.m) * ens.p
    f = force_unchecked(model, ens.x, t=ens.t + 0.5 * dt)
    f *= dt
    ens.p += f
    ens.t += dt


def _leapfrog_batch(ens: WalkerEnsemble, model: ModelSpec, dt: float) -> None:
    p_half = ens.p + 0.5 * dt * force_unchecked(model, ens.x, t=ens.t)
    ens.x += (dt / model.m) * p_half
    ens.p = p_half + 0.5 * dt * force_unchecked(model, ens.x, t=ens.t + dt)
    ens.t += dt


def _kick_batch(
    ens: WalkerEnsemble,
    law: NoiseLaw,
    site_law: SiteKickLaw | None,
    edges: np.ndarray,
    etas: np.ndarray,
    flips: np.ndarray,
    rng: np.random.Generator,
    flip_counts: np.ndarray,
) -> None:
    u = rng.random(ens.size)
    kicked = u > edges[0]
    idx = np.nonzero(kicked)[0]
    if idx.size == 0:
        return
    k = np.searchsorted(edges, u[idx], side="right")
    k = np.minimum(k, len(etas) - 1)
    eta = etas[k]
    if ens.ndof > 1:
        xi = sample_site_factors(site_law, rng, (idx.size, ens.ndof))
        ens.p[idx] += eta[:, None] * np.cbrt(ens.x[idx]) * xi
    else:
        ens.p[idx, 0] += eta * np.cbrt(ens.x[idx, 0])
    flipped = idx[flips[k]]
    ens.sign[flipped] = -ens.sign[flipped]
    flip_counts[flipped] += 1


def evolve_ensemble(
    ensemble: WalkerEnsemble,
    config: EvolutionConfig,
    model: ModelSpec,
    observables: dict,
    rng: np.random.Generator,
    record_mode: str = "raw",
) -> tuple[EnsembleRecord, WalkerEnsemble]:
    """Evolve one batch, recording observables at the configured times.

    ``observables`` maps names to callables f(x, p, model) -> (M,) arrays.
    Deterministic given the rng state; walkers are never dropped (a
    non-finite state raises IntegrationBlowupError).
    """
    if ensemble.ndof != model.ndof:
        raise ValueError("ensemble and model degrees of freedom differ")
    if record_mode not in ("raw", "blocked"):
        raise ValueError(f"unknown record mode {record_mode!r}")
    if model.ndof > 1 and not config.law.is_degenerate and config.kick_site_law is None:
        raise ValueError("multi-DOF kicks require kick_site_law")

    steps = config.record_steps()
    recorders = {int(s): i for i, s in enumerate(steps)}
    n_rec = steps.size
    m = ensemble.size

    record = EnsembleRecord(
        times=config.record_times.copy(),
        count=m,
        sign_sums=np.zeros(n_rec),
        neg_counts=np.zeros(n_rec, dtype=np.int64),
        signed_sums={name: np.zeros(n_rec) for name in observables},
        flip_counts=np.zeros(m, dtype=np.int32),
    )
    if record_mode == "raw":
        record.values = {name: np.empty((n_rec, m)) for name in observables}
        record.signs = np.empty((n_rec, m), dtype=np.int8)

    edges, etas, flips = transition_table(config.law)
    kicks_active = not config.law.is_degenerate

    def take_record(step_idx: int) -> None:
        i = recorders[step_idx]
        if not (np.all(np.isfinite(ensemble.x)) and np.all(np.isfinite(ensemble.p))):
            bad = np.nonzero(
                ~(np.isfinite(ensemble.x).all(axis=1) & np.isfinite(ensemble.p).all(axis=1))
            )[0]
            raise IntegrationBlowupError(walker_ids=bad, t=ensemble.t)
        s = ensemble.sign.astype(float)
        record.sign_sums[i] = s.sum()
        record.neg_counts[i] = int(np.count_nonzero(ensemble.sign < 0))
        for name, fn in observables.items():
            vals = fn(ensemble.x, ensemble.p, model)
            record.signed_sums[name][i] = float(np.dot(s, vals))
            if record_mode == "raw":
                record.values[name][i] = vals
        if record_mode == "raw":
            record.signs[i] = ensemble.sign

    if 0 in recorders:
        take_record(0)
    stepper = _drift_batch if config.integrator == PAPER_INTEGRATOR else _leapfrog_batch
    for step in range(1, config.n_steps + 1):
        stepper(ensemble, model, config.dt)
        if kicks_active:
            _kick_batch(
                ensemble, config.law, config.kick_site_law,
                edges, etas, flips, rng, record.flip_counts,
            )
        if step in recorders:
            take_record(step)
    return record, ensemble
