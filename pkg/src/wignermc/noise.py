"""Coarse-grained kick laws for the momentum jump process.

A level-N law is an atomic approximation to the (non positive definite)
kick distribution

    rho_N(eta) = delta(eta) + sum_i (gamma_i/eps^3) *
                 [delta(eta - eps*alpha_i) - delta(eta + eps*alpha_i)]

whose odd moments <eta^(2p+1)> = 2 * sum_i gamma_i alpha_i^(2p+1) eps^(2p-2)
equal c3 at p = 1 and vanish for 2 <= p <= N.  The sign-extended positive
law rho_hat draws Stay with probability 1/norm and a kick eps*alpha_i*mu
with probability gamma_i/(eps^3*norm) for each mu = +-1, flipping the
walker's Ising sign when mu = -1; norm = 1 + 2*sum_i gamma_i/eps^3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: default abscissa patterns per level: order-1 nodes of alternating sign
DEFAULT_PATTERNS = {
    1: (1.0,),
    2: (1.0, -np.sqrt(2.0)),
    3: (1.0, -np.sqrt(2.0), np.sqrt(3.0)),
}

#: per-step total kick probability above which first-order-in-dt matching
#: of the jump process to the evolution equation is considered unreliable
MAX_KICK_FRACTION = 0.1


class InfeasiblePatternError(ValueError):
    """The moment system has no positive-weight solution for this pattern."""


class KickProbabilityError(ValueError):
    """Per-step kick probability too large; reduce dt (or increase eps)."""


@dataclass(frozen=True)
class NoiseLaw:
    """Solved level-N kick law (immutable; safe to share across threads)."""

    level: int
    epsilon: float
    abscissae: np.ndarray     # alpha_i
    weights: np.ndarray       # gamma_i >= 0, each proportional to c3
    c3: float                 # target third moment, kappa*lam*hbar^2*dt/4
    norm: float               # 1 + 2 sum gamma_i / eps^3
    condition_number: float   # of the moment system

    @property
    def stay_probability(self) -> float:
        return 1.0 / self.norm

    @property
    def kick_probs(self) -> np.ndarray:
        """Probability gamma_i/(eps^3*norm) of each directed kick atom."""
        return self.weights / (self.epsilon**3 * self.norm)

    @property
    def is_degenerate(self) -> bool:
        """True for the classical limit c3 = 0 (Stay with probability one)."""
        return self.norm == 1.0


@dataclass(frozen=True)
class SignedTransition:
    """Outcome of one momentum-kick draw from the sign-extended law."""

    kicked: bool
    atom: int            # abscissa index, -1 for Stay
    direction: int       # +-1, 0 for Stay
    eta: float           # eps*alpha_i*direction, 0.0 for Stay
    sign_flip: bool      # True iff direction == -1


def solve_noise_law(
    level: int,
    epsilon: float,
    c3: float,
    abscissa_pattern=None,
    max_kick_fraction: float = MAX_KICK_FRACTION,
) -> NoiseLaw:
    """Solve the (level x level) moment system for the weights gamma_i.

    The system is homogeneous in eps for p >= 2, so the weights depend only
    on the pattern and c3 (linearly in c3); raises InfeasiblePatternError
    if any solved weight is negative, and KickProbabilityError if the
    per-step kick probability sum(gamma_i)/eps^3 exceeds ``max_kick_fraction``.
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if c3 < 0:
        raise ValueError("c3 must be non-negative")
    if abscissa_pattern is None:
        if level not in DEFAULT_PATTERNS:
            raise ValueError(f"no default pattern for level {level}")
        abscissa_pattern = DEFAULT_PATTERNS[level]
    alphas = np.asarray(abscissa_pattern, float)
    if alphas.shape != (level,):
        raise ValueError("pattern must supply exactly `level` abscissae")
    if np.any(alphas == 0.0):
        raise ValueError("abscissae must be nonzero")

    # rows p = 1..level of 2*gamma_i*alpha_i^(2p+1); the eps^(2(p-1)) factor
    # multiplies a zero right-hand side for p >= 2 and is dropped
    a = np.vstack([2.0 * alphas ** (2 * p + 1) for p in range(1, level + 1)])
    rhs = np.zeros(level)
    rhs[0] = c3
    try:
        cond = float(np.linalg.cond(a))
        gammas = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as err:
        raise InfeasiblePatternError(f"singular moment system: {err}") from err

    if c3 == 0.0:
        gammas = np.zeros(level)
    elif np.any(gammas <= 0.0):
        raise InfeasiblePatternError(
            f"pattern {alphas.tolist()} gives non-positive weights {gammas.tolist()}"
        )

    kick_fraction = float(gammas.sum()) / epsilon**3
    if kick_fraction >= max_kick_fraction:
        raise KickProbabilityError(
            f"sum(gamma)/eps^3 = {kick_fraction:.3g} >= {max_kick_fraction}; "
            "reduce dt"
        )
    norm = 1.0 + 2.0 * kick_fraction
    return NoiseLaw(
        level=level,
        epsilon=float(epsilon),
        abscissae=alphas,
        weights=gammas,
        c3=float(c3),
        norm=norm,
        condition_number=cond,
    )


def verify_moments(law: NoiseLaw, p_max: int) -> np.ndarray:
    """Residuals |mu_{2p+1} - target_p| for p = 1..p_max by direct summation.

    Targets are c3 at p = 1 and 0 for 2 <= p <= level; above the level the
    raw moment value is reported (unconstrained).
    """
    if p_max < law.level:
        raise ValueError("p_max must be >= level")
    res = np.empty(p_max)
    for p in range(1, p_max + 1):
        mom = 2.0 * np.sum(
            law.weights * law.abscissae ** (2 * p + 1)
        ) * law.epsilon ** (2 * (p - 1))
        target = law.c3 if p == 1 else 0.0
        res[p - 1] = abs(mom - target) if p <= law.level else abs(mom)
    return res


def transition_table(law: NoiseLaw):
    """Cumulative probabilities and directed kick values of rho_hat.

    Returns (edges, etas, flips): ``edges`` are the cumulative probabilities
    after the Stay atom and each of the 2*level directed atoms; atom 2i is
    the mu=+1 branch (eta = +eps*alpha_i), atom 2i+1 the mu=-1 branch.
    """
    probs = np.empty(1 + 2 * law.level)
    etas = np.empty(1 + 2 * law.level)
    flips = np.zeros(1 + 2 * law.level, dtype=bool)
    probs[0] = law.stay_probability
    etas[0] = 0.0
    kick = law.kick_probs
    for i in range(law.level):
        probs[1 + 2 * i] = kick[i]
        probs[2 + 2 * i] = kick[i]
        etas[1 + 2 * i] = law.epsilon * law.abscissae[i]
        etas[2 + 2 * i] = -law.epsilon * law.abscissae[i]
        flips[2 + 2 * i] = True
    return np.cumsum(probs), etas, flips


def sample_transition(law: NoiseLaw, rng: np.random.Generator) -> SignedTransition:
    """Draw one transition: Stay w.p. 1/norm, else a directed kick atom."""
    edges, etas, flips = transition_table(law)
    u = rng.random()
    k = int(np.searchsorted(edges, u, side="right"))
    k = min(k, len(etas) - 1)  # guard the u ~ 1.0 edge
    if k == 0:
        return SignedTransition(False, -1, 0, 0.0, False)
    atom = (k - 1) // 2
    direction = -1 if flips[k] else 1
    return SignedTransition(True, atom, direction, float(etas[k]), bool(flips[k]))


def mean_sign_prediction(law: NoiseLaw, n_steps: int):
    """Predicted mean sign norm^-n and negative fraction (1 - norm^-n)/2."""
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    mean_sign = law.norm ** (-float(n_steps))
    return mean_sign, 0.5 * (1.0 - mean_sign)


def breakdown_time(lam: float, hbar: float, kappa: float, epsilon: float) -> float:
    """Time scale eps^3/(kappa*lam*hbar^2) beyond which sign noise dominates."""
    if lam < 0 or hbar <= 0 or epsilon <= 0:
        raise ValueError("lam >= 0, hbar > 0, epsilon > 0 required")
    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must lie in [0, 1]")
    if lam == 0.0 or kappa == 0.0:
        return float("inf")
    return epsilon**3 / (kappa * lam * hbar**2)
