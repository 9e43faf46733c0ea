"""Hamiltonian families and their potentials, forces and quantum-kick couplings.

Three model kinds share the same diagonal-quartic structure:

* ``quartic1d``       -- V(x) = mu2*x^2/2 + lam*x^4/24
* ``tanh_quench1d``   -- V(x,t) = -mu2*tanh(alpha*t)*x^2/2 + lam*x^4/24
* ``lattice_chain``   -- periodic phi^4 chain, expressed in canonically
  rescaled site variables q_n = sqrt(a)*phi_n so that the mass is 1 and the
  effective quartic coupling is lam/a (see ``ModelSpec.kick_coupling``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

QUARTIC_1D = "quartic1d"
TANH_QUENCH_1D = "tanh_quench1d"
LATTICE_CHAIN = "lattice_chain"

_KINDS = (QUARTIC_1D, TANH_QUENCH_1D, LATTICE_CHAIN)


class DimensionMismatchError(ValueError):
    """Coordinate vector length does not match the model's degrees of freedom."""


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one Hamiltonian family.

    ``lam`` is the bare quartic coupling in the x^4/4! normalization for the
    1-DOF kinds and the physical phi^4/24 lattice coupling for
    ``lattice_chain``; the coupling that actually multiplies q^4/24 in
    canonical variables is ``quartic_coupling`` (= lam/a on the lattice).
    """

    kind: str
    m: float = 1.0
    mu2: float = 0.0
    lam: float = 0.0
    hbar: float = 1.0
    alpha_rate: float = 0.0
    n_sites: int = 1
    spacing: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.m <= 0 or self.hbar <= 0:
            raise ValueError("m and hbar must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.kind == TANH_QUENCH_1D and self.alpha_rate <= 0:
            raise ValueError("tanh_quench1d requires a positive ramp rate")
        if self.kind == LATTICE_CHAIN:
            if self.spacing <= 0:
                raise ValueError("lattice spacing must be positive")
            if self.n_sites < 2 or self.n_sites % 2:
                raise ValueError("n_sites must be even and >= 2")

    @property
    def ndof(self) -> int:
        return self.n_sites if self.kind == LATTICE_CHAIN else 1

    @property
    def quartic_coupling(self) -> float:
        """Coupling of the diagonal q^4/24 term in canonical variables."""
        if self.kind == LATTICE_CHAIN:
            return self.lam / self.spacing
        return self.lam

    # alias used when building kick laws: the third kick cumulant per unit
    # time is kappa * kick_coupling * hbar^2 * x / 4 for every coordinate
    @property
    def kick_coupling(self) -> float:
        return self.quartic_coupling

    def mu2_at(self, t: float) -> float:
        """Quadratic coefficient mu2(t) of the x^2/2 term."""
        if self.kind == TANH_QUENCH_1D:
            return -self.mu2 * math.tanh(self.alpha_rate * t)
        return self.mu2


@dataclass(frozen=True)
class PhasePoint:
    """A point (x, p) in 2D-dimensional phase space at time t."""

    x: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, float)))
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, float)))
        if self.x.shape != self.p.shape:
            raise DimensionMismatchError("x and p must have equal length")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.p))):
            raise ValueError("phase-space point must be finite")


def _coords(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, float)
    if x.ndim == 0:
        x = x[None]
    if x.shape[-1] != model.ndof:
        raise DimensionMismatchError(
            f"expected {model.ndof} coordinates, got {x.shape[-1]}"
        )
    return x


def potential_energy(model: ModelSpec, x, t: float = 0.0):
    """V(x) (or V(x,t)), summed over coordinates; batches over leading axes."""
    x = _coords(model, x)
    mu2 = model.mu2_at(t)
    lam = model.quartic_coupling
    v = 0.5 * mu2 * x**2 + (lam / 24.0) * x**4
    if model.kind == LATTICE_CHAIN:
        grad = np.roll(x, -1, axis=-1) - x
        v = v + 0.5 * grad**2 / model.spacing**2
    out = v.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def force_unchecked(model: ModelSpec, x: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Force kernel without shape validation (hot path; see ``force``)."""
    mu2 = model.mu2_at(t)
    f = x * x
    f *= x
    f *= -model.quartic_coupling / 6.0
    f -= mu2 * x
    if model.kind == LATTICE_CHAIN:
        lap = np.roll(x, -1, axis=-1)
        lap += np.roll(x, 1, axis=-1)
        lap -= 2.0 * x
        f += lap / model.spacing**2
    return f


def force(model: ModelSpec, x, t: float = 0.0) -> np.ndarray:
    """-dV/dx_n componentwise;  the exact negative gradient of potential_energy."""
    return force_unchecked(model, _coords(model, x), t)


def cubic_kick_coefficient(model: ModelSpec, x) -> np.ndarray:
    """Per-coordinate kick amplitude: the real signed cube root of x_n.

    Cubing an entry recovers x_n, so three equal factors reproduce the third
    kick cumulant proportional to x_n.
    """
    return np.cbrt(_coords(model, x))


def _check_widths(sigma_x: float, sigma_p: float) -> None:
    if sigma_x <= 0 or sigma_p <= 0:
        raise ValueError("widths must be positive")


def dimensionless_r(model: ModelSpec, sigma_x: float, sigma_p: float) -> float:
    """Action ratio r = sqrt(m)*mu^3 / (lam*sigma_x*sigma_p) in units of hbar."""
    if model.kind != QUARTIC_1D:
        raise ValueError("r is defined for the quartic 1-DOF model")
    _check_widths(sigma_x, sigma_p)
    if model.lam == 0 or model.mu2 <= 0:
        raise ValueError("r requires lam > 0 and mu2 > 0")
    mu = math.sqrt(model.mu2)
    return math.sqrt(model.m) * mu**3 / (model.lam * sigma_x * sigma_p * model.hbar)


def dimensionless_s(model: ModelSpec, sigma_x: float, sigma_p: float) -> float:
    """Quantum-term size estimate s = sigma_p*mu / (sigma_x^3*lam*sqrt(m))."""
    if model.kind != QUARTIC_1D:
        raise ValueError("s is defined for the quartic 1-DOF model")
    _check_widths(sigma_x, sigma_p)
    if model.lam == 0 or model.mu2 <= 0:
        raise ValueError("s requires lam > 0 and mu2 > 0")
    mu = math.sqrt(model.mu2)
    return sigma_p * mu / (sigma_x**3 * model.lam * math.sqrt(model.m))


def quartic1d(mu2: float, lam: float, m: float = 1.0, hbar: float = 1.0) -> ModelSpec:
    return ModelSpec(kind=QUARTIC_1D, m=m, mu2=mu2, lam=lam, hbar=hbar)


def tanh_quench1d(
    mu2: float, alpha_rate: float, lam: float, m: float = 1.0, hbar: float = 1.0
) -> ModelSpec:
    return ModelSpec(
        kind=TANH_QUENCH_1D, m=m, mu2=mu2, lam=lam, hbar=hbar, alpha_rate=alpha_rate
    )


def lattice_chain(
    n_sites: int, spacing: float, mu2: float, lam: float, hbar: float = 1.0
) -> ModelSpec:
    """Periodic phi^4 chain in canonical variables (unit mass after rescaling)."""
    return ModelSpec(
        kind=LATTICE_CHAIN, m=1.0, mu2=mu2, lam=lam, hbar=hbar,
        n_sites=n_sites, spacing=spacing,
    )
