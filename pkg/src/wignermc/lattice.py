"""Periodic 1+1D phi^4 chain: dispersion, Fourier observables, quench setup.

Site variables handed to the dynamics are the canonical q_n = sqrt(a)*phi_n,
so the summed mode observable sum_k |phi_hat_k|^2 = a*sum_n phi_n^2 equals
sum_n q_n^2 and the mode transform of q is the plain unitary DFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import ModelSpec, lattice_chain


class ModeFrequency(NamedTuple):
    omega: float        # |omega(k_j)|; growth rate when unstable
    unstable: bool      # True when omega(k_j)^2 < 0


def dispersion(n_sites: int, spacing: float, mu2: float, j: int) -> ModeFrequency:
    """Mode frequency omega(k_j) = sqrt(4 sin^2(j pi/N)/a^2 + mu2).

    For mu2 < 0 and small j the squared frequency is negative; the returned
    magnitude is then the exponential growth rate and ``unstable`` is set.
    """
    if not -n_sites // 2 + 1 <= j <= n_sites // 2:
        raise ValueError(f"mode index {j} outside (-N/2, N/2]")
    omega2 = 4.0 * math.sin(math.pi * j / n_sites) ** 2 / spacing**2 + mu2
    if omega2 < 0:
        return ModeFrequency(math.sqrt(-omega2), True)
    return ModeFrequency(math.sqrt(omega2), False)


def mode_indices(n_sites: int) -> np.ndarray:
    """Fourier indices j = -N/2+1 .. N/2 in FFT storage order."""
    j = np.fft.fftfreq(n_sites, 1.0 / n_sites).astype(int)
    j[n_sites // 2] = n_sites // 2
    return j


def dft_modes(phi: np.ndarray, box: float):
    """Discrete Fourier modes phi_hat_j = (sqrt(L)/N) sum_n e^{-2pi i n j/N} phi_n.

    Accepts a single configuration (N,) or a batch (..., N); returns
    (j_indices, phi_hat) with phi_hat in FFT storage order matching j_indices.
    """
    phi = np.asarray(phi)
    n = phi.shape[-1]
    phi_hat = np.fft.fft(phi, axis=-1) * (math.sqrt(box) / n)
    return mode_indices(n), phi_hat


def observable_phi2(phi: np.ndarray, box: float) -> np.ndarray:
    """sum_k |phi_hat_k|^2 = a*sum_n phi_n^2, computed in site space."""
    phi = np.asarray(phi)
    a = box / phi.shape[-1]
    return a * np.sum(phi**2, axis=-1)


def mode_power(q: np.ndarray) -> np.ndarray:
    """Per-mode |phi_hat_j|^2 from canonical site variables q = sqrt(a)*phi.

    Equals |N^{-1/2} sum_n q_n e^{-2 pi i j n/N}|^2, in FFT storage order.
    """
    q = np.asarray(q)
    n = q.shape[-1]
    qhat = np.fft.fft(q, axis=-1) / math.sqrt(n)
    return np.abs(qhat) ** 2


@dataclass(frozen=True)
class LatticeConfig:
    """Quench benchmark parameters: lam = 3 m^2, a = 0.8/m, mu2 = -+ m^2/2."""

    n_sites: int
    mass_unit: float = 1.0
    hbar: float = 1.0

    def __post_init__(self) -> None:
        if self.n_sites < 2 or self.n_sites % 2:
            raise ValueError("n_sites must be even and >= 2")
        if self.mass_unit <= 0:
            raise ValueError("mass_unit must be positive")

    @property
    def spacing(self) -> float:
        return 0.8 / self.mass_unit

    @property
    def coupling(self) -> float:
        return 3.0 * self.mass_unit**2

    @property
    def mu2_pre(self) -> float:
        return 0.5 * self.mass_unit**2

    @property
    def mu2_post(self) -> float:
        return -0.5 * self.mass_unit**2

    @property
    def box(self) -> float:
        return self.n_sites * self.spacing

    def model_pre(self) -> ModelSpec:
        """Positive-mu2 chain whose free vacuum is the initial state."""
        return lattice_chain(
            self.n_sites, self.spacing, self.mu2_pre, self.coupling, self.hbar
        )

    def model_post(self) -> ModelSpec:
        """Chain evolved for t > 0 (mass term sign flipped at t = 0)."""
        return lattice_chain(
            self.n_sites, self.spacing, self.mu2_post, self.coupling, self.hbar
        )


def free_mode_population(config: LatticeConfig, j: int, t: float) -> float:
    """Analytic <|phi_hat_j|^2>(t) of the lam = 0 quench, mode by mode.

    The pre-quench vacuum gives <|q_hat|^2> = hbar/(2 w0), <|p_hat|^2> =
    hbar w0/2 with w0 the pre-quench frequency; the post-quench linear
    solution rotates (stable modes) or grows hyperbolically (unstable ones).
    """
    w0 = dispersion(config.n_sites, config.spacing, config.mu2_pre, j).omega
    var_q = 0.5 * config.hbar / w0
    var_p = 0.5 * config.hbar * w0
    w, unstable = dispersion(config.n_sites, config.spacing, config.mu2_post, j)
    if unstable:
        c, s = math.cosh(w * t), math.sinh(w * t) / w
    elif w == 0.0:
        c, s = 1.0, t
    else:
        c, s = math.cos(w * t), math.sin(w * t) / w
    return var_q * c**2 + var_p * s**2


def free_total_population(config: LatticeConfig, t: float) -> float:
    """Analytic lam = 0 value of sum_k <|phi_hat_k|^2>(t)."""
    n = config.n_sites
    return float(
        sum(free_mode_population(config, int(j), t) for j in mode_indices(n))
    )


def quench_experiment(config: LatticeConfig, **kwargs):
    """Classical, kappa and LQC series for the quench; see experiments.run_quench."""
    from .experiments import run_quench

    return run_quench(config, **kwargs)
