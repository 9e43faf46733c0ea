"""Initial phase-space distributions and the Wigner transform of grid states.

Conventions: phase-space densities are normalized to unit integral over
dx dp (this equals the hbar-measure expectation convention: a density that
integrates to one is hbar^-1 times a Wigner function normalized so that
int dx dp W = hbar).  For a pure Gaussian the widths obey
sigma_x*sigma_p = hbar/2; a thermal oscillator state relaxes the product to
hbar/(2*tanh(hbar*omega*beta/2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import dispersion
from .model import LATTICE_CHAIN, ModelSpec

PURE = "pure"
THERMAL = "thermal"


@dataclass(frozen=True)
class GaussianStateSpec:
    """Factorized Gaussian phase-space density for one coordinate."""

    sigma_x: float
    sigma_p: float
    hbar: float = 1.0
    mean_x: float = 0.0
    mean_p: float = 0.0
    purity: str = PURE
    beta: float = math.inf   # thermal metadata
    omega: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma_x <= 0 or self.sigma_p <= 0:
            raise ValueError("widths must be positive")
        if self.purity == PURE:
            product = self.sigma_x * self.sigma_p
            if not math.isclose(product, 0.5 * self.hbar, rel_tol=1e-12):
                raise ValueError(
                    "pure state requires sigma_x*sigma_p = hbar/2 "
                    f"(got {product!r})"
                )
        elif self.purity != THERMAL:
            raise ValueError(f"unknown purity {self.purity!r}")


def make_pure_gaussian(
    sigma_x: float, hbar: float = 1.0, mean_x: float = 0.0, mean_p: float = 0.0
) -> GaussianStateSpec:
    """Minimal-uncertainty Gaussian: sigma_p = hbar/(2*sigma_x)."""
    if sigma_x <= 0:
        raise ValueError("sigma_x must be positive")
    return GaussianStateSpec(
        sigma_x=sigma_x,
        sigma_p=hbar / (2.0 * sigma_x),
        hbar=hbar,
        mean_x=mean_x,
        mean_p=mean_p,
        purity=PURE,
    )


def make_thermal_gaussian(
    omega: float, beta: float, hbar: float = 1.0, m: float = 1.0
) -> GaussianStateSpec:
    """Thermal oscillator state: sigma_x*sigma_p = hbar/(2*tanh(hbar*omega*beta/2)).

    The widths keep the oscillator partition sigma_p = m*omega*sigma_x, so
    <x^2> = hbar*coth(hbar*omega*beta/2)/(2*m*omega).
    """
    if omega <= 0 or beta <= 0 or m <= 0:
        raise ValueError("omega, beta and m must be positive")
    coth = 1.0 / math.tanh(0.5 * hbar * omega * beta)
    sigma_x = math.sqrt(0.5 * hbar * coth / (m * omega))
    sigma_p = m * omega * sigma_x
    return GaussianStateSpec(
        sigma_x=sigma_x, sigma_p=sigma_p, hbar=hbar,
        purity=THERMAL, beta=beta, omega=omega,
    )


def sample_xp(spec: GaussianStateSpec, rng: np.random.Generator, n: int):
    """Draw n independent (x, p) pairs; shape (n, 1) each."""
    x = rng.normal(spec.mean_x, spec.sigma_x, size=(n, 1))
    p = rng.normal(spec.mean_p, spec.sigma_p, size=(n, 1))
    return x, p


def sample_walker(spec: GaussianStateSpec, rng: np.random.Generator):
    """Draw a single signed walker (initial sign +1)."""
    from .dynamics import SignedWalker
    from .model import PhasePoint

    x, p = sample_xp(spec, rng, 1)
    return SignedWalker(point=PhasePoint(x=x[0], p=p[0], t=0.0), sign=1)


# ---------------------------------------------------------------------------
# lattice free vacuum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeModeSpec:
    """Gaussian spec of one Fourier mode of the free lattice vacuum."""

    j: int
    omega: float
    var_q: float     # <|q_hat_j|^2> = hbar/(2 omega)
    var_p: float     # <|p_hat_j|^2> = hbar*omega/2
    is_real: bool    # j = 0 and j = N/2 modes are real


@dataclass(frozen=True)
class LatticeVacuum:
    """Free (lam = 0) vacuum of a positive-mu2 chain, in canonical variables."""

    model: ModelSpec
    modes: tuple[LatticeModeSpec, ...]

    @property
    def n_sites(self) -> int:
        return self.model.n_sites

    def sum_mode_variance(self) -> float:
        """Analytic t=0 value of sum_k <|phi_hat_k|^2> = sum_j hbar/(2 omega_j)."""
        return float(sum(m.var_q for m in self.modes))

    def sample_xp(self, rng: np.random.Generator, n: int):
        """Sample n field configurations; returns (q, p) of shape (n, N).

        Modes are drawn in Fourier space and inverse-transformed; the
        reality constraint q_hat(-j) = conj(q_hat(j)) is built in.
        """
        n_sites = self.n_sites
        qhat = np.zeros((n, n_sites), dtype=complex)
        phat = np.zeros((n, n_sites), dtype=complex)
        for mode in self.modes:
            idx = mode.j % n_sites
            if mode.is_real:
                qhat[:, idx] = rng.normal(0.0, math.sqrt(mode.var_q), n)
                phat[:, idx] = rng.normal(0.0, math.sqrt(mode.var_p), n)
            else:
                # split the variance between real and imaginary parts
                sq = math.sqrt(0.5 * mode.var_q)
                sp = math.sqrt(0.5 * mode.var_p)
                zq = rng.normal(0.0, sq, n) + 1j * rng.normal(0.0, sq, n)
                zp = rng.normal(0.0, sp, n) + 1j * rng.normal(0.0, sp, n)
                qhat[:, idx] = zq
                qhat[:, (-mode.j) % n_sites] = np.conj(zq)
                phat[:, idx] = zp
                phat[:, (-mode.j) % n_sites] = np.conj(zp)
        # q_n = N^{-1/2} sum_j qhat_j e^{+2 pi i j n / N}
        q = np.fft.ifft(qhat, axis=1) * math.sqrt(n_sites)
        p = np.fft.ifft(phat, axis=1) * math.sqrt(n_sites)
        return np.ascontiguousarray(q.real), np.ascontiguousarray(p.real)


def lattice_vacuum_spec(model: ModelSpec) -> LatticeVacuum:
    """Per-mode Gaussian specs of the free vacuum (requires mu2 > 0)."""
    if model.kind != LATTICE_CHAIN:
        raise ValueError("lattice vacuum requires a lattice_chain model")
    if model.mu2 <= 0:
        raise ValueError("free vacuum undefined for mu2 <= 0")
    n = model.n_sites
    modes = []
    for j in range(-n // 2 + 1, n // 2 + 1):
        omega = dispersion(n, model.spacing, model.mu2, j).omega
        is_real = j in (0, n // 2)
        if j < 0:
            continue  # negative-j content fixed by conjugation when sampling
        modes.append(
            LatticeModeSpec(
                j=j,
                omega=omega,
                var_q=0.5 * model.hbar / omega,
                var_p=0.5 * model.hbar * omega,
                is_real=is_real,
            )
        )
    return LatticeVacuum(model=model, modes=tuple(modes))


# ---------------------------------------------------------------------------
# Wigner transform of a grid wavefunction
# ---------------------------------------------------------------------------

@dataclass
class WignerGrid:
    """Phase-space density W(x, p) on a rectangular grid (unit dx dp integral)."""

    x: np.ndarray
    p: np.ndarray
    w: np.ndarray            # shape (len(x), len(p)), real
    max_imag: float
    norm_warning: bool = False

    def integral(self) -> float:
        dx = self.x[1] - self.x[0]
        dp = self.p[1] - self.p[0]
        return float(self.w.sum() * dx * dp)

    def marginal_x(self) -> np.ndarray:
        dp = self.p[1] - self.p[0]
        return self.w.sum(axis=1) * dp

    def marginal_p(self) -> np.ndarray:
        dx = self.x[1] - self.x[0]
        return self.w.sum(axis=0) * dx


def wigner_from_wavefunction(psi, hbar: float = 1.0, pad_factor: int = 2) -> WignerGrid:
    """Wigner density of a 1D grid wavefunction via FFT over the offset.

    W(x,p) = (2 pi hbar)^-1 int dy conj(psi(x+y/2)) psi(x-y/2) e^{i p y/hbar},
    evaluated with y on the doubled grid (y_j = 2 dx j) and zero-padding by
    ``pad_factor`` to suppress wrap-around.  The result integrates to one
    for a normalized input; the p-marginal reproduces |psi(x)|^2 exactly on
    the grid.
    """
    amps = np.asarray(psi.amplitudes)
    if amps.ndim != 1:
        raise ValueError("wigner transform implemented for 1D wavefunctions")
    g = amps.size
    dx = psi.dx
    norm2 = float(np.sum(np.abs(amps) ** 2) * dx)
    norm_warning = abs(norm2 - 1.0) > 1e-8

    j = np.arange(-g // 2, g // 2)
    i = np.arange(g)
    ip = i[:, None] + j[None, :]
    im = i[:, None] - j[None, :]
    valid = (ip >= 0) & (ip < g) & (im >= 0) & (im < g)
    ip_c = np.clip(ip, 0, g - 1)
    im_c = np.clip(im, 0, g - 1)
    corr = np.where(valid, np.conj(amps[ip_c]) * amps[im_c], 0.0)

    n_pad = pad_factor * g
    # pack the offset index into FFT order on the padded length
    f = np.zeros((g, n_pad), dtype=complex)
    pos = j % n_pad
    f[:, pos] = corr
    dy = 2.0 * dx
    raw = np.fft.ifft(f, axis=1) * n_pad          # sum_j f_j e^{+2 pi i j k / n_pad}
    w = np.fft.fftshift(raw, axes=1) * (dy / (2.0 * math.pi * hbar))
    p = np.fft.fftshift(np.fft.fftfreq(n_pad, dy)) * 2.0 * math.pi * hbar
    max_imag = float(np.max(np.abs(w.imag)))
    return WignerGrid(
        x=psi.x.copy(), p=p, w=np.ascontiguousarray(w.real),
        max_imag=max_imag, norm_warning=norm_warning,
    )
