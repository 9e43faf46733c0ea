"""Exact references: grid Schrodinger integrators and closed-form limits.

The split-operator propagator alternates half potential phases and a full
spectral kinetic phase (Strang splitting, potential sampled at the step
midpoint), so it is unitary to roundoff and second-order accurate in dt for
smooth time dependence.  Covers one grid dimension for the 1-DOF models and
two dimensions for the two-site chain in canonical variables.

The ultraquantum functions evaluate the distribution obtained by keeping
only the third-derivative term of the phase-space evolution equation: in
Fourier space over p the equation integrates to a cubic phase, giving

    W(x,p,t) = g(x)/(2 pi) * I(p),
    I(p) = int dz exp(i p z - i Q z^3 - sigma_p^2 z^2/2),   Q = -lam hbar^2 x t/24

with g(x) the initial Gaussian x-marginal.  I(p) reduces to an Airy function
after completing the cube; its large-|p| asymptotics split at
zeta = 3 Q p - sigma_p^4/4 into an oscillatory branch (zeta > 0) and an
exponentially damped one (zeta < 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .model import ModelSpec, force, potential_energy


class OracleError(RuntimeError):
    """Grid evolution aborted (norm drift or boundary leakage)."""


class QuadratureError(RuntimeError):
    """Oscillatory quadrature failed to converge."""


def make_grid(half_width: float, n_points: int) -> np.ndarray:
    """Uniform periodic grid on [-L, L) with G points."""
    if n_points < 8 or n_points % 2:
        raise ValueError("need an even number of grid points >= 8")
    dx = 2.0 * half_width / n_points
    return -half_width + dx * np.arange(n_points)


@dataclass
class GridWavefunction:
    """Complex amplitudes on a uniform 1D (G,) or square 2D (G, G) grid."""

    x: np.ndarray
    amplitudes: np.ndarray
    t: float = 0.0
    norm_drift: float = 0.0

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def ndim(self) -> int:
        return self.amplitudes.ndim

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.dx**self.ndim)

    def normalized(self) -> "GridWavefunction":
        return GridWavefunction(
            x=self.x, amplitudes=self.amplitudes / math.sqrt(self.norm2()), t=self.t
        )

    def boundary_amplitude(self) -> float:
        a = np.abs(self.amplitudes)
        if self.ndim == 1:
            return float(max(a[0], a[-1]))
        return float(max(a[0, :].max(), a[-1, :].max(), a[:, 0].max(), a[:, -1].max()))


def gaussian_wavefunction(
    x: np.ndarray,
    sigma_x: float,
    mean_x: float = 0.0,
    mean_p: float = 0.0,
    hbar: float = 1.0,
) -> GridWavefunction:
    """Minimal packet: |psi|^2 Gaussian with std sigma_x, momentum mean_p."""
    amp = (2.0 * math.pi * sigma_x**2) ** -0.25 * np.exp(
        -((x - mean_x) ** 2) / (4.0 * sigma_x**2) + 1j * mean_p * x / hbar
    )
    return GridWavefunction(x=x, amplitudes=amp)


def oscillator_excited_wavefunction(
    x: np.ndarray, sigma_x: float, hbar: float = 1.0
) -> GridWavefunction:
    """First excited oscillator state with ground-state width sigma_x."""
    amp = x * np.exp(-(x**2) / (4.0 * sigma_x**2)) + 0j
    psi = GridWavefunction(x=x, amplitudes=amp)
    return psi.normalized()


def two_site_vacuum_wavefunction(
    x: np.ndarray, omega_plus: float, omega_minus: float, hbar: float = 1.0
) -> GridWavefunction:
    """Ground state of two coupled sites as a product over normal modes.

    The symmetric mode u = (q0+q1)/sqrt(2) has frequency ``omega_plus``
    (the j = 0 mode) and the antisymmetric one ``omega_minus`` (j = N/2).
    """
    q0 = x[:, None]
    q1 = x[None, :]
    u = (q0 + q1) / math.sqrt(2.0)
    v = (q0 - q1) / math.sqrt(2.0)

    def ground(mode, omega):
        return (omega / (math.pi * hbar)) ** 0.25 * np.exp(
            -omega * mode**2 / (2.0 * hbar)
        )

    amp = ground(u, omega_plus) * ground(v, omega_minus) + 0j
    return GridWavefunction(x=x, amplitudes=amp)


@dataclass
class OracleResult:
    """Recorded expectation values of one grid evolution."""

    times: np.ndarray
    q2: np.ndarray               # <sum_i x_i^2>
    energy: np.ndarray
    norm_drift: float
    boundary_max: float
    snapshots: list = field(default_factory=list)


def _momentum_grid(n: int, dx: float, hbar: float) -> np.ndarray:
    return 2.0 * math.pi * hbar * np.fft.fftfreq(n, dx)


def schrodinger_evolve(
    psi0: GridWavefunction,
    model: ModelSpec,
    dt: float,
    t_final: float,
    record_times,
    norm_tol: float = 1e-6,
    boundary_tol: float = 1e-10,
    keep_snapshots: bool = False,
) -> OracleResult:
    """Split-operator evolution recording <sum x_i^2> and <H> at the grid times.

    ``record_times`` must be multiples of dt (within roundoff); raises
    OracleError if the norm drifts by more than ``norm_tol`` or any boundary
    amplitude exceeds ``boundary_tol``.
    """
    ndim = psi0.ndim
    if model.ndof != ndim:
        raise ValueError("model degrees of freedom must match grid dimension")
    x = psi0.x
    g = x.size
    dx = psi0.dx
    hbar, m = model.hbar, model.m
    record_times = np.asarray(record_times, float)
    n_steps = int(round(t_final / dt))
    record_steps = np.rint(record_times / dt).astype(int)
    if np.any(np.abs(record_steps * dt - record_times) > 1e-9 * max(dt, 1.0)):
        raise ValueError("record_times must sit on the dt grid")
    if np.any(record_steps > n_steps):
        raise ValueError("record time beyond t_final")

    k1 = _momentum_grid(g, dx, hbar)
    if ndim == 1:
        points = x[:, None]
        k2_total = k1**2
        x2_total = x**2
        axes = (0,)
    else:
        points = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
        k2_total = k1[:, None] ** 2 + k1[None, :] ** 2
        x2_total = x[:, None] ** 2 + x[None, :] ** 2
        axes = (0, 1)

    kin_phase = np.exp(-0.5j * dt * k2_total / (m * hbar))
    kin_energy = 0.5 * k2_total / m
    measure = dx**ndim

    psi = psi0.amplitudes.astype(complex).copy()
    norm0 = np.sum(np.abs(psi) ** 2) * measure
    if abs(norm0 - 1.0) > 1e-8:
        psi = psi / math.sqrt(norm0)

    recorders = {int(s): i for i, s in enumerate(record_steps)}
    q2 = np.empty(record_times.size)
    energy = np.empty(record_times.size)
    snapshots: list = []
    norm_drift = 0.0
    boundary_max = 0.0

    def record(step: int) -> None:
        idx = recorders[step]
        prob = np.abs(psi) ** 2
        q2[idx] = float(np.sum(prob * x2_total) * measure)
        t_now = step * dt
        v = potential_energy(model, points, t=t_now)
        pot = float(np.sum(prob * v) * measure)
        psi_k = np.fft.fftn(psi, axes=axes)
        pk = np.abs(psi_k) ** 2
        kin = float(np.sum(pk * kin_energy) / pk.sum())
        energy[idx] = kin + pot
        if keep_snapshots:
            snapshots.append(
                GridWavefunction(x=x.copy(), amplitudes=psi.copy(), t=t_now)
            )

    if 0 in recorders:
        record(0)
    for step in range(1, n_steps + 1):
        t_mid = (step - 0.5) * dt
        v = potential_energy(model, points, t=t_mid)
        half_v = np.exp(-0.5j * dt * v / hbar)
        psi *= half_v
        psi = np.fft.ifftn(np.fft.fftn(psi, axes=axes) * kin_phase, axes=axes)
        psi *= half_v

        norm = np.sum(np.abs(psi) ** 2) * measure
        norm_drift = max(norm_drift, abs(norm - 1.0))
        if norm_drift > norm_tol:
            raise OracleError(f"norm drift {norm_drift:.3e} at t={step*dt:.4f}")
        edge = GridWavefunction(x=x, amplitudes=psi).boundary_amplitude()
        boundary_max = max(boundary_max, edge)
        if edge > boundary_tol:
            raise OracleError(f"boundary amplitude {edge:.3e} at t={step*dt:.4f}")
        if step in recorders:
            record(step)

    return OracleResult(
        times=record_times,
        q2=q2,
        energy=energy,
        norm_drift=norm_drift,
        boundary_max=boundary_max,
        snapshots=snapshots,
    )


def harmonic_q2_analytic(
    sigma_x: float, sigma_p: float, m: float, omega: float, t
) -> np.ndarray:
    """<Q^2>(t) of a centered Gaussian under the harmonic (or free) flow."""
    if omega < 0:
        raise ValueError("omega must be >= 0")
    t = np.asarray(t, float)
    if omega == 0.0:
        out = sigma_x**2 + (sigma_p * t / m) ** 2
    else:
        out = (
            sigma_x**2 * np.cos(omega * t) ** 2
            + (sigma_p / (m * omega)) ** 2 * np.sin(omega * t) ** 2
        )
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# ultraquantum limit
# ---------------------------------------------------------------------------

def _gaussian_marginal(x: float, sigma_x: float) -> float:
    return math.exp(-(x**2) / (2.0 * sigma_x**2)) / (math.sqrt(2.0 * math.pi) * sigma_x)


def uq_phase_strength(x: float, t: float, lam: float, hbar: float) -> float:
    """Cubic phase coefficient Q = -lam*hbar^2*x*t/24."""
    return -lam * hbar**2 * x * t / 24.0


def _uq_integral_airy(p: float, q: float, sigma_p: float) -> float:
    """I(p) = int dz exp(ipz - iQz^3 - sigma_p^2 z^2/2) via the Airy reduction.

    Completing the cube with the shift z -> u + i*sigma_p^2/(6Q) gives

        I = 2 pi (3|Q|)^(-1/3) exp(sigma_p^6/(108 Q^2) - p sigma_p^2/(6 Q))
            * Ai(-(3|Q|)^(-4/3) zeta),       zeta = 3 Q p - sigma_p^4/4

    (written for Q > 0; Q < 0 follows from I(p, Q) = I(-p, -Q)).  The damped
    branch is evaluated in log space with the scaled Airy function.
    """
    if q == 0.0:
        return math.sqrt(2.0 * math.pi) / sigma_p * math.exp(-(p**2) / (2 * sigma_p**2))
    if q < 0.0:
        return _uq_integral_airy(-p, -q, sigma_p)
    zeta = 3.0 * q * p - sigma_p**4 / 4.0
    scale = (3.0 * q) ** (-4.0 / 3.0)
    arg = -scale * zeta
    log_pref = math.log(2.0 * math.pi) - math.log(3.0 * q) / 3.0
    exponent = sigma_p**6 / (108.0 * q**2) - p * sigma_p**2 / (6.0 * q)
    if arg <= 0.0:
        ai = special.airy(arg)[0]
        return math.exp(log_pref + exponent) * ai
    # zeta < 0: Ai(arg) underflows long before the exponent compensates,
    # so combine on the log scale using Ai(z) = aie(z) exp(-2/3 z^(3/2))
    aie = special.airye(arg)[0]
    log_ai = math.log(aie) - 2.0 / 3.0 * arg**1.5
    return math.exp(log_pref + exponent + log_ai)


def _uq_integral_quad(
    p: float, q: float, sigma_p: float, rel_tol: float = 1e-8, abs_tol: float = 5e-8
) -> complex:
    """Direct adaptive quadrature of I(p); returns the complex value."""
    z_max = 12.0 / sigma_p

    def re_part(z):
        return math.exp(-0.5 * sigma_p**2 * z**2) * math.cos(p * z - q * z**3)

    def im_part(z):
        return math.exp(-0.5 * sigma_p**2 * z**2) * math.sin(p * z - q * z**3)

    # the cosine part is even in z and the sine part odd, so the real part
    # doubles the half-line integral and the imaginary part vanishes
    re_half, re_err = integrate.quad(re_part, 0.0, z_max, limit=4000, epsabs=1e-13)
    im, _ = integrate.quad(im_part, -z_max, z_max, limit=4000, epsabs=1e-13)
    re = 2.0 * re_half
    if 2.0 * re_err > max(rel_tol * abs(re), abs_tol):
        raise QuadratureError(
            f"oscillatory integral not converged: p={p}, Q={q}, err={2*re_err:.2e}"
        )
    return complex(re, im)


def uq_wigner(
    x: float,
    p: float,
    t: float,
    sigma_x: float,
    sigma_p: float,
    lam: float,
    hbar: float = 1.0,
    method: str = "airy",
) -> float:
    """Ultraquantum phase-space density at (x, p, t); reduces to the initial
    Gaussian at t = 0 and keeps all fixed-x statistics time independent."""
    q = uq_phase_strength(x, t, lam, hbar)
    if method == "airy":
        integral = _uq_integral_airy(p, q, sigma_p)
    elif method == "quad":
        value = _uq_integral_quad(p, q, sigma_p)
        if abs(value.imag) > 1e-10:
            raise QuadratureError(f"imaginary part {value.imag:.2e} exceeds 1e-10")
        integral = value.real
    else:
        raise ValueError(f"unknown method {method!r}")
    return _gaussian_marginal(x, sigma_x) * integral / (2.0 * math.pi)


def uq_saddle(
    x: float,
    p: float,
    t: float,
    sigma_x: float,
    sigma_p: float,
    lam: float,
    hbar: float = 1.0,
) -> float:
    """Saddle-point approximation to ``uq_wigner``, valid for large |zeta|.

    zeta = 3 Q p - sigma_p^4/4 selects the branch: an oscillatory cosine for
    zeta > 0 and a positive, exponentially damped tail for zeta < 0.  The
    approximation degrades near zeta = 0 by construction.
    """
    q = uq_phase_strength(x, t, lam, hbar)
    if q == 0.0:
        raise ValueError("saddle form undefined at Q = 0 (use the Gaussian)")
    if q < 0.0:
        p, q = -p, -q
    zeta = 3.0 * q * p - sigma_p**4 / 4.0
    exponent = sigma_p**6 / (108.0 * q**2) - p * sigma_p**2 / (6.0 * q)
    if zeta > 0.0:
        branch = (
            2.0
            * math.sqrt(math.pi)
            * zeta**-0.25
            * math.cos(2.0 * zeta**1.5 / (27.0 * q**2) - math.pi / 4.0)
            * math.exp(exponent)
        )
    else:
        az = abs(zeta)
        branch = math.sqrt(math.pi) * az**-0.25 * math.exp(
            -2.0 * az**1.5 / (27.0 * q**2) + exponent
        )
    return _gaussian_marginal(x, sigma_x) * branch / (2.0 * math.pi)


def uq_p_integral(
    x: float,
    t: float,
    sigma_x: float,
    sigma_p: float,
    lam: float,
    hbar: float = 1.0,
) -> float:
    """int dp W_uq(x, p, t) at fixed x (time independent, equals the x-marginal).

    The integration window follows the asymptotic decay scales: the
    oscillatory tail dies like exp(-p sigma_p^2/(6|Q|)) and the other side
    like exp(-2|3Qp|^{3/2}/(27 Q^2)).
    """
    q = uq_phase_strength(x, t, lam, hbar)
    if q == 0.0:
        return _gaussian_marginal(x, sigma_x)
    osc_scale = 6.0 * abs(q) / sigma_p**2
    p_osc = sigma_p**4 / (12.0 * abs(q)) + 40.0 * max(osc_scale, sigma_p)
    p_damp = max(12.0 * sigma_p, 3.0 * (9.0 * abs(q)) ** (1.0 / 3.0) * 10.0)
    lo, hi = (-p_damp, p_osc) if q > 0 else (-p_osc, p_damp)
    val, err = integrate.quad(
        lambda pp: uq_wigner(x, pp, t, sigma_x, sigma_p, lam, hbar),
        lo,
        hi,
        limit=4000,
        epsabs=1e-12,
        epsrel=1e-11,
    )
    if err > 1e-9:
        raise QuadratureError(f"p-integral not converged: err={err:.2e}")
    return float(val)


def uq_infinite_mass(
    x: float,
    p: float,
    t: float,
    model: ModelSpec,
    sigma_x: float,
    sigma_p: float,
    method: str = "airy",
) -> float:
    """Infinite-mass improvement: the ultraquantum density at p + V'(x) t."""
    v_prime = -float(force(model, x, t=t)[..., 0])
    return uq_wigner(
        x,
        p + v_prime * t,
        t,
        sigma_x,
        sigma_p,
        model.quartic_coupling,
        model.hbar,
        method=method,
    )
