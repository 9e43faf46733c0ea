"""Signed-walker Monte Carlo for real-time quantum dynamics in phase space."""

__version__ = "0.1.0"

from .dynamics import (
    EvolutionConfig,
    SignedWalker,
    WalkerEnsemble,
    drift_step,
    evolve_ensemble,
    kick_step,
)
from .estimators import (
    ObservableSeries,
    SignCollapseError,
    jackknife,
    kappa_scan_fit,
    lqc_estimate,
    sign_diagnostics,
    signed_mean,
)
from .model import (
    ModelSpec,
    PhasePoint,
    cubic_kick_coefficient,
    dimensionless_r,
    dimensionless_s,
    force,
    lattice_chain,
    potential_energy,
    quartic1d,
    tanh_quench1d,
)
from .noise import (
    NoiseLaw,
    breakdown_time,
    mean_sign_prediction,
    sample_transition,
    solve_noise_law,
    verify_moments,
)
from .oracle import (
    GridWavefunction,
    harmonic_q2_analytic,
    schrodinger_evolve,
    uq_infinite_mass,
    uq_saddle,
    uq_wigner,
)
from .states import (
    GaussianStateSpec,
    lattice_vacuum_spec,
    make_pure_gaussian,
    make_thermal_gaussian,
    sample_walker,
    wigner_from_wavefunction,
)
