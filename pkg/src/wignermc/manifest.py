"""Experiment manifests: a small TOML schema that fully determines a run.

Every field is either explicit or defaulted; the resolved manifest (all
defaults filled in) is embedded in the emitted metadata so any number in an
output file can be recomputed from the archive alone.  Manifests round-trip
through parse -> emit -> parse unchanged.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .lattice import LatticeConfig, dispersion
from .model import (
    LATTICE_CHAIN,
    QUARTIC_1D,
    TANH_QUENCH_1D,
    ModelSpec,
    lattice_chain,
    quartic1d,
    tanh_quench1d,
)
from .noise import (
    DEFAULT_PATTERNS,
    InfeasiblePatternError,
    KickProbabilityError,
    breakdown_time,
    solve_noise_law,
)
from .states import GaussianStateSpec, make_pure_gaussian, make_thermal_gaussian

EXPERIMENT_KINDS = (
    "classical",
    "signed-run",
    "kappa-scan",
    "lqc",
    "schrodinger-oracle",
    "quench",
    "uq-analysis",
)

_DEFAULTS = {
    "experiment": {"kind": None, "name": "run"},
    "model": {
        "kind": None,
        "m": 1.0,
        "mu2": 0.0,
        "lam": 0.0,
        "hbar": 1.0,
        "alpha_rate": 0.0,
        "n_sites": 2,
        "mass_unit": 1.0,
    },
    "state": {
        "kind": "pure_gaussian",
        "sigma_x": 1.0,
        "omega": 1.0,
        "beta": 1.0,
    },
    "noise": {"level": 2, "epsilon": 0.45, "pattern": []},
    "evolution": {
        "dt": 0.005,
        "t_final": 1.0,
        "kappa": 0.0,
        "kappa_list": [],
        "record_stride": 10,
        "integrator": "paper",
        "site_law": "two_atom",
        "fit_degree": 1,
    },
    "sampling": {
        "n_walkers": 100_000,
        "n_walkers_long": 0,
        "seed": 0,
        "workers": 1,
        "jackknife_blocks": 50,
    },
    "oracle": {
        "enabled": False,
        "dt": 0.001,
        "half_width": 10.0,
        "n_points": 512,
    },
    "uq": {
        "x": 1.0,
        "t": 1.0,
        "sigma_x": 1.0,
        "sigma_p": 1.0,
        "p_min": -10.0,
        "p_max": 10.0,
        "n_p": 201,
    },
    "output": {"directory": "out", "formats": ["csv"]},
}

_REQUIRED = {"experiment": ("kind",), "model": ("kind",)}


class ManifestError(ValueError):
    """Manifest failed schema validation."""


def parse_manifest(path) -> dict:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return resolve_manifest(raw)


def resolve_manifest(raw: dict) -> dict:
    """Fill defaults and reject unknown sections/keys."""
    resolved = {}
    for section, content in raw.items():
        if section not in _DEFAULTS:
            raise ManifestError(f"unknown section [{section}]")
        if not isinstance(content, dict):
            raise ManifestError(f"section [{section}] must be a table")
        for key in content:
            if key not in _DEFAULTS[section]:
                raise ManifestError(f"unknown key {key!r} in [{section}]")
    for section, defaults in _DEFAULTS.items():
        merged = dict(defaults)
        merged.update(raw.get(section, {}))
        resolved[section] = merged
    for section, keys in _REQUIRED.items():
        for key in keys:
            if resolved[section][key] is None:
                raise ManifestError(f"[{section}] {key} is required")
    kind = resolved["experiment"]["kind"]
    if kind not in EXPERIMENT_KINDS:
        raise ManifestError(f"unknown experiment kind {kind!r}")
    if resolved["model"]["kind"] not in (QUARTIC_1D, TANH_QUENCH_1D, LATTICE_CHAIN):
        raise ManifestError(f"unknown model kind {resolved['model']['kind']!r}")
    return resolved


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ManifestError("non-finite floats are not representable")
        text = repr(value)
        return text if any(c in text for c in ".eE") else text + ".0"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt_value(v) for v in value) + "]"
    raise ManifestError(f"cannot emit value of type {type(value)!r}")


def emit_manifest(manifest: dict) -> str:
    """Serialize a resolved manifest back to TOML text."""
    lines = []
    for section in _DEFAULTS:
        if section not in manifest:
            continue
        lines.append(f"[{section}]")
        for key, value in manifest[section].items():
            if value is None:
                continue
            lines.append(f"{key} = {_fmt_value(value)}")
        lines.append("")
    return "\n".join(lines)


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w") as fh:
        fh.write(emit_manifest(manifest))


# ---------------------------------------------------------------------------
# construction of run objects
# ---------------------------------------------------------------------------

def model_from_manifest(manifest: dict) -> ModelSpec:
    m = manifest["model"]
    if m["kind"] == QUARTIC_1D:
        return quartic1d(mu2=m["mu2"], lam=m["lam"], m=m["m"], hbar=m["hbar"])
    if m["kind"] == TANH_QUENCH_1D:
        return tanh_quench1d(
            mu2=m["mu2"], alpha_rate=m["alpha_rate"], lam=m["lam"],
            m=m["m"], hbar=m["hbar"],
        )
    config = lattice_config_from_manifest(manifest)
    return config.model_post()


def lattice_config_from_manifest(manifest: dict) -> LatticeConfig:
    m = manifest["model"]
    return LatticeConfig(
        n_sites=m["n_sites"], mass_unit=m["mass_unit"], hbar=m["hbar"]
    )


def state_from_manifest(manifest: dict):
    s = manifest["state"]
    hbar = manifest["model"]["hbar"]
    if s["kind"] == "pure_gaussian":
        return make_pure_gaussian(s["sigma_x"], hbar)
    if s["kind"] == "thermal_gaussian":
        return make_thermal_gaussian(
            omega=s["omega"], beta=s["beta"], hbar=hbar, m=manifest["model"]["m"]
        )
    if s["kind"] == "lattice_vacuum":
        from .states import lattice_vacuum_spec

        return lattice_vacuum_spec(lattice_config_from_manifest(manifest).model_pre())
    raise ManifestError(f"unknown state kind {s['kind']!r}")


def settings_from_manifest(manifest: dict, long_run: bool = False):
    from .experiments import RunSettings

    e, n, s = manifest["evolution"], manifest["noise"], manifest["sampling"]
    n_walkers = s["n_walkers"]
    if long_run and s["n_walkers_long"] > 0:
        n_walkers = s["n_walkers_long"]
    pattern = tuple(n["pattern"]) if n["pattern"] else None
    observable = (
        "phi2_sum" if manifest["model"]["kind"] == LATTICE_CHAIN else "q2"
    )
    return RunSettings(
        dt=e["dt"],
        t_final=e["t_final"],
        kappa=e["kappa"],
        level=n["level"],
        epsilon=n["epsilon"],
        pattern=pattern,
        record_stride=e["record_stride"],
        site_law=e["site_law"],
        integrator=e["integrator"],
        n_walkers=n_walkers,
        seed=s["seed"],
        workers=s["workers"],
        n_blocks=s["jackknife_blocks"],
        observable=observable,
    )


# ---------------------------------------------------------------------------
# validation report
# ---------------------------------------------------------------------------

@dataclass
class Finding:
    level: str   # "error" | "warning" | "info"
    message: str


def _max_frequency(manifest: dict) -> float:
    m = manifest["model"]
    if m["kind"] == LATTICE_CHAIN:
        config = lattice_config_from_manifest(manifest)
        return math.sqrt(4.0 / config.spacing**2 + abs(config.mu2_post))
    lam = m["lam"]
    mu2 = abs(m["mu2"])
    x_ref = 3.0 * manifest["state"]["sigma_x"]
    if m["kind"] == TANH_QUENCH_1D and lam > 0:
        x_ref = max(x_ref, math.sqrt(12.0 * abs(m["mu2"]) / lam))
    return math.sqrt((mu2 + 0.5 * lam * x_ref**2) / m["m"])


def validate_manifest(manifest: dict) -> list[Finding]:
    """Static checks: integrator stability, kick probability, sign budget."""
    findings: list[Finding] = []
    e, n, s = manifest["evolution"], manifest["noise"], manifest["sampling"]
    model = model_from_manifest(manifest)
    kappas = list(e["kappa_list"]) or [e["kappa"]]

    omega_max = _max_frequency(manifest)
    dt_bound = 0.05 / omega_max if omega_max > 0 else math.inf
    if e["dt"] > dt_bound:
        findings.append(
            Finding(
                "error",
                f"[evolution] dt = {e['dt']} exceeds the stability bound "
                f"0.05/omega_max = {dt_bound:.4g}",
            )
        )

    for kappa in kappas:
        if kappa == 0.0:
            continue
        c3 = kappa * model.kick_coupling * model.hbar**2 * e["dt"] / 4.0
        pattern = tuple(n["pattern"]) if n["pattern"] else None
        try:
            law = solve_noise_law(n["level"], n["epsilon"], c3, pattern)
        except KickProbabilityError as err:
            findings.append(Finding("error", f"[noise] kappa={kappa}: {err}"))
            continue
        except InfeasiblePatternError as err:
            findings.append(Finding("error", f"[noise] pattern infeasible: {err}"))
            continue
        t_break = breakdown_time(
            model.kick_coupling, model.hbar, kappa, n["epsilon"]
        )
        if e["t_final"] > t_break:
            findings.append(
                Finding(
                    "warning",
                    f"[evolution] t_final = {e['t_final']} exceeds the sign "
                    f"breakdown scale T ~ {t_break:.4g} at kappa={kappa}",
                )
            )
        n_steps = int(round(e["t_final"] / e["dt"]))
        sign_end = law.norm ** (-n_steps)
        sn = sign_end * math.sqrt(s["n_walkers"])
        if sn < 5.0:
            findings.append(
                Finding(
                    "warning",
                    f"[sampling] projected |<sigma>|*sqrt(M) = {sn:.3g} < 5 at "
                    f"t_final for kappa={kappa}: estimates will sign-collapse",
                )
            )
    if not findings:
        findings.append(Finding("info", "manifest passes all static checks"))
    return findings
