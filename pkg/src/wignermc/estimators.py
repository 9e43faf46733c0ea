"""Signed-sample estimators: ratio means, jackknife errors, the linear
quantum correction and kappa-scan fits.

Expectation values over the signed ensemble are the ratio
<O> = sum_a sigma_a O_a / sum_a sigma_a; all errors here are delete-one-block
jackknife errors of that ratio.  Paired variants exploit common random
numbers between a classical (kappa = 0) run and a kappa > 0 run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class SignCollapseError(RuntimeError):
    """Signed average aborted: the mean sign is zero or below the noise floor."""


@dataclass
class ObservableSeries:
    """Time series of one signed observable with jackknife errors."""

    times: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    mean_sign: np.ndarray
    kappa: float
    sample_size: int
    name: str = "obs"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.times)
        if not (len(self.values) == len(self.errors) == len(self.mean_sign) == n):
            raise ValueError("series arrays must have equal length")


def signed_mean(values, signs) -> float:
    """Ratio estimator sum(sigma*O)/sum(sigma)."""
    values = np.asarray(values, float)
    signs = np.asarray(signs, float)
    if values.shape != signs.shape or values.size == 0:
        raise ValueError("values and signs must be equal-length, non-empty")
    denom = signs.sum()
    if denom == 0.0:
        raise SignCollapseError("sum of signs is zero")
    return float(np.dot(signs, values) / denom)


def _block_edges(n: int, n_blocks: int) -> np.ndarray:
    if n_blocks < 2:
        raise ValueError("need at least 2 blocks")
    if n < n_blocks:
        raise ValueError("fewer samples than blocks")
    size = n // n_blocks
    edges = np.arange(0, size * n_blocks + 1, size)
    edges[-1] = n  # remainder folded into the last block
    return edges


def block_sums(values, signs, n_blocks: int):
    """Per-block (sum sigma, sum sigma*O) over a contiguous partition."""
    values = np.asarray(values, float)
    signs = np.asarray(signs, float)
    edges = _block_edges(values.size, n_blocks)
    s = np.add.reduceat(signs, edges[:-1])
    so = np.add.reduceat(signs * values, edges[:-1])
    return s, so


def jackknife_from_blocks(sign_sums, signed_value_sums):
    """Delete-one-block jackknife of the signed ratio from block sums."""
    s = np.asarray(sign_sums, float)
    so = np.asarray(signed_value_sums, float)
    s_tot, so_tot = s.sum(), so.sum()
    if s_tot == 0.0:
        raise SignCollapseError("sum of signs is zero")
    n = s.size
    s_del = s_tot - s
    if np.any(s_del == 0.0):
        raise SignCollapseError("sum of signs vanishes in a jackknife deletion")
    r_full = so_tot / s_tot
    r_del = (so_tot - so) / s_del
    r_bar = r_del.mean()
    err = math.sqrt((n - 1) / n * np.sum((r_del - r_bar) ** 2))
    return float(r_full), float(err)


def jackknife(
    values,
    signs,
    n_blocks: int = 50,
    bias_correct: bool = False,
    min_sign_sn: float = 0.0,
):
    """Jackknife (value, error) of the signed ratio over ``n_blocks`` blocks.

    ``min_sign_sn`` > 0 aborts with SignCollapseError when
    |mean sign|*sqrt(M) falls below it (signal under the sign-noise floor).
    """
    values = np.asarray(values, float)
    signs = np.asarray(signs, float)
    m = values.size
    mean_sign = signs.mean()
    if min_sign_sn > 0.0 and abs(mean_sign) * math.sqrt(m) < min_sign_sn:
        raise SignCollapseError(
            f"|<sigma>| sqrt(M) = {abs(mean_sign) * math.sqrt(m):.2f} "
            f"< {min_sign_sn}"
        )
    s, so = block_sums(values, signs, n_blocks)
    value, err = jackknife_from_blocks(s, so)
    if bias_correct:
        n = s.size
        s_tot, so_tot = s.sum(), so.sum()
        r_del = (so_tot - so) / (s_tot - s)
        value = n * value - (n - 1) * float(r_del.mean())
    return value, err


def lqc_estimate(series_classical, series_kappa, kappa: float) -> ObservableSeries:
    """Pointwise O_cl + (O_kappa - O_cl)/kappa with errors in quadrature.

    For paired runs prefer ``lqc_from_blocks``, which jackknifes the combined
    statistic on the shared block partition.
    """
    if not 0.0 < kappa <= 1.0:
        raise ValueError("kappa must lie in (0, 1]")
    if not np.array_equal(series_classical.times, series_kappa.times):
        raise ValueError("time grids do not match")
    w_cl = 1.0 - 1.0 / kappa
    values = w_cl * series_classical.values + series_kappa.values / kappa
    errors = np.sqrt(
        (w_cl * series_classical.errors) ** 2 + (series_kappa.errors / kappa) ** 2
    )
    return ObservableSeries(
        times=series_classical.times.copy(),
        values=values,
        errors=errors,
        mean_sign=series_kappa.mean_sign.copy(),
        kappa=kappa,
        sample_size=min(series_classical.sample_size, series_kappa.sample_size),
        name=series_kappa.name,
        metadata={"estimator": "lqc", "kappa": kappa, "paired": False},
    )


def lqc_from_blocks(
    cl_sign_sums, cl_value_sums, k_sign_sums, k_value_sums, counts, kappa: float
):
    """Paired-sample jackknife of O_cl + (O_kappa - O_cl)/kappa.

    All block arrays must come from the same walker partition (common random
    numbers); ``counts`` are per-block walker counts for the classical mean.
    """
    if not 0.0 < kappa <= 1.0:
        raise ValueError("kappa must lie in (0, 1]")
    cs = np.asarray(cl_sign_sums, float)
    cv = np.asarray(cl_value_sums, float)
    ks = np.asarray(k_sign_sums, float)
    kv = np.asarray(k_value_sums, float)
    cnt = np.asarray(counts, float)
    n = cs.size
    w_cl = 1.0 - 1.0 / kappa

    def combined(mask_out=None):
        sel = np.ones(n, bool)
        if mask_out is not None:
            sel[mask_out] = False
        cs_t, cv_t = cs[sel].sum(), cv[sel].sum()
        ks_t, kv_t = ks[sel].sum(), kv[sel].sum()
        if cs_t == 0.0 or ks_t == 0.0:
            raise SignCollapseError("sum of signs vanishes in a deletion")
        return w_cl * (cv_t / cs_t) + (kv_t / ks_t) / kappa

    full = combined()
    deleted = np.array([combined(i) for i in range(n)])
    err = math.sqrt((n - 1) / n * np.sum((deleted - deleted.mean()) ** 2))
    del cnt  # counts kept in the signature for schema symmetry
    return float(full), float(err)


@dataclass
class KappaFit:
    """Polynomial fit in kappa constrained through the kappa = 0 anchor."""

    degree: int
    anchor: float
    anchor_error: float
    coefficients: np.ndarray   # c_1..c_degree of O(k) = anchor + sum c_d k^d
    chi2: float
    dof: int
    extrapolation: float       # O(kappa = 1)
    extrapolation_error: float

    def __call__(self, kappa) -> np.ndarray:
        kappa = np.asarray(kappa, float)
        powers = np.stack(
            [kappa ** (d + 1) for d in range(self.degree)], axis=-1
        )
        return self.anchor + powers @ self.coefficients


def kappa_scan_fit(kappa_values, observable_values, errors=None, degree: int = 1):
    """Weighted polynomial fit through the kappa = 0 value, extrapolated to 1.

    The kappa = 0 entry is the anchor (not a fitted point); remaining points
    need at least ``degree`` entries.  Errors may be omitted for exact
    synthetic data (unweighted fit, anchor error zero).
    """
    kappas = np.asarray(kappa_values, float)
    values = np.asarray(observable_values, float)
    if errors is None:
        errors = np.zeros_like(values)
    errors = np.asarray(errors, float)
    if not (kappas.shape == values.shape == errors.shape):
        raise ValueError("kappa, value and error arrays must align")
    anchor_idx = np.nonzero(kappas == 0.0)[0]
    if anchor_idx.size != 1:
        raise ValueError("exactly one kappa = 0 anchor required")
    ai = anchor_idx[0]
    anchor, anchor_err = float(values[ai]), float(errors[ai])
    sel = np.ones(kappas.size, bool)
    sel[ai] = False
    k, y, e = kappas[sel], values[sel], errors[sel]
    if np.unique(k).size < degree:
        raise ValueError("underdetermined fit: need >= degree distinct kappa > 0")

    w = np.ones_like(y) if np.all(e == 0.0) else 1.0 / e**2
    x = np.stack([k ** (d + 1) for d in range(degree)], axis=1)
    xtw = x.T * w
    gram = xtw @ x
    coef = np.linalg.solve(gram, xtw @ (y - anchor))
    resid = y - anchor - x @ coef
    chi2 = float(np.sum(w * resid**2))
    dof = y.size - degree

    # linear operator of the extrapolation for exact error propagation:
    # O(1) = anchor*(1 - u.A.1) + (u.A).y  with A = gram^-1 X^T W
    a_op = np.linalg.solve(gram, xtw)
    u_a = a_op.sum(axis=0)                       # row vector applied to y
    anchor_weight = 1.0 - float(u_a.sum())
    extrap = anchor + float(coef.sum())
    var = (anchor_weight * anchor_err) ** 2 + float(np.sum((u_a * e) ** 2))
    return KappaFit(
        degree=degree,
        anchor=anchor,
        anchor_error=anchor_err,
        coefficients=coef,
        chi2=chi2,
        dof=dof,
        extrapolation=extrap,
        extrapolation_error=math.sqrt(var),
    )


@dataclass
class SignDiagnostics:
    """Empirical vs predicted sign decay along a run."""

    times: np.ndarray
    mean_sign: np.ndarray
    neg_fraction: np.ndarray
    predicted_mean_sign: np.ndarray
    predicted_neg_fraction: np.ndarray
    signal_to_noise: np.ndarray       # <sigma> * sqrt(M)


def sign_diagnostics(times, mean_sign, neg_fraction, law, dt: float, sample_size: int):
    """Attach norm^-n predictions to empirical per-time sign tallies."""
    times = np.asarray(times, float)
    mean_sign = np.asarray(mean_sign, float)
    neg_fraction = np.asarray(neg_fraction, float)
    steps = np.rint(times / dt).astype(int)
    predicted = law.norm ** (-steps.astype(float))
    return SignDiagnostics(
        times=times,
        mean_sign=mean_sign,
        neg_fraction=neg_fraction,
        predicted_mean_sign=predicted,
        predicted_neg_fraction=0.5 * (1.0 - predicted),
        signal_to_noise=mean_sign * math.sqrt(sample_size),
    )


def fit_sign_decay_rate(times, neg_fraction, min_margin: float = 0.05):
    """Fit P_-(t) = (1 - e^{-r t})/2; returns the decay rate r.

    Uses the linearizing transform log(1 - 2 P_-) = -r t on points safely
    below saturation (1 - 2P_- > ``min_margin``).
    """
    times = np.asarray(times, float)
    neg = np.asarray(neg_fraction, float)
    y = 1.0 - 2.0 * neg
    sel = (y > min_margin) & (times > 0)
    if sel.sum() < 2:
        raise ValueError("not enough unsaturated points to fit the decay")
    t, ly = times[sel], np.log(y[sel])
    rate = -float(np.dot(t, ly) / np.dot(t, t))
    return rate
