"""From raw coincidence histograms to normalized curves, model fits, and
violation significance.

Normalization divides by the mean count over a large-delay baseline window
(the operational estimate of the infinite-delay coincidence rate).  Fitting
minimizes the error-weighted sum of squared residuals with a damped
Gauss-Newton iteration; Poisson errors are treated as Gaussian with
sigma = sqrt(N), regularized to 1 for empty bins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .correlation import (
    TAU_UNIT_SCALED,
    TAU_UNIT_SECONDS,
    CorrelationCurve,
    MixModel,
    SpectralParams,
    g2_phase_averaged,
    pair_amplitude,
)
from .measurement import CoincidenceHistogram
from .nonclassical import (
    Classification,
    ViolationReport,
    check_schwartz,
    classify_feature,
)

PARAM_NAMES = ("b", "phi_mean", "phi_sigma", "bg", "dw_opo", "dw_c2", "baseline")

# Lower parameter bounds; upper bounds are unbounded.  phi_mean is a phase
# and unbounded on both sides.
_LOWER_BOUNDS = {
    "b": 0.0,
    "phi_mean": -np.inf,
    "phi_sigma": 0.0,
    "bg": 0.0,
    "dw_opo": 1e-300,
    "dw_c2": 1e-300,
    "baseline": 1e-300,
}

_AUTO_BASELINE_FRACTION = 0.75  # |tau| >= this fraction of max|tau|
_MIN_AUTO_BASELINE_BINS = 20


@dataclass(frozen=True)
class FitResult:
    """Outcome of a weighted least-squares model fit.

    ``params`` holds all model parameters (fitted values for free ones,
    initial values for fixed ones); ``errors`` holds standard errors for the
    free parameters from the local quadratic approximation of the objective,
    present only when converged.  ``chi2_trace`` records the objective after
    each accepted step (strictly decreasing).
    """

    params: dict[str, float]
    errors: dict[str, float] | None
    chi2: float
    chi2_dof: float
    converged: bool
    n_iter: int
    free: tuple[str, ...]
    n_points: int
    chi2_trace: tuple[float, ...]


@dataclass(frozen=True)
class AnalysisReport:
    """Bundle produced by the histogram analysis pipeline."""

    curve: CorrelationCurve
    classification: Classification
    fit: FitResult
    violations: ViolationReport


def normalize_histogram(hist: CoincidenceHistogram,
                        baseline_window: tuple[float, float] | None = None,
                        ) -> CorrelationCurve:
    """Normalize a histogram by its large-delay baseline.

    ``baseline_window`` = (lo, hi) selects baseline bins by absolute delay:
    lo <= |tau| <= hi (both tails), in seconds.  When None, the outermost
    quarter of the window by |tau| is used and must contain at least 20
    bins.  g2_hat = counts / C_bar with C_bar the mean count over the
    baseline bins; per-point errors combine sqrt(counts) (regularized to 1
    for empty bins) with the baseline-mean error in quadrature.
    """
    counts = hist.counts.astype(float)
    tau = hist.tau
    abstau = np.abs(tau)

    if baseline_window is None:
        mask = abstau >= _AUTO_BASELINE_FRACTION * float(np.max(abstau))
        if int(np.sum(mask)) < _MIN_AUTO_BASELINE_BINS:
            raise ValueError(
                f"auto baseline window has {int(np.sum(mask))} bins, "
                f"needs >= {_MIN_AUTO_BASELINE_BINS}; pass baseline_window explicitly"
            )
    else:
        lo, hi = baseline_window
        if not (0 <= lo < hi):
            raise ValueError(
                f"baseline_window must satisfy 0 <= lo < hi, got {baseline_window!r}"
            )
        mask = (abstau >= lo) & (abstau <= hi)
        if not np.any(mask):
            raise ValueError(f"baseline window {baseline_window!r} selects no bins")

    n_w = int(np.sum(mask))
    c_bar = float(np.mean(counts[mask]))
    if c_bar <= 0:
        raise ValueError("baseline mean count is zero; cannot normalize")
    sigma_cbar = math.sqrt(float(np.sum(counts[mask]))) / n_w

    g2_hat = counts / c_bar
    var_counts = np.maximum(counts, 1.0)  # sigma=1 regularization for empty bins
    sigma = np.sqrt(var_counts / c_bar ** 2 + (g2_hat * sigma_cbar / c_bar) ** 2)
    return CorrelationCurve(tau=tau, g2=g2_hat, sigma=sigma,
                            tau_unit=TAU_UNIT_SECONDS)


def g2_curve_model(tau, params: dict[str, float], tau_unit: str = TAU_UNIT_SECONDS):
    """Phase-averaged model evaluated from a flat parameter dict.

    ``baseline`` multiplies the normalized model, absorbing a mis-estimated
    normalization constant.
    """
    sp = SpectralParams(dw_opo=params["dw_opo"], dw_c2=params["dw_c2"])
    mm = MixModel(b=params["b"], phi_mean=params["phi_mean"],
                  phi_sigma=params["phi_sigma"], bg=params["bg"])
    tau_s = np.asarray(tau, dtype=float)
    if tau_unit == TAU_UNIT_SCALED:
        tau_s = tau_s * sp.tau_scale
    elif tau_unit != TAU_UNIT_SECONDS:
        raise ValueError(f"unknown tau_unit {tau_unit!r}")
    return params["baseline"] * np.asarray(g2_phase_averaged(tau_s, mm, sp))


def _validate_params(params: dict[str, float]) -> dict[str, float]:
    unknown = set(params) - set(PARAM_NAMES)
    if unknown:
        raise ValueError(f"unknown parameters: {sorted(unknown)}")
    missing = set(PARAM_NAMES) - set(params)
    if missing:
        raise ValueError(f"missing parameters: {sorted(missing)}")
    out = {k: float(params[k]) for k in PARAM_NAMES}
    for k, v in out.items():
        if not math.isfinite(v):
            raise ValueError(f"parameter {k} must be finite, got {v!r}")
        if v < _LOWER_BOUNDS[k]:
            raise ValueError(f"parameter {k}={v!r} below bound {_LOWER_BOUNDS[k]!r}")
    return out


def numeric_jacobian(fun, theta: np.ndarray, lower: np.ndarray,
                     rel_step: float = 1e-6) -> np.ndarray:
    """Difference Jacobian of a vector function, aware of lower bounds.

    Central differences with per-parameter step rel_step * max(|theta_j|, 1);
    falls back to a forward difference when the backward point would cross
    the parameter's lower bound.
    """
    theta = np.asarray(theta, dtype=float)
    f0 = None
    cols = []
    for j in range(theta.size):
        h = rel_step * max(abs(theta[j]), 1.0)
        up = theta.copy()
        up[j] += h
        down = theta.copy()
        down[j] -= h
        if down[j] < lower[j]:
            if f0 is None:
                f0 = np.asarray(fun(theta), dtype=float)
            cols.append((np.asarray(fun(up), dtype=float) - f0) / h)
        else:
            cols.append(
                (np.asarray(fun(up), dtype=float) - np.asarray(fun(down), dtype=float))
                / (2.0 * h)
            )
    return np.column_stack(cols)


def fit_model(curve: CorrelationCurve, init: dict[str, float],
              free: tuple[str, ...] | list[str],
              max_iter: int = 500) -> FitResult:
    """Fit the phase-averaged model to a curve with per-point errors.

    Minimizes sum(((g2 - model)/sigma)^2) over the ``free`` parameters by a
    damped Gauss-Newton iteration with numerically differenced sensitivities.
    Steps are accepted only when the objective decreases; the damping factor
    grows on rejection and on singular normal equations.  Convergence:
    relative objective change < 1e-10 or step norm < 1e-8.

    Non-convergence returns converged=False with the best parameters found.
    """
    if curve.sigma is None:
        raise ValueError("fit_model requires a curve with per-point errors (sigma)")
    if len(curve) < 10:
        raise ValueError(f"need >= 10 points to fit, got {len(curve)}")
    params = _validate_params(init)
    free = tuple(free)
    if not free:
        raise ValueError("free must name at least one parameter")
    unknown = set(free) - set(PARAM_NAMES)
    if unknown:
        raise ValueError(f"unknown free parameters: {sorted(unknown)}")

    tau = curve.tau
    y = curve.g2
    w = 1.0 / curve.sigma
    lower = np.array([_LOWER_BOUNDS[k] for k in free])

    def residuals(theta: np.ndarray) -> np.ndarray:
        p = dict(params)
        p.update(zip(free, theta))
        return (y - g2_curve_model(tau, p, curve.tau_unit)) * w

    theta = np.array([params[k] for k in free], dtype=float)
    r = residuals(theta)
    chi2 = float(r @ r)
    trace = [chi2]
    lam = 1e-3
    converged = False
    n_iter = 0

    for _ in range(max_iter):
        jac = numeric_jacobian(residuals, theta, lower)
        a = jac.T @ jac
        g = jac.T @ r
        damp = np.maximum(np.diag(a), 1e-12 * max(float(np.max(np.diag(a))), 1e-300))

        accepted = False
        step = None
        chi2_new = chi2
        while lam < 1e15:
            try:
                step = np.linalg.solve(a + lam * np.diag(damp), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = np.maximum(theta + step, lower)
            r_new = residuals(trial)
            chi2_new = float(r_new @ r_new)
            if chi2_new < chi2:
                theta = trial
                r = r_new
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break  # persistent rejection or singularity: give up, flag below
        n_iter += 1
        dchi = chi2 - chi2_new
        chi2 = chi2_new
        trace.append(chi2)
        lam = max(lam / 3.0, 1e-12)
        if dchi < 1e-10 * max(chi2, 1.0) or float(np.linalg.norm(step)) < 1e-8 * (
            1.0 + float(np.linalg.norm(theta))
        ):
            converged = True
            break

    params.update(zip(free, theta))
    dof = max(len(curve) - len(free), 1)
    errors = None
    if converged:
        jac = numeric_jacobian(residuals, theta, lower)
        cov = np.linalg.pinv(jac.T @ jac)
        errors = {k: float(math.sqrt(max(cov[i, i], 0.0)))
                  for i, k in enumerate(free)}
    return FitResult(
        params=params,
        errors=errors,
        chi2=chi2,
        chi2_dof=chi2 / dof,
        converged=converged,
        n_iter=n_iter,
        free=free,
        n_points=len(curve),
        chi2_trace=tuple(trace),
    )


def initial_guess(curve: CorrelationCurve, sp: SpectralParams) -> dict[str, float]:
    """Closed-form starting point from a weighted linear fit on {1, f, f^2}.

    With the pair amplitude fixed by ``sp``, the phase-averaged model is
    linear in (1, f, f^2) with coefficients (1, 2 b <cos phi>, b^2); solving
    the weighted normal equations gives b, the sign of <cos phi> (hence the
    phase branch 0 or pi), and the phase-noise width.
    """
    if curve.tau_unit == TAU_UNIT_SCALED:
        tau_s = curve.tau * sp.tau_scale
    else:
        tau_s = curve.tau
    f = np.asarray(pair_amplitude(tau_s, sp))
    w = 1.0 / curve.sigma if curve.sigma is not None else np.ones_like(f)
    basis = np.column_stack([np.ones_like(f), f, f * f])
    coef, *_ = np.linalg.lstsq(basis * w[:, None], curve.g2 * w, rcond=None)
    c0, c1, c2 = coef

    b0 = math.sqrt(max(float(c2), 0.0))
    if b0 > 1e-6:
        mean_cos = float(c1) / (2.0 * b0)
    else:
        mean_cos = 0.0
    phi0 = 0.0 if mean_cos >= 0 else math.pi
    m = min(abs(mean_cos), 1.0)
    if m < 1e-12:
        sigma0 = 50.0  # uniform-phase limit
    else:
        sigma0 = math.sqrt(max(-2.0 * math.log(m), 0.0))
    return {
        "b": b0,
        "phi_mean": phi0,
        "phi_sigma": sigma0,
        "bg": 0.0,
        "dw_opo": sp.dw_opo,
        "dw_c2": sp.dw_c2,
        "baseline": max(float(c0), 1e-6),
    }


def violation_significance(curve: CorrelationCurve) -> ViolationReport:
    """Classical-inequality report with z-scores; requires per-point errors."""
    if curve.sigma is None:
        raise ValueError("violation_significance requires a curve with sigma")
    return check_schwartz(curve)


def analyze_histogram(hist: CoincidenceHistogram, sp_init: SpectralParams,
                      baseline_window: tuple[float, float] | None = None,
                      fit_bandwidths: bool = False,
                      release_phase: bool = True,
                      classify_tol: float = 0.02) -> AnalysisReport:
    """Full pipeline: normalize, fit, classify, and test inequalities.

    The first fit stage holds the mean phase at the branch (0 or pi) picked
    by the closed-form initializer, freeing (b, phi_sigma) and optionally the
    bandwidths; a second stage releases the mean phase.  The feature
    classification is computed from the fitted model evaluated on the data
    grid, so it reflects the recovered shape rather than bin noise.
    """
    curve = normalize_histogram(hist, baseline_window)
    init = initial_guess(curve, sp_init)

    free = ["b", "phi_sigma"]
    if fit_bandwidths:
        free += ["dw_opo", "dw_c2"]
    fit = fit_model(curve, init, tuple(free))
    if release_phase:
        fit = fit_model(curve, fit.params, tuple(free) + ("phi_mean",))

    fitted = CorrelationCurve(
        tau=curve.tau,
        g2=np.maximum(np.asarray(g2_curve_model(curve.tau, fit.params)), 0.0),
        sigma=None,
        tau_unit=curve.tau_unit,
    )
    classification = classify_feature(fitted, tol=classify_tol)
    violations = violation_significance(curve)
    return AnalysisReport(
        curve=curve, classification=classification, fit=fit, violations=violations
    )
