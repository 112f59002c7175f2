"""Classical-inequality tests and feature classification for g2 curves.

Any classical intensity-fluctuation model satisfies

    (a)  g2(0) >= 1
    (b)  g2(0) >= g2(tau)   for all tau
    (c)  |g2(0) - 1| >= |g2(tau) - 1|   for all tau

so a violation of any of them certifies nonclassical light.  Margins are
signed violation depths computed from central values; when the curve carries
per-point standard errors a z-score (margin over its propagated error) is
attached, but never gates the violation booleans.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .correlation import CorrelationCurve

DEFAULT_CLASSIFY_TOL = 0.02


class NoZeroDelayError(ValueError):
    """The delay grid has no point within one bin spacing of tau = 0."""


class FeatureClass(enum.Enum):
    FLAT = "flat"
    BUNCHING = "bunching"
    ANTIBUNCHING_ZERO = "antibunching_zero"
    DOUBLE_DIP = "double_dip"


@dataclass(frozen=True)
class InequalityCheck:
    """Outcome for one classical inequality.

    ``margin`` is the signed violation depth (positive means violated);
    ``witness_tau`` is the delay of maximal violation, present only when
    violated; ``z_score`` is margin over its propagated standard error,
    present only when the curve carries sigma.
    """

    violated: bool
    margin: float
    witness_tau: float | None = None
    z_score: float | None = None


@dataclass(frozen=True)
class Classification:
    feature: FeatureClass
    low_confidence: bool = False


@dataclass(frozen=True)
class ViolationReport:
    """Results of the three classical-inequality tests on one curve.

    ``zero_tau`` is the grid point used as zero delay; when the grid has no
    exact zero the nearest bin is used and ``zero_is_nearest_bin`` is set.
    """

    ineq_a: InequalityCheck
    ineq_b: InequalityCheck
    ineq_c: InequalityCheck
    zero_tau: float
    zero_is_nearest_bin: bool

    @property
    def any_violated(self) -> bool:
        return self.ineq_a.violated or self.ineq_b.violated or self.ineq_c.violated


def zero_delay_index(curve: CorrelationCurve) -> int:
    """Index of the grid point nearest tau = 0, within one bin spacing."""
    tau = curve.tau
    i0 = int(np.argmin(np.abs(tau)))
    if tau.size > 1:
        spacing = float(np.median(np.diff(tau)))
    else:
        spacing = np.inf
    if abs(tau[i0]) > spacing:
        raise NoZeroDelayError(
            f"no grid point within one bin spacing ({spacing:g}) of tau=0; "
            f"nearest is {tau[i0]:g}"
        )
    return i0


def check_schwartz(curve: CorrelationCurve) -> ViolationReport:
    """Evaluate the three classical inequalities over the curve's grid.

    Margins: (a) 1 - g2(0); (b) max_tau(g2(tau) - g2(0));
    (c) max_tau(|g2(tau)-1| - |g2(0)-1|).  Violation booleans use central
    values only (margin > 0); z-scores are reported separately when sigma is
    present.
    """
    i0 = zero_delay_index(curve)
    tau = curve.tau
    g2 = curve.g2
    sigma = curve.sigma
    g0 = float(g2[i0])

    margin_a = 1.0 - g0
    z_a = float(margin_a / sigma[i0]) if sigma is not None else None
    ineq_a = InequalityCheck(
        violated=margin_a > 0,
        margin=float(margin_a),
        witness_tau=float(tau[i0]) if margin_a > 0 else None,
        z_score=z_a,
    )

    diff_b = g2 - g0
    iw_b = int(np.argmax(diff_b))
    margin_b = float(diff_b[iw_b])
    z_b = (
        float(margin_b / np.hypot(sigma[iw_b], sigma[i0]))
        if sigma is not None
        else None
    )
    ineq_b = InequalityCheck(
        violated=margin_b > 0,
        margin=margin_b,
        witness_tau=float(tau[iw_b]) if margin_b > 0 else None,
        z_score=z_b,
    )

    diff_c = np.abs(g2 - 1.0) - abs(g0 - 1.0)
    iw_c = int(np.argmax(diff_c))
    margin_c = float(diff_c[iw_c])
    z_c = (
        float(margin_c / np.hypot(sigma[iw_c], sigma[i0]))
        if sigma is not None
        else None
    )
    ineq_c = InequalityCheck(
        violated=margin_c > 0,
        margin=margin_c,
        witness_tau=float(tau[iw_c]) if margin_c > 0 else None,
        z_score=z_c,
    )

    return ViolationReport(
        ineq_a=ineq_a,
        ineq_b=ineq_b,
        ineq_c=ineq_c,
        zero_tau=float(tau[i0]),
        zero_is_nearest_bin=bool(tau[i0] != 0.0),
    )


def _local_minima(g2: np.ndarray) -> np.ndarray:
    """Indices of interior local minima (plateau edges count once)."""
    idx = []
    for i in range(1, g2.size - 1):
        if g2[i] <= g2[i - 1] and g2[i] <= g2[i + 1] and (
            g2[i] < g2[i - 1] or g2[i] < g2[i + 1]
        ):
            idx.append(i)
    return np.asarray(idx, dtype=int)


def classify_feature(curve: CorrelationCurve,
                     tol: float = DEFAULT_CLASSIFY_TOL) -> Classification:
    """Classify the correlation curve's shape.

    flat:              max |g2 - 1| < tol
    double_dip:        local minima on both sides of zero delay, each below
                       g2(0) - tol
    bunching:          global maximum at zero delay and g2(0) > 1 + tol
    antibunching_zero: global minimum at zero delay and g2(0) < 1 - tol

    A curve matching none of these is reported flat with the low-confidence
    flag set.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol!r}")
    i0 = zero_delay_index(curve)
    g2 = curve.g2
    tau = curve.tau
    g0 = float(g2[i0])

    if float(np.max(np.abs(g2 - 1.0))) < tol:
        return Classification(FeatureClass.FLAT, low_confidence=False)

    minima = _local_minima(g2)
    if minima.size:
        left = minima[tau[minima] < tau[i0]]
        right = minima[tau[minima] > tau[i0]]
        if left.size and right.size:
            best_left = float(np.min(g2[left]))
            best_right = float(np.min(g2[right]))
            if best_left < g0 - tol and best_right < g0 - tol:
                return Classification(FeatureClass.DOUBLE_DIP, low_confidence=False)

    if g0 >= float(np.max(g2)) and g0 > 1.0 + tol:
        return Classification(FeatureClass.BUNCHING, low_confidence=False)
    if g0 <= float(np.min(g2)) and g0 < 1.0 - tol:
        return Classification(FeatureClass.ANTIBUNCHING_ZERO, low_confidence=False)

    return Classification(FeatureClass.FLAT, low_confidence=True)
