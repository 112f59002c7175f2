"""Two-photon temporal pair amplitude and interference correlation functions.

The mixed field is a weak coherent field (pair amplitude flat in delay) plus
a narrow-band two-photon field whose pair amplitude f(tau) is set by the
source and filter bandwidths.  Their coherent sum gives a phase-dependent
pair coincidence rate; normalizing by the large-delay baseline yields
g2(tau) = 1 + b^2 f^2 + 2 b f cos(phi), with b the relative pair-field
strength.  Slow uncorrelated phase wander is modeled by a wrapped-Gaussian
phase law, which replaces cos(phi) by cos(phi_mean) exp(-sigma^2/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TAU_UNIT_SECONDS = "s"
TAU_UNIT_SCALED = "4/dw_opo"
_TAU_UNITS = (TAU_UNIT_SECONDS, TAU_UNIT_SCALED)

# Relative bandwidth difference below which the equal-bandwidth analytic
# limit of f(tau) is used instead of the generic (divided) form.
_DEGENERATE_REL_TOL = 1e-9


@dataclass(frozen=True)
class SpectralParams:
    """Bandwidths defining the two-photon temporal amplitude.

    Attributes:
        dw_opo: down-conversion source bandwidth, rad/s, > 0.
        dw_c2: filter-cavity bandwidth, rad/s, > 0.
    """

    dw_opo: float
    dw_c2: float

    def __post_init__(self):
        for name in ("dw_opo", "dw_c2"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def ratio(self) -> float:
        return self.dw_c2 / self.dw_opo

    @property
    def tau_scale(self) -> float:
        """Delay unit used on scaled axes: 4/dw_opo, in seconds."""
        return 4.0 / self.dw_opo


@dataclass(frozen=True)
class MixModel:
    """Mixing parameters of the coherent and two-photon fields.

    Attributes:
        b: relative two-photon strength (pair field over coherent pair
           amplitude), dimensionless, >= 0.
        phi_mean: mean relative phase, radians.
        phi_sigma: RMS width of the phase wander, radians, >= 0 (0 = fixed).
        bg: incoherent background fraction added to the coincidence baseline
            before normalization, >= 0 (0 = ideal).
    """

    b: float
    phi_mean: float = 0.0
    phi_sigma: float = 0.0
    bg: float = 0.0

    def __post_init__(self):
        for name, nonneg in (("b", True), ("phi_mean", False),
                             ("phi_sigma", True), ("bg", True)):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            if nonneg and v < 0:
                raise ValueError(f"{name} must be >= 0, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def mean_cos_phi(self) -> float:
        """<cos phi> under the wrapped-Gaussian phase law."""
        return math.cos(self.phi_mean) * math.exp(-0.5 * self.phi_sigma ** 2)


@dataclass(frozen=True, eq=False)
class CorrelationCurve:
    """g2 values on a strictly increasing delay grid.

    ``tau_unit`` is "s" (seconds) or "4/dw_opo" (delay scaled by the source
    correlation-time unit).  ``sigma`` holds per-point standard errors and is
    absent (None) for analytic curves.
    """

    tau: np.ndarray
    g2: np.ndarray
    sigma: np.ndarray | None = None
    tau_unit: str = TAU_UNIT_SECONDS

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        g2 = np.asarray(self.g2, dtype=float)
        if tau.ndim != 1 or tau.size == 0:
            raise ValueError("tau must be a nonempty 1-D array")
        if g2.shape != tau.shape:
            raise ValueError("g2 must have the same shape as tau")
        if np.any(np.diff(tau) <= 0):
            raise ValueError("tau must be strictly increasing")
        if not np.all(np.isfinite(tau)) or not np.all(np.isfinite(g2)):
            raise ValueError("tau and g2 must be finite")
        if np.any(g2 < 0):
            raise ValueError("g2 must be nonnegative")
        if self.tau_unit not in _TAU_UNITS:
            raise ValueError(f"tau_unit must be one of {_TAU_UNITS}, got {self.tau_unit!r}")
        sigma = self.sigma
        if sigma is not None:
            sigma = np.asarray(sigma, dtype=float)
            if sigma.shape != tau.shape:
                raise ValueError("sigma must have the same shape as tau")
            if np.any(~np.isfinite(sigma)) or np.any(sigma < 0):
                raise ValueError("sigma must be finite and nonnegative")
            sigma.setflags(write=False)
        tau.setflags(write=False)
        g2.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "g2", g2)
        object.__setattr__(self, "sigma", sigma)

    def __len__(self) -> int:
        return self.tau.size


def pair_amplitude(tau, sp: SpectralParams):
    """Normalized two-photon temporal amplitude f(|tau|), in (0, 1].

    f(tau) = (dw_c2*dw_opo/(dw_opo - dw_c2)) *
             (exp(-|tau| dw_c2/2)/dw_c2 - exp(-|tau| dw_opo/2)/dw_opo)

    evaluated at |tau| (the physical correlation is even in delay);
    f(0) = 1 exactly and f decreases monotonically to 0.  The equal-bandwidth
    case uses the analytic limit (1 + dw|tau|/2) exp(-dw|tau|/2).

    ``tau`` is in seconds; scalar or array, vectorized.
    """
    a = sp.dw_c2
    b = sp.dw_opo
    t = np.abs(np.asarray(tau, dtype=float))
    if abs(b - a) <= _DEGENERATE_REL_TOL * max(a, b):
        x = 0.5 * b * t
        out = (1.0 + x) * np.exp(-x)
    else:
        out = (b * np.exp(-0.5 * a * t) - a * np.exp(-0.5 * b * t)) / (b - a)
    return out if out.ndim else float(out)


def gamma2(tau, a2: float, bmag: float, phi: float, sp: SpectralParams):
    """Unnormalized pair coincidence rate |A^2 + B f(tau) e^{i phi}|^2.

    Args:
        tau: delay, seconds (scalar or array).
        a2: coherent intensity |A|^2, >= 0.
        bmag: two-photon pair-amplitude magnitude |B|, >= 0.
        phi: relative phase, radians.
    """
    a2 = float(a2)
    bmag = float(bmag)
    if a2 < 0:
        raise ValueError(f"a2 must be >= 0, got {a2}")
    if bmag < 0:
        raise ValueError(f"bmag must be >= 0, got {bmag}")
    f = np.asarray(pair_amplitude(tau, sp))
    out = a2 ** 2 + (bmag * f) ** 2 + 2.0 * a2 * bmag * f * math.cos(phi)
    out = np.maximum(out, 0.0)  # clamp fp round-off at exact cancellation
    return out if out.ndim else float(out)


def _g2_kernel(tau, b: float, mean_cos: float, bg: float, sp: SpectralParams):
    f = np.asarray(pair_amplitude(tau, sp))
    bf = b * f
    raw = 1.0 + bf ** 2 + 2.0 * bf * mean_cos
    raw = np.maximum(raw, 0.0)
    out = (raw + bg) / (1.0 + bg)
    return out if out.ndim else float(out)


def g2_model(tau, mm: MixModel, sp: SpectralParams):
    """Fixed-phase normalized correlation g2(tau) = 1 + b^2 f^2 + 2 b f cos(phi).

    Requires ``mm.phi_sigma == 0``; an incoherent background fraction bg
    lifts the baseline before normalization:
    g2 -> (g2 + bg)/(1 + bg).
    """
    if mm.phi_sigma != 0.0:
        raise ValueError(
            "g2_model is the fixed-phase form and requires phi_sigma=0; "
            "use g2_phase_averaged for phi_sigma > 0"
        )
    return _g2_kernel(tau, mm.b, math.cos(mm.phi_mean), mm.bg, sp)


def g2_phase_averaged(tau, mm: MixModel, sp: SpectralParams):
    """g2(tau) averaged over wrapped-Gaussian phase wander.

    cos(phi) is replaced by its circular mean
    cos(phi_mean) * exp(-phi_sigma^2/2); phi_sigma -> infinity recovers the
    uniform-phase limit 1 + b^2 f^2 (pure bunching).
    """
    return _g2_kernel(tau, mm.b, mm.mean_cos_phi, mm.bg, sp)


def curve(mm: MixModel, sp: SpectralParams, tau_grid,
          tau_unit: str = TAU_UNIT_SECONDS) -> CorrelationCurve:
    """Phase-averaged g2 evaluated on a strictly increasing delay grid.

    ``tau_unit`` selects the grid unit: "s" for seconds, "4/dw_opo" for
    delays in units of the source correlation time 4/dw_opo.
    """
    grid = np.asarray(tau_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("tau_grid must be a nonempty 1-D array")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("tau_grid must be strictly increasing")
    if tau_unit == TAU_UNIT_SECONDS:
        tau_s = grid
    elif tau_unit == TAU_UNIT_SCALED:
        tau_s = grid * sp.tau_scale
    else:
        raise ValueError(f"tau_unit must be one of {_TAU_UNITS}, got {tau_unit!r}")
    g2 = np.asarray(g2_phase_averaged(tau_s, mm, sp))
    return CorrelationCurve(tau=grid, g2=g2, sigma=None, tau_unit=tau_unit)


def double_dip_zeros(mm: MixModel, sp: SpectralParams) -> tuple[float, float] | None:
    """Delays (+-tau*, seconds) where the pi-phase correlation vanishes.

    At phi_mean = pi (no phase noise, no background) g2 = (1 - b f)^2, which
    vanishes where f(tau) = 1/b.  For b > 1 that happens at a symmetric pair
    of nonzero delays, found by bracketed bisection to relative tolerance
    1e-10; b = 1 gives (0, 0) (cancellation at zero delay); b < 1 gives None
    (g2 > 0 everywhere).
    """
    if abs(mm.phi_mean - math.pi) > 1e-12:
        raise ValueError("double_dip_zeros requires phi_mean = pi")
    if mm.phi_sigma != 0.0:
        raise ValueError("double_dip_zeros requires phi_sigma = 0")
    if mm.bg != 0.0:
        raise ValueError("double_dip_zeros requires bg = 0")
    if mm.b < 1.0:
        return None
    if mm.b == 1.0:
        return (0.0, 0.0)

    target = 1.0 / mm.b
    # Bracket: f is 1 at 0 and strictly decreasing, so expand until below target.
    hi = 4.0 / min(sp.dw_opo, sp.dw_c2)
    while pair_amplitude(hi, sp) > target:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if pair_amplitude(mid, sp) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * hi:
            break
    tau_star = 0.5 * (lo + hi)
    return (-tau_star, tau_star)
