"""Monte Carlo emulator of the coincidence-counting measurement.

Start-stop delays from two detectors are histogrammed by a time-to-analog
converter whose electronic offset places zero delay inside the window.  Each
run holds the relative phase fixed at a value drawn from the wrapped-Gaussian
phase law, computes the expected counts per delay bin from the interference
model plus a flat scattering background, and draws independent Poisson counts
per bin.

This is an honest measurement emulator, not a physics engine: counts are
Poisson noise around the quantum-model mean.  A classical event-level
click-stream could never produce g2(0) < 1, so no such stream is simulated.
All randomness derives from the single config seed via per-run substreams,
so results are reproducible bit-for-bit and independent of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .correlation import MixModel, SpectralParams, g2_model, g2_phase_averaged

_MAX_EXPECTED_PER_BIN = 1e12


def wrap_angle(phi):
    """Wrap an angle to (-pi, pi]."""
    return phi - 2.0 * math.pi * np.ceil((phi - math.pi) / (2.0 * math.pi))


@dataclass(frozen=True)
class DetectionConfig:
    """Coincidence-measurement configuration.

    Attributes:
        bin_width: TAC bin width, seconds.
        n_bins: number of delay bins.
        zero_offset: electronic delay placing tau=0 inside the window,
            seconds; must lie in [0, n_bins*bin_width).
        singles_rate: coherent-dominated singles rate at each detector,
            counts/s (before detection efficiency).
        pair_fraction: two-photon source intensity relative to the coherent
            intensity; recorded for bookkeeping, the interference strength is
            set independently by MixModel.b.
        efficiency: detector quantum efficiency, in (0, 1].
        bg_flat_rate: flat scattering background, counts/s per bin.
        run_seconds: duration of one measurement run (phase held fixed).
        n_runs: number of runs summed into the histogram.
        seed: 64-bit RNG seed; the only entropy source.
    """

    bin_width: float = 0.5e-9
    n_bins: int = 256
    zero_offset: float = 47.2e-9
    singles_rate: float = 2.0e5
    pair_fraction: float = 0.1
    efficiency: float = 1.0
    bg_flat_rate: float = 0.0
    run_seconds: float = 5.0
    n_runs: int = 1
    seed: int = 12345

    def __post_init__(self):
        if not (math.isfinite(self.bin_width) and self.bin_width > 0):
            raise ValueError(f"bin_width must be > 0, got {self.bin_width!r}")
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise ValueError(f"n_bins must be a positive integer, got {self.n_bins!r}")
        if not (math.isfinite(self.run_seconds) and self.run_seconds > 0):
            raise ValueError(f"run_seconds must be > 0, got {self.run_seconds!r}")
        if not (0 < self.efficiency <= 1):
            raise ValueError(f"efficiency must be in (0, 1], got {self.efficiency!r}")
        if not (math.isfinite(self.singles_rate) and self.singles_rate >= 0):
            raise ValueError(f"singles_rate must be >= 0, got {self.singles_rate!r}")
        if self.pair_fraction < 0:
            raise ValueError(f"pair_fraction must be >= 0, got {self.pair_fraction!r}")
        if self.bg_flat_rate < 0:
            raise ValueError(f"bg_flat_rate must be >= 0, got {self.bg_flat_rate!r}")
        if int(self.n_runs) != self.n_runs or self.n_runs < 1:
            raise ValueError(f"n_runs must be a positive integer, got {self.n_runs!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed!r}")
        window = self.n_bins * self.bin_width
        if not (0 <= self.zero_offset < window):
            raise ValueError(
                f"zero_offset must lie in [0, {window:g}), got {self.zero_offset!r}"
            )
        object.__setattr__(self, "n_bins", int(self.n_bins))
        object.__setattr__(self, "n_runs", int(self.n_runs))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def bin_centers(self) -> np.ndarray:
        """TAC bin centers, seconds from the window start."""
        return (np.arange(self.n_bins) + 0.5) * self.bin_width

    @property
    def tau(self) -> np.ndarray:
        """Physical delays: bin centers minus the electronic zero offset."""
        return self.bin_centers - self.zero_offset

    @property
    def accidentals_per_bin(self) -> float:
        """Expected accidental (baseline) coincidences per bin per run."""
        detected = self.singles_rate * self.efficiency
        return detected ** 2 * self.bin_width * self.run_seconds

    @property
    def background_per_bin(self) -> float:
        """Expected flat-background counts per bin per run."""
        return self.bg_flat_rate * self.run_seconds


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    """Raw start-stop delay histogram summed over runs."""

    counts: np.ndarray
    config: DetectionConfig
    per_run_phases: np.ndarray
    total_starts: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (self.config.n_bins,):
            raise ValueError(
                f"counts must have length n_bins={self.config.n_bins}, "
                f"got shape {counts.shape}"
            )
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        phases = np.asarray(self.per_run_phases, dtype=float)
        if phases.shape != (self.config.n_runs,):
            raise ValueError(
                f"per_run_phases must have length n_runs={self.config.n_runs}, "
                f"got shape {phases.shape}"
            )
        counts.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "per_run_phases", phases)
        object.__setattr__(self, "total_starts", int(self.total_starts))

    @property
    def tau(self) -> np.ndarray:
        return self.config.tau

    @property
    def bin_centers(self) -> np.ndarray:
        return self.config.bin_centers


def _check_expected_scale(mm: MixModel, dc: DetectionConfig) -> None:
    # Upper bound of the normalized model is ((1+b)^2 + bg)/(1+bg).
    g2_max = ((1.0 + mm.b) ** 2 + mm.bg) / (1.0 + mm.bg)
    mu_max = dc.accidentals_per_bin * g2_max + dc.background_per_bin
    if mu_max > _MAX_EXPECTED_PER_BIN:
        raise ValueError(
            f"expected counts per bin per run up to {mu_max:.3e} exceed the "
            f"{_MAX_EXPECTED_PER_BIN:.0e} guard; lower the rates or bin width"
        )


def simulate_histogram(mm: MixModel, sp: SpectralParams,
                       dc: DetectionConfig) -> CoincidenceHistogram:
    """Simulate the coincidence histogram for the given mixing model.

    Per run: draw a phase from the wrapped Gaussian (phi_mean, phi_sigma),
    evaluate the fixed-phase model at each bin's delay, scale by the
    accidental counts per bin, add the flat background, and draw Poisson
    counts per bin.  Runs use substreams spawned deterministically from the
    seed, so the output is bit-identical for identical config.
    """
    _check_expected_scale(mm, dc)
    tau = dc.tau
    n_acc = dc.accidentals_per_bin
    n_bg = dc.background_per_bin
    starts_mean = dc.singles_rate * dc.efficiency * dc.run_seconds

    counts = np.zeros(dc.n_bins, dtype=np.int64)
    phases = np.empty(dc.n_runs, dtype=float)
    total_starts = 0
    children = np.random.SeedSequence(dc.seed).spawn(dc.n_runs)
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        phi_r = float(wrap_angle(rng.normal(mm.phi_mean, mm.phi_sigma)))
        phases[r] = phi_r
        run_mm = MixModel(b=mm.b, phi_mean=phi_r, phi_sigma=0.0, bg=mm.bg)
        mu = n_acc * np.asarray(g2_model(tau, run_mm, sp)) + n_bg
        total_starts += int(rng.poisson(starts_mean))
        counts += rng.poisson(mu)

    return CoincidenceHistogram(
        counts=counts, config=dc, per_run_phases=phases, total_starts=total_starts
    )


def expected_counts(mm: MixModel, sp: SpectralParams,
                    dc: DetectionConfig) -> np.ndarray:
    """Noise-free expected histogram (summed over runs), phase-averaged.

    Uses the closed-form <cos phi> instead of sampling; simulate_histogram's
    per-bin means converge to this as n_runs grows.
    """
    _check_expected_scale(mm, dc)
    mu = (
        dc.accidentals_per_bin * np.asarray(g2_phase_averaged(dc.tau, mm, sp))
        + dc.background_per_bin
    )
    return dc.n_runs * mu
