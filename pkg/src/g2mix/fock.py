"""Truncated Fock-space model of a weak coherent seed under a two-photon
(parametric) interaction.

The interaction Hamiltonian is proportional to the photon-pair creation
operator, so the evolution operator is exp(xi*adag^2 - conj(xi)*a^2) with a
single dimensionless strength xi (pump amplitude x nonlinearity x
interaction time, never separated).  The generator is anti-Hermitian even
after truncation, so the evolution itself is unitary; truncation error is
measured by evolving in an enlarged working space and recording the norm
that leaks past the requested cutoff.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

DEFAULT_CUTOFF = 16

# Fraction of evolved norm past the cutoff above which the state is flagged
# (cutoff failed to hold 99.999% of the norm).
TRUNCATION_FLAG_LEVEL = 1e-5

_PAD_TAIL_TOL = 1e-14
_MAX_WORKING_DIM = 512


class RegimeError(ValueError):
    """Parameter outside the weak-field regime the model is valid in."""


class TruncationWarning(UserWarning):
    """Evolution pushed a non-negligible fraction of norm past the cutoff."""


@dataclass(frozen=True, eq=False)
class FockState:
    """Single-mode pure state: complex amplitudes over photon numbers 0..cutoff.

    Amplitudes are always normalized (sum |c_n|^2 = 1 within 1e-12);
    ``leaked_norm`` records the pre-renormalization deficit of whatever
    operation produced the state.
    """

    amplitudes: np.ndarray
    cutoff: int
    leaked_norm: float = 0.0

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise ValueError(f"cutoff must be an integer >= 2, got {self.cutoff!r}")
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.cutoff + 1,):
            raise ValueError(
                f"amplitudes must have length cutoff+1={self.cutoff + 1}, "
                f"got shape {amps.shape}"
            )
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized: sum |c_n|^2 = {norm!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "cutoff", int(self.cutoff))
        object.__setattr__(self, "leaked_norm", float(self.leaked_norm))

    @property
    def truncation_flag(self) -> bool:
        """True when the cutoff failed to hold 99.999% of the evolved norm."""
        return self.leaked_norm > TRUNCATION_FLAG_LEVEL

    def probabilities(self) -> np.ndarray:
        """Photon-number probabilities |c_n|^2."""
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class SqueezeParam:
    """Dimensionless two-photon interaction strength xi.

    |xi| < 0.5 is enforced: the model targets the perturbative regime where
    the pair amplitude is comparable to the coherent two-photon amplitude,
    both much smaller than one.
    """

    xi: complex

    def __post_init__(self):
        xi = complex(self.xi)
        if not np.isfinite(xi.real) or not np.isfinite(xi.imag):
            raise ValueError(f"xi must be finite, got {self.xi!r}")
        if abs(xi) >= 0.5:
            raise RegimeError(f"|xi| must be < 0.5, got {abs(xi)}")
        object.__setattr__(self, "xi", xi)


def coherent_state(alpha: complex, cutoff: int = DEFAULT_CUTOFF) -> FockState:
    """Normalized coherent state truncated at ``cutoff``.

    Amplitudes c_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!), renormalized after
    truncation; the truncation deficit is recorded in ``leaked_norm``.

    Args:
        alpha: complex field amplitude, |alpha| <= 1 (weak-field regime).
        cutoff: largest retained photon number, >= 2.
    """
    if int(cutoff) != cutoff or cutoff < 2:
        raise ValueError(f"cutoff must be an integer >= 2, got {cutoff!r}")
    alpha = complex(alpha)
    if abs(alpha) > 1.0:
        raise RegimeError(f"|alpha| must be <= 1, got {abs(alpha)}")
    n = np.arange(cutoff + 1)
    amps = alpha ** n * np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * gammaln(n + 1))
    norm2 = float(np.sum(np.abs(amps) ** 2))
    leak = max(0.0, 1.0 - norm2)
    amps = amps / np.sqrt(norm2)
    return FockState(amplitudes=amps, cutoff=int(cutoff), leaked_norm=leak)


def vacuum_state(cutoff: int = DEFAULT_CUTOFF) -> FockState:
    """The vacuum |0>."""
    return coherent_state(0.0, cutoff)


def pair_creation_op(dim: int) -> np.ndarray:
    """Matrix of adag^2 on photon numbers 0..dim-1: <n+2|adag^2|n> = sqrt((n+1)(n+2))."""
    n = np.arange(dim - 2)
    return np.diag(np.sqrt((n + 1.0) * (n + 2.0)), -2).astype(complex)


def _evolve_in_dim(amplitudes: np.ndarray, xi: complex, dim: int) -> np.ndarray:
    t = pair_creation_op(dim)
    gen = xi * t - np.conj(xi) * t.conj().T
    psi = np.zeros(dim, dtype=complex)
    psi[: amplitudes.size] = amplitudes
    return expm(gen) @ psi


def squeeze_evolve(state: FockState, xi: SqueezeParam | complex) -> FockState:
    """Evolve a state under the two-photon interaction, exactly (not perturbatively).

    Applies U = exp(xi*adag^2 - conj(xi)*a^2) via a dense matrix exponential.
    The working space is enlarged until the population of its top levels is
    negligible, then projected back onto 0..cutoff; the projected-out norm is
    reported as ``leaked_norm`` and the result renormalized.  A
    ``TruncationWarning`` is issued when the cutoff fails to hold 99.999% of
    the norm.

    For |xi|, |alpha|^2 << 1 the resulting two-photon amplitude is
    sqrt(2)*xi + alpha^2/sqrt(2) up to higher-order corrections.
    """
    if not isinstance(xi, SqueezeParam):
        xi = SqueezeParam(xi)
    z = xi.xi
    if z == 0:
        return state

    keep = state.cutoff + 1
    dim = max(2 * keep, keep + 8)
    while True:
        out = _evolve_in_dim(state.amplitudes, z, dim)
        tail = float(np.sum(np.abs(out[-4:]) ** 2))
        if tail < _PAD_TAIL_TOL or dim >= _MAX_WORKING_DIM:
            break
        dim = min(2 * dim, _MAX_WORKING_DIM)

    # Unitarity slack of the working space is ~1e-16; fold it into the leak.
    leak = float(np.sum(np.abs(out[keep:]) ** 2)) + max(
        0.0, 1.0 - float(np.sum(np.abs(out) ** 2))
    )
    kept = out[:keep]
    kept = kept / np.linalg.norm(kept)
    result = FockState(amplitudes=kept, cutoff=state.cutoff, leaked_norm=leak)
    if result.truncation_flag:
        warnings.warn(
            f"cutoff={state.cutoff} holds less than 99.999% of the evolved "
            f"norm (leaked {leak:.3e})",
            TruncationWarning,
            stacklevel=2,
        )
    return result


def photon_rates(state: FockState) -> tuple[float, float]:
    """One- and two-photon rates (P1, P2) = (|c_1|^2, |c_2|^2)."""
    p = state.probabilities()
    return float(p[1]), float(p[2])


def cancellation_xi(alpha: complex) -> SqueezeParam:
    """Interaction strength that cancels the two-photon amplitude: xi = -alpha^2/2.

    At this value the pair amplitude from the two-photon process
    destructively interferes with the coherent field's accidental pair
    amplitude, suppressing the two-photon rate.
    """
    alpha = complex(alpha)
    if abs(alpha) > 1.0:
        raise RegimeError(f"|alpha| must be <= 1, got {abs(alpha)}")
    return SqueezeParam(-(alpha ** 2) / 2.0)
