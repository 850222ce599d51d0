"""Shift-invariance harmonic retrieval.

Single-tone frequency from one vector (one source, one snapshot: the
rotational-invariance equation collapses to a scalar least-squares ratio)
and 2D angle extraction from the rank-1 target matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ElevationUnrecoverableError

SIN_AZIMUTH_FLOOR = 1e-6
RANK1_RATIO_FLOOR = 0.5


@dataclass(frozen=True)
class ToneEstimate:
    """Angular frequency in radians per sample, in (-pi, pi]."""

    omega: float
    residual: float


@dataclass(frozen=True)
class AngleEstimate:
    mu: float
    psi: float
    azimuth_rad: float
    elevation_rad: float
    rank1_ratio: float
    warning: str | None = None


def single_tone(v: np.ndarray) -> ToneEstimate:
    """Least-squares ratio estimate of a single complex exponential.

    Solves v[1:] ~= rho v[:-1]; invariant to global complex scaling of v.
    """
    v = np.asarray(v).reshape(-1)
    if v.size < 2:
        raise DegenerateInputError("need at least two samples")
    if not np.any(v):
        raise DegenerateInputError("all-zero input")
    num = np.vdot(v[:-1], v[1:])
    den = np.vdot(v[:-1], v[:-1]).real
    if den == 0 or num == 0:
        raise DegenerateInputError("shift-invariance ratio undefined")
    rho = num / den
    fit = np.linalg.norm(v[1:] - rho * v[:-1]) / np.linalg.norm(v)
    return ToneEstimate(omega=float(np.angle(rho)), residual=float(fit))


def _wrap(x: float, period: float) -> float:
    return x - period * np.floor(x / period)


def tone_to_delay(omega: float, delta_f_hz: float) -> float:
    """Invert exp(-j 2 pi delta_f tau) per step; result in [0, 1/delta_f)."""
    return _wrap(-omega / (2 * np.pi * delta_f_hz), 1.0 / delta_f_hz)


def tone_to_doppler(omega: float, t_s: float) -> float:
    """Invert exp(+j 2 pi T_s nu) per step; result in [-1/(2T_s), 1/(2T_s))."""
    half = 0.5 / t_s
    return _wrap(omega / (2 * np.pi * t_s) + half, 2 * half) - half


def fold_spatial_freq(w: float) -> float:
    """Fold a frequency estimate into the physical range [0, pi].

    True spatial frequencies lie in (0, pi) for angles inside (0, 90) deg; a
    noisy phase near the pi boundary can wrap negative, so negatives map to
    the circularly nearest endpoint.
    """
    if w < 0.0:
        return 0.0 if w >= -np.pi / 2 else float(np.pi)
    return float(w)


def esprit_2d(p_matrix: np.ndarray, n_y: int, n_z: int) -> AngleEstimate:
    """2D shift-invariance angle extraction from a rank-1-dominant matrix.

    Takes the dominant left singular vector (proportional to the steering
    vector when the matrix is p p^T up to scale), reshapes it onto the
    n_z x n_y element grid of the a_y kron a_z layout, estimates the two
    phase slopes by least squares over all shifted element pairs, and
    inverts the spatial frequencies to azimuth/elevation restricted to the
    (0, 90) degree prior.
    """
    p_matrix = np.asarray(p_matrix)
    n = n_y * n_z
    if p_matrix.shape != (n, n):
        raise DegenerateInputError(
            f"angle matrix must be {n}x{n}, got {p_matrix.shape}")
    if n_y < 2 or n_z < 2:
        raise DegenerateInputError(
            "both surface axes need at least two elements for 2D inversion")
    if not np.any(p_matrix):
        raise DegenerateInputError("all-zero angle matrix")
    u, s, _ = np.linalg.svd(p_matrix)
    ratio = float(s[0] ** 2 / np.sum(s ** 2))
    warning = None
    if ratio < RANK1_RATIO_FLOOR:
        warning = (f"rank-1 energy ratio {ratio:.3f} below "
                   f"{RANK1_RATIO_FLOOR}; subspace unreliable")
    grid = u[:, 0].reshape(n_z, n_y, order="F")
    rho_z = np.vdot(grid[:-1, :], grid[1:, :]) / np.vdot(grid[:-1, :], grid[:-1, :])
    rho_y = np.vdot(grid[:, :-1], grid[:, 1:]) / np.vdot(grid[:, :-1], grid[:, :-1])
    psi = fold_spatial_freq(-np.angle(rho_z))
    mu = fold_spatial_freq(-np.angle(rho_y))
    azimuth = float(np.arccos(np.clip(psi / np.pi, -1.0, 1.0)))
    sin_az = np.sin(azimuth)
    if sin_az < SIN_AZIMUTH_FLOOR:
        raise ElevationUnrecoverableError(
            f"sin(azimuth) = {sin_az:.2e} below {SIN_AZIMUTH_FLOOR}")
    elevation = float(np.arcsin(np.clip(mu / (np.pi * sin_az), -1.0, 1.0)))
    return AngleEstimate(mu=mu, psi=psi, azimuth_rad=azimuth,
                         elevation_rad=elevation, rank1_ratio=ratio,
                         warning=warning)
