"""Physical scenario generation.

Builds geometry, steering vectors, the rank-1 transmitter-to-surface
channel, the per-slot unitary codebook of the processed surface group, the
Hadamard pilot set, and synthesizes the noiseless received tensor through
the nested Tucker model.  An independent per-sample generator used by the
tests provides the dual synthesis route.

All processing targets a single surface group (the group actually used for
estimation); other groups of a group-connected surface only contribute
blocks to the slot matrices and are not part of the modeled echo.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard as _hadamard_matrix

from . import tensor_core as tc
from .errors import ConfigError, IdentifiabilityError, ShapeError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class SystemConfig:
    """Array geometry, OFDM numerology, and slot count."""

    l_y: int = 2
    l_z: int = 2
    n_y: int = 2
    n_z: int = 2
    group_sizes: tuple[int, ...] = ()
    m: int = 4
    q: int = 4
    t: int = 256
    delta_f_hz: float = 120e3
    carrier_hz: float = 28e9
    processed_group: int = 0

    def __post_init__(self):
        if not self.group_sizes:
            object.__setattr__(self, "group_sizes", (self.n_y * self.n_z,))
        for name in ("l_y", "l_z", "n_y", "n_z", "m", "q", "t"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.delta_f_hz <= 0 or self.carrier_hz <= 0:
            raise ConfigError("delta_f_hz and carrier_hz must be positive")
        if sum(self.group_sizes) != self.n_y * self.n_z:
            raise ConfigError(
                f"group sizes {self.group_sizes} do not sum to {self.n_y * self.n_z}")
        if any(g < 1 for g in self.group_sizes):
            raise ConfigError("group sizes must be >= 1")
        if not 0 <= self.processed_group < len(self.group_sizes):
            raise ConfigError("processed_group out of range")

    @property
    def l(self) -> int:
        return self.l_y * self.l_z

    @property
    def n(self) -> int:
        """Size of the processed group."""
        return self.group_sizes[self.processed_group]

    @property
    def n_total(self) -> int:
        return self.n_y * self.n_z

    @property
    def t_s(self) -> float:
        """Symbol duration, fixed to 1/delta_f."""
        return 1.0 / self.delta_f_hz


@dataclass(frozen=True)
class SceneTruth:
    """Ground-truth target parameters and fixed geometry angles (radians)."""

    tau_s: float
    doppler_hz: float
    azimuth_target_rad: float
    elevation_target_rad: float
    azimuth_st_rad: float
    elevation_st_rad: float
    azimuth_arrival_rad: float
    elevation_arrival_rad: float
    gain: complex


@dataclass(frozen=True)
class SceneRanges:
    """Randomization ranges for Monte Carlo scene draws."""

    st_ris_distance_m: tuple[float, float] = (10.0, 250.0)
    ris_target_distance_m: tuple[float, float] = (10.0, 250.0)
    velocity_mps: tuple[float, float] = (-25.0, 25.0)
    rcs_m2: float = 2.0
    angle_deg: tuple[float, float] = (0.0, 90.0)


@dataclass(frozen=True)
class RISCodebook:
    """Per-slot unitary group responses plus the flattened selection matrix.

    ``blocks[k]`` has shape ``(T, N_k, N_k)``; ``selection`` is the
    ``T x N_k^4`` matrix whose row t is ``vec(S_t.T kron S_t.T)`` for the
    processed group.
    """

    blocks: tuple[np.ndarray, ...]
    selection: np.ndarray
    processed_group: int = 0

    def slot_matrix(self, t: int) -> np.ndarray:
        """Full block-diagonal surface response at slot ``t``."""
        from scipy.linalg import block_diag
        return block_diag(*[b[t] for b in self.blocks])


@dataclass(frozen=True)
class PilotSet:
    """Pilot tensor of shape (L, M, Q); mode-0 unfolding is the pilot matrix."""

    x: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return tc.unfold(self.x, 0)


def spatial_freqs(azimuth_rad: float, elevation_rad: float) -> tuple[float, float]:
    """Map (azimuth, elevation) to spatial frequencies under half-wavelength
    spacing: mu = pi sin(az) sin(el), psi = pi cos(az)."""
    mu = np.pi * np.sin(azimuth_rad) * np.sin(elevation_rad)
    psi = np.pi * np.cos(azimuth_rad)
    return float(mu), float(psi)


def upa_steering(mu: float, psi: float, n_y: int, n_z: int) -> np.ndarray:
    """Uniform planar array response a_y(mu) kron a_z(psi), first entry 1."""
    if n_y < 1 or n_z < 1:
        raise ShapeError("array extents must be >= 1")
    a_y = np.exp(-1j * mu * np.arange(n_y))
    a_z = np.exp(-1j * psi * np.arange(n_z))
    return np.kron(a_y, a_z)


def delay_vector(tau_s: float, q: int, delta_f_hz: float) -> np.ndarray:
    """Subcarrier phase progression [1, ..., exp(-j 2 pi (Q-1) delta_f tau)]."""
    if q < 1:
        raise ShapeError("q must be >= 1")
    return np.exp(-2j * np.pi * delta_f_hz * tau_s * np.arange(q))


def doppler_vector(doppler_hz: float, m: int, t_s: float) -> np.ndarray:
    """Symbol phase progression [1, ..., exp(+j 2 pi (M-1) T_s nu)]."""
    if m < 1:
        raise ShapeError("m must be >= 1")
    return np.exp(2j * np.pi * t_s * doppler_hz * np.arange(m))


def _haar_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform unitary via QR of a complex Gaussian with phase correction."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def gen_codebook(cfg: SystemConfig, seed) -> RISCodebook:
    """Draw per-slot unitary blocks for every group and flatten the
    processed group's selection matrix."""
    rng = np.random.default_rng(seed)
    blocks = []
    for n_k in cfg.group_sizes:
        bl = np.empty((cfg.t, n_k, n_k), dtype=np.complex128)
        for t in range(cfg.t):
            bl[t] = _haar_unitary(rng, n_k)
        blocks.append(bl)
    sel_blocks = blocks[cfg.processed_group]
    n_k = cfg.group_sizes[cfg.processed_group]
    selection = np.empty((cfg.t, n_k ** 4), dtype=np.complex128)
    for t in range(cfg.t):
        selection[t] = tc.vec(np.kron(sel_blocks[t].T, sel_blocks[t].T))
    return RISCodebook(blocks=tuple(blocks), selection=selection,
                       processed_group=cfg.processed_group)


def _pilot_rows(l: int, order: int) -> list[int]:
    """Deterministic Hadamard row selection.

    Power-of-two rows first: restricted to those rows the columns of a
    Sylvester Hadamard matrix stay pairwise distinct for as long as the
    selected bit masks span the column index space, which avoids pilot
    columns that repeat across subcarriers.
    """
    rows = [1 << i for i in range(order.bit_length()) if (1 << i) < order][:l]
    k = 0
    while len(rows) < l:
        if k not in rows:
            rows.append(k)
        k += 1
    return sorted(rows)


def gen_pilots(cfg: SystemConfig) -> PilotSet:
    """Hadamard pilot set: an L x MQ submatrix of a +-1 Hadamard matrix."""
    size = max(cfg.l, cfg.m * cfg.q)
    order = 1 << (size - 1).bit_length()  # next power of two
    try:
        h = _hadamard_matrix(order)
    except ValueError as exc:  # pragma: no cover - order is a power of two
        raise ConfigError(f"no Hadamard matrix of order {order}") from exc
    x1 = h[_pilot_rows(cfg.l, order), :cfg.m * cfg.q].astype(np.complex128)
    return PilotSet(x=tc.fold(x1, 0, (cfg.l, cfg.m, cfg.q)))


def group_slice(cfg: SystemConfig) -> slice:
    """Element indices of the processed group.

    Groups partition the surface into contiguous index ranges of the
    ``a_y kron a_z`` element ordering.
    """
    start = sum(cfg.group_sizes[:cfg.processed_group])
    return slice(start, start + cfg.n)


def gen_channel(truth: SceneTruth, cfg: SystemConfig) -> np.ndarray:
    """Gain-free rank-1 channel between the ST array and the processed
    group: outer product of the ST steering vector with the group's slice
    of the surface arrival steering vector.

    The complex gain is deliberately not part of the channel; it multiplies
    the end-to-end model exactly once in :func:`synthesize`.
    """
    a = upa_steering(*spatial_freqs(truth.azimuth_st_rad, truth.elevation_st_rad),
                     cfg.l_y, cfg.l_z)
    b = upa_steering(*spatial_freqs(truth.azimuth_arrival_rad,
                                    truth.elevation_arrival_rad),
                     cfg.n_y, cfg.n_z)
    return np.outer(a, b[group_slice(cfg)])


def target_steering(truth: SceneTruth, cfg: SystemConfig) -> np.ndarray:
    """Surface-to-target steering of the processed group's elements."""
    p = upa_steering(*spatial_freqs(truth.azimuth_target_rad,
                                    truth.elevation_target_rad),
                     cfg.n_y, cfg.n_z)
    return p[group_slice(cfg)]


def delay_doppler_factor(truth: SceneTruth, cfg: SystemConfig,
                         pilots: PilotSet, unit_gain: bool = True) -> np.ndarray:
    """N x MQ matrix G.T X diag(c kron d) carrying delay and Doppler."""
    g = gen_channel(truth, cfg)
    c = delay_vector(truth.tau_s, cfg.q, cfg.delta_f_hz)
    d = doppler_vector(truth.doppler_hz, cfg.m, cfg.t_s)
    f = g.T @ pilots.matrix @ np.diag(np.kron(c, d))
    return f if unit_gain else truth.gain * f


def check_gate(cfg: SystemConfig) -> None:
    """Dimension inequalities required for the two LS stages to be solvable."""
    l, n, m, q, t = cfg.l, cfg.n, cfg.m, cfg.q, cfg.t
    if l * t < n:
        raise IdentifiabilityError(f"LT = {l * t} < N = {n}")
    if l * m * q * t < n * n:
        raise IdentifiabilityError(f"LMQT = {l * m * q * t} < N^2 = {n * n}")


def synthesize(truth: SceneTruth, cfg: SystemConfig, codebook: RISCodebook,
               pilots: PilotSet, check: bool = True) -> np.ndarray:
    """Noiseless received tensor via the nested Tucker model.

    Multiplies the known core along its four modes by the channel, the
    transposed delay-Doppler factor, the flattened codebook, and the
    vectorized target outer product, then applies the gain once.
    """
    if check:
        check_gate(cfg)
    core = tc.build_core(cfg.n)
    g = gen_channel(truth, cfg)
    f = delay_doppler_factor(truth, cfg, pilots)
    p = target_steering(truth, cfg)
    p_row = tc.vec(np.outer(p, p))[None, :]
    # contract the singleton mode first to keep intermediates small
    y = tc.mode_product(core, p_row, 3)
    y = tc.mode_product(y, g, 0)
    y = tc.mode_product(y, f.T, 1)
    y = tc.mode_product(y, codebook.selection, 2)
    return truth.gain * y[:, :, :, 0]


def synthesize_elementwise(truth: SceneTruth, cfg: SystemConfig,
                           codebook: RISCodebook, pilots: PilotSet) -> np.ndarray:
    """Per-sample triple-loop generator; independent oracle for the Tucker
    route (slow, test-sized problems only)."""
    g = gen_channel(truth, cfg)
    p = target_steering(truth, cfg)
    c = delay_vector(truth.tau_s, cfg.q, cfg.delta_f_hz)
    d = doppler_vector(truth.doppler_hz, cfg.m, cfg.t_s)
    blocks = codebook.blocks[codebook.processed_group]
    y = np.zeros((cfg.l, cfg.m * cfg.q, cfg.t), dtype=np.complex128)
    for t in range(cfg.t):
        s_t = blocks[t]
        for q in range(cfg.q):
            for m in range(cfg.m):
                x = pilots.x[:, m, q]
                forward = p @ s_t @ g.T @ x
                back = g @ s_t.T @ p
                y[:, q * cfg.m + m, t] = truth.gain * back * forward * c[q] * d[m]
    return y


def add_noise(y: np.ndarray, snr_db: float, seed) -> tuple[np.ndarray, float]:
    """Add circular complex white Gaussian noise calibrated per realization.

    The drawn noise is rescaled so the realized ratio ||Y||^2/||Z||^2 equals
    the target SNR exactly.  ``snr_db=inf`` returns the input unchanged.
    """
    if np.isinf(snr_db):
        return y, float("inf")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    signal = np.linalg.norm(y) ** 2
    scale = np.sqrt(signal / (np.linalg.norm(z) ** 2 * 10 ** (snr_db / 10)))
    return y + scale * z, float(snr_db)


def draw_scene(cfg: SystemConfig, seed,
               ranges: SceneRanges = SceneRanges()) -> SceneTruth:
    """Random scene per the benchmark protocol: all six angles uniform in
    the configured open interval, distances and velocity uniform, delay and
    Doppler derived from round-trip geometry, RCS folded into |gain|."""
    rng = np.random.default_rng(seed)
    lo, hi = np.deg2rad(ranges.angle_deg[0]), np.deg2rad(ranges.angle_deg[1])
    eps = 1e-9 * (hi - lo)
    ang = rng.uniform(lo + eps, hi - eps, 6)
    d1 = rng.uniform(*ranges.st_ris_distance_m)
    d2 = rng.uniform(*ranges.ris_target_distance_m)
    v = rng.uniform(*ranges.velocity_mps)
    tau = 2.0 * (d1 + d2) / SPEED_OF_LIGHT
    doppler = 2.0 * v * cfg.carrier_hz / SPEED_OF_LIGHT
    gain = np.sqrt(ranges.rcs_m2) * np.exp(1j * rng.uniform(0.0, 2 * np.pi))
    return SceneTruth(
        tau_s=float(tau),
        doppler_hz=float(doppler),
        azimuth_target_rad=float(ang[0]),
        elevation_target_rad=float(ang[1]),
        azimuth_st_rad=float(ang[2]),
        elevation_st_rad=float(ang[3]),
        azimuth_arrival_rad=float(ang[4]),
        elevation_arrival_rad=float(ang[5]),
        gain=complex(gain),
    )
