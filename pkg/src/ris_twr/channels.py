"""Channel generation for an RIS-assisted two-way relay network.

Two single-antenna users exchange data through a relay (a base station with
M antennas) that is assisted by a reconfigurable intelligent surface with
N = n_h * n_v passive reflective elements. The direct user-BS links are
Rayleigh faded (their line of sight is blocked, so they take the NLoS path
loss). The user-RIS and RIS-BS links see a line of sight and are Rician,
with steering-vector LoS components and the LoS path loss. Path loss follows
the 3GPP urban-micro (UMi) fits.

Calibration conventions, fixed by matching the reference performance curves
this package reproduces:

* Scattered (Gaussian) small-scale components carry an average power of
  ``SCATTER_POWER`` = 2 per entry, i.e. real and imaginary parts are each
  standard normal. Line-of-sight steering components keep unit modulus.
* The RIS element gain is a property of the reflection as a whole, so it
  enters the cascaded user-RIS-BS path once: half of it (in dB) is assigned
  to each of the two RIS link ends.

All sampling is driven by an explicit seed or ``numpy.random.Generator``;
the same seed always yields a bit-identical realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ELEVATION_SPREAD_RAD = math.radians(25.0)  # elevation angles drawn on +/- 25 deg
SCATTER_POWER = 2.0                        # E|entry|^2 of Gaussian small-scale terms


@dataclass(frozen=True)
class GeometryConfig:
    """Node distances in meters and per-node antenna gains in dBi."""

    d_1r: float = 40.0          # user 1 to RIS
    d_2r: float = 60.0          # user 2 to RIS
    d_br: float = 80.0          # BS to RIS
    d_b1: float | None = None   # BS to user k; derived from the right triangle if omitted
    d_b2: float | None = None
    gain_bs_dbi: float = 5.0
    gain_ris_dbi: float = 5.0
    gain_user_dbi: float = 0.0
    carrier_hz: float = 2.5e9
    bandwidth_hz: float = 180e3

    def __post_init__(self):
        if min(self.d_1r, self.d_2r, self.d_br) <= 0.0:
            raise ValueError("all distances must be positive")
        for name, d_kr in (("d_b1", self.d_1r), ("d_b2", self.d_2r)):
            derived = math.hypot(d_kr, self.d_br)
            given = getattr(self, name)
            if given is None:
                object.__setattr__(self, name, derived)
            elif abs(given - derived) > 1e-9 * derived:
                raise ValueError(f"{name}={given} inconsistent with sqrt(d_kr^2 + d_br^2)={derived}")
        if self.carrier_hz <= 0.0 or self.bandwidth_hz <= 0.0:
            raise ValueError("carrier and bandwidth must be positive")


@dataclass(frozen=True)
class RicianConfig:
    """Linear (not dB) Rician K factors; math.inf selects a pure-LoS link."""

    k_v: float = 10.0   # RIS-BS matrix channel
    k_1: float = 10.0   # user 1 to RIS
    k_2: float = 10.0   # user 2 to RIS

    def __post_init__(self):
        if min(self.k_v, self.k_1, self.k_2) < 0.0:
            raise ValueError("Rician factors must be nonnegative")


@dataclass(frozen=True)
class ArrayConfig:
    """Antenna counts: BS horizontal linear array, RIS uniform rectangular array."""

    m: int = 1            # BS antennas
    n_h: int = 10         # RIS elements along the horizontal axis
    n_v: int = 10         # RIS elements along the vertical axis
    spacing_over_lambda: float = 0.5   # element separation d / wavelength

    def __post_init__(self):
        if self.m < 1 or self.n_h < 1 or self.n_v < 1:
            raise ValueError("antenna/element counts must be >= 1")
        if self.spacing_over_lambda <= 0.0:
            raise ValueError("spacing_over_lambda must be positive")

    @property
    def n(self) -> int:
        return self.n_h * self.n_v


@dataclass(frozen=True)
class ChannelSet:
    """One realization of all five links plus the stacked reflect-or-direct forms.

    ``g1_bar``/``g2_bar`` stack the cascaded RIS columns next to the direct
    channel, so the combined channel of user k for phase vector ``phi`` is
    ``g{k}_bar @ [phi, 1]``.
    """

    h1: np.ndarray       # (M,) direct user1-BS
    h2: np.ndarray       # (M,)
    g1: np.ndarray       # (N,) user1-RIS
    g2: np.ndarray       # (N,)
    v_mat: np.ndarray    # (M, N) RIS-BS
    g1_bar: np.ndarray   # (M, N+1) = [v_mat @ diag(g1), h1]
    g2_bar: np.ndarray   # (M, N+1)

    @classmethod
    def build(cls, h1, h2, g1, g2, v_mat) -> "ChannelSet":
        h1 = np.asarray(h1, dtype=complex).reshape(-1)
        h2 = np.asarray(h2, dtype=complex).reshape(-1)
        g1 = np.asarray(g1, dtype=complex).reshape(-1)
        g2 = np.asarray(g2, dtype=complex).reshape(-1)
        v_mat = np.asarray(v_mat, dtype=complex)
        if v_mat.shape != (h1.size, g1.size):
            raise ValueError(f"v_mat shape {v_mat.shape} does not match (M={h1.size}, N={g1.size})")
        if h2.size != h1.size or g2.size != g1.size:
            raise ValueError("h1/h2 and g1/g2 must have matching lengths")
        return cls(
            h1=h1, h2=h2, g1=g1, g2=g2, v_mat=v_mat,
            g1_bar=_stack_bar(v_mat, g1, h1),
            g2_bar=_stack_bar(v_mat, g2, h2),
        )

    @property
    def m(self) -> int:
        return self.h1.size

    @property
    def n(self) -> int:
        return self.g1.size


def _stack_bar(v_mat: np.ndarray, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.concatenate([v_mat * g[None, :], h[:, None]], axis=1)


def without_ris(ch: ChannelSet) -> ChannelSet:
    """The same realization with the reflect path removed (benchmark systems)."""
    return ChannelSet.build(ch.h1, ch.h2, ch.g1, ch.g2, np.zeros_like(ch.v_mat))


def steering_vector_ris(theta: float, psi: float, cfg: ArrayConfig) -> np.ndarray:
    """Response of the RIS rectangular array at azimuth ``theta``, elevation ``psi``.

    Returns the Kronecker product of the vertical and horizontal responses,
    length n_v * n_h, every entry of modulus one.
    """
    phase = 2.0 * math.pi * cfg.spacing_over_lambda * math.cos(psi)
    a_h = np.exp(-1j * phase * math.sin(theta) * np.arange(cfg.n_h))
    a_v = np.exp(+1j * phase * math.cos(theta) * np.arange(cfg.n_v))
    return np.kron(a_v, a_h)


def steering_vector_bs(theta: float, m: int, spacing_over_lambda: float = 0.5) -> np.ndarray:
    """Response of the BS horizontal linear array (elevation fixed at zero)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return np.exp(-1j * 2.0 * math.pi * spacing_over_lambda * math.sin(theta) * np.arange(m))


def path_loss_db(distance: float, los: bool, gt_dbi: float = 0.0, gr_dbi: float = 0.0) -> float:
    """3GPP UMi path gain in dB (negative for loss), antenna gains included."""
    if distance <= 0.0:
        raise ValueError("distance must be positive")
    if los:
        return gt_dbi + gr_dbi - 35.95 - 22.0 * math.log10(distance)
    return gt_dbi + gr_dbi - 33.05 - 36.7 * math.log10(distance)


def path_gain(distance: float, los: bool, gt_dbi: float = 0.0, gr_dbi: float = 0.0) -> float:
    """Linear power gain for :func:`path_loss_db`."""
    return 10.0 ** (path_loss_db(distance, los, gt_dbi, gr_dbi) / 10.0)


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Scattered-component samples: CN(0, SCATTER_POWER), parts i.i.d. N(0, 1)."""
    scale = math.sqrt(SCATTER_POWER / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _rician_weights(k: float) -> tuple[float, float]:
    if math.isinf(k):
        return 1.0, 0.0
    return math.sqrt(k / (1.0 + k)), math.sqrt(1.0 / (1.0 + k))


def sample_channel_set(
    geom: GeometryConfig,
    rician: RicianConfig,
    arr: ArrayConfig,
    rng: int | np.random.Generator,
) -> ChannelSet:
    """Draw one random channel realization.

    The direct links are i.i.d. CN(0, eta_nlos). The RIS links mix a
    steering-vector LoS term with an i.i.d. CN scatter term using the
    configured Rician factors, scaled by the LoS path gain. Azimuth angles
    are uniform on [-pi, pi] and RIS elevation angles uniform on
    [-25 deg, 25 deg]; the BS array is horizontal so no BS elevation is
    drawn. All angles are redrawn per realization.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    m, n = arr.m, arr.n
    gb, gu = geom.gain_bs_dbi, geom.gain_user_dbi
    gr_half = 0.5 * geom.gain_ris_dbi  # element gain counted once per reflection

    # Fixed draw order (h1, h2, V, g1, g2) keeps seeded runs reproducible.
    h1 = math.sqrt(path_gain(geom.d_b1, los=False, gt_dbi=gu, gr_dbi=gb)) * _cn(rng, m)
    h2 = math.sqrt(path_gain(geom.d_b2, los=False, gt_dbi=gu, gr_dbi=gb)) * _cn(rng, m)

    theta_aoa_bs = rng.uniform(-math.pi, math.pi)
    theta_aod_ris = rng.uniform(-math.pi, math.pi)
    psi_aod_ris = rng.uniform(-ELEVATION_SPREAD_RAD, ELEVATION_SPREAD_RAD)
    v_los = np.outer(
        steering_vector_bs(theta_aoa_bs, m, arr.spacing_over_lambda).conj(),
        steering_vector_ris(theta_aod_ris, psi_aod_ris, arr),
    )
    w_los, w_nlos = _rician_weights(rician.k_v)
    v_mat = math.sqrt(path_gain(geom.d_br, los=True, gt_dbi=gr_half, gr_dbi=gb)) * (
        w_los * v_los + w_nlos * _cn(rng, (m, n))
    )

    gs = []
    for d_kr, k_factor in ((geom.d_1r, rician.k_1), (geom.d_2r, rician.k_2)):
        theta_k = rng.uniform(-math.pi, math.pi)
        psi_k = rng.uniform(-ELEVATION_SPREAD_RAD, ELEVATION_SPREAD_RAD)
        g_los = steering_vector_ris(theta_k, psi_k, arr).conj()
        w_los, w_nlos = _rician_weights(k_factor)
        gs.append(
            math.sqrt(path_gain(d_kr, los=True, gt_dbi=gu, gr_dbi=gr_half))
            * (w_los * g_los + w_nlos * _cn(rng, n))
        )

    return ChannelSet.build(h1, h2, gs[0], gs[1], v_mat)
