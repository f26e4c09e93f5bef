"""Deterministic system physics: combined channels, user SNRs, relay power.

The relay receives both users' signals in the first hop, applies a linear
map (a scalar power amplification for a single-antenna relay, an M x M
matrix otherwise), and broadcasts in the second hop. After each user cancels
its own echo, user k's SNR depends on the combined direct-plus-reflected
channels of both users. Phase shifts are held fixed across the two hops, so
the second-hop channel is the transpose of the first-hop one and the SNR
numerators use plain (unconjugated) transpose products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet


class DegenerateChannelError(ValueError):
    """A channel needed in a denominator (or as a beam direction) vanished."""


@dataclass(frozen=True)
class PhaseShifts:
    """Unit-modulus RIS reflection coefficients."""

    phi: np.ndarray   # (N,) complex, |phi[n]| = 1

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=complex).reshape(-1)
        object.__setattr__(self, "phi", phi)
        if phi.size and np.max(np.abs(np.abs(phi) - 1.0)) > 1e-9:
            raise ValueError("phase-shift entries must have unit modulus")

    @classmethod
    def from_angles(cls, theta: np.ndarray) -> "PhaseShifts":
        return cls(np.exp(1j * np.asarray(theta, dtype=float)))

    @property
    def n(self) -> int:
        return self.phi.size

    @property
    def phi_bar(self) -> np.ndarray:
        """Lifted vector [phi, 1]; the trailing one absorbs the direct path."""
        return np.concatenate([self.phi, [1.0 + 0.0j]])


@dataclass(frozen=True)
class Beamformer:
    """Relay linear map: scalar amplification tau or an M x M matrix."""

    kind: str                      # "scalar" | "matrix"
    tau: float | None = None       # power amplification (scalar kind)
    mat: np.ndarray | None = None  # (M, M) complex (matrix kind)

    def __post_init__(self):
        if self.kind == "scalar":
            if self.tau is None or self.tau < 0.0:
                raise ValueError("scalar beamformer needs tau >= 0")
        elif self.kind == "matrix":
            mat = np.asarray(self.mat, dtype=complex)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValueError("matrix beamformer must be square")
            object.__setattr__(self, "mat", mat)
        else:
            raise ValueError(f"unknown beamformer kind {self.kind!r}")

    @classmethod
    def scalar(cls, tau: float) -> "Beamformer":
        return cls(kind="scalar", tau=float(tau))

    @classmethod
    def matrix(cls, mat: np.ndarray) -> "Beamformer":
        return cls(kind="matrix", mat=mat)

    def as_matrix(self, m: int) -> np.ndarray:
        if self.kind == "scalar":
            return np.sqrt(self.tau) * np.eye(m, dtype=complex)
        if self.mat.shape[0] != m:
            raise ValueError(f"beamformer is {self.mat.shape[0]}x{self.mat.shape[0]}, channel has M={m}")
        return self.mat


@dataclass(frozen=True)
class PowerConfig:
    """Link budget in watts. dBm conversions live at the harness boundary."""

    p_s_watts: float       # per-user transmit power
    p_b_watts: float       # relay transmit power budget
    sigma2_watts: float    # noise power per receiver

    def __post_init__(self):
        if min(self.p_s_watts, self.p_b_watts, self.sigma2_watts) <= 0.0:
            raise ValueError("powers must be strictly positive")

    @property
    def beta(self) -> float:
        return self.p_s_watts / self.sigma2_watts


@dataclass(frozen=True)
class CombinedPair:
    """Both users' combined channels for one (realization, phase) pair.

    Every SNR/power expression consumes these, so they are computed once.
    """

    h1: np.ndarray
    h2: np.ndarray

    @classmethod
    def from_channel(cls, ch: ChannelSet, phi: PhaseShifts) -> "CombinedPair":
        if phi.n != ch.n:
            raise ValueError(f"phase vector length {phi.n} != N={ch.n}")
        phi_bar = phi.phi_bar
        return cls(h1=ch.g1_bar @ phi_bar, h2=ch.g2_bar @ phi_bar)


def combined_channel(h: np.ndarray, v_mat: np.ndarray, phi: PhaseShifts, g: np.ndarray) -> np.ndarray:
    """Direct-plus-reflected channel h + V diag(g) phi."""
    h = np.asarray(h, dtype=complex).reshape(-1)
    g = np.asarray(g, dtype=complex).reshape(-1)
    v_mat = np.asarray(v_mat, dtype=complex)
    if v_mat.shape != (h.size, g.size) or phi.n != g.size:
        raise ValueError("combined_channel dimension mismatch")
    return h + v_mat @ (g * phi.phi)


def snr_pair_from(pair: CombinedPair, a_mat: np.ndarray, pw: PowerConfig) -> tuple[float, float]:
    beta = pw.beta
    row1 = pair.h1 @ a_mat   # transpose product, second-hop channel
    row2 = pair.h2 @ a_mat
    g1 = beta * abs(row1 @ pair.h2) ** 2 / (np.linalg.norm(row1) ** 2 + 1.0)
    g2 = beta * abs(row2 @ pair.h1) ** 2 / (np.linalg.norm(row2) ** 2 + 1.0)
    return float(g1), float(g2)


def snr_pair_multi(ch: ChannelSet, phi: PhaseShifts, bf: Beamformer, pw: PowerConfig) -> tuple[float, float]:
    """Linear post-cancellation SNRs (gamma1, gamma2) of the two users."""
    pair = CombinedPair.from_channel(ch, phi)
    return snr_pair_from(pair, bf.as_matrix(ch.m), pw)


def min_snr_db(ch: ChannelSet, phi: PhaseShifts, bf: Beamformer, pw: PowerConfig) -> float:
    g1, g2 = snr_pair_multi(ch, phi, bf, pw)
    lo = min(g1, g2)
    return float(10.0 * np.log10(lo)) if lo > 0.0 else float("-inf")


def bs_power_from(pair: CombinedPair, a_mat: np.ndarray, pw: PowerConfig) -> float:
    return float(
        pw.p_s_watts * (np.linalg.norm(a_mat @ pair.h1) ** 2 + np.linalg.norm(a_mat @ pair.h2) ** 2)
        + pw.sigma2_watts * np.linalg.norm(a_mat, "fro") ** 2
    )


def bs_power(ch: ChannelSet, phi: PhaseShifts, bf: Beamformer, pw: PowerConfig) -> float:
    """Relay transmit power spent forwarding signals plus amplified noise."""
    pair = CombinedPair.from_channel(ch, phi)
    return bs_power_from(pair, bf.as_matrix(ch.m), pw)


def optimal_tau_from(pair: CombinedPair, pw: PowerConfig) -> float:
    if pair.h1.size != 1:
        raise ValueError("closed-form amplification applies only to a single-antenna relay")
    gains = abs(pair.h1[0]) ** 2 + abs(pair.h2[0]) ** 2
    return pw.p_b_watts / (pw.p_s_watts * gains + pw.sigma2_watts)


def optimal_tau(ch: ChannelSet, phi: PhaseShifts, pw: PowerConfig) -> float:
    """Power amplification that meets the relay budget with equality (M = 1)."""
    if ch.m != 1:
        raise ValueError("closed-form amplification applies only to a single-antenna relay")
    return optimal_tau_from(CombinedPair.from_channel(ch, phi), pw)


def snr_upper_bounds(ch: ChannelSet, phi: PhaseShifts, pw: PowerConfig) -> tuple[float, float]:
    """Beamformer-independent SNR caps: user k is limited by the other user's gain."""
    pair = CombinedPair.from_channel(ch, phi)
    beta = pw.beta
    return (
        float(beta * np.linalg.norm(pair.h2) ** 2),
        float(beta * np.linalg.norm(pair.h1) ** 2),
    )
