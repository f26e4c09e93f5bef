"""Phase-shift design for a single-antenna relay: SUM and GSM.

SUM maximizes the smaller of the two combined channel gains, which upper
bounds the smaller SNR, through one semidefinite relaxation plus Gaussian
randomization. GSM refines that seed over a fixed number of candidate
generations: each generation freezes the SNR denominators at the reference
design, solves the reweighted relaxation, and the best candidate by true
minimum SNR wins.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet
from .sdp import (
    DEFAULT_DRAWS,
    DEFAULT_TOL,
    SdpSolveError,
    extract_phases,
    solve_max_min_quadratic,
)
from .system import (
    Beamformer,
    CombinedPair,
    DegenerateChannelError,
    PhaseShifts,
    PowerConfig,
    min_snr_db,
    optimal_tau,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GsmConfig:
    generations: int = 3              # candidate generations (0 returns the seed)
    randomization_draws: int = DEFAULT_DRAWS
    sdp_tol: float = DEFAULT_TOL
    eta_source: str = "incumbent"     # freeze denominators at "incumbent" or "previous"

    def __post_init__(self):
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if self.randomization_draws < 1:
            raise ValueError("randomization_draws must be >= 1")
        if self.eta_source not in ("incumbent", "previous"):
            raise ValueError("eta_source must be 'incumbent' or 'previous'")


@dataclass(frozen=True)
class SingleDesign:
    phi: PhaseShifts
    tau: float
    min_snr_db: float


def _finish_design(ch: ChannelSet, pw: PowerConfig, phi: PhaseShifts) -> SingleDesign:
    tau = optimal_tau(ch, phi, pw)
    snr = min_snr_db(ch, phi, Beamformer.scalar(tau), pw)
    return SingleDesign(phi=phi, tau=tau, min_snr_db=snr)


def sum_single(
    ch: ChannelSet,
    pw: PowerConfig,
    cfg: GsmConfig = GsmConfig(),
    rng: int | np.random.Generator = 0,
) -> SingleDesign:
    """Max-min combined-gain design with the closed-form amplification."""
    if ch.m != 1:
        raise ValueError("sum_single expects a single-antenna relay")
    mats = [ch.g1_bar.conj().T @ ch.g1_bar, ch.g2_bar.conj().T @ ch.g2_bar]
    phi_bar, _ = solve_max_min_quadratic(
        mats, [1.0, 1.0], cfg.randomization_draws, cfg.sdp_tol, rng
    )
    return _finish_design(ch, pw, extract_phases(phi_bar))


def gsm_eta(ch: ChannelSet, pw: PowerConfig, phi_prev: PhaseShifts) -> tuple[float, float]:
    """Frozen SNR denominators at a reference design; both are > 1."""
    if ch.m != 1:
        raise ValueError("gsm_eta expects a single-antenna relay")
    pair = CombinedPair.from_channel(ch, phi_prev)
    a1 = abs(pair.h1[0]) ** 2
    a2 = abs(pair.h2[0]) ** 2
    if a1 == 0.0 or a2 == 0.0:
        raise DegenerateChannelError("a combined channel vanished; eta is undefined")
    ps, pb, s2 = pw.p_s_watts, pw.p_b_watts, pw.sigma2_watts
    eta1 = 1.0 + ps / pb + (ps * a2 + s2) / (pb * a1)
    eta2 = 1.0 + ps / pb + (ps * a1 + s2) / (pb * a2)
    return eta1, eta2


def gsm_single(
    ch: ChannelSet,
    pw: PowerConfig,
    cfg: GsmConfig = GsmConfig(),
    rng: int | np.random.Generator = 0,
    seed_design: SingleDesign | None = None,
) -> SingleDesign:
    """Generation loop seeded by SUM; returns the best design encountered.

    ``seed_design`` may inject a precomputed SUM result (it must come from the
    same channel, power config and randomization stream to keep runs paired).
    """
    if ch.m != 1:
        raise ValueError("gsm_single expects a single-antenna relay")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    seed = seed_design if seed_design is not None else sum_single(ch, pw, cfg, rng)
    best = prev = seed
    mats = [ch.g1_bar.conj().T @ ch.g1_bar, ch.g2_bar.conj().T @ ch.g2_bar]

    for gen in range(cfg.generations):
        ref = best if cfg.eta_source == "incumbent" else prev
        try:
            eta1, eta2 = gsm_eta(ch, pw, ref.phi)
            phi_bar, _ = solve_max_min_quadratic(
                mats, [eta2, eta1], cfg.randomization_draws, cfg.sdp_tol, rng
            )
            cand = _finish_design(ch, pw, extract_phases(phi_bar))
        except (SdpSolveError, DegenerateChannelError) as exc:
            logger.warning("GSM generation %d failed (%s); skipping", gen + 1, exc)
            continue
        prev = cand
        if cand.min_snr_db > best.min_snr_db:
            best = cand
    return best
