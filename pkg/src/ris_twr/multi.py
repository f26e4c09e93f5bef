"""Joint phase-shift and relay-beamforming design for a multi-antenna relay.

The two subproblems are solved in turn. Phases come from the same max-min
combined-gain relaxation as the single-antenna case (SUM) or from its
generation-refined variant (GSM). The beamforming matrix comes either from
a bisection over the achievable common SNR, each level probed by a convex
feasibility SDP over the lifted vec(A) Gram matrix (OB), or from the
closed-form maximal-ratio reception/transmission combiner scaled to spend
the full power budget (MRB). The four compositions are sum_ob, sum_mrb,
gsm_ob and gsm_mrb.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet
from .sdp import (
    SdpProblem,
    SdpSolveError,
    extract_phases,
    gaussian_randomization,
    require_optimal,
    solve,
    solve_max_min_quadratic,
)
from .single import GsmConfig
from .system import (
    Beamformer,
    CombinedPair,
    DegenerateChannelError,
    PhaseShifts,
    PowerConfig,
    bs_power_from,
    min_snr_db,
    snr_pair_from,
)

logger = logging.getLogger(__name__)


class BracketError(RuntimeError):
    """The bisection could not establish an infeasible upper bracket."""


@dataclass(frozen=True)
class LiftedMatrices:
    """Quadratic forms in a = vec(A): SNR numerators, noise-boost terms, power.

    For any A, with a the column-stacked vec(A):
      a^H c1 a = |h1^T A h2|^2,  a^H d1 a = ||h1^T A||^2  (c2/d2 swap users),
      a^H f a  = transmit power spent by the relay.
    """

    c1: np.ndarray
    d1: np.ndarray
    c2: np.ndarray
    d2: np.ndarray
    f: np.ndarray


@dataclass(frozen=True)
class BisectionConfig:
    q_tol: float = 1e-3                 # bracket width target, relative to the upper bound
    q_low_init: float | None = None     # default 0 (always feasible)
    q_up_init: float | None = None      # default 1.01x the SNR upper bound
    feas_margin: float = 1e-9           # slack threshold deciding "feasible", relative
    max_widenings: int = 60             # doublings allowed while hunting an infeasible bracket

    def __post_init__(self):
        if self.q_tol <= 0.0:
            raise ValueError("q_tol must be positive")


@dataclass(frozen=True)
class JointDesign:
    phi: PhaseShifts
    a_mat: Beamformer
    min_snr_db: float
    method_tag: str


def optimize_phase_upperbound(
    ch: ChannelSet,
    cfg: GsmConfig = GsmConfig(),
    rng: int | np.random.Generator = 0,
) -> PhaseShifts:
    """Phases maximizing the smaller combined channel gain (relax + randomize)."""
    mats = [ch.g1_bar.conj().T @ ch.g1_bar, ch.g2_bar.conj().T @ ch.g2_bar]
    phi_bar, _ = solve_max_min_quadratic(
        mats, [1.0, 1.0], cfg.randomization_draws, cfg.sdp_tol, rng
    )
    return extract_phases(phi_bar)


def build_lifted(h1t: np.ndarray, h2t: np.ndarray, pw: PowerConfig) -> LiftedMatrices:
    """Kronecker lifting of the SNR and power forms onto vec(A)."""
    h1t = np.asarray(h1t, dtype=complex).reshape(-1)
    h2t = np.asarray(h2t, dtype=complex).reshape(-1)
    m = h1t.size
    eye = np.eye(m)
    k1 = np.kron(h2t, h1t)
    k2 = np.kron(h1t, h2t)
    row1 = np.kron(eye, h1t.reshape(1, -1))
    row2 = np.kron(eye, h2t.reshape(1, -1))
    col1 = np.kron(h1t.reshape(1, -1), eye)
    col2 = np.kron(h2t.reshape(1, -1), eye)
    return LiftedMatrices(
        c1=np.outer(k1.conj(), k1),
        d1=row1.conj().T @ row1,
        c2=np.outer(k2.conj(), k2),
        d2=row2.conj().T @ row2,
        f=pw.p_s_watts * (col1.conj().T @ col1 + col2.conj().T @ col2)
        + pw.sigma2_watts * np.eye(m * m),
    )


def _vec(a_mat: np.ndarray) -> np.ndarray:
    return a_mat.reshape(-1, order="F")


def _unvec(a: np.ndarray, m: int) -> np.ndarray:
    return a.reshape(m, m, order="F")


def _scaled_setup(pair: CombinedPair, pw: PowerConfig):
    """Normalize channels to O(1) norm; physics is invariant when the noise
    power is rescaled accordingly and the beamformer carries the inverse."""
    c2 = 0.5 * (np.linalg.norm(pair.h1) ** 2 + np.linalg.norm(pair.h2) ** 2)
    if c2 == 0.0:
        raise DegenerateChannelError("both combined channels vanished")
    c = np.sqrt(c2)
    pair_s = CombinedPair(h1=pair.h1 / c, h2=pair.h2 / c)
    pw_s = PowerConfig(pw.p_s_watts, pw.p_b_watts, pw.sigma2_watts / c2)
    return pair_s, pw_s, c


def _bisect_common_snr(pair: CombinedPair, pws: PowerConfig, bis: BisectionConfig, tol: float):
    """Bisection core on normalized channels.

    Returns (xi, q_low, q_up, eps1, probe) where xi is the Gram matrix from
    the last feasible probe, [q_low, q_up] the final bracket and probe the
    feasibility test (for diagnostics and tests).
    """
    m = pair.h1.size
    lift = build_lifted(pair.h1, pair.h2, pws)
    beta = pws.beta
    bc1, bc2 = beta * lift.c1, beta * lift.c2

    q_bound = beta * min(np.linalg.norm(pair.h1) ** 2, np.linalg.norm(pair.h2) ** 2)
    q_up = bis.q_up_init if bis.q_up_init is not None else 1.01 * q_bound
    q_low = bis.q_low_init if bis.q_low_init is not None else 0.0
    slack_floor = -bis.feas_margin * max(1.0, q_up)

    def probe(q: float):
        problem = SdpProblem.feasibility_with_margin(
            m * m,
            [(bc1 - q * lift.d1, q), (bc2 - q * lift.d2, q)],
            [(lift.f, pws.p_b_watts)],
        )
        try:
            sol = require_optimal(solve(problem, tol=tol))
        except SdpSolveError as exc:
            logger.warning("feasibility probe at q=%.3e failed (%s); treating as infeasible", q, exc)
            return False, None
        return sol.t_opt >= slack_floor, sol.x_mat

    feasible, xi = probe(q_low)  # q_low = 0 cannot be infeasible; also seeds xi
    if not feasible:
        raise BracketError(f"lower bracket q={q_low} reported infeasible")

    widenings = 0
    while probe(q_up)[0]:
        q_low = q_up
        q_up *= 2.0
        widenings += 1
        if widenings > bis.max_widenings:
            raise BracketError("no infeasible upper bracket found; SNR appears unbounded")

    eps1 = bis.q_tol * q_up
    while q_up - q_low >= eps1:
        q_new = 0.5 * (q_up + q_low)
        ok, x_new = probe(q_new)
        if ok:
            q_low, xi = q_new, x_new
        else:
            q_up = q_new
    return xi, q_low, q_up, eps1, probe


def optimize_beamformer_ob(
    ch: ChannelSet,
    phi: PhaseShifts,
    pw: PowerConfig,
    bis: BisectionConfig = BisectionConfig(),
    cfg: GsmConfig = GsmConfig(),
    rng: int | np.random.Generator = 0,
) -> Beamformer:
    """Bisection on the common SNR level with max-slack feasibility probes."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    pair_raw = CombinedPair.from_channel(ch, phi)
    pair, pws, c_h = _scaled_setup(pair_raw, pw)
    m = ch.m
    xi, _, _, _, _ = _bisect_common_snr(pair, pws, bis, cfg.sdp_tol)

    def power_equalize(vec_a: np.ndarray) -> np.ndarray:
        a_mat = _unvec(vec_a, m)
        used = bs_power_from(pair, a_mat, pws)
        if used <= 0.0:
            return vec_a
        return _vec(a_mat * np.sqrt(pws.p_b_watts / used))

    def score(vec_a: np.ndarray) -> float:
        g1, g2 = snr_pair_from(pair, _unvec(vec_a, m), pws)
        return min(g1, g2)

    best = gaussian_randomization(
        xi, cfg.randomization_draws, score, rng, project=power_equalize
    )
    best = power_equalize(best)  # the rank-one shortcut skips projection
    return Beamformer.matrix(_unvec(best, m) / c_h)


def mrr_mrt_beamformer(ch: ChannelSet, phi: PhaseShifts, pw: PowerConfig) -> Beamformer:
    """Closed-form receive/transmit matched filter, scaled to the full budget."""
    pair = CombinedPair.from_channel(ch, phi)
    a1 = np.conj(np.outer(pair.h2, pair.h1) + np.outer(pair.h1, pair.h2))
    used = bs_power_from(pair, a1, pw)
    if used == 0.0:
        raise DegenerateChannelError("matched-filter beamformer is zero")
    alpha = np.sqrt(pw.p_b_watts / used)
    return Beamformer.matrix(alpha * a1)


def _finish(ch, pw, phi, bf, tag) -> JointDesign:
    return JointDesign(phi=phi, a_mat=bf, min_snr_db=min_snr_db(ch, phi, bf, pw), method_tag=tag)


def sum_ob(
    ch: ChannelSet,
    pw: PowerConfig,
    cfg: GsmConfig = GsmConfig(),
    rng: int | np.random.Generator = 0,
    bis: BisectionConfig = BisectionConfig(),
) -> JointDesign:
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    phi = optimize_phase_upperbound(ch, cfg, rng)
    bf = optimize_beamformer_ob(ch, phi, pw, bis, cfg, rng)
    return _finish(ch, pw, phi, bf, "sum_ob")


def sum_mrb(
    ch: ChannelSet,
    pw: PowerConfig,
    cfg: GsmConfig = GsmConfig(),
    rng: int | np.random.Generator = 0,
) -> JointDesign:
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    phi = optimize_phase_upperbound(ch, cfg, rng)
    bf = mrr_mrt_beamformer(ch, phi, pw)
    return _finish(ch, pw, phi, bf, "sum_mrb")


def gsm_nu_zeta(
    ch: ChannelSet,
    phi_prev: PhaseShifts,
    a_prev: np.ndarray,
    pw: PowerConfig,
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Linearization data at a reference design: post-beamformer rows and
    their noise-inclusive energies."""
    pair = CombinedPair.from_channel(ch, phi_prev)
    nu1 = pair.h1 @ a_prev
    nu2 = pair.h2 @ a_prev
    return nu1, nu2, float(np.linalg.norm(nu1) ** 2 + 1.0), float(np.linalg.norm(nu2) ** 2 + 1.0)


def _gsm_joint(
    ch: ChannelSet,
    pw: PowerConfig,
    cfg: GsmConfig,
    rng,
    beamformer_update,
    seed: JointDesign,
    tag: str,
) -> JointDesign:
    best = prev = seed
    for gen in range(cfg.generations):
        ref = best if cfg.eta_source == "incumbent" else prev
        try:
            nu1, nu2, zeta1, zeta2 = gsm_nu_zeta(ch, ref.phi, ref.a_mat.mat, pw)
            row1 = nu2 @ ch.g1_bar
            row2 = nu1 @ ch.g2_bar
            mats = [np.outer(row1.conj(), row1), np.outer(row2.conj(), row2)]
            phi_bar, _ = solve_max_min_quadratic(
                mats, [zeta2, zeta1], cfg.randomization_draws, cfg.sdp_tol, rng
            )
            phi = extract_phases(phi_bar)
            bf = beamformer_update(phi)
            cand = _finish(ch, pw, phi, bf, tag)
        except (SdpSolveError, DegenerateChannelError, BracketError) as exc:
            logger.warning("%s generation %d failed (%s); skipping", tag, gen + 1, exc)
            continue
        prev = cand
        if cand.min_snr_db > best.min_snr_db:
            best = cand
    return best


def gsm_ob(
    ch: ChannelSet,
    pw: PowerConfig,
    cfg: GsmConfig = GsmConfig(),
    rng: int | np.random.Generator = 0,
    bis: BisectionConfig = BisectionConfig(),
    seed_design: JointDesign | None = None,
) -> JointDesign:
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    seed = seed_design if seed_design is not None else sum_ob(ch, pw, cfg, rng, bis)
    seed = JointDesign(seed.phi, seed.a_mat, seed.min_snr_db, "gsm_ob")
    update = lambda phi: optimize_beamformer_ob(ch, phi, pw, bis, cfg, rng)
    return _gsm_joint(ch, pw, cfg, rng, update, seed, "gsm_ob")


def gsm_mrb(
    ch: ChannelSet,
    pw: PowerConfig,
    cfg: GsmConfig = GsmConfig(),
    rng: int | np.random.Generator = 0,
    seed_design: JointDesign | None = None,
) -> JointDesign:
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    seed = seed_design if seed_design is not None else sum_mrb(ch, pw, cfg, rng)
    seed = JointDesign(seed.phi, seed.a_mat, seed.min_snr_db, "gsm_mrb")
    update = lambda phi: mrr_mrt_beamformer(ch, phi, pw)
    return _gsm_joint(ch, pw, cfg, rng, update, seed, "gsm_mrb")
