import numpy as np
import pytest

from ris_twr.channels import ArrayConfig, ChannelSet, GeometryConfig, RicianConfig, sample_channel_set, without_ris
from ris_twr.multi import (
    BisectionConfig,
    _bisect_common_snr,
    _scaled_setup,
    build_lifted,
    gsm_mrb,
    gsm_nu_zeta,
    gsm_ob,
    mrr_mrt_beamformer,
    optimize_beamformer_ob,
    optimize_phase_upperbound,
    sum_mrb,
    sum_ob,
)
from ris_twr.single import GsmConfig, sum_single
from ris_twr.system import (
    Beamformer,
    CombinedPair,
    PhaseShifts,
    PowerConfig,
    bs_power,
    min_snr_db,
    optimal_tau,
    snr_pair_multi,
    snr_upper_bounds,
)

PW = PowerConfig(p_s_watts=1e-3, p_b_watts=1e-2, sigma2_watts=7.164e-16)
CFG = GsmConfig(generations=2)


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def small_channel(seed, m=2, n=2, scale=3e-5):
    rng = np.random.default_rng(seed)
    return ChannelSet.build(
        scale * cn(rng, m), scale * cn(rng, m),
        scale * cn(rng, n), scale * cn(rng, n),
        scale * cn(rng, m, n),
    )


def vec(a):
    return a.reshape(-1, order="F")


class TestPhaseUpperbound:
    def test_single_antenna_reduction_matches_sum(self):
        ch = small_channel(3, m=1, n=3)
        phi_multi = optimize_phase_upperbound(ch, CFG, rng=np.random.default_rng(8))
        design = sum_single(ch, PW, CFG, rng=np.random.default_rng(8))
        np.testing.assert_allclose(phi_multi.phi, design.phi.phi, rtol=1e-12)

    @pytest.mark.parametrize("seed", [0, 4])
    def test_near_grid_optimum(self, seed):
        ch = small_channel(seed)
        phi = optimize_phase_upperbound(ch, GsmConfig(), rng=seed)
        pair = CombinedPair.from_channel(ch, phi)
        achieved = min(np.linalg.norm(pair.h1) ** 2, np.linalg.norm(pair.h2) ** 2)
        th = np.linspace(0, 2 * np.pi, 360, endpoint=False)
        a, b = np.meshgrid(th, th, indexing="ij")
        grid = np.stack([np.exp(1j * a).ravel(), np.exp(1j * b).ravel(), np.ones(a.size)], axis=1)
        g1 = np.sum(np.abs(grid @ ch.g1_bar.T) ** 2, axis=1)
        g2 = np.sum(np.abs(grid @ ch.g2_bar.T) ** 2, axis=1)
        assert achieved >= 0.95 * float(np.minimum(g1, g2).max())

    def test_disconnected_ris_leaves_direct_channel(self):
        ch = without_ris(small_channel(5, m=3, n=4))
        phi = optimize_phase_upperbound(ch, CFG, rng=0)
        pair = CombinedPair.from_channel(ch, phi)
        np.testing.assert_allclose(pair.h1, ch.h1, rtol=1e-12)
        np.testing.assert_allclose(pair.h2, ch.h2, rtol=1e-12)


class TestLifted:
    def test_quadratic_form_identities(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            m = int(rng.integers(1, 4))
            h1, h2 = cn(rng, m), cn(rng, m)
            lift = build_lifted(h1, h2, PW)
            a_mat = cn(rng, m, m)
            a = vec(a_mat)
            num1 = abs(h1 @ a_mat @ h2) ** 2
            assert np.real(a.conj() @ lift.c1 @ a) == pytest.approx(num1, rel=1e-10, abs=1e-300)
            num2 = abs(h2 @ a_mat @ h1) ** 2
            assert np.real(a.conj() @ lift.c2 @ a) == pytest.approx(num2, rel=1e-10, abs=1e-300)
            row1 = np.linalg.norm(h1 @ a_mat) ** 2
            assert np.real(a.conj() @ lift.d1 @ a) == pytest.approx(row1, rel=1e-10)
            row2 = np.linalg.norm(h2 @ a_mat) ** 2
            assert np.real(a.conj() @ lift.d2 @ a) == pytest.approx(row2, rel=1e-10)
            power = (
                PW.p_s_watts * (np.linalg.norm(a_mat @ h1) ** 2 + np.linalg.norm(a_mat @ h2) ** 2)
                + PW.sigma2_watts * np.linalg.norm(a_mat, "fro") ** 2
            )
            assert np.real(a.conj() @ lift.f @ a) == pytest.approx(power, rel=1e-10)

    def test_basis_vector_sparsity(self):
        # h1 = e1 makes d1 select exactly the first row of A
        lift = build_lifted(np.array([1.0, 0.0]), np.array([0.0, 1.0]), PW)
        expect = np.zeros((4, 4))
        expect[0, 0] = expect[2, 2] = 1.0   # entries A[0,0], A[0,1] in column stacking
        np.testing.assert_allclose(lift.d1, expect, atol=1e-14)

    def test_all_blocks_psd(self):
        rng = np.random.default_rng(2)
        lift = build_lifted(cn(rng, 3), cn(rng, 3), PW)
        for mat in (lift.c1, lift.d1, lift.c2, lift.d2, lift.f):
            assert np.linalg.eigvalsh(mat)[0] >= -1e-12 * np.linalg.norm(mat)
        assert np.linalg.eigvalsh(lift.f)[0] > 0.0


class TestBisection:
    def test_bracketing_invariant(self):
        ch = small_channel(7, m=2, n=3)
        phi = optimize_phase_upperbound(ch, CFG, rng=7)
        pair, pws, _ = _scaled_setup(CombinedPair.from_channel(ch, phi), PW)
        bis = BisectionConfig()
        xi, q_low, q_up, eps1, probe = _bisect_common_snr(pair, pws, bis, 1e-6)
        assert q_up - q_low < eps1
        assert probe(q_low)[0]
        assert not probe(q_up)[0]
        assert xi is not None and np.linalg.eigvalsh(xi)[0] >= -1e-7 * np.linalg.norm(xi)

    def test_zero_level_always_feasible(self):
        ch = small_channel(8, m=2, n=2)
        phi = optimize_phase_upperbound(ch, CFG, rng=8)
        pair, pws, _ = _scaled_setup(CombinedPair.from_channel(ch, phi), PW)
        _, _, _, _, probe = _bisect_common_snr(pair, pws, BisectionConfig(), 1e-6)
        ok, _ = probe(0.0)
        assert ok

    def test_cap_level_always_infeasible(self):
        # the beamformer-independent cap with margin can never be reached
        for seed in range(4):
            ch = small_channel(seed, m=2, n=2)
            phi = optimize_phase_upperbound(ch, CFG, rng=seed)
            pair, pws, _ = _scaled_setup(CombinedPair.from_channel(ch, phi), PW)
            cap = pws.beta * min(np.linalg.norm(pair.h1) ** 2, np.linalg.norm(pair.h2) ** 2)
            _, _, _, _, probe = _bisect_common_snr(pair, pws, BisectionConfig(), 1e-6)
            ok, _ = probe(1.01 * cap)
            assert not ok


class TestBeamformerOb:
    def test_power_budget_respected(self):
        for seed in range(4):
            ch = small_channel(seed, m=3, n=2)
            phi = optimize_phase_upperbound(ch, CFG, rng=seed)
            bf = optimize_beamformer_ob(ch, phi, PW, BisectionConfig(), CFG, rng=seed)
            assert bs_power(ch, phi, bf, PW) <= PW.p_b_watts * (1 + 1e-6)

    def test_single_antenna_matches_closed_form(self):
        for seed in range(4):
            ch = small_channel(seed, m=1, n=3)
            phi = optimize_phase_upperbound(ch, CFG, rng=seed)
            bf = optimize_beamformer_ob(ch, phi, PW, BisectionConfig(), GsmConfig(), rng=seed)
            got = min(snr_pair_multi(ch, phi, bf, PW))
            tau = optimal_tau(ch, phi, PW)
            ref = min(snr_pair_multi(ch, phi, Beamformer.scalar(tau), PW))
            assert got == pytest.approx(ref, rel=0.02)


class TestMrrMrt:
    def test_power_equality(self):
        for seed in range(6):
            ch = small_channel(seed, m=3, n=3)
            phi = optimize_phase_upperbound(ch, CFG, rng=seed)
            bf = mrr_mrt_beamformer(ch, phi, PW)
            assert bs_power(ch, phi, bf, PW) == pytest.approx(PW.p_b_watts, rel=1e-9)

    def test_scalar_reduction(self):
        ch = small_channel(2, m=1, n=2)
        phi = optimize_phase_upperbound(ch, CFG, rng=2)
        pair = CombinedPair.from_channel(ch, phi)
        bf = mrr_mrt_beamformer(ch, phi, PW)
        t1, t2 = pair.h1[0], pair.h2[0]
        direction = np.conj(2 * t1 * t2)
        ratio = bf.mat[0, 0] / direction
        assert abs(np.imag(ratio)) < 1e-12 * abs(ratio)    # scalar multiple of 2(t1 t2)*
        g = snr_pair_multi(ch, phi, bf, PW)
        tau_equiv = abs(bf.mat[0, 0]) ** 2
        ref = snr_pair_multi(ch, phi, Beamformer.scalar(tau_equiv), PW)
        assert g[0] == pytest.approx(ref[0], rel=1e-10)

    def test_matches_stacked_outer_form(self):
        ch = small_channel(4, m=3, n=2)
        phi = optimize_phase_upperbound(ch, CFG, rng=4)
        pb = phi.phi_bar
        pair = CombinedPair.from_channel(ch, phi)
        direct = np.conj(np.outer(pair.h2, pair.h1) + np.outer(pair.h1, pair.h2))
        stacked = np.conj(
            ch.g2_bar @ np.outer(pb, pb) @ ch.g1_bar.T
            + ch.g1_bar @ np.outer(pb, pb) @ ch.g2_bar.T
        )
        np.testing.assert_allclose(direct, stacked, rtol=1e-10)

    def test_degenerate_channel_raises(self):
        from ris_twr.system import DegenerateChannelError

        ch = ChannelSet.build(np.zeros(2), np.zeros(2), np.zeros(1), np.zeros(1), np.zeros((2, 1)))
        with pytest.raises(DegenerateChannelError):
            mrr_mrt_beamformer(ch, PhaseShifts(np.ones(1)), PW)


class TestComposites:
    def test_tags_and_power(self):
        ch = small_channel(1, m=2, n=2)
        ob = sum_ob(ch, PW, CFG, rng=1)
        mrb = sum_mrb(ch, PW, CFG, rng=1)
        assert ob.method_tag == "sum_ob" and mrb.method_tag == "sum_mrb"
        for d in (ob, mrb):
            assert bs_power(ch, d.phi, d.a_mat, PW) <= PW.p_b_watts * (1 + 1e-6)

    def test_single_antenna_composites_match_sum(self):
        for seed in range(3):
            ch = small_channel(seed, m=1, n=2)
            base = sum_single(ch, PW, GsmConfig(), rng=np.random.default_rng(seed))
            ob = sum_ob(ch, PW, GsmConfig(), rng=np.random.default_rng(seed))
            mrb = sum_mrb(ch, PW, GsmConfig(), rng=np.random.default_rng(seed))
            lin = lambda db: 10 ** (db / 10)
            assert lin(ob.min_snr_db) == pytest.approx(lin(base.min_snr_db), rel=0.02)
            assert lin(mrb.min_snr_db) == pytest.approx(lin(base.min_snr_db), rel=0.02)

    def test_bound_respected(self):
        for seed in range(4):
            ch = small_channel(seed, m=2, n=3)
            d = sum_ob(ch, PW, CFG, rng=seed)
            achieved = 10 ** (d.min_snr_db / 10)
            assert achieved <= min(snr_upper_bounds(ch, d.phi, PW)) * (1 + 1e-10)


class TestGsmJoint:
    def test_nu_zeta_zero_beamformer(self):
        ch = small_channel(0, m=2, n=2)
        phi = PhaseShifts(np.ones(2, dtype=complex))
        nu1, nu2, z1, z2 = gsm_nu_zeta(ch, phi, np.zeros((2, 2)), PW)
        assert np.all(nu1 == 0) and np.all(nu2 == 0)
        assert z1 == 1.0 and z2 == 1.0

    def test_linearization_exact_at_expansion_point(self):
        rng = np.random.default_rng(6)
        ch = small_channel(6, m=3, n=2)
        phi = PhaseShifts.from_angles(rng.uniform(0, 2 * np.pi, 2))
        a = cn(rng, 3, 3)
        nu1, nu2, z1, z2 = gsm_nu_zeta(ch, phi, a, PW)
        g1_lin = PW.beta * abs(nu1 @ (ch.g2_bar @ phi.phi_bar)) ** 2 / z1
        g2_lin = PW.beta * abs(nu2 @ (ch.g1_bar @ phi.phi_bar)) ** 2 / z2
        g1, g2 = snr_pair_multi(ch, phi, Beamformer.matrix(a), PW)
        assert g1_lin == pytest.approx(g1, rel=1e-10)
        assert g2_lin == pytest.approx(g2, rel=1e-10)

    def test_zeta_scaling_with_beamformer(self):
        ch = small_channel(9, m=2, n=2)
        phi = PhaseShifts(np.ones(2, dtype=complex))
        a = cn(np.random.default_rng(9), 2, 2)
        _, _, z1, z2 = gsm_nu_zeta(ch, phi, a, PW)
        _, _, z1c, z2c = gsm_nu_zeta(ch, phi, 3.0 * a, PW)
        assert z1c - 1.0 == pytest.approx(9.0 * (z1 - 1.0), rel=1e-10)
        assert z2c - 1.0 == pytest.approx(9.0 * (z2 - 1.0), rel=1e-10)

    def test_gsm_never_below_seed(self):
        for seed in range(4):
            ch = small_channel(seed, m=2, n=2)
            rng = np.random.default_rng(seed)
            seed_ob = sum_ob(ch, PW, CFG, rng=rng)
            got = gsm_ob(ch, PW, CFG, rng=rng, seed_design=seed_ob)
            assert got.min_snr_db >= seed_ob.min_snr_db
            assert got.method_tag == "gsm_ob"

    def test_gsm_mrb_never_below_seed(self):
        for seed in range(4):
            ch = small_channel(seed, m=2, n=2)
            rng = np.random.default_rng(seed)
            seed_mrb = sum_mrb(ch, PW, CFG, rng=rng)
            got = gsm_mrb(ch, PW, CFG, rng=rng, seed_design=seed_mrb)
            assert got.min_snr_db >= seed_mrb.min_snr_db
            assert got.method_tag == "gsm_mrb"

    def test_zero_generations_returns_seed(self):
        ch = small_channel(2, m=2, n=2)
        cfg = GsmConfig(generations=0)
        a = gsm_ob(ch, PW, cfg, rng=np.random.default_rng(3))
        b = sum_ob(ch, PW, cfg, rng=np.random.default_rng(3))
        assert a.min_snr_db == b.min_snr_db
        np.testing.assert_array_equal(a.phi.phi, b.phi.phi)

    def test_reported_snr_is_true_snr(self):
        ch = small_channel(5, m=2, n=3)
        d = gsm_ob(ch, PW, CFG, rng=5)
        assert d.min_snr_db == pytest.approx(min_snr_db(ch, d.phi, d.a_mat, PW), abs=1e-12)


@pytest.mark.slow
def test_joint_design_near_refined_grid_oracle():
    from joint_oracle import joint_refined_grid_oracle

    ch = small_channel(0, m=2, n=2)
    oracle = joint_refined_grid_oracle(ch, PW)
    d = gsm_ob(ch, PW, GsmConfig(generations=3), rng=0)
    assert 10 ** (d.min_snr_db / 10) >= 0.95 * oracle


def test_realistic_multi_instance():
    geom, ric = GeometryConfig(), RicianConfig()
    ch = sample_channel_set(geom, ric, ArrayConfig(m=4, n_h=3, n_v=3), 77)
    rng = np.random.default_rng(0)
    ob = sum_ob(ch, PW, CFG, rng=rng)
    gob = gsm_ob(ch, PW, CFG, rng=rng, seed_design=ob)
    assert gob.min_snr_db >= ob.min_snr_db
    assert bs_power(ch, gob.phi, gob.a_mat, PW) <= PW.p_b_watts * (1 + 1e-6)
