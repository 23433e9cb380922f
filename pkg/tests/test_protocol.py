import math

import numpy as np
import pytest

from fockchan.channels import ChannelParams, qubit_success_probability
from fockchan.choi import PSI_PLUS, channel_fidelity, choi_of_channel, matched_fidelity, naive_optimum
from fockchan.channels import suppressed_channel_direct
from fockchan.fock import DomainError, FockState
from fockchan.protocol import (
    BALANCED_PROBE,
    SweepPlan,
    bare_matched_fidelity,
    classify,
    dual_rail_probe,
    evaluate_point,
    fig4_nu,
    gain_grid,
    optimize_nu,
    relative_success,
    run_protocol,
    run_sweep,
)

SQ = 1 / math.sqrt(2)
PSI = FockState.qubit(SQ, SQ).density_matrix()


def test_identity_protocol():
    rho = FockState.qubit(0.6, 0.8).density_matrix()
    out, p = run_protocol(rho, ChannelParams(1.0, 1.0, 1.0))
    np.testing.assert_allclose(out, rho, atol=1e-15)
    assert p == pytest.approx(1.0, abs=1e-15)


def test_balanced_superposition_single_mode():
    out, p = run_protocol(PSI, ChannelParams.matched(SQ, SQ))
    assert p == pytest.approx(0.28125, abs=1e-12)
    # rho_out = (psi psi + w |0><0|)/(1 + w) with w = (1 - tau^2) nu^2 |c1|^2 = 1/8
    w = 0.125
    np.testing.assert_allclose(out, (PSI + w * np.diag([1, 0])) / (1 + w), atol=1e-14)
    state_fid = np.real(np.trace(PSI @ out))
    assert state_fid == pytest.approx((1 + w / 2) / (1 + w), abs=1e-12)
    assert state_fid == pytest.approx(17 / 18, abs=1e-12)


def test_balanced_superposition_dual_rail_probe():
    probe = dual_rail_probe(SQ, SQ)
    out, p = run_protocol(probe, ChannelParams.matched(SQ, SQ), ref_dim=2)
    assert p == pytest.approx(0.28125, abs=1e-12)
    assert np.real(np.trace(probe @ out)) == pytest.approx(8 / 9, abs=1e-12)
    assert np.real(np.trace(probe @ out)) == pytest.approx(0.8889, abs=1e-4)


@pytest.mark.parametrize("c0, c1", [(SQ, SQ), (0.6, 0.8), (0.28, 0.96)])
@pytest.mark.parametrize("tau, nu", [(0.5, 0.3), (SQ, SQ), (0.9, 0.05)])
def test_matched_vacuum_noise_weight(c0, c1, tau, nu):
    rho = FockState.qubit(c0, c1).density_matrix()
    p = ChannelParams.matched(tau, nu)
    out, p_succ = run_protocol(rho, p)
    excess = out * p_succ * p.g**2 - rho
    expected = np.zeros((2, 2))
    expected[0, 0] = (1 - tau**2) * nu**2 * c1**2
    np.testing.assert_allclose(excess, expected, atol=1e-12)


def test_naive_amplification_leaves_vacuum_excess():
    tau = SQ
    out, p_succ = run_protocol(PSI, ChannelParams(tau=tau, nu=1.0, g=1 / tau))
    excess = out * p_succ * (1 / tau) ** 2 - PSI
    assert excess[0, 0].real == pytest.approx(0.25, abs=1e-12)
    np.testing.assert_allclose(excess - np.diag([0.25, 0]), 0, atol=1e-12)


def test_vacuum_noise_suppression_factor():
    tau = 0.6
    base_out, base_p = run_protocol(PSI, ChannelParams.matched(tau, 1.0))
    base = base_out[0, 0].real * base_p * tau**-2 - 0.5
    for nu in (0.1, 0.2, 0.5, 0.9):
        p = ChannelParams.matched(tau, nu)
        out, ps = run_protocol(PSI, p)
        noise = out[0, 0].real * ps * p.g**2 - 0.5
        assert noise / base == pytest.approx(nu**2, rel=1e-9)


def test_run_protocol_embeds_into_larger_truncation():
    p1 = ChannelParams.matched(0.6, 0.5, n_max=1)
    p3 = ChannelParams.matched(0.6, 0.5, n_max=3)
    out1, s1 = run_protocol(PSI, p1)
    out3, s3 = run_protocol(PSI, p3)
    np.testing.assert_allclose(out3[:2, :2], out1, atol=1e-14)
    assert s3 == pytest.approx(s1 * p1.g**-4, rel=1e-12)


def test_run_protocol_rejects_unnormalized():
    with pytest.raises(DomainError):
        run_protocol(PSI / 2, ChannelParams(0.5))


def test_relative_success_examples():
    assert relative_success(ChannelParams(1.0, 1.0, 1.0)) == pytest.approx(1.0)
    assert relative_success(ChannelParams(SQ, SQ, 2.0)) == pytest.approx(0.28125, abs=1e-12)
    assert relative_success(ChannelParams(0.3, 1.0, 3.0), (1.0, 0.0)) == pytest.approx(1 / 9)


def test_matched_policy_and_classification():
    assert fig4_nu(SQ, 2.0) == pytest.approx(SQ, abs=1e-12)
    assert fig4_nu(0.5, 1.5) == 1.0
    assert classify(0.5, 1.0, 1.5) == "naive"
    assert classify(0.5, 0.5, 4.0) == "matched"
    assert classify(0.5, 0.5, 3.0) == "custom"


def test_gain_grid_defaults():
    g = gain_grid(1.0, 10.0)
    assert len(g) == 201
    assert g[0] == 1.0 and g[-1] == pytest.approx(10.0)
    assert list(gain_grid(2.0, 2.0, 1)) == [2.0]
    with pytest.raises(DomainError):
        gain_grid(0.5, 2.0)


def test_sweep_identity_point():
    (rec,) = run_sweep(SweepPlan(taus=(1.0,), gains=(1.0,), nu_policy="fig4"))
    assert (rec.fidelity, rec.t_eff, rec.p_rel, rec.p_succ) == pytest.approx((1, 1, 1, 1), abs=1e-12)
    assert rec.strategy == "matched"


def test_sweep_matched_policy_point():
    tau = math.sqrt(0.5)
    (rec,) = run_sweep(SweepPlan(taus=(tau,), gains=(2.0,)))
    assert rec.nu == pytest.approx(0.70711, abs=1e-5)
    assert rec.fidelity == pytest.approx(0.88889, abs=1e-5)
    assert rec.p_rel == pytest.approx(0.28125, abs=1e-12)


def test_sweep_naive_maximum():
    tau = math.sqrt(0.5)
    recs = run_sweep(SweepPlan(taus=(tau,), gains=tuple(gain_grid(1.0, 10.0)), nu_policy="naive"))
    best = max(recs, key=lambda r: r.fidelity)
    g_opt, f_max = naive_optimum(tau)
    assert best.fidelity == pytest.approx(0.83333, abs=1e-4)
    assert best.fidelity <= f_max + 1e-12
    # 200 points per decade is a 1.16% step
    assert best.g == pytest.approx(g_opt, rel=0.006)


def test_sweep_ordering_and_invariants():
    taus = (0.9, 0.5)
    plan = SweepPlan(taus=taus, gains=(3.0, 1.0, 2.0))
    recs = run_sweep(plan)
    assert [(r.tau, r.g) for r in recs] == [(t, g) for t in taus for g in (1.0, 2.0, 3.0)]
    for r in recs:
        for v in (r.fidelity, r.t_eff, r.p_succ, r.p_rel):
            assert 0 <= v <= 1 + 1e-12


def test_sweep_parallel_matches_serial():
    plan = SweepPlan(taus=(0.3, 0.6, 0.9), gains=tuple(gain_grid(1, 20, 40)))
    assert run_sweep(plan, workers=4) == run_sweep(plan)


def test_state_and_channel_pictures_agree():
    plan = SweepPlan(taus=(math.sqrt(0.25), math.sqrt(0.5), math.sqrt(0.75)), gains=tuple(gain_grid(1, 30, 60)))
    probe = dual_rail_probe(*BALANCED_PROBE)
    for rec in run_sweep(plan):
        out, p = run_protocol(probe, ChannelParams(rec.tau, rec.nu, rec.g), ref_dim=2)
        assert np.real(np.trace(probe @ out)) == pytest.approx(rec.fidelity, abs=1e-10)
        assert p == pytest.approx(rec.p_succ, abs=1e-12)


def test_matched_policy_monotone_and_limit():
    for t2 in (0.25, 0.5, 0.75):
        tau = math.sqrt(t2)
        recs = run_sweep(SweepPlan(taus=(tau,), gains=tuple(gain_grid(1, 100, 100))))
        f = np.array([r.fidelity for r in recs])
        t = np.array([r.t_eff for r in recs])
        assert np.all(np.diff(f) >= -1e-15)
        assert np.all(np.diff(t) >= -1e-15)
    (rec,) = run_sweep(SweepPlan(taus=(0.5,), gains=(100.0,)))
    assert rec.fidelity == pytest.approx(1 / (1 + 0.02**2 * 0.75 / 2), abs=1e-12)
    assert rec.fidelity > 0.9998
    far = run_sweep(SweepPlan(taus=(0.5,), gains=(1e4,)))[0]
    assert far.fidelity >= 1 - 1e-7


def test_success_scales_as_inverse_square_gain():
    for t2 in (0.25, 0.5, 0.75):
        tau = math.sqrt(t2)
        for g in (20.0, 40.0, 80.0):
            a = evaluate_point(tau, fig4_nu(tau, g), g).p_succ
            b = evaluate_point(tau, fig4_nu(tau, 2 * g), 2 * g).p_succ
            assert b / a == pytest.approx(0.25, rel=0.05)


def test_truncation_scales_success_only():
    a = evaluate_point(0.6, 0.5, 1 / 0.3, truncation=1)
    b = evaluate_point(0.6, 0.5, 1 / 0.3, truncation=3)
    assert b.fidelity == a.fidelity and b.t_eff == a.t_eff
    assert b.p_succ == pytest.approx(a.p_succ * (1 / 0.3) ** -4, rel=1e-12)


def test_plan_validation():
    with pytest.raises(DomainError):
        SweepPlan(taus=(), gains=(1.0,))
    with pytest.raises(DomainError):
        SweepPlan(taus=(0.5,), gains=(1.0,), nu_policy="fixed")
    with pytest.raises(DomainError):
        SweepPlan(taus=(0.5,), gains=(1.0,), probe=(1.0, 1.0))
    with pytest.raises(DomainError):
        SweepPlan(taus=(0.5,), gains=(1.0,), nu_policy="bogus")


def _achieved_fidelity(tau, choice):
    ch = suppressed_channel_direct(ChannelParams(tau, choice.nu, choice.g))
    return channel_fidelity(choi_of_channel(ch).normalize())


def test_optimize_nu_examples():
    tau = SQ
    choice = optimize_nu(tau, 1 / 1.125)
    assert choice.nu**2 == pytest.approx(0.5, abs=1e-12)
    assert choice.g == pytest.approx(2.0, abs=1e-12)
    assert choice.p_succ == pytest.approx(0.28125, abs=1e-12)
    _, p = run_protocol(PSI, ChannelParams(tau, choice.nu, choice.g))
    assert p == pytest.approx(choice.p_succ, abs=1e-12)

    bare = optimize_nu(tau, bare_matched_fidelity(tau))
    assert bare.nu == pytest.approx(1.0, abs=1e-12)
    assert bare.g == pytest.approx(1 / tau, abs=1e-12)

    tau = 0.5
    choice = optimize_nu(tau, 0.999)
    assert choice.nu**2 == pytest.approx(2 * (0.001 / 0.999) / 0.75, rel=1e-9)
    assert choice.nu**2 == pytest.approx(0.00267, abs=1e-5)
    assert _achieved_fidelity(tau, choice) == pytest.approx(0.999, abs=1e-9)


def test_optimize_nu_below_bare_fidelity_needs_no_attenuation():
    choice = optimize_nu(0.5, 0.5)
    assert choice.nu == 1.0
    assert _achieved_fidelity(0.5, choice) >= 0.5


def test_optimize_nu_meets_targets(rng):
    for _ in range(50):
        tau = rng.uniform(0.1, 0.99)
        target = rng.uniform(bare_matched_fidelity(tau), 0.99999)
        choice = optimize_nu(tau, target, (0.6, 0.8))
        assert _achieved_fidelity(tau, choice) == pytest.approx(target, abs=1e-9)
        assert choice.p_succ == pytest.approx(qubit_success_probability(0.6, 0.8, ChannelParams(tau, choice.nu, choice.g)))


def test_optimize_nu_infeasible():
    with pytest.raises(DomainError):
        optimize_nu(0.5, 1.0)
