import math

import numpy as np
import pytest

from isac_sim.config import reference_config
from isac_sim.core_math import h_series
from isac_sim.optimizer import unit_grid
from isac_sim.rates import (SlotContext, c1_constant, comm_snr_samples, echo_snr_closed, echo_snr_mc, normal_draws,
                            p_tilde, rate_avg, rate_c_closed, rate_c_mc, rate_hat, rate_sc_closed,
                            rate_sc_mc, rate_tilde, tracked_variances, variance_scales)
from isac_sim.simulation import trajectory_midpoint, vehicle_position

import oracles

CFG = reference_config()
MID = trajectory_midpoint(CFG)


def ctx_at(position=None, cfg=CFG, **kw):
    return SlotContext.at_position(cfg, position, **kw)


# ---------------------------------------------------------------- echo SNR

def test_echo_mc_zero_uncertainty_is_peak():
    ctx = ctx_at(MID, eta=0.4, beta_r=0.7, sigma2_varphi=0.0, sigma2_phi=0.0)
    mc, se = echo_snr_mc(ctx, 100, seed=1)
    cfg = ctx.cfg
    big_l = cfg.l_x * cfg.l_y
    peak = (0.7 * 0.4 * cfg.dt_slot_s * cfg.p_max_w * ctx.beta_g ** 2 * big_l ** 2 * cfg.m_t * cfg.m_r
            / (cfg.dt_symbol_s * cfg.sigma2_s_w))
    assert mc == pytest.approx(peak, rel=1e-12)
    assert se == 0.0


def test_echo_zero_reflection():
    ctx = ctx_at(MID, eta=0.5, beta_r=0.0)
    assert echo_snr_mc(ctx, 1000)[0] == 0.0
    assert echo_snr_closed(ctx) == 0.0


def test_echo_mc_close_to_closed_form_at_l40():
    ctx = ctx_at(MID, cfg=CFG.with_(l_x=40), eta=1.0, beta_r=1.0)
    mc, _ = echo_snr_mc(ctx, 10_000, seed=0)
    assert abs(mc - echo_snr_closed(ctx)) / echo_snr_closed(ctx) <= 0.15


def test_echo_mc_close_to_closed_form_at_l80():
    ctx = ctx_at(MID, eta=1.0, beta_r=1.0)
    mc, _ = echo_snr_mc(ctx, 100_000, seed=0)
    assert abs(mc - echo_snr_closed(ctx)) / echo_snr_closed(ctx) <= 0.05


def test_echo_closed_linear_in_rx_antennas_and_split():
    a = echo_snr_closed(ctx_at(MID, eta=0.3, beta_r=0.4))
    assert echo_snr_closed(ctx_at(MID, cfg=CFG.with_(m_r=16), eta=0.3, beta_r=0.4)) == pytest.approx(2 * a)
    assert echo_snr_closed(ctx_at(MID, eta=0.6, beta_r=0.4)) == pytest.approx(2 * a)
    assert echo_snr_closed(ctx_at(MID, eta=0.3, beta_r=0.8)) == pytest.approx(2 * a)


def test_echo_closed_broadside_regression():
    beta_g = 1e-3 / 100.0 ** 2
    ctx = SlotContext(CFG, np.pi / 2, np.pi / 2, beta_g, eta=1.0, beta_r=1.0)
    h = (1 + math.exp(-2 * (math.pi / 2) ** 2 / 0.1)) / math.sqrt(2 * math.pi * 0.1)
    assert echo_snr_closed(ctx) == pytest.approx(oracles.echo_snr_reference_by_hand(beta_g, h, h), rel=1e-12)


def test_echo_stderr_scales_with_trials():
    ctx = ctx_at(MID, eta=1.0, beta_r=1.0)
    _, se1 = echo_snr_mc(ctx, 20_000, seed=3, stratified=False)
    _, se2 = echo_snr_mc(ctx, 40_000, seed=3, stratified=False)
    assert se2 / se1 == pytest.approx(1 / math.sqrt(2), rel=0.2)


def test_echo_mc_deterministic():
    ctx = ctx_at(None, eta=0.2, beta_r=0.9)
    assert echo_snr_mc(ctx, 70_000, seed=4) == echo_snr_mc(ctx, 70_000, seed=4)
    assert echo_snr_mc(ctx, 70_000, seed=4) != echo_snr_mc(ctx, 70_000, seed=5)


def test_normal_draws_chunk_keyed():
    a = normal_draws(100_000, seed=2, stream=1)
    b = normal_draws(70_000, seed=2, stream=1)
    np.testing.assert_array_equal(a[:65536], b[:65536])
    s = normal_draws(50_000, seed=2, stream=1, stratified=True)
    assert abs(s.mean()) < 1e-3 and abs(s.std() - 1) < 1e-3


# ---------------------------------------------------------------- rates

def test_rate_sc_full_reflection_is_zero():
    assert rate_sc_closed(ctx_at(MID, eta=0.5, beta_r=1.0)) == 0.0


def test_rate_sc_without_reflection_equals_prior_rate_c():
    ctx = ctx_at(MID, eta=0.5, beta_r=0.0)
    prior = (ctx.sigma2_varphi, ctx.sigma2_phi)
    assert rate_sc_closed(ctx) == pytest.approx(rate_c_closed(ctx, prior), rel=1e-15)


def test_rate_sc_decreasing_in_reflection():
    r = rate_sc_closed(ctx_at(MID, eta=0.5, beta_r=unit_grid(0.01)))
    assert np.all(np.diff(r) < 0) and np.all(r >= 0)


def test_rate_c_limits_and_monotone():
    ctx = ctx_at(MID, eta=0.0, beta_r=0.0)
    prior = rate_c_closed(ctx, (ctx.sigma2_varphi, ctx.sigma2_phi))
    assert rate_c_closed(ctx) == pytest.approx(prior, rel=1e-15)
    eb = unit_grid(0.01)
    r = rate_c_closed(ctx.with_(eta=eb, beta_r=1.0))
    assert np.all(np.diff(r) > 0)


def test_rate_c_improves_as_sensing_gets_sharper():
    rates = []
    for sigma2_r in np.logspace(-8, -12, 9):
        rates.append(float(rate_c_closed(ctx_at(MID, cfg=CFG.with_(sigma2_r=sigma2_r), eta=0.2, beta_r=0.5))))
    assert np.all(np.diff(rates) > 0)


def test_closed_forms_upper_bound_expected_snr():
    # the closed form is the log of the large-array mean SNR
    ctx = ctx_at(MID, eta=0.5, beta_r=0.3)
    snr = comm_snr_samples(ctx, ctx.sigma2_varphi, ctx.sigma2_phi, 0.7, 400_000, 0)
    vp, p = ctx.angles
    closed = p_tilde(ctx) * 0.7 * h_series(vp, 0.1) * h_series(p, 0.1)
    assert snr.mean() == pytest.approx(closed, rel=0.08)


@pytest.mark.parametrize("slot", [0, 125, 250, 375, 499])
def test_jensen_ordering(slot):
    ctx = ctx_at(vehicle_position(CFG, slot), eta=0.3, beta_r=0.4)
    m, se = rate_sc_mc(ctx, 10_000, seed=slot)
    assert m <= rate_sc_closed(ctx) + 2 * se
    tr = tracked_variances(ctx)
    m, se = rate_c_mc(ctx, tr, 10_000, seed=slot)
    assert m <= rate_c_closed(ctx) + 2 * se


@pytest.mark.xfail(strict=True, reason="at prior variance 0.1 the beam mostly misses; "
                                       "E[log] sits far below log E")
def test_jensen_slack_below_ten_percent():
    ctx = ctx_at(MID, eta=0.3, beta_r=0.4)
    m, _ = rate_sc_mc(ctx, 10_000, seed=0)
    closed = float(rate_sc_closed(ctx))
    assert (closed - m) / closed < 0.10


def test_rate_avg_identities():
    for eta in (0.0, 0.5, 1.0):
        rb = rate_avg(ctx_at(MID, eta=eta, beta_r=0.3))
        assert rb.rate_avg == eta * rb.rate_sc + (1 - eta) * rb.rate_c
    rb0 = rate_avg(ctx_at(MID, eta=0.0, beta_r=0.3))
    assert rb0.rate_avg == rb0.rate_c
    rb1 = rate_avg(ctx_at(MID, eta=1.0, beta_r=0.3))
    assert rb1.rate_avg == rb1.rate_sc
    rbh = rate_avg(ctx_at(MID, eta=0.5, beta_r=0.3))
    assert rbh.rate_avg == pytest.approx((rbh.rate_sc + rbh.rate_c) / 2, rel=1e-15)


def test_rate_hat_without_sensing():
    ctx = ctx_at(MID, eta=0.0, beta_r=0.6)
    assert rate_hat(ctx) == pytest.approx(math.log2(1 + c1_constant(ctx)), rel=1e-14)
    r = rate_hat(ctx_at(MID, eta=unit_grid(0.1), beta_r=0.0))
    np.testing.assert_allclose(r, r[0], rtol=1e-14)


def test_rate_hat_matches_k0_rate_where_valid():
    grid = unit_grid(0.01)
    for ctx in (ctx_at(MID), SlotContext(CFG, np.pi / 2, 1.5, 1e-7)):
        c = ctx.with_(eta=grid[:, None], beta_r=grid[None, :])
        rh, rt = rate_hat(c), rate_tilde(c)
        live = rt > 0
        assert np.max(np.abs(rh - rt)[live] / rt[live]) < 0.01


@pytest.mark.parametrize("eta", [0.1, 0.5, 0.9])
def test_rate_hat_concave(eta):
    ctx = ctx_at(None)
    grid = unit_grid(0.01)
    assert np.max(np.diff(rate_hat(ctx.with_(eta=eta, beta_r=grid)), 2)) <= 1e-9
    assert np.max(np.diff(rate_hat(ctx.with_(eta=grid, beta_r=eta)), 2)) <= 1e-9


def test_variance_scales_positive():
    a_x, a_y = variance_scales(ctx_at(None))
    assert a_x > 0 and a_y > 0


def test_context_rejects_bad_fractions():
    with pytest.raises(ValueError):
        ctx_at(MID, eta=1.5)
