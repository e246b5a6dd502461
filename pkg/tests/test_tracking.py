import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isac_sim.config import reference_config
from isac_sim.core_math import h_series
from isac_sim.tracking import (NO_MEASUREMENT, KalmanBelief, VehicleState, compute_A,
                               evolution_jacobian, initial_belief, kalman_predict, kalman_update,
                               measurement_covariance, measurement_variances, sample_measurement,
                               state_evolve, tracked_angle_variance)

import oracles

DT = 0.02


def _belief(state, mse, q=None, qz=None):
    q = np.zeros((4, 4)) if q is None else q
    qz = np.eye(4) if qz is None else qz
    return KalmanBelief(state, state, np.asarray(mse, float), q, qz)


def test_stationary_vehicle_stays_put():
    s = VehicleState(1.0, 2.0, 50.0, 0.0)
    assert state_evolve(s, DT) == s


def test_broadside_angle_and_distance_step():
    s = VehicleState(np.pi / 2, 1.0, 80.0, 20.0)
    nxt = state_evolve(s, DT)
    assert nxt.varphi == pytest.approx(np.pi / 2, abs=1e-15)
    assert nxt.d == pytest.approx(80.0 - 20.0 * DT, rel=1e-15)


def test_special_angle_step():
    nxt = state_evolve(VehicleState(np.pi / 3, np.pi / 2, 100.0, 20.0), DT)
    assert nxt.phi == pytest.approx(np.pi / 2, abs=1e-15)
    assert nxt.varphi - np.pi / 3 == pytest.approx(0.002, rel=1e-12)


def test_cot_singularity():
    with pytest.raises(ValueError):
        state_evolve(VehicleState(1.0, 1e-7, 50.0, 20.0), DT)
    with pytest.raises(ValueError):
        evolution_jacobian(VehicleState(1.0, np.pi - 1e-7, 50.0, 20.0), DT)


def test_noise_and_clamp():
    s = VehicleState(0.01, 1.0, 50.0, 1.0)
    nxt = state_evolve(s, DT, noise=[-1.0, 0.0, 0.5, 0.1])
    assert 0 < nxt.varphi < np.pi
    assert nxt.v == pytest.approx(1.1)


def test_distance_floor():
    s = VehicleState(np.pi / 2, 1.0, 1.2, 20.0)
    assert state_evolve(s, DT, noise=[0, 0, -5.0, 0]).d > 0


def test_jacobian_at_rest():
    s = VehicleState(1.0, 2.0, 40.0, 0.0)
    g = evolution_jacobian(s, DT)
    assert g[0, 0] == 1.0
    assert g[0, 3] == pytest.approx(DT * math.cos(1.0) / 40.0)
    np.testing.assert_array_equal(g[3], [0, 0, 0, 1])


def test_jacobian_distance_row_at_broadside():
    g = evolution_jacobian(VehicleState(np.pi / 2, 1.0, 40.0, 20.0), DT)
    assert g[2, 0] == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=50)
@given(st.floats(0.2, 2.9), st.floats(0.2, 2.9), st.floats(5.0, 200.0), st.floats(0.0, 40.0))
def test_jacobian_matches_finite_differences(vp, p, d, v):
    s = VehicleState(vp, p, d, v)
    fd = oracles.central_jacobian(lambda x: oracles.kinematic_step(x, DT), s.as_array())
    assert np.max(np.abs(evolution_jacobian(s, DT) - fd)) < 1e-5


def test_predict_without_noise_or_motion_keeps_mse():
    # at v = 0 only the speed column of G differs from I; known speed makes G M G^T = M
    mse = np.diag([0.1, 0.2, 0.3, 0.0])
    b = kalman_predict(_belief(VehicleState(1.0, 1.0, 50.0, 0.0), mse), DT)
    np.testing.assert_allclose(b.mse, mse, atol=1e-15)


def test_predict_adds_process_noise():
    mse = np.diag([0.1, 0.2, 0.3, 0.0])
    q = np.diag([0.01, 0.02, 0.03, 0.04])
    b = kalman_predict(_belief(VehicleState(1.0, 1.0, 50.0, 0.0), mse, q), DT)
    np.testing.assert_allclose(b.mse, mse + q, atol=1e-15)
    assert b.predicted == state_evolve(b.tracked, DT)


def test_update_uninformative_measurement():
    s = VehicleState(1.0, 1.0, 50.0, 20.0)
    b = _belief(s, np.eye(4) * 0.1)
    y = VehicleState(1.2, 0.9, 52.0, 21.0)
    out = kalman_update(b, y, np.eye(4) * 1e12)
    np.testing.assert_allclose(out.tracked.as_array(), s.as_array(), atol=1e-9)


def test_update_perfect_measurement():
    b = _belief(VehicleState(1.0, 1.0, 50.0, 20.0), np.eye(4) * 0.1)
    y = VehicleState(1.2, 0.9, 52.0, 21.0)
    out = kalman_update(b, y, np.zeros((4, 4)))
    np.testing.assert_allclose(out.tracked.as_array(), y.as_array(), atol=1e-12)
    np.testing.assert_allclose(out.mse, 0, atol=1e-15)


def test_update_singular_innovation():
    b = _belief(VehicleState(1.0, 1.0, 50.0, 20.0), np.zeros((4, 4)))
    with pytest.raises(np.linalg.LinAlgError):
        kalman_update(b, b.predicted, np.zeros((4, 4)))


def test_update_no_measurement():
    b = _belief(VehicleState(1.0, 1.0, 50.0, 20.0), np.eye(4))
    b = KalmanBelief(b.predicted, VehicleState(0.5, 0.5, 1.0, 1.0), b.mse, b.q_process, b.q_measure)
    out = kalman_update(b, None, NO_MEASUREMENT)
    assert out.tracked == out.predicted


@settings(max_examples=200)
@given(st.floats(1e-4, 1.0), st.floats(1e-8, 1.0), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_scalar_posterior_matches_closed_form(prior, a, eta, beta):
    b = _belief(VehicleState(np.pi / 2, 1.0, 50.0, 20.0), np.diag([prior, 1, 1, 1]))
    qz = np.diag([a / (eta * beta), 1, 1, 1])
    out = kalman_update(b, b.predicted, qz)
    closed = tracked_angle_variance(prior, a, eta * beta)
    assert out.mse[0, 0] == pytest.approx(closed, rel=1e-12)
    assert closed == pytest.approx(oracles.scalar_posterior_algebra(prior, a / (eta * beta)), rel=1e-12)


def test_posterior_variance_monte_carlo():
    rng = np.random.default_rng(5)
    for prior, a, eb in [(0.1, 0.01, 0.3), (0.05, 0.2, 0.9), (0.02, 1e-3, 0.05)]:
        emp = oracles.scalar_posterior_mc(prior, a / eb, 10_000, rng)
        assert emp == pytest.approx(tracked_angle_variance(prior, a, eb), rel=0.05)


def test_tracked_variance_monotone_and_limit():
    ebs = np.linspace(0, 1, 101)
    v = tracked_angle_variance(0.1, 0.01, ebs)
    assert v[0] == 0.1
    assert np.all(np.diff(v) < 0)


def test_mse_stays_psd_over_many_cycles():
    cfg = reference_config()
    q = np.diag([0.1, 0.1, 0.25, 0.01])
    rng = np.random.default_rng(2)
    truth = VehicleState(2.8, 1.4, 100.0, 20.0)
    b = initial_belief(truth, q, np.eye(4), rng)
    for n in range(500):
        b = kalman_predict(b, DT)
        qz = measurement_covariance(1e-4, 2e-4, cfg.a_d, cfg.a_v, 0.2, 0.5)
        b = kalman_update(b, sample_measurement(b.predicted, qz, rng), qz)
        np.testing.assert_allclose(b.mse, b.mse.T, atol=0)
        assert np.linalg.eigvalsh(b.mse).min() >= -1e-12
        assert b.tracked.d > 0


def test_measurement_variances():
    assert measurement_variances(0.3, 0.5, 1.0, 1.0) == (0.3, 0.5)
    v1 = measurement_variances(0.3, 0.5, 0.4, 0.5)
    v2 = measurement_variances(0.3, 0.5, 0.2, 0.5)
    assert v2[0] == pytest.approx(2 * v1[0]) and v2[1] == pytest.approx(2 * v1[1])
    assert measurement_variances(0.3, 0.5, 0.0, 0.5) is NO_MEASUREMENT
    assert measurement_covariance(0.3, 0.5, 1, 1, 0.7, 0.0) is NO_MEASUREMENT
    with pytest.raises(ValueError):
        measurement_variances(0.0, 0.5, 1.0, 1.0)


def test_compute_A_scaling():
    cfg = reference_config()
    base = compute_A(cfg, 1.0, 1.2, 1e-7)
    double_p = compute_A(cfg.with_(p_max_w=0.2), 1.0, 1.2, 1e-7)
    double_l = compute_A(cfg.with_(l_x=160), 1.0, 1.2, 1e-7)
    for b, p, l in zip(base, double_p, double_l):
        assert p == pytest.approx(b / 2, rel=1e-12)
        assert l == pytest.approx(b / 2, rel=1e-12)
    assert base[1] / base[0] == pytest.approx(math.sin(1.0) ** 2 / math.sin(1.2) ** 2)


def test_compute_A_broadside_regression():
    cfg = reference_config()
    beta_g = 1e-3 / 100.0 ** 2
    # typed-in constants: 1e-7 s, 1e-10 W, 1e-10, 0.02 s, 0.1 W, 6400, 8, 8
    h = (1 + math.exp(-2 * (math.pi / 2) ** 2 / 0.1)) / math.sqrt(2 * math.pi * 0.1)
    want = 1e-7 * 1e-10 * 1e-10 / (0.02 * 0.1 * beta_g ** 2 * 6400 * 8 * 8 * h * h)
    a_x, a_y = compute_A(cfg, np.pi / 2, np.pi / 2, beta_g)
    assert a_x == pytest.approx(want, rel=1e-12)
    assert a_y == pytest.approx(want, rel=1e-12)
    assert h == pytest.approx(h_series(np.pi / 2, 0.1), rel=1e-12)


def test_measurement_residual_variance():
    rng = np.random.default_rng(9)
    truth = VehicleState(1.5, 1.6, 60.0, 20.0)
    qz = np.diag([1e-3, 2e-3, 1.0, 0.25])
    ys = np.array([sample_measurement(truth, qz, rng).as_array() for _ in range(10_000)])
    resid = ys - truth.as_array()
    var = resid.var(axis=0, ddof=1)
    se = np.diag(qz) * math.sqrt(2 / (len(ys) - 1))
    assert np.all(np.abs(var - np.diag(qz)) < 3 * se)


def test_initial_belief_uses_one_process_draw():
    truth = VehicleState(2.0, 1.0, 100.0, 20.0)
    q = np.diag([0.1, 0.1, 0.25, 0.01])
    b1 = initial_belief(truth, q, np.eye(4), np.random.default_rng(1))
    b2 = initial_belief(truth, q, np.eye(4), np.random.default_rng(1))
    assert np.array_equal(b1.tracked.as_array(), b2.tracked.as_array())
    np.testing.assert_array_equal(b1.mse, q)
    assert b1.tracked != truth
