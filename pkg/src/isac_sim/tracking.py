"""Vehicle state model, Kalman prediction/update and measurement variances.

State ordering is ``(varphi, phi, d, v)``: the two RSU-relative angles, the
RSU-IOS distance and the speed.
"""

from dataclasses import dataclass, replace

import numpy as np

from .core_math import ANGLE_EPS, clamp_angle, h_series

_COT_GUARD = 1e-6
# open-loop prediction can drive d through zero; keep it physical
MIN_DISTANCE = 1.0


class NoMeasurement:
    """Marker for an echo with zero sensing energy (eta * beta_R = 0)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NO_MEASUREMENT"


NO_MEASUREMENT = NoMeasurement()


@dataclass(frozen=True)
class VehicleState:
    varphi: float
    phi: float
    d: float
    v: float

    def as_array(self):
        return np.array([self.varphi, self.phi, self.d, self.v], dtype=float)

    @classmethod
    def from_array(cls, x):
        return cls(*(float(val) for val in x))


@dataclass(frozen=True)
class KalmanBelief:
    predicted: VehicleState
    tracked: VehicleState
    mse: np.ndarray
    q_process: np.ndarray
    q_measure: np.ndarray


def _check_cot(phi):
    if phi < _COT_GUARD or phi > np.pi - _COT_GUARD:
        raise ValueError(f"phi = {phi} too close to 0 or pi (cot singularity)")


def state_evolve(state, dt, noise=None):
    """One step of the constant-speed kinematic model.

    ``noise`` is an optional 4-vector added to the result before the angles
    are clamped back into the open interval.
    """
    _check_cot(state.phi)
    step = state.v * dt / state.d
    x = np.array([
        state.varphi + step * np.cos(state.varphi),
        state.phi + step / np.tan(state.phi),
        state.d - state.v * dt * np.sin(state.varphi),
        state.v,
    ])
    if noise is not None:
        x = x + np.asarray(noise, dtype=float)
    x[:2] = clamp_angle(x[:2])
    x[2] = max(x[2], MIN_DISTANCE)
    return VehicleState.from_array(x)


def evolution_jacobian(state, dt):
    _check_cot(state.phi)
    vp, p, d, v = state.varphi, state.phi, state.d, state.v
    cot = 1 / np.tan(p)
    return np.array([
        [1 - v * dt * np.sin(vp) / d, 0.0, -v * dt * np.cos(vp) / d ** 2, dt * np.cos(vp) / d],
        [0.0, 1 - v * dt / (d * np.sin(p) ** 2), -v * dt * cot / d ** 2, dt * cot / d],
        [-v * dt * np.cos(vp), 0.0, 1.0, -dt * np.sin(vp)],
        [0.0, 0.0, 0.0, 1.0],
    ])


def _sym(m):
    return 0.5 * (m + m.T)


def initial_belief(true_state, q_process, q_measure, rng):
    """Tracked state = truth plus one process-noise draw; MSE = Q_omega."""
    q_process = np.asarray(q_process, dtype=float)
    draw = rng.normal(0.0, np.sqrt(np.diag(q_process)))
    x = true_state.as_array() + draw
    x[:2] = clamp_angle(x[:2])
    st = VehicleState.from_array(x)
    return KalmanBelief(st, st, q_process.copy(), q_process, np.asarray(q_measure, dtype=float))


def kalman_predict(belief, dt):
    g = evolution_jacobian(belief.tracked, dt)
    predicted = state_evolve(belief.tracked, dt)
    mse = _sym(g @ belief.mse @ g.T + belief.q_process)
    return replace(belief, predicted=predicted, mse=mse)


def kalman_update(belief, measurement, q_measure=None):
    """Fuse ``measurement`` (a VehicleState) into the prediction.

    K = M (Q_z + M)^{-1}; tracked = predicted + K (y - predicted);
    posterior MSE = (I - K) M. Passing :data:`NO_MEASUREMENT` as
    ``q_measure`` returns the prediction unchanged.
    """
    if q_measure is NO_MEASUREMENT:
        return replace(belief, tracked=belief.predicted)
    qz = belief.q_measure if q_measure is None else np.asarray(q_measure, dtype=float)
    m = belief.mse
    innov_cov = qz + m
    try:
        gain = np.linalg.solve(innov_cov.T, m.T).T
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular innovation covariance: {exc}") from None
    xp = belief.predicted.as_array()
    x = xp + gain @ (measurement.as_array() - xp)
    x[:2] = clamp_angle(x[:2])
    post = _sym((np.eye(len(xp)) - gain) @ m)
    return replace(belief, tracked=VehicleState.from_array(x), mse=post, q_measure=qz)


def tracked_angle_variance(prior_var, a, eta_beta):
    """Posterior angle variance prior*A / (prior*eta*beta_R + A).

    Returns ``prior_var`` exactly where ``eta_beta`` is zero.
    """
    prior_var, a, eta_beta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (prior_var, a, eta_beta)))
    out = np.array(prior_var, dtype=float, copy=True)
    live = eta_beta > 0
    out[live] = prior_var[live] * a[live] / (prior_var[live] * eta_beta[live] + a[live])
    return out[()] if out.ndim == 0 else out


def measurement_variances(a_varphi, a_phi, eta, beta_r):
    """Angle measurement variances A / (eta beta_R), or NO_MEASUREMENT."""
    if a_varphi <= 0 or a_phi <= 0:
        raise ValueError("variance scales must be positive")
    eb = eta * beta_r
    if eb <= 0:
        return NO_MEASUREMENT
    return a_varphi / eb, a_phi / eb


def measurement_covariance(a_varphi, a_phi, a_d, a_v, eta, beta_r):
    """Diagonal Q_z with every entry scaled by 1 / (eta beta_R)."""
    eb = eta * beta_r
    if eb <= 0:
        return NO_MEASUREMENT
    return np.diag([a_varphi, a_phi, a_d, a_v]) / eb


def compute_A(cfg, varphi, phi, beta_g, sigma2_varphi=None, sigma2_phi=None):
    """Angle-variance scales at full sensing allocation (eta = beta_R = 1).

    A = dt sigma_s^2 sigma_R^2 /
        (dT P beta_G^2 L M_t M_r h(varphi, s2) h(phi, s2) sin^2(angle))
    """
    s2x = cfg.sigma2_omega_varphi if sigma2_varphi is None else sigma2_varphi
    s2y = cfg.sigma2_omega_phi if sigma2_phi is None else sigma2_phi
    varphi = clamp_angle(varphi, ANGLE_EPS)
    phi = clamp_angle(phi, ANGLE_EPS)
    denom = (cfg.dt_slot_s * cfg.p_max_w * beta_g ** 2 * cfg.n_elements * cfg.m_t * cfg.m_r
             * h_series(varphi, s2x) * h_series(phi, s2y))
    num = cfg.dt_symbol_s * cfg.sigma2_s_w * cfg.sigma2_r
    return num / (denom * np.sin(varphi) ** 2), num / (denom * np.sin(phi) ** 2)


def sample_measurement(true_state, q_measure, rng):
    """y = x + z with z ~ N(0, Q_z); angle components clamped into (0, pi)."""
    x = true_state.as_array()
    y = x + rng.normal(0.0, np.sqrt(np.diag(q_measure)))
    y[:2] = clamp_angle(y[:2])
    return VehicleState.from_array(y)
