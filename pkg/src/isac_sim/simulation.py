"""Trajectory simulation of the two-phase protocol and its benchmarks.

Per slot: Kalman predict -> choose (eta, beta_R) -> sense -> measure ->
Kalman update -> communicate. Ground truth comes from the exact geometry
of a vehicle driving along +x; the kinematic model only drives the filter.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import os

import numpy as np

from .channel import (Geometry, angles_from_geometry, build_channels, device_direction_cosines,
                      pathloss)
from .core_math import clamp_angle
from .ios import BeamPointing, design_profile, random_phases, rx_filter, tx_beam
from .optimizer import SearchSpec, objective_grid, optimize_slot
from .rates import (SlotContext, comm_snr_direct, echo_snr_closed, echo_snr_mc,
                    echo_snr_direct)
from .tracking import (NO_MEASUREMENT, VehicleState, compute_A, initial_belief, kalman_predict,
                       kalman_update, measurement_covariance, sample_measurement, state_evolve)

PROPOSED = "proposed"
REFRACTION = "refraction"
PREDICTION = "prediction"
SCHEMES = (PROPOSED, REFRACTION, PREDICTION)


@dataclass(frozen=True)
class SlotOutcome:
    slot: int
    x_m: float
    eta: float
    beta_r: float
    snr_echo: float
    rate_sc: float
    rate_c: float
    rate_avg: float
    sigma2_tracked_varphi: float
    sigma2_tracked_phi: float
    true_state: VehicleState
    predicted: VehicleState
    tracked: VehicleState


@dataclass
class TrajectoryResult:
    scheme: str
    seed: int
    slots: list = field(default_factory=list)

    @property
    def mean_rate(self):
        return float(np.mean([s.rate_avg for s in self.slots]))

    def series(self, name):
        return np.array([getattr(s, name) for s in self.slots])


def worker_count():
    raw = os.environ.get("ISAC_SIM_THREADS")
    if raw:
        return max(1, int(raw))
    return min(8, os.cpu_count() or 1)


def _rng(seed, stream):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream])))


def true_state_at(cfg, position):
    varphi, phi, dist = angles_from_geometry(Geometry.from_config(cfg, position))
    return VehicleState(varphi, phi, dist, cfg.speed_mps)


def vehicle_position(cfg, slot):
    x0, y0, z0 = cfg.vehicle_position
    return (x0 + cfg.speed_mps * cfg.dt_slot_s * slot, y0, z0)


def trajectory_midpoint(cfg):
    """Vehicle position halfway through the run."""
    return vehicle_position(cfg, cfg.n_slots / 2)


def _pointing(state):
    return BeamPointing(float(clamp_angle(state.varphi)), float(clamp_angle(state.phi)))


def _q_process(cfg):
    return np.diag([cfg.sigma2_omega_varphi, cfg.sigma2_omega_phi, cfg.sigma2_omega_d,
                    cfg.sigma2_omega_v])


def run_trajectory(cfg, scheme=PROPOSED, seed=None, spec=SearchSpec(), truth="geometry"):
    """Simulate ``cfg.n_slots`` slots of one scheme.

    ``truth="geometry"`` recomputes the true state from the vehicle position
    every slot. ``truth="model"`` instead propagates the truth with the
    kinematic model plus process noise, which makes the filter's model exact.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if truth not in ("geometry", "model"):
        raise ValueError(f"unknown truth mode {truth!r}")
    seed = cfg.seed if seed is None else seed
    init_rng, meas_rng, phase_rng, truth_rng = (_rng(seed, k) for k in range(4))
    dt = cfg.dt_slot_s
    big_phi, big_omega = device_direction_cosines(cfg.device_azimuth, cfg.device_elevation)
    q_proc = _q_process(cfg)

    x0, y0, z0 = cfg.vehicle_position
    prev_truth = true_state_at(cfg, (x0 - cfg.speed_mps * dt, y0, z0))
    belief = initial_belief(prev_truth, q_proc, np.zeros((4, 4)), init_rng)

    result = TrajectoryResult(scheme, seed)
    for n in range(cfg.n_slots):
        if truth == "geometry":
            pos = vehicle_position(cfg, n)
            truth_state = true_state_at(cfg, pos)
        else:
            truth_state = state_evolve(prev_truth, dt, truth_rng.normal(0.0, np.sqrt(np.diag(q_proc))))
            prev_truth = truth_state
            pos = _position_from_state(cfg, truth_state)
        channels = build_channels(Geometry.from_config(cfg, pos), cfg)

        belief = kalman_predict(belief, dt)
        pred = _pointing(belief.predicted)
        beta_g_pred = float(pathloss(cfg.beta0, belief.predicted.d))

        if scheme == PREDICTION:
            eta, beta_r = 0.0, 0.0
        else:
            ctx = SlotContext(cfg, pred.varphi, pred.phi, beta_g_pred)
            dec = optimize_slot(ctx, spec)
            eta, beta_r = dec.eta_star, dec.beta_r_star

        refl = random_phases(cfg.n_elements, phase_rng) if scheme == REFRACTION else None
        sc_profile = design_profile(pred, cfg.l_x, cfg.l_y, beta_r, big_phi, big_omega,
                                    reflect_phases=refl)
        f_sc = tx_beam(pred.varphi, cfg.m_t, cfg.p_max_w)

        snr_echo = 0.0
        if eta * beta_r > 0:
            snr_echo = echo_snr_direct(channels, sc_profile.reflect_coefficients, f_sc,
                                       rx_filter(pred.varphi, cfg.m_r), eta, cfg, "x")
            if scheme == PROPOSED:
                a_x, a_y = compute_A(cfg, pred.varphi, pred.phi, beta_g_pred)
                q_meas = measurement_covariance(a_x, a_y, cfg.a_d, cfg.a_v, eta, beta_r)
            else:
                snr_y = echo_snr_direct(channels, sc_profile.reflect_coefficients, f_sc,
                                        rx_filter(pred.phi, cfg.m_r), eta, cfg, "y")
                q_meas = _measured_covariance(cfg, truth_state, snr_echo, snr_y, eta * beta_r)
            if q_meas is not NO_MEASUREMENT:
                y = sample_measurement(truth_state, q_meas, meas_rng)
                belief = kalman_update(belief, y, q_meas)
            else:
                belief = kalman_update(belief, None, NO_MEASUREMENT)
        else:
            belief = kalman_update(belief, None, NO_MEASUREMENT)

        rate_sc = np.log2(1 + comm_snr_direct(channels, sc_profile.refract_coefficients, f_sc,
                                              cfg.sigma2_c_w))
        trk = _pointing(belief.tracked)
        c_profile = design_profile(trk, cfg.l_x, cfg.l_y, 0.0, big_phi, big_omega)
        rate_c = np.log2(1 + comm_snr_direct(channels, c_profile.refract_coefficients,
                                             tx_beam(trk.varphi, cfg.m_t, cfg.p_max_w),
                                             cfg.sigma2_c_w))
        result.slots.append(SlotOutcome(
            slot=n, x_m=float(pos[0]), eta=eta, beta_r=beta_r, snr_echo=snr_echo,
            rate_sc=float(rate_sc), rate_c=float(rate_c),
            rate_avg=float(eta * rate_sc + (1 - eta) * rate_c),
            sigma2_tracked_varphi=float(belief.mse[0, 0]),
            sigma2_tracked_phi=float(belief.mse[1, 1]),
            true_state=truth_state, predicted=belief.predicted, tracked=belief.tracked))
    return result


def _measured_covariance(cfg, truth_state, snr_x, snr_y, eta_beta):
    # variance inversely proportional to the realized echo SNR
    if snr_x <= 0 or snr_y <= 0:
        return NO_MEASUREMENT
    var_x = cfg.sigma2_r / (snr_x * np.sin(truth_state.varphi) ** 2)
    var_y = cfg.sigma2_r / (snr_y * np.sin(truth_state.phi) ** 2)
    return np.diag([var_x, var_y, cfg.a_d / eta_beta, cfg.a_v / eta_beta])


def _position_from_state(cfg, state):
    rsu = np.asarray(cfg.rsu_position, dtype=float)
    cx, cy = np.cos(state.varphi), np.cos(state.phi)
    cz = -np.sqrt(max(0.0, 1 - cx ** 2 - cy ** 2))
    return tuple(rsu + state.d * np.array([cx, cy, cz]))


def run_many(cfg, schemes=SCHEMES, seeds=(0,), spec=SearchSpec(), truth="geometry"):
    """Run every (scheme, seed) pair; returns ``{(scheme, seed): result}``."""
    jobs = [(s, k) for s in schemes for k in seeds]
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(lambda job: run_trajectory(cfg, job[0], job[1], spec, truth), jobs))
    return dict(zip(jobs, results))


def sweep_power(cfg, p_values, schemes=SCHEMES, seed=None, seeds=None, spec=SearchSpec()):
    """Mean trajectory rate per (P_max, scheme), averaged over ``seeds``.

    Returns rows ``(p_max_w, scheme, mean_rate)``.
    """
    p_values = [float(p) for p in p_values]
    if any(p <= 0 for p in p_values) or p_values != sorted(p_values):
        raise ValueError("p_values must be positive and ascending")
    if seeds is None:
        seeds = (cfg.seed if seed is None else seed,)
    rows = []
    for p in p_values:
        runs = run_many(cfg.with_(p_max_w=p), schemes, seeds, spec)
        for s in schemes:
            rows.append((p, s, float(np.mean([runs[(s, k)].mean_rate for k in seeds]))))
    return rows


def validate_snr_convergence(cfg, lx_values, trials, seed=0, position=None):
    """Monte Carlo vs closed-form echo SNR for each L_x.

    Rows are ``(lx, snr_mc, snr_closed, rel_err, stderr)`` evaluated at full
    sensing allocation with the beams pointed at ``position``.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    rows = []
    for lx in lx_values:
        ctx = SlotContext.at_position(cfg.with_(l_x=int(lx)), position, eta=1.0, beta_r=1.0)
        mc, se = echo_snr_mc(ctx, trials, seed)
        closed = float(echo_snr_closed(ctx))
        rows.append((int(lx), mc, closed, abs(mc - closed) / closed, se))
    return rows


def rate_surface(cfg, position=None, spec=SearchSpec()):
    """Full (eta, beta_R) rate grid at one vehicle position."""
    ctx = SlotContext.at_position(cfg, position)
    return objective_grid(ctx, spec)
