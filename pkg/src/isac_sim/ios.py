"""IOS phase design, power splitting and beamforming-gain factors."""

from dataclasses import dataclass

import numpy as np

from .core_math import fejer_kernel, steering_ula, steering_upa

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class BeamPointing:
    """Angles the RSU and IOS steer towards (predicted or tracked)."""

    varphi: float
    phi: float

    def __post_init__(self):
        for v in (self.varphi, self.phi):
            if not 0 < v < np.pi:
                raise ValueError(f"pointing angle {v} outside (0, pi)")


@dataclass(frozen=True)
class IOSProfile:
    lx: int
    ly: int
    refract_phases: np.ndarray
    reflect_phases: np.ndarray
    beta_t: float
    beta_r: float

    def __post_init__(self):
        if abs(self.beta_t + self.beta_r - 1) > 1e-12:
            raise ValueError("beta_t + beta_r must equal 1")
        if not (0 <= self.beta_r <= 1 and 0 <= self.beta_t <= 1):
            raise ValueError("power split outside [0, 1]")
        n = self.lx * self.ly
        if len(self.refract_phases) != n or len(self.reflect_phases) != n:
            raise ValueError("phase arrays must have lx * ly entries")

    @property
    def reflect_coefficients(self):
        return np.sqrt(self.beta_r) * np.exp(1j * np.asarray(self.reflect_phases))

    @property
    def refract_coefficients(self):
        return np.sqrt(self.beta_t) * np.exp(1j * np.asarray(self.refract_phases))


def _grid_phases(qx, qy, lx, ly, theta0):
    lx_idx = np.arange(lx)[:, None]
    ly_idx = np.arange(ly)[None, :]
    phases = np.pi * lx_idx * qx + np.pi * ly_idx * qy + theta0
    return np.mod(phases, TWO_PI).ravel()


def optimal_reflect_phases(point, lx, ly, theta0=0.0):
    """Phase gradients -2 cos(varphi) along x and 2 cos(phi) along y."""
    qx = -2 * np.cos(point.varphi)
    qy = 2 * np.cos(point.phi)
    return _grid_phases(qx, qy, lx, ly, theta0)


def optimal_refract_phases(point, device_big_phi, device_big_omega, lx, ly, theta0=0.0):
    """Refraction gradients that map the RSU beam onto the device direction.

    The x gradient multiplies (l_x - 1) and the y gradient (l_y - 1).
    """
    qx = -np.cos(point.varphi) + device_big_phi
    qy = np.cos(point.phi) + device_big_omega
    return _grid_phases(qx, qy, lx, ly, theta0)


def random_phases(n, rng):
    return rng.uniform(0.0, TWO_PI, size=n)


def design_profile(point, lx, ly, beta_r, device_big_phi, device_big_omega, theta0=0.0,
                   reflect_phases=None):
    """IOS profile with beam-aligned phases and a common power split."""
    refl = optimal_reflect_phases(point, lx, ly, theta0) if reflect_phases is None else reflect_phases
    refr = optimal_refract_phases(point, device_big_phi, device_big_omega, lx, ly, theta0)
    return IOSProfile(lx, ly, refr, refl, 1.0 - beta_r, beta_r)


def reflect_gain_direct(reflect_coefficients, true_varphi, true_phi, lx, ly):
    """|a_I^T diag(c) a_I|^2 at the true angles."""
    a = steering_upa(true_phi, true_varphi, lx, ly)
    return float(np.abs(np.sum(a * reflect_coefficients * a)) ** 2)


def passive_beamforming_gain(profile, point, true_varphi, true_phi):
    """beta_R L_x L_y F_Lx(2 dcos varphi) F_Ly(2 dcos phi) for beam-aligned phases.

    ``profile`` is expected to carry the phases from
    :func:`optimal_reflect_phases` at ``point``.
    """
    dx = np.cos(point.varphi) - np.cos(true_varphi)
    dy = np.cos(point.phi) - np.cos(true_phi)
    return (profile.beta_r * profile.lx * profile.ly
            * fejer_kernel(2 * dx, profile.lx) * fejer_kernel(2 * dy, profile.ly))


def tx_beam(varphi_point, m_t, p_max):
    """f = sqrt(P/M_t) conj(a_R(varphi))."""
    return np.sqrt(p_max / m_t) * np.conj(steering_ula(varphi_point, m_t))


def rx_filter(angle_point, m_r):
    """v = b_R(angle) / sqrt(M_r)."""
    return steering_ula(angle_point, m_r) / np.sqrt(m_r)


def tx_rx_beam_gains(point, true_varphi, true_phi, m_t, m_r, p_max):
    """(|a_R^T f|^2, |v_x^H b_R|^2, |v_y^H b_R|^2) via Fejer kernels."""
    dx = np.cos(point.varphi) - np.cos(true_varphi)
    dy = np.cos(point.phi) - np.cos(true_phi)
    return (p_max * fejer_kernel(dx, m_t), fejer_kernel(dx, m_r), fejer_kernel(dy, m_r))


def aligned_split_gain(betas, phases, steering):
    """Reflected gain |sum_l sqrt(beta_l) e^{j theta_l} a_l^2|^2 for per-element splits."""
    return float(np.abs(np.sum(np.sqrt(betas) * np.exp(1j * phases) * steering ** 2)) ** 2)
