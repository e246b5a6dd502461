"""Geometry-driven channel synthesis for the RSU <-> IOS <-> device links.

Shapes used throughout the package:

* downlink ``H_dl``: ``(L, M_t)`` = sqrt(beta_G) a_I(phi, -varphi) a_R(varphi)^T
* uplink ``H_ul``: ``(M_r, L)`` = sqrt(beta_G) b_R(.) a_I(phi, -varphi)^T
* device channel ``h``: length ``L``

so the device signal is ``h^T Theta H_dl f`` and the echo at a receive
ULA is ``v^H H_ul Theta H_dl f``.
"""

from dataclasses import dataclass

import numpy as np

from .core_math import steering_ula, steering_upa


class DegenerateGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Geometry:
    rsu_position: tuple
    vehicle_position: tuple
    device_azimuth: float = 0.0
    device_elevation: float = np.pi / 2

    @classmethod
    def from_config(cls, cfg, vehicle_position=None):
        pos = cfg.vehicle_position if vehicle_position is None else vehicle_position
        return cls(tuple(cfg.rsu_position), tuple(pos), cfg.device_azimuth, cfg.device_elevation)


@dataclass(frozen=True)
class ChannelSet:
    downlink: np.ndarray
    uplink_x: np.ndarray
    uplink_y: np.ndarray
    device: np.ndarray
    beta_g: float
    distance: float


def pathloss(beta0, distance):
    """Free-space power gain beta0 / d^2."""
    return beta0 / np.asarray(distance, dtype=float) ** 2


def angles_from_geometry(geom):
    """Return ``(varphi, phi, distance)`` seen from the RSU.

    cos(varphi) and cos(phi) are the direction cosines of the RSU -> vehicle
    displacement along x and y, i.e. sin(psi_z) cos(psi_x) and
    sin(psi_z) sin(psi_x) with psi_z measured from the z axis.
    """
    disp = np.asarray(geom.vehicle_position, float) - np.asarray(geom.rsu_position, float)
    distance = float(np.linalg.norm(disp))
    if distance < 1e-9:
        raise DegenerateGeometryError("RSU and vehicle positions coincide")
    cx, cy, _ = disp / distance
    return float(np.arccos(np.clip(cx, -1, 1))), float(np.arccos(np.clip(cy, -1, 1))), distance


def downlink_channel(varphi, phi, beta_g, m_t, lx, ly):
    if not beta_g > 0:
        raise ValueError("beta_g must be positive")
    a_i = steering_upa(phi, varphi, lx, ly)
    a_r = steering_ula(varphi, m_t)
    return np.sqrt(beta_g) * np.outer(a_i, a_r)


def uplink_channels(varphi, phi, beta_g, m_r, lx, ly):
    """Uplink matrices to the x-axis and y-axis receive ULAs.

    The x-axis ULA sees the direction cosine cos(varphi), the y-axis ULA
    cos(phi).
    """
    if not beta_g > 0:
        raise ValueError("beta_g must be positive")
    a_i = steering_upa(phi, varphi, lx, ly)
    root = np.sqrt(beta_g)
    ul_x = root * np.outer(steering_ula(varphi, m_r), a_i)
    ul_y = root * np.outer(steering_ula(phi, m_r), a_i)
    return ul_x, ul_y


def device_direction_cosines(azimuth, elevation):
    """(Phi_u, Omega_u) = (sin(el) cos(az), sin(el) sin(az))."""
    return np.sin(elevation) * np.cos(azimuth), np.sin(elevation) * np.sin(azimuth)


def device_channel(geom, beta_h, lx, ly):
    if not beta_h > 0:
        raise ValueError("beta_h must be positive")
    big_phi, big_omega = device_direction_cosines(geom.device_azimuth, geom.device_elevation)
    hx = np.exp(-1j * np.pi * np.arange(lx) * big_phi)
    hy = np.exp(-1j * np.pi * np.arange(ly) * big_omega)
    return np.sqrt(beta_h) * np.kron(hx, hy)


def build_channels(geom, cfg):
    varphi, phi, distance = angles_from_geometry(geom)
    beta_g = float(pathloss(cfg.beta0, distance))
    dl = downlink_channel(varphi, phi, beta_g, cfg.m_t, cfg.l_x, cfg.l_y)
    ul_x, ul_y = uplink_channels(varphi, phi, beta_g, cfg.m_r, cfg.l_x, cfg.l_y)
    dev = device_channel(geom, cfg.beta_h, cfg.l_x, cfg.l_y)
    return ChannelSet(dl, ul_x, ul_y, dev, beta_g, distance)
