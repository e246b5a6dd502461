"""Array responses, the Fejer kernel and the angle-spectrum series.

All angles are radians. Functions accept numpy arrays where it makes sense
and broadcast like ufuncs.
"""

import numpy as np

ANGLE_EPS = 1e-3
DEFAULT_K_MAX = 3
_FEJER_SINGULAR = 1e-8


class DimensionError(ValueError):
    """Raised for zero or negative array sizes."""


class SingularAngleError(ValueError):
    """Raised when an angle sits on a sin(x) = 0 singularity."""


class OutOfSupportError(ValueError):
    """Raised when an offset falls outside the arccos domain."""


def _check_count(name, m):
    if int(m) != m or m < 1:
        raise DimensionError(f"{name} must be a positive integer, got {m!r}")
    return int(m)


def clamp_angle(x, eps=ANGLE_EPS):
    """Clamp angles into [eps, pi - eps]."""
    return np.clip(x, eps, np.pi - eps)


def steering_ula(angle, m):
    """ULA response [1, e^{-j pi cos a}, ..., e^{-j pi (m-1) cos a}]."""
    m = _check_count("m", m)
    return np.exp(-1j * np.pi * np.arange(m) * np.cos(angle))


def steering_upa(phi, varphi, lx, ly):
    """UPA response of the IOS, flattened with l_y running fastest.

    The x factor carries +j pi (l_x-1) cos(varphi) and the y factor
    -j pi (l_y-1) cos(phi).
    """
    lx = _check_count("lx", lx)
    ly = _check_count("ly", ly)
    ax = np.exp(1j * np.pi * np.arange(lx) * np.cos(varphi))
    ay = np.exp(-1j * np.pi * np.arange(ly) * np.cos(phi))
    return np.kron(ax, ay)


def fejer_kernel(x, m):
    """F_m(x) = (1/m) (sin(m pi x / 2) / sin(pi x / 2))^2.

    Near the removable singularities (x = 2k) the geometric-sum form
    (1/m)|sum_i e^{j pi i x}|^2 is used instead.
    """
    m = _check_count("m", m)
    x = np.asarray(x, dtype=float)
    # period 2; the reduction is exact and keeps sin() accurate near x = 2k
    x = x - 2 * np.round(x / 2)
    s = np.sin(np.pi * x / 2)
    singular = np.abs(s) < _FEJER_SINGULAR
    safe_s = np.where(singular, 1.0, s)
    out = np.sin(m * np.pi * x / 2) ** 2 / (m * safe_s ** 2)
    if np.any(singular):
        xs = x[singular] if x.ndim else x
        geo = np.abs(np.exp(1j * np.pi * np.multiply.outer(xs, np.arange(m))).sum(axis=-1)) ** 2 / m
        if x.ndim:
            out[singular] = geo
        else:
            out = geo
    return out[()] if np.ndim(out) == 0 else out


def _check_spectrum_args(x, y, k_max):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("variance must be positive")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    sx = np.abs(np.sin(x))
    if np.any(sx < 1e-12):
        raise SingularAngleError("sin(x) = 0: angle spectrum is singular")
    return x, y, sx


def h_series(x, y, k_max=DEFAULT_K_MAX):
    """Angle-spectrum factor h(x, y) truncated to |k| <= k_max.

    h(x, y) = sum_k (e^{-2 k^2 pi^2 / y} + e^{-2((k+1) pi - x)^2 / y})
              / (sqrt(2 pi y) |sin x|)

    ``y`` is the Gaussian angle-error variance. Written with the Gaussian
    form (2 k pi)^2 / (2 y) the first exponent is the same number.
    """
    x, y, sx = _check_spectrum_args(x, y, k_max)
    k = np.arange(-k_max, k_max + 1).reshape((-1,) + (1,) * np.broadcast(x, y).ndim)
    terms = np.exp(-2.0 * k ** 2 * np.pi ** 2 / y) + np.exp(-2.0 * ((k + 1) * np.pi - x) ** 2 / y)
    out = terms.sum(axis=0) / (np.sqrt(2 * np.pi * y) * sx)
    return out[()] if np.ndim(out) == 0 else out


def h_tilde(x, y):
    """k = 0 truncation of :func:`h_series`."""
    x, y, sx = _check_spectrum_args(x, y, 1)
    out = (1.0 + np.exp(-2.0 * (np.pi - x) ** 2 / y)) / (np.sqrt(2 * np.pi * y) * sx)
    return out[()] if np.ndim(out) == 0 else out


def wrapped_gaussian_pdf(y_offset, center_angle, variance, k_max=DEFAULT_K_MAX):
    """Density of y = 2 cos(center + w) - 2 cos(center), w ~ N(0, variance).

    Every preimage angle 2 k pi +/- arccos(y/2 + cos center) contributes a
    Gaussian term, scaled by the Jacobian 1 / (2 sqrt(1 - c^2)). Points
    outside the open support raise :class:`OutOfSupportError`.
    """
    y = np.asarray(y_offset, dtype=float)
    c = y / 2 + np.cos(center_angle)
    if np.any(np.abs(c) >= 1):
        raise OutOfSupportError("offset outside the arccos domain")
    a = np.arccos(c)
    k = np.arange(-k_max, k_max + 1).reshape((-1,) + (1,) * y.ndim)
    norm = 1.0 / np.sqrt(2 * np.pi * variance)
    g = (np.exp(-(2 * k * np.pi + a - center_angle) ** 2 / (2 * variance))
         + np.exp(-(2 * k * np.pi - a - center_angle) ** 2 / (2 * variance)))
    out = norm * g.sum(axis=0) / (2 * np.sqrt(1 - c ** 2))
    return out[()] if np.ndim(out) == 0 else out
