"""Echo SNR and achievable rates: closed forms and Monte Carlo estimates.

Closed forms broadcast over ``eta`` and ``beta_r``, so a whole
(eta, beta_R) grid can be evaluated by putting arrays into the context.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from .channel import Geometry, angles_from_geometry, pathloss
from .core_math import clamp_angle, fejer_kernel, h_series, h_tilde
from .tracking import compute_A, tracked_angle_variance

_CHUNK = 1 << 16


@dataclass(frozen=True)
class SlotContext:
    """Everything the per-slot rate expressions need.

    ``varphi``/``phi`` are the angles the beams are designed for (the
    predicted angles); the closed forms are evaluated there too.
    ``sigma2_*`` default to the configured process-noise variances.
    """

    cfg: object
    varphi: float
    phi: float
    beta_g: float
    eta: object = 0.0
    beta_r: object = 0.0
    sigma2_varphi: float = None
    sigma2_phi: float = None

    def __post_init__(self):
        for name in ("eta", "beta_r"):
            val = np.asarray(getattr(self, name))
            if np.any(val < 0) or np.any(val > 1):
                raise ValueError(f"{name} outside [0, 1]")
        if self.sigma2_varphi is None:
            object.__setattr__(self, "sigma2_varphi", self.cfg.sigma2_omega_varphi)
        if self.sigma2_phi is None:
            object.__setattr__(self, "sigma2_phi", self.cfg.sigma2_omega_phi)

    @classmethod
    def at_position(cls, cfg, position=None, **kw):
        geom = Geometry.from_config(cfg, position)
        varphi, phi, dist = angles_from_geometry(geom)
        return cls(cfg, varphi, phi, float(pathloss(cfg.beta0, dist)), **kw)

    def with_(self, **changes):
        return replace(self, **changes)

    @property
    def angles(self):
        return clamp_angle(self.varphi), clamp_angle(self.phi)


@dataclass(frozen=True)
class RateBreakdown:
    rate_sc: object
    rate_c: object
    rate_avg: object
    snr_echo: object


def echo_scale(ctx):
    """beta_R eta dT P beta_G^2 / (dt sigma_s^2): the echo SNR per unit array gain."""
    cfg = ctx.cfg
    return (np.asarray(ctx.beta_r) * np.asarray(ctx.eta) * cfg.dt_slot_s * cfg.p_max_w
            * ctx.beta_g ** 2 / (cfg.dt_symbol_s * cfg.sigma2_s_w))


def p_tilde(ctx):
    cfg = ctx.cfg
    return 4 * cfg.p_max_w * ctx.beta_g * cfg.beta_h * cfg.n_elements * cfg.m_t / cfg.sigma2_c_w


def c1_constant(ctx):
    cfg = ctx.cfg
    vp, p = ctx.angles
    return (2 * cfg.p_max_w * ctx.beta_g * cfg.beta_h * cfg.n_elements * cfg.m_t
            / (np.pi * np.sin(vp) * np.sin(p) * np.sqrt(ctx.sigma2_varphi * ctx.sigma2_phi)
               * cfg.sigma2_c_w))


def variance_scales(ctx):
    vp, p = ctx.angles
    return compute_A(ctx.cfg, vp, p, ctx.beta_g, ctx.sigma2_varphi, ctx.sigma2_phi)


def tracked_variances(ctx, a=None):
    """Posterior angle variances after sensing with (eta, beta_R)."""
    a_x, a_y = variance_scales(ctx) if a is None else a
    eb = np.asarray(ctx.eta) * np.asarray(ctx.beta_r)
    return (tracked_angle_variance(ctx.sigma2_varphi, a_x, eb),
            tracked_angle_variance(ctx.sigma2_phi, a_y, eb))


def echo_snr_closed(ctx):
    """Large-array echo SNR: scale * L M_t M_r h(varphi, s2) h(phi, s2)."""
    cfg = ctx.cfg
    vp, p = ctx.angles
    return (echo_scale(ctx) * cfg.n_elements * cfg.m_t * cfg.m_r
            * h_series(vp, ctx.sigma2_varphi) * h_series(p, ctx.sigma2_phi))


def rate_sc_closed(ctx):
    vp, p = ctx.angles
    gain = h_series(vp, ctx.sigma2_varphi) * h_series(p, ctx.sigma2_phi)
    return np.log2(1 + p_tilde(ctx) * (1 - np.asarray(ctx.beta_r)) * gain)


def rate_c_closed(ctx, tracked=None):
    """Communication-only rate with posterior variances ``tracked``.

    When ``tracked`` is omitted the posterior variances follow from the
    context's (eta, beta_R) and the closed-form variance scales.
    """
    vp, p = ctx.angles
    tx, ty = tracked_variances(ctx) if tracked is None else tracked
    return np.log2(1 + p_tilde(ctx) * h_series(vp, tx) * h_series(p, ty))


def rate_avg(ctx, tracked=None):
    """Two-phase average eta R_sc + (1 - eta) R_c from the closed forms."""
    r_sc = rate_sc_closed(ctx)
    r_c = rate_c_closed(ctx, tracked)
    eta = np.asarray(ctx.eta)
    return RateBreakdown(r_sc, r_c, eta * r_sc + (1 - eta) * r_c, echo_snr_closed(ctx))


def rate_tilde(ctx, a=None):
    """Two-phase rate with the k = 0 spectrum approximation."""
    vp, p = ctx.angles
    tx, ty = tracked_variances(ctx, a)
    pt = p_tilde(ctx)
    eta = np.asarray(ctx.eta)
    r_sc = np.log2(1 + pt * (1 - np.asarray(ctx.beta_r))
                   * h_tilde(vp, ctx.sigma2_varphi) * h_tilde(p, ctx.sigma2_phi))
    r_c = np.log2(1 + pt * h_tilde(vp, tx) * h_tilde(p, ty))
    return eta * r_sc + (1 - eta) * r_c


def rate_hat_terms(c1, s2x, s2y, a_x, a_y, eta, beta_r):
    """Simplified two-phase rate as a function of plain numbers."""
    eta = np.asarray(eta, dtype=float)
    beta_r = np.asarray(beta_r, dtype=float)
    eb = eta * beta_r
    cross = np.sqrt((s2x * eb + a_x) * (s2y * eb + a_y) / (a_x * a_y))
    return eta * np.log2(1 + c1 * (1 - beta_r)) + (1 - eta) * np.log2(1 + c1 * cross)


def rate_hat(ctx, a=None):
    a_x, a_y = variance_scales(ctx) if a is None else a
    return rate_hat_terms(c1_constant(ctx), ctx.sigma2_varphi, ctx.sigma2_phi, a_x, a_y,
                          ctx.eta, ctx.beta_r)


# --------------------------------------------------------------------------
# Monte Carlo


def normal_draws(n, seed, stream=0, stratified=False):
    """Standard normal draws from counter-based Philox streams.

    Draws are produced in fixed chunks keyed by (seed, stream, chunk), so the
    result does not depend on how the work is scheduled. With
    ``stratified=True`` draw i lands in the quantile stratum [i/n, (i+1)/n).
    """
    out = np.empty(n)
    for start in range(0, n, _CHUNK):
        stop = min(n, start + _CHUNK)
        key = np.random.SeedSequence([int(seed), int(stream), start // _CHUNK])
        rng = np.random.Generator(np.random.Philox(key))
        if stratified:
            u = (np.arange(start, stop) + rng.random(stop - start)) / n
            out[start:stop] = ndtri(u)
        else:
            out[start:stop] = rng.standard_normal(stop - start)
    return out


def _chunked_mean(x):
    # fixed-order reduction
    sums = [np.sum(x[i:i + _CHUNK]) for i in range(0, len(x), _CHUNK)]
    return float(np.sum(sums)) / len(x)


def echo_factor_samples(ctx, trials, seed, stratified=True):
    """Per-axis Fejer-product samples entering the averaged echo SNR.

    Returns ``(fx, fy)`` where fx = F_Lx(2dc) F_Mt(dc) F_Mr(dc) along
    varphi and fy = F_Ly(2dc) along phi, with true angles drawn as
    pointing + N(0, variance).
    """
    cfg = ctx.cfg
    vp, p = ctx.angles
    wx = np.sqrt(ctx.sigma2_varphi) * normal_draws(trials, seed, 1, stratified)
    wy = np.sqrt(ctx.sigma2_phi) * normal_draws(trials, seed, 2, stratified)
    dx = np.cos(vp) - np.cos(vp + wx)
    dy = np.cos(p) - np.cos(p + wy)
    fx = fejer_kernel(2 * dx, cfg.l_x) * fejer_kernel(dx, cfg.m_t) * fejer_kernel(dx, cfg.m_r)
    fy = fejer_kernel(2 * dy, cfg.l_y)
    return fx, fy


def echo_snr_mc(ctx, trials, seed=0, stratified=True):
    """Monte Carlo echo SNR and its standard error.

    The two angle axes are independent, so the expectation is the product of
    two one-dimensional means. The reported standard error is the iid value
    std / sqrt(trials) propagated through the product; for stratified draws
    it is conservative.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    fx, fy = echo_factor_samples(ctx, trials, seed, stratified)
    mx, my = _chunked_mean(fx), _chunked_mean(fy)
    scale = float(echo_scale(ctx)) * ctx.cfg.n_elements
    mean = scale * mx * my
    if mean == 0 or trials < 2:
        return mean, 0.0
    rel = np.sqrt((np.std(fx, ddof=1) / mx) ** 2 + (np.std(fy, ddof=1) / my) ** 2) / np.sqrt(trials)
    return mean, mean * rel


def comm_snr_samples(ctx, var_x, var_y, power_fraction, trials, seed):
    """Device SNR samples |h^T Theta^T H f|^2 / sigma_c^2 under random angle errors."""
    cfg = ctx.cfg
    vp, p = ctx.angles
    dx = np.cos(vp) - np.cos(vp + np.sqrt(var_x) * normal_draws(trials, seed, 3))
    dy = np.cos(p) - np.cos(p + np.sqrt(var_y) * normal_draws(trials, seed, 4))
    gain = (cfg.n_elements * fejer_kernel(dx, cfg.l_x) * fejer_kernel(dy, cfg.l_y)
            * fejer_kernel(dx, cfg.m_t))
    return ctx.beta_g * cfg.beta_h * power_fraction * cfg.p_max_w * gain / cfg.sigma2_c_w


def _rate_mc(snr):
    r = np.log2(1 + snr)
    return _chunked_mean(r), float(np.std(r, ddof=1) / np.sqrt(len(r)))


def rate_sc_mc(ctx, trials, seed=0):
    """E[log2(1 + SNR)] in the sensing phase, with prior angle errors."""
    snr = comm_snr_samples(ctx, ctx.sigma2_varphi, ctx.sigma2_phi,
                           1 - float(ctx.beta_r), trials, seed)
    return _rate_mc(snr)


def rate_c_mc(ctx, tracked, trials, seed=0):
    """E[log2(1 + SNR)] in the communication-only phase, with posterior errors."""
    snr = comm_snr_samples(ctx, tracked[0], tracked[1], 1.0, trials, seed)
    return _rate_mc(snr)


# --------------------------------------------------------------------------
# direct link evaluation at known true angles


def comm_snr_direct(channels, refract_coefficients, f, sigma2_c):
    """|h^T Theta^T H_dl f|^2 / sigma_c^2 with explicit vectors."""
    sig = np.sum(channels.device * refract_coefficients * (channels.downlink @ f))
    return float(np.abs(sig) ** 2 / sigma2_c)


def echo_snr_direct(channels, reflect_coefficients, f, v, eta, cfg, axis="x"):
    """Matched-filter echo SNR eta dT/dt |v^H H_ul Theta^R H_dl f|^2 / sigma_s^2."""
    ul = channels.uplink_x if axis == "x" else channels.uplink_y
    sig = np.conj(v) @ (ul @ (reflect_coefficients * (channels.downlink @ f)))
    return float(eta * cfg.dt_slot_s / cfg.dt_symbol_s * np.abs(sig) ** 2 / cfg.sigma2_s_w)
