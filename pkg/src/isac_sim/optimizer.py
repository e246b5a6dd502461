"""Grid search over (eta, beta_R) and the sensing-phase existence condition."""

from dataclasses import dataclass

import numpy as np

from .rates import c1_constant, rate_c_closed, rate_hat_terms, rate_sc_closed, variance_scales

CLOSED_FORM_P1 = "closed_form_P1"
APPROX_P2 = "approx_P2"
# relative slack under which two grid values count as a tie
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SearchSpec:
    eta_step: float = 0.01
    beta_step: float = 0.01
    objective: str = CLOSED_FORM_P1

    def __post_init__(self):
        for step in (self.eta_step, self.beta_step):
            if not 0 < step <= 0.5:
                raise ValueError("grid steps must lie in (0, 0.5]")
        if self.objective not in (CLOSED_FORM_P1, APPROX_P2):
            raise ValueError(f"unknown objective {self.objective!r}")


@dataclass(frozen=True)
class SlotDecision:
    eta_star: float
    beta_r_star: float
    rate_star: float
    condition_value: float
    needed: bool


def unit_grid(step):
    """{0, step, 2 step, ..., 1}."""
    n = 1.0 / step
    if abs(n - round(n)) < 1e-9:
        return np.linspace(0.0, 1.0, int(round(n)) + 1)
    return np.append(np.arange(0.0, 1.0, step), 1.0)


def grid_argmax(values):
    """Row-major first index among values within TIE_RTOL of the maximum."""
    best = np.max(values)
    near = values >= best - TIE_RTOL * max(1.0, abs(best))
    flat = int(np.argmax(near.ravel()))
    return np.unravel_index(flat, values.shape)


def objective_grid(ctx, spec=SearchSpec()):
    """Evaluate the chosen objective on the (eta, beta_R) grid.

    Returns ``(etas, betas, rates)`` with ``rates[i, j]`` at
    ``(etas[i], betas[j])``.
    """
    etas = unit_grid(spec.eta_step)
    betas = unit_grid(spec.beta_step)
    if spec.objective == CLOSED_FORM_P1:
        # R_sc depends on beta_R alone and R_c on eta * beta_R alone
        eb = etas[:, None] * betas[None, :]
        uniq, inv = np.unique(eb, return_inverse=True)
        r_sc = rate_sc_closed(ctx.with_(beta_r=betas))[None, :]
        r_c = rate_c_closed(ctx.with_(eta=uniq, beta_r=1.0))[inv.reshape(eb.shape)]
        eta = etas[:, None]
        rates = eta * r_sc + (1 - eta) * r_c
    else:
        a_x, a_y = variance_scales(ctx)
        rates = rate_hat_terms(c1_constant(ctx), ctx.sigma2_varphi, ctx.sigma2_phi, a_x, a_y,
                               etas[:, None], betas[None, :])
    return etas, betas, np.broadcast_to(rates, (len(etas), len(betas)))


def sc_phase_needed(sigma2_varphi, sigma2_phi, a_varphi, a_phi):
    """Whether sensing time pays off: s2_phi/A_phi + s2_varphi/A_varphi > 2.

    Returns ``(needed, lhs)``. The boundary lhs == 2 counts as not needed.
    """
    if a_varphi <= 0 or a_phi <= 0:
        raise ValueError("variance scales must be positive")
    lhs = sigma2_phi / a_phi + sigma2_varphi / a_varphi
    return bool(lhs > 2), float(lhs)


def optimize_slot(ctx, spec=SearchSpec()):
    etas, betas, rates = objective_grid(ctx, spec)
    i, j = grid_argmax(rates)
    a_x, a_y = variance_scales(ctx)
    needed, lhs = sc_phase_needed(ctx.sigma2_varphi, ctx.sigma2_phi, a_x, a_y)
    return SlotDecision(float(etas[i]), float(betas[j]), float(rates[i, j]), lhs, needed)


def optimize_p2(c1, s2x, s2y, a_x, a_y, spec=SearchSpec(objective=APPROX_P2)):
    """Grid optimum of the simplified rate for explicit constants."""
    etas = unit_grid(spec.eta_step)
    betas = unit_grid(spec.beta_step)
    rates = rate_hat_terms(c1, s2x, s2y, a_x, a_y, etas[:, None], betas[None, :])
    i, j = grid_argmax(rates)
    needed, lhs = sc_phase_needed(s2x, s2y, a_x, a_y)
    return SlotDecision(float(etas[i]), float(betas[j]), float(rates[i, j]), lhs, needed)


@dataclass(frozen=True)
class DerivativeDiagnostics:
    betas: np.ndarray
    g: np.ndarray
    g_prime_at_0: float


def g_function(beta_r, c1, s2x, s2y, a_x, a_y):
    """d(rate_hat)/d(eta) at eta = 0, as a function of beta_R."""
    d1 = c1 * np.sqrt(s2x * s2y / (a_x * a_y))
    d2 = a_x / s2x
    d3 = a_y / s2y
    root = np.sqrt(d2 * d3)
    beta_r = np.asarray(beta_r, dtype=float)
    return (np.log2(1 + c1 * (1 - beta_r)) - np.log2(1 + d1 * root)
            + d1 * (d2 + d3) * beta_r / (2 * root * (1 + d1 * root) * np.log(2)))


def g_prime_at_zero(c1, s2x, s2y, a_x, a_y):
    d1 = c1 * np.sqrt(s2x * s2y / (a_x * a_y))
    d2 = a_x / s2x
    d3 = a_y / s2y
    root = np.sqrt(d2 * d3)
    return float((-c1 / (1 + c1) + d1 * (d2 + d3) / (2 * root * (1 + d1 * root))) / np.log(2))


def derivative_diagnostics(c1, s2x, s2y, a_x, a_y, betas=None):
    betas = unit_grid(0.01) if betas is None else np.asarray(betas, dtype=float)
    return DerivativeDiagnostics(betas, g_function(betas, c1, s2x, s2y, a_x, a_y),
                                 g_prime_at_zero(c1, s2x, s2y, a_x, a_y))


def derivative_diagnostics_ctx(ctx, betas=None):
    a_x, a_y = variance_scales(ctx)
    return derivative_diagnostics(c1_constant(ctx), ctx.sigma2_varphi, ctx.sigma2_phi, a_x, a_y, betas)


def condition_map(ctx, ratios_x, ratios_y, spec=SearchSpec(objective=APPROX_P2)):
    """Sensing-phase condition vs grid optimizer over prescribed variance ratios.

    Each cell fixes sigma2/A along both axes, keeps the context's C1 and
    prior variances, and reports ``(ratio_x, ratio_y, lhs, needed, eta_star)``.
    """
    c1 = float(c1_constant(ctx))
    s2x, s2y = ctx.sigma2_varphi, ctx.sigma2_phi
    rows = []
    for rx in ratios_x:
        for ry in ratios_y:
            dec = optimize_p2(c1, s2x, s2y, s2x / rx, s2y / ry, spec)
            rows.append((float(rx), float(ry), dec.condition_value, dec.needed, dec.eta_star))
    return rows
