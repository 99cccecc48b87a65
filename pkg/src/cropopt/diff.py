"""Exact first derivatives of rollout functionals.

The decision vector is the flattened input schedule ``[u_0, ..., u_{N-1}]``
(length 3N, one (temp, drought, radiation) triple per day), optionally
extended by the sampling time as a final slot (length 3N + 1).

Derivatives are propagated forward in closed form through the model's
cascade structure: thermal time and senescence are prefix sums of the
inputs, and biomass is a prefix sum of a rate that depends on them but
never on itself.  The result is the analytic chain-rule gradient of any
``stage-sum + terminal`` functional, computed with O(N) vector work and
validated against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import EnvConstants, SimState, Variant, MATURITY_THRESHOLD, rollout
from .params import CropParams
from .smoothing import (clamp01, clamp01_grad, smooth_max, smooth_max_grad,
                        smooth_min, smooth_min_grad)

__all__ = ["DiffContext", "RolloutFunctional", "GradientRecord",
           "RolloutSensitivities", "grad_scalar", "evaluate_functional",
           "pack_decision", "unpack_decision", "maturity_residual"]


# ---------------------------------------------------------------------------
# decision-vector layout
# ---------------------------------------------------------------------------

def pack_decision(inputs: np.ndarray, t_s: float | None = None) -> np.ndarray:
    """Flatten an (N, 3) input schedule, appending t_s when given."""
    z = np.asarray(inputs, dtype=float).reshape(-1)
    if t_s is not None:
        z = np.append(z, float(t_s))
    return z


def unpack_decision(z: np.ndarray) -> tuple[np.ndarray, float | None]:
    """Inverse of pack_decision: (N, 3) schedule plus optional t_s."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ValueError("decision vector must be one-dimensional")
    if z.size % 3 == 0:
        return z.reshape(-1, 3), None
    if z.size % 3 == 1 and z.size > 1:
        return z[:-1].reshape(-1, 3), float(z[-1])
    raise ValueError(f"decision vector length {z.size} is not 3N or 3N+1")


@dataclass(frozen=True)
class DiffContext:
    """Model configuration a gradient is taken under."""

    params: CropParams
    env: EnvConstants
    x_init: SimState

    def __post_init__(self):
        if self.env.epsilon <= 0.0:
            raise ValueError(
                "derivatives need the smoothed model: epsilon must be > 0")


@dataclass(frozen=True)
class RolloutFunctional:
    """A scalar functional ``s(N,t)*sum_i l(u_i) + v(N,t)*phi(x_N)``.

    ``stage`` maps the (N, 3) schedule to per-day values and their (N, 3)
    gradients; ``terminal`` maps x_N to a value and its 3-gradient.  The
    scale callables receive (n_days, t_s); ``terminal_scale_dt`` is the
    t_s-derivative of the terminal scale (nonzero for annualized costs).
    """

    stage: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None
    terminal: Callable[[np.ndarray], tuple[float, np.ndarray]] | None = None
    stage_scale: Callable[[int, float], float] = field(
        default=lambda n, t: 1.0)
    terminal_scale: Callable[[int, float], float] = field(
        default=lambda n, t: 1.0)
    terminal_scale_dt: Callable[[int, float], float] = field(
        default=lambda n, t: 0.0)


@dataclass(frozen=True)
class GradientRecord:
    """Value and exact gradient of a functional plus the maturity residual."""

    value: float
    gradient: np.ndarray
    constraint: float
    constraint_gradient: np.ndarray


def maturity_residual(x_n: np.ndarray, params: CropParams, eps: float) -> float:
    """g(x_N): smoothed f_solar at the terminal state minus the threshold."""
    state = SimState.from_array(x_n)
    from .model import f_solar

    return f_solar(state, params, eps) - MATURITY_THRESHOLD


# ---------------------------------------------------------------------------
# forward sensitivity sweep
# ---------------------------------------------------------------------------

class RolloutSensitivities:
    """Trajectory plus the partials needed to assemble exact gradients."""

    def __init__(self, u: np.ndarray, t_s: float, ctx: DiffContext):
        p = ctx.params
        eps = ctx.env.epsilon
        if not np.all(np.isfinite(u)) or not np.isfinite(t_s):
            raise ValueError("non-finite decision vector")
        self.u = u
        self.t_s = float(t_s)
        self.ctx = ctx
        n = len(u)
        theta, drought, rad = u[:, 0], u[:, 1], u[:, 2]

        # stress factors and their input partials
        r_t = (theta - p.t_base) / (p.t_opt - p.t_base)
        r_h = 1.0 - (theta - p.t_heat) / (p.t_extreme - p.t_heat)
        r_w = 1.0 - p.s_water * drought
        ft, fh, fw = clamp01(r_t, eps), clamp01(r_h, eps), clamp01(r_w, eps)
        dft_dth = clamp01_grad(r_t, eps) / (p.t_opt - p.t_base)
        dfh_dth = -clamp01_grad(r_h, eps) / (p.t_extreme - p.t_heat)
        dfw_dD = -clamp01_grad(r_w, eps) * p.s_water

        # thermal-time and senescence increments (input-only)
        dtau = smooth_max(theta - p.t_base, 0.0, eps)
        ddtau_dth = smooth_max_grad(theta - p.t_base, 0.0, eps)[0]
        raw = p.i50_max_heat * (1.0 - fh) + p.i50_max_water * (1.0 - fw)
        di = smooth_max(0.0, raw, eps)
        dguard = smooth_max_grad(0.0, raw, eps)[1]
        ddi_dth = dguard * (-p.i50_max_heat) * dfh_dth
        ddi_dD = dguard * (-p.i50_max_water) * dfw_dD

        # prefix states
        x0 = ctx.x_init.as_array()
        tau = np.concatenate(([x0[1]], x0[1] + t_s * np.cumsum(dtau)))
        i50b = np.concatenate(([x0[2]], x0[2] + t_s * np.cumsum(di)))

        # f_solar on days 0..N and partials
        growth = p.f_solar_max / (1.0 + np.exp(-0.01 * (tau - p.i50a)))
        senesc = p.f_solar_max / (1.0 + np.exp(
            0.01 * (tau - (p.t_sum - i50b))))
        fs = smooth_min(growth, senesc, eps)
        dg_dtau = 0.01 * growth * (1.0 - growth / p.f_solar_max)
        ds_dtau = -0.01 * senesc * (1.0 - senesc / p.f_solar_max)
        wg, ws = smooth_min_grad(growth, senesc, eps)
        dfs_dtau = wg * dg_dtau + ws * ds_dtau
        dfs_di50b = ws * ds_dtau  # same logistic slope wrt i50b as wrt tau

        # biomass rate on days 0..N-1 and partials
        from .model import f_co2_factor, _G_TO_KG

        k = p.rue * f_co2_factor(ctx.env.co2, p) * _G_TO_KG
        fm = smooth_min(fh, fw, eps)
        dfm_dfh, dfm_dfw = smooth_min_grad(fh, fw, eps)
        fs_d, dfs_dtau_d, dfs_di_d = fs[:-1], dfs_dtau[:-1], dfs_di50b[:-1]
        rate = rad * fs_d * k * ft * fm
        drate_dtau = rad * k * ft * fm * dfs_dtau_d
        drate_di = rad * k * ft * fm * dfs_di_d
        drate_dth = rad * fs_d * k * (dft_dth * fm + ft * dfm_dfh * dfh_dth)
        drate_dD = rad * fs_d * k * ft * dfm_dfw * dfw_dD
        drate_dR = fs_d * k * ft * fm

        biomass = np.concatenate(([x0[0]], x0[0] + t_s * np.cumsum(rate)))
        self.states = np.column_stack([biomass, tau, i50b])
        self.f_solar_series = fs
        self.x_n = self.states[-1]

        # suffix sums over i > k
        def suffix(a):
            out = np.zeros(n)
            if n > 1:
                out[:-1] = np.cumsum(a[::-1])[::-1][1:]
            return out

        s_tau = suffix(drate_dtau)
        s_i = suffix(drate_di)

        # d x_N / d u_k, flattened (N, 3) per terminal component
        t2 = t_s * t_s
        self.dmn_du = np.column_stack([
            t_s * drate_dth + t2 * ddtau_dth * s_tau + t2 * ddi_dth * s_i,
            t_s * drate_dD + t2 * ddi_dD * s_i,
            t_s * drate_dR,
        ])
        self.dtaun_du = np.column_stack([
            t_s * ddtau_dth, np.zeros(n), np.zeros(n)])
        self.di50bn_du = np.column_stack([
            t_s * ddi_dth, t_s * ddi_dD, np.zeros(n)])

        # d x_N / d t_s
        self.dxn_dt = np.array([
            np.sum(rate) + np.sum(drate_dtau * (tau[:-1] - x0[1]))
            + np.sum(drate_di * (i50b[:-1] - x0[2])),
            np.sum(dtau),
            np.sum(di),
        ])

        # maturity residual and its terminal gradient
        self.constraint = float(fs[-1]) - MATURITY_THRESHOLD
        self.dg_dxn = np.array([0.0, dfs_dtau[-1], dfs_di50b[-1]])

        # thermal age tau + i50b, a well-conditioned maturity proxy
        self.thermal_age = float(tau[-1] + i50b[-1])
        self.dage_dxn = np.array([0.0, 1.0, 1.0])

    def grad_terminal(self, dphi_dxn: np.ndarray, with_t: bool
                      ) -> np.ndarray:
        """Gradient of phi(x_N) wrt the decision vector."""
        g_u = (dphi_dxn[0] * self.dmn_du + dphi_dxn[1] * self.dtaun_du
               + dphi_dxn[2] * self.di50bn_du).reshape(-1)
        if with_t:
            return np.append(g_u, dphi_dxn @ self.dxn_dt)
        return g_u


# ---------------------------------------------------------------------------
# public entry point
# ---------------------------------------------------------------------------

def evaluate_functional(fn: RolloutFunctional, sens: RolloutSensitivities,
                        with_t: bool) -> tuple[float, np.ndarray]:
    """Assemble value and gradient of ``fn`` from a sensitivity sweep."""
    n = len(sens.u)
    t_eff = sens.t_s
    size = 3 * n + 1 if with_t else 3 * n
    value = 0.0
    grad = np.zeros(size)
    if fn.stage is not None:
        vals, grads = fn.stage(sens.u)
        s = fn.stage_scale(n, t_eff)
        value += s * float(np.sum(vals))
        grad[:3 * n] += s * np.asarray(grads).reshape(-1)
    if fn.terminal is not None:
        phi, dphi = fn.terminal(sens.x_n)
        v = fn.terminal_scale(n, t_eff)
        value += v * phi
        grad += v * sens.grad_terminal(np.asarray(dphi), with_t)
        if with_t:
            grad[-1] += fn.terminal_scale_dt(n, t_eff) * phi
    return float(value), grad


def grad_scalar(fn: RolloutFunctional, z: np.ndarray, ctx: DiffContext
                ) -> GradientRecord:
    """Value and exact gradient of ``fn`` at decision vector ``z``.

    ``z`` of length 3N differentiates the smoothed fixed-sampling model;
    length 3N+1 additionally differentiates with respect to the sampling
    time in the final slot.  The non-smooth model (epsilon = 0) is
    rejected by :class:`DiffContext`.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite decision vector")
    u, t_s = unpack_decision(z)
    with_t = t_s is not None
    t_eff = 1.0 if t_s is None else t_s
    sens = RolloutSensitivities(u, t_eff, ctx)
    value, grad = evaluate_functional(fn, sens, with_t)
    g_grad = sens.grad_terminal(sens.dg_dxn, with_t)
    return GradientRecord(value=value, gradient=grad,
                          constraint=sens.constraint,
                          constraint_gradient=g_grad)
