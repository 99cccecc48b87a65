"""Stage and terminal cost construction for the input-scheduling problems.

The daily stage cost in physical form is

    c_theta * (temp - theta_0)**2 + c_d * (drought - 1)**2 + c_r * radiation

so a day at ambient temperature, dry soil, and lights off costs nothing.
The equivalent quadratic form ``u'Ru + r'u`` differs from it only by the
constant ``c_theta*theta_0**2 + c_d`` per day, which moves the optimum
nowhere.  The terminal value is the crop price of the harvestable yield.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diff import RolloutFunctional
from .params import CropParams

__all__ = ["CostWeights", "stage_cost", "stage_cost_quadratic",
           "stage_cost_offset", "terminal_value", "stage_terms",
           "terminal_term", "cost_functional", "annualized_functional"]


@dataclass(frozen=True)
class CostWeights:
    """Economic weights of the stage and terminal costs."""

    c_theta: float = 1.8e-6   # EUR per degC^2 per day (heating/cooling)
    c_d: float = 0.02         # EUR per day (full irrigation)
    c_r: float = 0.038        # EUR per MJ of plant-available radiation
    theta_0: float = 10.0     # ambient temperature, degC
    c_crop: float = 132.9     # EUR per kg of yield

    def __post_init__(self):
        bad = [k for k in ("c_theta", "c_d", "c_r", "c_crop")
               if getattr(self, k) < 0.0]
        if bad:
            raise ValueError(f"cost coefficients must be >= 0: {bad}")

    def r_matrix(self) -> np.ndarray:
        """Quadratic stage weight R = diag(c_theta, c_d, 0)."""
        return np.diag([self.c_theta, self.c_d, 0.0])

    def r_vector(self) -> np.ndarray:
        """Linear stage weight r = (-2 c_theta theta_0, -2 c_d, c_r)."""
        return np.array([-2.0 * self.c_theta * self.theta_0,
                         -2.0 * self.c_d, self.c_r])

    def q_vector(self, params: CropParams) -> np.ndarray:
        """Terminal weight q = (harvest_index * c_crop, 0, 0)."""
        return np.array([params.harvest_index * self.c_crop, 0.0, 0.0])


def stage_cost(u, w: CostWeights):
    """Physical-form daily cost of one input triple (or an (N, 3) batch)."""
    u = np.asarray(u, dtype=float)
    theta, drought, rad = u[..., 0], u[..., 1], u[..., 2]
    return (w.c_theta * (theta - w.theta_0) ** 2
            + w.c_d * (drought - 1.0) ** 2 + w.c_r * rad)


def stage_cost_offset(w: CostWeights) -> float:
    """Per-day constant separating the physical and quadratic forms."""
    return w.c_theta * w.theta_0 ** 2 + w.c_d


def stage_cost_quadratic(u, w: CostWeights):
    """Quadratic-form daily cost u'Ru + r'u (physical form minus offset)."""
    u = np.asarray(u, dtype=float)
    theta, drought, rad = u[..., 0], u[..., 1], u[..., 2]
    return (w.c_theta * theta ** 2 - 2.0 * w.c_theta * w.theta_0 * theta
            + w.c_d * drought ** 2 - 2.0 * w.c_d * drought + w.c_r * rad)


def _stage_grad(u, w: CostWeights) -> np.ndarray:
    # identical for both forms: they differ by a constant
    u = np.asarray(u, dtype=float)
    g = np.empty_like(u)
    g[..., 0] = 2.0 * w.c_theta * (u[..., 0] - w.theta_0)
    g[..., 1] = 2.0 * w.c_d * (u[..., 1] - 1.0)
    g[..., 2] = w.c_r
    return g


def terminal_value(x_n, w: CostWeights, params: CropParams) -> float:
    """Market value of the harvest: harvest_index * c_crop * biomass."""
    x_n = np.asarray(x_n, dtype=float)
    return float(params.harvest_index * w.c_crop * x_n[..., 0])


def stage_terms(w: CostWeights, form: str = "physical"):
    """Per-day (values, gradients) callable for the diff engine."""
    if form not in ("physical", "quadratic"):
        raise ValueError(f"unknown stage-cost form: {form!r}")
    cost = stage_cost if form == "physical" else stage_cost_quadratic

    def fn(u: np.ndarray):
        return cost(u, w), _stage_grad(u, w)

    return fn


def terminal_term(w: CostWeights, params: CropParams):
    """(value, gradient) callable of the terminal yield value."""
    q = w.q_vector(params)

    def fn(x_n: np.ndarray):
        return float(q @ x_n), q

    return fn


def cost_functional(w: CostWeights, params: CropParams,
                    form: str = "physical") -> RolloutFunctional:
    """Per-cycle objective J = sum of stage costs minus terminal value."""
    return RolloutFunctional(
        stage=stage_terms(w, form),
        terminal=terminal_term(w, params),
        terminal_scale=lambda n, t: -1.0,
    )


def annualized_functional(w: CostWeights, params: CropParams,
                          form: str = "physical") -> RolloutFunctional:
    """Annualized objective J_t = (365/N) sum l - (365/(N t)) V."""
    return RolloutFunctional(
        stage=stage_terms(w, form),
        terminal=terminal_term(w, params),
        stage_scale=lambda n, t: 365.0 / n,
        terminal_scale=lambda n, t: -365.0 / (n * t),
        terminal_scale_dt=lambda n, t: 365.0 / (n * t * t),
    )
