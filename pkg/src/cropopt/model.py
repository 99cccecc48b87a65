"""Discrete-time crop growth dynamics and trajectory rollouts.

Three variants of the same daily state-space model are provided:

* exact (non-smooth): ``step_s`` / ``Variant.S`` — max/min clamps are exact;
* smoothed: ``step_sc`` / ``Variant.SC`` — every clamp is replaced by the
  smooth max/min at ``env.epsilon``, making the map differentiable;
* variable sampling time: ``step_scs`` / ``Variant.SCS`` — the smoothed
  increment is scaled by a sampling time ``t_s`` (Euler-style), so cycle
  length can be treated as a continuous quantity.

State is (biomass, cumulative thermal time, leaf-senescence threshold);
daily input is (mean temperature, drought index, artificial radiation).
All operations are pure; arrays are accepted wherever scalars are.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .params import CropParams
from .smoothing import clamp01, smooth_max, smooth_min

__all__ = [
    "EnvConstants", "SimState", "DailyInput", "Trajectory", "Variant",
    "f_solar", "stress_factors", "step_s", "step_sc", "step_scs",
    "rollout", "is_mature", "yield_mass", "MATURITY_THRESHOLD",
    "load_input_schedule", "packaged_input_schedule",
]

# f_solar level at/below which (while decreasing) the crop counts as mature
MATURITY_THRESHOLD = 0.005

# grams -> kg for the biomass rate (radiation in MJ/m2/d, rue in g/MJ)
_G_TO_KG = 1e-3


class Variant(str, Enum):
    """Model variant selector for rollouts."""

    S = "S"        # exact max/min, t_s = 1
    SC = "SC"      # smoothed, t_s = 1
    SCS = "SCS"    # smoothed, scaled by sampling time


@dataclass(frozen=True)
class EnvConstants:
    """Environment constants held fixed over a growth cycle."""

    co2: float = 700.0      # ppm
    epsilon: float = 1e-4   # smooth-operator constant; 0 = exact model

    def __post_init__(self):
        if self.co2 <= 0.0:
            raise ValueError(f"co2 must be > 0, got {self.co2}")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class SimState:
    """Crop state on one day."""

    biomass: float       # kg/m2
    thermal_time: float  # deg C * d
    i50b: float          # deg C * d

    def as_array(self) -> np.ndarray:
        return np.array([self.biomass, self.thermal_time, self.i50b])

    @staticmethod
    def from_array(x) -> "SimState":
        return SimState(float(x[0]), float(x[1]), float(x[2]))


@dataclass(frozen=True)
class DailyInput:
    """Controlled inputs for one day."""

    temp: float       # deg C
    drought: float    # 1 = fully dry, 0 = fully watered
    radiation: float  # MJ/(m2*d)

    def as_array(self) -> np.ndarray:
        return np.array([self.temp, self.drought, self.radiation])


def initial_state(params: CropParams) -> SimState:
    """Germination-day state: zero biomass and thermal time."""
    return SimState(0.0, 0.0, params.i50b_init)


# ---------------------------------------------------------------------------
# stage functions (vectorized over days)
# ---------------------------------------------------------------------------

def f_co2_factor(co2: float, params: CropParams) -> float:
    """CO2 growth factor: linear in [350, 700] ppm, saturated above.

    co2 is an environment constant, so the saturation clamp stays exact
    even in the smoothed variants (no gradient flows through it).
    """
    return 1.0 + params.s_co2 * (min(co2, 700.0) - 350.0)


def stress_factors(inp: DailyInput, env: EnvConstants, params: CropParams):
    """(f_temp, f_heat, f_co2, f_water) for one day.

    At env.epsilon = 0 the factors use exact clamps (the non-smooth model);
    for epsilon > 0 every clamp is the smoothed max(0, min(1, ramp)).
    """
    ft, fh, fw = _stress_arrays(inp.temp, inp.drought, env.epsilon, params)
    return float(ft), float(fh), f_co2_factor(env.co2, params), float(fw)


def _stress_arrays(temp, drought, eps, params: CropParams):
    ft = clamp01((np.asarray(temp) - params.t_base)
                 / (params.t_opt - params.t_base), eps)
    fh = clamp01(1.0 - (np.asarray(temp) - params.t_heat)
                 / (params.t_extreme - params.t_heat), eps)
    fw = clamp01(1.0 - params.s_water * np.asarray(drought), eps)
    return ft, fh, fw


def _f_solar_arrays(thermal_time, i50b, eps, params: CropParams):
    tau = np.asarray(thermal_time)
    growth = params.f_solar_max / (1.0 + np.exp(-0.01 * (tau - params.i50a)))
    senesc = params.f_solar_max / (1.0 + np.exp(
        0.01 * (tau - (params.t_sum - np.asarray(i50b)))))
    return smooth_min(growth, senesc, eps)


def f_solar(state: SimState, params: CropParams, eps: float) -> float:
    """Fraction of radiation intercepted by the canopy, in (0, f_solar_max]."""
    return float(_f_solar_arrays(state.thermal_time, state.i50b, eps, params))


def _increments(temp, drought, radiation, thermal_time, i50b, eps,
                params: CropParams, co2: float):
    """Daily state increments (d_biomass, d_tau, d_i50b) plus f_solar.

    Vectorized over days.  The i50b increment carries a max(0, .) guard:
    it keeps i50b monotone in the smoothed variant, where the clamped
    stress factors can slightly exceed 1.
    """
    ft, fh, fw = _stress_arrays(temp, drought, eps, params)
    fs = _f_solar_arrays(thermal_time, i50b, eps, params)
    fco2 = f_co2_factor(co2, params)
    d_biomass = (np.asarray(radiation) * fs * params.rue * fco2 * ft
                 * smooth_min(fh, fw, eps) * _G_TO_KG)
    d_tau = smooth_max(np.asarray(temp) - params.t_base, 0.0, eps)
    d_i50b = smooth_max(0.0, params.i50_max_heat * (1.0 - fh)
                        + params.i50_max_water * (1.0 - fw), eps)
    return d_biomass, d_tau, d_i50b, fs


def _step_array(x, u, env: EnvConstants, params: CropParams, t_s: float,
                eps: float):
    dm, dtau, di, _ = _increments(u[0], u[1], u[2], x[1], x[2], eps,
                                  params, env.co2)
    return x + t_s * np.array([dm, dtau, di])


def step_s(state: SimState, inp: DailyInput, env: EnvConstants,
           params: CropParams) -> SimState:
    """One day of the exact (non-smooth) model."""
    x = _step_array(state.as_array(), inp.as_array(), env, params, 1.0, 0.0)
    return SimState.from_array(x)


def step_sc(state: SimState, inp: DailyInput, env: EnvConstants,
            params: CropParams) -> SimState:
    """One day of the smoothed model at env.epsilon (= step_s at epsilon 0)."""
    x = _step_array(state.as_array(), inp.as_array(), env, params, 1.0,
                    env.epsilon)
    return SimState.from_array(x)


def step_scs(state: SimState, inp: DailyInput, env: EnvConstants,
             params: CropParams, t_s: float) -> SimState:
    """One smoothed step scaled by the sampling time t_s (>= 0)."""
    if t_s < 0.0:
        raise ValueError(f"sampling time must be >= 0, got {t_s}")
    x = _step_array(state.as_array(), inp.as_array(), env, params, t_s,
                    env.epsilon)
    return SimState.from_array(x)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """A rollout: states (N+1, 3), inputs (N, 3), f_solar per day (N+1,)."""

    states: np.ndarray
    inputs: np.ndarray
    f_solar_series: np.ndarray
    variant: Variant
    t_s: float
    epsilon: float

    @property
    def n_days(self) -> int:
        return len(self.inputs)

    def state(self, day: int) -> SimState:
        return SimState.from_array(self.states[day])

    @property
    def final_state(self) -> SimState:
        return self.state(self.n_days)


def _as_input_array(inputs) -> np.ndarray:
    if isinstance(inputs, np.ndarray):
        arr = np.asarray(inputs, dtype=float)
    else:
        rows = [u.as_array() if isinstance(u, DailyInput) else np.asarray(u, dtype=float)
                for u in inputs]
        arr = np.array(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"inputs must have shape (N, 3), got {arr.shape}")
    return arr


def rollout(x_init: SimState, inputs, variant: Variant | str,
            env: EnvConstants, params: CropParams, t_s: float = 1.0
            ) -> Trajectory:
    """Apply the chosen step N times from x_init, recording f_solar per day.

    The thermal-time and senescence states do not depend on biomass, so the
    whole trajectory is computed with prefix sums rather than a Python loop.
    Non-finite inputs are rejected.
    """
    variant = Variant(variant)
    u = _as_input_array(inputs)
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite values in the input schedule")
    if variant is Variant.S:
        eps, t_s = 0.0, 1.0
    elif variant is Variant.SC:
        eps, t_s = env.epsilon, 1.0
    else:
        eps = env.epsilon
        if t_s < 0.0:
            raise ValueError(f"sampling time must be >= 0, got {t_s}")

    n = len(u)
    x0 = x_init.as_array()
    states = np.empty((n + 1, 3))
    states[0] = x0
    if n:
        temp, drought, rad = u[:, 0], u[:, 1], u[:, 2]
        # tau and i50b increments depend on inputs only -> prefix sums
        dtau = smooth_max(temp - params.t_base, 0.0, eps)
        ft, fh, fw = _stress_arrays(temp, drought, eps, params)
        di = smooth_max(0.0, params.i50_max_heat * (1.0 - fh)
                        + params.i50_max_water * (1.0 - fw), eps)
        states[1:, 1] = x0[1] + t_s * np.cumsum(dtau)
        states[1:, 2] = x0[2] + t_s * np.cumsum(di)
        # biomass rate needs same-day tau/i50b
        fs = _f_solar_arrays(states[:-1, 1], states[:-1, 2], eps, params)
        rate = (rad * fs * params.rue * f_co2_factor(env.co2, params)
                * ft * smooth_min(fh, fw, eps) * _G_TO_KG)
        states[1:, 0] = x0[0] + t_s * np.cumsum(rate)

    fs_series = _f_solar_arrays(states[:, 1], states[:, 2], eps, params)
    return Trajectory(states=states, inputs=u, f_solar_series=fs_series,
                      variant=variant, t_s=float(t_s), epsilon=float(eps))


def is_mature(traj: Trajectory, day: int, params: CropParams,
              tol: float = 0.0) -> bool:
    """Maturity test on day >= 1: f_solar at or below threshold and falling.

    The "decreasing" clause is the backward first difference, the only
    derivative a daily model has.
    """
    if day < 1:
        raise ValueError("maturity is defined from day 1 on")
    fs = traj.f_solar_series
    return bool(fs[day] <= MATURITY_THRESHOLD + tol and fs[day] < fs[day - 1])


def first_mature_day(traj: Trajectory, params: CropParams,
                     tol: float = 0.0) -> int | None:
    """Earliest mature day of a trajectory, or None."""
    fs = traj.f_solar_series
    hits = np.nonzero((fs[1:] <= MATURITY_THRESHOLD + tol)
                      & (fs[1:] < fs[:-1]))[0]
    return int(hits[0]) + 1 if len(hits) else None


def yield_mass(state: SimState, params: CropParams) -> float:
    """Marketable yield of a mature crop: harvest_index * biomass."""
    return params.harvest_index * state.biomass


# ---------------------------------------------------------------------------
# input schedules
# ---------------------------------------------------------------------------

def load_input_schedule(path: str | Path) -> np.ndarray:
    """Read a daily input schedule CSV (day, temp_c, drought, radiation_mj)."""
    arr = np.genfromtxt(path, delimiter=",", names=True)
    required = ("temp_c", "drought", "radiation_mj")
    names = arr.dtype.names or ()
    missing = [c for c in required if c not in names]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    out = np.column_stack([arr[c] for c in required])
    return np.atleast_2d(out)


def packaged_input_schedule(name: str = "batten_cycle_inputs") -> np.ndarray:
    """Load a reference input schedule shipped with the package."""
    from importlib import resources

    ref = resources.files("cropopt.data") / f"{name}.csv"
    with resources.as_file(ref) as p:
        return load_input_schedule(p)
