"""Crop growth models and optimal input scheduling for indoor farming."""

from .model import (DailyInput, EnvConstants, SimState, Trajectory, Variant,
                    f_solar, initial_state, is_mature, first_mature_day,
                    packaged_input_schedule, rollout, step_s, step_sc,
                    step_scs, stress_factors, yield_mass)
from .params import CropParams, ParamError, load_crop_file, packaged_crop
from .smoothing import smooth_max, smooth_min
from .costs import CostWeights, stage_cost, terminal_value
from .diff import DiffContext, GradientRecord, grad_scalar
from .solver import (Bounds, OcpConfig, SolveReport, algorithm1,
                     annualized_cost, solve_fixed, solve_free, total_cost)

__version__ = "0.1.0"
