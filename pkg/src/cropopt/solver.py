"""Input-schedule optimization for one growth cycle.

Two problems are solved over the smoothed crop model:

* fixed final time — minimize the cycle cost ``J = sum l(u_i) - V(x_N)``
  over the daily inputs, subject to per-input box bounds and the maturity
  equality ``g(x_N) = f_solar(x_N) - 0.005 = 0``;
* free final time — additionally treat the sampling time as a decision
  variable in [0.5, 1.5] and minimize the annualized cost ``J_t``; the
  horizon loop ``N <- floor(T* N)`` then turns the continuous sampling
  time back into whole days until ``|T - 1| < delta``.

The single equality is handled by an augmented-Lagrangian outer loop; the
bound-constrained inner subproblems go to scipy's L-BFGS-B with the exact
gradients from :mod:`cropopt.diff`.  Everything is deterministic: the
inner solver always starts from the same constant mid-range schedule.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .costs import (CostWeights, annualized_functional, cost_functional,
                    stage_cost, terminal_value)
from .diff import (DiffContext, RolloutSensitivities, evaluate_functional,
                   unpack_decision)
from .model import (EnvConstants, MATURITY_THRESHOLD, SimState, Trajectory,
                    Variant, initial_state, rollout)
from .params import CropParams

__all__ = ["Bounds", "OcpConfig", "SolveReport", "solve_fixed", "solve_free",
           "algorithm1", "total_cost", "annualized_cost"]


@dataclass(frozen=True)
class Bounds:
    """Box bounds per input channel plus the sampling-time interval."""

    temp: tuple[float, float] = (0.0, 35.0)
    drought: tuple[float, float] = (0.0, 1.0)
    radiation: tuple[float, float] = (0.0, 35.0)
    sampling_time: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        for name in ("temp", "drought", "radiation", "sampling_time"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"bounds for {name}: lower {lo} > upper {hi}")

    def lower(self, n_days: int, with_t: bool) -> np.ndarray:
        lo = np.tile([self.temp[0], self.drought[0], self.radiation[0]], n_days)
        return np.append(lo, self.sampling_time[0]) if with_t else lo

    def upper(self, n_days: int, with_t: bool) -> np.ndarray:
        hi = np.tile([self.temp[1], self.drought[1], self.radiation[1]], n_days)
        return np.append(hi, self.sampling_time[1]) if with_t else hi

    def contains(self, u: np.ndarray, atol: float = 0.0) -> bool:
        lo = self.lower(len(u), False).reshape(-1, 3)
        hi = self.upper(len(u), False).reshape(-1, 3)
        return bool(np.all(u >= lo - atol) and np.all(u <= hi + atol))


@dataclass(frozen=True)
class OcpConfig:
    """Everything a solve needs; shipped defaults follow the Batten study."""

    params: CropParams
    weights: CostWeights = CostWeights()
    env: EnvConstants = EnvConstants()
    n_days: int = 102
    x_init: SimState | None = None          # None -> germination-day state
    bounds: Bounds = Bounds()
    tol_constraint: float = 1e-4            # on |g(x_N)|, f_solar units
    tol_grad_rel: float = 1e-6              # projected gradient vs initial
    max_inner_iter: int = 5000
    max_al_iter: int = 30
    delta: float = 0.01                     # horizon-loop threshold on |T-1|
    n0: int = 50                            # initial horizon for algorithm1
    max_horizon_iter: int = 50
    stage_cost_form: str = "physical"       # or "quadratic"
    init_input: tuple[float, float, float] = (17.5, 0.5, 17.5)
    multistart: bool = True                 # also try phase-shaped schedules
    record_inner_trace: bool = False

    def __post_init__(self):
        if self.n_days < 1:
            raise ValueError("n_days must be >= 1")
        if self.delta <= 0.0:
            raise ValueError("delta must be > 0")
        if self.tol_constraint <= 0.0 or self.tol_grad_rel <= 0.0:
            raise ValueError("tolerances must be > 0")
        if self.env.epsilon <= 0.0:
            raise ValueError("the solver needs the smoothed model "
                             "(env.epsilon > 0)")

    def start_state(self) -> SimState:
        return self.x_init if self.x_init is not None else initial_state(self.params)


@dataclass
class SolveReport:
    """Optimized schedule plus everything needed to audit the solve."""

    inputs: np.ndarray                 # (N, 3) optimal daily inputs
    t_s: float                         # sampling time (1.0 for fixed-time)
    free_final_time: bool
    n_days: int
    trajectory: Trajectory
    objective: float                   # J or J_t in the configured form
    stage_cost_total: float            # physical-form sum, EUR per cycle
    terminal_value: float              # EUR per cycle
    constraint_residual: float         # g(x_N), f_solar units
    converged: bool
    al_iterations: int
    inner_iterations: int
    projected_grad_norm: float
    projected_grad_initial: float
    multiplier: float
    maturity_decreasing: bool          # post-hoc check of the falling clause
    message: str = ""
    horizon_iterations: int | None = None
    horizon_converged: bool | None = None
    inner_objective_traces: list[np.ndarray] = field(default_factory=list)

    @property
    def profit(self) -> float:
        """Per-cycle profit V - sum l (physical stage cost)."""
        return self.terminal_value - self.stage_cost_total

    @property
    def yield_mass(self) -> float:
        return self.trajectory.final_state.biomass  # kg/m2, before HI


def total_cost(inputs: np.ndarray, x_init: SimState, cfg: OcpConfig) -> float:
    """Cycle cost J = sum l(u_i) - V(x_N) over the smoothed rollout."""
    inputs = np.asarray(inputs, dtype=float).reshape(-1, 3)
    if len(inputs) < 1:
        raise ValueError("total_cost needs at least one day of inputs")
    traj = rollout(x_init, inputs, Variant.SC, cfg.env, cfg.params)
    stage = stage_cost(inputs, cfg.weights) if cfg.stage_cost_form == "physical" \
        else _quad_stage(inputs, cfg.weights)
    return float(np.sum(stage)
                 - terminal_value(traj.states[-1], cfg.weights, cfg.params))


def annualized_cost(inputs: np.ndarray, t_s: float, x_init: SimState,
                    cfg: OcpConfig) -> float:
    """Annualized cost J_t = (365/N) sum l - (365/(N t)) V over SCS."""
    lo, hi = cfg.bounds.sampling_time
    if not lo <= t_s <= hi:
        raise ValueError(f"sampling time {t_s} outside bounds [{lo}, {hi}]")
    inputs = np.asarray(inputs, dtype=float).reshape(-1, 3)
    n = len(inputs)
    traj = rollout(x_init, inputs, Variant.SCS, cfg.env, cfg.params, t_s=t_s)
    stage = stage_cost(inputs, cfg.weights) if cfg.stage_cost_form == "physical" \
        else _quad_stage(inputs, cfg.weights)
    v = terminal_value(traj.states[-1], cfg.weights, cfg.params)
    return float(365.0 / n * np.sum(stage) - 365.0 / (n * t_s) * v)


def _quad_stage(u, w):
    from .costs import stage_cost_quadratic

    return stage_cost_quadratic(u, w)


# ---------------------------------------------------------------------------
# augmented-Lagrangian core
# ---------------------------------------------------------------------------

def _maturity_age_target(params: CropParams, eps: float) -> float:
    """Thermal age tau + i50b at which the smoothed f_solar hits 0.005.

    Inverts the senescence logistic (the active branch at end of life;
    the growth branch is saturated by then), including the smooth-min
    correction at eps > 0.  Used only to condition the solver's equality:
    reported residuals stay in f_solar units.
    """
    f_max = params.f_solar_max
    s_star = MATURITY_THRESHOLD + 0.25 * eps / (f_max - MATURITY_THRESHOLD)
    return params.t_sum + 100.0 * np.log(f_max / s_star - 1.0)


def _initial_schedules(cfg: OcpConfig, n_days: int) -> list[np.ndarray]:
    """Deterministic starting schedules for the inner solver.

    The constant mid-range schedule alone tends to land in inferior local
    optima (the maturity equality is strongly nonconvex in the schedule),
    so two phase-shaped starts derived from the crop constants and bounds
    are tried as well: germinate hot, grow at the optimal temperature,
    and optionally ripen dry.  The best feasible solve wins.
    """
    starts = [np.tile(np.asarray(cfg.init_input, dtype=float), (n_days, 1))]
    if cfg.multistart:
        b = cfg.bounds
        germ = np.array([b.temp[1], 0.05, b.radiation[0]])
        grow = np.array([min(cfg.params.t_opt, b.temp[1]), b.drought[0],
                         b.radiation[1]])
        ripen = np.array([b.temp[1], b.drought[1], b.radiation[0]])
        n_germ = min(max(int(round(0.12 * n_days)), 1), n_days)
        phased = np.tile(grow, (n_days, 1))
        phased[:n_germ] = germ
        starts.append(phased)
        n_ripen = min(max(int(round(0.10 * n_days)), 1), n_days - n_germ)
        with_ripen = phased.copy()
        if n_ripen > 0:
            with_ripen[n_days - n_ripen:] = ripen
        starts.append(with_ripen)
    return starts


def _solve_nlp_from(cfg: OcpConfig, n_days: int, free_t: bool,
                    u0: np.ndarray) -> SolveReport:
    ctx = DiffContext(cfg.params, cfg.env, cfg.start_state())
    if free_t:
        fn = annualized_functional(cfg.weights, cfg.params, cfg.stage_cost_form)
    else:
        fn = cost_functional(cfg.weights, cfg.params, cfg.stage_cost_form)

    lb = cfg.bounds.lower(n_days, free_t)
    ub = cfg.bounds.upper(n_days, free_t)
    span = ub - lb
    span = np.where(span > 0.0, span, 1.0)   # pinned entries stay put
    dim = len(lb)
    age_target = _maturity_age_target(cfg.params, cfg.env.epsilon)

    z0 = np.append(u0.reshape(-1), 1.0) if free_t else u0.reshape(-1)
    zs0 = np.clip((z0 - lb) / span, 0.0, 1.0)

    lam = 0.0
    mu = 1.0
    traces: list[np.ndarray] = []

    def eval_al(zs, lam, mu):
        """AL value/gradient; equality in thermal-age units (O(1) scale)."""
        z = lb + zs * span
        u, t_s = unpack_decision(z) if free_t else (z.reshape(-1, 3), None)
        sens = RolloutSensitivities(u, 1.0 if t_s is None else t_s, ctx)
        val, grad = evaluate_functional(fn, sens, free_t)
        h = (sens.thermal_age - age_target) / 100.0
        dh = sens.grad_terminal(sens.dage_dxn, free_t) / 100.0
        val += lam * h + 0.5 * mu * h * h
        grad = (grad + (lam + mu * h) * dh) * span
        return val, grad, h, sens

    def pg_norm(zs, grad):
        return float(np.max(np.abs(zs - np.clip(zs - grad, 0.0, 1.0))))

    v0, g0, _, _ = eval_al(zs0, lam, mu)
    pg0 = pg_norm(zs0, g0)
    pg_target = cfg.tol_grad_rel * max(pg0, 1e-12)

    zs = zs0
    h_prev = np.inf
    total_inner = 0
    status_msg = ""
    pg_final = np.inf
    sens = None
    al_count = 0
    for al_count in range(1, cfg.max_al_iter + 1):
        trace: list[float] = []

        def fun(z, _lam=lam, _mu=mu):
            v, g, _, _ = eval_al(z, _lam, _mu)
            return v, g

        callback = None
        if cfg.record_inner_trace:
            def callback(zk, _lam=lam, _mu=mu):
                trace.append(eval_al(zk, _lam, _mu)[0])

        res = minimize(fun, zs, jac=True, method="L-BFGS-B",
                       bounds=[(0.0, 1.0)] * dim, callback=callback,
                       options={"maxiter": cfg.max_inner_iter,
                                "maxfun": 4 * cfg.max_inner_iter,
                                "ftol": 1e-16, "gtol": pg_target,
                                "maxcor": 25, "maxls": 60})
        zs = res.x
        total_inner += res.nit
        if cfg.record_inner_trace:
            traces.append(np.array(trace))
        val, grad, h, sens = eval_al(zs, lam, mu)
        pg_final = pg_norm(zs, grad)
        status_msg = str(res.message)

        if abs(sens.constraint) <= cfg.tol_constraint and pg_final <= pg_target:
            break
        lam += mu * h
        if abs(h) > 0.25 * h_prev:
            mu = min(mu * 10.0, 1e10)
        h_prev = abs(h)

    z = lb + zs * span
    u_opt, t_opt = unpack_decision(z) if free_t else (z.reshape(-1, 3), None)
    t_s = 1.0 if t_opt is None else t_opt
    variant = Variant.SCS if free_t else Variant.SC
    traj = rollout(cfg.start_state(), u_opt, variant, cfg.env, cfg.params,
                   t_s=t_s)
    obj, _ = evaluate_functional(fn, sens, free_t)
    g_raw = sens.constraint
    converged = bool(abs(g_raw) <= cfg.tol_constraint
                     and pg_final <= pg_target)
    fs = traj.f_solar_series
    decreasing = bool(fs[-1] < fs[-2]) if len(fs) > 1 else False

    return SolveReport(
        inputs=u_opt, t_s=float(t_s), free_final_time=free_t, n_days=n_days,
        trajectory=traj, objective=float(obj),
        stage_cost_total=float(np.sum(stage_cost(u_opt, cfg.weights))),
        terminal_value=terminal_value(traj.states[-1], cfg.weights, cfg.params),
        constraint_residual=float(g_raw), converged=converged,
        al_iterations=al_count, inner_iterations=total_inner,
        projected_grad_norm=pg_final, projected_grad_initial=pg0,
        multiplier=float(lam), maturity_decreasing=decreasing,
        message=status_msg, inner_objective_traces=traces)


def _solve_nlp(cfg: OcpConfig, n_days: int, free_t: bool) -> SolveReport:
    """Run the AL solve from each deterministic start; keep the best.

    Converged solves outrank non-converged ones; ties break on the lower
    objective, then on the smaller residual.  Order of starts is fixed,
    so the outcome is reproducible.  The free-final-time problem is
    additionally warm-started from the fixed-time solution at the same
    horizon, which anchors the sampling time against drifting into
    inferior basins of the very flat annualized landscape.
    """
    starts = _initial_schedules(cfg, n_days)
    if free_t and cfg.multistart:
        starts = [_solve_nlp(cfg, n_days, free_t=False).inputs] + starts
    best = None
    best_key = None
    for u0 in starts:
        rep = _solve_nlp_from(cfg, n_days, free_t, u0)
        key = (not rep.converged,
               max(abs(rep.constraint_residual) - cfg.tol_constraint, 0.0),
               rep.objective)
        if best is None or key < best_key:
            best, best_key = rep, key
    return best


def solve_fixed(cfg: OcpConfig) -> SolveReport:
    """Solve the fixed-final-time problem at cfg.n_days.

    Non-convergence is reported on the best iterate, never raised.
    """
    return _solve_nlp(cfg, cfg.n_days, free_t=False)


def solve_free(cfg: OcpConfig) -> SolveReport:
    """Solve the free-final-time problem (decision includes sampling time)."""
    return _solve_nlp(cfg, cfg.n_days, free_t=True)


def algorithm1(cfg: OcpConfig) -> tuple[int, SolveReport]:
    """Iterate the free-final-time solve, flooring the horizon each round.

    Repeats ``solve_free`` at the current horizon, stops once the optimal
    sampling time is within delta of 1, otherwise continues at
    ``N <- floor(T* N)``.  A 2-cycle of adjacent horizons (possible from
    the floor) is broken by the lower annualized cost.  Returns the final
    horizon in whole days together with its report.
    """
    n = int(cfg.n0)
    if n < 1:
        raise ValueError("n0 must be >= 1")
    history: dict[int, SolveReport] = {}
    report = None
    for it in range(1, cfg.max_horizon_iter + 1):
        report = solve_free(dataclasses.replace(cfg, n_days=n))
        history[n] = report
        if abs(report.t_s - 1.0) < cfg.delta:
            report.horizon_iterations = it
            report.horizon_converged = True
            return n, report
        n_next = max(int(np.floor(report.t_s * n)), 1)
        if n_next == n:
            # floor cannot move the horizon although T is not yet close to 1
            report.horizon_iterations = it
            report.horizon_converged = False
            return n, report
        if n_next in history:
            # adjacent-horizon cycle: keep the cheaper annualized objective
            other = history[n_next]
            best_n, best = min(((n, report), (n_next, other)),
                               key=lambda kv: kv[1].objective)
            best.horizon_iterations = it
            best.horizon_converged = True
            return best_n, best
        n = n_next
    report.horizon_iterations = cfg.max_horizon_iter
    report.horizon_converged = False
    return n, report
