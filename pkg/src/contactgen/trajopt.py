"""Demonstration-guided trajectory optimization.

A retargeted demonstration becomes a ReferenceTrack: object pose and robot
configuration as functions of time, held at the goal/last frame beyond the
recorded end. Receding-horizon planning then runs CEM over piecewise-linear
command knots inside a fixed window, scoring dense rollouts by how well the
object tracks the reference (robot posture and input effort are lightly
regularized), and executes a fraction of each plan before replanning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import KnotTrajectory, PhysicalParams, RolloutResult, rollout_vector
from .embodiments import Embodiment
from .geometry import wrap_angle


class PlannerFailureError(RuntimeError):
    """Every sample of a CEM iteration produced a non-finite rollout."""


# Cost assigned to samples whose rollout blows up; earlier failures rank worse.
BLOWUP_COST = 1e12


@dataclass(frozen=True)
class ReferenceTrack:
    """Time-indexed reference: object pose and robot configuration.

    Samples linearly interpolate the stored frames (angles along the shortest
    arc). Before the first frame the track holds it; past the end the object
    reference snaps to the goal pose and the robot holds its last frame, so a
    tracker that outlives the demonstration keeps pulling the object home.
    """

    times: np.ndarray  # (N,) strictly increasing, starts at 0
    robot_q: np.ndarray  # (N, dof)
    object_poses: np.ndarray  # (N, 3)
    goal_pose: np.ndarray  # (3,)
    object_side: float

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def sample(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(object_pose_ref, robot_q_ref) at time t."""
        times = self.times
        if t >= times[-1]:
            return self.goal_pose.copy(), self.robot_q[-1].copy()
        if t <= times[0]:
            return self.object_poses[0].copy(), self.robot_q[0].copy()
        j = int(np.searchsorted(times, t, side="right")) - 1
        frac = (t - times[j]) / (times[j + 1] - times[j])
        q = self.robot_q[j] + frac * (self.robot_q[j + 1] - self.robot_q[j])
        a, b = self.object_poses[j], self.object_poses[j + 1]
        obj = np.empty(3)
        obj[0] = a[0] + frac * (b[0] - a[0])
        obj[1] = a[1] + frac * (b[1] - a[1])
        obj[2] = wrap_angle(a[2] + frac * wrap_angle(b[2] - a[2]))
        return obj, q

    @classmethod
    def from_retargeted(cls, ret) -> "ReferenceTrack":
        return cls(
            times=ret.times,
            robot_q=ret.q,
            object_poses=ret.object_poses,
            goal_pose=np.asarray(ret.goal_pose, dtype=float),
            object_side=ret.object_side,
        )


@dataclass(frozen=True)
class CostWeights:
    object_tracking: float = 10.0
    robot_tracking: float = 0.01
    input_effort: float = 0.1
    terminal_scale: float = 10.0
    state_bound_penalty: float = 1e3

    @classmethod
    def for_embodiment(cls, embodiment: Embodiment) -> "CostWeights":
        # Joint-space commands of the arms are an order of magnitude more
        # aggressive per unit than finger positions; effort is priced up.
        if embodiment.kind == 1:
            return cls(input_effort=10.0)
        return cls()


def pose_error(pose, ref) -> float:
    """Squared pose distance: position plus wrapped angle."""
    dx = pose[0] - ref[0]
    dy = pose[1] - ref[1]
    dth = wrap_angle(pose[2] - ref[2])
    return dx * dx + dy * dy + dth * dth


def tracking_cost(
    result: RolloutResult,
    track: ReferenceTrack,
    t0: float,
    knot_times: np.ndarray,
    knots: np.ndarray,
    weights: CostWeights,
    embodiment: Embodiment,
    dt: float,
) -> float:
    """Score one rollout against the reference.

    Object and robot tracking errors are sampled at the knot times (the final
    knot scaled up as the terminal cost); input effort is charged per knot.
    Joint positions straying past their bounds draw a quadratic penalty
    (commands are clamped, but contact can still push joints out). Soft-velocity
    embodiments additionally integrate a quadratic penalty on joint speed
    beyond the limit over the dense trajectory.
    """
    states = result.states
    n_steps = states.shape[0] - 1
    total = 0.0
    last = len(knot_times) - 1
    for j, tau in enumerate(knot_times):
        idx = min(n_steps, int(round(tau / dt)))
        obj_ref, q_ref = track.sample(t0 + tau)
        s = states[idx]
        scale = weights.terminal_scale if j == last else 1.0
        total += scale * weights.object_tracking * pose_error(s[0:3], obj_ref)
        dq = s[6:10] - q_ref
        total += scale * weights.robot_tracking * float(dq @ dq)
        u = knots[j]
        total += weights.input_effort * float(u @ u)
        over = s[6:10] - embodiment.q_max
        under = embodiment.q_min - s[6:10]
        np.clip(over, 0.0, None, out=over)
        np.clip(under, 0.0, None, out=under)
        total += weights.state_bound_penalty * float(over @ over + under @ under)
    if embodiment.velocity_mode == "soft_penalty":
        v = states[:, 10:14]
        over = np.abs(v) - embodiment.velocity_limit
        np.clip(over, 0.0, None, out=over)
        total += embodiment.soft_velocity_weight * float(np.sum(over * over)) * dt
    return total


@dataclass(frozen=True)
class CemConfig:
    n_samples: int = 50
    n_elites: int = 5
    n_iters: int = 10
    sigma_init: float = 0.05
    n_knots: int = 6
    window: float = 1.25
    smoothing: float = 0.5
    sigma_floor: float = 1e-3

    def __post_init__(self):
        if not (0 < self.n_elites <= self.n_samples):
            raise ValueError("need 0 < n_elites <= n_samples")
        if self.n_knots < 2:
            raise ValueError("need at least two knots")
        if self.window <= 0 or self.sigma_init <= 0:
            raise ValueError("window and sigma_init must be positive")

    @property
    def knot_times(self) -> np.ndarray:
        return np.linspace(0.0, self.window, self.n_knots)

    @classmethod
    def for_embodiment(cls, embodiment) -> "CemConfig":
        """Planner budget tuned per embodiment.

        The arm scene needs more refinement iterations: toppling the large
        box at its low friction only works with coordinated two-arm
        maneuvers (one tip anchoring, the other pivoting), which the sampler
        rarely finds in 10 iterations.
        """
        if embodiment.kind == 1:
            return cls(n_iters=20)
        return cls()


@dataclass
class CemResult:
    knots: np.ndarray  # (n_knots, dof) best-ever command knots
    cost: float
    trace: list[float]  # best-ever cost after each iteration (non-increasing)
    n_rollouts: int


def _clamp_knots(knots: np.ndarray, embodiment: Embodiment, knot_dt: float) -> np.ndarray:
    """Bound-clip every knot; hard-rate embodiments also get consecutive
    knot-to-knot changes clipped to rate_limit * knot_dt."""
    out = np.clip(knots, embodiment.q_min, embodiment.q_max)
    if math.isfinite(embodiment.rate_limit):
        max_step = embodiment.rate_limit * knot_dt
        for j in range(1, out.shape[0]):
            step = np.clip(out[j] - out[j - 1], -max_step, max_step)
            out[j] = np.clip(out[j - 1] + step, embodiment.q_min, embodiment.q_max)
    return out


def cem_solve(
    state0: np.ndarray,
    track: ReferenceTrack,
    t0: float,
    params: PhysicalParams,
    embodiment: Embodiment,
    config: CemConfig,
    rng: np.random.Generator,
    *,
    weights: CostWeights | None = None,
    mean_init: np.ndarray | None = None,
    objective=None,
) -> CemResult:
    """Cross-entropy planning over command knots for one window.

    mean_init seeds the sampling distribution (reference robot configurations
    at the knot times when absent). objective replaces the rollout+tracking
    scorer and maps (knots,) -> cost; used by tests to drive the optimizer on
    analytically known landscapes.
    """
    if weights is None:
        weights = CostWeights.for_embodiment(embodiment)
    knot_times = config.knot_times
    knot_dt = knot_times[1] - knot_times[0]
    n_steps = int(round(config.window / params.sim_dt))
    dof = embodiment.dof

    if mean_init is None:
        mean = np.stack([track.sample(t0 + tau)[1] for tau in knot_times])
    else:
        mean = np.asarray(mean_init, dtype=float).reshape(config.n_knots, dof).copy()
    mean = _clamp_knots(mean, embodiment, knot_dt)
    sigma = np.full((config.n_knots, dof), config.sigma_init)

    def score(knots: np.ndarray) -> float:
        if objective is not None:
            return float(objective(knots))
        res = rollout_vector(state0, KnotTrajectory(knot_times, knots), n_steps, params, embodiment)
        if res.failed_at is not None:
            return BLOWUP_COST * (2.0 - res.failed_at / max(1, n_steps))
        return tracking_cost(res, track, t0, knot_times, knots, weights, embodiment, params.sim_dt)

    best_knots = mean.copy()
    best_cost = score(best_knots)
    n_rollouts = 1
    trace: list[float] = []
    for _ in range(config.n_iters):
        noise = rng.standard_normal((config.n_samples, config.n_knots, dof))
        costs = np.empty(config.n_samples)
        samples = np.empty_like(noise)
        for s in range(config.n_samples):
            cand = _clamp_knots(mean + sigma * noise[s], embodiment, knot_dt)
            samples[s] = cand
            costs[s] = score(cand)
            n_rollouts += 1
        if bool(np.all(costs >= BLOWUP_COST)):
            raise PlannerFailureError(
                f"all {config.n_samples} rollouts failed at t0={t0:.3f}"
            )
        order = np.argsort(costs, kind="stable")[: config.n_elites]
        elites = samples[order]
        elite_mean = elites.mean(axis=0)
        elite_std = elites.std(axis=0)
        a = config.smoothing
        mean = a * elite_mean + (1.0 - a) * mean
        sigma = np.maximum(a * elite_std + (1.0 - a) * sigma, config.sigma_floor)
        mean = _clamp_knots(mean, embodiment, knot_dt)
        if costs[order[0]] < best_cost:
            best_cost = float(costs[order[0]])
            best_knots = samples[order[0]].copy()
        trace.append(best_cost)
    return CemResult(knots=best_knots, cost=best_cost, trace=trace, n_rollouts=n_rollouts)


def success_window(
    states: np.ndarray,
    goal: np.ndarray,
    pos_tol: float,
    rot_tol: float,
    hold_steps: int,
) -> int | None:
    """First step index from which the object held within tolerance for
    hold_steps consecutive samples, or None."""
    run = 0
    for i in range(states.shape[0]):
        dx = states[i, 0] - goal[0]
        dy = states[i, 1] - goal[1]
        ok = math.hypot(dx, dy) <= pos_tol and abs(wrap_angle(states[i, 2] - goal[2])) <= rot_tol
        run = run + 1 if ok else 0
        if run >= hold_steps:
            return i - hold_steps + 1
    return None


@dataclass(frozen=True)
class SuccessSpec:
    pos_tol: float
    rot_tol: float = 0.2
    hold_time: float = 0.5

    @classmethod
    def for_embodiment(cls, embodiment: Embodiment) -> "SuccessSpec":
        return cls(pos_tol=0.10 if embodiment.kind == 1 else 0.03)


@dataclass
class TrackResult:
    """Dense closed-loop trajectory produced by the receding-horizon tracker."""

    states: np.ndarray  # (n+1, 14)
    cmds: np.ndarray  # (n, dof)
    success: bool
    success_time: float | None
    windows: list[CemResult]
    failure: str | None = None  # "timeout" | "planner" | None


def _sample_plan(knot_times: np.ndarray, knots: np.ndarray, t: float) -> np.ndarray:
    """Linear interpolation of plan knots at time t, held beyond the ends."""
    if t <= knot_times[0]:
        return knots[0].copy()
    if t >= knot_times[-1]:
        return knots[-1].copy()
    k = int(np.searchsorted(knot_times, t, side="right")) - 1
    frac = (t - knot_times[k]) / (knot_times[k + 1] - knot_times[k])
    return knots[k] + frac * (knots[k + 1] - knots[k])


def steps_per_tick(params: PhysicalParams, tick_hz: float) -> int:
    """Physics steps per control tick; the rates must divide exactly."""
    n = int(round(1.0 / (tick_hz * params.sim_dt)))
    if n < 1 or abs(n * params.sim_dt * tick_hz - 1.0) > 1e-9:
        raise ValueError("control rate must be an integer multiple of the physics rate")
    return n


def tick_rollout(
    initial: np.ndarray,
    tick_commands: np.ndarray,
    params: PhysicalParams,
    embodiment: Embodiment,
    tick_hz: float,
):
    """Dense rollout of control-tick commands: the stored-episode ground truth.

    Commands interpolate linearly between consecutive ticks and hold after the
    last one. Knot times are built with the same arithmetic the integrator uses
    for step times (float(j * spt) * dt), so the command applied at each tick
    boundary is bitwise equal to the corresponding input row.
    """
    spt = steps_per_tick(params, tick_hz)
    n_ticks = tick_commands.shape[0]
    times = np.arange(0, n_ticks * spt, spt, dtype=np.float64) * params.sim_dt
    knots = KnotTrajectory(times, tick_commands)
    return rollout_vector(initial, knots, n_ticks * spt, params, embodiment), spt


def mpc_track(
    state0: np.ndarray,
    track: ReferenceTrack,
    params: PhysicalParams,
    embodiment: Embodiment,
    config: CemConfig,
    rng: np.random.Generator,
    *,
    weights: CostWeights | None = None,
    success: SuccessSpec | None = None,
    execution_fraction: float = 0.5,
    timeout_factor: float = 2.0,
    tick_hz: float | None = None,
) -> TrackResult:
    """Track the reference with receding-horizon CEM.

    Each cycle plans a full window from the current state, executes the first
    execution_fraction of it, and warm-starts the next cycle with the elite
    mean shifted by the executed time. Stops as soon as the success hold is
    observed, or at timeout_factor times the reference duration.

    With tick_hz set, executed commands are resampled onto that control-tick
    grid and the trajectory is re-simulated from the initial state through
    tick_rollout after every window. The returned dense stream is then exactly
    the rollout of its own tick samples (cmds[::spt]), so episodes stored at
    tick rate replay bit-identically. Plan windows are still parameterized by
    the coarse CEM knots.
    """
    if success is None:
        success = SuccessSpec.for_embodiment(embodiment)
    dt = params.sim_dt
    quantum = 1 if tick_hz is None else steps_per_tick(params, tick_hz)
    exec_steps = max(1, int(round(execution_fraction * config.window / dt)))
    if quantum > 1:
        exec_steps = max(quantum, int(round(exec_steps / quantum)) * quantum)
    hold_steps = max(1, int(round(success.hold_time / dt)))
    horizon = timeout_factor * max(track.duration, config.window)
    max_steps = int(round(horizon / dt))
    if quantum > 1:
        max_steps = ((max_steps + quantum - 1) // quantum) * quantum

    states = np.empty((max_steps + 1, 14))
    cmds = np.empty((max_steps, embodiment.dof))
    states[0] = state0
    filled = 0
    windows: list[CemResult] = []
    warm: np.ndarray | None = None
    tick_rows: list[np.ndarray] = []  # global tick commands accumulated so far
    knot_times = config.knot_times
    failure: str | None = None
    hit_floor = 0  # skip hold windows already rejected by the tick-aligned check

    while filled < max_steps:
        t0 = filled * dt
        try:
            plan = cem_solve(
                states[filled],
                track,
                t0,
                params,
                embodiment,
                config,
                rng,
                weights=weights,
                mean_init=warm,
            )
        except PlannerFailureError:
            failure = "planner"
            break
        windows.append(plan)
        n_exec = min(exec_steps, max_steps - filled)
        if quantum > 1:
            # append this window's tick samples, then re-simulate the whole
            # episode so far; the prefix repeats bitwise, and the final call's
            # output is exactly what a replay from stored ticks recomputes
            tick_dt = quantum * dt
            tick_rows.extend(_sample_plan(knot_times, plan.knots, j * tick_dt) for j in range(n_exec // quantum))
            res, _ = tick_rollout(state0, np.asarray(tick_rows), params, embodiment, tick_hz)
            total = filled + n_exec
            if res.failed_at is not None:
                n_ok = res.failed_at
                states[: n_ok + 1] = res.states[: n_ok + 1]
                cmds[:n_ok] = res.commands[:n_ok]
                filled = n_ok
                failure = "planner"
                break
            states[: total + 1] = res.states
            cmds[:total] = res.commands
            filled = total
        else:
            res = rollout_vector(
                states[filled],
                KnotTrajectory(knot_times, plan.knots),
                n_exec,
                params,
                embodiment,
            )
            if res.failed_at is not None:
                n_ok = res.failed_at
                states[filled + 1 : filled + 1 + n_ok] = res.states[1 : 1 + n_ok]
                cmds[filled : filled + n_ok] = res.commands[:n_ok]
                filled += n_ok
                failure = "planner"
                break
            states[filled + 1 : filled + 1 + n_exec] = res.states[1:]
            cmds[filled : filled + n_exec] = res.commands
            filled += n_exec

        rel = success_window(
            states[hit_floor : filled + 1], track.goal_pose, success.pos_tol, success.rot_tol, hold_steps
        )
        if rel is not None:
            hit = hit_floor + rel
            end = hit + hold_steps - 1
            if quantum == 1:
                return TrackResult(
                    states=states[: end + 1].copy(),
                    cmds=cmds[:end].copy(),
                    success=True,
                    success_time=hit * dt,
                    windows=windows,
                )
            # truncate on a tick boundary and re-simulate; the last tick is then
            # held rather than interpolated, which can break a marginal hold, so
            # accept only if the trailing window still passes
            end = min(((end + quantum - 1) // quantum) * quantum, filled)
            res2, _ = tick_rollout(
                state0, np.asarray(tick_rows[: end // quantum]), params, embodiment, tick_hz
            )
            # trailing window of hold_steps + 1 states, matching the stored-
            # episode success judgement exactly
            lo = max(0, end - hold_steps)
            tail = res2.states[lo:]
            tail_ok = (
                res2.failed_at is None
                and success_window(
                    tail,
                    track.goal_pose,
                    success.pos_tol,
                    success.rot_tol,
                    tail.shape[0],
                )
                is not None
            )
            if tail_ok:
                return TrackResult(
                    states=res2.states.copy(),
                    cmds=res2.commands.copy(),
                    success=True,
                    success_time=hit * dt,
                    windows=windows,
                )
            hit_floor = hit + 1
        # shift the elite mean by the executed time for the next warm start
        shifted = np.empty_like(plan.knots)
        exec_time = n_exec * dt
        for j, tau in enumerate(knot_times):
            src = tau + exec_time
            if src >= knot_times[-1]:
                shifted[j] = plan.knots[-1]
            else:
                k = int(np.searchsorted(knot_times, src, side="right")) - 1
                frac = (src - knot_times[k]) / (knot_times[k + 1] - knot_times[k])
                shifted[j] = plan.knots[k] + frac * (plan.knots[k + 1] - plan.knots[k])
        warm = shifted

    if failure is None:
        failure = "timeout"
    return TrackResult(
        states=states[: filled + 1].copy(),
        cmds=cmds[:filled].copy(),
        success=False,
        success_time=None,
        windows=windows,
        failure=failure,
    )
