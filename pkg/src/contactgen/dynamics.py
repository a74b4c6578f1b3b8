"""Penalty-based planar rigid-body dynamics for one box, a table, and a robot.

Symplectic fixed-timestep stepping: forces from the current state update the
velocities, then positions advance by the old/new velocity average (exact for
constant acceleration, so free flight follows the ballistic parabola to
rounding). Contacts use a spring force
k * max(0, -phi) plus a damping term d * (-dphi/dt)^+ active only during
penetration (never adhesive), and smooth tanh friction. The robot is
position-commanded through a force-capped PD loop. The numerical core lives in
the kernel modules selected by backend.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .backend import KERNEL_BACKEND, rollout_raw, step_raw
from .embodiments import Embodiment
from .geometry import Pose2

N_STATE = 14


class SimulationBlowupError(RuntimeError):
    """A step produced a non-finite state."""

    def __init__(self, step_index: int, state: np.ndarray):
        bad = [i for i, v in enumerate(state) if not math.isfinite(v)]
        super().__init__(
            f"simulation blew up at step {step_index}: non-finite state entries {bad}"
        )
        self.step_index = step_index
        self.state = state


@dataclass(frozen=True)
class PhysicalParams:
    """Object, contact, and actuation constants for one simulation.

    Contact stiffness is bounded by corner-impact stability: the rotational
    lever drops the effective mass of a light box's corner to ~0.025 kg, and
    the explicit 200 Hz integration needs dt*sqrt(k/m_eff) well under 2 there.
    k=600 keeps that mode at ~0.8 for the smallest randomized box while static
    penetration stays under 3 mm.
    """

    object_mass: float = 0.2
    object_half_extent: float = 0.03
    friction_mu: float = 1.0
    contact_stiffness: float = 600.0
    contact_damping: float = 50.0
    friction_vel_eps: float = 1e-3
    gravity: float = 9.81
    sim_dt: float = 0.005
    robot_kp: float = 200.0
    robot_kd: float = 9.0
    robot_force_limit: float = 5.0

    def __post_init__(self):
        positive = (
            "object_mass",
            "object_half_extent",
            "contact_stiffness",
            "friction_vel_eps",
            "robot_kp",
            "robot_force_limit",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("friction_mu", "contact_damping", "gravity", "robot_kd"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if not (1e-4 <= self.sim_dt <= 1e-2):
            raise ValueError(f"sim_dt must lie in [1e-4, 1e-2], got {self.sim_dt}")

    def to_array(self) -> np.ndarray:
        return np.array(
            [
                self.object_mass,
                self.object_half_extent,
                self.friction_mu,
                self.contact_stiffness,
                self.contact_damping,
                self.friction_vel_eps,
                self.gravity,
                self.sim_dt,
                self.robot_kp,
                self.robot_kd,
                self.robot_force_limit,
            ]
        )

    def with_overrides(self, **kw) -> "PhysicalParams":
        return replace(self, **kw)


def arms_physics() -> PhysicalParams:
    """Actuation/object constants sized for the large-box two-arm task.

    The heavier box tolerates (and needs, against ~60 N tip forces) a stiffer
    contact; its corner mode stays near dt*omega ~ 0.8.
    """
    return PhysicalParams(
        object_mass=0.5,
        object_half_extent=0.15,
        friction_mu=0.3,
        contact_stiffness=1500.0,
        robot_kp=300.0,
        robot_kd=30.0,
        robot_force_limit=40.0,
    )


@dataclass
class WorldState:
    """Object pose/twist plus robot configuration/velocity."""

    object_pose: Pose2
    object_twist: np.ndarray = field(default_factory=lambda: np.zeros(3))
    robot_q: np.ndarray = field(default_factory=lambda: np.zeros(4))
    robot_v: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        self.object_twist = np.asarray(self.object_twist, dtype=float)
        self.robot_q = np.asarray(self.robot_q, dtype=float)
        self.robot_v = np.asarray(self.robot_v, dtype=float)
        if self.object_twist.shape != (3,) or self.robot_q.shape != (4,) or self.robot_v.shape != (4,):
            raise ValueError("state arrays must have shapes (3,), (4,), (4,)")
        vec = self.to_vector()
        if not np.all(np.isfinite(vec)):
            raise ValueError("world state must be finite")

    def to_vector(self) -> np.ndarray:
        out = np.empty(N_STATE)
        out[0:3] = self.object_pose.as_array()
        out[3:6] = self.object_twist
        out[6:10] = self.robot_q
        out[10:14] = self.robot_v
        return out

    @classmethod
    def from_vector(cls, vec) -> "WorldState":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (N_STATE,):
            raise ValueError(f"state vector must have {N_STATE} entries")
        return cls(
            Pose2(vec[0], vec[1], vec[2]),
            vec[3:6].copy(),
            vec[6:10].copy(),
            vec[10:14].copy(),
        )


@dataclass(frozen=True)
class KnotTrajectory:
    """Piecewise-linear position commands: knots[i] applies at times[i].

    Commands are held constant before the first and after the last knot.
    """

    times: np.ndarray
    knots: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.ascontiguousarray(self.times, dtype=float))
        object.__setattr__(self, "knots", np.ascontiguousarray(self.knots, dtype=float))
        if self.times.ndim != 1 or self.knots.ndim != 2 or self.knots.shape[0] != self.times.shape[0]:
            raise ValueError("need one knot row per timestamp")
        if self.times.shape[0] < 1:
            raise ValueError("need at least one knot")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("knot times must be strictly increasing")

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @classmethod
    def constant(cls, q, duration: float) -> "KnotTrajectory":
        q = np.asarray(q, dtype=float)
        return cls(np.array([0.0, duration]), np.stack([q, q]))


@dataclass
class RolloutResult:
    """Dense simulation output: states has one more row than commands.

    failed_at, when set, is the first step whose output went non-finite;
    states[failed_at + 1:] and commands[failed_at + 1:] are garbage.
    """

    states: np.ndarray  # (n_steps + 1, N_STATE)
    commands: np.ndarray  # (n_steps, dof)
    dt: float
    failed_at: int | None = None

    @property
    def n_steps(self) -> int:
        return self.commands.shape[0]

    def times(self) -> np.ndarray:
        return np.arange(self.states.shape[0]) * self.dt

    def state_at(self, index: int) -> WorldState:
        return WorldState.from_vector(self.states[index])

    def object_poses(self) -> np.ndarray:
        return self.states[:, 0:3]


def step(state: WorldState, command, params: PhysicalParams, embodiment: Embodiment) -> WorldState:
    """Advance one sim_dt under a held position command."""
    command = np.ascontiguousarray(command, dtype=float)
    if command.shape != (4,):
        raise ValueError("command must have one target per dof")
    if not np.all(np.isfinite(command)):
        raise ValueError("command must be finite")
    vec = np.ascontiguousarray(state.to_vector())
    out = np.empty(N_STATE)
    rc = step_raw(vec, command, params.to_array(), embodiment.kind, embodiment.kernel_params(), out)
    if rc != 0:
        raise SimulationBlowupError(0, out)
    return WorldState.from_vector(out)


def rollout(
    state: WorldState,
    knots: KnotTrajectory,
    params: PhysicalParams,
    embodiment: Embodiment,
    n_steps: int | None = None,
) -> RolloutResult:
    """Simulate the interpolated command trajectory from the given state.

    n_steps defaults to round(knots.duration / sim_dt). The returned commands
    are the per-tick interpolated targets actually applied, which is what a
    stored episode replays through step() bit-identically.
    """
    if n_steps is None:
        n_steps = int(round(knots.times[-1] / params.sim_dt))
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    states = np.empty((n_steps + 1, N_STATE))
    cmds = np.empty((n_steps, 4))
    rc = rollout_raw(
        np.ascontiguousarray(state.to_vector()),
        knots.times,
        knots.knots,
        n_steps,
        params.to_array(),
        embodiment.kind,
        embodiment.kernel_params(),
        states,
        cmds,
    )
    if rc != -1:
        raise SimulationBlowupError(rc, states[rc + 1])
    return RolloutResult(states, cmds, params.sim_dt)


def rollout_vector(
    state_vec: np.ndarray,
    knots: KnotTrajectory,
    n_steps: int,
    params: PhysicalParams,
    embodiment: Embodiment,
) -> RolloutResult:
    """Raw-vector rollout that reports blowups instead of raising.

    The planner scores failed samples by failed_at; everything else matches
    rollout().
    """
    states = np.empty((n_steps + 1, N_STATE))
    cmds = np.empty((n_steps, 4))
    rc = rollout_raw(
        np.ascontiguousarray(state_vec, dtype=float),
        knots.times,
        knots.knots,
        n_steps,
        params.to_array(),
        embodiment.kind,
        embodiment.kernel_params(),
        states,
        cmds,
    )
    return RolloutResult(states, cmds, params.sim_dt, failed_at=None if rc == -1 else rc)


def resting_object_pose(params: PhysicalParams, x: float = 0.0, theta: float = 0.0) -> Pose2:
    """Pose with the box statically settled on the table.

    For a flat box (theta ~ 0 mod pi/2) the two supporting corners each carry
    half the weight at the spring's equilibrium depth; a tilted box is placed
    with its lowest corner exactly touching (it will rock flat on its own).
    """
    h = params.object_half_extent
    c = abs(math.cos(theta))
    s = abs(math.sin(theta))
    lowest = h * (c + s)
    if min(c, s) < 1e-9:
        penetration = params.object_mass * params.gravity / (2.0 * params.contact_stiffness)
        return Pose2(x, lowest - penetration, theta)
    return Pose2(x, lowest, theta)


def default_state(embodiment: Embodiment, params: PhysicalParams, object_pose: Pose2 | None = None) -> WorldState:
    if object_pose is None:
        object_pose = resting_object_pose(params)
    return WorldState(object_pose, np.zeros(3), embodiment.home_q.copy(), np.zeros(4))
