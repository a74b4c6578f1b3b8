"""Interactive demonstration sessions.

A session simulates the demonstration rig: two hand circles driven by pointer
targets push a box around a table. Control runs at 50 Hz with four 200 Hz
physics substeps per tick; raw targets are workspace-clamped and passed
through a first-order 10 Hz low-pass so pointer jitter does not whip the
hands. Recording captures the achieved hand and object trajectory (not the
raw targets), so every stored demonstration is physically consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import PhysicalParams, resting_object_pose
from .embodiments import DemoFrame, DemoTrajectory, make_fingers
from .geometry import Pose2
from .backend import step_raw


class SessionError(RuntimeError):
    pass


@dataclass
class SessionConfig:
    control_hz: float = 50.0
    physics_substeps: int = 4
    filter_cutoff_hz: float = 10.0

    def __post_init__(self):
        if self.control_hz <= 0 or self.physics_substeps < 1:
            raise ValueError("control rate and substeps must be positive")
        if self.filter_cutoff_hz <= 0:
            raise ValueError("filter cutoff must be positive")

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_hz

    @property
    def alpha(self) -> float:
        """First-order low-pass coefficient per control tick."""
        return 1.0 - math.exp(-2.0 * math.pi * self.filter_cutoff_hz * self.control_dt)


class DemoSession:
    """One demonstrator scene: two kinematically-targeted hands and the box."""

    def __init__(
        self,
        params: PhysicalParams | None = None,
        config: SessionConfig | None = None,
    ):
        self.params = params or PhysicalParams()
        self.config = config or SessionConfig()
        self.embodiment = make_fingers()
        expected = self.config.physics_substeps * self.params.sim_dt
        if not math.isclose(expected, self.config.control_dt, rel_tol=1e-9):
            raise SessionError(
                f"substeps * sim_dt = {expected} must equal the control period "
                f"{self.config.control_dt}"
            )
        self._phys = self.params.to_array()
        self._emb = self.embodiment.kernel_params()
        self._scratch = np.empty(14)
        self.reset()

    # -- lifecycle ---------------------------------------------------------

    def reset(self, object_pose: Pose2 | None = None, hands: np.ndarray | None = None):
        if object_pose is None:
            object_pose = resting_object_pose(self.params)
        if hands is None:
            hands = self.embodiment.home_q.reshape(2, 2)
        hands = self._clamp_points(np.asarray(hands, dtype=float))
        self.state = np.zeros(14)
        self.state[0:3] = object_pose.as_array()
        self.state[6:10] = hands.reshape(4)
        self._filtered = hands.reshape(4).copy()
        self._targets = hands.reshape(4).copy()
        self.tick_index = 0
        self.recording = False
        self._frames: list[DemoFrame] = []
        self._goal: Pose2 | None = None
        return self.snapshot()

    def _clamp_points(self, pts: np.ndarray) -> np.ndarray:
        flat = self.embodiment.clamp(pts.reshape(4))
        return flat.reshape(2, 2)

    # -- control -----------------------------------------------------------

    def set_targets(self, hands) -> None:
        """Raw pointer targets for both hands, shape (2, 2). Clamped here;
        smoothing happens per tick."""
        pts = np.asarray(hands, dtype=float)
        if pts.shape != (2, 2) or not np.all(np.isfinite(pts)):
            raise SessionError("targets must be two finite 2D points")
        self._targets = self._clamp_points(pts).reshape(4)

    def tick(self) -> dict:
        """Advance one control period and return the resulting snapshot."""
        a = self.config.alpha
        self._filtered += a * (self._targets - self._filtered)
        cmd = np.ascontiguousarray(self._filtered)
        for _ in range(self.config.physics_substeps):
            rc = step_raw(self.state, cmd, self._phys, 0, self._emb, self._scratch)
            if rc != 0:
                raise SessionError(f"demo physics blew up at tick {self.tick_index}")
            self.state, self._scratch = self._scratch, self.state
        self.tick_index += 1
        if self.recording:
            self._frames.append(
                DemoFrame(
                    fingers=self.state[6:10].reshape(2, 2).copy(),
                    object_pose=Pose2(self.state[0], self.state[1], self.state[2]),
                )
            )
        return self.snapshot()

    # -- recording ---------------------------------------------------------

    def start_recording(self, goal: Pose2 | None = None) -> None:
        """Begin capturing frames; `goal` is the task goal the demo aims for.
        Without one, stop_recording falls back to the final object pose."""
        if self.recording:
            raise SessionError("already recording")
        self.recording = True
        self._goal = goal
        self._frames = [
            DemoFrame(
                fingers=self.state[6:10].reshape(2, 2).copy(),
                object_pose=Pose2(self.state[0], self.state[1], self.state[2]),
            )
        ]

    def stop_recording(self, metadata: dict | None = None) -> DemoTrajectory:
        """Finish recording; goal defaults to the object pose at stop time."""
        if not self.recording:
            raise SessionError("not recording")
        self.recording = False
        if len(self._frames) < 2:
            raise SessionError("recording too short: nothing was captured")
        goal = self._goal or Pose2(self.state[0], self.state[1], self.state[2])
        demo = DemoTrajectory(
            rate_hz=self.config.control_hz,
            frames=self._frames,
            goal_pose=goal,
            object_side=2.0 * self.params.object_half_extent,
            metadata=dict(metadata or {}),
        )
        self._frames = []
        return demo

    # -- views -------------------------------------------------------------

    def snapshot(self) -> dict:
        """JSON-ready view of the current scene."""
        return {
            "tick": self.tick_index,
            "time": self.tick_index * self.config.control_dt,
            "object": [self.state[0], self.state[1], self.state[2]],
            "hands": self.state[6:10].reshape(2, 2).tolist(),
            "targets": self._targets.reshape(2, 2).tolist(),
            "object_side": 2.0 * self.params.object_half_extent,
            "hand_radius": self.embodiment.finger_radius,
            "bounds": {
                "min": self.embodiment.q_min[:2].tolist(),
                "max": self.embodiment.q_max[:2].tolist(),
            },
            "recording": self.recording,
            "goal": None if self._goal is None else self._goal.as_array().tolist(),
        }
