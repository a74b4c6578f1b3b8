"""Scripted demonstrations for headless runs.

Each script is a sequence of timed hand waypoints driven through a DemoSession
at the normal control rate, so the recorded trajectory went through the same
filtering, clamping, and physics as an interactive demonstration. The goal
pose is whatever the object actually reached, never the script's intent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import PhysicalParams, resting_object_pose
from .embodiments import DemoTrajectory
from .geometry import Pose2
from .session import DemoSession


@dataclass(frozen=True)
class Waypoint:
    time: float
    hands: np.ndarray  # (2, 2)

    def __post_init__(self):
        object.__setattr__(self, "hands", np.asarray(self.hands, dtype=float).reshape(2, 2))


def run_script(
    waypoints: list[Waypoint],
    params: PhysicalParams | None = None,
    *,
    object_pose: Pose2 | None = None,
    settle_time: float = 0.3,
    metadata: dict | None = None,
) -> DemoTrajectory:
    """Drive the waypoint targets through a session and record the result.

    Targets interpolate linearly between waypoints and hold after the last
    one for settle_time so releases come to rest inside the recording.
    """
    if len(waypoints) < 2:
        raise ValueError("a script needs at least two waypoints")
    times = np.array([w.time for w in waypoints])
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("waypoint times must start at 0 and strictly increase")
    session = DemoSession(params)
    session.reset(object_pose=object_pose, hands=waypoints[0].hands)
    session.start_recording()
    dt = session.config.control_dt
    n_ticks = int(round((times[-1] + settle_time) / dt))
    seg = 0
    for i in range(n_ticks):
        t = i * dt
        while seg + 1 < len(waypoints) and t >= times[seg + 1]:
            seg += 1
        if t >= times[-1]:
            target = waypoints[-1].hands
        else:
            frac = (t - times[seg]) / (times[seg + 1] - times[seg])
            target = waypoints[seg].hands + frac * (waypoints[seg + 1].hands - waypoints[seg].hands)
        session.set_targets(target)
        session.tick()
    return session.stop_recording(metadata=metadata)


def _rest_y(params: PhysicalParams) -> float:
    return resting_object_pose(params).y


def push_demo(
    distance: float = 0.12,
    params: PhysicalParams | None = None,
    *,
    start_x: float = 0.0,
) -> DemoTrajectory:
    """Single-sided push: one hand shoves the box from behind, the other
    stays parked. Open-loop replays of this are sensitive to friction and
    mass (no cage catches overshoot)."""
    params = params or PhysicalParams()
    h = params.object_half_extent
    d = 1.0 if distance >= 0 else -1.0
    hand_y = 0.015
    behind = start_x - d * (h + 0.04)
    park = np.array([start_x + d * 0.15, 0.30])
    contact = np.array([behind, hand_y])
    end = np.array([behind + distance, hand_y])
    lift = np.array([behind + distance - d * 0.02, 0.25])
    t_push = 0.4 + abs(distance) / 0.08
    # the hand on the push-origin side does the shoving; the other parks high
    a, b = (0, 1) if d > 0 else (1, 0)

    def hp(pusher: np.ndarray, parked: np.ndarray) -> np.ndarray:
        out = np.zeros((2, 2))
        out[a] = pusher
        out[b] = parked
        return out

    wps = [
        Waypoint(0.0, hp(contact - np.array([d * 0.03, 0.0]), park)),
        Waypoint(0.4, hp(contact, park)),
        Waypoint(t_push, hp(end, park)),
        Waypoint(t_push + 0.4, hp(lift, park)),
    ]
    pose = resting_object_pose(params, x=start_x)
    return run_script(wps, params, object_pose=pose, metadata={"script": "push", "distance": distance})


def topple_demo(
    params: PhysicalParams | None = None,
    *,
    start_x: float = 0.0,
    direction: float = 1.0,
) -> DemoTrajectory:
    """Pivot the box a quarter turn over its leading bottom corner.

    One hand blocks low on the leading side so the box cannot slide away;
    the other presses near the top of the trailing face and sweeps through.
    The press height and sweep depth set the pivot torque, so the outcome
    is strongly parameter-dependent under open-loop replay.
    """
    params = params or PhysicalParams()
    h = params.object_half_extent
    d = 1.0 if direction >= 0 else -1.0
    z_press = 0.054
    z_block = 0.010
    travel = 0.04
    press_far = np.array([start_x - d * (h + 0.05), z_press])
    press_on = np.array([start_x - d * (h + 0.010), z_press])
    press_thru = np.array([start_x + d * travel, z_press])
    press_off = np.array([start_x + d * (travel - 0.03), 0.28])
    block_far = np.array([start_x + d * (h + 0.05), z_block])
    block_on = np.array([start_x + d * (h + 0.010), z_block])
    block_off = np.array([start_x + d * (h + 0.09), z_block])
    # keep hands on their home sides: hand 0 starts left, hand 1 right
    a, b = (0, 1) if d > 0 else (1, 0)

    def hp(press: np.ndarray, block: np.ndarray) -> np.ndarray:
        out = np.zeros((2, 2))
        out[a] = press
        out[b] = block
        return out

    wps = [
        Waypoint(0.0, hp(press_far, block_far)),
        Waypoint(0.5, hp(press_on, block_on)),
        Waypoint(2.0, hp(press_thru, block_on)),
        Waypoint(2.3, hp(press_thru, block_off)),
        Waypoint(2.9, hp(press_off, block_off)),
    ]
    pose = resting_object_pose(params, x=start_x)
    return run_script(wps, params, object_pose=pose, metadata={"script": "topple", "direction": d})


def push_pair_demo(
    distance: float = 0.10,
    params: PhysicalParams | None = None,
    *,
    start_x: float = 0.0,
) -> DemoTrajectory:
    """Two-handed transport: cage the box and carry it sideways. The easy
    case; replays survive most randomizations."""
    params = params or PhysicalParams()
    h = params.object_half_extent
    hand_y = 0.015
    gap = h + 0.03
    left = np.array([start_x - gap, hand_y])
    right = np.array([start_x + gap, hand_y])
    shift = np.array([distance, 0.0])
    up = np.array([0.0, 0.25])
    wps = [
        Waypoint(0.0, np.stack([left, right])),
        Waypoint(0.5, np.stack([left + shift * 0.0, right + shift * 0.0])),
        Waypoint(0.5 + abs(distance) / 0.06, np.stack([left + shift, right + shift])),
        Waypoint(1.4 + abs(distance) / 0.06, np.stack([left + shift + up, right + shift + up])),
    ]
    pose = resting_object_pose(params, x=start_x)
    return run_script(wps, params, object_pose=pose, metadata={"script": "push_pair", "distance": distance})


_SCRIPTS = {
    "push": push_demo,
    "topple": topple_demo,
    "push_pair": push_pair_demo,
}


def make_demo(name: str, params: PhysicalParams | None = None, **kwargs) -> DemoTrajectory:
    try:
        fn = _SCRIPTS[name]
    except KeyError:
        raise KeyError(f"unknown script {name!r}; choices: {sorted(_SCRIPTS)}") from None
    return fn(params=params, **kwargs)


def default_demo_suite(params: PhysicalParams | None = None) -> list[DemoTrajectory]:
    """The demo set used by the dataset generator when none is supplied."""
    params = params or PhysicalParams()
    return [
        push_demo(0.10, params),
        push_demo(-0.10, params),
        topple_demo(params, direction=1.0),
        topple_demo(params, direction=-1.0),
        topple_demo(params, start_x=0.03, direction=1.0),
        topple_demo(params, start_x=-0.03, direction=-1.0),
    ]


def script_names() -> list[str]:
    return sorted(_SCRIPTS)
