"""Robot embodiments, demonstrator correspondences, and demonstration containers.

Two planar embodiments share a 4-dof interface: a pair of free point fingers
(directly actuated circles) and a pair of fixed-base two-link arms whose tips
carry the collision circles. Demonstrations record demonstrator landmark points
(the two finger positions) plus the object pose at a fixed rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Circle, GeometryError, Pose2, wrap_angle


@dataclass(frozen=True)
class ArmGeometry:
    """One fixed-base planar 2R arm with point masses at elbow and tip."""

    base: tuple[float, float]
    base_angle: float
    l1: float
    l2: float
    m1: float
    m2: float
    tip_radius: float


@dataclass(frozen=True)
class BodyPose:
    name: str
    pose: Pose2
    shape: Circle | None = None  # collision circles carry their shape


@dataclass(frozen=True)
class Embodiment:
    """Kinematic and actuation description of one robot.

    kind 0 = free point fingers (q = [x1, y1, x2, y2], meters),
    kind 1 = two 2R arms (q = [q1L, q2L, q1R, q2R], radians).
    """

    name: str
    kind: int
    q_min: np.ndarray
    q_max: np.ndarray
    home_q: np.ndarray
    demo_scale: float
    finger_radius: float = 0.0
    finger_mass: float = 0.0
    arms: tuple[ArmGeometry, ArmGeometry] | None = None
    velocity_mode: str = "none"  # "none" | "hard_rate_clamp" | "soft_penalty"
    rate_limit: float = math.inf  # command units per second, hard_rate_clamp only
    velocity_limit: float = math.inf
    soft_velocity_weight: float = 0.0

    def __post_init__(self):
        for name in ("q_min", "q_max", "home_q"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.q_min.shape != (self.dof,) or self.q_max.shape != (self.dof,):
            raise ValueError("joint bound arrays must have one entry per dof")
        if np.any(self.q_min >= self.q_max):
            raise ValueError("q_min must be strictly below q_max")
        if np.any(self.home_q < self.q_min) or np.any(self.home_q > self.q_max):
            raise ValueError("home configuration violates joint limits")

    @property
    def dof(self) -> int:
        return 4

    @property
    def n_landmarks(self) -> int:
        return 2

    def clamp(self, q) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=float), self.q_min, self.q_max)

    def _arm_points(self, arm: ArmGeometry, q1: float, q2: float):
        a1 = arm.base_angle + q1
        a12 = a1 + q2
        elbow = np.array(
            [arm.base[0] + arm.l1 * math.cos(a1), arm.base[1] + arm.l1 * math.sin(a1)]
        )
        tip = elbow + np.array([arm.l2 * math.cos(a12), arm.l2 * math.sin(a12)])
        return elbow, tip, a1, a12

    def landmark_points(self, q) -> np.ndarray:
        """World positions of the two fingertip landmarks, shape (2, 2)."""
        q = np.asarray(q, dtype=float)
        if self.kind == 0:
            return q.reshape(2, 2).copy()
        pts = np.empty((2, 2))
        for i, arm in enumerate(self.arms):
            _, tip, _, _ = self._arm_points(arm, q[2 * i], q[2 * i + 1])
            pts[i] = tip
        return pts

    def landmark_jacobian(self, q, index: int) -> np.ndarray:
        """2 x dof Jacobian of landmark `index` with respect to q."""
        q = np.asarray(q, dtype=float)
        J = np.zeros((2, 4))
        if self.kind == 0:
            J[0, 2 * index] = 1.0
            J[1, 2 * index + 1] = 1.0
            return J
        arm = self.arms[index]
        q1, q2 = q[2 * index], q[2 * index + 1]
        a1 = arm.base_angle + q1
        a12 = a1 + q2
        s1, c1 = math.sin(a1), math.cos(a1)
        s12, c12 = math.sin(a12), math.cos(a12)
        J[0, 2 * index] = -arm.l1 * s1 - arm.l2 * s12
        J[0, 2 * index + 1] = -arm.l2 * s12
        J[1, 2 * index] = arm.l1 * c1 + arm.l2 * c12
        J[1, 2 * index + 1] = arm.l2 * c12
        return J

    def forward_kinematics(self, q) -> list[BodyPose]:
        """Pose of every body reachable from the configuration."""
        q = np.asarray(q, dtype=float)
        if self.kind == 0:
            return [
                BodyPose(f"finger{i}", Pose2(q[2 * i], q[2 * i + 1], 0.0), Circle(self.finger_radius))
                for i in range(2)
            ]
        bodies = []
        for i, arm in enumerate(self.arms):
            elbow, tip, a1, a12 = self._arm_points(arm, q[2 * i], q[2 * i + 1])
            side = "L" if i == 0 else "R"
            bodies.append(BodyPose(f"upper{side}", Pose2(arm.base[0], arm.base[1], a1)))
            bodies.append(BodyPose(f"fore{side}", Pose2(elbow[0], elbow[1], a12)))
            bodies.append(BodyPose(f"tip{side}", Pose2(tip[0], tip[1], 0.0), Circle(arm.tip_radius)))
        return bodies

    def collision_circles(self, q) -> list[tuple[np.ndarray, float]]:
        """(center, radius) for every collision volume at configuration q."""
        pts = self.landmark_points(q)
        r = self.finger_radius if self.kind == 0 else self.arms[0].tip_radius
        if self.kind == 0:
            return [(pts[0], r), (pts[1], r)]
        return [(pts[i], self.arms[i].tip_radius) for i in range(2)]

    def kinematic_seed(self, targets) -> np.ndarray:
        """Configuration whose landmarks sit near the given (2, 2) targets.

        Closed form: identity for fingers, per-arm 2R inverse kinematics with
        the home elbow convention for arms. Clamped into bounds.
        """
        targets = np.asarray(targets, dtype=float)
        if self.kind == 0:
            return self.clamp(targets.reshape(4))
        q = np.concatenate(
            [
                _ik_2r(self.arms[0], targets[0], elbow_sign=-1.0),
                _ik_2r(self.arms[1], targets[1], elbow_sign=1.0),
            ]
        )
        return self.clamp(q)

    def kernel_params(self) -> np.ndarray:
        """Flat constant array consumed by the simulation kernel."""
        if self.kind == 0:
            return np.array([self.finger_radius, self.finger_mass])
        out = []
        for arm in self.arms:
            out.extend(
                [arm.base[0], arm.base[1], arm.base_angle, arm.l1, arm.l2, arm.m1, arm.m2, arm.tip_radius]
            )
        return np.array(out)


def _ik_2r(arm: ArmGeometry, target, elbow_sign: float) -> np.ndarray:
    """Closed-form 2R inverse kinematics; clamps unreachable targets to the boundary."""
    dx = target[0] - arm.base[0]
    dy = target[1] - arm.base[1]
    r2 = dx * dx + dy * dy
    c2 = (r2 - arm.l1 * arm.l1 - arm.l2 * arm.l2) / (2.0 * arm.l1 * arm.l2)
    c2 = min(1.0, max(-1.0, c2))
    q2 = elbow_sign * math.acos(c2)
    gamma = math.atan2(dy, dx)
    q1 = gamma - math.atan2(arm.l2 * math.sin(q2), arm.l1 + arm.l2 * math.cos(q2)) - arm.base_angle
    return np.array([wrap_angle(q1), wrap_angle(q2)])


@dataclass
class DemoFrame:
    """One recorded demonstrator sample: landmark points (2, 2) and object pose."""

    fingers: np.ndarray
    object_pose: Pose2

    def __post_init__(self):
        self.fingers = np.asarray(self.fingers, dtype=float)
        if self.fingers.shape != (2, 2) or not np.all(np.isfinite(self.fingers)):
            raise GeometryError("demo frame needs two finite landmark points")


@dataclass
class DemoTrajectory:
    """A recorded demonstration: uniform-rate landmark/object samples plus task metadata."""

    rate_hz: float
    frames: list[DemoFrame]
    goal_pose: Pose2
    object_side: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rate_hz <= 0 or not math.isfinite(self.rate_hz):
            raise ValueError(f"demo rate must be positive, got {self.rate_hz}")
        if len(self.frames) < 2:
            raise ValueError("a demonstration needs at least two frames")
        if self.object_side <= 0:
            raise ValueError("object side must be positive")

    @property
    def duration(self) -> float:
        return (len(self.frames) - 1) / self.rate_hz

    def times(self) -> np.ndarray:
        return np.arange(len(self.frames)) / self.rate_hz

    def landmark_array(self) -> np.ndarray:
        return np.stack([f.fingers for f in self.frames])  # (F, 2, 2)

    def object_array(self) -> np.ndarray:
        return np.stack([f.object_pose.as_array() for f in self.frames])  # (F, 3)

    def save(self, path) -> None:
        from .serialize import dump_json  # local import to avoid a cycle

        frames = [
            {"fingers": f.fingers.tolist(), "object": f.object_pose.as_array().tolist()}
            for f in self.frames
        ]
        dump_json(
            {
                "schema": "contactgen.demo.v1",
                "rate_hz": self.rate_hz,
                "goal_pose": self.goal_pose.as_array().tolist(),
                "object_side": self.object_side,
                "metadata": self.metadata,
                "frames": frames,
            },
            path,
        )

    @classmethod
    def load(cls, path) -> "DemoTrajectory":
        data = json.loads(Path(path).read_text())
        if data.get("schema") != "contactgen.demo.v1":
            raise ValueError(f"{path}: not a demo file (schema={data.get('schema')!r})")
        frames = [
            DemoFrame(np.array(f["fingers"]), Pose2(*f["object"])) for f in data["frames"]
        ]
        g = data["goal_pose"]
        return cls(
            rate_hz=float(data["rate_hz"]),
            frames=frames,
            goal_pose=Pose2(g[0], g[1], g[2]),
            object_side=float(data["object_side"]),
            metadata=data.get("metadata", {}),
        )


def scale_demo(demo: DemoTrajectory, scale: float) -> DemoTrajectory:
    """Scale landmark and object positions about the table origin; angles are preserved."""
    if scale <= 0:
        raise ValueError("demo scale must be positive")
    if scale == 1.0:
        return demo
    frames = [
        DemoFrame(
            f.fingers * scale,
            Pose2(f.object_pose.x * scale, f.object_pose.y * scale, f.object_pose.theta),
        )
        for f in demo.frames
    ]
    goal = Pose2(demo.goal_pose.x * scale, demo.goal_pose.y * scale, demo.goal_pose.theta)
    meta = dict(demo.metadata)
    meta["scaled_by"] = scale
    return DemoTrajectory(demo.rate_hz, frames, goal, demo.object_side * scale, meta)


@dataclass(frozen=True)
class CorrespondenceMap:
    """Pairs robot landmark maps with demonstrator landmarks.

    Entry i maps demo finger i to robot landmark i with weight weights[i]; the
    demonstration is scaled by demo_scale about the table origin before matching.
    """

    embodiment: Embodiment
    weights: np.ndarray
    demo_scale: float

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.weights.shape != (self.embodiment.n_landmarks,):
            raise ValueError("one weight per landmark required")
        if np.any(self.weights < 0):
            raise ValueError("correspondence weights must be nonnegative")

    @property
    def n_entries(self) -> int:
        return self.embodiment.n_landmarks

    def robot_points(self, q) -> np.ndarray:
        return self.embodiment.landmark_points(q)

    def robot_jacobian(self, q, index: int) -> np.ndarray:
        return self.embodiment.landmark_jacobian(q, index)

    def demo_points(self, frame: DemoFrame) -> np.ndarray:
        """Demo landmarks mapped into the robot's workspace (already-scaled demos use scale 1)."""
        return frame.fingers * self.demo_scale


def default_correspondence(embodiment: Embodiment, demo_already_scaled: bool = True) -> CorrespondenceMap:
    scale = 1.0 if demo_already_scaled else embodiment.demo_scale
    return CorrespondenceMap(embodiment, np.ones(embodiment.n_landmarks), scale)


def make_fingers() -> Embodiment:
    return Embodiment(
        name="fingers",
        kind=0,
        q_min=np.array([-0.4, 0.0, -0.4, 0.0]),
        q_max=np.array([0.4, 0.5, 0.4, 0.5]),
        home_q=np.array([-0.09, 0.10, 0.09, 0.10]),
        demo_scale=1.0,
        finger_radius=0.012,
        finger_mass=0.1,
    )


_ARM_L = ArmGeometry(base=(-0.55, 0.9), base_angle=-math.pi / 2, l1=0.6, l2=0.6, m1=2.0, m2=1.0, tip_radius=0.05)
_ARM_R = ArmGeometry(base=(0.55, 0.9), base_angle=-math.pi / 2, l1=0.6, l2=0.6, m1=2.0, m2=1.0, tip_radius=0.05)


def make_arms(soft_velocity: bool = False) -> Embodiment:
    home = np.concatenate(
        [
            _ik_2r(_ARM_L, (-0.45, 0.50), elbow_sign=-1.0),
            _ik_2r(_ARM_R, (0.45, 0.50), elbow_sign=1.0),
        ]
    )
    return Embodiment(
        name="arms_soft" if soft_velocity else "arms",
        kind=1,
        q_min=np.array([-2.3, -2.9, -2.3, -2.9]),
        q_max=np.array([2.3, 2.9, 2.3, 2.9]),
        home_q=home,
        demo_scale=5.0,
        arms=(_ARM_L, _ARM_R),
        velocity_mode="soft_penalty" if soft_velocity else "hard_rate_clamp",
        rate_limit=math.inf if soft_velocity else 1.2,
        velocity_limit=1.5,
        soft_velocity_weight=5.0 if soft_velocity else 0.0,
    )


def get_embodiment(name: str) -> Embodiment:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown embodiment {name!r}; choices: {sorted(_REGISTRY)}") from None


_REGISTRY = {
    "fingers": make_fingers,
    "arms": lambda: make_arms(False),
    "arms_soft": lambda: make_arms(True),
}
