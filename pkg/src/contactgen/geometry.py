"""Planar collision geometry: poses, shapes, signed distances, and SDF gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    pass


class UnsupportedPairError(GeometryError):
    """Raised when sdf() is asked about a shape pair it does not handle."""


class NumericalGradientError(GeometryError):
    """Raised when a finite-difference gradient comes out non-finite."""


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    t = math.fmod(theta + math.pi, TWO_PI)
    if t <= 0.0:
        t += TWO_PI
    return t - math.pi


@dataclass(frozen=True)
class Pose2:
    """Rigid planar pose; theta is stored normalized to (-pi, pi]."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise GeometryError(f"non-finite pose ({self.x}, {self.y}, {self.theta})")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def transform_point(self, p) -> np.ndarray:
        """Body frame -> world frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]])

    def inverse_transform_point(self, p) -> np.ndarray:
        """World frame -> body frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx, dy = p[0] - self.x, p[1] - self.y
        return np.array([c * dx + s * dy, -s * dx + c * dy])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class Circle:
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise GeometryError(f"circle radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Box:
    half_width: float
    half_height: float

    def __post_init__(self):
        if not (
            math.isfinite(self.half_width)
            and math.isfinite(self.half_height)
            and self.half_width > 0.0
            and self.half_height > 0.0
        ):
            raise GeometryError(
                f"box half extents must be positive, got ({self.half_width}, {self.half_height})"
            )

    def corners_local(self) -> np.ndarray:
        w, h = self.half_width, self.half_height
        return np.array([[-w, -h], [w, -h], [w, h], [-w, h]])


@dataclass(frozen=True)
class HalfPlane:
    """Solid occupying {p : normal . p <= offset}; normal points out of the material."""

    normal: tuple[float, float] = (0.0, 1.0)
    offset: float = 0.0

    def __post_init__(self):
        n = math.hypot(self.normal[0], self.normal[1])
        if not math.isfinite(n) or abs(n - 1.0) > 1e-9:
            raise GeometryError(f"half-plane normal must be unit length, got {self.normal}")


Shape = Circle | Box | HalfPlane


@dataclass(frozen=True)
class ContactQuery:
    """Closest-point query between two placed shapes.

    distance is the signed separation (< 0 under penetration), normal is the unit
    vector pointing from shape b toward shape a, and point_a/point_b are the
    witness points on each surface (for separation, ||point_a - point_b|| equals
    distance). feature tags which surface region produced the answer.
    """

    distance: float
    point_a: np.ndarray
    point_b: np.ndarray
    normal: np.ndarray
    feature: str = "face"

    def swapped(self) -> "ContactQuery":
        return ContactQuery(self.distance, self.point_b, self.point_a, -self.normal, self.feature)


def _circle_circle(a: Circle, pa: Pose2, b: Circle, pb: Pose2) -> ContactQuery:
    ca = np.array([pa.x, pa.y])
    cb = np.array([pb.x, pb.y])
    d = ca - cb
    dist = math.hypot(d[0], d[1])
    if dist > 1e-12:
        n = d / dist
        feature = "face"
    else:
        n = np.array([1.0, 0.0])
        feature = "degenerate"
    return ContactQuery(dist - a.radius - b.radius, ca - n * a.radius, cb + n * b.radius, n, feature)


def _point_box_local(p: np.ndarray, box: Box) -> tuple[float, np.ndarray, np.ndarray, str]:
    """Signed distance from a point to a box in the box frame.

    Returns (distance, closest surface point, outward normal, feature tag).
    """
    hw, hh = box.half_width, box.half_height
    dx = abs(p[0]) - hw
    dy = abs(p[1]) - hh
    sx = 1.0 if p[0] >= 0.0 else -1.0
    sy = 1.0 if p[1] >= 0.0 else -1.0
    if dx > 0.0 or dy > 0.0:
        # Outside: closest point is the clamp onto the box.
        cp = np.array([min(max(p[0], -hw), hw), min(max(p[1], -hh), hh)])
        delta = p - cp
        dist = math.hypot(delta[0], delta[1])
        if dist > 1e-12:
            n = delta / dist
        else:
            # Point exactly on the surface; at a corner the normal is undefined.
            if dx > -1e-12 and dy > -1e-12:
                n = np.array([sx * math.sqrt(0.5), sy * math.sqrt(0.5)])
                return 0.0, cp, n, "corner-surface"
            n = np.array([sx, 0.0]) if dx > dy else np.array([0.0, sy])
        feature = "corner" if (dx > 0.0 and dy > 0.0) else "face"
        return dist, cp, n, feature
    # Inside: distance to the nearest face, negative.
    if dx > dy:
        return dx, np.array([sx * hw, p[1]]), np.array([sx, 0.0]), (
            "inside-diagonal" if abs(dx - dy) < 1e-12 else "inside-face"
        )
    return dy, np.array([p[0], sy * hh]), np.array([0.0, sy]), (
        "inside-diagonal" if abs(dx - dy) < 1e-12 else "inside-face"
    )


def _circle_box(a: Circle, pa: Pose2, b: Box, pb: Pose2) -> ContactQuery:
    center_local = pb.inverse_transform_point((pa.x, pa.y))
    dist, cp_local, n_local, feature = _point_box_local(center_local, b)
    c, s = math.cos(pb.theta), math.sin(pb.theta)
    n = np.array([c * n_local[0] - s * n_local[1], s * n_local[0] + c * n_local[1]])
    point_b = pb.transform_point(cp_local)
    center = np.array([pa.x, pa.y])
    return ContactQuery(dist - a.radius, center - n * a.radius, point_b, n, feature)


def _circle_halfplane(a: Circle, pa: Pose2, b: HalfPlane, pb: Pose2) -> ContactQuery:
    # Half-planes are world-anchored; their pose carries no information.
    n = np.array(b.normal)
    c = np.array([pa.x, pa.y])
    margin = n[0] * c[0] + n[1] * c[1] - b.offset
    return ContactQuery(margin - a.radius, c - n * a.radius, c - n * margin, n, "face")


def _box_halfplane(a: Box, pa: Pose2, b: HalfPlane, pb: Pose2) -> ContactQuery:
    n = np.array(b.normal)
    corners = np.array([pa.transform_point(c) for c in a.corners_local()])
    margins = corners @ n - b.offset
    i = int(np.argmin(margins))
    feature = "corner"
    if np.sum(margins < margins[i] + 1e-12) > 1:
        feature = "edge"
    deepest = corners[i]
    return ContactQuery(float(margins[i]), deepest, deepest - n * margins[i], n, feature)


_DISPATCH: dict[tuple[type, type], Callable] = {
    (Circle, Circle): _circle_circle,
    (Circle, Box): _circle_box,
    (Circle, HalfPlane): _circle_halfplane,
    (Box, HalfPlane): _box_halfplane,
}


def sdf(shape_a: Shape, pose_a: Pose2, shape_b: Shape, pose_b: Pose2) -> ContactQuery:
    """Signed distance and witness points between two placed shapes.

    Supported pairs (either argument order): Circle-Circle, Circle-Box,
    Circle-HalfPlane, Box-HalfPlane. Box-HalfPlane answers the deepest-corner
    query. Swapping arguments flips the normal and the witness points.
    """
    fn = _DISPATCH.get((type(shape_a), type(shape_b)))
    if fn is not None:
        return fn(shape_a, pose_a, shape_b, pose_b)
    fn = _DISPATCH.get((type(shape_b), type(shape_a)))
    if fn is not None:
        return fn(shape_b, pose_b, shape_a, pose_a).swapped()
    raise UnsupportedPairError(
        f"no signed-distance routine for {type(shape_a).__name__} vs {type(shape_b).__name__}"
    )


_NONSMOOTH_FEATURES = frozenset({"corner-surface", "inside-diagonal", "degenerate"})


@dataclass(frozen=True)
class PairPlacement:
    """One evaluation of a kinematics map q -> placed shape pair.

    jac_a, when provided, is the 2 x dof Jacobian of shape_a's center with
    respect to q and asserts that pose_b does not depend on q and shape_a is a
    circle whose pose is pure translation in q. That unlocks the analytic
    gradient path; otherwise central differences are used.
    """

    shape_a: Shape
    pose_a: Pose2
    shape_b: Shape
    pose_b: Pose2
    jac_a: np.ndarray | None = None


@dataclass(frozen=True)
class SdfGradient:
    value: float
    grad: np.ndarray
    method: str  # "analytic" | "finite_difference"
    nonsmooth: bool


def sdf_gradient(pair_map: Callable[[np.ndarray], PairPlacement], q, h: float = 1e-6) -> SdfGradient:
    """Gradient of the pair's signed distance with respect to configuration q.

    pair_map evaluates the caller's kinematics at q. Analytic when the placement
    advertises a circle-center Jacobian and the query is smooth there; central
    finite differences (step h) otherwise. Nonsmooth query features are flagged
    and force the finite-difference path.
    """
    q = np.asarray(q, dtype=float)
    placement = pair_map(q)
    query = sdf(placement.shape_a, placement.pose_a, placement.shape_b, placement.pose_b)
    nonsmooth = query.feature in _NONSMOOTH_FEATURES
    if placement.jac_a is not None and not nonsmooth:
        grad = np.asarray(placement.jac_a, dtype=float).T @ query.normal
        return SdfGradient(query.distance, grad, "analytic", False)
    grad = np.empty(q.shape[0])
    for i in range(q.shape[0]):
        qp = q.copy()
        qp[i] += h
        pm = pair_map(qp)
        hi = sdf(pm.shape_a, pm.pose_a, pm.shape_b, pm.pose_b).distance
        qm = q.copy()
        qm[i] -= h
        pm = pair_map(qm)
        lo = sdf(pm.shape_a, pm.pose_a, pm.shape_b, pm.pose_b).distance
        grad[i] = (hi - lo) / (2.0 * h)
    if not np.all(np.isfinite(grad)):
        raise NumericalGradientError(f"non-finite finite-difference gradient at q={q!r}")
    return SdfGradient(query.distance, grad, "finite_difference", nonsmooth)
