"""Kinematic retargeting: map demonstration landmarks onto robot configurations.

Per frame this solves

    min_q  sum_i w_i ||psi_i(q) - target_i||^2
    s.t.   phi_j(q) >= margin   (collision clearances)
           q_min <= q <= q_max

with sequential quadratic programming: Gauss-Newton model of the objective,
linearized clearance rows, an infinity-norm trust region folded into the
variable bounds, and a filter acceptance rule (objective and constraint
violation may not both worsen). The inner subproblems go through qp_solve,
a dual active-set method for small strictly convex QPs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .embodiments import CorrespondenceMap, DemoTrajectory, Embodiment, default_correspondence
from .geometry import Box, Circle, HalfPlane, PairPlacement, Pose2, sdf_gradient


class QpError(ValueError):
    """Malformed QP input (shape mismatch, indefinite Hessian)."""


@dataclass(frozen=True)
class QpResult:
    """Solution of one box-and-rows QP.

    active holds indices into the stacked row system: caller rows first, then
    lower bounds, then upper bounds.
    """

    x: np.ndarray
    objective: float
    active: tuple[int, ...]
    iterations: int
    status: str  # "optimal" | "infeasible"

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _stack_rows(n, rows, rhs, lb, ub):
    """Fold bound constraints into the inequality system A x >= b."""
    blocks = []
    rhs_blocks = []
    if rows is not None and len(rows):
        blocks.append(np.asarray(rows, dtype=float).reshape(-1, n))
        rhs_blocks.append(np.asarray(rhs, dtype=float).ravel())
    eye = np.eye(n)
    if lb is not None:
        finite = np.isfinite(lb)
        blocks.append(eye[finite])
        rhs_blocks.append(lb[finite])
    if ub is not None:
        finite = np.isfinite(ub)
        blocks.append(-eye[finite])
        rhs_blocks.append(-ub[finite])
    if not blocks:
        return np.zeros((0, n)), np.zeros(0)
    return np.vstack(blocks), np.concatenate(rhs_blocks)


def qp_solve(H, g, rows=None, rhs=None, lb=None, ub=None, max_iter: int = 200) -> QpResult:
    """Minimize 0.5 x^T H x + g^T x subject to rows @ x >= rhs and lb <= x <= ub.

    H must be symmetric positive definite. Dual active-set iteration: start at
    the unconstrained minimum and add the most violated constraint, dropping
    blocking rows as their multipliers hit zero. Finite for strictly convex
    problems; declares infeasibility when a violated row admits no primal step
    and no positive dual step.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float).ravel()
    n = g.shape[0]
    if H.shape != (n, n):
        raise QpError(f"H shape {H.shape} does not match g length {n}")
    if lb is not None:
        lb = np.asarray(lb, dtype=float).ravel()
    if ub is not None:
        ub = np.asarray(ub, dtype=float).ravel()
    if lb is not None and ub is not None and np.any(lb > ub + 1e-15):
        return QpResult(np.clip(-np.linalg.solve(H, g), lb, ub), math.nan, (), 0, "infeasible")
    try:
        chol = np.linalg.cholesky((H + H.T) / 2.0)
    except np.linalg.LinAlgError:
        raise QpError("H must be positive definite") from None

    def h_solve(v):
        y = np.linalg.solve(chol, v)
        return np.linalg.solve(chol.T, y)

    A, b = _stack_rows(n, rows, rhs, lb, ub)
    x = h_solve(-g)
    work: list[int] = []
    lam: list[float] = []
    feas_tol = 1e-10 * max(1.0, float(np.abs(b).max()) if b.size else 1.0)

    iters = 0
    while iters < max_iter:
        iters += 1
        slack = A @ x - b if A.shape[0] else np.zeros(0)
        cand = -1
        worst = -feas_tol
        for i in range(A.shape[0]):
            if i in work:
                continue
            if slack[i] < worst:
                worst = slack[i]
                cand = i
        if cand < 0:
            break
        npl = A[cand]
        scale = max(1.0, float(npl @ npl))
        lam_cand = 0.0
        # inner loop: drive constraint cand to its boundary
        guard = 0
        while True:
            guard += 1
            if guard > 4 * (A.shape[0] + 1):
                return QpResult(x, 0.5 * x @ H @ x + g @ x, tuple(sorted(work)), iters, "infeasible")
            dependent = False
            if work:
                Aw = A[work]
                coef, *_ = np.linalg.lstsq(Aw.T, npl, rcond=None)
                resid = npl - Aw.T @ coef
                # a row (nearly) inside the working span admits no primal step
                dependent = float(resid @ resid) <= 1e-18 * scale
            if dependent:
                r = coef
                z = np.zeros(n)
            elif work:
                HiA = np.linalg.solve(H, Aw.T)  # n x k
                S = Aw @ HiA
                Hin = h_solve(npl)
                r = np.linalg.solve(S, Aw @ Hin)
                z = Hin - HiA @ r
            else:
                r = np.zeros(0)
                z = h_solve(npl)
            zn = z @ npl
            if zn > 1e-12 * scale:
                t2 = -(A[cand] @ x - b[cand]) / zn
            else:
                t2 = math.inf
            t1 = math.inf
            drop = -1
            for j in range(len(work)):
                if r[j] > 1e-12:
                    ratio = lam[j] / r[j]
                    if ratio < t1:
                        t1 = ratio
                        drop = j
            t = min(t1, t2)
            if not math.isfinite(t):
                return QpResult(x, 0.5 * x @ H @ x + g @ x, tuple(sorted(work)), iters, "infeasible")
            if t > 0.0:
                x = x + t * z
                lam_cand += t
                for j in range(len(lam)):
                    lam[j] -= t * r[j]
            if t2 <= t1:
                work.append(cand)
                lam.append(lam_cand)
                # retighten: fresh equality solve over the working set
                Aw = A[work]
                kk = len(work)
                KKT = np.zeros((n + kk, n + kk))
                KKT[:n, :n] = H
                KKT[:n, n:] = -Aw.T
                KKT[n:, :n] = Aw
                try:
                    sol = np.linalg.solve(KKT, np.concatenate([-g, b[work]]))
                    x = sol[:n]
                    lam = [max(0.0, v) for v in sol[n:]]
                except np.linalg.LinAlgError:
                    pass
                break
            work.pop(drop)
            lam.pop(drop)
    obj = 0.5 * x @ H @ x + g @ x
    return QpResult(x, float(obj), tuple(sorted(work)), iters, "optimal")


@dataclass(frozen=True)
class Obstacle:
    """A static shape the robot's collision circles must clear this frame."""

    shape: object
    pose: Pose2


@dataclass
class FrameResult:
    q: np.ndarray
    objective: float
    max_violation: float
    iterations: int
    status: str  # "converged" | "max_iter" | "stalled"


@dataclass
class RetargetedTrajectory:
    """Per-frame robot configurations tracking a demonstration."""

    embodiment_name: str
    rate_hz: float
    q: np.ndarray  # (N, dof)
    object_poses: np.ndarray  # (N, 3)
    goal_pose: np.ndarray  # (3,)
    object_side: float
    frame_results: list[FrameResult] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.q.shape[0]) / self.rate_hz

    @property
    def duration(self) -> float:
        return (self.q.shape[0] - 1) / self.rate_hz

    @property
    def worst_violation(self) -> float:
        if not self.frame_results:
            return 0.0
        return max(fr.max_violation for fr in self.frame_results)

    def save(self, path) -> None:
        from .serialize import dump_json  # local import to avoid a cycle

        dump_json(
            {
                "schema": "contactgen.retargeted.v1",
                "embodiment": self.embodiment_name,
                "rate_hz": self.rate_hz,
                "q": self.q.tolist(),
                "object_poses": self.object_poses.tolist(),
                "goal_pose": np.asarray(self.goal_pose, dtype=float).tolist(),
                "object_side": self.object_side,
                "frames": [
                    {
                        "objective": fr.objective,
                        "max_violation": fr.max_violation,
                        "iterations": fr.iterations,
                        "status": fr.status,
                    }
                    for fr in self.frame_results
                ],
            },
            path,
        )

    @classmethod
    def load(cls, path) -> "RetargetedTrajectory":
        import json
        from pathlib import Path

        data = json.loads(Path(path).read_text())
        if data.get("schema") != "contactgen.retargeted.v1":
            raise ValueError(f"{path}: not a retargeted file (schema={data.get('schema')!r})")
        q = np.array(data["q"], dtype=float)
        frames = [
            FrameResult(
                q=q[i],
                objective=float(fr["objective"]),
                max_violation=float(fr["max_violation"]),
                iterations=int(fr["iterations"]),
                status=str(fr["status"]),
            )
            for i, fr in enumerate(data.get("frames", []))
        ]
        return cls(
            embodiment_name=str(data["embodiment"]),
            rate_hz=float(data["rate_hz"]),
            q=q,
            object_poses=np.array(data["object_poses"], dtype=float),
            goal_pose=np.array(data["goal_pose"], dtype=float),
            object_side=float(data["object_side"]),
            frame_results=frames,
        )


def _pair_maps(embodiment: Embodiment, obstacles: Sequence[Obstacle]):
    """Clearance pair evaluators: every collision circle vs every obstacle,
    plus the circle-circle pair. Each returns a PairPlacement whose jac_a is
    the relative center Jacobian, so sdf_gradient stays analytic."""
    radii = [c[1] for c in embodiment.collision_circles(embodiment.home_q)]
    maps: list[Callable[[np.ndarray], PairPlacement]] = []
    for i in range(len(radii)):
        for obs in obstacles:
            def make(i=i, obs=obs):
                def pm(q):
                    pts = embodiment.landmark_points(q)
                    return PairPlacement(
                        Circle(radii[i]),
                        Pose2(pts[i][0], pts[i][1], 0.0),
                        obs.shape,
                        obs.pose,
                        jac_a=embodiment.landmark_jacobian(q, i),
                    )
                return pm
            maps.append(make())

    def circle_circle(q):
        pts = embodiment.landmark_points(q)
        ja = embodiment.landmark_jacobian(q, 0) - embodiment.landmark_jacobian(q, 1)
        return PairPlacement(
            Circle(radii[0]),
            Pose2(pts[0][0], pts[0][1], 0.0),
            Circle(radii[1]),
            Pose2(pts[1][0], pts[1][1], 0.0),
            jac_a=ja,
        )

    maps.append(circle_circle)
    return maps


def _objective(embodiment, q, targets, weights):
    pts = embodiment.landmark_points(q)
    res = pts - targets
    return float(np.sum(weights[:, None] * res * res))


def _violation(pairs, q, margin):
    worst = 0.0
    for pm in pairs:
        g = sdf_gradient(pm, q)
        worst = max(worst, margin - g.value)
    return worst


def retarget_frame(
    embodiment: Embodiment,
    targets,
    q_init,
    *,
    weights=None,
    obstacles: Sequence[Obstacle] = (),
    margin: float = 1e-3,
    max_iters: int = 40,
    step_tol: float = 1e-9,
) -> FrameResult:
    """Solve one frame of the retargeting problem from the given start point."""
    targets = np.asarray(targets, dtype=float).reshape(embodiment.n_landmarks, 2)
    if weights is None:
        weights = np.ones(embodiment.n_landmarks)
    weights = np.asarray(weights, dtype=float)
    q = embodiment.clamp(q_init)
    pairs = _pair_maps(embodiment, obstacles)

    obj = _objective(embodiment, q, targets, weights)
    viol = _violation(pairs, q, margin)
    trust = 0.2
    status = "max_iter"
    it = 0
    for it in range(1, max_iters + 1):
        pts = embodiment.landmark_points(q)
        H = np.zeros((4, 4))
        g = np.zeros(4)
        for i in range(embodiment.n_landmarks):
            J = embodiment.landmark_jacobian(q, i)
            r = pts[i] - targets[i]
            H += 2.0 * weights[i] * (J.T @ J)
            g += 2.0 * weights[i] * (J.T @ r)
        H += 1e-8 * np.eye(4)

        grads = [sdf_gradient(pm, q) for pm in pairs]
        rows = np.array([gr.grad for gr in grads])
        rhs = np.array([margin - gr.value for gr in grads])
        lb = np.maximum(embodiment.q_min - q, -trust)
        ub = np.minimum(embodiment.q_max - q, trust)

        sol = qp_solve(H, g, rows=rows, rhs=rhs, lb=lb, ub=ub)
        if not sol.ok:
            # Restoration: push along the violated clearance gradients.
            push = np.zeros(4)
            for gr in grads:
                if gr.value < margin:
                    push -= gr.grad
            sol = qp_solve(np.eye(4) / max(trust, 1e-6), push, lb=lb, ub=ub)
            if not sol.ok:
                status = "stalled"
                break
        step = sol.x
        if float(np.abs(step).max()) < step_tol:
            status = "converged" if viol <= 1e-9 else "stalled"
            break
        q_new = embodiment.clamp(q + step)
        obj_new = _objective(embodiment, q_new, targets, weights)
        viol_new = _violation(pairs, q_new, margin)
        better_viol = viol_new <= viol - 1e-10
        non_worse = obj_new <= obj + 1e-12 and viol_new <= viol + 1e-12
        if non_worse or better_viol:
            moved = float(np.abs(q_new - q).max())
            q, obj, viol = q_new, obj_new, viol_new
            trust = min(trust * 1.5, 1.0)
            if moved < step_tol:
                status = "converged" if viol <= 1e-9 else "stalled"
                break
        else:
            trust *= 0.4
            if trust < 1e-10:
                status = "stalled"
                break
    final_viol = _violation(pairs, q, 0.0)  # true penetration, ignoring margin
    return FrameResult(q=q, objective=obj, max_violation=final_viol, iterations=it, status=status)


def frame_obstacles(object_side: float, object_pose, table_height: float = 0.0) -> list[Obstacle]:
    """Scene obstacles for one demo frame: the manipulated box and the table."""
    if not isinstance(object_pose, Pose2):
        p = np.asarray(object_pose, dtype=float)
        object_pose = Pose2(p[0], p[1], p[2])
    return [
        Obstacle(Box(object_side / 2.0, object_side / 2.0), object_pose),
        Obstacle(HalfPlane(normal=(0.0, 1.0), offset=-table_height), Pose2(0.0, 0.0, 0.0)),
    ]


def retarget_trajectory(
    demo: DemoTrajectory,
    embodiment: Embodiment,
    *,
    correspondence: CorrespondenceMap | None = None,
    margin: float = 1e-3,
    max_iters: int = 40,
) -> RetargetedTrajectory:
    """Retarget every demo frame, warm-starting each solve from the previous one.

    The demo is assumed already expressed at robot scale (see scale_demo);
    the correspondence map carries per-landmark weights.
    """
    if correspondence is None:
        correspondence = default_correspondence(embodiment)
    n = len(demo.frames)
    qs = np.empty((n, 4))
    results: list[FrameResult] = []
    q_prev: np.ndarray | None = None
    for f, frame in enumerate(demo.frames):
        targets = correspondence.demo_points(frame)
        obstacles = frame_obstacles(demo.object_side, frame.object_pose)
        if q_prev is None:
            q_prev = embodiment.kinematic_seed(targets)
        res = retarget_frame(
            embodiment,
            targets,
            q_prev,
            weights=correspondence.weights,
            obstacles=obstacles,
            margin=margin,
            max_iters=max_iters,
        )
        qs[f] = res.q
        results.append(res)
        q_prev = res.q
    return RetargetedTrajectory(
        embodiment_name=embodiment.name,
        rate_hz=demo.rate_hz,
        q=qs,
        object_poses=demo.object_array(),
        goal_pose=demo.goal_pose.as_array(),
        object_side=demo.object_side,
        frame_results=results,
    )
