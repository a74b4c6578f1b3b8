"""Vector-image rendering of stored episodes, one SVG per sampled tick.

Presentation only: nothing here feeds back into simulation or datasets. The
world is drawn in a fixed window per embodiment (table at y = 0), mapped to a
600 px wide canvas with y flipped for screen coordinates.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .embodiments import Embodiment, get_embodiment

_WIDTH = 600.0


def _view(embodiment: Embodiment) -> tuple[float, float, float, float]:
    """(xmin, xmax, ymin, ymax) of the drawing window."""
    if embodiment.kind == 0:
        return (-0.45, 0.45, -0.06, 0.56)
    return (-1.7, 1.7, -0.25, 1.9)


class _Canvas:
    def __init__(self, view: tuple[float, float, float, float]):
        self.xmin, self.xmax, self.ymin, self.ymax = view
        self.scale = _WIDTH / (self.xmax - self.xmin)
        self.h = (self.ymax - self.ymin) * self.scale
        self.parts: list[str] = []

    def pt(self, x: float, y: float) -> tuple[float, float]:
        return ((x - self.xmin) * self.scale, (self.ymax - y) * self.scale)

    def line(self, a, b, stroke: str, width: float = 2.0, dash: str | None = None) -> None:
        (x1, y1), (x2, y2) = self.pt(*a), self.pt(*b)
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{stroke}" stroke-width="{width}"{d}/>'
        )

    def circle(self, c, r_world: float, fill: str) -> None:
        x, y = self.pt(*c)
        self.parts.append(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r_world * self.scale:.2f}" fill="{fill}"/>'
        )

    def box(self, pose, half: float, stroke: str, fill: str, dash: str | None = None) -> None:
        x, y, th = pose
        c, s = math.cos(th), math.sin(th)
        corners = []
        for dx, dy in ((-half, -half), (half, -half), (half, half), (-half, half)):
            wx = x + c * dx - s * dy
            wy = y + s * dx + c * dy
            px, py = self.pt(wx, wy)
            corners.append(f"{px:.2f},{py:.2f}")
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polygon points="{" ".join(corners)}" fill="{fill}" stroke="{stroke}" '
            f'stroke-width="2"{d}/>'
        )

    def text(self, x_px: float, y_px: float, s: str) -> None:
        self.parts.append(f'<text x="{x_px}" y="{y_px}" font-size="14" fill="#555">{s}</text>')

    def svg(self) -> str:
        body = "\n".join(self.parts)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH:.0f}" '
            f'height="{self.h:.0f}" viewBox="0 0 {_WIDTH:.0f} {self.h:.0f}">\n'
            f'<rect width="100%" height="100%" fill="#fafafa"/>\n{body}\n</svg>\n'
        )


def render_state(
    state: np.ndarray,
    embodiment: Embodiment,
    object_half: float,
    goal: np.ndarray | None = None,
    label: str = "",
) -> str:
    """Render one 14-dim world state to an SVG document string."""
    cv = _Canvas(_view(embodiment))
    cv.line((cv.xmin, 0.0), (cv.xmax, 0.0), "#888", 2.0)
    if goal is not None:
        cv.box((goal[0], goal[1], goal[2]), object_half, "#2a9d8f", "none", dash="6 4")
    cv.box((state[0], state[1], state[2]), object_half, "#264653", "#e9c46a")
    q = state[6:10]
    if embodiment.kind == 1:
        for i, arm in enumerate(embodiment.arms):
            elbow, tip, _, _ = embodiment._arm_points(arm, q[2 * i], q[2 * i + 1])
            cv.line(arm.base, elbow, "#6c757d", 5.0)
            cv.line(elbow, tip, "#6c757d", 4.0)
            cv.circle(tip, arm.tip_radius, "#e76f51")
    else:
        for c, r in embodiment.collision_circles(q):
            cv.circle(c, r, "#e76f51")
    if label:
        cv.text(8, 18, label)
    return cv.svg()


def render_episode(episode, out_dir, stride: int = 10) -> list[Path]:
    """Write every stride-th tick of a stored episode as frame_%05d.svg."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    emb = get_embodiment(episode.embodiment)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    half = episode.params.object_half_extent
    paths = []
    for j, i in enumerate(range(0, episode.states.shape[0], stride)):
        label = f"{episode.episode_id}  tick {i}"
        doc = render_state(episode.states[i], emb, half, episode.goal, label)
        p = out / f"frame_{j:05d}.svg"
        p.write_text(doc)
        paths.append(p)
    return paths
