"""Domain-randomized episode generation from retargeted demonstrations.

Each episode draws physical parameters and an initial-pose perturbation from
a seeded stream, then either tracks the retargeted reference closed-loop
(trajopt mode) or replays it open-loop (replay mode). Episodes land in
`episodes/ep_<k>.jsonl` (one header line, then one line per 50 Hz control
tick) next to a `manifest.json`; every float is written with 17 significant
digits so stored episodes re-simulate bit-identically from their own commands.

Determinism: episode k depends only on (master seed, k), never on worker
count or scheduling; manifests from identical configs hash identically.
"""

from __future__ import annotations

import hashlib
import json
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import KnotTrajectory, PhysicalParams, arms_physics, rollout_vector
from .embodiments import DemoTrajectory, Embodiment, get_embodiment, scale_demo
from .geometry import wrap_angle
from .retarget import RetargetedTrajectory, retarget_trajectory
from .serialize import dumps_json
from .trajopt import (
    CemConfig,
    CostWeights,
    ReferenceTrack,
    SuccessSpec,
    mpc_track,
    steps_per_tick,
    tick_rollout,
)

# One-factor-at-a-time perturbation buckets plus the everything-at-once one;
# the manifest reports success per bucket so the failure pattern of open-loop
# replay is attributable to individual factors.
BUCKETS = ("translation", "rotation", "size", "mass", "friction", "joint")

EPISODE_SCHEMA = "contactgen.episode.v1"
MANIFEST_SCHEMA = "contactgen.dataset.v1"


@dataclass(frozen=True)
class RandomizationSpec:
    """Uniform ranges for per-episode physics and initial-pose sampling.

    translation/rotation are half-widths of symmetric perturbations of the
    demo's initial object pose (x and tilt only; the box always starts resting
    on the table, so the tilt is dropped-and-settled before the episode).
    """

    translation: float = 0.015
    rotation: float = 0.3
    side: tuple[float, float] = (0.058, 0.062)
    mass: tuple[float, float] = (0.1, 0.3)
    friction: tuple[float, float] = (0.7, 1.3)
    master_seed: int = 0

    def __post_init__(self):
        if self.translation < 0 or self.rotation < 0:
            raise ValueError("perturbation half-widths must be nonnegative")
        for name in ("side", "mass", "friction"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"{name} range must satisfy 0 < low <= high")

    @classmethod
    def for_embodiment(cls, embodiment: Embodiment, master_seed: int = 0) -> "RandomizationSpec":
        if embodiment.kind == 1:
            return cls(
                translation=0.05,
                rotation=0.3,
                side=(0.28, 0.32),
                mass=(0.25, 0.75),
                friction=(0.2, 0.4),
                master_seed=master_seed,
            )
        return cls(master_seed=master_seed)


def sample_params(
    spec: RandomizationSpec,
    index: int,
    base_params: PhysicalParams,
    bucket: str = "joint",
) -> tuple[PhysicalParams, float, float]:
    """Draw (params, dx, dtheta) for episode `index`.

    All five factors are always drawn (the stream layout never depends on the
    bucket); the bucket only selects which draws replace their nominals, so
    one-factor buckets hold everything else at the base values.
    """
    if bucket not in BUCKETS:
        raise ValueError(f"unknown bucket {bucket!r}; choices: {BUCKETS}")
    rng = np.random.default_rng(np.random.SeedSequence(spec.master_seed, spawn_key=(index, 0)))
    dx = rng.uniform(-spec.translation, spec.translation)
    dtheta = rng.uniform(-spec.rotation, spec.rotation)
    side = rng.uniform(spec.side[0], spec.side[1])
    mass = rng.uniform(spec.mass[0], spec.mass[1])
    friction = rng.uniform(spec.friction[0], spec.friction[1])

    joint = bucket == "joint"
    params = base_params.with_overrides(
        object_half_extent=side / 2.0 if joint or bucket == "size" else base_params.object_half_extent,
        object_mass=mass if joint or bucket == "mass" else base_params.object_mass,
        friction_mu=friction if joint or bucket == "friction" else base_params.friction_mu,
    )
    if not (joint or bucket == "translation"):
        dx = 0.0
    if not (joint or bucket == "rotation"):
        dtheta = 0.0
    return params, float(dx), float(dtheta)


def planner_rng(spec: RandomizationSpec, index: int) -> np.random.Generator:
    """Planner noise stream for episode `index`, independent of the parameter stream."""
    return np.random.default_rng(np.random.SeedSequence(spec.master_seed, spawn_key=(index, 1)))


def settle_initial(
    params: PhysicalParams,
    embodiment: Embodiment,
    base_pose: np.ndarray,
    dx: float,
    dtheta: float,
    robot_q: np.ndarray,
    settle_time: float = 1.0,
) -> np.ndarray:
    """Initial world state: perturbed box dropped onto the table and settled.

    The tilted box is released with its lowest corner a hair above the table
    and simulated for settle_time with the robot holding robot_q; velocities
    are then zeroed so episodes start from rest. Perturbing tilt this way is
    the planar stand-in for the yaw perturbation of a top-down task: the box
    always ends up flat, but where it ends up depends on the drop dynamics.
    """
    theta = base_pose[2] + dtheta
    half = params.object_half_extent
    lift = half * (abs(np.cos(theta)) + abs(np.sin(theta))) + 1e-4
    state = np.zeros(14)
    state[0] = base_pose[0] + dx
    state[1] = lift
    state[2] = theta
    state[6:10] = robot_q
    hold = KnotTrajectory(np.array([0.0]), robot_q.reshape(1, -1))
    n_steps = max(1, int(round(settle_time / params.sim_dt)))
    res = rollout_vector(state, hold, n_steps, params, embodiment)
    if res.failed_at is not None:
        raise RuntimeError(f"settling blew up at step {res.failed_at}")
    out = res.states[-1].copy()
    out[3:6] = 0.0
    out[10:14] = 0.0
    return out


def success_check(
    states: np.ndarray,
    goal: np.ndarray,
    criteria: SuccessSpec,
    dt: float,
) -> tuple[bool, float, float]:
    """Terminal-hold success plus the final pose error.

    Success requires every state in the trailing hold window to lie within
    both tolerances; a trajectory shorter than the window is judged on what
    exists.
    """
    if states.shape[0] == 0:
        raise ValueError("empty trajectory")
    hold = max(1, int(round(criteria.hold_time / dt)))
    tail = states[-(hold + 1):]
    ok = True
    for s in tail:
        pos = float(np.hypot(s[0] - goal[0], s[1] - goal[1]))
        rot = abs(wrap_angle(s[2] - goal[2]))
        if pos > criteria.pos_tol or rot > criteria.rot_tol:
            ok = False
            break
    last = states[-1]
    pos_err = float(np.hypot(last[0] - goal[0], last[1] - goal[1]))
    rot_err = abs(wrap_angle(last[2] - goal[2]))
    return ok, pos_err, float(rot_err)


@dataclass
class Episode:
    """One generated trajectory at control-tick resolution."""

    episode_id: str
    index: int
    master_seed: int
    mode: str  # "trajopt" | "replay"
    bucket: str
    demo_id: str
    embodiment: str
    params: PhysicalParams
    initial: np.ndarray  # (14,)
    goal: np.ndarray  # (3,)
    states: np.ndarray  # (T+1, 14) at control ticks
    commands: np.ndarray  # (T, dof)
    control_hz: float
    success: bool
    pos_error: float
    rot_error: float
    failure: str | None  # None | "planner" | "blowup" | "timeout" | "miss"
    success_time: float | None = None
    cost_traces: list[list[float]] = field(default_factory=list)

    def header(self) -> dict:
        return {
            "schema": EPISODE_SCHEMA,
            "episode_id": self.episode_id,
            "index": self.index,
            "master_seed": self.master_seed,
            "mode": self.mode,
            "bucket": self.bucket,
            "demo_id": self.demo_id,
            "embodiment": self.embodiment,
            "params": asdict(self.params),
            "initial": self.initial,
            "goal": self.goal,
            "control_hz": self.control_hz,
            "n_ticks": int(self.commands.shape[0]),
            "success": self.success,
            "pos_error": self.pos_error,
            "rot_error": self.rot_error,
            "failure": self.failure,
            "success_time": self.success_time,
            "cost_traces": self.cost_traces,
        }

    def to_jsonl(self) -> str:
        lines = [dumps_json(self.header())]
        tick_dt = 1.0 / self.control_hz
        n = self.commands.shape[0]
        for t in range(n + 1):
            s = self.states[t]
            lines.append(
                dumps_json(
                    {
                        "t": t * tick_dt,
                        "q": s[6:10],
                        "v": s[10:14],
                        "object": s[0:3],
                        "twist": s[3:6],
                        "u": self.commands[t] if t < n else None,
                    }
                )
            )
        return "\n".join(lines) + "\n"


def load_episode(path) -> Episode:
    text = Path(path).read_text()
    lines = text.strip("\n").split("\n")
    head = json.loads(lines[0])
    if head.get("schema") != EPISODE_SCHEMA:
        raise ValueError(f"not an episode file: {path}")
    ticks = [json.loads(line) for line in lines[1:]]
    n = head["n_ticks"]
    if len(ticks) != n + 1:
        raise ValueError(f"expected {n + 1} tick lines, found {len(ticks)}")
    dof = len(ticks[0]["q"])
    states = np.empty((n + 1, 14))
    commands = np.empty((n, dof))
    for t, row in enumerate(ticks):
        states[t, 0:3] = row["object"]
        states[t, 3:6] = row["twist"]
        states[t, 6:10] = row["q"]
        states[t, 10:14] = row["v"]
        if t < n:
            if row["u"] is None:
                raise ValueError(f"tick {t} missing command")
            commands[t] = row["u"]
    return Episode(
        episode_id=head["episode_id"],
        index=head["index"],
        master_seed=head["master_seed"],
        mode=head["mode"],
        bucket=head["bucket"],
        demo_id=head["demo_id"],
        embodiment=head["embodiment"],
        params=PhysicalParams(**head["params"]),
        initial=np.asarray(head["initial"], dtype=float),
        goal=np.asarray(head["goal"], dtype=float),
        states=states,
        commands=commands,
        control_hz=head["control_hz"],
        success=head["success"],
        pos_error=head["pos_error"],
        rot_error=head["rot_error"],
        failure=head["failure"],
        success_time=head["success_time"],
        cost_traces=head.get("cost_traces", []),
    )


def replay_episode_states(episode: Episode, embodiment: Embodiment | None = None) -> tuple[bool, float]:
    """Re-simulate a stored episode from its own commands.

    Returns (bit_identical, max_abs_difference) against the stored tick states.
    """
    emb = embodiment or get_embodiment(episode.embodiment)
    want = episode.states
    if episode.commands.shape[0] == 0:
        got = episode.initial[None, :]
    else:
        res, spt = tick_rollout(episode.initial, episode.commands, episode.params, emb, episode.control_hz)
        last_valid = res.states.shape[0] if res.failed_at is None else res.failed_at + 1
        got = res.states[:last_valid:spt]
    if got.shape[0] != want.shape[0]:
        return False, float("inf")
    diff = float(np.max(np.abs(got - want))) if got.size else 0.0
    return bool(np.array_equal(got, want)), diff


@dataclass(frozen=True)
class _EpisodeContext:
    """Everything a worker needs; built once, pickled once per worker."""

    spec: RandomizationSpec
    mode: str
    embodiment_name: str
    base_params: PhysicalParams
    cem: CemConfig
    weights: CostWeights | None
    success: SuccessSpec
    control_hz: float
    demo_ids: tuple[str, ...]
    references: tuple[RetargetedTrajectory, ...]
    timeout_factor: float
    execution_fraction: float
    settle_time: float
    replay_hold: float


def run_episode(ctx: _EpisodeContext, index: int) -> Episode:
    """Generate episode `index` deterministically from the context."""
    emb = get_embodiment(ctx.embodiment_name)
    n_demos = len(ctx.references)
    demo_slot = index % n_demos
    bucket = BUCKETS[(index // n_demos) % len(BUCKETS)]
    ret = ctx.references[demo_slot]
    params, dx, dtheta = sample_params(ctx.spec, index, ctx.base_params, bucket)
    initial = settle_initial(
        params, emb, ret.object_poses[0], dx, dtheta, ret.q[0], ctx.settle_time
    )
    spt = steps_per_tick(params, ctx.control_hz)
    goal = np.asarray(ret.goal_pose, dtype=float)

    failure: str | None = None
    success_time: float | None = None
    cost_traces: list[list[float]] = []

    if ctx.mode == "trajopt":
        track = ReferenceTrack.from_retargeted(ret)
        rng = planner_rng(ctx.spec, index)
        tres = mpc_track(
            initial,
            track,
            params,
            emb,
            ctx.cem,
            rng,
            weights=ctx.weights,
            success=ctx.success,
            execution_fraction=ctx.execution_fraction,
            timeout_factor=ctx.timeout_factor,
            tick_hz=ctx.control_hz,
        )
        dense_cmds = tres.cmds
        failure = tres.failure
        success_time = tres.success_time
        cost_traces = [w.trace for w in tres.windows]
    else:
        if ctx.mode != "replay":
            raise ValueError(f"unknown mode {ctx.mode!r}")
        n_steps = int(round((ret.times[-1] + ctx.replay_hold) / params.sim_dt))
        knots = KnotTrajectory(ret.times, ret.q)
        res = rollout_vector(initial, knots, n_steps, params, emb)
        if res.failed_at is not None:
            dense_cmds = res.commands[: res.failed_at]
            failure = "blowup"
        else:
            dense_cmds = res.commands

    # Canonical pass: resample commands on the tick grid, re-simulate, and make
    # that trajectory the stored truth (episodes must replay from their files).
    tick_probe = np.ascontiguousarray(dense_cmds[::spt])
    if tick_probe.shape[0] == 0:
        tick_cmds = np.empty((0, emb.dof))
        tick_states = initial[None, :].copy()
        success, pos_err, rot_err = success_check(tick_states, goal, ctx.success, params.sim_dt)
        failure = failure or ("miss" if not success else None)
        success_time = None
    else:
        canon, _ = tick_rollout(initial, tick_probe, params, emb, ctx.control_hz)
        if canon.failed_at is not None:
            n_ticks = canon.failed_at // spt
            tick_cmds = tick_probe[:n_ticks]
            tick_states = canon.states[: n_ticks * spt + 1 : spt].copy()
            failure = "blowup"
            success = False
            pos_err = rot_err = float("inf")
            success_time = None
        else:
            tick_cmds = tick_probe
            tick_states = canon.states[::spt].copy()
            success, pos_err, rot_err = success_check(canon.states, goal, ctx.success, params.sim_dt)
            if success:
                failure = None
            elif failure is None:
                failure = "miss"
            if not success:
                success_time = None

    return Episode(
        episode_id=f"ep_{index:06d}",
        index=index,
        master_seed=ctx.spec.master_seed,
        mode=ctx.mode,
        bucket=bucket,
        demo_id=ctx.demo_ids[demo_slot],
        embodiment=ctx.embodiment_name,
        params=params,
        initial=initial,
        goal=goal,
        states=tick_states,
        commands=tick_cmds,
        control_hz=ctx.control_hz,
        success=success,
        pos_error=pos_err if np.isfinite(pos_err) else 1e9,
        rot_error=rot_err if np.isfinite(rot_err) else 1e9,
        failure=failure,
        success_time=success_time,
        cost_traces=cost_traces,
    )


_WORKER_CTX: _EpisodeContext | None = None


def _init_worker(ctx_bytes: bytes) -> None:
    global _WORKER_CTX
    _WORKER_CTX = pickle.loads(ctx_bytes)


def _worker_job(index: int) -> tuple[int, str, dict]:
    ep = run_episode(_WORKER_CTX, index)
    return index, ep.to_jsonl(), _manifest_entry(ep)


def _manifest_entry(ep: Episode) -> dict:
    return {
        "id": ep.episode_id,
        "file": f"episodes/{ep.episode_id}.jsonl",
        "demo_id": ep.demo_id,
        "bucket": ep.bucket,
        "success": ep.success,
        "failure": ep.failure,
        "pos_error": ep.pos_error,
        "rot_error": ep.rot_error,
        "n_ticks": int(ep.commands.shape[0]),
    }


def demo_identifier(slot: int, demo: DemoTrajectory) -> str:
    name = demo.metadata.get("script", "demo")
    return f"{slot}:{name}"


def generate(
    demos: Sequence[DemoTrajectory],
    embodiment: Embodiment,
    spec: RandomizationSpec,
    n_episodes: int,
    mode: str,
    out_dir,
    *,
    workers: int = 1,
    cem: CemConfig | None = None,
    weights: CostWeights | None = None,
    success: SuccessSpec | None = None,
    base_params: PhysicalParams | None = None,
    control_hz: float | None = None,
    timeout_factor: float = 2.0,
    execution_fraction: float = 0.5,
    settle_time: float = 1.0,
    replay_hold: float = 1.0,
) -> dict:
    """Generate a dataset directory; returns the manifest dict.

    Demos are retargeted once (at their recorded scale times the embodiment's
    demo scale), then episodes round-robin over them while the perturbation
    bucket advances every full demo cycle, so every (demo, bucket) pair is
    exercised. Individual episode failures are recorded, never fatal.
    """
    if mode not in ("trajopt", "replay"):
        raise ValueError(f"mode must be 'trajopt' or 'replay', got {mode!r}")
    if n_episodes < 0:
        raise ValueError("n_episodes must be nonnegative")
    if not demos:
        raise ValueError("need at least one demonstration")
    base = base_params or (arms_physics() if embodiment.kind == 1 else PhysicalParams())
    rate = control_hz or demos[0].rate_hz

    references = []
    demo_ids = []
    for slot, demo in enumerate(demos):
        scaled = scale_demo(demo, embodiment.demo_scale)
        references.append(retarget_trajectory(scaled, embodiment))
        demo_ids.append(demo_identifier(slot, demo))

    ctx = _EpisodeContext(
        spec=spec,
        mode=mode,
        embodiment_name=embodiment.name,
        base_params=base,
        cem=cem or CemConfig.for_embodiment(embodiment),
        weights=weights,
        success=success or SuccessSpec.for_embodiment(embodiment),
        control_hz=rate,
        demo_ids=tuple(demo_ids),
        references=tuple(references),
        timeout_factor=timeout_factor,
        execution_fraction=execution_fraction,
        settle_time=settle_time,
        replay_hold=replay_hold,
    )

    out = Path(out_dir)
    (out / "episodes").mkdir(parents=True, exist_ok=True)

    results: list[tuple[int, str, dict]] = []
    if workers <= 1 or n_episodes <= 1:
        for i in range(n_episodes):
            ep = run_episode(ctx, i)
            results.append((i, ep.to_jsonl(), _manifest_entry(ep)))
    else:
        ctx_bytes = pickle.dumps(ctx)
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(ctx_bytes,)) as pool:
            results = list(pool.map(_worker_job, range(n_episodes)))
    results.sort(key=lambda r: r[0])

    entries = []
    hasher = hashlib.sha256()
    for index, text, entry in results:
        path = out / "episodes" / f"ep_{index:06d}.jsonl"
        data = text.encode()
        path.write_bytes(data)
        digest = hashlib.sha256(data).hexdigest()
        entry = dict(entry, sha256=digest)
        entries.append(entry)
        hasher.update(digest.encode())

    counts = _manifest_counts(entries)
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "mode": mode,
        "embodiment": embodiment.name,
        "master_seed": spec.master_seed,
        "n_episodes": n_episodes,
        "config": {
            "randomization": asdict(spec),
            "cem": asdict(ctx.cem),
            "weights": asdict(ctx.weights) if ctx.weights is not None else None,
            "success": asdict(ctx.success),
            "base_params": asdict(base),
            "control_hz": rate,
            "timeout_factor": timeout_factor,
            "execution_fraction": execution_fraction,
            "settle_time": settle_time,
            "replay_hold": replay_hold,
            "demos": demo_ids,
        },
        "episodes": entries,
        "counts": counts,
        "content_hash": hasher.hexdigest(),
    }
    (out / "manifest.json").write_text(dumps_json(manifest) + "\n")
    return manifest


def _manifest_counts(entries: list[dict]) -> dict:
    by_bucket: dict[str, dict] = {}
    by_demo: dict[str, dict] = {}
    failures: dict[str, int] = {}
    n_success = 0
    for e in entries:
        n_success += bool(e["success"])
        b = by_bucket.setdefault(e["bucket"], {"total": 0, "success": 0})
        b["total"] += 1
        b["success"] += bool(e["success"])
        d = by_demo.setdefault(e["demo_id"], {"total": 0, "success": 0})
        d["total"] += 1
        d["success"] += bool(e["success"])
        if e["failure"]:
            failures[e["failure"]] = failures.get(e["failure"], 0) + 1
    return {
        "total": len(entries),
        "success": n_success,
        "by_bucket": by_bucket,
        "by_demo": by_demo,
        "failures": failures,
    }


def load_manifest(path) -> dict:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != MANIFEST_SCHEMA:
        raise ValueError(f"not a dataset manifest: {path}")
    return data


def recount_manifest(manifest: dict, root) -> dict:
    """Recompute counts from the episode files themselves (audit path)."""
    root = Path(root)
    entries = []
    for entry in manifest["episodes"]:
        ep = load_episode(root / entry["file"])
        entries.append(_manifest_entry(ep))
    return _manifest_counts(entries)
